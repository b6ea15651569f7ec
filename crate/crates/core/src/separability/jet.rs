//! Truncated multivariate Taylor series ("jets") for automatic
//! differentiation of smooth kernels to a fixed total degree.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

/// Monomial layout shared by all jets of one `(variables, degree)` shape.
#[derive(Debug)]
pub struct JetShape {
    vars: usize,
    degree: usize,
    exponents: Vec<Vec<u32>>,
    /// `(i, j, k)` with `exponents[i] + exponents[j] = exponents[k]`.
    products: Vec<(usize, usize, usize)>,
}

impl JetShape {
    pub fn new(vars: usize, degree: usize) -> Arc<Self> {
        let mut exponents = Vec::new();
        for total in 0..=degree {
            let mut cur = vec![0u32; vars];
            push_compositions(total as u32, 0, &mut cur, &mut exponents);
        }
        let index: HashMap<&[u32], usize> = exponents.iter().enumerate().map(|(i, e)| (e.as_slice(), i)).collect();
        let mut products = Vec::new();
        let mut sum = vec![0u32; vars];
        for (i, a) in exponents.iter().enumerate() {
            let da: u32 = a.iter().sum();
            for (j, b) in exponents.iter().enumerate() {
                let db: u32 = b.iter().sum();
                if (da + db) as usize > degree {
                    continue;
                }
                for v in 0..vars {
                    sum[v] = a[v] + b[v];
                }
                products.push((i, j, index[sum.as_slice()]));
            }
        }
        Arc::new(JetShape { vars, degree, exponents, products })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Multi-indices ordered by total degree.
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }
}

fn push_compositions(remaining: u32, var: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if var + 1 == cur.len() {
        cur[var] = remaining;
        out.push(cur.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        cur[var] = e;
        push_compositions(remaining - e, var + 1, cur, out);
    }
    cur[var] = 0;
}

/// Taylor coefficients `c_α` of `f(a + h) = Σ_{|α| ≤ k} c_α h^α`.
#[derive(Clone, Debug)]
pub struct Jet {
    shape: Arc<JetShape>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(shape: &Arc<JetShape>, value: f64) -> Self {
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[0] = value;
        Jet { shape: shape.clone(), coeffs }
    }

    /// The coordinate function `a_var + h_var`.
    pub fn variable(shape: &Arc<JetShape>, var: usize, value: f64) -> Self {
        let mut j = Jet::constant(shape, value);
        if shape.degree >= 1 {
            // Degree-one monomials follow the constant in `var` order.
            j.coeffs[1 + var] = 1.0;
        }
        j
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { shape: self.shape.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// `f ∘ self` given the scaled derivatives `d[j] = f^{(j)}(a₀)/j!` at
    /// the constant term `a₀`.
    pub fn compose(&self, d: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Jet::constant(&self.shape, d[0]);
        let mut power = Jet::constant(&self.shape, 1.0);
        for dj in d.iter().take(self.shape.degree + 1).skip(1) {
            power = &power * &h;
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += dj * p;
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let a = self.value().exp();
        let mut d = vec![a; self.shape.degree + 1];
        let mut fact = 1.0;
        for (j, dj) in d.iter_mut().enumerate().skip(1) {
            fact *= j as f64;
            *dj = a / fact;
        }
        self.compose(&d)
    }

    /// `self^p` for a positive constant term.
    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut d = Vec::with_capacity(self.shape.degree + 1);
        // f^{(j)}/j! = C(p, j) a^{p−j}
        let mut binom = 1.0;
        for j in 0..=self.shape.degree {
            if j > 0 {
                binom *= (p - (j - 1) as f64) / j as f64;
            }
            d.push(binom * a.powf(p - j as f64));
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet { shape: self.shape.clone(), coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet { shape: self.shape.clone(), coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.shape.products {
            coeffs[k] += self.coeffs[i] * rhs.coeffs[j];
        }
        Jet { shape: self.shape.clone(), coeffs }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeff(j: &Jet, e: &[u32]) -> f64 {
        let i = j.shape().exponents().iter().position(|x| x.as_slice() == e).unwrap();
        j.coeffs()[i]
    }

    #[test]
    fn monomial_count() {
        assert_eq!(JetShape::new(4, 3).len(), 35);
        assert_eq!(JetShape::new(6, 2).len(), 28);
        assert_eq!(JetShape::new(2, 0).len(), 1);
    }

    #[test]
    fn product_of_variables() {
        let s = JetShape::new(2, 3);
        let x = Jet::variable(&s, 0, 2.0);
        let y = Jet::variable(&s, 1, -1.0);
        let p = &(&x * &x) * &y; // x² y around (2, −1)
        assert_eq!(p.value(), -4.0);
        assert_eq!(coeff(&p, &[1, 0]), -4.0);
        assert_eq!(coeff(&p, &[0, 1]), 4.0);
        assert_eq!(coeff(&p, &[2, 1]), 1.0);
        assert_eq!(coeff(&p, &[1, 1]), 4.0);
    }

    #[test]
    fn univariate_series() {
        let s = JetShape::new(1, 6);
        let x = Jet::variable(&s, 0, 0.3);
        let e = x.exp();
        let mut fact = 1.0;
        for k in 0..=6u32 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((coeff(&e, &[k]) - 0.3f64.exp() / fact).abs() < 1e-15);
        }
        let r = x.sqrt();
        let sq = &r * &r;
        for k in 0..=6u32 {
            let expect = [0.3, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0][k as usize];
            assert!((coeff(&sq, &[k]) - expect).abs() < 1e-12);
        }
        let inv = x.powf(-1.0);
        assert!((coeff(&inv, &[3]) + 1.0 / 0.3f64.powi(4)).abs() < 1e-9);
    }
}
