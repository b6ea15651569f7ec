use crate::error::{Error, Result};

/// Coefficients larger than this are reported as a range error instead of
/// being carried into products that would overflow.
pub const COEFF_LIMIT: f64 = 1e280;

/// Monomial coefficients `c_{s,t}` of `C_s^λ(x) = Σ_t c_{s,t} x^t` for
/// `s = 0..=max_degree`.
#[derive(Clone, Debug)]
pub struct GegenbauerTable {
    lambda: f64,
    rows: Vec<Vec<f64>>,
}

impl GegenbauerTable {
    /// Builds the table from `s C_s = 2(s + λ - 1) x C_{s-1} - (s + 2λ - 2) C_{s-2}`.
    pub fn new(lambda: f64, max_degree: usize) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("Gegenbauer index must be finite and >= 0, got {lambda}")));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(max_degree + 1);
        rows.push(vec![1.0]);
        if max_degree >= 1 {
            rows.push(vec![0.0, 2.0 * lambda]);
        }
        for s in 2..=max_degree {
            let sf = s as f64;
            let a = 2.0 * (sf + lambda - 1.0) / sf;
            let b = (sf + 2.0 * lambda - 2.0) / sf;
            let mut row = vec![0.0; s + 1];
            // Only coefficients with the parity of s are nonzero.
            for t in (s % 2..=s).step_by(2) {
                let mut v = 0.0;
                if t >= 1 {
                    v += a * rows[s - 1][t - 1];
                }
                if t <= s - 2 {
                    v -= b * rows[s - 2][t];
                }
                if !v.is_finite() || v.abs() > COEFF_LIMIT {
                    return Err(Error::Range(format!(
                        "Gegenbauer coefficient c_({s},{t}) for lambda={lambda} exceeds {COEFF_LIMIT:e}"
                    )));
                }
                row[t] = v;
            }
            rows.push(row);
        }
        Ok(GegenbauerTable { lambda, rows })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn max_degree(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    /// `c_{s,t}`, zero for `t > s`.
    pub fn coeff(&self, s: usize, t: usize) -> f64 {
        self.rows[s].get(t).copied().unwrap_or(0.0)
    }

    /// Evaluates `Σ_t c_{s,t} x^t` with compensated summation.
    pub fn eval_monomial(&self, s: usize, x: f64) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut pw = 1.0;
        for &c in &self.rows[s] {
            let y = c * pw - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            pw *= x;
        }
        sum
    }
}

/// `C_s^λ(x)` by the three-term recurrence.
pub fn gegenbauer(s: usize, lambda: f64, x: f64) -> f64 {
    let mut c0 = 1.0;
    if s == 0 {
        return c0;
    }
    let mut c1 = 2.0 * lambda * x;
    for k in 2..=s {
        let kf = k as f64;
        let c2 = (2.0 * (kf + lambda - 1.0) * x * c1 - (kf + 2.0 * lambda - 2.0) * c0) / kf;
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// `C_s^λ(1) = Π_{i<s} (2λ + i) / s!`, the maximum of `|C_s^λ|` on `[-1, 1]`
/// for `λ > 0`.
pub fn gegenbauer_at_one(s: usize, lambda: f64) -> f64 {
    let mut v = 1.0;
    for i in 0..s {
        v *= (2.0 * lambda + i as f64) / (i as f64 + 1.0);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_index_gives_legendre() {
        let t = GegenbauerTable::new(0.5, 1).unwrap();
        assert_eq!(t.row(0), &[1.0]);
        assert_eq!(t.row(1), &[0.0, 1.0]);
        let t = GegenbauerTable::new(0.5, 12).unwrap();
        for s in 0..=12 {
            for &x in &[-0.9, -0.2, 0.4, 1.0] {
                let v = t.eval_monomial(s, x);
                assert!((v - super::super::legendre_real(s, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn value_at_one_matches_product_formula() {
        // n = 4, s = 3: 4·5·6/3! = 20 with λ = n/2.
        assert!((gegenbauer_at_one(3, 2.0) - 20.0).abs() < 1e-12);
        let t = GegenbauerTable::new(2.0, 3).unwrap();
        assert!((t.eval_monomial(3, 1.0) - 20.0).abs() < 1e-12);
        for n in 1..8usize {
            let lambda = n as f64 / 2.0;
            let t = GegenbauerTable::new(lambda, 10).unwrap();
            for s in 0..=10usize {
                let prod: f64 =
                    (0..s).map(|i| (n + i) as f64).product::<f64>() / (1..=s).map(|i| i as f64).product::<f64>();
                assert!((t.eval_monomial(s, 1.0) - prod).abs() < 1e-10 * prod.max(1.0));
                assert!((gegenbauer(s, lambda, 1.0) - prod).abs() < 1e-10 * prod.max(1.0));
            }
        }
    }

    #[test]
    fn structure_and_recurrence() {
        let lambda = 1.5;
        let t = GegenbauerTable::new(lambda, 20).unwrap();
        assert_eq!(t.coeff(0, 0), 1.0);
        for s in 0..=20 {
            for k in 0..=s {
                if (k + s) % 2 == 1 {
                    assert_eq!(t.coeff(s, k), 0.0);
                }
            }
            assert_eq!(t.coeff(s, s + 3), 0.0);
        }
        for &x in &[-0.7, 0.1, 0.93] {
            for s in 2..=20 {
                let sf = s as f64;
                let r = sf * t.eval_monomial(s, x) - 2.0 * x * (sf + lambda - 1.0) * t.eval_monomial(s - 1, x)
                    + (sf + 2.0 * lambda - 2.0) * t.eval_monomial(s - 2, x);
                // Cancellation in the monomial form is bounded by Σ|c_t||x|^t.
                let mag: f64 = t.row(s).iter().enumerate().map(|(k, c)| c.abs() * x.abs().powi(k as i32)).sum();
                assert!(r.abs() < 1e-13 * sf * mag, "s={s}, x={x}: {r}");
            }
        }
    }

    #[test]
    fn generating_function_identity() {
        // Σ_s C_s^1(cos ω) t^s = (1 - 2 t cos ω + t²)^{-1}
        let (t, omega) = (0.3f64, 1.0f64);
        let x = omega.cos();
        let table = GegenbauerTable::new(1.0, 40).unwrap();
        let series: f64 = (0..=40).map(|s| table.eval_monomial(s, x) * t.powi(s as i32)).sum();
        let direct = 1.0 / (1.0 - 2.0 * t * x + t * t);
        assert!((series - direct).abs() < 1e-10);
    }

    #[test]
    fn zero_index_is_degenerate_but_consistent() {
        // (1 - 2xt + t²)^0 = 1, so C_s^0 = 0 for s >= 1.
        let t = GegenbauerTable::new(0.0, 6).unwrap();
        assert_eq!(t.row(0), &[1.0]);
        for s in 1..=6 {
            assert!(t.row(s).iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn overflow_is_a_range_error() {
        assert!(matches!(GegenbauerTable::new(200.0, 400), Err(Error::Range(_))));
        assert!(GegenbauerTable::new(-1.0, 3).is_err());
    }
}
