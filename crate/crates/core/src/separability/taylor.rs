use std::sync::Arc;

use rayon::prelude::*;

use super::approximation::{Factor, SeparableApproximation, TermFamily};
use super::jet::{Jet, JetShape};
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim, Point};
use crate::medium::{Medium, ScalarField};

/// A kernel smooth on `X × Y` whose Taylor jets can be formed exactly.
pub trait SmoothKernel: Sync {
    fn dim(&self) -> Dim;

    fn eval(&self, x: &Point, y: &Point) -> f64;

    /// Jet in the `2d` variables `(x₁…x_d, y₁…y_d)` around `(x0, y0)`.
    fn jet(&self, x0: &Point, y0: &Point, shape: &Arc<JetShape>) -> Jet;
}

/// `h(x, y) = E(x, y) / |x − y|^{d−1}` for a constant or affine `σ_t`. For
/// affine fields the segment average of `σ_t` is its value at the midpoint,
/// so `E` has the closed form `exp(−|x − y| σ_t((x + y)/2))`.
#[derive(Clone, Debug)]
pub struct AttenuatedDistance {
    dim: Dim,
    base: f64,
    gradient: [f64; 3],
}

impl AttenuatedDistance {
    pub fn new(dim: Dim, sigma_t: &ScalarField) -> Result<Self> {
        match sigma_t {
            ScalarField::Constant(c) => Ok(AttenuatedDistance { dim, base: *c, gradient: [0.0; 3] }),
            ScalarField::Linear { base, gradient } => Ok(AttenuatedDistance { dim, base: *base, gradient: *gradient }),
            other => Err(Error::InvalidParameter(format!(
                "Taylor jets need a constant or affine σ_t with closed-form attenuation, got {other:?}"
            ))),
        }
    }

    pub fn from_medium(medium: &Medium) -> Result<Self> {
        AttenuatedDistance::new(medium.domain().dim(), medium.sigma_t())
    }
}

impl SmoothKernel for AttenuatedDistance {
    fn dim(&self) -> Dim {
        self.dim
    }

    fn eval(&self, x: &Point, y: &Point) -> f64 {
        let d = self.dim.value();
        let r = x.distance(y);
        let mut sigma = self.base;
        for k in 0..d {
            sigma += self.gradient[k] * 0.5 * (x.coords()[k] + y.coords()[k]);
        }
        (-r * sigma).exp() / r.powi(d as i32 - 1)
    }

    fn jet(&self, x0: &Point, y0: &Point, shape: &Arc<JetShape>) -> Jet {
        let d = self.dim.value();
        let mut r2 = Jet::constant(shape, 0.0);
        let mut sigma = Jet::constant(shape, self.base);
        for k in 0..d {
            let xk = Jet::variable(shape, k, x0.coords()[k]);
            let yk = Jet::variable(shape, d + k, y0.coords()[k]);
            let diff = &xk - &yk;
            r2 = &r2 + &(&diff * &diff);
            if self.gradient[k] != 0.0 {
                sigma = &sigma + &(&xk + &yk).scale(0.5 * self.gradient[k]);
            }
        }
        let r = r2.sqrt();
        let e = (&r * &sigma).scale(-1.0).exp();
        if d == 2 {
            &e * &r2.powf(-0.5)
        } else {
            &e * &r2.powf(-1.0)
        }
    }
}

/// A constant kernel; every cell pair is represented exactly by one term.
#[derive(Clone, Copy, Debug)]
pub struct ConstantKernel {
    pub dim: Dim,
    pub value: f64,
}

impl SmoothKernel for ConstantKernel {
    fn dim(&self) -> Dim {
        self.dim
    }

    fn eval(&self, _x: &Point, _y: &Point) -> f64 {
        self.value
    }

    fn jet(&self, _x0: &Point, _y0: &Point, shape: &Arc<JetShape>) -> Jet {
        Jet::constant(shape, self.value)
    }
}

struct Cell {
    domain: BoxDomain,
    upper_closed: Vec<bool>,
    /// Corners and edge/face midpoints plus the centre: `3^d` points.
    probes: Vec<Point>,
}

fn partition(b: &BoxDomain, ell: f64) -> Vec<Cell> {
    let d = b.dim().value();
    let counts: Vec<usize> = (0..d).map(|k| ((b.extent(k) / ell) - 1e-9).ceil().max(1.0) as usize).collect();
    let total: usize = counts.iter().product();
    let lo = b.lo();
    (0..total)
        .map(|mut idx| {
            let mut clo = [0.0; 3];
            let mut chi = [0.0; 3];
            let mut closed = vec![false; d];
            for k in 0..d {
                let i = idx % counts[k];
                idx /= counts[k];
                let h = b.extent(k) / counts[k] as f64;
                clo[k] = lo.coords()[k] + i as f64 * h;
                chi[k] = if i + 1 == counts[k] { b.hi().coords()[k] } else { lo.coords()[k] + (i + 1) as f64 * h };
                closed[k] = i + 1 == counts[k];
            }
            let domain = BoxDomain::new(
                Point::from_slice(&clo[..d]).expect("dim 2 or 3"),
                Point::from_slice(&chi[..d]).expect("dim 2 or 3"),
            )
            .expect("nondegenerate cell");
            let probes = (0..3usize.pow(d as u32))
                .map(|mut q| {
                    let mut c = [0.0; 3];
                    for k in 0..d {
                        c[k] = clo[k] + 0.5 * (q % 3) as f64 * (chi[k] - clo[k]);
                        q /= 3;
                    }
                    Point::from_slice(&c[..d]).expect("dim 2 or 3")
                })
                .collect();
            Cell { domain, upper_closed: closed, probes }
        })
        .collect()
}

fn eval_poly(shape: &JetShape, coeffs: &[f64], dx: &[f64], dy: &[f64]) -> f64 {
    let d = dx.len();
    shape
        .exponents()
        .iter()
        .zip(coeffs)
        .map(|(e, c)| {
            let mut m = *c;
            for k in 0..d {
                m *= dx[k].powi(e[k] as i32) * dy[k].powi(e[d + k] as i32);
            }
            m
        })
        .sum()
}

/// Piecewise Taylor approximation of `E/|x − y|^{d−1}` built from the
/// medium's `σ_t`; see [`separable_kernel_taylor_with`].
pub fn separable_kernel_taylor(
    medium: &Medium,
    degree: usize,
    eps: f64,
    x: &BoxDomain,
    y: &BoxDomain,
) -> Result<SeparableApproximation> {
    let kernel = AttenuatedDistance::from_medium(medium)?;
    separable_kernel_taylor_with(&kernel, degree, eps, x, y)
}

/// Tiles `X` and `Y` into cells of side at most `ℓ` and expands the kernel
/// on every cell pair to total degree `degree` about the cell centres,
/// giving factors `1_{C_i}(x)(x − x_i)^α ⊗ 1_{D_j}(y) Σ_β c_{αβ}(y − y_j)^β`.
///
/// `ℓ` starts at the box size and shrinks as
/// `ℓ ← 0.9 ℓ (ε/2 / err)^{1/(degree+1)}` until the error observed at the
/// corner, midpoint and centre probes of every cell pair is at most `ε/2`.
/// The reported guarantee is twice the probed error: it is an empirical
/// bound, not a proven one.
pub fn separable_kernel_taylor_with(
    kernel: &impl SmoothKernel,
    degree: usize,
    eps: f64,
    x: &BoxDomain,
    y: &BoxDomain,
) -> Result<SeparableApproximation> {
    let dim = kernel.dim();
    if x.dim() != dim || y.dim() != dim {
        return Err(Error::InvalidParameter("kernel and boxes differ in dimension".into()));
    }
    if x.distance_to_box(y) <= 0.0 {
        return Err(Error::InvalidParameter("X and Y must be disjoint".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("ε must be positive, got {eps}")));
    }
    let d = dim.value();
    let shape = JetShape::new(2 * d, degree);
    let side = |b: &BoxDomain| (0..d).map(|k| b.extent(k)).fold(0.0, f64::max);
    let mut ell = side(x).max(side(y));
    const MAX_CELLS_PER_DIM: usize = 4096;

    loop {
        let xc = partition(x, ell);
        let yc = partition(y, ell);
        let pairs: Vec<(usize, usize)> = (0..xc.len()).flat_map(|i| (0..yc.len()).map(move |j| (i, j))).collect();
        let results: Vec<(Vec<f64>, f64)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (cx, cy) = (xc[i].domain.center(), yc[j].domain.center());
                let jet = kernel.jet(&cx, &cy, &shape);
                let mut err = 0.0f64;
                for p in &xc[i].probes {
                    let dx: Vec<f64> = (0..d).map(|k| p.coords()[k] - cx.coords()[k]).collect();
                    for q in &yc[j].probes {
                        let dy: Vec<f64> = (0..d).map(|k| q.coords()[k] - cy.coords()[k]).collect();
                        let e = (kernel.eval(p, q) - eval_poly(&shape, jet.coeffs(), &dx, &dy)).abs();
                        err = err.max(if e.is_finite() { e } else { f64::INFINITY });
                    }
                }
                (jet.coeffs().to_vec(), err)
            })
            .collect();
        let err = results.iter().map(|r| r.1).fold(0.0, f64::max);
        if err <= 0.5 * eps {
            return Ok(build(&shape, &xc, &yc, &pairs, &results, err, degree, x, y));
        }
        let mut next = 0.9 * ell * (0.5 * eps / err).powf(1.0 / (degree as f64 + 1.0));
        if !next.is_finite() || next <= 0.0 {
            next = 0.5 * ell;
        }
        // Guarantee progress: the finest axis must gain at least one cell.
        let cells = (side(x).max(side(y)) / ell - 1e-9).ceil().max(1.0);
        ell = next.min(side(x).max(side(y)) / (cells + 1.0));
        if side(x).max(side(y)) / ell > MAX_CELLS_PER_DIM as f64 {
            return Err(Error::Resource(format!(
                "Taylor construction needs more than {MAX_CELLS_PER_DIM} cells per dimension (probed error {err:e})"
            )));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build(
    shape: &Arc<JetShape>,
    xc: &[Cell],
    yc: &[Cell],
    pairs: &[(usize, usize)],
    results: &[(Vec<f64>, f64)],
    probed: f64,
    degree: usize,
    x: &BoxDomain,
    y: &BoxDomain,
) -> SeparableApproximation {
    let d = x.dim().value();
    let exps = shape.exponents();
    // Left multi-indices α: the exponents supported on the x variables only.
    let alphas: Vec<usize> = (0..exps.len()).filter(|&i| exps[i][d..].iter().all(|&e| e == 0)).collect();
    let mut terms = Vec::with_capacity(pairs.len() * alphas.len());
    let mut blocks = Vec::with_capacity(pairs.len());
    for (&(i, j), (coeffs, _)) in pairs.iter().zip(results) {
        let start = terms.len();
        let (cx, cy) = (xc[i].domain.center(), yc[j].domain.center());
        let all_zero_beyond_constant = coeffs.iter().skip(1).all(|&c| c == 0.0);
        for &a in &alphas {
            if all_zero_beyond_constant && a != 0 {
                continue;
            }
            let alpha = &exps[a][..d];
            let monomials: Vec<(Vec<u32>, f64)> = exps
                .iter()
                .zip(coeffs)
                .filter(|(e, &c)| c != 0.0 && &e[..d] == alpha)
                .map(|(e, &c)| (e[d..].to_vec(), c))
                .collect();
            if monomials.is_empty() {
                continue;
            }
            let left = Factor::CellPolynomial {
                cell: xc[i].domain,
                upper_closed: xc[i].upper_closed.clone(),
                center: cx,
                monomials: vec![(alpha.to_vec(), 1.0)],
            };
            let right = Factor::CellPolynomial {
                cell: yc[j].domain,
                upper_closed: yc[j].upper_closed.clone(),
                center: cy,
                monomials,
            };
            terms.push((left, right));
        }
        if terms.len() > start {
            blocks.push(start..terms.len());
        }
    }
    let mut approx =
        SeparableApproximation::new(TermFamily::PiecewiseTaylor, *x, *y, terms, 2.0 * probed, vec![degree]);
    approx.cell_pairs = Some(pairs.len());
    approx.blocks = Some(blocks);
    approx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separability::midpoint_samples;

    #[test]
    fn constant_kernel_is_one_term_per_pair() {
        let x = BoxDomain::unit_square();
        let y = BoxDomain::rect(2.0, 3.0, 0.0, 1.0).unwrap();
        let k = ConstantKernel { dim: Dim::Two, value: 2.5 };
        let a = separable_kernel_taylor_with(&k, 3, 1e-6, &x, &y).unwrap();
        assert_eq!(a.term_count(), a.cell_pairs.unwrap());
        assert_eq!(a.guaranteed_sup_error, 0.0);
        let xs = midpoint_samples(&x, 5);
        let ys = midpoint_samples(&y, 5);
        let err = a.measured_sup_error(&xs, &ys, |_, _| Ok(2.5.into())).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn jet_matches_finite_differences() {
        let k =
            AttenuatedDistance::new(Dim::Two, &ScalarField::Linear { base: 1.0, gradient: [0.2, -0.1, 0.0] }).unwrap();
        let shape = JetShape::new(4, 2);
        let (x0, y0) = (Point::new2(0.3, 0.4), Point::new2(2.1, 0.7));
        let jet = k.jet(&x0, &y0, &shape);
        assert!((jet.value() - k.eval(&x0, &y0)).abs() < 1e-15);
        let h = 1e-5;
        let fd = (k.eval(&Point::new2(0.3 + h, 0.4), &y0) - k.eval(&Point::new2(0.3 - h, 0.4), &y0)) / (2.0 * h);
        assert!((jet.coeffs()[1] - fd).abs() < 1e-8);
        let fd_y = (k.eval(&x0, &Point::new2(2.1, 0.7 + h)) - k.eval(&x0, &Point::new2(2.1, 0.7 - h))) / (2.0 * h);
        assert!((jet.coeffs()[4] - fd_y).abs() < 1e-8);
    }

    #[test]
    fn non_affine_sigma_is_refused() {
        let f = ScalarField::analytic(|p| 1.0 + p.x() * p.x());
        assert!(AttenuatedDistance::new(Dim::Two, &f).is_err());
    }
}
