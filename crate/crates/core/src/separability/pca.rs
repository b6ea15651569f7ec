use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::correlation::required_points_per_dim;
use super::midpoint_samples;
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim, Point};
use crate::kernels::{assemble, KernelMode};
use crate::medium::Medium;

/// Eigenvalue counting bound from the correlation Gram matrix
/// `A = [C(y_m, y_k)]` over a uniform grid of `Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaBound {
    /// Number of grid points `M_δ` in `Y`.
    pub m_delta: usize,
    /// Eigenvalues of `A` in nonincreasing order.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    /// `(ε, N_δ^ε)`: smallest `M` with `Σ_{m>M} λ_m ≤ ε² Σ λ_m`.
    pub ranks: Vec<(f64, usize)>,
    pub y_spacing: f64,
    pub x_points_per_dim: usize,
}

/// Builds `A` on a grid of `Y` with spacing `h = n^{δ−1} · side(Y)` and
/// counts the eigenvalue tail for every `ε`.
pub fn pca_lower_bound(
    medium: &Medium,
    n: usize,
    x: &BoxDomain,
    y: &BoxDomain,
    delta: f64,
    epsilons: &[f64],
) -> Result<PcaBound> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let side = (0..y.dim().value()).map(|k| y.extent(k)).fold(0.0, f64::max);
    let h = (n as f64).powf(delta - 1.0) * side;
    let per_dim = (side / h - 1e-9).ceil().max(1.0) as usize;
    let ys = midpoint_samples(y, per_dim);
    // Resolution of the X quadrature: the worst pair is the one closest to X.
    let near = closest_corner(x, y);
    let ppd = required_points_per_dim(n, x, &near, &near);
    let xs = midpoint_samples(x, ppd);
    let mode = match x.dim() {
        Dim::Two => KernelMode::TwoD { n: n as i64 },
        Dim::Three => KernelMode::ThreeD { r: n, s: 0 },
    };
    let g = assemble(medium, mode, &xs, &ys)?.entries;
    // Normalize columns, then A = Gᴴ G.
    let m = ys.len();
    let mut norms = vec![0.0; m];
    for (j, nj) in norms.iter_mut().enumerate() {
        *nj = (0..xs.len()).map(|i| g[(i, j)].norm_sqr()).sum::<f64>().sqrt();
    }
    let gn = Mat::from_fn(xs.len(), m, |i, j| g[(i, j)] / norms[j]);
    let mut a = Mat::<Complex64>::zeros(m, m);
    faer::linalg::matmul::matmul(
        &mut a,
        faer::Accum::Replace,
        gn.adjoint(),
        &gn,
        Complex64::new(1.0, 0.0),
        faer::Par::Seq,
    );
    for i in 0..m {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let trace: f64 = (0..m).map(|i| a[(i, i)].re).sum();
    let mut eig = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    eig.reverse();
    if let Some(&min) = eig.last() {
        if min < -1e-8 * trace.max(1.0) {
            return Err(Error::Numerical(format!("correlation matrix is not positive semidefinite: λ_min = {min:e}")));
        }
    }
    let total: f64 = eig.iter().map(|l| l.max(0.0)).sum();
    let ranks = epsilons
        .iter()
        .map(|&eps| {
            let mut tail = 0.0;
            let mut r = eig.len();
            for k in (0..eig.len()).rev() {
                tail += eig[k].max(0.0);
                if tail <= eps * eps * total {
                    r = k;
                } else {
                    break;
                }
            }
            (eps, r)
        })
        .collect();
    Ok(PcaBound { m_delta: m, eigenvalues: eig, trace, ranks, y_spacing: side / per_dim as f64, x_points_per_dim: ppd })
}

fn closest_corner(x: &BoxDomain, y: &BoxDomain) -> Point {
    // Clamp the centre of X into Y: the point of Y nearest to X's centre.
    let cx = x.center();
    let lo = y.lo();
    let hi = y.hi();
    let d = y.dim().value();
    let c: Vec<f64> = (0..d).map(|k| cx.coords()[k].clamp(lo.coords()[k], hi.coords()[k])).collect();
    Point::from_slice(&c).expect("dimension 2 or 3")
}
