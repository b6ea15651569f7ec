//! Approximate separability of the moment kernels: correlation decay,
//! ε-ranks of kernel matrices, the correlation-matrix eigenvalue bound and
//! explicit separable constructions.

mod approximation;
mod correlation;
mod harmonic3d;
mod jet;
mod pca;
mod phase2d;
mod rank;
mod taylor;

pub use approximation::{SeparableApproximation, TermFamily};
pub use correlation::{
    correlation, correlation_decay_study, fit_loglog, required_points_per_dim, CorrelationProfile, CorrelationSample,
    CorrelationStudy, LogLogFit,
};
pub use harmonic3d::{separable_harmonic_3d, HarmonicTruncation, MAX_HARMONIC_DEGREE};
pub use jet::Jet;
pub use pca::{pca_lower_bound, PcaBound};
pub use phase2d::{nominal_truncation, separable_phase_2d, TRUNCATION_CONSTANT};
pub use rank::{
    epsilon_rank, epsilon_rank_from_singular_values, rank_growth_study, singular_values, RankCriterion, RankProfile,
    RankStudy,
};
pub use taylor::{
    separable_kernel_taylor, separable_kernel_taylor_with, AttenuatedDistance, ConstantKernel, SmoothKernel,
};

use crate::error::{Error, Result};
use crate::geometry::BoxDomain;

/// Geometry constants of a well-separated pair: `ζ`, `η` the radii of `X`
/// and `Y` (half-diagonals) and `ρ = |x_c − y_c|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairGeometry {
    pub zeta: f64,
    pub eta: f64,
    pub rho: f64,
}

impl PairGeometry {
    pub fn of(x: &BoxDomain, y: &BoxDomain) -> Self {
        PairGeometry { zeta: x.radius(), eta: y.radius(), rho: x.center().distance(&y.center()) }
    }

    /// Requires `(ζ + η)/ρ < 1/2`.
    pub fn check_admissible(&self) -> Result<()> {
        let ratio = (self.zeta + self.eta) / self.rho;
        if !(ratio < 0.5) {
            return Err(Error::Admissibility(format!(
                "(zeta + eta)/rho = {ratio:.4} must be below 1/2 (zeta = {:.4}, eta = {:.4}, rho = {:.4})",
                self.zeta, self.eta, self.rho
            )));
        }
        Ok(())
    }

    /// Upper bound of `|x − x_c| / |y − x_c|` over the pair.
    pub fn ratio_bound(&self) -> f64 {
        self.zeta / (self.rho - self.eta)
    }
}

/// Midpoint sample points of a box, `points_per_dim` per axis.
pub fn midpoint_samples(domain: &BoxDomain, points_per_dim: usize) -> Vec<crate::geometry::Point> {
    crate::geometry::Grid::uniform(*domain, points_per_dim.max(1)).map(|g| g.centers().to_vec()).unwrap_or_default()
}

/// `C(n, k)` in floating point by the multiplicative formula.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_{s>N} C(λ2 + s − 1, s) τ^s` (with `C(·, s)` the generalized binomial,
/// i.e. `C_s^{λ}(1)` for `λ2 = 2λ`), summed until the geometric remainder is
/// negligible; the remainder itself is added as a bound.
pub(crate) fn gegenbauer_tail(two_lambda: f64, tau: f64, n_trunc: usize) -> f64 {
    debug_assert!((0.0..1.0).contains(&tau));
    // a_s = C(2λ + s − 1, s) τ^s, a_{s+1}/a_s = (2λ + s)/(s + 1) τ.
    let mut a = 1.0;
    for s in 0..=n_trunc {
        a *= (two_lambda + s as f64) / (s as f64 + 1.0) * tau;
    }
    let mut sum = 0.0;
    let mut s = n_trunc + 1;
    loop {
        sum += a;
        let ratio = (two_lambda + s as f64) / (s as f64 + 1.0) * tau;
        // For 2λ ≥ 1 the ratios decrease in s; otherwise they increase
        // towards τ, which then bounds all later ratios.
        let r = if two_lambda >= 1.0 { ratio } else { tau };
        if r < 1.0 && a * r / (1.0 - r) <= 1e-17 * sum.max(f64::MIN_POSITIVE) {
            return sum + a * r / (1.0 - r);
        }
        if a == 0.0 {
            return sum;
        }
        a *= ratio;
        s += 1;
    }
}
