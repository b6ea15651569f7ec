//! Scattering phase functions and their truncated angular expansions.
//!
//! In two dimensions the truncated phase function is the Fourier sum
//! `p_M(cos θ) = Σ_{n<M} (2 - δ_{0n}) χ_n cos nθ`; in three dimensions it is the
//! Legendre sum `Σ_{n<M} (2n + 1) χ_n P_n(cos θ)`. Both are normalized so
//! that their average over the circle or sphere equals `χ_0 = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Dim;
use crate::special::legendre_real;

/// Truncation coefficients `χ_0..χ_{M-1}` of a phase function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseExpansion {
    dim: Dim,
    chi: Vec<f64>,
}

impl PhaseExpansion {
    pub fn new(dim: Dim, chi: Vec<f64>) -> Result<Self> {
        if chi.is_empty() {
            return Err(Error::InvalidParameter("phase expansion needs M >= 1 terms".into()));
        }
        if (chi[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "chi_0 must be 1 for a normalized phase function, got {}",
                chi[0]
            )));
        }
        if chi.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite expansion coefficient".into()));
        }
        Ok(PhaseExpansion { dim, chi })
    }

    pub fn isotropic(dim: Dim) -> Self {
        PhaseExpansion { dim, chi: vec![1.0] }
    }

    /// Rayleigh scattering, `3/4 (1 + cos²θ) = 1 + P_2(cosθ)/2` (three
    /// dimensions). In the `Σ (2n+1) χ_n P_n` convention used here the
    /// quadrupole coefficient is `χ_2 = 1/10`; the value `1/2` often quoted
    /// multiplies `P_2` directly.
    pub fn rayleigh() -> Self {
        PhaseExpansion { dim: Dim::Three, chi: vec![1.0, 0.0, 0.1] }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    /// Number of retained terms `M`.
    pub fn terms(&self) -> usize {
        self.chi.len()
    }

    /// `χ_{|n|}`, zero beyond the truncation.
    pub fn chi_abs(&self, n: i64) -> f64 {
        self.chi.get(n.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }
}

/// Henyey–Greenstein coefficients `χ_n = g^n`, `n < M`.
pub fn hg_coefficients(g: f64, terms: usize, dim: Dim) -> Result<PhaseExpansion> {
    if !(g.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("anisotropy factor must satisfy |g| < 1, got {g}")));
    }
    if terms == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let chi = (0..terms).map(|n| g.powi(n as i32)).collect();
    PhaseExpansion::new(dim, chi)
}

/// The untruncated Henyey–Greenstein function under the normalized measure.
pub fn henyey_greenstein(g: f64, cos_theta: f64, dim: Dim) -> f64 {
    let denom = 1.0 + g * g - 2.0 * g * cos_theta;
    match dim {
        Dim::Two => (1.0 - g * g) / denom,
        Dim::Three => (1.0 - g * g) / denom.powf(1.5),
    }
}

/// `p_M(cos θ)`.
pub fn evaluate_truncated(p: &PhaseExpansion, cos_theta: f64) -> f64 {
    let c = cos_theta.clamp(-1.0, 1.0);
    match p.dim {
        Dim::Two => {
            // cos nθ = T_n(cos θ), Chebyshev recurrence.
            let mut sum = p.chi[0];
            let (mut t0, mut t1) = (1.0, c);
            for (n, &chi) in p.chi.iter().enumerate().skip(1) {
                if n > 1 {
                    let t2 = 2.0 * c * t1 - t0;
                    t0 = t1;
                    t1 = t2;
                }
                sum += 2.0 * chi * t1;
            }
            sum
        }
        Dim::Three => p.chi.iter().enumerate().map(|(n, &chi)| (2 * n + 1) as f64 * chi * legendre_real(n, c)).sum(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Positivity {
    pub nonneg: bool,
    pub min_value: f64,
    /// Angle in `[0, π]` where the minimum was found.
    pub argmin_theta: f64,
}

pub const POSITIVITY_TOL: f64 = 1e-12;
pub const DEFAULT_POSITIVITY_SAMPLES: usize = 100_000;

/// Minimum of `p_M` over a uniform grid of `samples` angles in `[0, π]`
/// (the expansion depends on `cos θ` only, so this covers the full circle).
pub fn positivity_check(p: &PhaseExpansion, samples: usize) -> Result<Positivity> {
    if samples < 2 {
        return Err(Error::InvalidParameter("positivity check needs at least 2 samples".into()));
    }
    let mut min_value = f64::INFINITY;
    let mut argmin_theta = 0.0;
    for i in 0..samples {
        let theta = std::f64::consts::PI * i as f64 / (samples - 1) as f64;
        let v = evaluate_truncated(p, theta.cos());
        if v < min_value {
            min_value = v;
            argmin_theta = theta;
        }
    }
    Ok(Positivity { nonneg: min_value >= -POSITIVITY_TOL, min_value, argmin_theta })
}

/// Result of splitting a forward-peaked phase function into a forward delta
/// of weight `w` plus a smooth `M`-term remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaM {
    pub expansion: PhaseExpansion,
    /// Forward-peak weight `w = χ_M`.
    pub forward_weight: f64,
    /// `1 - w`; the scattering coefficient becomes `σ_s (1 - w)` and the
    /// transport coefficient `σ_t - σ_s w`.
    pub sigma_scale: f64,
}

/// δ-M transform of the Henyey–Greenstein function with `M` retained terms.
pub fn delta_m_transform(g: f64, terms: usize, dim: Dim) -> Result<DeltaM> {
    let full = hg_coefficients(g, terms + 1, dim)?;
    let w = full.chi[terms];
    if w >= 1.0 {
        return Err(Error::InvalidParameter(format!("forward-peak weight {w} must be below 1")));
    }
    let chi = full.chi[..terms].iter().map(|&c| (c - w) / (1.0 - w)).collect();
    Ok(DeltaM { expansion: PhaseExpansion::new(dim, chi)?, forward_weight: w, sigma_scale: 1.0 - w })
}
