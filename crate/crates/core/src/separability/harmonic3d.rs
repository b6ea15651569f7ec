use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::approximation::{Factor, SeparableApproximation, TermFamily};
use super::{binomial, gegenbauer_tail, PairGeometry};
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim};
use crate::special::{legendre_monomial_coefficients, GegenbauerTable};

/// Largest degree accepted: the Legendre monomial coefficients grow like
/// `3^n` and cancel, so beyond this the floating-point allowance dominates.
pub const MAX_HARMONIC_DEGREE: usize = 12;

/// Per-degree truncation of the expansion of `|x − y|^{−k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTruncation {
    pub n: usize,
    /// `N_k` for `k = 0..=n`.
    pub orders: Vec<usize>,
    /// Bound on the contribution of degree `k` to the error of `Y_{n0}`:
    /// `sqrt((2n+1)/4π) |c_nk| (1 + τ)^k Σ_{s>N_k} C_s^{k/2}(1) τ^s`.
    pub bounds: Vec<f64>,
    /// Per-degree budget `sqrt(4π/(2n+1)) ε / 3^n` on the relative tail
    /// `(1 + τ)^k Σ_{s>N_k} C_s^{k/2}(1) τ^s`.
    pub relative_budget: f64,
    /// `|c_nk|`, the magnitudes of the monomial coefficients of `P_n`.
    pub legendre_coefficients: Vec<f64>,
    /// `τ = ζ/(ρ − η)`.
    pub tau: f64,
}

impl HarmonicTruncation {
    /// `max_k (k + N_k)`: the largest radial power in the factor family.
    pub fn max_radial_power(&self) -> usize {
        self.orders.iter().enumerate().map(|(k, &nk)| k + nk).max().unwrap_or(0)
    }
}

/// Separable approximation of the standard zonal harmonic
/// `Y_{n0}((x − y)/|x − y|) = sqrt((2n+1)/4π) P_n((x_z − y_z)/|x − y|)`.
///
/// With the origin at the centre of `X`,
/// `P_n(cosΘ) = Σ_k c_nk (x_z − y_z)^k |x − y|^{−k}`, the numerator is
/// expanded binomially and `|x − y|^{−k} = |y|^{−k} Σ_s C_s^{k/2}(Δ) (|x|/|y|)^s`
/// with `Δ = cosθ₁cosθ₂ + sinθ₁sinθ₂cos(φ₁ − φ₂)`, truncated after `N_k`.
/// Expanding `Δ^t` and `cos^u(φ₁ − φ₂)` binomially gives left factors
/// `|x|^m cos^a θ₁ sin^b θ₁ cos^c φ₁ sin^d φ₁` with `a + b ≤ m`, `c + d = b`;
/// all right factors sharing a left factor are merged.
pub fn separable_harmonic_3d(
    n: usize,
    eps: f64,
    x: &BoxDomain,
    y: &BoxDomain,
) -> Result<(SeparableApproximation, HarmonicTruncation)> {
    if x.dim() != Dim::Three || y.dim() != Dim::Three {
        return Err(Error::InvalidParameter("the harmonic construction is three-dimensional".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("degree n must be at least 1".into()));
    }
    if n > MAX_HARMONIC_DEGREE {
        return Err(Error::Range(format!(
            "degree {n} exceeds the stable range n ≤ {MAX_HARMONIC_DEGREE} (coefficients grow like 3^n)"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("ε must lie in (0, 1), got {eps}")));
    }
    let geom = PairGeometry::of(x, y);
    geom.check_admissible()?;
    let tau = geom.ratio_bound();
    let origin = x.center();
    let norm = ((2 * n + 1) as f64 / (4.0 * PI)).sqrt();
    let cn = legendre_monomial_coefficients(n)?;
    let relative_budget = per_degree_budget(n, eps);

    let mut orders = Vec::with_capacity(n + 1);
    let mut bounds = Vec::with_capacity(n + 1);
    for (k, c) in cn.iter().enumerate() {
        let lift = (1.0 + tau).powi(k as i32);
        let mut nk = 0usize;
        let mut tail = lift * gegenbauer_tail(k as f64, tau, nk);
        while tail > relative_budget {
            nk += 1;
            if nk > 10_000 {
                return Err(Error::Range(format!("no truncation below 10000 meets the budget at k = {k}")));
            }
            tail = lift * gegenbauer_tail(k as f64, tau, nk);
        }
        orders.push(nk);
        bounds.push(norm * c.abs() * tail);
    }

    // key (m, a, b, c, d) -> weights over the power a' of cosθ₂.
    let mut groups: BTreeMap<(u32, u32, u32, u32, u32), BTreeMap<u32, f64>> = BTreeMap::new();
    for k in 0..=n {
        if cn[k] == 0.0 {
            continue;
        }
        let table = GegenbauerTable::new(k as f64 / 2.0, orders[k].max(1))?;
        for j in 0..=k {
            // (x_z − y_z)^k = Σ_j C(k, j) x_z^j (−y_z)^{k−j}
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            let ckj = norm * cn[k] * binomial(k, j) * sign;
            for s in 0..=orders[k] {
                let row: Vec<f64> = if k == 0 {
                    // C_s^0 ≡ δ_{s0}: the generating function is identically 1.
                    if s == 0 {
                        vec![1.0]
                    } else {
                        continue;
                    }
                } else {
                    table.row(s).to_vec()
                };
                for (t, &cst) in row.iter().enumerate() {
                    if cst == 0.0 {
                        continue;
                    }
                    for u in 0..=t {
                        for v in 0..=u {
                            let w = ckj * cst * binomial(t, u) * binomial(u, v);
                            let key = ((j + s) as u32, (j + t - u) as u32, u as u32, (u - v) as u32, v as u32);
                            let a_right = (k - j + t - u) as u32;
                            *groups.entry(key).or_default().entry(a_right).or_insert(0.0) += w;
                        }
                    }
                }
            }
        }
    }

    let rmin = geom.rho - geom.eta;
    let mut magnitude = 0.0;
    let mut terms = Vec::with_capacity(groups.len());
    for ((m, a, b, c, d), weights) in groups {
        let top = weights.keys().copied().max().unwrap_or(0) as usize;
        let mut w = vec![0.0; top + 1];
        for (p, val) in weights {
            w[p as usize] = val;
        }
        if w.iter().all(|&v| v == 0.0) {
            continue;
        }
        magnitude += w.iter().map(|v| v.abs()).sum::<f64>() * (geom.zeta / rmin).powi(m as i32);
        terms.push((
            Factor::SphericalMonomial { center: origin, radial: (m - a - b) as i32, z: a, x: c, y: d },
            Factor::SphericalSeries { center: origin, m, b, c, d, weights: w },
        ));
    }
    if !magnitude.is_finite() {
        return Err(Error::Range(format!("expansion coefficients overflow at n = {n}")));
    }
    let max_power = orders.iter().enumerate().map(|(k, &nk)| k + nk).max().unwrap_or(0);
    let allowance = 8.0 * (max_power + 8) as f64 * f64::EPSILON * magnitude.max(1.0);
    let guaranteed = bounds.iter().sum::<f64>() + allowance;
    let truncation = HarmonicTruncation {
        n,
        orders: orders.clone(),
        bounds,
        relative_budget,
        legendre_coefficients: cn.iter().map(|c| c.abs()).collect(),
        tau,
    };
    let approx = SeparableApproximation::new(TermFamily::Harmonic3d, *x, *y, terms, guaranteed, orders);
    Ok((approx, truncation))
}

fn per_degree_budget(n: usize, eps: f64) -> f64 {
    (4.0 * PI / (2 * n + 1) as f64).sqrt() * eps / 3f64.powi(n as i32)
}
