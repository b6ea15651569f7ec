use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::correlation::fit_loglog;
use super::midpoint_samples;
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim};
use crate::kernels::{assemble, KernelMatrix, KernelMode};
use crate::medium::Medium;

/// How the singular-value tail is compared against `ε`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankCriterion {
    /// Smallest `r` with `(Σ_{k>r} σ_k²)^{1/2} ≤ ε (Σ_k σ_k²)^{1/2}`.
    #[default]
    Frobenius,
    /// Smallest `r` with `σ_{r+1} ≤ ε σ_1`.
    Spectral,
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &Mat<Complex64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite matrix entry at ({i}, {j})")));
            }
        }
    }
    m.singular_values().map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))
}

/// ε-rank from a nonincreasing list of singular values.
pub fn epsilon_rank_from_singular_values(sv: &[f64], eps: f64, criterion: RankCriterion) -> usize {
    match criterion {
        RankCriterion::Frobenius => {
            let total: f64 = sv.iter().map(|s| s * s).sum();
            let target = eps * eps * total;
            // tail[r] = Σ_{k ≥ r} σ_k², accumulated from the small end.
            let mut tail = 0.0;
            let mut rank = sv.len();
            for r in (0..sv.len()).rev() {
                tail += sv[r] * sv[r];
                if tail <= target {
                    rank = r;
                } else {
                    break;
                }
            }
            rank
        }
        RankCriterion::Spectral => {
            let top = sv.first().copied().unwrap_or(0.0);
            sv.iter().take_while(|&&s| s > eps * top).count()
        }
    }
}

/// ε-rank of a kernel matrix with the relative Frobenius criterion.
pub fn epsilon_rank(matrix: &KernelMatrix, eps: f64) -> Result<usize> {
    let sv = singular_values(&matrix.entries)?;
    Ok(epsilon_rank_from_singular_values(&sv, eps, RankCriterion::Frobenius))
}

/// Configuration of a rank-growth sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankStudy {
    pub x: BoxDomain,
    pub y: BoxDomain,
    pub n_values: Vec<usize>,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub criterion: RankCriterion,
    /// Sample points per unit length; defaults to `2n`, the coarsest grid
    /// with spacing at most `1/(2n)`.
    #[serde(default)]
    pub points_per_unit: Option<f64>,
}

impl RankStudy {
    pub fn new(x: BoxDomain, y: BoxDomain, n_values: Vec<usize>) -> Self {
        RankStudy {
            x,
            y,
            n_values,
            epsilons: vec![1e-2, 1e-4, 1e-8],
            criterion: RankCriterion::Frobenius,
            points_per_unit: None,
        }
    }

    /// Points per axis for box `b` at mode `n`; errors when the spacing
    /// would exceed `1/(2n)`.
    pub fn points_per_dim(&self, b: &BoxDomain, n: usize) -> Result<usize> {
        let side = (0..b.dim().value()).map(|k| b.extent(k)).fold(0.0, f64::max);
        let per_unit = self.points_per_unit.unwrap_or(2.0 * n.max(1) as f64);
        let ppd = (side * per_unit - 1e-9).ceil().max(1.0) as usize;
        let spacing = side / ppd as f64;
        let limit = 1.0 / (2.0 * n.max(1) as f64);
        if spacing > limit * (1.0 + 1e-12) {
            let required = (side * 2.0 * n as f64).ceil() as usize;
            return Err(Error::Resolution { required, given: ppd });
        }
        Ok(ppd)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub epsilons: Vec<f64>,
    pub n_values: Vec<usize>,
    /// `ranks[e][k]` is `N^ε` for `epsilons[e]` and `n_values[k]`.
    pub ranks: Vec<Vec<usize>>,
    /// Log-log growth exponent of `N^ε` against `n`, one per `ε`.
    pub fitted_exponents: Vec<f64>,
    /// Matrix sizes `(rows, cols)` per `n`.
    pub matrix_sizes: Vec<(usize, usize)>,
    pub singular_values: Vec<Vec<f64>>,
}

/// Assembles `G_n` (2D) or `G_{n0}` (3D) on uniform midpoint grids of `X`
/// and `Y` for each `n` and records the ε-ranks.
pub fn rank_growth_study(medium: &Medium, study: &RankStudy) -> Result<RankProfile> {
    let dim = study.x.dim();
    if study.y.dim() != dim {
        return Err(Error::InvalidParameter("X and Y must have the same dimension".into()));
    }
    if study.x.distance_to_box(&study.y) <= 0.0 {
        return Err(Error::InvalidParameter("X and Y must be disjoint".into()));
    }
    let mut ranks = vec![Vec::new(); study.epsilons.len()];
    let mut matrix_sizes = Vec::new();
    let mut all_sv = Vec::new();
    for &n in &study.n_values {
        let xs = midpoint_samples(&study.x, study.points_per_dim(&study.x, n)?);
        let ys = midpoint_samples(&study.y, study.points_per_dim(&study.y, n)?);
        let mode = match dim {
            Dim::Two => KernelMode::TwoD { n: n as i64 },
            Dim::Three => KernelMode::ThreeD { r: n, s: 0 },
        };
        let k = assemble(medium, mode, &xs, &ys)?;
        let sv = singular_values(&k.entries)?;
        for (e, &eps) in study.epsilons.iter().enumerate() {
            ranks[e].push(epsilon_rank_from_singular_values(&sv, eps, study.criterion));
        }
        matrix_sizes.push((xs.len(), ys.len()));
        all_sv.push(sv);
    }
    let ns: Vec<f64> = study.n_values.iter().map(|&n| n as f64).collect();
    let fitted_exponents = ranks
        .iter()
        .map(|r| {
            let rs: Vec<f64> = r.iter().map(|&v| v as f64).collect();
            fit_loglog(&ns, &rs).map(|f| f.slope).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(RankProfile {
        epsilons: study.epsilons.clone(),
        n_values: study.n_values.clone(),
        ranks,
        fitted_exponents,
        matrix_sizes,
        singular_values: all_sv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_on_explicit_spectra() {
        let sv = [4.0, 2.0, 1.0, 0.0];
        assert_eq!(epsilon_rank_from_singular_values(&sv, 1.0, RankCriterion::Frobenius), 0);
        assert_eq!(epsilon_rank_from_singular_values(&sv, 0.0, RankCriterion::Frobenius), 3);
        // tail after 2 terms: 1/sqrt(21) ≈ 0.218
        assert_eq!(epsilon_rank_from_singular_values(&sv, 0.22, RankCriterion::Frobenius), 2);
        assert_eq!(epsilon_rank_from_singular_values(&sv, 0.21, RankCriterion::Frobenius), 3);
        assert_eq!(epsilon_rank_from_singular_values(&sv, 0.3, RankCriterion::Spectral), 2);
        assert_eq!(epsilon_rank_from_singular_values(&sv, 1.0, RankCriterion::Spectral), 0);
    }

    #[test]
    fn outer_product_has_rank_one() {
        let u: Vec<Complex64> = (0..7).map(|i| Complex64::new(1.0 + i as f64, 0.5 * i as f64)).collect();
        let v: Vec<Complex64> = (0..5).map(|j| Complex64::new((j as f64).cos(), (j as f64).sin())).collect();
        let m = Mat::from_fn(7, 5, |i, j| u[i] * v[j]);
        let sv = singular_values(&m).unwrap();
        for eps in [0.5, 1e-4, 1e-10] {
            assert_eq!(epsilon_rank_from_singular_values(&sv, eps, RankCriterion::Frobenius), 1);
        }
    }

    #[test]
    fn resolution_rule() {
        let s = RankStudy::new(BoxDomain::unit_square(), BoxDomain::rect(1.25, 2.25, 0.5, 1.5).unwrap(), vec![4]);
        assert_eq!(s.points_per_dim(&s.x, 4).unwrap(), 8);
        assert_eq!(s.points_per_dim(&s.x, 32).unwrap(), 64);
        let coarse = RankStudy { points_per_unit: Some(10.0), ..s };
        assert!(matches!(coarse.points_per_dim(&coarse.x, 8), Err(Error::Resolution { .. })));
    }
}
