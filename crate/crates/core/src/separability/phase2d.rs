use std::collections::BTreeMap;

use num_complex::Complex64;

use super::approximation::{Factor, SeparableApproximation, TermFamily};
use super::{binomial, gegenbauer_tail, PairGeometry};
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim};
use crate::special::GegenbauerTable;

/// Constant `c` in the nominal truncation `N = 2n + ⌈c·ln(1/ε)⌉`. Chosen
/// once so that the nominal bound covers the rigorous truncation on
/// admissible geometries; not tuned per case.
pub const TRUNCATION_CONSTANT: f64 = 1.0;

/// `2n + ⌈c·ln(1/ε)⌉`.
pub fn nominal_truncation(n: usize, eps: f64) -> usize {
    2 * n + (TRUNCATION_CONSTANT * (1.0 / eps).ln()).ceil().max(0.0) as usize
}

/// Separable approximation of `e^{−in arg(x − y)}` for `x ∈ X`, `y ∈ Y`.
///
/// With the origin at the centre of `X` and `w = x − y`,
/// `e^{−in arg w} = w̄ⁿ / |w|ⁿ`. The numerator is expanded binomially and
/// `|x − y|^{−n} = |y|^{−n} Σ_s C_s^{n/2}(cos ω) (|x|/|y|)^s`,
/// `ω = θ₁ − θ₂`, is truncated after the smallest `N` whose tail bound
/// `(1 + τ)ⁿ Σ_{s>N} C_s^{n/2}(1) τ^s`, `τ = ζ/(ρ − η)`, is below `ε/2`.
/// Expanding the powers of `cos ω` into exponentials leaves products
/// `|x|^a e^{ibθ₁} · |y|^{−a} e^{−i(b+n)θ₂}`; equal `(a, b)` are merged.
pub fn separable_phase_2d(n: usize, eps: f64, x: &BoxDomain, y: &BoxDomain) -> Result<SeparableApproximation> {
    if x.dim() != Dim::Two || y.dim() != Dim::Two {
        return Err(Error::InvalidParameter("the phase construction is two-dimensional".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("ε must lie in (0, 1), got {eps}")));
    }
    let geom = PairGeometry::of(x, y);
    geom.check_admissible()?;
    let origin = x.center();
    let nominal = nominal_truncation(n, eps);
    if n == 0 {
        let one = Factor::PolarPower { center: origin, coeff: Complex64::new(1.0, 0.0), radial: 0, angular: 0 };
        let mut a = SeparableApproximation::new(TermFamily::Phase2d, *x, *y, vec![(one.clone(), one)], 0.0, vec![0]);
        a.nominal_truncation = Some(nominal);
        return Ok(a);
    }
    let tau = geom.ratio_bound();
    let lift = (1.0 + tau).powi(n as i32);
    let two_lambda = n as f64;
    let mut n_trunc = 0usize;
    let mut bound = lift * gegenbauer_tail(two_lambda, tau, n_trunc);
    while bound > 0.5 * eps {
        n_trunc += 1;
        if n_trunc > 10_000 {
            return Err(Error::Range(format!("no truncation below 10000 meets ε = {eps:e}")));
        }
        bound = lift * gegenbauer_tail(two_lambda, tau, n_trunc);
    }

    let table = GegenbauerTable::new(n as f64 / 2.0, n_trunc)?;
    let mut coeffs: BTreeMap<(i32, i32), f64> = BTreeMap::new();
    for k in 0..=n {
        let ck = binomial(n, k) * if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        for s in 0..=n_trunc {
            for (t, &cst) in table.row(s).iter().enumerate() {
                if cst == 0.0 {
                    continue;
                }
                let scale = ck * cst * 0.5f64.powi(t as i32);
                for l in 0..=t {
                    let a = (k + s) as i32;
                    let b = t as i32 - 2 * l as i32 - k as i32;
                    *coeffs.entry((a, b)).or_insert(0.0) += scale * binomial(t, l);
                }
            }
        }
    }
    if coeffs.values().any(|c| !c.is_finite()) {
        return Err(Error::Range(format!("expansion coefficients overflow at n = {n}")));
    }

    // Floating-point allowance: each merged coefficient and its products are
    // formed with O(n + N) roundings relative to Σ |γ| sup|p q|.
    let rmin = geom.rho - geom.eta;
    let magnitude: f64 = coeffs.iter().map(|(&(a, _), c)| c.abs() * (geom.zeta / rmin).powi(a)).sum();
    let ops = (n + n_trunc + 8) as f64;
    let allowance = 4.0 * ops * f64::EPSILON * magnitude.max(1.0);

    let n_i = n as i32;
    let terms = coeffs
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|((a, b), c)| {
            (
                Factor::PolarPower { center: origin, coeff: Complex64::new(c, 0.0), radial: a, angular: b },
                Factor::PolarPower { center: origin, coeff: Complex64::new(1.0, 0.0), radial: -a, angular: -(b + n_i) },
            )
        })
        .collect();
    let mut approx = SeparableApproximation::new(TermFamily::Phase2d, *x, *y, terms, bound + allowance, vec![n_trunc]);
    approx.nominal_truncation = Some(nominal);
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::separability::midpoint_samples;

    fn exact(n: usize) -> impl Fn(&Point, &Point) -> Result<Complex64> {
        move |x: &Point, y: &Point| {
            let w = x.sub(y);
            Ok(Complex64::from_polar(1.0, -(n as f64) * w.y().atan2(w.x())))
        }
    }

    #[test]
    fn zero_mode_is_one_term() {
        let x = BoxDomain::unit_square();
        let y = BoxDomain::rect(3.0, 4.0, 0.0, 1.0).unwrap();
        let a = separable_phase_2d(0, 1e-6, &x, &y).unwrap();
        assert_eq!(a.term_count(), 1);
        assert_eq!(a.guaranteed_sup_error, 0.0);
        assert_eq!(a.eval(&Point::new2(0.2, 0.9), &Point::new2(3.3, 0.1)), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn small_case_meets_tolerance() {
        let x = BoxDomain::unit_square();
        let y = BoxDomain::rect(3.0, 4.0, -0.5, 0.5).unwrap();
        let a = separable_phase_2d(2, 1e-5, &x, &y).unwrap();
        let xs = midpoint_samples(&x, 12);
        let ys = midpoint_samples(&y, 12);
        let err = a.measured_sup_error(&xs, &ys, exact(2)).unwrap();
        assert!(err <= 1e-5, "{err}");
        assert!(err <= a.guaranteed_sup_error);
        let nom = a.nominal_truncation.unwrap();
        assert!(a.term_count() <= (2 * nom + 1).pow(2));
    }

    #[test]
    fn inadmissible_geometry_is_refused() {
        let x = BoxDomain::unit_square();
        let y = BoxDomain::rect(1.5, 2.5, 0.0, 1.0).unwrap();
        assert!(matches!(separable_phase_2d(3, 1e-4, &x, &y), Err(Error::Admissibility(_))));
    }
}
