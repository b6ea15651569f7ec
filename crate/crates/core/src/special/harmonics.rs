//! Complex spherical harmonics.
//!
//! Two normalizations are in play. The *standard* harmonics are orthonormal
//! for the surface measure `sinθ dθ dφ` (total mass 4π). The *normalized*
//! harmonics are orthonormal for the probability measure
//! `dv = sinθ dθ dφ / 4π`, so that `Y_00 = 1`; they equal the standard ones
//! times `sqrt(4π)`. Both carry the Condon–Shortley phase.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss_legendre;

/// Ratio between normalized-measure and standard harmonics.
pub const SQRT_4PI: f64 = 3.544_907_701_811_032;

/// Polar and azimuthal angle of a (not necessarily unit) vector in R³.
pub fn direction_angles(v: [f64; 3]) -> (f64, f64) {
    let rho = v[0].hypot(v[1]);
    (rho.atan2(v[2]), v[1].atan2(v[0]))
}

/// `P̃_n^m(cosθ)` with `m ≥ 0`, scaled so that the standard harmonic is
/// `Y_nm(θ, φ) = P̃_n^m(cosθ) e^{imφ}`.
pub fn normalized_associated_legendre(n: usize, m: usize, theta: f64) -> f64 {
    if m > n {
        return 0.0;
    }
    let (st, x) = theta.sin_cos();
    // Diagonal: sectoral term ∝ sin^m θ.
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for i in 1..=m {
        let fi = i as f64;
        pmm *= -((2.0 * fi + 1.0) / (2.0 * fi)).sqrt() * st;
    }
    if n == m {
        return pmm;
    }
    let mf = m as f64;
    let mut p_prev = pmm;
    let mut p = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for l in (m + 2)..=n {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let b = ((lp * lp - mf * mf) / (4.0 * lp * lp - 1.0)).sqrt();
        let next = a * (x * p - b * p_prev);
        p_prev = p;
        p = next;
    }
    p
}

/// Standard-normalization harmonic `Y_nm(θ, φ)`.
pub fn spherical_harmonic_standard(n: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() as usize > n {
        return Err(Error::InvalidParameter(format!("|m| = {} exceeds degree n = {n}", m.abs())));
    }
    let ma = m.unsigned_abs() as usize;
    let p = normalized_associated_legendre(n, ma, theta);
    let y = Complex64::from_polar(p, ma as f64 * phi);
    if m < 0 {
        // Y_{n,-m} = (-1)^m conj(Y_nm)
        let s = if ma.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(y.conj() * s)
    } else {
        Ok(y)
    }
}

/// Harmonic orthonormal for the normalized measure `dv`; `Y_00 ≡ 1` and
/// `Y_n0(θ) = sqrt(2n+1) P_n(cosθ)`.
pub fn spherical_harmonic(n: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    Ok(spherical_harmonic_standard(n, m, theta, phi)? * SQRT_4PI)
}

/// Tensor quadrature on `[0, π] × [0, 2π)`: composite Gauss–Legendre in θ and
/// the periodic trapezoid rule in φ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphereRule {
    pub theta_panels: usize,
    pub theta_order: usize,
    pub phi_points: usize,
}

impl SphereRule {
    /// Resolves `|P_n|²` (degree 2n in cosθ) comfortably.
    pub fn for_degree(n: usize) -> Self {
        SphereRule { theta_panels: (2 * n + 2).max(16), theta_order: 16, phi_points: 64 }
    }

    fn integrate(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let (tn, tw) = composite_gauss_legendre(0.0, PI, self.theta_panels, self.theta_order);
        let dphi = 2.0 * PI / self.phi_points as f64;
        let mut total = 0.0;
        for (&t, &w) in tn.iter().zip(&tw) {
            let mut row = 0.0;
            for k in 0..self.phi_points {
                row += g(t, k as f64 * dphi);
            }
            total += w * row * dphi;
        }
        total
    }
}

/// `∫ |Y_n0|² f dv` with the normalized measure (equivalently the standard
/// harmonic against `sinθ dθ dφ`). `f` takes `(θ, φ)`.
pub fn yn0_weighted_integral(f: impl Fn(f64, f64) -> f64, n: usize, rule: SphereRule) -> f64 {
    rule.integrate(|t, p| {
        let y = normalized_associated_legendre(n, 0, t);
        y * y * t.sin() * f(t, p)
    })
}

/// Large-`n` limit of [`yn0_weighted_integral`]: `(1/2π²) ∫∫ f dφ dθ`.
pub fn yn0_limit(f: impl Fn(f64, f64) -> f64, rule: SphereRule) -> f64 {
    rule.integrate(f) / (2.0 * PI * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::legendre_real;

    #[test]
    fn constant_and_zonal() {
        let y = spherical_harmonic(0, 0, 0.7, 1.3).unwrap();
        assert!((y - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        for n in 0..12usize {
            let t = 0.83;
            let y = spherical_harmonic(n, 0, t, 2.0).unwrap();
            let expect = ((2 * n + 1) as f64).sqrt() * legendre_real(n, t.cos());
            assert!((y.re - expect).abs() < 1e-12 && y.im.abs() < 1e-14);
        }
        assert!(spherical_harmonic(2, 3, 0.1, 0.1).is_err());
    }

    #[test]
    fn known_standard_values() {
        // Y_11 = -sqrt(3/8π) sinθ e^{iφ}
        let (t, p) = (0.6f64, 0.4f64);
        let y = spherical_harmonic_standard(1, 1, t, p).unwrap();
        let expect = Complex64::from_polar(-(3.0 / (8.0 * PI)).sqrt() * t.sin(), p);
        assert!((y - expect).norm() < 1e-15);
        // Y_2,-1 = sqrt(15/8π) sinθ cosθ e^{-iφ}
        let y = spherical_harmonic_standard(2, -1, t, p).unwrap();
        let expect = Complex64::from_polar((15.0 / (8.0 * PI)).sqrt() * t.sin() * t.cos(), -p);
        assert!((y - expect).norm() < 1e-15);
    }

    #[test]
    fn sectoral_harmonic_is_sin_power() {
        let r: Vec<f64> = [0.3, 0.9, 1.5, 2.4]
            .iter()
            .map(|&t: &f64| spherical_harmonic(3, 3, t, 0.77).unwrap().norm() / t.sin().powi(3))
            .collect();
        for v in &r {
            assert!((v - r[0]).abs() < 1e-13 * r[0]);
        }
    }

    #[test]
    fn orthonormal_under_normalized_measure() {
        let rule = SphereRule::for_degree(6);
        for (n, m, k, l) in [(2usize, 1i64, 2usize, 1i64), (3, -2, 3, -2), (3, 1, 2, 1), (4, 0, 2, 0)] {
            let re = rule.integrate(|t, p| {
                let a = spherical_harmonic(n, m, t, p).unwrap();
                let b = spherical_harmonic(k, l, t, p).unwrap();
                (a * b.conj()).re * t.sin() / (4.0 * PI)
            });
            let expect = if n == k && m == l { 1.0 } else { 0.0 };
            assert!((re - expect).abs() < 1e-12, "({n},{m}) vs ({k},{l}): {re}");
        }
    }

    #[test]
    fn yn0_integral_trivial_cases() {
        for n in [0usize, 1, 7, 40] {
            let rule = SphereRule::for_degree(n);
            let one = yn0_weighted_integral(|_, _| 1.0, n, rule);
            assert!((one - 1.0).abs() < 1e-12, "n={n}: {one}");
            assert!(yn0_weighted_integral(|t, _| t.cos(), n, rule).abs() < 1e-12);
        }
        let rule = SphereRule::for_degree(200);
        assert!((yn0_limit(|t, _| t, rule) - PI / 2.0).abs() < 1e-12);
    }
}
