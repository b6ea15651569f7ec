//! Coefficient fields, admissible media and the attenuation factor
//! `E(x, y) = exp(-|x - y| ∫_0^1 σ_t(x + (y - x) s) ds)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim, Point};
use crate::quadrature::SegmentQuadrature;

/// A scalar coefficient field that can be evaluated anywhere in its domain.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// `base + gradient · x`.
    Linear {
        base: f64,
        gradient: [f64; 3],
    },
    Raster(RasterField),
    Analytic(Arc<dyn Fn(&Point) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn analytic(f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Analytic(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Linear { base, gradient } => {
                base + gradient[0] * p.x() + gradient[1] * p.y() + gradient[2] * p.z()
            }
            ScalarField::Raster(r) => r.eval(p),
            ScalarField::Analytic(f) => f(p),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Constant(c) => Some(*c),
            _ => None,
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "Constant({c})"),
            ScalarField::Linear { base, gradient } => {
                write!(f, "Linear {{ base: {base}, gradient: {gradient:?} }}")
            }
            ScalarField::Raster(r) => write!(f, "Raster({:?})", r.dims()),
            ScalarField::Analytic(_) => write!(f, "Analytic(..)"),
        }
    }
}

/// Samples on the lattice of nodes spanning a box, interpolated
/// bilinearly (trilinearly in 3D). Storage has the first coordinate
/// varying fastest.
#[derive(Clone, Debug)]
pub struct RasterField {
    domain: BoxDomain,
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl RasterField {
    pub fn new(domain: BoxDomain, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let d = domain.dim().value();
        if dims.len() != d {
            return Err(Error::InvalidParameter(format!("raster has {} dimensions, domain has {d}", dims.len())));
        }
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidParameter("raster needs at least 2 samples per dimension".into()));
        }
        let total: usize = dims.iter().product();
        if data.len() != total {
            return Err(Error::InvalidParameter(format!("raster expects {total} samples, got {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("raster contains non-finite samples".into()));
        }
        Ok(RasterField { domain, dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn eval(&self, p: &Point) -> f64 {
        let d = self.dims.len();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..d {
            let n = self.dims[k];
            let t = (p.coords()[k] - self.domain.lo().coords()[k]) / self.domain.extent(k) * (n - 1) as f64;
            let t = t.clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let at = |i: usize, j: usize, l: usize| -> f64 {
            let idx = if d == 2 { i + self.dims[0] * j } else { i + self.dims[0] * (j + self.dims[1] * l) };
            self.data[idx]
        };
        let (i, j) = (base[0], base[1]);
        let (fx, fy) = (frac[0], frac[1]);
        let plane = |l: usize| {
            let v00 = at(i, j, l);
            let v10 = at(i + 1, j, l);
            let v01 = at(i, j + 1, l);
            let v11 = at(i + 1, j + 1, l);
            (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
        };
        if d == 2 {
            plane(0)
        } else {
            let fz = frac[2];
            (1.0 - fz) * plane(base[2]) + fz * plane(base[2] + 1)
        }
    }
}

/// The admissibility constants `σ0 ≤ σ_s < σ_t ≤ σ1`, `sup σ_s/σ_t ≤ k0 < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MediumBounds {
    pub sigma0: f64,
    pub sigma1: f64,
    pub k0: f64,
}

/// Transport and scattering coefficients over a box domain.
#[derive(Clone, Debug)]
pub struct Medium {
    domain: BoxDomain,
    sigma_t: ScalarField,
    sigma_s: ScalarField,
    bounds: Option<MediumBounds>,
}

impl Medium {
    pub const VALIDATION_POINTS_2D: usize = 256;
    pub const VALIDATION_POINTS_3D: usize = 64;

    /// Builds a medium and verifies the bounds on a dense lattice of samples.
    pub fn new(domain: BoxDomain, sigma_t: ScalarField, sigma_s: ScalarField, bounds: MediumBounds) -> Result<Self> {
        let res = match domain.dim() {
            Dim::Two => Self::VALIDATION_POINTS_2D,
            Dim::Three => Self::VALIDATION_POINTS_3D,
        };
        Self::with_validation(domain, sigma_t, sigma_s, bounds, res)
    }

    pub fn with_validation(
        domain: BoxDomain,
        sigma_t: ScalarField,
        sigma_s: ScalarField,
        bounds: MediumBounds,
        points_per_dim: usize,
    ) -> Result<Self> {
        let m = Medium { domain, sigma_t, sigma_s, bounds: Some(bounds) };
        m.validate(bounds, points_per_dim.max(2))?;
        Ok(m)
    }

    /// Homogeneous medium with bounds taken from the constants themselves.
    pub fn homogeneous(domain: BoxDomain, sigma_t: f64, sigma_s: f64) -> Result<Self> {
        let bounds = MediumBounds {
            sigma0: sigma_s,
            sigma1: sigma_t,
            k0: if sigma_t > 0.0 { sigma_s / sigma_t } else { f64::INFINITY },
        };
        Self::with_validation(domain, ScalarField::Constant(sigma_t), ScalarField::Constant(sigma_s), bounds, 2)
    }

    /// A medium used only through its attenuation (kernel and separability
    /// studies). Skips the admissibility check, so `σ_t ≡ 0` is allowed.
    pub fn absorbing(domain: BoxDomain, sigma_t: ScalarField) -> Self {
        Medium { domain, sigma_t, sigma_s: ScalarField::Constant(0.0), bounds: None }
    }

    /// No admissibility check at all.
    pub fn unchecked(domain: BoxDomain, sigma_t: ScalarField, sigma_s: ScalarField) -> Self {
        Medium { domain, sigma_t, sigma_s, bounds: None }
    }

    fn validate(&self, b: MediumBounds, res: usize) -> Result<()> {
        if !(b.sigma0 >= 0.0 && b.sigma1.is_finite() && b.k0 < 1.0 && b.k0 >= 0.0) {
            return Err(Error::Admissibility(format!(
                "bound constants must satisfy 0 <= sigma0, sigma1 finite, 0 <= k0 < 1; got {b:?}"
            )));
        }
        let tol = 1e-12;
        let d = self.domain.dim().value();
        let total = res.pow(d as u32);
        let lo = self.domain.lo();
        for flat in 0..total {
            let mut rem = flat;
            let mut c = [0.0; 3];
            for (k, ck) in c.iter_mut().enumerate().take(d) {
                let i = rem % res;
                rem /= res;
                *ck = lo.coords()[k] + self.domain.extent(k) * i as f64 / (res - 1) as f64;
            }
            let p = Point::from_slice(&c[..d])?;
            let st = self.sigma_t.eval(&p);
            let ss = self.sigma_s.eval(&p);
            if !(st.is_finite() && ss.is_finite()) {
                return Err(Error::Admissibility(format!("non-finite coefficient at {p:?}")));
            }
            if ss < b.sigma0 - tol || ss >= st || st > b.sigma1 + tol {
                return Err(Error::Admissibility(format!(
                    "need sigma0 <= sigma_s < sigma_t <= sigma1 at {p:?}: sigma_s={ss}, sigma_t={st}, bounds {b:?}"
                )));
            }
            if ss / st > b.k0 + tol {
                return Err(Error::Admissibility(format!(
                    "sigma_s/sigma_t = {} exceeds k0 = {} at {p:?}",
                    ss / st,
                    b.k0
                )));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn sigma_t(&self) -> &ScalarField {
        &self.sigma_t
    }

    pub fn sigma_s(&self) -> &ScalarField {
        &self.sigma_s
    }

    pub fn bounds(&self) -> Option<MediumBounds> {
        self.bounds
    }

    /// Same coefficients on a different box (used when kernels are sampled
    /// on sets that extend past the solve domain).
    pub fn with_domain(&self, domain: BoxDomain) -> Medium {
        Medium { domain, ..self.clone() }
    }

    /// Replaces the coefficients with their δ-M rescaled versions:
    /// `σ_s ← σ_s (1 - w)`, `σ_t ← σ_t - σ_s w`.
    pub fn delta_m_scaled(&self, forward_weight: f64) -> Medium {
        let w = forward_weight;
        let (st, ss) = (self.sigma_t.clone(), self.sigma_s.clone());
        let sigma_t = match (st.as_constant(), ss.as_constant()) {
            (Some(a), Some(b)) => ScalarField::Constant(a - b * w),
            _ => {
                let (st, ss) = (st.clone(), ss.clone());
                ScalarField::analytic(move |p| st.eval(p) - ss.eval(p) * w)
            }
        };
        let sigma_s = match ss.as_constant() {
            Some(b) => ScalarField::Constant(b * (1.0 - w)),
            None => ScalarField::analytic(move |p| ss.eval(p) * (1.0 - w)),
        };
        let bounds = self.bounds.map(|b| MediumBounds { sigma0: b.sigma0 * (1.0 - w), sigma1: b.sigma1, k0: b.k0 });
        Medium { domain: self.domain, sigma_t, sigma_s, bounds }
    }

    /// `∫_0^1 σ_t(x + (y - x) s) ds`.
    #[inline]
    pub fn mean_sigma_t(&self, x: &Point, y: &Point, quad: &SegmentQuadrature) -> f64 {
        match &self.sigma_t {
            ScalarField::Constant(c) => *c,
            ScalarField::Linear { .. } => self.sigma_t.eval(&x.lerp(y, 0.5)),
            field => quad.integrate(|s| field.eval(&x.lerp(y, s))),
        }
    }

    /// Attenuation without the domain check; the pair is put in a canonical
    /// order first so that `E(x, y)` and `E(y, x)` agree bitwise.
    #[inline]
    pub fn attenuation_unchecked(&self, x: &Point, y: &Point, quad: &SegmentQuadrature) -> f64 {
        let (a, b) = if y.lex_less(x) { (y, x) } else { (x, y) };
        let r = a.distance(b);
        if r == 0.0 {
            return 1.0;
        }
        (-r * self.mean_sigma_t(a, b, quad)).exp()
    }
}

/// `E(x, y)` for `x, y` in the medium's domain.
pub fn attenuation(medium: &Medium, x: &Point, y: &Point, quad: &SegmentQuadrature) -> Result<f64> {
    medium.domain().check_contains(x)?;
    medium.domain().check_contains(y)?;
    Ok(medium.attenuation_unchecked(x, y, quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> BoxDomain {
        BoxDomain::unit_square()
    }

    #[test]
    fn constant_field_is_exact_exponential() {
        let m = Medium::absorbing(BoxDomain::rect(0.0, 2.0, 0.0, 2.0).unwrap(), ScalarField::Constant(2.0));
        let q = SegmentQuadrature::default();
        let e = attenuation(&m, &Point::new2(0.0, 0.0), &Point::new2(1.0, 0.0), &q).unwrap();
        assert!((e - (-2.0f64).exp()).abs() < 1e-15);
        assert!((e - 0.135335).abs() < 1e-6);
    }

    #[test]
    fn coincident_points_give_one() {
        let m = Medium::absorbing(unit(), ScalarField::analytic(|p| 1.0 + p.x() * p.y()));
        let q = SegmentQuadrature::default();
        let p = Point::new2(0.3, 0.7);
        assert_eq!(attenuation(&m, &p, &p, &q).unwrap(), 1.0);
    }

    #[test]
    fn linear_field_matches_closed_form() {
        // ∫_0^1 (1 + s) ds = 3/2.
        let analytic = Medium::absorbing(unit(), ScalarField::analytic(|p| 1.0 + p.x()));
        let linear = Medium::absorbing(unit(), ScalarField::Linear { base: 1.0, gradient: [1.0, 0.0, 0.0] });
        let q = SegmentQuadrature::default();
        let x = Point::new2(0.0, 0.0);
        let y = Point::new2(1.0, 0.0);
        let exact = (-1.5f64).exp();
        assert!((attenuation(&analytic, &x, &y, &q).unwrap() - exact).abs() < 1e-15);
        assert!((attenuation(&linear, &x, &y, &q).unwrap() - exact).abs() < 1e-15);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let m = Medium::absorbing(unit(), ScalarField::Constant(1.0));
        let q = SegmentQuadrature::default();
        let r = attenuation(&m, &Point::new2(0.5, 0.5), &Point::new2(1.5, 0.5), &q);
        assert!(matches!(r, Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn admissibility_is_enforced() {
        let b = MediumBounds { sigma0: 0.5, sigma1: 3.0, k0: 0.6 };
        let ok = Medium::new(unit(), ScalarField::Constant(2.0), ScalarField::Constant(1.0), b);
        assert!(ok.is_ok());
        let bad_ratio = Medium::new(unit(), ScalarField::Constant(2.0), ScalarField::Constant(1.5), b);
        assert!(matches!(bad_ratio, Err(Error::Admissibility(_))));
        let varying = Medium::new(unit(), ScalarField::analytic(|p| 1.0 + 2.0 * p.x()), ScalarField::Constant(0.5), b);
        // At x = 0 the ratio is 0.5 <= 0.6; at x = 1 sigma_t = 3 = sigma1.
        assert!(varying.is_ok());
        let k_one = MediumBounds { k0: 1.0, ..b };
        assert!(Medium::new(unit(), ScalarField::Constant(2.0), ScalarField::Constant(1.0), k_one).is_err());
    }

    #[test]
    fn raster_interpolation_is_bilinear() {
        let dom = unit();
        // f = 1 + 2x + 3y sampled on a 3x4 lattice is reproduced exactly.
        let (nx, ny) = (3, 4);
        let mut data = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let x = i as f64 / (nx - 1) as f64;
                let y = j as f64 / (ny - 1) as f64;
                data.push(1.0 + 2.0 * x + 3.0 * y);
            }
        }
        let r = RasterField::new(dom, vec![nx, ny], data).unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.95, 0.5), (0.0, 1.0), (0.5, 0.0)] {
            let v = r.eval(&Point::new2(x, y));
            assert!((v - (1.0 + 2.0 * x + 3.0 * y)).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn attenuation_is_symmetric(ax in 0.0..1.0f64, ay in 0.0..1.0f64, bx in 0.0..1.0f64, by in 0.0..1.0f64) {
            let m = Medium::absorbing(unit(), ScalarField::analytic(|p| 1.0 + p.x() * p.x() + (3.0 * p.y()).sin().abs()));
            let q = SegmentQuadrature::default();
            let a = Point::new2(ax, ay);
            let b = Point::new2(bx, by);
            let e1 = attenuation(&m, &a, &b, &q).unwrap();
            let e2 = attenuation(&m, &b, &a, &q).unwrap();
            prop_assert!((e1 - e2).abs() <= 1e-12);
            prop_assert!(e1 > 0.0 && e1 <= 1.0);
        }

        #[test]
        fn larger_sigma_never_increases_attenuation(ax in 0.0..1.0f64, ay in 0.0..1.0f64, bx in 0.0..1.0f64, by in 0.0..1.0f64, bump in 0.0..2.0f64) {
            let base = Medium::absorbing(unit(), ScalarField::analytic(|p| 1.0 + p.x()));
            let more = Medium::absorbing(unit(), ScalarField::analytic(move |p| 1.0 + p.x() + bump * p.y() * p.y()));
            let q = SegmentQuadrature::default();
            let a = Point::new2(ax, ay);
            let b = Point::new2(bx, by);
            prop_assert!(attenuation(&more, &a, &b, &q).unwrap() <= attenuation(&base, &a, &b, &q).unwrap());
        }

        #[test]
        fn doubling_nodes_converges_for_quartic_fields(ax in 0.0..1.0f64, ay in 0.0..1.0f64, bx in 0.0..1.0f64, by in 0.0..1.0f64) {
            let m = Medium::absorbing(unit(), ScalarField::analytic(|p| 1.0 + p.x().powi(4) + 0.5 * p.x() * p.y().powi(3)));
            let a = Point::new2(ax, ay);
            let b = Point::new2(bx, by);
            let e16 = attenuation(&m, &a, &b, &SegmentQuadrature::new(16).unwrap()).unwrap();
            let e32 = attenuation(&m, &a, &b, &SegmentQuadrature::new(32).unwrap()).unwrap();
            prop_assert!((e16 - e32).abs() < 1e-10);
        }
    }
}
