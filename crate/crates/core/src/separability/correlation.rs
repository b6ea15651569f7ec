use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim, Point};
use crate::kernels::{g2d_with, g3d_with};
use crate::medium::Medium;
use crate::quadrature::SegmentQuadrature;

/// Points per axis needed to resolve `G_n(·, y)` over `X` for the pair
/// `y1, y2`: at least ten samples per local oscillation,
/// `max(64, ceil(10 n diam(X) / (2π dist(X, {y1, y2}))))`.
pub fn required_points_per_dim(n: usize, x: &BoxDomain, y1: &Point, y2: &Point) -> usize {
    let dist = x.distance_to_point(y1).min(x.distance_to_point(y2));
    let need = (10.0 * n as f64 * x.diam() / (2.0 * PI * dist)).ceil();
    (need as usize).max(64)
}

fn sample_point(x: &BoxDomain, ppd: usize, idx: usize) -> Point {
    let lo = x.lo();
    let d = x.dim().value();
    let mut c = [0.0; 3];
    let mut rem = idx;
    for (k, ck) in c.iter_mut().enumerate().take(d) {
        let i = rem % ppd;
        rem /= ppd;
        *ck = lo.coords()[k] + (i as f64 + 0.5) * x.extent(k) / ppd as f64;
    }
    if d == 2 {
        Point::new2(c[0], c[1])
    } else {
        Point::new3(c[0], c[1], c[2])
    }
}

fn kernel(medium: &Medium, quad: &SegmentQuadrature, n: usize, x: &Point, y: &Point) -> Result<Complex64> {
    match x.dim() {
        Dim::Two => g2d_with(medium, quad, n as i64, x, y),
        Dim::Three => g3d_with(medium, quad, n, 0, x, y),
    }
}

/// Normalized correlation
/// `C(y1, y2) = ∫_X G(x, y1) conj(G(x, y2)) dx / (‖G(·, y1)‖ ‖G(·, y2)‖)`
/// by the midpoint rule with `points_per_dim` samples per axis. `G` is
/// `G_n` in 2D and `G_{n0}` in 3D.
///
/// Refuses resolutions below [`required_points_per_dim`].
pub fn correlation(
    medium: &Medium,
    n: usize,
    x: &BoxDomain,
    y1: &Point,
    y2: &Point,
    points_per_dim: usize,
) -> Result<Complex64> {
    let required = required_points_per_dim(n, x, y1, y2);
    if points_per_dim < required {
        return Err(Error::Resolution { required, given: points_per_dim });
    }
    if x.contains(y1) || x.contains(y2) {
        return Err(Error::InvalidParameter("y1 and y2 must lie outside X".into()));
    }
    let quad = SegmentQuadrature::default();
    let total = points_per_dim.pow(x.dim().value() as u32);
    const CHUNK: usize = 4096;
    let chunks: Vec<Result<(Complex64, f64, f64)>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = (Complex64::new(0.0, 0.0), 0.0, 0.0);
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let p = sample_point(x, points_per_dim, idx);
                let g1 = kernel(medium, &quad, n, &p, y1)?;
                let g2 = kernel(medium, &quad, n, &p, y2)?;
                acc.0 += g1 * g2.conj();
                acc.1 += g1.norm_sqr();
                acc.2 += g2.norm_sqr();
            }
            Ok(acc)
        })
        .collect();
    let (mut ip, mut n1, mut n2) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for c in chunks {
        let (a, b, d) = c?;
        ip += a;
        n1 += b;
        n2 += d;
    }
    Ok(ip / (n1 * n2).sqrt())
}

/// Ordinary least squares fit of `log y` against `log x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 positive samples, got {}", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    Ok(LogLogFit { slope, intercept: my - slope * mx, points: pts.len() })
}

/// Configuration of a correlation decay sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationStudy {
    pub x: BoxDomain,
    pub y1: Point,
    pub y2: Point,
    /// Largest `ñ = n |y1 − y2|` of the sweep.
    pub n_tilde_max: f64,
    /// Width of the asymptotic fit window in decades of `ñ`.
    pub fit_decades: f64,
    /// Number of log-spaced samples across the fit window.
    pub samples: usize,
    /// Explicit list of `n`; overrides the log-spaced default.
    pub n_values: Option<Vec<usize>>,
}

impl CorrelationStudy {
    pub fn new(x: BoxDomain, y1: Point, y2: Point) -> Self {
        CorrelationStudy { x, y1, y2, n_tilde_max: 150.0, fit_decades: 1.0, samples: 64, n_values: None }
    }

    /// The mode indices of the sweep: log-spaced over the top `fit_decades`
    /// of `ñ` (rounded and deduplicated) unless given explicitly.
    pub fn sweep(&self) -> Result<Vec<usize>> {
        if let Some(ns) = &self.n_values {
            let mut v = ns.clone();
            v.sort_unstable();
            v.dedup();
            return Ok(v);
        }
        let d = self.y1.distance(&self.y2);
        if d == 0.0 {
            return Err(Error::InvalidParameter("y1 = y2 gives ñ = 0 for every n".into()));
        }
        let hi = self.n_tilde_max / d;
        let lo = hi / 10f64.powf(self.fit_decades);
        let k = self.samples.max(2);
        let mut v: Vec<usize> = (0..k)
            .map(|i| {
                let t = i as f64 / (k - 1) as f64;
                (lo.ln() + t * (hi.ln() - lo.ln())).exp().round() as usize
            })
            .filter(|&n| n > 0)
            .collect();
        v.dedup();
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSample {
    pub n: usize,
    pub n_tilde: f64,
    pub abs_c: f64,
    pub points_per_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub samples: Vec<CorrelationSample>,
    /// Slope of `log |C|` against `log ñ` over the fit window.
    pub fitted_slope: f64,
    pub fit_window: (f64, f64),
    pub fit_points: usize,
}

/// Sweeps `n`, computes `|C|` at the resolution rule of
/// [`required_points_per_dim`], and fits the decay over the top
/// `fit_decades` of `ñ`.
pub fn correlation_decay_study(medium: &Medium, study: &CorrelationStudy) -> Result<CorrelationProfile> {
    let d = study.y1.distance(&study.y2);
    let ns = study.sweep()?;
    let mut samples = Vec::with_capacity(ns.len());
    for n in ns {
        let ppd = required_points_per_dim(n, &study.x, &study.y1, &study.y2);
        let c = correlation(medium, n, &study.x, &study.y1, &study.y2, ppd)?;
        samples.push(CorrelationSample { n, n_tilde: n as f64 * d, abs_c: c.norm(), points_per_dim: ppd });
    }
    let top = samples.iter().map(|s| s.n_tilde).fold(0.0, f64::max);
    let lo = top / 10f64.powf(study.fit_decades);
    let window: Vec<&CorrelationSample> = samples.iter().filter(|s| s.n_tilde >= lo * (1.0 - 1e-12)).collect();
    if window.len() < 5 {
        return Err(Error::Fit(format!(
            "only {} samples in the fit window [{lo:.3}, {top:.3}]; at least 5 are needed",
            window.len()
        )));
    }
    let xs: Vec<f64> = window.iter().map(|s| s.n_tilde).collect();
    let ys: Vec<f64> = window.iter().map(|s| s.abs_c).collect();
    let fit = fit_loglog(&xs, &ys)?;
    Ok(CorrelationProfile { samples, fitted_slope: fit.slope, fit_window: (lo, top), fit_points: fit.points })
}
