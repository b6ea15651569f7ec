use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Point};

/// Which construction produced an approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermFamily {
    /// Binomial/Gegenbauer expansion of `e^{−in arg(x−y)}` in 2D.
    Phase2d,
    /// Piecewise Taylor polynomials of a smooth kernel on cell pairs.
    PiecewiseTaylor,
    /// Legendre/Gegenbauer expansion of the zonal harmonic `Y_{n0}` of
    /// the direction `x − y` in 3D.
    Harmonic3d,
}

/// A closed-form factor, evaluated on one side of the product only.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    /// `coeff · |p − c|^radial · e^{i·angular·θ}` with `θ = arg(p − c)` (2D).
    PolarPower { center: Point, coeff: Complex64, radial: i32, angular: i32 },
    /// `1_cell(p) · Σ_β c_β (p − c)^β`. Cells are half-open, closed on the
    /// upper face along the axes flagged in `upper_closed`, so that a tiling
    /// assigns every point of the outer box to exactly one cell.
    CellPolynomial { cell: BoxDomain, upper_closed: Vec<bool>, center: Point, monomials: Vec<(Vec<u32>, f64)> },
    /// `|v|^radial · v_z^z · v_x^x · v_y^y` with `v = p − c` (3D).
    SphericalMonomial { center: Point, radial: i32, z: u32, x: u32, y: u32 },
    /// `|v|^{−m} sin^b θ cos^c φ sin^d φ · Σ_a w_a cos^a θ` with `v = p − c`
    /// in spherical coordinates (3D).
    SphericalSeries { center: Point, m: u32, b: u32, c: u32, d: u32, weights: Vec<f64> },
}

fn cell_contains(cell: &BoxDomain, upper_closed: &[bool], p: &Point) -> bool {
    let (lo, hi) = (cell.lo(), cell.hi());
    p.coords()
        .iter()
        .enumerate()
        .all(|(k, &v)| v >= lo.coords()[k] && (v < hi.coords()[k] || (upper_closed[k] && v <= hi.coords()[k])))
}

impl Factor {
    pub fn eval(&self, p: &Point) -> Complex64 {
        match self {
            Factor::PolarPower { center, coeff, radial, angular } => {
                let v = p.sub(center);
                let r = v.norm();
                if *radial != 0 && r == 0.0 {
                    return if *radial > 0 { Complex64::new(0.0, 0.0) } else { Complex64::new(f64::INFINITY, 0.0) };
                }
                let th = v.y().atan2(v.x());
                coeff * Complex64::from_polar(r.powi(*radial), *angular as f64 * th)
            }
            Factor::CellPolynomial { cell, upper_closed, center, monomials } => {
                if !cell_contains(cell, upper_closed, p) {
                    return Complex64::new(0.0, 0.0);
                }
                let v = p.sub(center);
                let s: f64 = monomials
                    .iter()
                    .map(|(e, c)| c * e.iter().zip(v.coords()).map(|(&k, &x)| x.powi(k as i32)).product::<f64>())
                    .sum();
                Complex64::new(s, 0.0)
            }
            Factor::SphericalMonomial { center, radial, z, x, y } => {
                let v = p.sub(center);
                let r = v.norm();
                let val = r.powi(*radial) * v.z().powi(*z as i32) * v.x().powi(*x as i32) * v.y().powi(*y as i32);
                Complex64::new(val, 0.0)
            }
            Factor::SphericalSeries { center, m, b, c, d, weights } => {
                let v = p.sub(center);
                let r = v.norm();
                let rho = v.x().hypot(v.y());
                let (ct, st) = (v.z() / r, rho / r);
                let (cp, sp) = if rho > 0.0 { (v.x() / rho, v.y() / rho) } else { (1.0, 0.0) };
                // Horner in cosθ.
                let poly = weights.iter().rev().fold(0.0, |acc, w| acc * ct + w);
                let val = r.powi(-(*m as i32)) * st.powi(*b as i32) * cp.powi(*c as i32) * sp.powi(*d as i32) * poly;
                Complex64::new(val, 0.0)
            }
        }
    }
}

/// `K(x, y) ≈ Σ_l f_l(x) g_l(y)` with explicit closed-form factors.
#[derive(Clone, Debug)]
pub struct SeparableApproximation {
    pub family: TermFamily,
    pub x: BoxDomain,
    pub y: BoxDomain,
    left: Vec<Factor>,
    right: Vec<Factor>,
    /// Rigorous truncation bound plus a floating-point allowance.
    pub guaranteed_sup_error: f64,
    /// Truncation orders used, one per expansion block (a single entry for
    /// the 2D phase construction, one per Legendre degree in 3D, the
    /// polynomial degree for the Taylor construction).
    pub truncation: Vec<usize>,
    /// Nominal `N = 2n + ⌈c·ln(1/ε)⌉` where the construction has one.
    pub nominal_truncation: Option<usize>,
    /// Number of cell pairs (Taylor construction only).
    pub cell_pairs: Option<usize>,
    /// Consecutive term ranges sharing one `(x-cell, y-cell)` support, for
    /// piecewise families.
    pub(crate) blocks: Option<Vec<std::ops::Range<usize>>>,
}

impl SeparableApproximation {
    pub(crate) fn new(
        family: TermFamily,
        x: BoxDomain,
        y: BoxDomain,
        terms: Vec<(Factor, Factor)>,
        guaranteed_sup_error: f64,
        truncation: Vec<usize>,
    ) -> Self {
        let (left, right) = terms.into_iter().unzip();
        SeparableApproximation {
            family,
            x,
            y,
            left,
            right,
            guaranteed_sup_error,
            truncation,
            nominal_truncation: None,
            cell_pairs: None,
            blocks: None,
        }
    }

    pub fn term_count(&self) -> usize {
        self.left.len()
    }

    /// `f_l(x)`; depends on `x` only.
    pub fn eval_left(&self, l: usize, x: &Point) -> Complex64 {
        self.left[l].eval(x)
    }

    /// `g_l(y)`; depends on `y` only.
    pub fn eval_right(&self, l: usize, y: &Point) -> Complex64 {
        self.right[l].eval(y)
    }

    pub fn left_factor(&self, l: usize) -> &Factor {
        &self.left[l]
    }

    pub fn right_factor(&self, l: usize) -> &Factor {
        &self.right[l]
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Complex64 {
        self.left.iter().zip(&self.right).map(|(f, g)| f.eval(x) * g.eval(y)).sum()
    }

    /// `F[i, l] = f_l(x_i)` and `H[l, j] = g_l(y_j)`.
    pub fn factor_matrices(&self, xs: &[Point], ys: &[Point]) -> (Mat<Complex64>, Mat<Complex64>) {
        let t = self.term_count();
        let fvals: Vec<Vec<Complex64>> = xs.par_iter().map(|p| self.left.iter().map(|f| f.eval(p)).collect()).collect();
        let gvals: Vec<Vec<Complex64>> =
            ys.par_iter().map(|p| self.right.iter().map(|g| g.eval(p)).collect()).collect();
        let f = Mat::from_fn(xs.len(), t, |i, l| fvals[i][l]);
        let h = Mat::from_fn(t, ys.len(), |l, j| gvals[j][l]);
        (f, h)
    }

    /// Dense reconstruction `F H` on the sample sets.
    pub fn reconstruct(&self, xs: &[Point], ys: &[Point]) -> Mat<Complex64> {
        let (f, h) = self.factor_matrices(xs, ys);
        let mut out = Mat::<Complex64>::zeros(xs.len(), ys.len());
        faer::linalg::matmul::matmul(
            &mut out,
            faer::Accum::Replace,
            &f,
            &h,
            Complex64::new(1.0, 0.0),
            faer::get_global_parallelism(),
        );
        out
    }

    /// Maximum of `|K − Σ f_l g_l|` over `xs × ys`, evaluated in row blocks
    /// so that the dense reconstruction never exceeds a few hundred MiB.
    /// Real-valued families use a real product.
    pub fn measured_sup_error(
        &self,
        xs: &[Point],
        ys: &[Point],
        target: impl Fn(&Point, &Point) -> Result<Complex64> + Sync,
    ) -> Result<f64> {
        if let Some(blocks) = &self.blocks {
            return self.blockwise_sup_error(blocks, xs, ys, &target);
        }
        const BLOCK: usize = 1024;
        let t = self.term_count();
        let real = self.family != TermFamily::Phase2d;
        let gvals: Vec<Vec<Complex64>> =
            ys.par_iter().map(|p| self.right.iter().map(|g| g.eval(p)).collect()).collect();
        let h = Mat::from_fn(t, ys.len(), |l, j| gvals[j][l]);
        let h_re = Mat::from_fn(t, ys.len(), |l, j| gvals[j][l].re);
        drop(gvals);
        let par = faer::get_global_parallelism();
        let mut worst = 0.0f64;
        for start in (0..xs.len()).step_by(BLOCK) {
            let block = &xs[start..(start + BLOCK).min(xs.len())];
            let fvals: Vec<Vec<Complex64>> =
                block.par_iter().map(|p| self.left.iter().map(|f| f.eval(p)).collect()).collect();
            let approx: Mat<Complex64> = if real {
                let f = Mat::from_fn(block.len(), t, |i, l| fvals[i][l].re);
                let mut out = Mat::<f64>::zeros(block.len(), ys.len());
                faer::linalg::matmul::matmul(&mut out, faer::Accum::Replace, &f, &h_re, 1.0, par);
                Mat::from_fn(block.len(), ys.len(), |i, j| Complex64::new(out[(i, j)], 0.0))
            } else {
                let f = Mat::from_fn(block.len(), t, |i, l| fvals[i][l]);
                let mut out = Mat::<Complex64>::zeros(block.len(), ys.len());
                faer::linalg::matmul::matmul(&mut out, faer::Accum::Replace, &f, &h, Complex64::new(1.0, 0.0), par);
                out
            };
            let rows: Vec<Result<f64>> = (0..block.len())
                .into_par_iter()
                .map(|i| {
                    let mut m = 0.0f64;
                    for (j, y) in ys.iter().enumerate() {
                        let e = (target(&block[i], y)? - approx[(i, j)]).norm();
                        if !e.is_finite() {
                            return Err(Error::Numerical(format!("non-finite error at sample ({}, {j})", start + i)));
                        }
                        m = m.max(e);
                    }
                    Ok(m)
                })
                .collect();
            for r in rows {
                worst = worst.max(r?);
            }
        }
        Ok(worst)
    }

    fn blockwise_sup_error(
        &self,
        blocks: &[std::ops::Range<usize>],
        xs: &[Point],
        ys: &[Point],
        target: &(impl Fn(&Point, &Point) -> Result<Complex64> + Sync),
    ) -> Result<f64> {
        let support = |f: &Factor, p: &Point| match f {
            Factor::CellPolynomial { cell, upper_closed, .. } => cell_contains(cell, upper_closed, p),
            _ => true,
        };
        let per_block: Vec<Result<(f64, usize)>> = blocks
            .par_iter()
            .map(|range| {
                let (fl, fr) = (&self.left[range.start], &self.right[range.start]);
                let xi: Vec<&Point> = xs.iter().filter(|p| support(fl, p)).collect();
                let yi: Vec<&Point> = ys.iter().filter(|p| support(fr, p)).collect();
                let mut m = 0.0f64;
                for x in &xi {
                    let fx: Vec<Complex64> = range.clone().map(|l| self.left[l].eval(x)).collect();
                    for y in &yi {
                        let approx: Complex64 = range.clone().zip(&fx).map(|(l, f)| f * self.right[l].eval(y)).sum();
                        let e = (target(x, y)? - approx).norm();
                        if !e.is_finite() {
                            return Err(Error::Numerical("non-finite error in blockwise check".into()));
                        }
                        m = m.max(e);
                    }
                }
                Ok((m, xi.len() * yi.len()))
            })
            .collect();
        let mut worst = 0.0f64;
        let mut covered = 0usize;
        for r in per_block {
            let (m, c) = r?;
            worst = worst.max(m);
            covered += c;
        }
        if covered != xs.len() * ys.len() {
            return Err(Error::Numerical(format!(
                "cell blocks cover {covered} of {} sample pairs",
                xs.len() * ys.len()
            )));
        }
        Ok(worst)
    }
}
