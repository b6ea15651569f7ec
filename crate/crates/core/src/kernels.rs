//! Pointwise evaluation and dense assembly of the moment kernels
//!
//! * 2D: `G_n(x, y) = E(x, y) / |x - y| · e^{-inθ}` with `θ = arg(x - y)`,
//! * 3D: `G_rs(x, y) = E(x, y) / |x - y|² · Y_rs((x - y)/|x - y|)` with the
//!   standard-normalization harmonics.
//!
//! The angle is taken from `atan2`, i.e. in `(-π, π]`; `e^{-inθ}` does not
//! depend on the branch.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim, Point};
use crate::medium::Medium;
use crate::quadrature::{gauss_legendre, SegmentQuadrature};
use crate::special::{direction_angles, spherical_harmonic_standard};

/// Which kernel a matrix discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMode {
    /// `G_n` in two dimensions.
    TwoD { n: i64 },
    /// `G_rs` in three dimensions.
    ThreeD { r: usize, s: i64 },
}

impl KernelMode {
    pub fn dim(&self) -> Dim {
        match self {
            KernelMode::TwoD { .. } => Dim::Two,
            KernelMode::ThreeD { .. } => Dim::Three,
        }
    }
}

fn singular(x: &Point) -> Error {
    Error::Singular(x.coords().to_vec())
}

/// `E(x, y)/|x - y|` and `θ = arg(x - y)`; no domain checks.
#[inline]
pub(crate) fn pair_2d(medium: &Medium, quad: &SegmentQuadrature, x: &Point, y: &Point) -> (f64, f64) {
    let d = x.sub(y);
    let e = medium.attenuation_unchecked(x, y, quad);
    (e / d.norm(), d.y().atan2(d.x()))
}

fn check_pair(medium: &Medium, x: &Point, y: &Point, dim: Dim) -> Result<()> {
    if x.dim() != dim || y.dim() != dim || medium.domain().dim() != dim {
        return Err(Error::InvalidParameter(format!(
            "kernel of dimension {} evaluated on points of dimension {}/{} in a {}-dimensional medium",
            dim.value(),
            x.dim().value(),
            y.dim().value(),
            medium.domain().dim().value()
        )));
    }
    medium.domain().check_contains(x)?;
    medium.domain().check_contains(y)?;
    if x.distance(y) == 0.0 {
        return Err(singular(x));
    }
    Ok(())
}

/// `G_n(x, y)` with the default 16-node segment rule for the attenuation.
pub fn g2d(medium: &Medium, n: i64, x: &Point, y: &Point) -> Result<Complex64> {
    g2d_with(medium, &SegmentQuadrature::default(), n, x, y)
}

pub fn g2d_with(medium: &Medium, quad: &SegmentQuadrature, n: i64, x: &Point, y: &Point) -> Result<Complex64> {
    check_pair(medium, x, y, Dim::Two)?;
    Ok(g2d_unchecked(medium, quad, n, x, y))
}

#[inline]
fn g2d_unchecked(medium: &Medium, quad: &SegmentQuadrature, n: i64, x: &Point, y: &Point) -> Complex64 {
    let (amp, theta) = pair_2d(medium, quad, x, y);
    Complex64::from_polar(amp, -(n as f64) * theta)
}

/// `G_rs(x, y)` with the default segment rule.
pub fn g3d(medium: &Medium, r: usize, s: i64, x: &Point, y: &Point) -> Result<Complex64> {
    g3d_with(medium, &SegmentQuadrature::default(), r, s, x, y)
}

pub fn g3d_with(
    medium: &Medium,
    quad: &SegmentQuadrature,
    r: usize,
    s: i64,
    x: &Point,
    y: &Point,
) -> Result<Complex64> {
    if s.unsigned_abs() as usize > r {
        return Err(Error::InvalidParameter(format!("|s| = {} exceeds r = {r}", s.abs())));
    }
    check_pair(medium, x, y, Dim::Three)?;
    g3d_unchecked(medium, quad, r, s, x, y)
}

#[inline]
fn g3d_unchecked(
    medium: &Medium,
    quad: &SegmentQuadrature,
    r: usize,
    s: i64,
    x: &Point,
    y: &Point,
) -> Result<Complex64> {
    let d = x.sub(y);
    let dist = d.norm();
    let e = medium.attenuation_unchecked(x, y, quad);
    let (theta, phi) = direction_angles([d.x(), d.y(), d.z()]);
    Ok(spherical_harmonic_standard(r, s, theta, phi)? * (e / (dist * dist)))
}

/// Dense kernel matrix `entries[(i, j)] = G(rows[i], cols[j])`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub rows: Vec<Point>,
    pub cols: Vec<Point>,
    pub mode: KernelMode,
    pub entries: Mat<Complex64>,
    /// Whether the entries were multiplied by `sqrt(w_i w_j)` quadrature
    /// weights (see [`KernelMatrix::apply_weights`]).
    pub scaled: bool,
}

/// Assembles the dense matrix of `mode` over `xs × ys`.
///
/// Rows are computed in parallel; each entry is an independent scalar
/// computation, so the result does not depend on the thread count.
/// Coincident pairs are rejected.
pub fn assemble(medium: &Medium, mode: KernelMode, xs: &[Point], ys: &[Point]) -> Result<KernelMatrix> {
    assemble_with(medium, &SegmentQuadrature::default(), mode, xs, ys)
}

pub fn assemble_with(
    medium: &Medium,
    quad: &SegmentQuadrature,
    mode: KernelMode,
    xs: &[Point],
    ys: &[Point],
) -> Result<KernelMatrix> {
    let dim = mode.dim();
    if medium.domain().dim() != dim {
        return Err(Error::InvalidParameter(format!(
            "{}-dimensional kernel requested for a {}-dimensional medium",
            dim.value(),
            medium.domain().dim().value()
        )));
    }
    if let KernelMode::ThreeD { r, s } = mode {
        if s.unsigned_abs() as usize > r {
            return Err(Error::InvalidParameter(format!("|s| = {} exceeds r = {r}", s.abs())));
        }
    }
    for p in xs.iter().chain(ys) {
        if p.dim() != dim {
            return Err(Error::InvalidParameter("point dimension does not match kernel".into()));
        }
        medium.domain().check_contains(p)?;
    }
    let (m, n) = (xs.len(), ys.len());
    let rows: Vec<Result<Vec<Complex64>>> = xs
        .par_iter()
        .map(|x| {
            ys.iter()
                .map(|y| {
                    if x.distance(y) == 0.0 {
                        return Err(singular(x));
                    }
                    match mode {
                        KernelMode::TwoD { n } => Ok(g2d_unchecked(medium, quad, n, x, y)),
                        KernelMode::ThreeD { r, s } => g3d_unchecked(medium, quad, r, s, x, y),
                    }
                })
                .collect()
        })
        .collect();
    let mut entries = Mat::<Complex64>::zeros(m, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(KernelMatrix { rows: xs.to_vec(), cols: ys.to_vec(), mode, entries, scaled: false })
}

impl KernelMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.ncols() {
            for i in 0..self.nrows() {
                s += self.entries[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Multiplies entry `(i, j)` by `sqrt(row_w[i] · col_w[j])`, which turns
    /// the matrix into an `L²`-faithful discretization of the integral
    /// operator for the given quadrature weights.
    pub fn apply_weights(&mut self, row_w: &[f64], col_w: &[f64]) -> Result<()> {
        if self.scaled {
            return Err(Error::InvalidParameter("weights already applied".into()));
        }
        if row_w.len() != self.nrows() || col_w.len() != self.ncols() {
            return Err(Error::InvalidParameter("weight vector length mismatch".into()));
        }
        for j in 0..self.ncols() {
            let cj = col_w[j].sqrt();
            for i in 0..self.nrows() {
                self.entries[(i, j)] *= row_w[i].sqrt() * cj;
            }
        }
        self.scaled = true;
        Ok(())
    }

    /// Raw export: little-endian `u64` rows, `u64` cols, then row-major
    /// `(re, im)` pairs of `f64`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        write_complex_matrix(&self.entries, path)
    }
}

pub fn write_complex_matrix(m: &Mat<Complex64>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the format written by [`write_complex_matrix`].
pub fn read_complex_matrix(path: &Path) -> Result<Mat<Complex64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(Error::Config(format!("{}: truncated matrix header", path.display())));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    let (rows, cols) = (word(0) as usize, word(1) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(16))
        .and_then(|c| c.checked_add(16))
        .ok_or_else(|| Error::Config("matrix header overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Config(format!(
            "{}: expected {expected} bytes for {rows}x{cols}, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    Ok(Mat::from_fn(rows, cols, |i, j| {
        let k = 2 + 2 * (i * cols + j);
        Complex64::new(f(k), f(k + 1))
    }))
}

/// `‖G_rs(·, y)‖_{L²(X)}` by a tensor Gauss–Legendre rule with
/// `nodes_per_dim` nodes per axis. `y` must lie outside `X`.
pub fn g3d_l2_norm_over_box(
    medium: &Medium,
    r: usize,
    s: i64,
    domain: &BoxDomain,
    y: &Point,
    nodes_per_dim: usize,
) -> Result<f64> {
    if domain.dim() != Dim::Three {
        return Err(Error::InvalidParameter("expected a 3D box".into()));
    }
    let quad = SegmentQuadrature::default();
    let (t, w) = gauss_legendre(nodes_per_dim);
    let lo = domain.lo();
    let half = [domain.extent(0) / 2.0, domain.extent(1) / 2.0, domain.extent(2) / 2.0];
    let mut total = 0.0;
    for (a, wa) in t.iter().zip(&w) {
        for (b, wb) in t.iter().zip(&w) {
            for (c, wc) in t.iter().zip(&w) {
                let x = Point::new3(
                    lo.x() + half[0] * (a + 1.0),
                    lo.y() + half[1] * (b + 1.0),
                    lo.z() + half[2] * (c + 1.0),
                );
                let g = g3d_with(medium, &quad, r, s, &x, y)?;
                total += wa * wb * wc * g.norm_sqr();
            }
        }
    }
    Ok((total * half[0] * half[1] * half[2]).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::ScalarField;
    use crate::special::SQRT_4PI;
    use std::f64::consts::E;

    fn plane(sigma: f64) -> Medium {
        Medium::absorbing(BoxDomain::rect(-5.0, 5.0, -5.0, 5.0).unwrap(), ScalarField::Constant(sigma))
    }

    fn space(sigma: f64) -> Medium {
        Medium::absorbing(
            BoxDomain::cuboid((-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0)).unwrap(),
            ScalarField::Constant(sigma),
        )
    }

    #[test]
    fn g2d_examples() {
        let m0 = plane(0.0);
        let v = g2d(&m0, 0, &Point::new2(2.0, 0.0), &Point::new2(0.0, 0.0)).unwrap();
        assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let v = g2d(&m0, 1, &Point::new2(1.0, 0.0), &Point::new2(0.0, 0.0)).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let m1 = plane(1.0);
        let v = g2d(&m1, 2, &Point::new2(0.0, 1.0), &Point::new2(0.0, 0.0)).unwrap();
        assert!((v - Complex64::new(-1.0 / E, 0.0)).norm() < 1e-15);
        let p = Point::new2(0.3, 0.3);
        assert!(matches!(g2d(&m1, 0, &p, &p), Err(Error::Singular(_))));
        assert!(matches!(g2d(&m1, 0, &Point::new2(9.0, 0.0), &p), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn g3d_examples() {
        let m0 = space(0.0);
        let x = Point::new3(0.0, 0.0, 2.0);
        let o = Point::new3(0.0, 0.0, 0.0);
        let v = g3d(&m0, 0, 0, &x, &o).unwrap();
        assert!((v.re - 1.0 / SQRT_4PI / 4.0).abs() < 1e-15 && v.im == 0.0);
        let m1 = space(1.0);
        let v = g3d(&m1, 1, 0, &x, &o).unwrap();
        let y10_pole = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        assert!((v.re - y10_pole * (-2.0f64).exp() / 4.0).abs() < 1e-15);
        assert!(g3d(&m1, 1, 2, &x, &o).is_err());
        assert!(matches!(g3d(&m1, 0, 0, &o, &o), Err(Error::Singular(_))));
    }

    #[test]
    fn matrix_export_roundtrip() {
        let m = plane(1.0);
        let xs = vec![Point::new2(0.0, 0.0), Point::new2(0.5, 0.1)];
        let ys = vec![Point::new2(2.0, 0.0), Point::new2(2.0, 1.0), Point::new2(3.0, -1.0)];
        let k = assemble(&m, KernelMode::TwoD { n: 3 }, &xs, &ys).unwrap();
        let dir = std::env::temp_dir().join(format!("kmat-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("k.bin");
        k.write_binary(&path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16 + 6 * 16);
        let back = read_complex_matrix(&path).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(back[(i, j)], k.get(i, j));
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn coincident_pair_is_rejected_in_assembly() {
        let m = plane(1.0);
        let p = vec![Point::new2(0.0, 0.0)];
        assert!(matches!(assemble(&m, KernelMode::TwoD { n: 0 }, &p, &p), Err(Error::Singular(_))));
    }
}
