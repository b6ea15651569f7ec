//! Points, axis-aligned boxes and cell-centred Cartesian grids in two or
//! three dimensions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn value(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn from_usize(d: usize) -> Result<Self> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {d}"))),
        }
    }
}

/// A point in the plane or in space. Unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    c: [f64; 3],
    dim: Dim,
}

impl Point {
    pub fn new2(x: f64, y: f64) -> Self {
        Point { c: [x, y, 0.0], dim: Dim::Two }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Point { c: [x, y, z], dim: Dim::Three }
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coordinate in {coords:?}")));
        }
        match coords.len() {
            2 => Ok(Point::new2(coords[0], coords[1])),
            3 => Ok(Point::new3(coords[0], coords[1], coords[2])),
            d => Err(Error::InvalidParameter(format!("points have 2 or 3 coordinates, got {d}"))),
        }
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim.value()]
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.c[0]
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.c[1]
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.c[2]
    }

    #[inline]
    pub fn sub(&self, other: &Point) -> Point {
        Point { c: [self.c[0] - other.c[0], self.c[1] - other.c[1], self.c[2] - other.c[2]], dim: self.dim }
    }

    #[inline]
    pub fn add(&self, other: &Point) -> Point {
        Point { c: [self.c[0] + other.c[0], self.c[1] + other.c[1], self.c[2] + other.c[2]], dim: self.dim }
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Point {
        Point { c: [self.c[0] * s, self.c[1] * s, self.c[2] * s], dim: self.dim }
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        self.c[0] * other.c[0] + self.c[1] * other.c[1] + self.c[2] * other.c[2]
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }

    /// `self + t (other - self)`.
    #[inline]
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point {
            c: [
                self.c[0] + t * (other.c[0] - self.c[0]),
                self.c[1] + t * (other.c[1] - self.c[1]),
                self.c[2] + t * (other.c[2] - self.c[2]),
            ],
            dim: self.dim,
        }
    }

    /// Lexicographic comparison of coordinates, used to fix an orientation
    /// for symmetric quantities.
    pub(crate) fn lex_less(&self, other: &Point) -> bool {
        for k in 0..3 {
            if self.c[k] != other.c[k] {
                return self.c[k] < other.c[k];
            }
        }
        false
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Point,
    hi: Point,
}

impl BoxDomain {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::InvalidParameter("box corners have different dimensions".into()));
        }
        for (a, b) in lo.coords().iter().zip(hi.coords()) {
            if !(a < b) {
                return Err(Error::InvalidParameter(format!(
                    "degenerate box: lo {:?} must be below hi {:?} in every coordinate",
                    lo, hi
                )));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    /// `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Self::new(Point::new2(x0, y0), Point::new2(x1, y1))
    }

    /// `[x0, x1] x [y0, y1] x [z0, z1]`.
    pub fn cuboid(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Result<Self> {
        Self::new(Point::new3(x.0, y.0, z.0), Point::new3(x.1, y.1, z.1))
    }

    pub fn unit_square() -> Self {
        BoxDomain { lo: Point::new2(0.0, 0.0), hi: Point::new2(1.0, 1.0) }
    }

    pub fn unit_cube() -> Self {
        BoxDomain { lo: Point::new3(0.0, 0.0, 0.0), hi: Point::new3(1.0, 1.0, 1.0) }
    }

    pub fn lo(&self) -> Point {
        self.lo
    }

    pub fn hi(&self) -> Point {
        self.hi
    }

    pub fn dim(&self) -> Dim {
        self.lo.dim()
    }

    pub fn center(&self) -> Point {
        self.lo.lerp(&self.hi, 0.5)
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi.coords()[axis] - self.lo.coords()[axis]
    }

    /// Length of the diagonal.
    pub fn diam(&self) -> f64 {
        self.lo.distance(&self.hi)
    }

    /// Largest distance from the centre to a point of the box.
    pub fn radius(&self) -> f64 {
        0.5 * self.diam()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim().value()).map(|k| self.extent(k)).product()
    }

    pub fn translate(&self, shift: &Point) -> BoxDomain {
        BoxDomain { lo: self.lo.add(shift), hi: self.hi.add(shift) }
    }

    /// Containment with a small relative slack so that points produced by
    /// arithmetic on the boundary are accepted.
    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        let slack = 1e-12 * (1.0 + self.diam());
        p.coords()
            .iter()
            .zip(self.lo.coords().iter().zip(self.hi.coords()))
            .all(|(v, (a, b))| *v >= a - slack && *v <= b + slack)
    }

    pub fn check_contains(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                point: p.coords().to_vec(),
                lo: self.lo.coords().to_vec(),
                hi: self.hi.coords().to_vec(),
            })
        }
    }

    /// Euclidean distance from the box to a point (zero inside).
    pub fn distance_to_point(&self, p: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim().value() {
            let v = p.coords()[k];
            let d = if v < self.lo.coords()[k] {
                self.lo.coords()[k] - v
            } else if v > self.hi.coords()[k] {
                v - self.hi.coords()[k]
            } else {
                0.0
            };
            s += d * d;
        }
        s.sqrt()
    }

    /// Euclidean distance between two boxes (zero when they overlap).
    pub fn distance_to_box(&self, other: &BoxDomain) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim().value() {
            let gap =
                (other.lo.coords()[k] - self.hi.coords()[k]).max(self.lo.coords()[k] - other.hi.coords()[k]).max(0.0);
            s += gap * gap;
        }
        s.sqrt()
    }

    /// True when the projections onto `axis` are disjoint intervals.
    pub fn projection_disjoint(&self, other: &BoxDomain, axis: usize) -> bool {
        other.lo.coords()[axis] > self.hi.coords()[axis] || self.lo.coords()[axis] > other.hi.coords()[axis]
    }
}

/// Uniform cell-centred grid over a box.
///
/// Centres are stored in lexicographic order with the first coordinate
/// varying fastest.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: BoxDomain,
    cells: Vec<usize>,
    h: Vec<f64>,
    centers: Vec<Point>,
}

impl Grid {
    pub fn new(domain: BoxDomain, cells_per_dim: &[usize]) -> Result<Self> {
        let d = domain.dim().value();
        if cells_per_dim.len() != d {
            return Err(Error::InvalidParameter(format!("expected {d} cell counts, got {}", cells_per_dim.len())));
        }
        if cells_per_dim.contains(&0) {
            return Err(Error::InvalidParameter("cells per dimension must be at least 1".into()));
        }
        let h: Vec<f64> = (0..d).map(|k| domain.extent(k) / cells_per_dim[k] as f64).collect();
        let lo = domain.lo();
        let total: usize = cells_per_dim.iter().product();
        let mut centers = Vec::with_capacity(total);
        let axis = |k: usize, i: usize| lo.coords()[k] + (i as f64 + 0.5) * h[k];
        if d == 2 {
            for j in 0..cells_per_dim[1] {
                for i in 0..cells_per_dim[0] {
                    centers.push(Point::new2(axis(0, i), axis(1, j)));
                }
            }
        } else {
            for l in 0..cells_per_dim[2] {
                for j in 0..cells_per_dim[1] {
                    for i in 0..cells_per_dim[0] {
                        centers.push(Point::new3(axis(0, i), axis(1, j), axis(2, l)));
                    }
                }
            }
        }
        Ok(Grid { domain, cells: cells_per_dim.to_vec(), h, centers })
    }

    /// Same number of cells along every axis.
    pub fn uniform(domain: BoxDomain, cells: usize) -> Result<Self> {
        let d = domain.dim().value();
        Self::new(domain, &vec![cells; d])
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Linear index of the cell with multi-index `idx`.
    pub fn index(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        for k in (0..idx.len()).rev() {
            lin = lin * self.cells[k] + idx[k];
        }
        lin
    }

    pub fn is_square(&self) -> bool {
        let h0 = self.h[0];
        self.h.iter().all(|&v| (v - h0).abs() <= 1e-12 * h0)
    }
}

/// Convenience wrapper matching the plain-function form of grid creation.
pub fn make_grid(domain: BoxDomain, cells_per_dim: &[usize]) -> Result<Grid> {
    Grid::new(domain, cells_per_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(p: &Point, q: [f64; 2]) {
        assert!((p.x() - q[0]).abs() < 1e-15 && (p.y() - q[1]).abs() < 1e-15, "{p:?} vs {q:?}");
    }

    #[test]
    fn two_by_two_unit_square() {
        let g = make_grid(BoxDomain::unit_square(), &[2, 2]).unwrap();
        let expected = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]];
        assert_eq!(g.len(), 4);
        for (p, q) in g.centers().iter().zip(expected) {
            assert_close(p, q);
        }
    }

    #[test]
    fn single_cell() {
        let g = make_grid(BoxDomain::unit_square(), &[1, 1]).unwrap();
        assert_eq!(g.len(), 1);
        assert_close(&g.centers()[0], [0.5, 0.5]);
    }

    #[test]
    fn shifted_box_is_a_translated_copy() {
        let shifted = BoxDomain::rect(1.25, 2.25, 0.5, 1.5).unwrap();
        let g = make_grid(shifted, &[2, 2]).unwrap();
        let base = make_grid(BoxDomain::unit_square(), &[2, 2]).unwrap();
        assert_close(&g.centers()[0], [1.5, 0.75]);
        for (p, q) in g.centers().iter().zip(base.centers()) {
            assert_close(p, [q.x() + 1.25, q.y() + 0.5]);
        }
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(BoxDomain::rect(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoxDomain::rect(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(make_grid(BoxDomain::unit_square(), &[0, 3]).is_err());
        assert!(make_grid(BoxDomain::unit_square(), &[3]).is_err());
    }

    #[test]
    fn lexicographic_index_matches_storage() {
        let g = make_grid(BoxDomain::unit_cube(), &[3, 4, 5]).unwrap();
        assert_eq!(g.len(), 60);
        let p = g.centers()[g.index(&[2, 1, 3])];
        assert!((p.x() - 2.5 / 3.0).abs() < 1e-15);
        assert!((p.y() - 1.5 / 4.0).abs() < 1e-15);
        assert!((p.z() - 3.5 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn box_distances() {
        let x = BoxDomain::unit_square();
        let y = BoxDomain::rect(1.25, 2.25, 0.5, 1.5).unwrap();
        assert!((x.distance_to_box(&y) - 0.25).abs() < 1e-15);
        assert!((x.distance_to_point(&Point::new2(2.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!(x.projection_disjoint(&y, 0));
        assert!(!x.projection_disjoint(&y, 1));
    }
}
