//! Small fixed-capacity vectors and axis-aligned boxes.
//!
//! Spatial dimension is a runtime value (3 ..= [`MAX_DIM`]); points carry it
//! alongside a fixed array so the hot loops never allocate. All separation
//! ("gap") arithmetic is exact for axis-aligned sets, which is what makes the
//! surface distance oracles exact in turn.

use serde::{Deserialize, Serialize};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 6;

/// A point (or displacement) in `dim`-dimensional space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "point dimension {} out of range",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Point::new(&vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.as_slice()[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        assert!(i < self.dim as usize);
        self.coords[i] = v;
    }

    pub fn norm_sq(&self) -> f64 {
        self.as_slice().iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Point) -> Point {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Point {
        let mut out = *self;
        for c in &mut out.coords[..self.dim as usize] {
            *c *= s;
        }
        out
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }

    /// Unit vector along coordinate axis `axis`.
    pub fn axis_unit(dim: usize, axis: usize, sign: f64) -> Point {
        let mut p = Point::zeros(dim);
        p.set(axis, sign);
        p
    }

    fn zip_with(&self, other: &Point, f: impl Fn(f64, f64) -> f64) -> Point {
        assert_eq!(self.dim, other.dim, "point dimension mismatch");
        let mut out = *self;
        for i in 0..self.dim as usize {
            out.coords[i] = f(self.coords[i], other.coords[i]);
        }
        out
    }
}

/// Gap between two closed intervals; zero when they overlap or touch.
#[inline]
pub fn interval_gap(alo: f64, ahi: f64, blo: f64, bhi: f64) -> f64 {
    (blo - ahi).max(alo - bhi).max(0.0)
}

/// Axis-aligned box, possibly degenerate along some axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Point,
    pub hi: Point,
}

impl Aabb {
    pub fn new(lo: Point, hi: Point) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        for i in 0..lo.dim() {
            assert!(
                lo.get(i) <= hi.get(i),
                "inverted box on axis {i}: [{}, {}]",
                lo.get(i),
                hi.get(i)
            );
        }
        Aabb { lo, hi }
    }

    pub fn from_slices(lo: &[f64], hi: &[f64]) -> Self {
        Aabb::new(Point::new(lo), Point::new(hi))
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn center(&self) -> Point {
        self.lo.add(&self.hi).scale(0.5)
    }

    pub fn extent(&self, i: usize) -> f64 {
        self.hi.get(i) - self.lo.get(i)
    }

    pub fn max_extent(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.extent(i))
            .fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.extent(i)).product()
    }

    /// Half the diagonal, i.e. the circumradius about the box center.
    pub fn circumradius(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let h = self.extent(i) * 0.5;
                h * h
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        (0..self.dim()).all(|i| self.lo.get(i) <= p.get(i) && p.get(i) <= self.hi.get(i))
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..self.dim())
            .all(|i| self.lo.get(i) <= other.lo.get(i) && other.hi.get(i) <= self.hi.get(i))
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        self.gap_sq_to_box(other) == 0.0
    }

    /// Volume of the intersection (zero when disjoint).
    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        (0..self.dim())
            .map(|i| {
                (self.hi.get(i).min(other.hi.get(i)) - self.lo.get(i).max(other.lo.get(i)))
                    .max(0.0)
            })
            .product()
    }

    pub fn gap_sq_to_point(&self, p: &Point) -> f64 {
        (0..self.dim())
            .map(|i| {
                let g = interval_gap(self.lo.get(i), self.hi.get(i), p.get(i), p.get(i));
                g * g
            })
            .sum()
    }

    pub fn gap_sq_to_box(&self, other: &Aabb) -> f64 {
        (0..self.dim())
            .map(|i| {
                let g = interval_gap(
                    self.lo.get(i),
                    self.hi.get(i),
                    other.lo.get(i),
                    other.hi.get(i),
                );
                g * g
            })
            .sum()
    }

    pub fn dist_to_point(&self, p: &Point) -> f64 {
        self.gap_sq_to_point(p).sqrt()
    }

    pub fn dist_to_box(&self, other: &Aabb) -> f64 {
        self.gap_sq_to_box(other).sqrt()
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Aabb) -> Aabb {
        let lo = self.lo.zip_with(&other.lo, f64::min);
        let hi = self.hi.zip_with(&other.hi, f64::max);
        Aabb::new(lo, hi)
    }

    /// Dilate symmetrically by `pad` on every axis.
    pub fn dilated(&self, pad: f64) -> Aabb {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for i in 0..self.dim() {
            lo.set(i, lo.get(i) - pad);
            hi.set(i, hi.get(i) + pad);
        }
        Aabb::new(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_gap_cases() {
        assert_eq!(interval_gap(0.0, 1.0, 2.0, 3.0), 1.0);
        assert_eq!(interval_gap(2.0, 3.0, 0.0, 1.0), 1.0);
        assert_eq!(interval_gap(0.0, 1.0, 1.0, 2.0), 0.0);
        assert_eq!(interval_gap(0.0, 2.0, 1.0, 3.0), 0.0);
    }

    #[test]
    fn box_point_distance() {
        let b = Aabb::from_slices(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]);
        assert_eq!(b.dist_to_point(&Point::new(&[0.5, 0.5, 0.5])), 0.0);
        assert_eq!(b.dist_to_point(&Point::new(&[2.0, 0.5, 0.5])), 1.0);
        let d = b.dist_to_point(&Point::new(&[2.0, 2.0, 0.5]));
        assert!((d - f64::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn box_box_distance_single_axis_offset() {
        let a = Aabb::from_slices(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]);
        let b = Aabb::from_slices(&[2.0, 0.0, 0.0], &[2.5, 1.0, 1.0]);
        assert_eq!(a.dist_to_box(&b), 1.0);
    }

    #[test]
    fn intersection_volume_partial_overlap() {
        let a = Aabb::from_slices(&[0.0, 0.0, 0.0], &[2.0, 2.0, 2.0]);
        let b = Aabb::from_slices(&[1.0, 1.0, 1.0], &[3.0, 3.0, 3.0]);
        assert_eq!(a.intersection_volume(&b), 1.0);
        let c = Aabb::from_slices(&[5.0, 5.0, 5.0], &[6.0, 6.0, 6.0]);
        assert_eq!(a.intersection_volume(&c), 0.0);
    }

    #[test]
    fn degenerate_box_is_a_rectangle() {
        let sq = Aabb::from_slices(&[0.0, 0.0, 0.0], &[0.0, 1.0, 1.0]);
        assert_eq!(sq.volume(), 0.0);
        assert_eq!(sq.dist_to_point(&Point::new(&[0.3, 0.5, 0.5])), 0.3);
    }
}
