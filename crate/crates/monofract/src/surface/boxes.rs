//! Boundary of a finite union of axis-aligned boxes.
//!
//! Each box face is punctured by the open cross-sections of the other boxes
//! that cover its outward side; the remaining region is decomposed into
//! rectangular cells by coordinate compression. Every query then reduces to
//! exact interval-gap arithmetic against the cells. Seam lines where two
//! punctures touch are interior to the union and fall between cells, so
//! they are correctly dropped.
//!
//! Degenerate boxes (zero extent on some axis) are bare rectangles: the
//! surface is the union itself, with no solid interior. Mixing degenerate
//! and solid boxes in one union is rejected.

use super::{BoundarySample, FaceId};
use crate::error::{Error, Result};
use crate::geom::{Aabb, Point, MAX_DIM};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
struct PFace {
    box_idx: u32,
    axis: u8,
    side: bool,
    /// Region cells, full-dimensional with `axis` degenerate at the face
    /// plane (degenerate source boxes may be degenerate on more axes).
    cells: Vec<Aabb>,
    /// Per-cell surface measure, cumulative; last entry is the face area.
    cell_cum: Vec<f64>,
    area: f64,
}

#[derive(Clone, Debug)]
pub struct BoxUnionSurface {
    dim: usize,
    boxes: Vec<Aabb>,
    faces: Vec<PFace>,
    bbox: Aabb,
    total_area: f64,
}

/// Surface measure of a full-dimensional cell: the product of its extents,
/// skipping `axis` (zero for pieces degenerate beyond the face plane).
fn cell_area(c: &Aabb, axis: usize) -> f64 {
    (0..c.dim())
        .filter(|&j| j != axis)
        .map(|j| c.hi.get(j) - c.lo.get(j))
        .product()
}

impl BoxUnionSurface {
    pub(super) fn build(mut boxes: Vec<Aabb>) -> Result<BoxUnionSurface> {
        if boxes.is_empty() {
            return Err(Error::invalid("boxes", "need at least one box"));
        }
        let dim = boxes[0].dim();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid("boxes", format!("dimension must be 1..={MAX_DIM}")));
        }
        if boxes.iter().any(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: boxes.iter().map(Aabb::dim).find(|&d| d != dim).unwrap(),
            });
        }
        // Exact duplicates contribute nothing; drop them up front.
        let mut seen: Vec<Aabb> = Vec::new();
        boxes.retain(|b| {
            let dup = seen
                .iter()
                .any(|s| s.lo.as_slice() == b.lo.as_slice() && s.hi.as_slice() == b.hi.as_slice());
            if !dup {
                seen.push(*b);
            }
            !dup
        });

        let degenerate: Vec<bool> = boxes
            .iter()
            .map(|b| (0..dim).any(|j| b.lo.get(j) == b.hi.get(j)))
            .collect();
        let any_degen = degenerate.iter().any(|&d| d);
        if any_degen && !degenerate.iter().all(|&d| d) {
            return Err(Error::invalid(
                "boxes",
                "cannot mix solid and degenerate boxes in one union",
            ));
        }

        let mut faces = Vec::new();
        if any_degen {
            for (i, b) in boxes.iter().enumerate() {
                let axis = (0..dim).find(|&j| b.lo.get(j) == b.hi.get(j)).unwrap();
                let area = cell_area(b, axis);
                faces.push(PFace {
                    box_idx: i as u32,
                    axis: axis as u8,
                    side: true,
                    cells: vec![*b],
                    cell_cum: vec![area],
                    area,
                });
            }
        } else {
            for i in 0..boxes.len() {
                for axis in 0..dim {
                    for side in [false, true] {
                        if let Some(f) = Self::build_face(&boxes, i, axis, side) {
                            faces.push(f);
                        }
                    }
                }
            }
        }

        let bbox = boxes[1..]
            .iter()
            .fold(boxes[0], |acc, b| acc.hull(b));
        let total_area = faces.iter().map(|f| f.area).sum();

        Ok(BoxUnionSurface {
            dim,
            boxes,
            faces,
            bbox,
            total_area,
        })
    }

    /// The exposed part of one face of box `i`, or None when other boxes
    /// cover it entirely.
    fn build_face(boxes: &[Aabb], i: usize, axis: usize, side: bool) -> Option<PFace> {
        let dim = boxes[0].dim();
        let b = &boxes[i];
        let v = if side { b.hi.get(axis) } else { b.lo.get(axis) };

        // Boxes whose interior extends past the face plane on the outward
        // side; their cross-sections puncture this face.
        let mut holes: Vec<([f64; MAX_DIM], [f64; MAX_DIM])> = Vec::new();
        for (j, o) in boxes.iter().enumerate() {
            if j == i {
                continue;
            }
            let covers = if side {
                o.lo.get(axis) <= v && v < o.hi.get(axis)
            } else {
                o.lo.get(axis) < v && v <= o.hi.get(axis)
            };
            if !covers {
                continue;
            }
            let mut lo = [0.0; MAX_DIM];
            let mut hi = [0.0; MAX_DIM];
            let mut overlap = true;
            for k in 0..dim {
                if k == axis {
                    continue;
                }
                lo[k] = o.lo.get(k).max(b.lo.get(k));
                hi[k] = o.hi.get(k).min(b.hi.get(k));
                if lo[k] >= hi[k] {
                    overlap = false;
                    break;
                }
            }
            if overlap {
                holes.push((lo, hi));
            }
        }

        // Coordinate compression: cut each cross axis at the face and hole
        // bounds, keep the cells whose center no hole covers.
        let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for k in 0..dim {
            if k == axis {
                continue;
            }
            let c = &mut cuts[k];
            c.push(b.lo.get(k));
            c.push(b.hi.get(k));
            for (hlo, hhi) in &holes {
                c.push(hlo[k]);
                c.push(hhi[k]);
            }
            c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            c.dedup();
        }

        let cross: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
        let mut idx = vec![0usize; cross.len()];
        let mut cells = Vec::new();
        let mut cell_cum = Vec::new();
        let mut area = 0.0;
        'outer: loop {
            let mut lo = [0.0; MAX_DIM];
            let mut hi = [0.0; MAX_DIM];
            lo[axis] = v;
            hi[axis] = v;
            for (slot, &k) in cross.iter().enumerate() {
                lo[k] = cuts[k][idx[slot]];
                hi[k] = cuts[k][idx[slot] + 1];
            }
            let covered = holes.iter().any(|(hlo, hhi)| {
                cross.iter().all(|&k| {
                    let c = 0.5 * (lo[k] + hi[k]);
                    c > hlo[k] && c < hhi[k]
                })
            });
            if !covered {
                let cell = Aabb::from_slices(&lo[..dim], &hi[..dim]);
                area += cell_area(&cell, axis);
                cells.push(cell);
                cell_cum.push(area);
            }
            // Odometer over the cell grid.
            for slot in 0..cross.len() {
                idx[slot] += 1;
                if idx[slot] + 1 < cuts[cross[slot]].len() {
                    continue 'outer;
                }
                idx[slot] = 0;
            }
            break;
        }
        if cells.is_empty() {
            return None;
        }
        Some(PFace {
            box_idx: i as u32,
            axis: axis as u8,
            side,
            cells,
            cell_cum,
            area,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn boxes(&self) -> &[Aabb] {
        &self.boxes
    }
    pub fn bounding_box(&self) -> Aabb {
        self.bbox
    }
    /// Total surface measure of the boundary.
    pub fn area(&self) -> f64 {
        self.total_area
    }

    pub fn contains(&self, p: &Point) -> bool {
        assert_eq!(p.dim(), self.dim, "query dimension mismatch");
        self.boxes.iter().any(|b| b.contains_point(p))
    }

    pub fn distance(&self, p: &Point) -> f64 {
        assert_eq!(p.dim(), self.dim, "query dimension mismatch");
        let mut best = f64::INFINITY;
        for f in &self.faces {
            for c in &f.cells {
                best = best.min(c.gap_sq_to_point(p));
            }
        }
        best.sqrt()
    }

    /// Squared-distance scan with an early stop: exact whenever the result
    /// exceeds `stop_sq`, otherwise an upper bound at or below `stop_sq`.
    fn box_dist_sq_pruned(&self, b: &Aabb, stop_sq: f64) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.faces {
            for c in &f.cells {
                best = best.min(c.gap_sq_to_box(b));
                if best <= stop_sq {
                    return best;
                }
            }
        }
        best
    }

    pub fn box_distance(&self, b: &Aabb) -> f64 {
        assert_eq!(b.dim(), self.dim, "query dimension mismatch");
        self.box_dist_sq_pruned(b, 0.0).sqrt()
    }

    /// See `FractalSurface::box_proximity_class`.
    pub fn box_proximity_class(&self, b: &Aabb, t: f64) -> u8 {
        assert_eq!(b.dim(), self.dim, "query dimension mismatch");
        let q = 0.25 * t * t;
        let v = self.box_dist_sq_pruned(b, q);
        if v >= t * t {
            2
        } else if v > q {
            1
        } else {
            0
        }
    }

    pub(super) fn sample_boundary(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<BoundarySample> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let f = if self.total_area > 0.0 {
                let mut u = rng.gen_range(0.0..self.total_area);
                let mut pick = self.faces.len() - 1;
                for (k, f) in self.faces.iter().enumerate() {
                    if u < f.area {
                        pick = k;
                        break;
                    }
                    u -= f.area;
                }
                &self.faces[pick]
            } else {
                // Zero-measure boundary (points, segments): uniform over
                // pieces.
                let k = rng.gen_range(0..self.faces.len());
                &self.faces[k]
            };
            let cell = if f.area > 0.0 {
                let u = rng.gen_range(0.0..f.area);
                let k = f.cell_cum.partition_point(|&c| c <= u);
                &f.cells[k.min(f.cells.len() - 1)]
            } else {
                &f.cells[0]
            };
            let c = super::uniform_in(rng, cell.lo.as_slice(), cell.hi.as_slice());
            let mut normal = Point::zeros(self.dim);
            normal.set(f.axis as usize, if f.side { 1.0 } else { -1.0 });
            out.push(BoundarySample {
                point: Point::new(&c),
                face: FaceId::UnionFace {
                    box_idx: f.box_idx,
                    axis: f.axis,
                    side: f.side,
                },
                normal,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cube() -> BoxUnionSurface {
        BoxUnionSurface::build(vec![Aabb::from_slices(&[0.0; 3], &[1.0; 3])]).unwrap()
    }

    #[test]
    fn unit_cube_has_six_faces_and_exact_distances() {
        let s = cube();
        assert_eq!(s.faces.len(), 6);
        assert_relative_eq!(s.area(), 6.0);
        assert_relative_eq!(s.distance(&Point::new(&[0.5, 0.5, 0.5])), 0.5);
        assert_relative_eq!(s.distance(&Point::new(&[2.0, 0.5, 0.5])), 1.0);
        assert_relative_eq!(
            s.distance(&Point::new(&[2.0, 2.0, 2.0])),
            3.0f64.sqrt(),
            max_relative = 1e-12
        );
        assert_eq!(s.distance(&Point::new(&[1.0, 0.3, 0.8])), 0.0);
    }

    #[test]
    fn shared_face_of_an_l_shape_is_interior() {
        let a = Aabb::from_slices(&[0.0; 3], &[1.0; 3]);
        let b = Aabb::from_slices(&[1.0, 0.0, 0.0], &[2.0, 1.0, 1.0]);
        let s = BoxUnionSurface::build(vec![a, b]).unwrap();
        // 6 + 6 faces minus the two coincident seam faces.
        assert_eq!(s.faces.len(), 10);
        assert_relative_eq!(s.area(), 10.0);
        // The seam plane x = 1 is interior: nearest boundary is half a unit
        // away.
        assert_relative_eq!(s.distance(&Point::new(&[1.0, 0.5, 0.5])), 0.5);
        assert!(s.contains(&Point::new(&[1.0, 0.5, 0.5])));
    }

    #[test]
    fn partial_overlap_punctures_the_face() {
        // A slab sitting on the middle of the cube's top face.
        let a = Aabb::from_slices(&[0.0; 3], &[1.0; 3]);
        let b = Aabb::from_slices(&[0.25, 0.25, 1.0], &[0.75, 0.75, 1.25]);
        let s = BoxUnionSurface::build(vec![a, b]).unwrap();
        // Under the slab: interior, nearest boundary through the slab walls.
        assert_relative_eq!(s.distance(&Point::new(&[0.5, 0.5, 1.0])), 0.25);
        // On the puncture rim.
        assert_eq!(s.distance(&Point::new(&[0.25, 0.5, 1.0])), 0.0);
        // Top face area lost the puncture, slab contributes walls + cap.
        let expect = 6.0 - 0.25 + 4.0 * (0.5 * 0.25) + 0.25;
        assert_relative_eq!(s.area(), expect, max_relative = 1e-12);
    }

    #[test]
    fn touching_punctures_drop_their_seam_line()
    {
        // Two towers side by side covering the strip y in [0.25, 0.75] of
        // the top face; the line x = 0.5 between them is interior.
        let base = Aabb::from_slices(&[0.0; 3], &[1.0; 3]);
        let t1 = Aabb::from_slices(&[0.0, 0.25, 1.0], &[0.5, 0.75, 1.5]);
        let t2 = Aabb::from_slices(&[0.5, 0.25, 1.0], &[1.0, 0.75, 1.5]);
        let s = BoxUnionSurface::build(vec![base, t1, t2]).unwrap();
        let d = s.distance(&Point::new(&[0.5, 0.5, 1.0]));
        assert_relative_eq!(d, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_square_and_point() {
        let sq = BoxUnionSurface::build(vec![Aabb::from_slices(&[0.0, 0.0, 0.0], &[1.0, 1.0, 0.0])])
            .unwrap();
        assert_relative_eq!(sq.distance(&Point::new(&[0.5, 0.5, 0.3])), 0.3);
        assert_relative_eq!(sq.distance(&Point::new(&[1.5, 0.5, 0.0])), 0.5);
        assert_relative_eq!(sq.area(), 1.0);

        let pt = BoxUnionSurface::build(vec![Aabb::from_slices(&[0.2; 3], &[0.2; 3])]).unwrap();
        assert_relative_eq!(
            pt.distance(&Point::new(&[0.2, 0.2, 1.2])),
            1.0,
            max_relative = 1e-12
        );

        let mix = BoxUnionSurface::build(vec![
            Aabb::from_slices(&[0.0; 3], &[1.0; 3]),
            Aabb::from_slices(&[0.2; 3], &[0.2; 3]),
        ]);
        assert!(mix.is_err());
    }

    #[test]
    fn box_distance_matches_point_distance_on_degenerate_query() {
        let s = cube();
        let p = Point::new(&[1.7, 0.4, 0.6]);
        let q = Aabb::new(p, p);
        assert_eq!(s.box_distance(&q), s.distance(&p));
        let b = Aabb::from_slices(&[0.9, 0.4, 0.4], &[1.4, 0.6, 0.6]);
        assert_eq!(s.box_distance(&b), 0.0);
        let b = Aabb::from_slices(&[2.0, 2.0, 2.0], &[3.0, 3.0, 3.0]);
        assert_relative_eq!(s.box_distance(&b), 3.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn samples_land_on_boundary_with_outward_normals() {
        let a = Aabb::from_slices(&[0.0; 3], &[1.0; 3]);
        let b = Aabb::from_slices(&[1.0, 0.0, 0.0], &[2.0, 1.0, 1.0]);
        let s = BoxUnionSurface::build(vec![a, b]).unwrap();
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for smp in s.sample_boundary(300, &mut rng) {
            assert!(s.distance(&smp.point) < 1e-12);
            let eps = 1e-9;
            assert!(s.contains(&smp.point.add(&smp.normal.scale(-eps))));
            assert!(!s.contains(&smp.point.add(&smp.normal.scale(eps))));
        }
    }
}
