//! The slab-decorated cube family.
//!
//! Start from a unit-scale box `Q`. For each level `n = 1, 2, ...` place
//! `2^floor(n*beta)` congruent rectangular slabs on the top face of `Q`,
//! anchored at the arithmetic progression `x = 2^-n + i * a_n` with spacing
//! `a_n = 2^(-n - floor(n*beta))`, each slab `a_n^alpha / 2` thick along the
//! subdivided axis and `2^-n` tall. The surface is the boundary of the solid
//! union: the faces of `Q` (top face punctured by the slab footprints) plus
//! the exposed faces of every slab.
//!
//! All distance queries are exact. Every face is an axis-aligned rectangle,
//! so point/box distances reduce to interval gaps, and the arithmetic layout
//! lets us find the O(1) candidate slabs per level by index arithmetic
//! instead of searching.

use super::{BoundarySample, FaceId, SlabFace, RECTANGLE_BUDGET};
use crate::error::{Error, Result};
use crate::geom::{interval_gap, Aabb, Point, MAX_DIM};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Geometry of one construction level, fully determined by `(n, alpha,
/// beta)`; slabs within a level differ only by translation along axis 0.
#[derive(Clone, Debug)]
struct LevelGeom {
    n: u32,
    count: u64,
    /// `2^-n`: low end of the anchor band (exclusive); the band's high end
    /// `2^(-n+1)` is where the last anchor `band_lo + count * spacing` sits.
    band_lo: f64,
    /// Anchor spacing `a_n`.
    spacing: f64,
    /// Slab thickness along axis 0: `a_n^alpha / 2`.
    width: f64,
    /// Slab bounds on axes `1..dim` (axis 0 varies per slab).
    cross_lo: [f64; MAX_DIM],
    cross_hi: [f64; MAX_DIM],
    /// Hull of every slab in the level, for early rejection.
    bbox: Aabb,
    /// Exposed faces of one slab, with areas, excluding the attachment
    /// plane: `(face, area)`, plus the running total.
    face_areas: Vec<(SlabFace, f64)>,
    slab_area: f64,
}

#[derive(Clone, Debug)]
pub struct FractalSurface {
    dim: usize,
    alpha: f64,
    beta: f64,
    requested_depth: u32,
    levels: Vec<LevelGeom>,
    /// Bounds of the base box `Q`.
    q_lo: [f64; MAX_DIM],
    q_hi: [f64; MAX_DIM],
    /// Faces of `Q` except the punctured top, as degenerate boxes.
    q_faces: Vec<Aabb>,
    /// Hull of the truncated-away geometry (levels beyond the last built
    /// one); queries near it carry a nonzero error bound.
    trunc_box: Aabb,
    trunc_bound: f64,
    bbox: Aabb,
    /// Area of the top face of `Q` minus all slab footprints.
    top_area: f64,
    total_slabs: u128,
}

/// Floor with a tolerance for values sitting just under an integer, so that
/// `n * beta` hitting an integer up to rounding lands on it.
fn snapped_floor(t: f64) -> i64 {
    (t + 1e-9).floor() as i64
}

fn exp2i(e: i32) -> f64 {
    f64::powi(2.0, e)
}

/// The dyadic band containing `x`: the `n >= 1` with `2^-n < x <= 2^(-n+1)`,
/// if any.
fn band_level(x: f64) -> Option<u32> {
    if !(x > 0.0 && x <= 1.0) {
        return None;
    }
    let mut n = (-x.log2()).floor() as i32 + 1;
    while x <= exp2i(-n) {
        n += 1;
    }
    while n >= 2 && x > exp2i(-(n - 1)) {
        n -= 1;
    }
    Some(n.max(1) as u32)
}

impl FractalSurface {
    pub(super) fn build(dim: usize, alpha: f64, beta: f64, depth: u32) -> Result<FractalSurface> {
        if !(3..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid("dimension", format!("must be 3..={MAX_DIM}, got {dim}")));
        }
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(Error::invalid("alpha", format!("must be >= 1, got {alpha}")));
        }
        if !(beta.is_finite() && beta >= 2.0) {
            return Err(Error::invalid("beta", format!("must be >= 2, got {beta}")));
        }
        if depth == 0 {
            return Err(Error::invalid("depth", "must be at least 1"));
        }

        // Base box: axis 0 in [0,1]; middle axes [-1,0] in dimension 3 and
        // [0,1] above it; last axis [-1,0].
        let mut q_lo = [0.0; MAX_DIM];
        let mut q_hi = [0.0; MAX_DIM];
        q_hi[0] = 1.0;
        for j in 1..dim - 1 {
            if dim == 3 {
                q_lo[j] = -1.0;
            } else {
                q_hi[j] = 1.0;
            }
        }
        q_lo[dim - 1] = -1.0;

        // Build levels until the requested depth or the slab budget, whichever
        // comes first.
        let mut levels = Vec::new();
        let mut total: u128 = 0;
        for n in 1..=depth {
            let e = snapped_floor(n as f64 * beta);
            if e >= 64 {
                // A single level this size always blows the budget.
                let want = if e >= 127 { u128::MAX } else { total + (1u128 << e) };
                return Err(Error::RectangleBudget {
                    requested: want,
                    budget: RECTANGLE_BUDGET,
                });
            }
            let count = 1u64 << e;
            if n == 1 && count as u128 > RECTANGLE_BUDGET {
                return Err(Error::RectangleBudget {
                    requested: count as u128,
                    budget: RECTANGLE_BUDGET,
                });
            }
            if total + count as u128 > RECTANGLE_BUDGET {
                break;
            }
            total += count as u128;
            levels.push(Self::level_geom(dim, alpha, n, e as i32, count));
        }
        let n_eff = levels.len() as u32;
        debug_assert!(n_eff >= 1);

        let mut q_faces = Vec::new();
        for axis in 0..dim {
            for side in [false, true] {
                if axis == dim - 1 && side {
                    continue; // punctured top face, handled separately
                }
                let v = if side { q_hi[axis] } else { q_lo[axis] };
                let mut lo = q_lo;
                let mut hi = q_hi;
                lo[axis] = v;
                hi[axis] = v;
                q_faces.push(Aabb::from_slices(&lo[..dim], &hi[..dim]));
            }
        }

        // Hull of every slab at levels beyond n_eff: axis 0 in (0, 2^-n_eff],
        // cross sections within the coarsest missing level's.
        let te = exp2i(-(n_eff as i32));
        let mut t_lo = [0.0; MAX_DIM];
        let mut t_hi = [0.0; MAX_DIM];
        t_hi[0] = te;
        for j in 1..dim {
            if dim == 3 && j == 1 {
                t_lo[j] = -te;
            } else {
                t_hi[j] = te;
            }
        }
        let trunc_box = Aabb::from_slices(&t_lo[..dim], &t_hi[..dim]);

        let mut bbox = Aabb::from_slices(&q_lo[..dim], &q_hi[..dim]);
        for lvl in &levels {
            bbox = bbox.hull(&lvl.bbox);
        }

        let mut top_area = 1.0;
        for lvl in &levels {
            let footprint: f64 = lvl.width
                * (1..dim - 1)
                    .map(|j| lvl.cross_hi[j] - lvl.cross_lo[j])
                    .product::<f64>();
            top_area -= lvl.count as f64 * footprint;
        }
        assert!(
            top_area > 0.0,
            "slab footprints cannot tile the whole top face (alpha {alpha}, beta {beta})"
        );

        Ok(FractalSurface {
            dim,
            alpha,
            beta,
            requested_depth: depth,
            levels,
            q_lo,
            q_hi,
            q_faces,
            trunc_box,
            trunc_bound: te,
            bbox,
            top_area,
            total_slabs: total,
        })
    }

    fn level_geom(dim: usize, alpha: f64, n: u32, e: i32, count: u64) -> LevelGeom {
        let band_lo = exp2i(-(n as i32));
        let band_hi = exp2i(-(n as i32) + 1);
        let spacing = exp2i(-(n as i32) - e);
        let width = f64::exp2(alpha * (-(n as i32) - e) as f64) / 2.0;
        debug_assert!(width <= spacing / 2.0 * 1.0000001);

        let mut cross_lo = [0.0; MAX_DIM];
        let mut cross_hi = [0.0; MAX_DIM];
        for j in 1..dim - 1 {
            if dim == 3 {
                cross_lo[j] = -band_hi;
            } else {
                cross_hi[j] = band_lo;
            }
        }
        cross_hi[dim - 1] = band_lo;

        let mut b_lo = cross_lo;
        let mut b_hi = cross_hi;
        b_lo[0] = band_lo + spacing - width;
        b_hi[0] = band_hi;
        let bbox = Aabb::from_slices(&b_lo[..dim], &b_hi[..dim]);

        let ext = |j: usize| cross_hi[j] - cross_lo[j];
        let all: f64 = (1..dim).map(ext).product();
        let mut face_areas = vec![(SlabFace::XLow, all), (SlabFace::XHigh, all)];
        for j in 1..dim - 1 {
            let a = width * all / ext(j);
            face_areas.push((SlabFace::Cross { axis: j as u8, side: false }, a));
            face_areas.push((SlabFace::Cross { axis: j as u8, side: true }, a));
        }
        face_areas.push((SlabFace::Top, width * all / ext(dim - 1)));
        let slab_area = face_areas.iter().map(|(_, a)| a).sum();

        LevelGeom {
            n,
            count,
            band_lo,
            spacing,
            width,
            cross_lo,
            cross_hi,
            bbox,
            face_areas,
            slab_area,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn requested_depth(&self) -> u32 {
        self.requested_depth
    }
    /// Number of slab levels actually built (depth after the budget cap).
    pub fn effective_depth(&self) -> u32 {
        self.levels.len() as u32
    }
    pub fn total_slabs(&self) -> u128 {
        self.total_slabs
    }
    pub fn bounding_box(&self) -> Aabb {
        self.bbox
    }

    /// Anchor abscissa of slab `i` (1-based) at the given level.
    fn anchor(g: &LevelGeom, i: u64) -> f64 {
        g.band_lo + i as f64 * g.spacing
    }

    /// The level whose open footprint contains the in-plane point
    /// `(coords[0], .., coords[dim-2])`, with the slab anchor.
    fn hole_containing_point(&self, coords: &[f64]) -> Option<(usize, f64)> {
        let n = band_level(coords[0])?;
        if n > self.effective_depth() {
            return None;
        }
        let g = &self.levels[(n - 1) as usize];
        let i = ((coords[0] - g.band_lo) / g.spacing).ceil() as i64;
        if i < 1 || i as u64 > g.count {
            return None;
        }
        let anchor = Self::anchor(g, i as u64);
        if !(coords[0] > anchor - g.width && coords[0] < anchor) {
            return None;
        }
        for j in 1..self.dim - 1 {
            if !(coords[j] > g.cross_lo[j] && coords[j] < g.cross_hi[j]) {
                return None;
            }
        }
        Some(((n - 1) as usize, anchor))
    }

    /// Like [`Self::hole_containing_point`] but for a rectangle `[olo, ohi]`
    /// in the top plane; `Some` only when the whole rectangle lies in one
    /// open footprint.
    fn hole_containing_rect(&self, olo: &[f64], ohi: &[f64]) -> Option<(usize, f64)> {
        let n = band_level(olo[0])?;
        if n > self.effective_depth() || band_level(ohi[0]) != Some(n) {
            return None;
        }
        let g = &self.levels[(n - 1) as usize];
        let i = ((olo[0] - g.band_lo) / g.spacing).ceil() as i64;
        if i < 1 || i as u64 > g.count {
            return None;
        }
        let anchor = Self::anchor(g, i as u64);
        if !(olo[0] > anchor - g.width && ohi[0] < anchor) {
            return None;
        }
        for j in 1..self.dim - 1 {
            if !(olo[j] > g.cross_lo[j] && ohi[j] < g.cross_hi[j]) {
                return None;
            }
        }
        Some(((n - 1) as usize, anchor))
    }

    /// Squared distance from `p` to the punctured top face of `Q`.
    fn top_dist_sq_point(&self, p: &Point) -> f64 {
        let d = self.dim;
        let dz = p.get(d - 1);
        let mut plane_sq = 0.0;
        for j in 0..d - 1 {
            let g = interval_gap(p.get(j), p.get(j), self.q_lo[j], self.q_hi[j]);
            plane_sq += g * g;
        }
        if plane_sq > 0.0 {
            // The nearest face points sit on the face's edge, which never
            // meets an open footprint.
            return plane_sq + dz * dz;
        }
        if let Some((lvl, anchor)) = self.hole_containing_point(p.as_slice()) {
            let g = &self.levels[lvl];
            let mut edge = (p.get(0) - (anchor - g.width)).min(anchor - p.get(0));
            for j in 1..d - 1 {
                edge = edge.min(p.get(j) - g.cross_lo[j]).min(g.cross_hi[j] - p.get(j));
            }
            return edge * edge + dz * dz;
        }
        dz * dz
    }

    fn top_dist_sq_box(&self, b: &Aabb) -> f64 {
        let d = self.dim;
        let gz = interval_gap(b.lo.get(d - 1), b.hi.get(d - 1), 0.0, 0.0);
        let mut plane_sq = 0.0;
        let mut olo = [0.0; MAX_DIM];
        let mut ohi = [0.0; MAX_DIM];
        for j in 0..d - 1 {
            let g = interval_gap(b.lo.get(j), b.hi.get(j), self.q_lo[j], self.q_hi[j]);
            plane_sq += g * g;
            olo[j] = b.lo.get(j).max(self.q_lo[j]);
            ohi[j] = b.hi.get(j).min(self.q_hi[j]);
        }
        if plane_sq > 0.0 {
            return plane_sq + gz * gz;
        }
        // The box overlaps the face in-plane. Footprints of distinct slabs
        // are separated, so the overlap rectangle only avoids the face
        // region if it sits inside a single open footprint.
        if let Some((lvl, anchor)) = self.hole_containing_rect(&olo[..d - 1], &ohi[..d - 1]) {
            let g = &self.levels[lvl];
            let mut edge = (olo[0] - (anchor - g.width)).min(anchor - ohi[0]);
            for j in 1..d - 1 {
                edge = edge.min(olo[j] - g.cross_lo[j]).min(g.cross_hi[j] - ohi[j]);
            }
            return edge * edge + gz * gz;
        }
        gz * gz
    }

    /// Fold the squared distances from `p` to the exposed faces of the
    /// candidate slabs of one level into `best`.
    fn slab_dist_sq_point(&self, g: &LevelGeom, p: &Point, best: &mut f64) {
        let d = self.dim;
        let x = p.get(0);
        let i0 = ((x - g.band_lo) / g.spacing).ceil() as i64;
        let lo = (i0 - 1).clamp(1, g.count as i64) as u64;
        let hi = (i0 + 1).clamp(1, g.count as i64) as u64;
        for i in lo..=hi {
            let anchor = Self::anchor(g, i);
            let gx = interval_gap(x, x, anchor - g.width, anchor);
            let mut cross_sq = 0.0;
            let mut gap = [0.0; MAX_DIM];
            for j in 1..d {
                let gj = interval_gap(p.get(j), p.get(j), g.cross_lo[j], g.cross_hi[j]);
                gap[j] = gj;
                cross_sq += gj * gj;
            }
            let t = x - (anchor - g.width);
            let mut m = t * t + cross_sq;
            let t = x - anchor;
            m = m.min(t * t + cross_sq);
            for j in 1..d - 1 {
                let rest = gx * gx + cross_sq - gap[j] * gap[j];
                let t = p.get(j) - g.cross_lo[j];
                m = m.min(t * t + rest);
                let t = p.get(j) - g.cross_hi[j];
                m = m.min(t * t + rest);
            }
            let rest = gx * gx + cross_sq - gap[d - 1] * gap[d - 1];
            let t = p.get(d - 1) - g.cross_hi[d - 1];
            m = m.min(t * t + rest);
            *best = (*best).min(m);
        }
    }

    fn slab_dist_sq_box(&self, g: &LevelGeom, b: &Aabb, best: &mut f64) {
        let d = self.dim;
        let ia = ((b.lo.get(0) - g.band_lo) / g.spacing).ceil() as i64;
        let ib = ((b.hi.get(0) - g.band_lo) / g.spacing).ceil() as i64;
        let mut cands = [0i64; 6];
        let mut nc = 0;
        for i in [ia - 1, ia, ia + 1, ib - 1, ib, ib + 1] {
            let i = i.clamp(1, g.count.max(1) as i64);
            if !cands[..nc].contains(&i) {
                cands[nc] = i;
                nc += 1;
            }
        }
        for &i in &cands[..nc] {
            if i as u64 > g.count {
                continue;
            }
            let anchor = Self::anchor(g, i as u64);
            let (bl, bh) = (b.lo.get(0), b.hi.get(0));
            let gx = interval_gap(bl, bh, anchor - g.width, anchor);
            let mut cross_sq = 0.0;
            let mut gap = [0.0; MAX_DIM];
            for j in 1..d {
                let gj = interval_gap(b.lo.get(j), b.hi.get(j), g.cross_lo[j], g.cross_hi[j]);
                gap[j] = gj;
                cross_sq += gj * gj;
            }
            let v = anchor - g.width;
            let t = interval_gap(bl, bh, v, v);
            let mut m = t * t + cross_sq;
            let t = interval_gap(bl, bh, anchor, anchor);
            m = m.min(t * t + cross_sq);
            for j in 1..d - 1 {
                let rest = gx * gx + cross_sq - gap[j] * gap[j];
                let t = interval_gap(b.lo.get(j), b.hi.get(j), g.cross_lo[j], g.cross_lo[j]);
                m = m.min(t * t + rest);
                let t = interval_gap(b.lo.get(j), b.hi.get(j), g.cross_hi[j], g.cross_hi[j]);
                m = m.min(t * t + rest);
            }
            let rest = gx * gx + cross_sq - gap[d - 1] * gap[d - 1];
            let v = g.cross_hi[d - 1];
            let t = interval_gap(b.lo.get(d - 1), b.hi.get(d - 1), v, v);
            m = m.min(t * t + rest);
            *best = (*best).min(m);
        }
    }

    pub fn distance_with_bound(&self, p: &Point) -> (f64, f64) {
        assert_eq!(p.dim(), self.dim, "query dimension mismatch");
        let mut best = f64::INFINITY;
        for f in &self.q_faces {
            best = best.min(f.gap_sq_to_point(p));
        }
        best = best.min(self.top_dist_sq_point(p));
        for g in &self.levels {
            if g.bbox.gap_sq_to_point(p) >= best {
                continue;
            }
            self.slab_dist_sq_point(g, p, &mut best);
        }
        let dist = best.sqrt();
        let err = if self.trunc_box.dist_to_point(p) <= dist + self.trunc_bound {
            self.trunc_bound
        } else {
            0.0
        };
        (dist, err)
    }

    /// Squared-distance scan over the exposed faces with an early stop: the
    /// return value is the exact squared distance whenever it exceeds
    /// `stop_sq`; once the running minimum reaches `stop_sq` or less the scan
    /// stops and returns it (an upper bound on the true squared distance).
    fn box_dist_sq_pruned(&self, b: &Aabb, stop_sq: f64) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.q_faces {
            best = best.min(f.gap_sq_to_box(b));
            if best <= stop_sq {
                return best;
            }
        }
        best = best.min(self.top_dist_sq_box(b));
        if best <= stop_sq {
            return best;
        }
        for g in &self.levels {
            if g.bbox.gap_sq_to_box(b) >= best {
                continue;
            }
            self.slab_dist_sq_box(g, b, &mut best);
            if best <= stop_sq {
                return best;
            }
        }
        best
    }

    pub fn box_distance_with_bound(&self, b: &Aabb) -> (f64, f64) {
        assert_eq!(b.dim(), self.dim, "query dimension mismatch");
        // Distance cannot drop below zero, so stopping at zero stays exact.
        let dist = self.box_dist_sq_pruned(b, 0.0).sqrt();
        let err = if self.trunc_box.dist_to_box(b) <= dist + self.trunc_bound {
            self.trunc_bound
        } else {
            0.0
        };
        (dist, err)
    }

    /// Classify the box distance against a scale `t`: `2` when `dist >= t`,
    /// `1` when the distance is certainly in `(t/2, t)`, `0` otherwise
    /// (distance at or below `t/2`, computed with an early exit). The `2`
    /// boundary is decided exactly.
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

    /// All slab levels marked live, for seeding [`Self::box_class_masked`].
    pub fn full_level_mask(&self) -> u32 {
        debug_assert!(self.levels.len() <= 32);
        if self.levels.len() >= 32 {
            u32::MAX
        } else {
            (1u32 << self.levels.len()) - 1
        }
    }

    /// [`Self::box_proximity_class`] restricted to the slab levels whose bit
    /// is set in `mask`, returning the classification together with a
    /// possibly smaller mask. A bit comes back cleared only when every slab
    /// of that level was proven to lie at distance `>= t` from `b`. Distances
    /// to a fixed feature set can only grow on sub-boxes, so the returned
    /// mask remains valid for any box contained in `b` queried at scale
    /// `t/2` or finer — which is exactly how a Whitney refinement descends.
    ///
    /// Skipping a level certified at `>= t` cannot disturb any of the three
    /// outcomes: the `2` result is a statement that the distance is at least
    /// `t`, and the `0`/`1` results are decided by features strictly closer
    /// than `t`.
    pub fn box_class_masked(&self, b: &Aabb, t: f64, mask: u32) -> (u8, u32) {
        assert_eq!(b.dim(), self.dim, "query dimension mismatch");
        let t_sq = t * t;
        let q = 0.25 * t_sq;
        let mut best = f64::INFINITY;
        for f in &self.q_faces {
            best = best.min(f.gap_sq_to_box(b));
        }
        best = best.min(self.top_dist_sq_box(b));
        if best <= q {
            // Decided by the base features alone; no per-level distances
            // were computed, so the mask is passed through unchanged.
            return (0, mask);
        }
        let mut out = mask;
        for (i, g) in self.levels.iter().enumerate() {
            // Levels beyond the mask width (never reached under the
            // construction budget) are scanned unconditionally.
            let bit = if i < 32 { 1u32 << i } else { 0 };
            if bit != 0 && mask & bit == 0 {
                continue;
            }
            let bb = g.bbox.gap_sq_to_box(b);
            if bb >= t_sq {
                out &= !bit;
                continue;
            }
            if bb >= best {
                // Cannot lower the minimum; left live for the children.
                continue;
            }
            let mut lvl = f64::INFINITY;
            self.slab_dist_sq_box(g, b, &mut lvl);
            if lvl >= t_sq {
                out &= !bit;
            }
            best = best.min(lvl);
        }
        let class = if best >= t_sq {
            2
        } else if best > q {
            1
        } else {
            0
        };
        (class, out)
    }

    pub fn contains(&self, p: &Point) -> bool {
        assert_eq!(p.dim(), self.dim, "query dimension mismatch");
        let mut in_q = true;
        for j in 0..self.dim {
            if p.get(j) < self.q_lo[j] || p.get(j) > self.q_hi[j] {
                in_q = false;
                break;
            }
        }
        if in_q {
            return true;
        }
        let Some(n) = band_level(p.get(0)) else {
            return false;
        };
        if n > self.effective_depth() {
            return false;
        }
        let g = &self.levels[(n - 1) as usize];
        let i = ((p.get(0) - g.band_lo) / g.spacing).ceil() as i64;
        if i < 1 || i as u64 > g.count {
            return false;
        }
        let anchor = Self::anchor(g, i as u64);
        if p.get(0) < anchor - g.width {
            return false;
        }
        for j in 1..self.dim {
            if p.get(j) < g.cross_lo[j] || p.get(j) > g.cross_hi[j] {
                return false;
            }
        }
        true
    }

    pub(super) fn sample_boundary(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<BoundarySample> {
        let d = self.dim;
        // Component weights: punctured top, plain faces of Q, then levels.
        let mut weights = vec![self.top_area];
        weights.extend(std::iter::repeat_n(1.0, self.q_faces.len()));
        for g in &self.levels {
            weights.push(g.count as f64 * g.slab_area);
        }
        let total: f64 = weights.iter().sum();

        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let mut u = rng.gen_range(0.0..total);
            let mut comp = weights.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    comp = k;
                    break;
                }
                u -= w;
            }
            if comp == 0 {
                // Punctured top face: rejection-sample the footprint holes.
                let lo: Vec<f64> = (0..d - 1).map(|j| self.q_lo[j]).chain([0.0]).collect();
                let hi: Vec<f64> = (0..d - 1).map(|j| self.q_hi[j]).chain([0.0]).collect();
                loop {
                    let c = super::uniform_in(rng, &lo, &hi);
                    if self.hole_containing_point(&c).is_none() {
                        let mut normal = Point::zeros(d);
                        normal.set(d - 1, 1.0);
                        out.push(BoundarySample {
                            point: Point::new(&c),
                            face: FaceId::QTop,
                            normal,
                        });
                        break;
                    }
                }
            } else if comp <= self.q_faces.len() {
                let f = &self.q_faces[comp - 1];
                let c = super::uniform_in(rng, f.lo.as_slice(), f.hi.as_slice());
                let axis = (0..d).find(|&j| f.lo.get(j) == f.hi.get(j)).unwrap();
                let side = f.lo.get(axis) == self.q_hi[axis] && self.q_lo[axis] != self.q_hi[axis];
                let mut normal = Point::zeros(d);
                normal.set(axis, if side { 1.0 } else { -1.0 });
                out.push(BoundarySample {
                    point: Point::new(&c),
                    face: FaceId::QSide { axis: axis as u8, side },
                    normal,
                });
            } else {
                let g = &self.levels[comp - 1 - self.q_faces.len()];
                let i = rng.gen_range(1..=g.count);
                let anchor = Self::anchor(g, i);
                let mut v = rng.gen_range(0.0..g.slab_area);
                let mut face = g.face_areas[g.face_areas.len() - 1].0;
                for (f, a) in &g.face_areas {
                    if v < *a {
                        face = *f;
                        break;
                    }
                    v -= a;
                }
                let mut lo: Vec<f64> = (0..d).map(|j| g.cross_lo[j]).collect();
                let mut hi: Vec<f64> = (0..d).map(|j| g.cross_hi[j]).collect();
                lo[0] = anchor - g.width;
                hi[0] = anchor;
                let mut normal = Point::zeros(d);
                match face {
                    SlabFace::XLow => {
                        hi[0] = lo[0];
                        normal.set(0, -1.0);
                    }
                    SlabFace::XHigh => {
                        lo[0] = hi[0];
                        normal.set(0, 1.0);
                    }
                    SlabFace::Cross { axis, side } => {
                        let j = axis as usize;
                        if side {
                            lo[j] = hi[j];
                            normal.set(j, 1.0);
                        } else {
                            hi[j] = lo[j];
                            normal.set(j, -1.0);
                        }
                    }
                    SlabFace::Top => {
                        lo[d - 1] = hi[d - 1];
                        normal.set(d - 1, 1.0);
                    }
                }
                let c = super::uniform_in(rng, &lo, &hi);
                out.push(BoundarySample {
                    point: Point::new(&c),
                    face: FaceId::Slab { level: g.n, index: i, face },
                    normal,
                });
            }
        }
        out
    }
}
