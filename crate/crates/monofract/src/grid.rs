//! Dyadic grids over a surface: box counting and Whitney decomposition.
//!
//! Both walks share one engine: descend the dyadic cube tree from a few
//! roots, prune exactly using the surface's box-distance oracle, and fan the
//! deep levels out over rayon. Per-chunk partial results merge in frontier
//! order, so every run of the same query produces bit-identical floats.
//!
//! Box counting records, at every level in one descent, how many closed grid
//! cubes meet the surface; the counts are exact because the intersection
//! test is the exact distance-zero test, not a center heuristic.
//!
//! The Whitney walk tiles the complement of the surface with dyadic cubes
//! satisfying `diam(Q) <= dist(Q, S) <= 4 diam(Q)`: a cube is emitted as
//! soon as `dist >= diam`, and a parent that failed that test confines its
//! children to `dist < 4 diam`, so the invariant holds by construction all
//! the way down. Cubes still unresolved at the depth cap are reported as
//! uncovered volume instead of being silently dropped.

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point, MAX_DIM};
use crate::surface::SurfaceSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of logarithmic bins used for the center-distance/side histograms.
pub const RATIO_BINS: usize = 512;
/// Histogram range for `dist(center)/side`; Whitney cubes in dimension
/// `<= 6` land in `[sqrt(d), 4.5 sqrt(d)] subset [1, 16]`.
const RATIO_LO: f64 = 1.0;
const RATIO_HI: f64 = 16.0;
/// Grow the sequential frontier to this many active cubes before handing
/// subtrees to rayon.
const PAR_FRONTIER: usize = 1024;

/// Closed cube `[corner * 2^-level, (corner + 1) * 2^-level]` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub corner: [i64; MAX_DIM],
    pub dim: u8,
}

impl DyadicCube {
    pub fn side(&self) -> f64 {
        f64::powi(2.0, -self.level)
    }

    pub fn diam(&self) -> f64 {
        self.side() * (self.dim as f64).sqrt()
    }

    pub fn aabb(&self) -> Aabb {
        let s = self.side();
        let d = self.dim as usize;
        let mut lo = Point::zeros(d);
        let mut hi = Point::zeros(d);
        for j in 0..d {
            lo.set(j, self.corner[j] as f64 * s);
            hi.set(j, (self.corner[j] + 1) as f64 * s);
        }
        Aabb::new(lo, hi)
    }

    pub fn center(&self) -> Point {
        let s = self.side();
        let d = self.dim as usize;
        let mut c = Point::zeros(d);
        for j in 0..d {
            c.set(j, (self.corner[j] as f64 + 0.5) * s);
        }
        c
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    /// The `2^dim` children one level finer.
    pub fn children(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        let n = 1u32 << self.dim;
        (0..n).map(move |bits| {
            let mut corner = [0i64; MAX_DIM];
            for j in 0..self.dim as usize {
                corner[j] = 2 * self.corner[j] + ((bits >> j) & 1) as i64;
            }
            DyadicCube {
                level: self.level + 1,
                corner,
                dim: self.dim,
            }
        })
    }
}

/// Which component of the complement a Whitney cube lies in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Inside the closed solid the surface bounds.
    Inner,
    /// In the unbounded complement.
    Outer,
}

/// One emitted Whitney cube.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitneyCube {
    pub cube: DyadicCube,
    /// Exact distance from the cube to the surface (`>= diam`).
    pub dist: f64,
    /// Distance from the cube center to the surface.
    pub center_dist: f64,
    pub side_of: Side,
    /// Volume of the cube clipped to the working window.
    pub volume: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SideStats {
    pub count: u64,
    pub volume: f64,
    /// Clipped volume binned by `dist(center)/side`, logarithmically over
    /// `[1, 16]`.
    pub vol_hist: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitneyLevelStats {
    pub level: i32,
    pub inner: SideStats,
    pub outer: SideStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitneyStats {
    pub k_root: i32,
    pub k_max: i32,
    pub clip: Aabb,
    /// Aligned with levels `k_root..=k_max`.
    pub levels: Vec<WhitneyLevelStats>,
    /// Cubes at the depth cap still closer to the surface than their
    /// diameter: the volume the decomposition failed to tile.
    pub uncovered_count: u64,
    pub uncovered_volume: f64,
}

impl WhitneyStats {
    /// Total tiled volume on one side.
    pub fn side_volume(&self, side: Side) -> f64 {
        self.levels
            .iter()
            .map(|l| match side {
                Side::Inner => l.inner.volume,
                Side::Outer => l.outer.volume,
            })
            .sum()
    }

    pub fn cube_count(&self) -> u64 {
        self.levels.iter().map(|l| l.inner.count + l.outer.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,side_len,inner_count,inner_volume,outer_count,outer_volume\n",
        );
        for l in &self.levels {
            s.push_str(&format!(
                "{},{:e},{},{:e},{},{:e}\n",
                l.level,
                f64::powi(2.0, -l.level),
                l.inner.count,
                l.inner.volume,
                l.outer.count,
                l.outer.volume
            ));
        }
        s
    }
}

/// Geometric center of a ratio-histogram bin.
pub fn ratio_bin_center(bin: usize) -> f64 {
    let t = (bin as f64 + 0.5) / RATIO_BINS as f64;
    RATIO_LO * (RATIO_HI / RATIO_LO).powf(t)
}

fn ratio_bin(c: f64) -> usize {
    if c <= RATIO_LO {
        return 0;
    }
    let t = (c / RATIO_LO).log2() / (RATIO_HI / RATIO_LO).log2();
    ((t * RATIO_BINS as f64) as usize).min(RATIO_BINS - 1)
}

/// A cube-tree walk: `step` visits one work item and pushes the items to
/// descend into.
trait TreeVisitor: Sync {
    type Acc: Send;
    type Item: Send + Sync + Copy;
    fn fresh(&self) -> Self::Acc;
    fn step(&self, item: &Self::Item, acc: &mut Self::Acc, out: &mut Vec<Self::Item>);
    fn merge(&self, into: &mut Self::Acc, from: Self::Acc);
}

/// Walk the tree from `roots`: breadth-first until the frontier is wide
/// enough, then parallel depth-first per chunk, merging chunk results in
/// order (deterministic floats).
fn tree_walk<V: TreeVisitor>(v: &V, roots: Vec<V::Item>) -> V::Acc {
    let mut acc = v.fresh();
    let mut frontier = Vec::new();
    for r in &roots {
        v.step(r, &mut acc, &mut frontier);
    }
    while !frontier.is_empty() && frontier.len() < PAR_FRONTIER {
        let mut next = Vec::new();
        for it in &frontier {
            v.step(it, &mut acc, &mut next);
        }
        frontier = next;
    }
    if !frontier.is_empty() {
        let chunk = (frontier.len() / (8 * rayon::current_num_threads().max(1))).max(1);
        let parts: Vec<V::Acc> = frontier
            .par_chunks(chunk)
            .map(|items| {
                let mut local = v.fresh();
                let mut stack: Vec<V::Item> = Vec::new();
                for it in items {
                    stack.push(*it);
                    while let Some(cur) = stack.pop() {
                        v.step(&cur, &mut local, &mut stack);
                    }
                }
                local
            })
            .collect();
        for p in parts {
            v.merge(&mut acc, p);
        }
    }
    acc
}

/// Grid cubes at `level` whose closed extent can meet `b`.
fn grid_cover(b: &Aabb, level: i32) -> Vec<DyadicCube> {
    let d = b.dim();
    let s = f64::powi(2.0, -level);
    let mut lo_idx = [0i64; MAX_DIM];
    let mut hi_idx = [0i64; MAX_DIM];
    for j in 0..d {
        lo_idx[j] = (b.lo.get(j) / s).floor() as i64 - 1;
        hi_idx[j] = (b.hi.get(j) / s).floor() as i64 + 1;
    }
    let mut out = Vec::new();
    let mut idx = lo_idx;
    'outer: loop {
        let cube = DyadicCube {
            level,
            corner: idx,
            dim: d as u8,
        };
        if cube.aabb().intersects(b) {
            out.push(cube);
        }
        for j in 0..d {
            idx[j] += 1;
            if idx[j] <= hi_idx[j] {
                continue 'outer;
            }
            idx[j] = lo_idx[j];
        }
        break;
    }
    out
}

// ---------------------------------------------------------------------------
// Box counting
// ---------------------------------------------------------------------------

/// Number of closed grid cubes meeting the surface, per level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxCountSeries {
    pub k_min: i32,
    pub counts: Vec<u64>,
}

impl BoxCountSeries {
    pub fn k_max(&self) -> i32 {
        self.k_min + self.counts.len() as i32 - 1
    }

    pub fn count_at(&self, level: i32) -> Option<u64> {
        if level < self.k_min || level > self.k_max() {
            return None;
        }
        Some(self.counts[(level - self.k_min) as usize])
    }

    pub fn levels(&self) -> impl Iterator<Item = (i32, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.k_min + i as i32, c))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,side_len,count\n");
        for (k, c) in self.levels() {
            s.push_str(&format!("{},{:e},{}\n", k, f64::powi(2.0, -k), c));
        }
        s
    }
}

struct CountVisitor<'a> {
    surface: &'a SurfaceSpec,
    k_min: i32,
    k_max: i32,
}

impl TreeVisitor for CountVisitor<'_> {
    type Acc = Vec<u64>;
    type Item = DyadicCube;

    fn fresh(&self) -> Vec<u64> {
        vec![0; (self.k_max - self.k_min + 1) as usize]
    }

    fn step(&self, cube: &DyadicCube, acc: &mut Vec<u64>, out: &mut Vec<DyadicCube>) {
        if !self.surface.intersects_box(&cube.aabb()) {
            return;
        }
        acc[(cube.level - self.k_min) as usize] += 1;
        if cube.level < self.k_max {
            out.extend(cube.children());
        }
    }

    fn merge(&self, into: &mut Vec<u64>, from: Vec<u64>) {
        for (a, b) in into.iter_mut().zip(from) {
            *a += b;
        }
    }
}

/// Count, for every level `k_min..=k_max`, the closed dyadic grid cubes of
/// side `2^-k` that meet the surface. One descent, exact tests.
pub fn box_count(surface: &SurfaceSpec, k_min: i32, k_max: i32) -> Result<BoxCountSeries> {
    if k_min > k_max {
        return Err(Error::invalid("k_min", "k_min must not exceed k_max"));
    }
    if k_max - k_min > 48 || k_max > 48 {
        return Err(Error::invalid("k_max", "grid deeper than 2^-48 is not meaningful in f64"));
    }
    let v = CountVisitor { surface, k_min, k_max };
    let counts = tree_walk(&v, grid_cover(&surface.bounding_box(), k_min));
    Ok(BoxCountSeries { k_min, counts })
}

/// Least-squares slope of `log2 N_k` against `k` over a level window.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub dimension: f64,
    pub log2_intercept: f64,
    /// Root-mean-square residual of the fit in log2 units.
    pub rms_residual: f64,
    pub window: (i32, i32),
}

pub fn fit_dimension(series: &BoxCountSeries, k_lo: i32, k_hi: i32) -> Result<DimensionEstimate> {
    let mut pts = Vec::new();
    for (k, n) in series.levels() {
        if k < k_lo || k > k_hi {
            continue;
        }
        if n == 0 {
            return Err(Error::Singular(format!("count at level {k} is zero")));
        }
        pts.push((k as f64, (n as f64).log2()));
    }
    if pts.len() < 2 {
        return Err(Error::invalid(
            "window",
            format!("need at least 2 levels in [{k_lo}, {k_hi}], have {}", pts.len()),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let rms = (pts
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DimensionEstimate {
        dimension: slope,
        log2_intercept: intercept,
        rms_residual: rms,
        window: (k_lo, k_hi),
    })
}

// ---------------------------------------------------------------------------
// Whitney decomposition
// ---------------------------------------------------------------------------

struct WhitneyAcc {
    levels: Vec<WhitneyLevelStats>,
    uncovered_count: u64,
    uncovered_volume: f64,
    cubes: Vec<WhitneyCube>,
}

struct WhitneyVisitor<'a> {
    surface: &'a SurfaceSpec,
    clip: &'a Aabb,
    k_root: i32,
    k_max: i32,
    sqrt_d: f64,
    /// Record the center-distance histograms (needs one extra point query
    /// per cube; the counts alone are enough for exponent bracketing).
    hist: bool,
    collect: bool,
}

impl WhitneyVisitor<'_> {
    fn emit(&self, cube: &DyadicCube, vol: f64, acc: &mut WhitneyAcc) {
        let center = cube.center();
        let side_of = if self.surface.contains(&center) {
            Side::Inner
        } else {
            Side::Outer
        };
        let slot = &mut acc.levels[(cube.level - self.k_root) as usize];
        let stats = match side_of {
            Side::Inner => &mut slot.inner,
            Side::Outer => &mut slot.outer,
        };
        stats.count += 1;
        stats.volume += vol;
        if self.hist {
            let center_dist = self.surface.distance(&center);
            stats.vol_hist[ratio_bin(center_dist / cube.side())] += vol;
            if self.collect {
                let dist = self.surface.box_distance(&cube.aabb());
                acc.cubes.push(WhitneyCube {
                    cube: *cube,
                    dist,
                    center_dist,
                    side_of,
                    volume: vol,
                });
            }
        }
    }
}

/// A cube in a Whitney walk: the cube, whether its parent already
/// certified `dist > diam/2` of the parent cube (which makes every child
/// emittable with no further box query: `dist(child) >= dist(parent) >
/// diam(child)`, and the parent's failed emission test keeps `dist(child)
/// < 4 diam(child)`), and the surviving feature-level liveness mask.
type WalkCell = (DyadicCube, bool, u32);

impl TreeVisitor for WhitneyVisitor<'_> {
    type Acc = WhitneyAcc;
    type Item = WalkCell;

    fn fresh(&self) -> WhitneyAcc {
        let bins = if self.hist { RATIO_BINS } else { 0 };
        let levels = (self.k_root..=self.k_max)
            .map(|level| WhitneyLevelStats {
                level,
                inner: SideStats {
                    count: 0,
                    volume: 0.0,
                    vol_hist: vec![0.0; bins],
                },
                outer: SideStats {
                    count: 0,
                    volume: 0.0,
                    vol_hist: vec![0.0; bins],
                },
            })
            .collect();
        WhitneyAcc {
            levels,
            uncovered_count: 0,
            uncovered_volume: 0.0,
            cubes: Vec::new(),
        }
    }

    fn step(
        &self,
        &(cube, free, mask): &WalkCell,
        acc: &mut WhitneyAcc,
        out: &mut Vec<WalkCell>,
    ) {
        let aabb = cube.aabb();
        let vol = self.clip.intersection_volume(&aabb);
        if vol <= 0.0 {
            return;
        }
        if free {
            self.emit(&cube, vol, acc);
            return;
        }
        let diam = cube.side() * self.sqrt_d;
        let (class, mask) = self.surface.box_class_masked(&aabb, diam, mask);
        if class == 2 {
            self.emit(&cube, vol, acc);
        } else if cube.level >= self.k_max {
            acc.uncovered_count += 1;
            acc.uncovered_volume += vol;
        } else {
            out.extend(cube.children().map(|ch| (ch, class == 1, mask)));
        }
    }

    fn merge(&self, into: &mut WhitneyAcc, from: WhitneyAcc) {
        for (a, b) in into.levels.iter_mut().zip(from.levels) {
            a.inner.count += b.inner.count;
            a.inner.volume += b.inner.volume;
            a.outer.count += b.outer.count;
            a.outer.volume += b.outer.volume;
            for (x, y) in a.inner.vol_hist.iter_mut().zip(b.inner.vol_hist) {
                *x += y;
            }
            for (x, y) in a.outer.vol_hist.iter_mut().zip(b.outer.vol_hist) {
                *x += y;
            }
        }
        into.uncovered_count += from.uncovered_count;
        into.uncovered_volume += from.uncovered_volume;
        into.cubes.extend(from.cubes);
    }
}

/// Root level and seeded root items shared by every Whitney walk over
/// `clip`: cubes at least as wide as the window's diagonal, so the surface
/// (inside the window) is within `4 diam` of any emittable root and the
/// Whitney bound holds from the top of the tree.
fn whitney_roots(
    surface: &SurfaceSpec,
    clip: &Aabb,
    k_max: i32,
) -> Result<(i32, Vec<WalkCell>)> {
    if clip.dim() != surface.dim() {
        return Err(Error::DimensionMismatch {
            expected: surface.dim(),
            got: clip.dim(),
        });
    }
    let diam_clip = (0..clip.dim())
        .map(|j| clip.extent(j) * clip.extent(j))
        .sum::<f64>()
        .sqrt();
    if !(diam_clip > 0.0) {
        return Err(Error::invalid("clip", "window must have positive volume"));
    }
    let mut k_root = (-diam_clip.log2()).floor() as i32;
    while f64::powi(2.0, -k_root) < diam_clip {
        k_root -= 1;
    }
    if k_root > k_max {
        return Err(Error::invalid(
            "k_max",
            format!("depth cap {k_max} is coarser than the root level {k_root}"),
        ));
    }
    let mask = surface.full_feature_mask();
    let roots = grid_cover(clip, k_root)
        .into_iter()
        .map(|c| (c, false, mask))
        .collect();
    Ok((k_root, roots))
}

fn whitney_walk(
    surface: &SurfaceSpec,
    clip: &Aabb,
    k_max: i32,
    hist: bool,
    collect: bool,
) -> Result<(Vec<WhitneyCube>, WhitneyStats)> {
    let (k_root, roots) = whitney_roots(surface, clip, k_max)?;
    let v = WhitneyVisitor {
        surface,
        clip,
        k_root,
        k_max,
        sqrt_d: (surface.dim() as f64).sqrt(),
        hist,
        collect,
    };
    let acc = tree_walk(&v, roots);
    let stats = WhitneyStats {
        k_root,
        k_max,
        clip: *clip,
        levels: acc.levels,
        uncovered_count: acc.uncovered_count,
        uncovered_volume: acc.uncovered_volume,
    };
    Ok((acc.cubes, stats))
}

/// Per-level statistics of the Whitney decomposition of `clip \ S`,
/// including the center-distance histograms, without materializing the
/// cubes. Scales to ~10^7 cubes.
pub fn whitney_stats(surface: &SurfaceSpec, clip: &Aabb, k_max: i32) -> Result<WhitneyStats> {
    whitney_walk(surface, clip, k_max, true, false).map(|(_, s)| s)
}

/// Like [`whitney_stats`] but records only per-level counts and volumes
/// (empty histograms). One point query cheaper per cube; enough for
/// integral bracketing, and the choice for deep exponent runs.
pub fn whitney_counts(surface: &SurfaceSpec, clip: &Aabb, k_max: i32) -> Result<WhitneyStats> {
    whitney_walk(surface, clip, k_max, false, false).map(|(_, s)| s)
}

/// Materialize the Whitney cubes of `clip \ S` down to side `2^-k_max`,
/// together with the statistics. Intended for moderate depths.
pub fn whitney_decompose(
    surface: &SurfaceSpec,
    clip: &Aabb,
    k_max: i32,
) -> Result<(Vec<WhitneyCube>, WhitneyStats)> {
    whitney_walk(surface, clip, k_max, true, true)
}

/// Outcome of an exhaustive soundness check of the decomposition: every
/// emitted cube's exact box distance measured against `diam <= dist <=
/// 4 diam`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WhitneyVerification {
    pub k_root: i32,
    pub k_max: i32,
    /// Cubes the walk emitted (and this check measured).
    pub checked: u64,
    /// Cubes whose ratio fell outside `[1, 4]` beyond float-tie slack.
    pub violations: u64,
    /// Smallest `dist / diam` seen; sound decompositions stay `>= 1`.
    pub min_ratio: f64,
    /// Largest `dist / diam` seen; sound decompositions stay `<= 4`.
    pub max_ratio: f64,
}

impl WhitneyVerification {
    pub fn sound(&self) -> bool {
        self.violations == 0
    }
}

struct VerifyVisitor<'a> {
    surface: &'a SurfaceSpec,
    clip: &'a Aabb,
    k_max: i32,
    sqrt_d: f64,
    /// Relative slack absorbing 1-ulp disagreements between the walk's
    /// squared-distance comparisons and the reference distance here.
    slack: f64,
}

#[derive(Clone)]
struct VerifyAcc {
    checked: u64,
    violations: u64,
    min_ratio: f64,
    max_ratio: f64,
}

impl VerifyVisitor<'_> {
    fn check(&self, cube: &DyadicCube, acc: &mut VerifyAcc) {
        let diam = cube.side() * self.sqrt_d;
        let dist = self.surface.box_distance(&cube.aabb());
        let ratio = dist / diam;
        acc.checked += 1;
        if ratio < acc.min_ratio {
            acc.min_ratio = ratio;
        }
        if ratio > acc.max_ratio {
            acc.max_ratio = ratio;
        }
        if ratio < 1.0 - self.slack || ratio > 4.0 + self.slack {
            acc.violations += 1;
        }
    }
}

impl TreeVisitor for VerifyVisitor<'_> {
    type Acc = VerifyAcc;
    type Item = WalkCell;

    fn fresh(&self) -> VerifyAcc {
        VerifyAcc {
            checked: 0,
            violations: 0,
            min_ratio: f64::INFINITY,
            max_ratio: 0.0,
        }
    }

    fn step(
        &self,
        &(cube, free, mask): &WalkCell,
        acc: &mut VerifyAcc,
        out: &mut Vec<WalkCell>,
    ) {
        if self.clip.intersection_volume(&cube.aabb()) <= 0.0 {
            return;
        }
        if free {
            self.check(&cube, acc);
            return;
        }
        let diam = cube.side() * self.sqrt_d;
        let (class, mask) = self.surface.box_class_masked(&cube.aabb(), diam, mask);
        if class == 2 {
            self.check(&cube, acc);
        } else if cube.level < self.k_max {
            out.extend(cube.children().map(|ch| (ch, class == 1, mask)));
        }
    }

    fn merge(&self, into: &mut VerifyAcc, from: VerifyAcc) {
        into.checked += from.checked;
        into.violations += from.violations;
        into.min_ratio = into.min_ratio.min(from.min_ratio);
        into.max_ratio = into.max_ratio.max(from.max_ratio);
    }
}

/// Walk the same tree the decomposition walks, but measure every emitted
/// cube against the exact box distance (computed independently of the
/// pruned classification the walk uses) — the two-sided Whitney bound is
/// confirmed cube by cube without materializing any of them.
pub fn whitney_verify(
    surface: &SurfaceSpec,
    clip: &Aabb,
    k_max: i32,
) -> Result<WhitneyVerification> {
    let (k_root, roots) = whitney_roots(surface, clip, k_max)?;
    let v = VerifyVisitor {
        surface,
        clip,
        k_max,
        sqrt_d: (surface.dim() as f64).sqrt(),
        slack: 1e-9,
    };
    let acc = tree_walk(&v, roots);
    Ok(WhitneyVerification {
        k_root,
        k_max,
        checked: acc.checked,
        violations: acc.violations,
        min_ratio: acc.min_ratio,
        max_ratio: acc.max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    fn cube_surface() -> SurfaceSpec {
        SurfaceSpec::unit_cube(3).unwrap()
    }

    #[test]
    fn dyadic_cube_geometry() {
        let c = DyadicCube {
            level: 2,
            corner: [1, -2, 0, 0, 0, 0],
            dim: 3,
        };
        assert_eq!(c.side(), 0.25);
        let a = c.aabb();
        assert_eq!(a.lo.as_slice(), &[0.25, -0.5, 0.0]);
        assert_eq!(a.hi.as_slice(), &[0.5, -0.25, 0.25]);
        assert_eq!(c.center().as_slice(), &[0.375, -0.375, 0.125]);
        let kids: Vec<_> = c.children().collect();
        assert_eq!(kids.len(), 8);
        assert!(kids.iter().all(|k| k.level == 3));
        let mut vol = 0.0;
        for k in &kids {
            vol += k.volume();
        }
        assert_relative_eq!(vol, c.volume());
    }

    /// Exact count for the boundary of the unit cube: candidate cells
    /// `(M+2)^3` minus the strictly interior ones `(M-2)^3`, `M = 2^k`.
    fn cube_boundary_count(k: i32) -> u64 {
        let m = 1i64 << k;
        let all = (m + 2).pow(3);
        let interior = (m - 2).max(0).pow(3);
        (all - interior) as u64
    }

    #[test]
    fn cube_counts_match_closed_form() {
        let s = cube_surface();
        let series = box_count(&s, 0, 5).unwrap();
        for (k, n) in series.levels() {
            assert_eq!(n, cube_boundary_count(k), "level {k}");
        }
    }

    #[test]
    fn octree_matches_flat_enumeration() {
        let s = SurfaceSpec::fractal(3, 1.5, 2.0, 2).unwrap();
        let series = box_count(&s, 0, 4).unwrap();
        for k in 0..=4 {
            let mut brute = 0u64;
            for cube in grid_cover(&s.bounding_box(), k) {
                if s.box_distance(&cube.aabb()) == 0.0 {
                    brute += 1;
                }
            }
            assert_eq!(series.count_at(k), Some(brute), "level {k}");
        }
    }

    #[test]
    fn degenerate_surfaces_count_exactly() {
        // Flat square: (M+2)^2 cells in-plane, 2 cells across the plane.
        let sq = SurfaceSpec::box_union(vec![Aabb::from_slices(
            &[0.0, 0.0, 0.0],
            &[1.0, 1.0, 0.0],
        )])
        .unwrap();
        let series = box_count(&sq, 0, 5).unwrap();
        for (k, n) in series.levels() {
            let m = (1i64 << k) + 2;
            assert_eq!(n, (m * m * 2) as u64, "square at level {k}");
        }
        // A point on a dyadic vertex touches 8 cells at every level that
        // resolves it, 1 cell before that.
        let pt = SurfaceSpec::box_union(vec![Aabb::from_slices(&[0.5; 3], &[0.5; 3])]).unwrap();
        let series = box_count(&pt, 0, 6).unwrap();
        assert_eq!(series.count_at(0), Some(1));
        for k in 1..=6 {
            assert_eq!(series.count_at(k), Some(8), "level {k}");
        }
    }

    #[test]
    fn dimension_fit_recovers_flat_dimensions() {
        // The one-cell halo of boundary-touching cells outside a flat
        // surface decays like 2/M, so the window must sit deep enough.
        let sq = SurfaceSpec::box_union(vec![Aabb::from_slices(
            &[0.0, 0.0, 0.0],
            &[1.0, 1.0, 0.0],
        )])
        .unwrap();
        let fit = fit_dimension(&box_count(&sq, 0, 10).unwrap(), 6, 10).unwrap();
        assert!((fit.dimension - 2.0).abs() < 0.05, "square dim {}", fit.dimension);

        let cube = cube_surface();
        let fit = fit_dimension(&box_count(&cube, 0, 9).unwrap(), 5, 9).unwrap();
        assert!((fit.dimension - 2.0).abs() < 0.01, "cube dim {}", fit.dimension);

        let pt = SurfaceSpec::box_union(vec![Aabb::from_slices(&[0.5; 3], &[0.5; 3])]).unwrap();
        let fit = fit_dimension(&box_count(&pt, 0, 8).unwrap(), 2, 8).unwrap();
        assert!(fit.dimension.abs() < 1e-9, "point dim {}", fit.dimension);
    }

    #[test]
    fn fit_rejects_degenerate_windows() {
        let series = BoxCountSeries { k_min: 0, counts: vec![1, 8, 64] };
        assert!(fit_dimension(&series, 0, 0).is_err());
        assert!(fit_dimension(&series, 5, 9).is_err());
        let with_zero = BoxCountSeries { k_min: 0, counts: vec![1, 0, 64] };
        assert!(fit_dimension(&with_zero, 0, 2).is_err());
    }

    #[test]
    fn whitney_cubes_satisfy_the_distance_bounds() {
        let s = cube_surface();
        let clip = Aabb::from_slices(&[-0.75, -0.75, -0.75], &[1.75, 1.75, 1.75]);
        let (cubes, stats) = whitney_decompose(&s, &clip, 6).unwrap();
        assert_eq!(cubes.len() as u64, stats.cube_count());
        assert!(!cubes.is_empty());
        for w in &cubes {
            let diam = w.cube.diam();
            assert!(w.dist >= diam * (1.0 - 1e-12), "lower bound: {} < {}", w.dist, diam);
            assert!(
                w.dist <= 4.0 * diam * (1.0 + 1e-12),
                "upper bound: {} > 4*{}",
                w.dist,
                diam
            );
            // Side classification agrees with the solid test at the center.
            let inside = s.contains(&w.cube.center());
            assert_eq!(matches!(w.side_of, Side::Inner), inside);
        }
    }

    #[test]
    fn whitney_cubes_are_disjoint_and_tile_the_window() {
        let s = cube_surface();
        let clip = Aabb::from_slices(&[-0.5, -0.5, -0.5], &[1.5, 1.5, 1.5]);
        let (cubes, stats) = whitney_decompose(&s, &clip, 6).unwrap();
        // No emitted cube is an ancestor of another.
        let keys: HashSet<(i32, [i64; MAX_DIM])> =
            cubes.iter().map(|w| (w.cube.level, w.cube.corner)).collect();
        assert_eq!(keys.len(), cubes.len(), "duplicate cubes emitted");
        for w in &cubes {
            let mut c = w.cube;
            while c.level > stats.k_root {
                let mut corner = [0i64; MAX_DIM];
                for j in 0..c.dim as usize {
                    corner[j] = c.corner[j].div_euclid(2);
                }
                c = DyadicCube { level: c.level - 1, corner, dim: c.dim };
                assert!(
                    !keys.contains(&(c.level, c.corner)),
                    "cube {:?} nested under an emitted ancestor",
                    w.cube
                );
            }
        }
        // Clipped volumes plus the uncovered remainder tile the window.
        let total: f64 = cubes.iter().map(|w| w.volume).sum();
        assert_relative_eq!(
            total + stats.uncovered_volume,
            clip.volume(),
            max_relative = 1e-9
        );
        // The inner side tiles the unit cube.
        let inner = stats.side_volume(Side::Inner);
        assert!(
            (inner - 1.0).abs() <= stats.uncovered_volume + 1e-9,
            "inner volume {inner} vs cube volume 1"
        );
    }

    #[test]
    fn whitney_stats_agree_with_materialized_cubes() {
        let s = SurfaceSpec::fractal(3, 1.5, 2.0, 2).unwrap();
        let clip = Aabb::from_slices(&[-0.5, -1.5, -1.5], &[1.5, 0.5, 1.0]);
        let (cubes, stats) = whitney_decompose(&s, &clip, 5).unwrap();
        let lean = whitney_stats(&s, &clip, 5).unwrap();
        assert_eq!(stats.cube_count(), lean.cube_count());
        assert_eq!(stats.uncovered_count, lean.uncovered_count);
        for (a, b) in stats.levels.iter().zip(&lean.levels) {
            assert_eq!(a.inner.count, b.inner.count);
            assert_eq!(a.inner.volume, b.inner.volume);
            assert_eq!(a.outer.volume, b.outer.volume);
        }
        // Histogram volume equals total volume, level by level.
        for l in &stats.levels {
            for (side, st) in [(Side::Inner, &l.inner), (Side::Outer, &l.outer)] {
                let h: f64 = st.vol_hist.iter().sum();
                assert_relative_eq!(h, st.volume, max_relative = 1e-12);
                let _ = side;
            }
        }
        // Histogram bins hold the center-distance ratios of the cubes.
        for w in &cubes {
            let c = w.center_dist / w.cube.side();
            assert!(c >= 3.0f64.sqrt() * (1.0 - 1e-12), "ratio {c} below sqrt(3)");
            assert!(c <= 16.0, "ratio {c} beyond the histogram range");
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let s = SurfaceSpec::fractal(3, 1.3, 2.1, 3).unwrap();
        let clip = Aabb::from_slices(&[-0.5, -1.5, -1.5], &[1.5, 0.5, 1.0]);
        let a = whitney_stats(&s, &clip, 7).unwrap();
        let b = whitney_stats(&s, &clip, 7).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert_eq!(x.inner.volume.to_bits(), y.inner.volume.to_bits());
            assert_eq!(x.outer.volume.to_bits(), y.outer.volume.to_bits());
            assert_eq!(x.inner.vol_hist, y.inner.vol_hist);
        }
        assert_eq!(a.uncovered_volume.to_bits(), b.uncovered_volume.to_bits());
    }

    /// Textbook single-threaded refinement with per-cube exact distances and
    /// no shortcuts, as a reference for the production walk.
    fn reference_whitney(
        surface: &SurfaceSpec,
        clip: &Aabb,
        k_root: i32,
        k_max: i32,
    ) -> HashSet<(i32, [i64; 6])> {
        let sqrt_d = (clip.dim() as f64).sqrt();
        let mut cubes = HashSet::new();
        let mut stack = grid_cover(clip, k_root);
        while let Some(c) = stack.pop() {
            if clip.intersection_volume(&c.aabb()) <= 0.0 {
                continue;
            }
            if surface.box_distance(&c.aabb()) >= c.side() * sqrt_d {
                cubes.insert((c.level, c.corner));
            } else if c.level < k_max {
                stack.extend(c.children());
            }
        }
        cubes
    }

    #[test]
    fn pruned_walk_matches_the_reference_refinement() {
        for s in [
            SurfaceSpec::fractal(3, 1.3, 2.1, 5).unwrap(),
            SurfaceSpec::unit_cube(3).unwrap(),
        ] {
            let clip = s.bounding_box();
            let (cubes, stats) = whitney_decompose(&s, &clip, 8).unwrap();
            let got: HashSet<_> = cubes
                .iter()
                .map(|w| (w.cube.level, w.cube.corner))
                .collect();
            assert_eq!(got.len(), cubes.len());
            let want = reference_whitney(&s, &clip, stats.k_root, 8);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn verification_confirms_soundness_and_counts_every_cube() {
        for s in [
            SurfaceSpec::unit_cube(3).unwrap(),
            SurfaceSpec::fractal(3, 1.3, 2.1, 5).unwrap(),
        ] {
            let clip = s.bounding_box();
            let (cubes, _) = whitney_decompose(&s, &clip, 7).unwrap();
            let ver = whitney_verify(&s, &clip, 7).unwrap();
            assert!(ver.sound(), "violations: {ver:?}");
            assert_eq!(ver.checked, cubes.len() as u64);
            assert!(ver.min_ratio >= 1.0 - 1e-9, "{}", ver.min_ratio);
            assert!(ver.max_ratio <= 4.0 + 1e-9, "{}", ver.max_ratio);
        }
    }
}
