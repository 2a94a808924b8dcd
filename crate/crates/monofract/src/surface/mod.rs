//! Surface constructions and exact proximity queries.
//!
//! Two backends share one interface. [`fractal`] builds the slab-decorated
//! cube family: a unit-scale cube with, at every dyadic level n, a row of
//! `2^floor(n*beta)` thin rectangular slabs glued onto its top face, widths
//! shrinking like `spacing^alpha`. [`boxes`] wraps an arbitrary finite union
//! of axis-aligned boxes (cube, L-shapes, degenerate rectangles) so the grid
//! and integral machinery can be calibrated against shapes with known
//! answers.
//!
//! Both backends answer point and box distance queries *exactly* (up to
//! floating point): every face of the surface is an axis-aligned rectangle,
//! possibly with rectangular punctures, and distances to such sets reduce to
//! interval-gap arithmetic. The fractal backend locates candidate slabs per
//! level arithmetically, so a query costs O(levels), never O(rectangles).

mod boxes;
mod fractal;

pub use boxes::BoxUnionSurface;
pub use fractal::FractalSurface;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Hard ceiling on the total number of slabs a fractal surface may own.
pub const RECTANGLE_BUDGET: u128 = 100_000_000;

/// Default construction depth used by the command-line tools.
pub const DEFAULT_DEPTH: u32 = 12;

/// Which face of the surface a boundary sample landed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceId {
    /// Side face of the base cube: `axis` is the normal axis, `side` is
    /// false for the low face.
    QSide { axis: u8, side: bool },
    /// Top face of the base cube (punctured by slab footprints).
    QTop,
    /// Face of slab `index` at construction level `level`.
    Slab {
        level: u32,
        index: u64,
        face: SlabFace,
    },
    /// A face of box `box_idx` in a box-union surface.
    UnionFace { box_idx: u32, axis: u8, side: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlabFace {
    /// Normal along the subdivided axis, low side (`x = anchor - width`).
    XLow,
    /// Normal along the subdivided axis, high side (`x = anchor`).
    XHigh,
    /// Cross-section face: normal axis and side.
    Cross { axis: u8, side: bool },
    /// Cap opposite the attachment plane.
    Top,
}

impl std::fmt::Display for FaceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FaceId::QSide { axis, side } => {
                write!(f, "q{}{}", axis, if *side { '+' } else { '-' })
            }
            FaceId::QTop => write!(f, "qtop"),
            FaceId::Slab { level, index, face } => {
                let tag = match face {
                    SlabFace::XLow => "x-".to_string(),
                    SlabFace::XHigh => "x+".to_string(),
                    SlabFace::Cross { axis, side } => {
                        format!("c{}{}", axis, if *side { '+' } else { '-' })
                    }
                    SlabFace::Top => "top".to_string(),
                };
                write!(f, "s{level}:{index}:{tag}")
            }
            FaceId::UnionFace { box_idx, axis, side } => {
                write!(f, "b{}:{}{}", box_idx, axis, if *side { '+' } else { '-' })
            }
        }
    }
}

/// A point drawn area-uniformly from the surface, with its face and the
/// outward unit normal of that face.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundarySample {
    pub point: Point,
    pub face: FaceId,
    pub normal: Point,
}

/// Closed-form values available for the fractal family in three dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormPrediction {
    /// Upper Minkowski dimension of the surface: `3 beta / (beta + 1)`.
    pub dim_minkowski: f64,
    /// Inner divergence exponent: `1 - (beta - 2) / (alpha (beta + 1))`.
    pub m_plus: f64,
    /// `m_plus - (3 - dim_minkowski)`; positive exactly when alpha > 1 and
    /// beta > 2 (`(beta - 2)(1 - 1/alpha) / (beta + 1)`).
    pub strict_gap: f64,
    /// Whether the lower bound `m >= 3 - dim` is strict for these
    /// parameters.
    pub is_strict: bool,
}

/// Serialization shape for [`SurfaceSpec`]; the runtime object carries
/// derived tables that are rebuilt on load.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SurfaceSpecRepr {
    Fractal {
        dimension: usize,
        alpha: f64,
        beta: f64,
        depth: u32,
    },
    BoxUnion {
        boxes: Vec<(Vec<f64>, Vec<f64>)>,
    },
}

/// A surface together with exact proximity queries against it.
// A run holds a handful of these, never collections; the size skew
// between variants is irrelevant and boxing would only add a hop to the
// distance queries on the hot path.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SurfaceSpecRepr", into = "SurfaceSpecRepr")]
pub enum SurfaceSpec {
    Fractal(FractalSurface),
    BoxUnion(BoxUnionSurface),
}

impl TryFrom<SurfaceSpecRepr> for SurfaceSpec {
    type Error = Error;
    fn try_from(repr: SurfaceSpecRepr) -> Result<Self> {
        match repr {
            SurfaceSpecRepr::Fractal {
                dimension,
                alpha,
                beta,
                depth,
            } => SurfaceSpec::fractal(dimension, alpha, beta, depth),
            SurfaceSpecRepr::BoxUnion { boxes } => {
                let boxes = boxes
                    .into_iter()
                    .map(|(lo, hi)| Aabb::from_slices(&lo, &hi))
                    .collect();
                SurfaceSpec::box_union(boxes)
            }
        }
    }
}

impl From<SurfaceSpec> for SurfaceSpecRepr {
    fn from(spec: SurfaceSpec) -> Self {
        match spec {
            SurfaceSpec::Fractal(f) => SurfaceSpecRepr::Fractal {
                dimension: f.dim(),
                alpha: f.alpha(),
                beta: f.beta(),
                depth: f.requested_depth(),
            },
            SurfaceSpec::BoxUnion(b) => SurfaceSpecRepr::BoxUnion {
                boxes: b
                    .boxes()
                    .iter()
                    .map(|a| (a.lo.as_slice().to_vec(), a.hi.as_slice().to_vec()))
                    .collect(),
            },
        }
    }
}

impl SurfaceSpec {
    /// Build a fractal slab surface. `depth` is the requested number of slab
    /// levels; the builder caps it so the total slab count stays within
    /// [`RECTANGLE_BUDGET`] and records the effective depth.
    pub fn fractal(dimension: usize, alpha: f64, beta: f64, depth: u32) -> Result<SurfaceSpec> {
        Ok(SurfaceSpec::Fractal(FractalSurface::build(
            dimension, alpha, beta, depth,
        )?))
    }

    /// Boundary of a finite union of axis-aligned boxes. Degenerate boxes
    /// (zero extent on some axis) are treated as bare rectangles; mixing
    /// degenerate and solid boxes is rejected.
    pub fn box_union(boxes: Vec<Aabb>) -> Result<SurfaceSpec> {
        Ok(SurfaceSpec::BoxUnion(BoxUnionSurface::build(boxes)?))
    }

    /// The unit cube `[0,1]^dim`.
    pub fn unit_cube(dimension: usize) -> Result<SurfaceSpec> {
        SurfaceSpec::box_union(vec![Aabb::new(
            Point::zeros(dimension),
            Point::new(&vec![1.0; dimension]),
        )])
    }

    /// Two unit cubes sharing a face: `[0,1]^3 + [1,2]x[0,1]^2`.
    pub fn l_shape(dimension: usize) -> Result<SurfaceSpec> {
        let mut lo = vec![0.0; dimension];
        let mut hi = vec![1.0; dimension];
        let a = Aabb::from_slices(&lo, &hi);
        lo[0] = 1.0;
        hi[0] = 2.0;
        let b = Aabb::from_slices(&lo, &hi);
        SurfaceSpec::box_union(vec![a, b])
    }

    pub fn dim(&self) -> usize {
        match self {
            SurfaceSpec::Fractal(f) => f.dim(),
            SurfaceSpec::BoxUnion(b) => b.dim(),
        }
    }

    /// Tight axis-aligned bounding box of the surface.
    pub fn bounding_box(&self) -> Aabb {
        match self {
            SurfaceSpec::Fractal(f) => f.bounding_box(),
            SurfaceSpec::BoxUnion(b) => b.bounding_box(),
        }
    }

    /// Whether `p` lies in the closed solid region the surface bounds.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            SurfaceSpec::Fractal(f) => f.contains(p),
            SurfaceSpec::BoxUnion(b) => b.contains(p),
        }
    }

    /// Euclidean distance from `p` to the surface.
    pub fn distance(&self, p: &Point) -> f64 {
        self.distance_with_bound(p).0
    }

    /// Distance together with a truncation error bound: the true distance to
    /// the untruncated surface lies within `value ± bound`. The bound is
    /// zero except near the finest-level cutoff of a fractal surface.
    pub fn distance_with_bound(&self, p: &Point) -> (f64, f64) {
        match self {
            SurfaceSpec::Fractal(f) => f.distance_with_bound(p),
            SurfaceSpec::BoxUnion(b) => (b.distance(p), 0.0),
        }
    }

    /// Euclidean distance from an axis-aligned box to the surface; zero
    /// exactly when the closed box meets the surface.
    pub fn box_distance(&self, b: &Aabb) -> f64 {
        self.box_distance_with_bound(b).0
    }

    pub fn box_distance_with_bound(&self, b: &Aabb) -> (f64, f64) {
        match self {
            SurfaceSpec::Fractal(f) => f.box_distance_with_bound(b),
            SurfaceSpec::BoxUnion(u) => (u.box_distance(b), 0.0),
        }
    }

    /// Whether the closed box intersects the surface.
    pub fn intersects_box(&self, b: &Aabb) -> bool {
        self.box_distance(b) == 0.0
    }

    /// Classify the box distance against a scale `t > 0`: `2` when
    /// `dist >= t` (decided exactly), `1` when the distance certainly lies in
    /// `(t/2, t)`, `0` otherwise (`dist <= t/2`, computed with an early
    /// exit, so cheaper than the exact distance for nearby boxes).
    pub fn box_proximity_class(&self, b: &Aabb, t: f64) -> u8 {
        match self {
            SurfaceSpec::Fractal(f) => f.box_proximity_class(b, t),
            SurfaceSpec::BoxUnion(u) => u.box_proximity_class(b, t),
        }
    }

    /// Seed mask for [`Self::box_class_masked`]: every feature group live.
    pub fn full_feature_mask(&self) -> u32 {
        match self {
            SurfaceSpec::Fractal(f) => f.full_level_mask(),
            SurfaceSpec::BoxUnion(_) => 0,
        }
    }

    /// [`Self::box_proximity_class`] plus feature-group pruning for
    /// refinement descents. A cleared bit in the returned mask certifies
    /// that the whole feature group sits at distance `>= t` from `b`;
    /// because point-set distances only grow on sub-boxes, the returned
    /// mask stays valid for any box inside `b` queried at scale `t/2` or
    /// finer. Surfaces with nothing to prune pass the mask through.
    pub fn box_class_masked(&self, b: &Aabb, t: f64, mask: u32) -> (u8, u32) {
        match self {
            SurfaceSpec::Fractal(f) => f.box_class_masked(b, t, mask),
            SurfaceSpec::BoxUnion(u) => (u.box_proximity_class(b, t), mask),
        }
    }

    /// Draw `count` points area-uniformly from the surface. Deterministic in
    /// `seed`.
    pub fn sample_boundary(&self, count: usize, seed: u64) -> Vec<BoundarySample> {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        match self {
            SurfaceSpec::Fractal(f) => f.sample_boundary(count, &mut rng),
            SurfaceSpec::BoxUnion(b) => b.sample_boundary(count, &mut rng),
        }
    }

    /// Closed-form dimension and exponent values; available only for the
    /// three-dimensional fractal family.
    pub fn predictions(&self) -> Result<ClosedFormPrediction> {
        match self {
            SurfaceSpec::Fractal(f) if f.dim() == 3 => {
                let (alpha, beta) = (f.alpha(), f.beta());
                let dim_minkowski = 3.0 * beta / (beta + 1.0);
                let m_plus = 1.0 - (beta - 2.0) / (alpha * (beta + 1.0));
                let strict_gap = (beta - 2.0) * (1.0 - 1.0 / alpha) / (beta + 1.0);
                Ok(ClosedFormPrediction {
                    dim_minkowski,
                    m_plus,
                    strict_gap,
                    is_strict: alpha > 1.0 && beta > 2.0,
                })
            }
            SurfaceSpec::Fractal(_) => Err(Error::Unsupported(
                "closed forms are known only in dimension 3".into(),
            )),
            SurfaceSpec::BoxUnion(_) => Err(Error::Unsupported(
                "no closed-form predictions for generic box unions".into(),
            )),
        }
    }

    /// Depth the fractal builder actually realised (None for box unions).
    pub fn effective_depth(&self) -> Option<u32> {
        match self {
            SurfaceSpec::Fractal(f) => Some(f.effective_depth()),
            SurfaceSpec::BoxUnion(_) => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<SurfaceSpec> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Uniform draw from an axis-aligned rectangle given per-axis bounds.
pub(crate) fn uniform_in(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..h) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_reference_values() {
        let s = SurfaceSpec::fractal(3, 1.3, 2.1, 4).unwrap();
        let p = s.predictions().unwrap();
        assert!((p.dim_minkowski - 2.032_258_064_516_129).abs() < 1e-12);
        assert!((p.m_plus - 0.9751861042183623).abs() < 1e-12);
        assert!((p.strict_gap - 0.007444168734491315).abs() < 1e-12);
        assert!(p.is_strict);
    }

    #[test]
    fn prediction_equality_cases_are_not_strict() {
        for (alpha, beta) in [(1.0, 2.5), (1.7, 2.0), (1.0, 2.0)] {
            let s = SurfaceSpec::fractal(3, alpha, beta, 3).unwrap();
            let p = s.predictions().unwrap();
            assert!(!p.is_strict, "alpha {alpha} beta {beta}");
            assert!(p.strict_gap.abs() < 1e-15);
            assert!((p.m_plus - (3.0 - p.dim_minkowski)).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_preserves_behaviour() {
        let s = SurfaceSpec::fractal(3, 1.3, 2.1, 6).unwrap();
        let json = s.to_json().unwrap();
        let back = SurfaceSpec::from_json(&json).unwrap();
        let p = Point::new(&[0.83, -0.4, 0.21]);
        assert_eq!(s.distance(&p), back.distance(&p));
        assert_eq!(s.predictions().unwrap(), back.predictions().unwrap());

        let cube = SurfaceSpec::unit_cube(3).unwrap();
        let back = SurfaceSpec::from_json(&cube.to_json().unwrap()).unwrap();
        assert_eq!(
            cube.distance(&Point::new(&[0.5, 0.5, 0.9])),
            back.distance(&Point::new(&[0.5, 0.5, 0.9]))
        );
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(SurfaceSpec::fractal(3, 0.9, 2.1, 4).is_err());
        assert!(SurfaceSpec::fractal(3, 1.0, 1.9, 4).is_err());
        assert!(SurfaceSpec::fractal(2, 1.0, 2.0, 4).is_err());
        assert!(SurfaceSpec::fractal(3, 1.0, 2.0, 0).is_err());
    }
}
