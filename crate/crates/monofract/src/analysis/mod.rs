//! Boundary-value machinery: Whitney extension of Hölder boundary data,
//! the Teodorescu transform, and the jump problem for monogenic functions.
//!
//! The target problem: given a closed surface `S` in `R^(n+1)` splitting
//! space into an inner region `G+` and an outer region `G-`, and Hölder
//! data `f : S -> Cl(n)`, produce a pair of functions `Phi+` on `G+` and
//! `Phi-` on `G-` that are monogenic (annihilated by the Cauchy-Riemann
//! operator `D`), decay at infinity, and jump by exactly `f` across `S`:
//!
//! ```text
//! Phi+(s) - Phi-(s) = f(s)    for s on S.
//! ```
//!
//! The construction runs in three steps, each usable on its own:
//!
//! 1. [`whitney_extend`] extends `f` off the surface: a smooth partition of
//!    unity subordinate to dilated Whitney cubes transfers the value of the
//!    nearest boundary sample to each cube, giving a field `f~` that equals
//!    `f` at the samples and whose gradient blows up no faster than
//!    `dist(x, S)^(nu - 1)`.
//! 2. [`teodorescu`] applies the volume potential
//!    `(T u)(x) = -∫ E(y - x) u(y) dV(y)`, the right inverse of `D`, by
//!    adaptive midpoint quadrature over the Whitney cubes.
//! 3. [`solve_jump`] combines them: `Phi+ = f~ - T(D f~)` on the inner
//!    region and `Phi- = -T(D f~)` on the outer one. Since `T` inverts `D`
//!    over the integration region, `D Phi+ = D f~ - D f~ = 0` there, while
//!    off the region the potential is monogenic outright; the jump relation
//!    holds because `T(D f~)` is continuous across `S`.
//!
//! Whether the data is rough enough to defeat the construction is governed
//! by the interplay of the Hölder exponent `nu` and the critical integral
//! exponent `m` of the surface (see [`crate::marcinkiewicz`]):
//! [`solvability_check`] encodes the sufficient condition
//! `nu > 1 - m / (n+1)`, and [`uniqueness_window`] the range of Hölder
//! classes in which the solution is the only one.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clifford::Multivector;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Point};
use crate::surface::SurfaceSpec;

mod extension;
mod jump;
mod teodorescu;

pub use extension::{whitney_extend, WhitneyExtension};
pub use jump::{
    solve_jump, DecayDiagnostics, JumpBranch, JumpConfig, JumpDiagnostics, JumpSolution,
    ResidualSummary,
};
pub use teodorescu::{teodorescu, QuadratureConfig, TeodorescuEngine};

/// Hölder boundary data: point samples of a Clifford-valued function on a
/// surface, together with the Hölder exponent the function is asserted to
/// satisfy and an empirical Hölder constant measured over sample pairs.
#[derive(Clone, Debug)]
pub struct HoelderData {
    points: Vec<Point>,
    values: Vec<Multivector>,
    normals: Option<Vec<Point>>,
    nu: f64,
    hoelder_constant: f64,
}

impl HoelderData {
    /// Build from `(point, value)` pairs. Requires `nu` in `(0, 1]`, at
    /// least one sample, consistent dimensions (values in `Cl(n)` for
    /// points in `R^(n+1)`), and finite values. The Hölder constant is
    /// estimated as `max |f(x) - f(y)| / |x - y|^nu` over sample pairs
    /// (all pairs when feasible, a fixed-seed random subset otherwise).
    pub fn new(pairs: Vec<(Point, Multivector)>, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::invalid(
                "nu",
                format!("Hoelder exponent must lie in (0, 1], got {nu}"),
            ));
        }
        if pairs.is_empty() {
            return Err(Error::invalid("samples", "no boundary samples supplied"));
        }
        let dim = pairs[0].0.dim();
        let n = dim - 1;
        let mut points = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (p, v) in pairs {
            if p.dim() != dim || v.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: if p.dim() != dim { p.dim() } else { v.n() + 1 },
                });
            }
            if !v.coeffs().iter().all(|c| c.is_finite()) {
                return Err(Error::invalid("samples", "non-finite sample value"));
            }
            points.push(p);
            values.push(v);
        }
        let hoelder_constant = estimate_hoelder_constant(&points, &values, nu);
        Ok(HoelderData {
            points,
            values,
            normals: None,
            nu,
            hoelder_constant,
        })
    }

    /// Sample a function on `count` area-uniform boundary points of the
    /// surface (deterministic in `seed`), keeping the outward normals for
    /// later use in straddling probes.
    pub fn from_boundary<F>(
        surface: &SurfaceSpec,
        count: usize,
        seed: u64,
        nu: f64,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&Point) -> Multivector,
    {
        if count == 0 {
            return Err(Error::invalid("count", "need at least one sample"));
        }
        let samples = surface.sample_boundary(count, seed);
        let normals: Vec<Point> = samples.iter().map(|s| s.normal).collect();
        let pairs: Vec<(Point, Multivector)> =
            samples.iter().map(|s| (s.point, f(&s.point))).collect();
        let mut data = Self::new(pairs, nu)?;
        data.normals = Some(normals);
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn values(&self) -> &[Multivector] {
        &self.values
    }

    /// Outward normals aligned with [`Self::points`], when the data was
    /// sampled from a surface.
    pub fn normals(&self) -> Option<&[Point]> {
        self.normals.as_deref()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The measured Hölder constant `max |f(x)-f(y)| / |x-y|^nu` over
    /// sample pairs — an estimate from below of the true constant.
    pub fn hoelder_constant(&self) -> f64 {
        self.hoelder_constant
    }

    /// Largest sample norm; the natural scale for relative residuals.
    pub fn value_scale(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Verify every sample point sits on the surface (distance at most
    /// `1e-10` plus the surface's truncation slack).
    pub fn validate_on(&self, surface: &SurfaceSpec) -> Result<()> {
        for p in &self.points {
            let (d, err) = surface.distance_with_bound(p);
            if d > 1e-10 + err {
                return Err(Error::invalid(
                    "samples",
                    format!("sample at distance {d:.3e} from the surface"),
                ));
            }
        }
        Ok(())
    }
}

fn estimate_hoelder_constant(points: &[Point], values: &[Multivector], nu: f64) -> f64 {
    let n = points.len();
    let mut best = 0.0f64;
    let mut consider = |i: usize, j: usize| {
        let d = points[i].dist(&points[j]);
        if d > 0.0 {
            let q = values[i].sub(&values[j]).norm() / d.powf(nu);
            if q > best {
                best = q;
            }
        }
    };
    if n * n <= 2_000_000 {
        for i in 0..n {
            for j in i + 1..n {
                consider(i, j);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6865_6c64_6572);
        for _ in 0..2_000_000 {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i != j {
                consider(i, j);
            }
        }
    }
    best
}

/// How a [`CliffordField`] produces its values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldBackend {
    /// A user-supplied closure.
    ClosedForm,
    /// Partition-of-unity extension of boundary samples.
    WhitneyExtension,
    /// Volume potential evaluated by adaptive quadrature.
    Teodorescu,
    /// A combination of the above (e.g. a jump-problem branch).
    Composite,
}

/// A Clifford-algebra-valued field on a region of `R^(n+1)`: an evaluator
/// plus a bounding box describing where evaluation is meaningful and a tag
/// recording how values are produced. Evaluation never fails; outside the
/// declared domain it returns whatever natural continuation the backend
/// has (closures their formula, extensions their nearest-sample fallback,
/// potentials their integral).
#[derive(Clone)]
pub struct CliffordField {
    backend: FieldBackend,
    domain: Aabb,
    eval: Arc<dyn Fn(&Point) -> Multivector + Send + Sync>,
}

impl CliffordField {
    pub fn from_fn<F>(backend: FieldBackend, domain: Aabb, f: F) -> Self
    where
        F: Fn(&Point) -> Multivector + Send + Sync + 'static,
    {
        CliffordField {
            backend,
            domain,
            eval: Arc::new(f),
        }
    }

    pub fn eval(&self, p: &Point) -> Multivector {
        (self.eval)(p)
    }

    pub fn backend(&self) -> FieldBackend {
        self.backend
    }

    pub fn domain(&self) -> &Aabb {
        &self.domain
    }
}

impl fmt::Debug for CliffordField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CliffordField")
            .field("backend", &self.backend)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// Sufficient condition for the jump problem with `nu`-Hölder data on a
/// surface with Marcinkiewicz exponent `m_abs` in `R^(n+1)`:
///
/// ```text
/// nu > 1 - m_abs / (n + 1).
/// ```
///
/// Rougher surfaces (smaller `m_abs`) demand smoother data. For a
/// rectifiable-like surface with `m_abs = 1` in `R^3` the threshold is
/// `2/3`, the classical Marcinkiewicz-exponent refinement of the
/// dimension-based conditions.
pub fn solvability_check(nu: f64, m_abs: f64, n: usize) -> bool {
    nu > solvability_threshold(m_abs, n)
}

/// The threshold `1 - m_abs / (n + 1)` from [`solvability_check`].
pub fn solvability_threshold(m_abs: f64, n: usize) -> f64 {
    1.0 - m_abs / (n + 1) as f64
}

/// The open interval of auxiliary Hölder exponents `mu` in which a decaying
/// monogenic pair with the given jump is unique:
///
/// ```text
/// ( dim_lower - n ,  1 - (n + 1)(1 - nu) / m_abs )
/// ```
///
/// where `dim_lower` is a lower bound for the Hausdorff dimension of the
/// surface. Returns `None` when the interval is empty (the data is too
/// rough relative to the surface for the argument to bite) or the inputs
/// are degenerate.
pub fn uniqueness_window(nu: f64, m_abs: f64, dim_lower: f64, n: usize) -> Option<(f64, f64)> {
    if !(nu > 0.0 && nu <= 1.0) || !(m_abs > 0.0) || !dim_lower.is_finite() {
        return None;
    }
    let lo = dim_lower - n as f64;
    let hi = 1.0 - (n + 1) as f64 * (1.0 - nu) / m_abs;
    if lo < hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Sample a field on a coordinate-plane grid and render it as CSV: one row
/// per grid node with the point coordinates followed by every Clifford
/// component (`c<mask>` columns in blade-mask order). The plane is
/// `x[axis] = offset`, clipped to `window`, with `res` nodes per free axis.
pub fn field_slice_csv(
    field: &CliffordField,
    axis: usize,
    offset: f64,
    window: &Aabb,
    res: usize,
) -> Result<String> {
    let dim = window.dim();
    if axis >= dim {
        return Err(Error::invalid(
            "axis",
            format!("axis {axis} out of range for dimension {dim}"),
        ));
    }
    if res < 2 {
        return Err(Error::invalid("res", "need at least two nodes per axis"));
    }
    let free: Vec<usize> = (0..dim).filter(|&i| i != axis).collect();
    let ncomp = 1usize << (dim - 1);
    let mut out = String::new();
    for i in 0..dim {
        out.push_str(&format!("x{i},"));
    }
    for m in 0..ncomp {
        out.push_str(&format!("c{m}"));
        out.push(if m + 1 == ncomp { '\n' } else { ',' });
    }
    let mut idx = vec![0usize; free.len()];
    loop {
        let mut p = Point::zeros(dim);
        p.set(axis, offset);
        for (slot, &ax) in free.iter().enumerate() {
            let t = idx[slot] as f64 / (res - 1) as f64;
            p.set(ax, window.lo.get(ax) + t * (window.hi.get(ax) - window.lo.get(ax)));
        }
        let v = field.eval(&p);
        for i in 0..dim {
            out.push_str(&format!("{},", p.get(i)));
        }
        for m in 0..ncomp {
            out.push_str(&format!("{}", v.coeff(m as u32)));
            out.push(if m + 1 == ncomp { '\n' } else { ',' });
        }
        // Odometer over the free axes.
        let mut slot = 0;
        loop {
            if slot == idx.len() {
                return Ok(out);
            }
            idx[slot] += 1;
            if idx[slot] < res {
                break;
            }
            idx[slot] = 0;
            slot += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::Multivector;

    #[test]
    fn hoelder_data_validates_its_inputs() {
        let p = Point::new(&[0.0, 0.0, 0.0]);
        let v = Multivector::scalar(2, 1.0).unwrap();
        assert!(HoelderData::new(vec![(p, v.clone())], 0.0).is_err());
        assert!(HoelderData::new(vec![(p, v.clone())], 1.1).is_err());
        assert!(HoelderData::new(vec![], 0.5).is_err());
        let bad = Multivector::scalar(3, 1.0).unwrap();
        assert!(HoelderData::new(vec![(p, bad)], 0.5).is_err());
        assert!(HoelderData::new(vec![(p, v)], 1.0).is_ok());
    }

    #[test]
    fn hoelder_constant_matches_a_hand_computation() {
        let mk = |x: f64, val: f64| {
            (
                Point::new(&[x, 0.0, 0.0]),
                Multivector::scalar(2, val).unwrap(),
            )
        };
        // Values 0, 1 at distance 0.25 with nu = 0.5: constant 1/sqrt(0.25) = 2.
        let data = HoelderData::new(vec![mk(0.0, 0.0), mk(0.25, 1.0)], 0.5).unwrap();
        assert!((data.hoelder_constant() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solvability_threshold_matches_the_formula() {
        assert!((solvability_threshold(1.0, 2) - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert!(solvability_check(0.7, 1.0, 2));
        assert!(!solvability_check(0.6, 1.0, 2));
        // Rougher surface, higher bar.
        assert!(!solvability_check(0.7, 0.8, 2));
    }

    #[test]
    fn uniqueness_window_closes_for_rough_data() {
        // Smooth-ish data on a mildly fractal surface: open window.
        let w = uniqueness_window(0.95, 1.0, 2.2, 2).unwrap();
        assert!(w.0 < w.1);
        assert!((w.0 - 0.2).abs() < 1e-12);
        assert!((w.1 - (1.0 - 3.0 * 0.05)).abs() < 1e-12);
        // Data too rough: empty.
        assert!(uniqueness_window(0.68, 1.0, 2.9, 2).is_none());
        // Degenerate inputs.
        assert!(uniqueness_window(0.0, 1.0, 2.2, 2).is_none());
        assert!(uniqueness_window(0.9, 0.0, 2.2, 2).is_none());
    }

    #[test]
    fn field_slice_has_the_expected_shape() {
        let dom = Aabb::from_slices(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]);
        let f = CliffordField::from_fn(FieldBackend::ClosedForm, dom, |p| {
            Multivector::scalar(2, p.get(0) + p.get(2)).unwrap()
        });
        let csv = field_slice_csv(&f, 1, 0.5, &dom, 3).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 9);
        assert_eq!(lines[0], "x0,x1,x2,c0,c1,c2,c3");
        // Every row fixes x1 = 0.5 and reports finite components.
        for row in &lines[1..] {
            let cols: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(cols.len(), 7);
            assert_eq!(cols[1], 0.5);
            assert!((cols[3] - (cols[0] + cols[2])).abs() < 1e-12);
        }
        assert!(field_slice_csv(&f, 3, 0.0, &dom, 3).is_err());
    }
}
