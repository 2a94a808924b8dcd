//! The jump problem: split Hölder boundary data into a pair of monogenic
//! functions, one per side of the surface, whose boundary values differ by
//! exactly the data.
//!
//! With `f~` the Whitney extension of the data and `T` the Teodorescu
//! transform over the inner region `G+`, the inner-branch solution is
//!
//! ```text
//! Phi+ = f~ - T(D f~)   on G+,        Phi- = -T(D f~)   on G-.
//! ```
//!
//! `T` inverts `D` over `G+`, so `D Phi+ = 0` there; off the closure of
//! `G+` the potential is monogenic outright, so `D Phi- = 0`; and since
//! `T(D f~)` is continuous across the surface, the jump `Phi+ - Phi-`
//! equals `f~ = f` on it. Decay at infinity comes from the kernel.
//!
//! The integral converges despite `|D f~| ~ dist^(nu - 1)` blowing up near
//! the surface precisely when the surface's Marcinkiewicz exponent absorbs
//! the blow-up — the solvability condition `nu > 1 - m(S)/(n+1)` checked
//! up front. When the outer exponent dominates (`m- > m+`), the mirrored
//! construction integrates over the outer region instead, after taming the
//! unbounded domain with a smooth radial cutoff `w`: `f* = f~ w` equals
//! `f~` near the surface and vanishes far away, and
//!
//! ```text
//! Phi+ = T*(D f*)   on G+,        Phi- = T*(D f*) - f*   on G-,
//! ```
//!
//! with `T*` taken over the clipped outer region, has the same jump.
//!
//! Besides the two fields, [`solve_jump`] measures its own quality:
//! straddling boundary probes check the jump relation, interior probes
//! check near-vanishing of `D Phi` against an empirical quadrature-error
//! estimate, and far samples fit the decay exponent.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clifford::{cauchy_riemann, Multivector};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{whitney_decompose, Side, WhitneyCube};
use crate::marcinkiewicz::side_clip;
use crate::surface::SurfaceSpec;

use super::{
    solvability_check, solvability_threshold, uniqueness_window, whitney_extend, CliffordField,
    FieldBackend, HoelderData, QuadratureConfig, TeodorescuEngine,
};

/// Which side of the surface carries the volume integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpBranch {
    /// Pick for the caller: the inner construction, which is the right
    /// one whenever the inner exponent dominates (`m+ >= m-`), as it does
    /// for every surface of the built-in family.
    Auto,
    Inner,
    /// Integrate over the cut-off outer region; for surfaces whose outer
    /// exponent dominates (`m- > m+`).
    Outer,
}

/// Parameters for [`solve_jump`].
#[derive(Clone, Debug)]
pub struct JumpConfig {
    /// Whitney depth of the integration region.
    pub k_max: i32,
    pub quadrature: QuadratureConfig,
    /// Straddling boundary pairs for the jump-residual diagnostic.
    pub probe_pairs: usize,
    /// Distance each straddling probe steps off the surface along the
    /// normal. Keep it above the uncovered-shell width `sqrt(d) 2^-k_max`,
    /// or the probes land where the potential is still being resolved.
    pub probe_offset: f64,
    /// Interior probes per side for the `|D Phi| ~ 0` diagnostic.
    pub monogenicity_probes: usize,
    /// Radii (multiples of the surface circumradius) for the decay fit.
    pub decay_radii: Vec<f64>,
    pub decay_directions: usize,
    pub seed: u64,
    /// Marcinkiewicz exponent of the surface. `None` uses the closed form
    /// for the fractal family and `1` for box unions (exact for flat
    /// faces); pass a measured value to override.
    pub m_abs: Option<f64>,
    /// Lower bound for the Hausdorff dimension, for the uniqueness window.
    /// `None` falls back to the topological dimension `n` — always valid,
    /// never sharp.
    pub dim_lower: Option<f64>,
    pub branch: JumpBranch,
    /// Proceed even when the solvability condition fails (the construction
    /// still runs; the diagnostics then judge it).
    pub force: bool,
}

impl Default for JumpConfig {
    fn default() -> Self {
        JumpConfig {
            k_max: 8,
            quadrature: QuadratureConfig::default(),
            probe_pairs: 48,
            probe_offset: 1e-2,
            monogenicity_probes: 4,
            decay_radii: vec![5.0, 10.0, 20.0],
            decay_directions: 3,
            seed: 0x6a75_6d70,
            m_abs: None,
            dim_lower: None,
            branch: JumpBranch::Auto,
            force: false,
        }
    }
}

/// Quantile summary of the straddling jump residuals
/// `|Phi+(x_in) - Phi-(x_out) - f(s)|` over boundary sample pairs.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualSummary {
    pub pairs: usize,
    /// Pairs discarded because an offset probe landed on the wrong side
    /// (samples too close to an edge or corner for the offset).
    pub skipped: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    /// Largest boundary-value norm; the natural normalization.
    pub scale: f64,
}

impl ResidualSummary {
    /// Median residual relative to the data scale (absolute when the data
    /// is identically zero).
    pub fn relative_median(&self) -> f64 {
        if self.scale > 0.0 {
            self.median / self.scale
        } else {
            self.median
        }
    }
}

/// Interior `|D Phi|` probes against an empirical quadrature-error bar
/// (the difference between evaluations at singular edges `e` and `e/2`).
#[derive(Clone, Debug, Serialize)]
pub struct MonogenicitySummary {
    pub probes: usize,
    pub median_residual: f64,
    pub max_residual: f64,
    pub median_error_estimate: f64,
    /// Largest `|D Phi|` over its own error estimate; order-one values
    /// mean the residual is quadrature noise, not a real derivative.
    pub max_ratio: f64,
}

/// Far-field decay of `|Phi-|` along random directions.
#[derive(Clone, Debug, Serialize)]
pub struct DecayDiagnostics {
    /// Circumradius of the surface's bounding box: the unit of `radii`.
    pub radius: f64,
    pub radii: Vec<f64>,
    /// One row per direction, `|Phi-|` at each radius.
    pub norms: Vec<Vec<f64>>,
    /// Per-direction log-log slopes (omitted where the field vanishes).
    pub slopes: Vec<f64>,
    pub slope_mean: Option<f64>,
    /// The kernel exponent `-n`.
    pub expected: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpDiagnostics {
    pub nu: f64,
    pub hoelder_constant: f64,
    pub value_scale: f64,
    pub m_abs: f64,
    pub solvability_threshold: f64,
    pub solvable: bool,
    /// Whether an unsolvable configuration was run anyway.
    pub forced: bool,
    pub branch: String,
    pub uniqueness_window: Option<(f64, f64)>,
    pub k_max: i32,
    pub cube_count: usize,
    pub uncovered_volume: f64,
    /// Measured constant of the extension's gradient envelope.
    pub extension_derivative_constant: f64,
    pub jump_residual: ResidualSummary,
    pub monogenicity: MonogenicitySummary,
    pub decay: DecayDiagnostics,
}

impl JumpDiagnostics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The two monogenic branches plus the measurements backing them.
#[derive(Debug)]
pub struct JumpSolution {
    /// Defined on the inner region.
    pub phi_plus: CliffordField,
    /// Defined on the outer region; decays at infinity.
    pub phi_minus: CliffordField,
    pub diagnostics: JumpDiagnostics,
}

/// Estimate the outward unit normal from the signed distance (negative
/// inside): reliable on faces, `None` near edges and corners where the
/// gradient is ambiguous.
fn outward_normal(surface: &SurfaceSpec, p: &Point) -> Option<Point> {
    let dim = p.dim();
    let h = 1e-6 * surface.bounding_box().max_extent().max(1.0);
    let sdist = |q: &Point| {
        let d = surface.distance(q);
        if surface.contains(q) {
            -d
        } else {
            d
        }
    };
    let mut g = Point::zeros(dim);
    for j in 0..dim {
        let mut qp = *p;
        let mut qm = *p;
        qp.set(j, p.get(j) + h);
        qm.set(j, p.get(j) - h);
        g.set(j, (sdist(&qp) - sdist(&qm)) / (2.0 * h));
    }
    let n = g.norm();
    if (0.8..=1.2).contains(&n) {
        Some(g.scale(1.0 / n))
    } else {
        None
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Default Marcinkiewicz exponent when the caller has no measured value:
/// the closed form for the fractal family, `1` for box unions (flat faces
/// meet the distance integral like a hyperplane, whose exponent is exactly
/// `1` on both sides).
fn default_m_abs(surface: &SurfaceSpec) -> f64 {
    surface.predictions().map(|p| p.m_plus).unwrap_or(1.0)
}

pub fn solve_jump(
    surface: &SurfaceSpec,
    data: &HoelderData,
    cfg: &JumpConfig,
) -> Result<JumpSolution> {
    let dim = surface.dim();
    let n = dim - 1;
    if !(cfg.probe_offset > 0.0) {
        return Err(Error::invalid("probe_offset", "must be positive"));
    }
    data.validate_on(surface)?;

    let m_abs = cfg.m_abs.unwrap_or_else(|| default_m_abs(surface));
    let threshold = solvability_threshold(m_abs, n);
    let solvable = solvability_check(data.nu(), m_abs, n);
    if !solvable && !cfg.force {
        return Err(Error::NotSolvable {
            nu: data.nu(),
            threshold,
        });
    }

    let branch = match cfg.branch {
        JumpBranch::Auto | JumpBranch::Inner => Side::Inner,
        JumpBranch::Outer => Side::Outer,
    };
    let clip = side_clip(surface, branch);
    let (all_cubes, stats) = whitney_decompose(surface, &clip, cfg.k_max)?;
    let cubes: Vec<WhitneyCube> = all_cubes
        .into_iter()
        .filter(|c| c.side_of == branch)
        .collect();
    if cubes.is_empty() {
        return Err(Error::invalid(
            "k_max",
            "decomposition has no cubes on the integration side",
        ));
    }

    let ext = whitney_extend(data, surface, &cubes)?;
    let f_tilde = ext.field();

    // The integrand D f~ (or D f* on the outer branch), differentiated
    // with a step tied to the local distance so stencils stay off S.
    let bbox = surface.bounding_box();
    let center = bbox.center();
    let circum = bbox.circumradius();
    let surface_for_u = surface.clone();
    let cutoff = move |p: &Point| -> f64 {
        // C^1 radial ramp: 1 inside 1.2 R, 0 outside 1.8 R.
        let r = p.dist(&center);
        let t = (r - 1.2 * circum) / (0.6 * circum);
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
        }
    };
    let integrand_src: Arc<dyn Fn(&Point) -> Multivector + Send + Sync> = match branch {
        Side::Inner => {
            let f = f_tilde.clone();
            Arc::new(move |p: &Point| f.eval(p))
        }
        Side::Outer => {
            let f = f_tilde.clone();
            let w = cutoff;
            Arc::new(move |p: &Point| f.eval(p).scale(w(p)))
        }
    };
    let u_field = {
        let src = Arc::clone(&integrand_src);
        let surf = surface_for_u.clone();
        CliffordField::from_fn(FieldBackend::Composite, clip, move |p| {
            let d = surf.distance(p);
            let h = (1e-3f64).min(d / 8.0).max(1e-9);
            cauchy_riemann(|q| Ok(src(q)), p, h)
                .expect("finite step and infallible integrand")
        })
    };

    let engine = Arc::new(TeodorescuEngine::new(u_field, &cubes, cfg.quadrature)?);

    // The two branches as shareable fields (quadrature unbudgeted: field
    // evaluation cannot surface errors, and the per-point node count is
    // bounded by the subdivision geometry).
    let (phi_plus, phi_minus): (CliffordField, CliffordField) = match branch {
        Side::Inner => {
            let e1 = Arc::clone(&engine);
            let f1 = f_tilde.clone();
            let plus = CliffordField::from_fn(FieldBackend::Composite, bbox, move |p| {
                f1.eval(p).sub(&e1.eval_unbudgeted(p))
            });
            let e2 = Arc::clone(&engine);
            let minus =
                CliffordField::from_fn(FieldBackend::Composite, side_clip(surface, Side::Outer), move |p| {
                    e2.eval_unbudgeted(p).scale(-1.0)
                });
            (plus, minus)
        }
        Side::Outer => {
            let e1 = Arc::clone(&engine);
            let plus = CliffordField::from_fn(FieldBackend::Composite, bbox, move |p| {
                e1.eval_unbudgeted(p)
            });
            let e2 = Arc::clone(&engine);
            let src = Arc::clone(&integrand_src);
            let minus = CliffordField::from_fn(FieldBackend::Composite, clip, move |p| {
                e2.eval_unbudgeted(p).sub(&src(p))
            });
            (plus, minus)
        }
    };

    // ---- diagnostics ----
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = data.value_scale();

    // Jump residual over straddling pairs.
    let normals_owned: Vec<Option<Point>> = match data.normals() {
        Some(ns) => ns.iter().map(|n| Some(*n)).collect(),
        None => data
            .points()
            .iter()
            .map(|p| outward_normal(surface, p))
            .collect(),
    };
    let want = cfg.probe_pairs.min(data.len());
    let picks = rand::seq::index::sample(&mut rng, data.len(), want);
    let mut residuals = Vec::new();
    let mut skipped = 0usize;
    for idx in picks {
        let Some(nrm) = normals_owned[idx] else {
            skipped += 1;
            continue;
        };
        let p = data.points()[idx];
        let x_in = p.sub(&nrm.scale(cfg.probe_offset));
        let x_out = p.add(&nrm.scale(cfg.probe_offset));
        if !surface.contains(&x_in) || surface.contains(&x_out) {
            skipped += 1;
            continue;
        }
        let jump = phi_plus.eval(&x_in).sub(&phi_minus.eval(&x_out));
        residuals.push(jump.sub(&data.values()[idx]).norm());
    }
    residuals.sort_by(f64::total_cmp);
    let jump_residual = ResidualSummary {
        pairs: residuals.len(),
        skipped,
        median: quantile(&residuals, 0.5),
        p90: quantile(&residuals, 0.9),
        max: residuals.last().copied().unwrap_or(0.0),
        scale,
    };

    // Monogenicity: |D Phi| at interior probes on both sides, with the
    // finite-difference step well above the singular edge so the dropped
    // cell reads as part of the measured quadrature error.
    let edge = cfg.quadrature.singular_edge;
    let phi_at_edge = |p: &Point, e: f64, minus: bool| -> Result<Multivector> {
        let t = engine.eval_refined(p, e)?;
        Ok(match (branch, minus) {
            (Side::Inner, false) => f_tilde.eval(p).sub(&t),
            (Side::Inner, true) => t.scale(-1.0),
            (Side::Outer, false) => t,
            (Side::Outer, true) => t.sub(&integrand_src(p)),
        })
    };
    let mut candidates: Vec<&WhitneyCube> = cubes
        .iter()
        .filter(|c| c.cube.side() >= 16.0 * edge)
        .collect();
    if candidates.is_empty() {
        let coarsest = cubes
            .iter()
            .map(|c| c.cube.level)
            .min()
            .expect("nonempty cube list");
        candidates = cubes.iter().filter(|c| c.cube.level == coarsest).collect();
    }
    let mut mono_res = Vec::new();
    let mut mono_est = Vec::new();
    let mut max_ratio = 0.0f64;
    let domain_side = branch;
    for _ in 0..cfg.monogenicity_probes {
        // A point on the integration side: a random coarse cube center.
        let wc = candidates[rng.gen_range(0..candidates.len())];
        let p_same = wc.cube.center();
        // A point on the opposite side: off the surface beyond the hull.
        let p_far = loop {
            let mut dir = Point::zeros(dim);
            for j in 0..dim {
                dir.set(j, rng.gen_range(-1.0..1.0));
            }
            if dir.norm() < 1e-6 {
                continue;
            }
            let r = circum * rng.gen_range(1.3..2.0);
            let q = center.add(&dir.scale(r / dir.norm()));
            if !surface.contains(&q) {
                break q;
            }
        };
        for (q, minus) in [
            (p_same, domain_side == Side::Outer),
            (p_far, domain_side == Side::Inner),
        ] {
            let d = surface.distance(&q);
            let h = (0.02f64).min(d / 8.0).max(4.0 * f64::EPSILON);
            let g1 = cauchy_riemann(|y| phi_at_edge(y, edge, minus), &q, h)?;
            let g2 = cauchy_riemann(|y| phi_at_edge(y, 0.5 * edge, minus), &q, h)?;
            let res = g2.norm();
            let est = g1.sub(&g2).norm();
            mono_res.push(res);
            mono_est.push(est);
            if est > 0.0 {
                max_ratio = max_ratio.max(res / est);
            }
        }
    }
    mono_res.sort_by(f64::total_cmp);
    mono_est.sort_by(f64::total_cmp);
    let monogenicity = MonogenicitySummary {
        probes: mono_res.len(),
        median_residual: quantile(&mono_res, 0.5),
        max_residual: mono_res.last().copied().unwrap_or(0.0),
        median_error_estimate: quantile(&mono_est, 0.5),
        max_ratio,
    };

    // Decay of |Phi-| along random rays.
    let mut norms = Vec::new();
    let mut slopes = Vec::new();
    for _ in 0..cfg.decay_directions {
        let mut dir = Point::zeros(dim);
        loop {
            for j in 0..dim {
                dir.set(j, rng.gen_range(-1.0..1.0));
            }
            if dir.norm() > 1e-6 {
                break;
            }
        }
        let dir = dir.scale(1.0 / dir.norm());
        let mut row = Vec::new();
        let mut pts = Vec::new();
        // Values at rounding-noise level (degenerate data: zero or
        // constant boundary values make the true field vanish) carry no
        // decay information and would fit a garbage slope.
        let floor = 1e-12 * scale;
        for &mult in &cfg.decay_radii {
            let x = center.add(&dir.scale(mult * circum));
            let v = phi_minus.eval(&x).norm();
            row.push(v);
            if v > floor {
                pts.push(((mult * circum).ln(), v.ln()));
            }
        }
        if pts.len() >= 2 {
            slopes.push(fit_slope(&pts));
        }
        norms.push(row);
    }
    let slope_mean = if slopes.is_empty() {
        None
    } else {
        Some(slopes.iter().sum::<f64>() / slopes.len() as f64)
    };
    let decay = DecayDiagnostics {
        radius: circum,
        radii: cfg.decay_radii.clone(),
        norms,
        slopes: slopes.clone(),
        slope_mean,
        expected: -(n as f64),
    };

    let dim_lower = cfg.dim_lower.unwrap_or(n as f64);
    let diagnostics = JumpDiagnostics {
        nu: data.nu(),
        hoelder_constant: data.hoelder_constant(),
        value_scale: scale,
        m_abs,
        solvability_threshold: threshold,
        solvable,
        forced: !solvable,
        branch: match branch {
            Side::Inner => "inner".into(),
            Side::Outer => "outer".into(),
        },
        uniqueness_window: uniqueness_window(data.nu(), m_abs, dim_lower, n),
        k_max: cfg.k_max,
        cube_count: cubes.len(),
        uncovered_volume: stats.uncovered_volume,
        extension_derivative_constant: ext.derivative_constant(),
        jump_residual,
        monogenicity,
        decay,
    };

    Ok(JumpSolution {
        phi_plus,
        phi_minus,
        diagnostics,
    })
}
