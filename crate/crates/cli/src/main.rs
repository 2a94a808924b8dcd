//! Batch driver for the `monofract` library.
//!
//! Five subcommands cover the pipeline end to end:
//!
//! * `surface` — build a surface (fractal family or flat calibration
//!   solid) and write its JSON description plus optional boundary samples;
//! * `dimension` — box-counting dimension with a log-log regression,
//!   compared against the closed form where one is known;
//! * `marcinkiewicz` — critical integrability exponents by bisection and
//!   the `m >= (n+1) - dim` inequality check;
//! * `jump` — solve the jump problem for synthesized Hölder boundary data
//!   and report residual/monogenicity/decay diagnostics;
//! * `report` — sweep an `(alpha, beta)` grid chaining dimension,
//!   exponent, and the inequality check per pair.
//!
//! Any flag may instead be supplied through `--config file.json`, a flat
//! JSON object keyed by the long flag names; explicit flags win. Reports
//! are JSON, series are CSV, and every command is deterministic given its
//! flags and seeds, so reruns are byte-identical. Exit status: `0` when
//! every requested check passed its tolerance, `1` when a check failed,
//! `2` on invalid input or a computation error. Thread count follows
//! `RAYON_NUM_THREADS`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use monofract::analysis::{field_slice_csv, solve_jump, HoelderData, JumpBranch, JumpConfig};
use monofract::clifford::Multivector;
use monofract::geom::Point;
use monofract::grid::{box_count, fit_dimension, DimensionEstimate, Side};
use monofract::marcinkiewicz::{
    check_theorem_inequality, estimate_exponent, estimate_exponent_side, SideExponent,
    TheoremCheck,
};
use monofract::surface::{FaceId, SlabFace, SurfaceSpec, DEFAULT_DEPTH};
use monofract::{Error, Result};

/// Compact CSV-safe label for the face a boundary sample landed on.
fn face_label(f: &FaceId) -> String {
    fn hl(side: bool) -> &'static str {
        if side {
            "hi"
        } else {
            "lo"
        }
    }
    match f {
        FaceId::QSide { axis, side } => format!("q_side_{axis}_{}", hl(*side)),
        FaceId::QTop => "q_top".into(),
        FaceId::Slab { level, index, face } => {
            let tag = match face {
                SlabFace::XLow => "x_lo".into(),
                SlabFace::XHigh => "x_hi".into(),
                SlabFace::Top => "top".into(),
                SlabFace::Cross { axis, side } => format!("cross_{axis}_{}", hl(*side)),
            };
            format!("slab_{level}_{index}_{tag}")
        }
        FaceId::UnionFace { box_idx, axis, side } => {
            format!("union_{box_idx}_{axis}_{}", hl(*side))
        }
    }
}

#[derive(Parser)]
#[command(
    name = "monofract",
    version,
    about = "Fractal surfaces, dimension and exponent estimation, and the monogenic jump problem"
)]
struct Cli {
    /// JSON object supplying defaults for omitted flags (keys = long flag names).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surface and write its JSON description.
    Surface(SurfaceCmd),
    /// Estimate the box-counting dimension.
    Dimension(DimensionCmd),
    /// Estimate critical integrability exponents and check the dimension bound.
    Marcinkiewicz(MarcinkiewiczCmd),
    /// Solve the jump problem for synthesized boundary data.
    Jump(JumpCmd),
    /// Sweep an (alpha, beta) grid: dimension + exponent + bound per pair.
    Report(ReportCmd),
}

// ---------------------------------------------------------------- config

/// Defaults loaded from `--config`: a flat JSON object consulted for any
/// flag the command line leaves unset.
struct Ctx(serde_json::Value);

impl Ctx {
    fn load(path: Option<&PathBuf>) -> Result<Ctx> {
        let Some(p) = path else {
            return Ok(Ctx(serde_json::Value::Null));
        };
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p)?)?;
        if !v.is_object() {
            return Err(Error::invalid("config", "config file must hold a JSON object"));
        }
        Ok(Ctx(v))
    }

    fn f64v(&self, k: &str) -> Option<f64> {
        self.0.get(k)?.as_f64()
    }

    fn usizev(&self, k: &str) -> Option<usize> {
        self.0.get(k)?.as_u64().map(|x| x as usize)
    }

    fn u64v(&self, k: &str) -> Option<u64> {
        self.0.get(k)?.as_u64()
    }

    fn u32v(&self, k: &str) -> Option<u32> {
        self.0.get(k)?.as_u64().map(|x| x as u32)
    }

    fn i32v(&self, k: &str) -> Option<i32> {
        self.0.get(k)?.as_i64().map(|x| x as i32)
    }

    fn boolv(&self, k: &str) -> Option<bool> {
        self.0.get(k)?.as_bool()
    }

    fn stringv(&self, k: &str) -> Option<String> {
        self.0.get(k)?.as_str().map(str::to_owned)
    }

    /// List-valued key: a JSON array of numbers or a comma-separated string.
    fn listv(&self, k: &str) -> Option<Vec<f64>> {
        match self.0.get(k)? {
            serde_json::Value::Array(a) => a.iter().map(|v| v.as_f64()).collect(),
            serde_json::Value::String(s) => parse_list(s).ok(),
            _ => None,
        }
    }

    /// Enum-valued key parsed with clap's value-name rules.
    fn enumv<E: ValueEnum>(&self, k: &str) -> Option<E> {
        let s = self.stringv(k)?;
        E::from_str(&s, true).ok()
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid("list", format!("bad number {t:?}: {e}")))
        })
        .collect()
}

fn parse_point(s: &str) -> Result<Point> {
    let v = parse_list(s)?;
    if v.is_empty() || v.len() > 6 {
        return Err(Error::invalid("point", "expected 1..=6 comma-separated coordinates"));
    }
    Ok(Point::new(&v))
}

fn write_text(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

// ------------------------------------------------------- surface selection

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Slab-decorated cube surface with parameters alpha, beta.
    Fractal,
    /// Unit cube: flat calibration surface.
    Cube,
    /// L-shaped box union: flat but non-convex.
    LShape,
}

/// How to obtain the surface every estimator runs against.
#[derive(Args, Clone)]
struct SurfaceSel {
    /// Load a surface description written by the `surface` command.
    #[arg(long, value_name = "PATH")]
    surface: Option<PathBuf>,
    /// Built-in surface family (ignored when --surface is given).
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Slab-width exponent (>= 1), fractal preset only.
    #[arg(long)]
    alpha: Option<f64>,
    /// Slab-count exponent (>= 2), fractal preset only.
    #[arg(long)]
    beta: Option<f64>,
    /// Construction depth of the fractal preset.
    #[arg(long)]
    nmax: Option<u32>,
    /// Ambient dimension.
    #[arg(long)]
    dim: Option<usize>,
}

impl SurfaceSel {
    fn resolve(&self, ctx: &Ctx) -> Result<SurfaceSpec> {
        let path = self
            .surface
            .clone()
            .or_else(|| ctx.stringv("surface").map(PathBuf::from));
        if let Some(p) = path {
            return SurfaceSpec::from_json(&fs::read_to_string(&p)?);
        }
        let preset = self
            .preset
            .or_else(|| ctx.enumv("preset"))
            .unwrap_or(Preset::Fractal);
        let dim = self.dim.or_else(|| ctx.usizev("dim")).unwrap_or(3);
        match preset {
            Preset::Fractal => {
                let alpha = self
                    .alpha
                    .or_else(|| ctx.f64v("alpha"))
                    .ok_or_else(|| Error::invalid("alpha", "required for the fractal preset"))?;
                let beta = self
                    .beta
                    .or_else(|| ctx.f64v("beta"))
                    .ok_or_else(|| Error::invalid("beta", "required for the fractal preset"))?;
                let depth = self
                    .nmax
                    .or_else(|| ctx.u32v("nmax"))
                    .unwrap_or(DEFAULT_DEPTH);
                SurfaceSpec::fractal(dim, alpha, beta, depth)
            }
            Preset::Cube => SurfaceSpec::unit_cube(dim),
            Preset::LShape => SurfaceSpec::l_shape(dim),
        }
    }
}

/// Compact identification of a surface for reports.
fn surface_summary(s: &SurfaceSpec) -> serde_json::Value {
    match s {
        SurfaceSpec::Fractal(f) => serde_json::json!({
            "kind": "fractal",
            "dim": f.dim(),
            "alpha": f.alpha(),
            "beta": f.beta(),
            "effective_depth": s.effective_depth(),
        }),
        SurfaceSpec::BoxUnion(_) => serde_json::json!({
            "kind": "box_union",
            "dim": s.dim(),
        }),
    }
}

/// Exact dimension of the surface when one is known: the closed form for
/// the three-dimensional fractal family, the flat value `d - 1` for box
/// unions (finitely many flat faces).
fn closed_dimension(s: &SurfaceSpec) -> Option<f64> {
    if let Ok(p) = s.predictions() {
        return Some(p.dim_minkowski);
    }
    match s {
        SurfaceSpec::BoxUnion(_) => Some(s.dim() as f64 - 1.0),
        SurfaceSpec::Fractal(_) => None,
    }
}

/// Exact inner exponent when known: the closed form for the fractal
/// family, `1` for box unions (a flat face meets the distance integral
/// like a hyperplane).
fn closed_m_plus(s: &SurfaceSpec) -> Option<f64> {
    if let Ok(p) = s.predictions() {
        return Some(p.m_plus);
    }
    match s {
        SurfaceSpec::BoxUnion(_) => Some(1.0),
        SurfaceSpec::Fractal(_) => None,
    }
}

// -------------------------------------------------------------- surface

#[derive(Args)]
struct SurfaceCmd {
    #[command(flatten)]
    sel: SurfaceSel,
    /// Write the surface description here.
    #[arg(short, long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Sample this many boundary points (requires --samples-out).
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for boundary sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the boundary samples as CSV here.
    #[arg(long, value_name = "PATH")]
    samples_out: Option<PathBuf>,
}

fn cmd_surface(cmd: &SurfaceCmd, ctx: &Ctx) -> Result<bool> {
    let spec = cmd.sel.resolve(ctx)?;
    println!("surface: {}", surface_summary(&spec));
    if let Ok(p) = spec.predictions() {
        println!(
            "closed forms: dimension {:.4}, inner exponent {:.4} (strict gap {:.4})",
            p.dim_minkowski, p.m_plus, p.strict_gap
        );
    }
    let out = cmd.out.clone().or_else(|| ctx.stringv("out").map(PathBuf::from));
    if let Some(path) = out {
        write_text(&path, &spec.to_json()?)?;
    }
    let samples = cmd.samples.or_else(|| ctx.usizev("samples"));
    if let Some(count) = samples {
        let seed = cmd.seed.or_else(|| ctx.u64v("seed")).unwrap_or(0);
        let path = cmd
            .samples_out
            .clone()
            .or_else(|| ctx.stringv("samples-out").map(PathBuf::from))
            .ok_or_else(|| Error::invalid("samples_out", "required when --samples is given"))?;
        let pts = spec.sample_boundary(count, seed);
        let d = spec.dim();
        let mut csv = String::new();
        for j in 0..d {
            csv.push_str(&format!("x{j},"));
        }
        csv.push_str("face");
        for j in 0..d {
            csv.push_str(&format!(",n{j}"));
        }
        csv.push('\n');
        for s in &pts {
            for j in 0..d {
                csv.push_str(&format!("{},", s.point.get(j)));
            }
            csv.push_str(&face_label(&s.face));
            for j in 0..d {
                csv.push_str(&format!(",{}", s.normal.get(j)));
            }
            csv.push('\n');
        }
        write_text(&path, &csv)?;
    }
    Ok(true)
}

// ------------------------------------------------------------ dimension

#[derive(Args)]
struct DimensionCmd {
    #[command(flatten)]
    sel: SurfaceSel,
    /// Coarsest grid level of the regression window.
    #[arg(long)]
    kmin: Option<i32>,
    /// Finest grid level of the regression window.
    #[arg(long)]
    kmax: Option<i32>,
    /// Allowed |estimate - closed form| where a closed form exists.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Write the JSON report here.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Write the per-level counts as CSV here.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct DimensionReport {
    surface: serde_json::Value,
    estimate: DimensionEstimate,
    closed_form: Option<f64>,
    difference: Option<f64>,
    tolerance: f64,
    passed: bool,
}

fn cmd_dimension(cmd: &DimensionCmd, ctx: &Ctx) -> Result<bool> {
    let spec = cmd.sel.resolve(ctx)?;
    let kmin = cmd.kmin.or_else(|| ctx.i32v("kmin")).unwrap_or(4);
    let kmax = cmd.kmax.or_else(|| ctx.i32v("kmax")).unwrap_or(10);
    let tolerance = cmd.tolerance.or_else(|| ctx.f64v("tolerance")).unwrap_or(0.08);
    let series = box_count(&spec, kmin, kmax)?;
    let fit = fit_dimension(&series, kmin, kmax)?;
    let closed = closed_dimension(&spec);
    let difference = closed.map(|c| (fit.dimension - c).abs());
    let passed = difference.is_none_or(|d| d <= tolerance);
    println!(
        "box-counting dimension {:.4} (rms residual {:.3}, levels {}..={})",
        fit.dimension, fit.rms_residual, kmin, kmax
    );
    match (closed, difference) {
        (Some(c), Some(d)) => println!(
            "closed form {:.4}; |difference| {:.4} vs tolerance {}: {}",
            c,
            d,
            tolerance,
            if passed { "pass" } else { "FAIL" }
        ),
        _ => println!("no closed form for this surface; nothing to check"),
    }
    if let Some(path) = cmd.csv.clone().or_else(|| ctx.stringv("csv").map(PathBuf::from)) {
        write_text(&path, &series.to_csv())?;
    }
    if let Some(path) = cmd
        .report
        .clone()
        .or_else(|| ctx.stringv("report").map(PathBuf::from))
    {
        let rep = DimensionReport {
            surface: surface_summary(&spec),
            estimate: fit,
            closed_form: closed,
            difference,
            tolerance,
            passed,
        };
        write_text(&path, &serde_json::to_string_pretty(&rep)?)?;
    }
    Ok(passed)
}

// -------------------------------------------------------- marcinkiewicz

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Inner,
    Outer,
    Both,
}

#[derive(Args)]
struct MarcinkiewiczCmd {
    #[command(flatten)]
    sel: SurfaceSel,
    /// Whitney depth of the distance-integral evaluation.
    #[arg(long)]
    kmax: Option<i32>,
    /// Bisection bracket half-width (>= 0.01).
    #[arg(long)]
    precision: Option<f64>,
    /// Which side(s) of the surface to estimate.
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    /// Allowed |inner estimate - closed form| where a closed form exists.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Error budget of the dimension estimate entering the bound check.
    #[arg(long)]
    dim_error: Option<f64>,
    /// Write the JSON report here.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Write the bisection trace as CSV here.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

#[derive(Serialize)]
struct MarcinkiewiczReport {
    surface: serde_json::Value,
    side: String,
    m_plus: Option<f64>,
    m_minus: Option<f64>,
    m_abs: Option<f64>,
    precision: f64,
    inconclusive: usize,
    closed_form: Option<f64>,
    difference: Option<f64>,
    tolerance: f64,
    theorem: Option<TheoremCheck>,
    passed: bool,
}

fn traces_csv(sides: &[&SideExponent]) -> String {
    let mut s = String::from("side,iteration,p,p_low,p_high,verdict\n");
    for se in sides {
        let name = match se.side {
            Side::Inner => "inner",
            Side::Outer => "outer",
        };
        for t in &se.trace {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                name, t.iteration, t.p, t.p_low, t.p_high, t.verdict
            ));
        }
    }
    s
}

fn cmd_marcinkiewicz(cmd: &MarcinkiewiczCmd, ctx: &Ctx) -> Result<bool> {
    let spec = cmd.sel.resolve(ctx)?;
    let kmax = cmd.kmax.or_else(|| ctx.i32v("kmax")).unwrap_or(10);
    let precision = cmd.precision.or_else(|| ctx.f64v("precision")).unwrap_or(0.02);
    let side = cmd.side.or_else(|| ctx.enumv("side")).unwrap_or(SideArg::Both);
    let tolerance = cmd.tolerance.or_else(|| ctx.f64v("tolerance")).unwrap_or(0.05);
    let dim_error = cmd.dim_error.or_else(|| ctx.f64v("dim-error")).unwrap_or(0.08);
    let closed = closed_m_plus(&spec);

    let (m_plus, m_minus, m_abs, inconclusive, theorem, trace_sides);
    let side_name;
    let inner_storage;
    let estimate_storage;
    match side {
        SideArg::Both => {
            let est = estimate_exponent(&spec, precision, kmax)?;
            println!(
                "critical exponents: inner {:.4}, outer {:.4}, max {:.4} (half-width {:.3})",
                est.m_plus, est.m_minus, est.m_abs, precision
            );
            // Dimension estimate feeding the lower-bound check; its window
            // tops out where the counting stays affordable.
            let dk = kmax.min(10);
            let dk_lo = 4.min(dk - 2).max(0);
            let series = box_count(&spec, dk_lo, dk)?;
            let fit = fit_dimension(&series, dk_lo, dk)?;
            let check = check_theorem_inequality(&est, fit.dimension, dim_error, spec.dim());
            println!(
                "bound check: m_abs {:.4} >= {:.4} = {} - dim? margin {:+.4} (combined error {:.3}): {}",
                check.m_abs,
                check.bound,
                spec.dim(),
                check.margin,
                check.combined_error,
                if check.holds { "holds" } else { "VIOLATED" }
            );
            m_plus = Some(est.m_plus);
            m_minus = Some(est.m_minus);
            m_abs = Some(est.m_abs);
            inconclusive = est.inconclusive;
            theorem = Some(check);
            side_name = "both";
            estimate_storage = est;
            trace_sides = vec![&estimate_storage.inner, &estimate_storage.outer];
        }
        SideArg::Inner | SideArg::Outer => {
            let s = if side == SideArg::Inner { Side::Inner } else { Side::Outer };
            let est = estimate_exponent_side(&spec, s, precision, kmax)?;
            println!(
                "critical exponent ({}): {:.4} (half-width {:.3}, {} evaluations)",
                if s == Side::Inner { "inner" } else { "outer" },
                est.exponent,
                precision,
                est.evaluations
            );
            m_plus = (s == Side::Inner).then_some(est.exponent);
            m_minus = (s == Side::Outer).then_some(est.exponent);
            m_abs = None;
            inconclusive = est.inconclusive;
            theorem = None;
            side_name = if s == Side::Inner { "inner" } else { "outer" };
            inner_storage = est;
            trace_sides = vec![&inner_storage];
        }
    }

    // The closed form predicts the inner exponent.
    let difference = match (closed, m_plus) {
        (Some(c), Some(m)) => Some((m - c).abs()),
        _ => None,
    };
    let exp_ok = difference.is_none_or(|d| d <= tolerance);
    if let (Some(c), Some(d)) = (closed, difference) {
        println!(
            "closed form (inner) {:.4}; |difference| {:.4} vs tolerance {}: {}",
            c,
            d,
            tolerance,
            if exp_ok { "pass" } else { "FAIL" }
        );
    }
    let bound_ok = theorem.as_ref().is_none_or(|t| t.holds);
    let passed = exp_ok && bound_ok;

    if let Some(path) = cmd.trace.clone().or_else(|| ctx.stringv("trace").map(PathBuf::from)) {
        write_text(&path, &traces_csv(&trace_sides))?;
    }
    if let Some(path) = cmd
        .report
        .clone()
        .or_else(|| ctx.stringv("report").map(PathBuf::from))
    {
        let rep = MarcinkiewiczReport {
            surface: surface_summary(&spec),
            side: side_name.into(),
            m_plus,
            m_minus,
            m_abs,
            precision,
            inconclusive,
            closed_form: closed,
            difference,
            tolerance,
            theorem,
            passed,
        };
        write_text(&path, &serde_json::to_string_pretty(&rep)?)?;
    }
    Ok(passed)
}

// ---------------------------------------------------------------- jump

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DataKind {
    /// f = 0: the solution must vanish identically.
    Zero,
    /// f = value * e_0: splits into (constant, 0).
    Constant,
    /// f = value * |x - anchor|^nu * e_0: genuinely Hölder data.
    Radial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BranchArg {
    Auto,
    Inner,
    Outer,
}

#[derive(Args)]
struct JumpCmd {
    #[command(flatten)]
    sel: SurfaceSel,
    /// Hölder exponent of the synthesized data.
    #[arg(long)]
    nu: Option<f64>,
    /// Data family to synthesize on the boundary.
    #[arg(long, value_enum)]
    data: Option<DataKind>,
    /// Amplitude of the synthesized data.
    #[arg(long)]
    value: Option<f64>,
    /// Anchor point for radial data, as comma-separated coordinates
    /// (default: a boundary sample).
    #[arg(long)]
    anchor: Option<String>,
    /// Number of boundary samples carrying the data.
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for sampling and probe placement.
    #[arg(long)]
    seed: Option<u64>,
    /// Whitney depth of the integration region.
    #[arg(long)]
    kmax: Option<i32>,
    /// Integration side.
    #[arg(long, value_enum)]
    branch: Option<BranchArg>,
    /// Run even when the solvability condition fails.
    #[arg(long)]
    force: bool,
    /// Allowed median jump residual relative to the data scale.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Straddling probe pairs for the residual diagnostic.
    #[arg(long)]
    probe_pairs: Option<usize>,
    /// Offset of the straddling probes from the surface.
    #[arg(long)]
    probe_offset: Option<f64>,
    /// Write the JSON diagnostics report here.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Write a plane slice of the inner solution as CSV here.
    #[arg(long, value_name = "PATH")]
    slice: Option<PathBuf>,
    /// Axis normal to the slice plane.
    #[arg(long)]
    slice_axis: Option<usize>,
    /// Coordinate of the slice plane along that axis.
    #[arg(long)]
    slice_offset: Option<f64>,
    /// Grid nodes per axis in the slice.
    #[arg(long)]
    slice_res: Option<usize>,
}

#[derive(Serialize)]
struct JumpReport {
    surface: serde_json::Value,
    data_kind: String,
    samples: usize,
    tolerance: f64,
    relative_median: f64,
    passed: bool,
    diagnostics: monofract::analysis::JumpDiagnostics,
}

fn cmd_jump(cmd: &JumpCmd, ctx: &Ctx) -> Result<bool> {
    let spec = cmd.sel.resolve(ctx)?;
    let d = spec.dim();
    let nu = cmd.nu.or_else(|| ctx.f64v("nu")).unwrap_or(0.9);
    let kind = cmd.data.or_else(|| ctx.enumv("data")).unwrap_or(DataKind::Radial);
    let value = cmd.value.or_else(|| ctx.f64v("value")).unwrap_or(1.0);
    let samples = cmd.samples.or_else(|| ctx.usizev("samples")).unwrap_or(2000);
    let seed = cmd.seed.or_else(|| ctx.u64v("seed")).unwrap_or(7);
    let kmax = cmd.kmax.or_else(|| ctx.i32v("kmax")).unwrap_or(8);
    let branch = cmd.branch.or_else(|| ctx.enumv("branch")).unwrap_or(BranchArg::Auto);
    let tolerance = cmd.tolerance.or_else(|| ctx.f64v("tolerance")).unwrap_or(0.1);

    let anchor = match cmd.anchor.clone().or_else(|| ctx.stringv("anchor")) {
        Some(s) => parse_point(&s)?,
        None => spec.sample_boundary(1, seed ^ 0x616e_6368)[0].point,
    };
    if anchor.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: anchor.dim(),
        });
    }
    let data_fn: Box<dyn Fn(&Point) -> Multivector> = match kind {
        DataKind::Zero => Box::new(move |_: &Point| Multivector::zero(d - 1).expect("valid dim")),
        DataKind::Constant => {
            Box::new(move |_: &Point| Multivector::scalar(d - 1, value).expect("valid dim"))
        }
        DataKind::Radial => Box::new(move |p: &Point| {
            Multivector::scalar(d - 1, value * p.dist(&anchor).powf(nu)).expect("valid dim")
        }),
    };
    let data = HoelderData::from_boundary(&spec, samples, seed, nu, data_fn)?;

    let mut jc = JumpConfig {
        k_max: kmax,
        seed: seed ^ 0x7072_6f62,
        branch: match branch {
            BranchArg::Auto => JumpBranch::Auto,
            BranchArg::Inner => JumpBranch::Inner,
            BranchArg::Outer => JumpBranch::Outer,
        },
        force: cmd.force || ctx.boolv("force").unwrap_or(false),
        ..JumpConfig::default()
    };
    if let Some(pp) = cmd.probe_pairs.or_else(|| ctx.usizev("probe-pairs")) {
        jc.probe_pairs = pp;
    }
    if let Some(po) = cmd.probe_offset.or_else(|| ctx.f64v("probe-offset")) {
        jc.probe_offset = po;
    }

    let sol = match solve_jump(&spec, &data, &jc) {
        Ok(s) => s,
        Err(Error::NotSolvable { nu, threshold }) => {
            return Err(Error::invalid(
                "nu",
                format!(
                    "solvability condition fails: nu = {nu} <= threshold {threshold:.4}; \
                     pass --force to run anyway"
                ),
            ));
        }
        Err(e) => return Err(e),
    };
    let diag = &sol.diagnostics;
    let rel = diag.jump_residual.relative_median();
    let passed = rel <= tolerance;
    println!(
        "jump solved on the {} side: {} cubes at depth {}",
        diag.branch, diag.cube_count, diag.k_max
    );
    println!(
        "residual over {} straddling pairs: median {:.3e} (relative {:.3e}) vs tolerance {}: {}",
        diag.jump_residual.pairs,
        diag.jump_residual.median,
        rel,
        tolerance,
        if passed { "pass" } else { "FAIL" }
    );
    println!(
        "monogenicity: median |D phi| {:.3e} (error bar {:.3e}); decay slope {} (expected {})",
        diag.monogenicity.median_residual,
        diag.monogenicity.median_error_estimate,
        diag.decay
            .slope_mean
            .map_or("n/a".into(), |s| format!("{s:.2}")),
        diag.decay.expected
    );

    if let Some(path) = cmd.slice.clone().or_else(|| ctx.stringv("slice").map(PathBuf::from)) {
        let axis = cmd
            .slice_axis
            .or_else(|| ctx.usizev("slice-axis"))
            .unwrap_or(d - 1);
        let domain = *sol.phi_plus.domain();
        let offset = cmd
            .slice_offset
            .or_else(|| ctx.f64v("slice-offset"))
            .unwrap_or_else(|| domain.center().get(axis));
        let res = cmd.slice_res.or_else(|| ctx.usizev("slice-res")).unwrap_or(33);
        write_text(&path, &field_slice_csv(&sol.phi_plus, axis, offset, &domain, res)?)?;
    }
    if let Some(path) = cmd
        .report
        .clone()
        .or_else(|| ctx.stringv("report").map(PathBuf::from))
    {
        let rep = JumpReport {
            surface: surface_summary(&spec),
            data_kind: format!("{kind:?}").to_lowercase(),
            samples,
            tolerance,
            relative_median: rel,
            passed,
            diagnostics: sol.diagnostics.clone(),
        };
        write_text(&path, &serde_json::to_string_pretty(&rep)?)?;
    }
    Ok(passed)
}

// -------------------------------------------------------------- report

#[derive(Args)]
struct ReportCmd {
    /// Comma-separated alpha values of the sweep.
    #[arg(long)]
    alphas: Option<String>,
    /// Comma-separated beta values of the sweep.
    #[arg(long)]
    betas: Option<String>,
    /// Construction depth of each surface.
    #[arg(long)]
    nmax: Option<u32>,
    /// Dimension regression window.
    #[arg(long)]
    kmin: Option<i32>,
    #[arg(long)]
    kmax: Option<i32>,
    /// Whitney depth of the exponent estimation.
    #[arg(long)]
    exp_kmax: Option<i32>,
    /// Bisection precision.
    #[arg(long)]
    precision: Option<f64>,
    /// Dimension tolerance.
    #[arg(long)]
    tol_dim: Option<f64>,
    /// Exponent tolerance.
    #[arg(long)]
    tol_exp: Option<f64>,
    /// Dimension error budget for the bound check.
    #[arg(long)]
    dim_error: Option<f64>,
    /// Write the JSON report array here.
    #[arg(short, long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the one-line-per-pair summary CSV here.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct SweepEntry {
    alpha: f64,
    beta: f64,
    dim_estimate: f64,
    dim_closed: f64,
    dim_difference: f64,
    m_plus_estimate: f64,
    m_minus_estimate: f64,
    m_abs: f64,
    m_plus_closed: f64,
    m_plus_difference: f64,
    strict_gap: f64,
    is_strict: bool,
    theorem: TheoremCheck,
    passed_dimension: bool,
    passed_exponent: bool,
    passed: bool,
}

fn cmd_report(cmd: &ReportCmd, ctx: &Ctx) -> Result<bool> {
    let alphas = match cmd.alphas.as_deref() {
        Some(s) => parse_list(s)?,
        None => ctx.listv("alphas").unwrap_or_else(|| vec![1.0, 1.3, 2.0]),
    };
    let betas = match cmd.betas.as_deref() {
        Some(s) => parse_list(s)?,
        None => ctx.listv("betas").unwrap_or_else(|| vec![2.0, 2.1, 2.5]),
    };
    let nmax = cmd.nmax.or_else(|| ctx.u32v("nmax")).unwrap_or(DEFAULT_DEPTH);
    let kmin = cmd.kmin.or_else(|| ctx.i32v("kmin")).unwrap_or(4);
    let kmax = cmd.kmax.or_else(|| ctx.i32v("kmax")).unwrap_or(10);
    let exp_kmax = cmd.exp_kmax.or_else(|| ctx.i32v("exp-kmax")).unwrap_or(10);
    let precision = cmd.precision.or_else(|| ctx.f64v("precision")).unwrap_or(0.02);
    let tol_dim = cmd.tol_dim.or_else(|| ctx.f64v("tol-dim")).unwrap_or(0.08);
    let tol_exp = cmd.tol_exp.or_else(|| ctx.f64v("tol-exp")).unwrap_or(0.05);
    let dim_error = cmd.dim_error.or_else(|| ctx.f64v("dim-error")).unwrap_or(0.08);

    let mut entries = Vec::new();
    let mut all_pass = true;
    for &alpha in &alphas {
        for &beta in &betas {
            let spec = SurfaceSpec::fractal(3, alpha, beta, nmax)?;
            let pred = spec.predictions()?;
            let series = box_count(&spec, kmin, kmax)?;
            let fit = fit_dimension(&series, kmin, kmax)?;
            let est = estimate_exponent(&spec, precision, exp_kmax)?;
            let check = check_theorem_inequality(&est, fit.dimension, dim_error, 3);
            let dim_diff = (fit.dimension - pred.dim_minkowski).abs();
            let exp_diff = (est.m_plus - pred.m_plus).abs();
            let passed_dimension = dim_diff <= tol_dim;
            let passed_exponent = exp_diff <= tol_exp;
            let passed = passed_dimension && passed_exponent && check.holds;
            all_pass &= passed;
            println!(
                "alpha {alpha} beta {beta}: dim {:.4} (closed {:.4}) exp {:.4} (closed {:.4}) \
                 bound margin {:+.4}: {}",
                fit.dimension,
                pred.dim_minkowski,
                est.m_plus,
                pred.m_plus,
                check.margin,
                if passed { "pass" } else { "FAIL" }
            );
            entries.push(SweepEntry {
                alpha,
                beta,
                dim_estimate: fit.dimension,
                dim_closed: pred.dim_minkowski,
                dim_difference: dim_diff,
                m_plus_estimate: est.m_plus,
                m_minus_estimate: est.m_minus,
                m_abs: est.m_abs,
                m_plus_closed: pred.m_plus,
                m_plus_difference: exp_diff,
                strict_gap: pred.strict_gap,
                is_strict: pred.is_strict,
                theorem: check,
                passed_dimension,
                passed_exponent,
                passed,
            });
        }
    }

    if let Some(path) = cmd.csv.clone().or_else(|| ctx.stringv("csv").map(PathBuf::from)) {
        let mut csv = String::from(
            "alpha,beta,dim_estimate,dim_closed,m_plus_estimate,m_plus_closed,m_abs,bound,margin,passed\n",
        );
        for e in &entries {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.alpha,
                e.beta,
                e.dim_estimate,
                e.dim_closed,
                e.m_plus_estimate,
                e.m_plus_closed,
                e.m_abs,
                e.theorem.bound,
                e.theorem.margin,
                e.passed
            ));
        }
        write_text(&path, &csv)?;
    }
    if let Some(path) = cmd.out.clone().or_else(|| ctx.stringv("out").map(PathBuf::from)) {
        write_text(&path, &serde_json::to_string_pretty(&entries)?)?;
    }
    println!(
        "{}/{} parameter pairs passed",
        entries.iter().filter(|e| e.passed).count(),
        entries.len()
    );
    Ok(all_pass)
}

// ---------------------------------------------------------------- main

fn run(cli: &Cli) -> Result<bool> {
    let ctx = Ctx::load(cli.config.as_ref())?;
    match &cli.command {
        Command::Surface(c) => cmd_surface(c, &ctx),
        Command::Dimension(c) => cmd_dimension(c, &ctx),
        Command::Marcinkiewicz(c) => cmd_marcinkiewicz(c, &ctx),
        Command::Jump(c) => cmd_jump(c, &ctx),
        Command::Report(c) => cmd_report(c, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
