//! `aads`: command-line front end. Every subcommand validates a `RunConfig`
//! (flags merged over an optional `--config` JSON file), calls one library
//! operation and writes its artifacts.

use aads_core::experiments::{self, OverlapOptions};
use aads_core::fefferman_graham::{fg_constraint_residual, fg_expand, BoundaryData};
use aads_core::geodesic::{self, GeodesicState, StopRule};
use aads_core::io::{csv, to_json};
use aads_core::modular_geometry::{standard_ads_wedge, HorizonSide, ModularFrame, APPROACH};
use aads_core::regions::{self, CausalMode, ConeSide, Sampler, VolumeRegion};
use aads_core::spacetimes::{build_model, BoundaryPoint, Family, ModelSpec};
use aads_core::tensor_core::{curvature_at, einstein_residual, metric_at};
use aads_core::AadsError;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "aads", version, about = "Numerical laboratory for asymptotically anti-de Sitter geometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Metric and curvature summary at a chart point.
    Spacetime(Flags),
    /// Integrate a geodesic from a point and velocity.
    Geodesic(Flags),
    /// Boundary-to-boundary null fan and its delay past the antipodal point.
    Timedelay(Flags),
    /// Fermat potential of a bulk point over boundary generators.
    Fermat(Flags),
    /// Fefferman-Graham coefficient table.
    Fg(Flags),
    /// Modular time function and field of a diamond.
    Timefunction(Flags),
    /// Surface gravity along the horizons of an AdS wedge.
    #[command(name = "surface-gravity")]
    SurfaceGravity(Flags),
    /// Diamond volume or wedge-complement overlap volume.
    Volume(Flags),
    /// Conformal diagram polylines.
    Penrose(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Spacetime(f) => ("spacetime", f),
            Command::Geodesic(f) => ("geodesic", f),
            Command::Timedelay(f) => ("timedelay", f),
            Command::Fermat(f) => ("fermat", f),
            Command::Fg(f) => ("fg", f),
            Command::Timefunction(f) => ("timefunction", f),
            Command::SurfaceGravity(f) => ("surface-gravity", f),
            Command::Volume(f) => ("volume", f),
            Command::Penrose(f) => ("penrose", f),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// JSON file with RunConfig keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

/// Keys shared by flags (kebab-case) and config files (snake_case).
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    /// Only allowed in config files; must match the subcommand.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    command: Option<String>,
    /// ads, ads_poincare, ads_closure, esu, schwarzschild_ads, minkowski.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "R")]
    #[serde(rename = "R")]
    r: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    chart: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; inferred from the output extension when absent.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Bulk chart coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    velocity: Option<Vec<f64>>,
    #[arg(long)]
    max_affine: Option<f64>,
    #[arg(long)]
    boundary_event: Option<bool>,
    /// First point: chart coordinates, or τ followed by e for boundary points.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,
    /// Modular flow parameter.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long)]
    directions: Option<usize>,
    /// future or past.
    #[arg(long)]
    side: Option<String>,
    /// exact or numeric.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    n_fan: Option<usize>,
    #[arg(long)]
    generators: Option<usize>,
    /// esu, minkowski or esu_grid.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// diamond or overlap.
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    numeric: Option<bool>,
}

const COMMON: &[&str] = &["command", "out", "format", "threads"];
const MODEL: &[&str] = &["model", "d", "R", "m", "chart"];

fn allowed(cmd: &str) -> Vec<&'static str> {
    let extra: &[&str] = match cmd {
        "spacetime" => &["point"],
        "geodesic" => &["point", "velocity", "max_affine", "boundary_event"],
        "timedelay" => &["p", "directions"],
        "fermat" => &["point", "side", "generators", "mode", "n_fan"],
        "fg" => &["d", "boundary", "order", "grid_n", "half_width", "eps"],
        "timefunction" => &["p", "q", "point", "s"],
        "surface-gravity" => &["d", "dt", "side"],
        "volume" => &["region", "p", "q", "seed", "n", "r_min", "n_fan", "numeric"],
        "penrose" => &["n"],
        _ => &[],
    };
    let mut v: Vec<&str> = COMMON.iter().chain(extra).copied().collect();
    if !matches!(cmd, "fg" | "surface-gravity") {
        v.extend(MODEL);
    }
    v
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl From<AadsError> for Failure {
    fn from(e: AadsError) -> Self {
        let kind = format!("{e:?}").split('(').next().unwrap_or("Error").to_string();
        Failure { code: if e.is_config() { 2 } else { 3 }, kind, message: e.to_string() }
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure { code: 2, kind: "Config".into(), message: msg.into() }
}

type Res<T> = std::result::Result<T, Failure>;

fn merge(cmd: &str, flags: &Flags) -> Res<RunConfig> {
    let flag_map = match serde_json::to_value(&flags.run) {
        Ok(Value::Object(m)) => m,
        _ => return Err(config_err("cannot encode flags")),
    };
    let mut merged = serde_json::Map::new();
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        // validate keys and types before merging
        let file: RunConfig = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if let Some(c) = &file.command {
            if c != cmd {
                return Err(config_err(format!("config is for command {c}, not {cmd}")));
            }
        }
        if let Ok(Value::Object(m)) = serde_json::to_value(&file) {
            merged = m;
        }
    }
    for (k, v) in flag_map {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    merged.retain(|_, v| !v.is_null());
    let ok = allowed(cmd);
    for k in merged.keys() {
        if !ok.contains(&k.as_str()) {
            return Err(config_err(format!("key {k} does not apply to {cmd}")));
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| config_err(e.to_string()))
}

fn need<T: Clone>(v: &Option<T>, key: &str) -> Res<T> {
    v.clone().ok_or_else(|| config_err(format!("missing required key {key}")))
}

fn model_spec(c: &RunConfig) -> Res<ModelSpec> {
    let name = need(&c.model, "model")?;
    let family = match name.as_str() {
        "ads" | "ads_global" => Family::AdsGlobal,
        "ads_poincare" => Family::AdsPoincare,
        "ads_closure" => Family::AdsClosure,
        "esu" | "esu_boundary" => Family::EsuBoundary,
        "schwarzschild_ads" => Family::SchwarzschildAds,
        "minkowski" => Family::Minkowski,
        other => return Err(config_err(format!("unknown model {other}"))),
    };
    let mut spec = ModelSpec::new(family, need(&c.d, "d")?, c.r.unwrap_or(1.0));
    spec.m = c.m;
    spec.chart = c.chart.clone();
    Ok(spec)
}

fn boundary_point(v: &[f64], key: &str) -> Res<BoundaryPoint> {
    if v.len() < 3 {
        return Err(config_err(format!("{key} needs τ followed by a unit vector e")));
    }
    Ok(BoundaryPoint::new(v[0], &v[1..])?)
}

fn side(c: &RunConfig) -> Res<&'static str> {
    match c.side.as_deref().unwrap_or("future") {
        "future" => Ok("future"),
        "past" => Ok("past"),
        other => Err(config_err(format!("side must be future or past, got {other}"))),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
}

fn format(c: &RunConfig, default: Format) -> Res<Format> {
    let from_ext = c.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()).map(|s| s.to_ascii_lowercase());
    match c.format.as_deref().or(from_ext.as_deref()) {
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        None => Ok(default),
        Some(other) if c.format.is_some() => Err(config_err(format!("format must be csv or json, got {other}"))),
        Some(_) => Ok(default),
    }
}

fn unsupported_format(cmd: &str, f: &str) -> Failure {
    config_err(format!("{cmd} does not write {f}"))
}

/// Runs one subcommand and returns the artifact text.
fn run(cmd: &str, c: &RunConfig) -> Res<String> {
    match cmd {
        "spacetime" => {
            let spec = model_spec(c)?;
            let model = build_model(&spec)?;
            let p = model.point(&need(&c.point, "point")?);
            let g = metric_at(&model, &p)?;
            let cb = curvature_at(&model, &p)?;
            let d = model.d as f64;
            let lambda = -(d - 1.0) * (d - 2.0) / (2.0 * model.ads_radius.powi(2));
            let lam = if model.label == "ads" || model.label == "schwarzschild_ads" { lambda } else { 0.0 };
            let res = einstein_residual(&model, &p, lam)?;
            if format(c, Format::Json)? == Format::Csv {
                return Err(unsupported_format(cmd, "csv"));
            }
            Ok(experiments::report_json(
                "spacetime",
                &spec,
                0,
                json!({"chart": model.chart_id(), "point": p.coords, "metric": g, "ricci": cb.ricci, "scalar_curvature": cb.scalar}),
                json!({"einstein_residual": res, "lambda": lam}),
            ))
        }
        "geodesic" => {
            let spec = model_spec(c)?;
            let model = build_model(&spec)?;
            let x = need(&c.point, "point")?;
            let v = need(&c.velocity, "velocity")?;
            let stop = StopRule { max_affine: c.max_affine.unwrap_or(10.0), boundary_event: c.boundary_event.unwrap_or(false), domain_bounds: None };
            let tr = geodesic::integrate(&model, &GeodesicState::new(model.point(&x), &v), &stop)?;
            match format(c, Format::Csv)? {
                Format::Csv => Ok(geodesic::trajectory_csv(&tr)),
                Format::Json => {
                    let events: Vec<Value> = tr
                        .events
                        .iter()
                        .map(|e| json!({"kind": format!("{:?}", e.kind), "affine": e.affine, "coords": e.coords, "boundary": e.boundary}))
                        .collect();
                    let last = tr.final_state();
                    Ok(experiments::report_json(
                        "geodesic",
                        &spec,
                        0,
                        json!({"events": events, "final": {"affine": last.affine, "coords": last.point.coords, "velocity": last.velocity}}),
                        json!({"samples": tr.samples.len()}),
                    ))
                }
            }
        }
        "timedelay" => {
            let spec = model_spec(c)?;
            let model = build_model(&spec)?;
            let p = boundary_point(&need(&c.p, "p")?, "p")?;
            let rep = experiments::time_delay(&model, &p, c.directions.unwrap_or(50))?;
            match format(c, Format::Json)? {
                Format::Csv => Ok(rep.csv()),
                Format::Json => Ok(experiments::report_json(
                    "timedelay",
                    &spec,
                    0,
                    serde_json::to_value(&rep).unwrap_or(Value::Null),
                    json!({"error_bar": rep.error_bar, "trapped": rep.trapped, "excluded": rep.excluded.len()}),
                )),
            }
        }
        "fermat" => {
            let spec = model_spec(c)?;
            let model = build_model(&spec)?;
            let r = model.point(&need(&c.point, "point")?);
            let cone = if side(c)? == "future" { ConeSide::Future } else { ConeSide::Past };
            let mode = match c.mode.as_deref().unwrap_or("exact") {
                "exact" => CausalMode::Exact,
                "numeric" => CausalMode::Numeric { n_fan: c.n_fan.unwrap_or(64) },
                other => return Err(config_err(format!("mode must be exact or numeric, got {other}"))),
            };
            let gens = regions::sphere_directions(model.d - 1, c.generators.unwrap_or(16));
            let table = experiments::fermat_potential(&model, &r, &gens, cone, mode)?;
            match format(c, Format::Csv)? {
                Format::Csv => Ok(table.csv()),
                Format::Json => Ok(experiments::report_json(
                    "fermat",
                    &spec,
                    0,
                    serde_json::to_value(&table).unwrap_or(Value::Null),
                    json!({"certificate": table.certificate, "flagged": table.flagged()}),
                )),
            }
        }
        "fg" => {
            let d = need(&c.d, "d")?;
            let data = match c.boundary.as_deref().unwrap_or("esu") {
                "esu" => BoundaryData::analytic_esu(d)?,
                "minkowski" => BoundaryData::analytic_minkowski(d)?,
                "esu_grid" => BoundaryData::grid_esu(d, 9, c.grid_n.unwrap_or(17), c.half_width.unwrap_or(0.6), 0.05, c.eps.unwrap_or(0.0))?,
                other => return Err(config_err(format!("boundary must be esu, minkowski or esu_grid, got {other}"))),
            };
            let table = fg_expand(&data, need(&c.order, "order")?)?;
            if format(c, Format::Json)? == Format::Csv {
                return Err(unsupported_format(cmd, "csv"));
            }
            let _ = fg_constraint_residual(&table)?;
            Ok(table.to_json())
        }
        "timefunction" => {
            let spec = model_spec(c)?;
            let model = build_model(&spec)?;
            let frame = ModularFrame::new(&model, model.point(&need(&c.p, "p")?), model.point(&need(&c.q, "q")?))?;
            let r = model.point(&need(&c.point, "point")?);
            let lambda = frame.time_function(&r)?;
            let lambda_gamma = frame.time_function_gamma(&r)?;
            let field = frame.modular_field(&r)?;
            let flowed = match c.s {
                Some(s) => Some(frame.flow(&r, s)?.coords),
                None => None,
            };
            if format(c, Format::Json)? == Format::Csv {
                return Err(unsupported_format(cmd, "csv"));
            }
            Ok(experiments::report_json(
                "timefunction",
                &spec,
                0,
                json!({"lambda": lambda, "T": field.t, "norm": field.norm, "div": field.div, "flowed": flowed}),
                json!({"lambda_gamma": lambda_gamma, "killing_residual": field.killing_residual, "convex": frame.convexity_certificate}),
            ))
        }
        "surface-gravity" => {
            let d = need(&c.d, "d")?;
            let hs = if side(c)? == "future" { HorizonSide::Future } else { HorizonSide::Past };
            let frame = standard_ads_wedge(d, c.dt.unwrap_or(2.0))?;
            let pts = frame.horizon_sequence(hs, &APPROACH)?;
            let sg = frame.surface_gravity(&pts, hs)?;
            match format(c, Format::Csv)? {
                Format::Csv => Ok(sg.csv()),
                Format::Json => {
                    let spec = ModelSpec::new(Family::AdsClosure, d, 1.0);
                    Ok(experiments::report_json(
                        "surface-gravity",
                        &spec,
                        0,
                        serde_json::to_value(&sg).unwrap_or(Value::Null),
                        json!({"kappa_error": sg.kappa_error, "div_error": sg.div_error}),
                    ))
                }
            }
        }
        "volume" => {
            let spec = model_spec(c)?;
            let model = build_model(&spec)?;
            let seed = c.seed.unwrap_or(0);
            let sampler = Sampler { seed, n: c.n.unwrap_or(100_000) };
            let p = need(&c.p, "p")?;
            let q = need(&c.q, "q")?;
            let (results, certs) = match c.region.as_deref().unwrap_or("diamond") {
                "diamond" => {
                    let v = regions::diamond_volume(&model, &VolumeRegion::Bulk(model.point(&p), model.point(&q)), sampler)?;
                    (serde_json::to_value(v).unwrap_or(Value::Null), json!({"std_error": v.std_error}))
                }
                "overlap" => {
                    let mut opts = OverlapOptions::default();
                    opts.r_min = c.r_min.unwrap_or(opts.r_min);
                    opts.n_fan = c.n_fan.unwrap_or(opts.n_fan);
                    opts.numeric = c.numeric.unwrap_or(opts.numeric);
                    let rep = experiments::wedge_overlap_volume(&model, &boundary_point(&p, "p")?, &boundary_point(&q, "q")?, sampler, &opts)?;
                    (
                        serde_json::to_value(rep).unwrap_or(Value::Null),
                        json!({"std_error": rep.volume.std_error, "resolution": rep.resolution, "flagged": rep.flagged}),
                    )
                }
                other => return Err(config_err(format!("region must be diamond or overlap, got {other}"))),
            };
            if format(c, Format::Json)? == Format::Csv {
                return Err(unsupported_format(cmd, "csv"));
            }
            Ok(experiments::report_json("volume", &spec, seed, results, certs))
        }
        "penrose" => {
            let spec = model_spec(c)?;
            let model = build_model(&spec)?;
            let lines = experiments::penrose_diagram(&model, c.n.unwrap_or(64))?;
            match format(c, Format::Csv)? {
                Format::Csv => {
                    let rows: Vec<Vec<f64>> = lines.iter().flat_map(|(id, pts)| pts.iter().map(move |p| vec![*id as f64, p[0], p[1]])).collect();
                    Ok(csv(&["polyline", "tau", "angle"], &rows))
                }
                Format::Json => Ok(to_json(&json!({"polylines": lines.iter().map(|(id, pts)| json!({"id": id, "points": pts})).collect::<Vec<_>>()}))),
            }
        }
        other => Err(config_err(format!("unknown command {other}"))),
    }
}

fn set_threads(c: &RunConfig) -> Res<()> {
    let n = match c.threads {
        Some(n) => Some(n),
        None => match std::env::var("AADS_THREADS") {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| config_err(format!("AADS_THREADS = {s} is not an integer")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(config_err("threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| config_err(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Res<()> {
    let (cmd, flags) = cli.command.parts();
    let cfg = merge(cmd, flags)?;
    set_threads(&cfg)?;
    let text = run(cmd, &cfg)?;
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                let _ = std::fs::remove_file(path);
                return Err(Failure { code: 3, kind: "Io".into(), message: format!("cannot write {}: {e}", path.display()) });
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { ExitCode::from(2) } else { ExitCode::SUCCESS };
            }
            eprintln!("aads: error code=2 kind=Usage message={}", one_line(&e.to_string()));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("aads: error code={} kind={} message={}", f.code, f.kind, one_line(&f.message));
            ExitCode::from(f.code)
        }
    }
}
