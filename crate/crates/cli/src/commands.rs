//! Subcommand bodies. Each reads its settings through a [`Resolver`], writes
//! its outputs through an [`OutputDir`], and finishes with the manifest.

use std::path::PathBuf;
use std::time::Instant;

use gflame_core::bounds::{bound_lines, check_speed, traced_period, BoundCheck, BoundLines};
use gflame_core::flow::TWO_PI;
use gflame_core::ode::{sample, IntegratorConfig};
use gflame_core::orbit::{
    closure_residual, compute_speed_map, negative_orbit, shoot_ballistic, verify_symmetry_composition,
    MapExtreme, OrbitCertificate, ShootingConfig, SymmetryReport,
};
use gflame_core::solver::{level_set_function, run_with, FrontSpeedSeries, SolverConfig, TimeStepRule};
use gflame_core::{FlowField, FlowKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{Cli, Command, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use crate::config::{KvConfig, Resolver};
use crate::error::CliError;
use crate::output::{csv_table, raw_le_f64, vtk_structured_points, OutputDir, RawSidecar, RunManifest};
use crate::sweep::SweepSpec;

/// What a finished command leaves behind.
#[derive(Debug)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
    /// Set when the run completed but a check did not pass.
    pub failure: Option<String>,
}

/// File config, then flags on top.
pub fn resolve_config(cli: &Cli) -> Result<KvConfig, CliError> {
    let mut kv = match &cli.config {
        Some(path) => KvConfig::load(path)?,
        None => KvConfig::new(),
    };
    let mut flags = cli.command.overrides();
    flags.set_opt("out_dir", cli.out_dir.as_ref().map(|p| p.display().to_string()));
    flags.set_opt("threads", cli.threads);
    kv.merge(&flags);
    Ok(kv)
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let kv = resolve_config(cli)?;
    let mut r = Resolver::new(kv);
    let out_dir = match r.get_str("out_dir") {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(std::env::var(OUT_DIR_ENV).unwrap_or_else(|_| DEFAULT_OUT_DIR.to_string())),
    };
    let threads: usize = r.get_or("threads", 0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| {
        let start = Instant::now();
        let mut out = OutputDir::create(&out_dir)?;
        let failure = match &cli.command {
            Command::SpeedMap(_) => speed_map(&mut r, &mut out)?,
            Command::Orbit(_) => orbit(&mut r, &mut out)?,
            Command::Bounds(_) => bounds(&mut r, &mut out)?,
            Command::Solve(_) => solve(&mut r, &mut out)?,
            Command::StCurve(_) => st_curve(&mut r, &mut out)?,
        };
        for key in r.unused_keys() {
            eprintln!("warning: `{key}` is not used by {}", cli.command.name());
        }
        let manifest = out.finish(cli.command.name(), r.resolved(), start.elapsed().as_secs_f64())?;
        Ok(Outcome { manifest, out_dir, failure })
    })
}

fn flow_kind(r: &mut Resolver) -> Result<FlowKind, CliError> {
    let name: String = r.get_or("flow", FlowKind::Abc.name().to_string())?;
    Ok(name.parse::<FlowKind>()?)
}

fn integrator(r: &mut Resolver, defaults: IntegratorConfig) -> Result<IntegratorConfig, CliError> {
    let rel: f64 = r.get_or("rel_tol", defaults.rel_tol)?;
    let abs: f64 = r.get_or("abs_tol", defaults.abs_tol)?;
    let cfg = IntegratorConfig { rel_tol: rel, abs_tol: abs, ..defaults };
    cfg.validate()?;
    Ok(cfg)
}

fn certificate(kind: FlowKind) -> Result<OrbitCertificate, CliError> {
    Ok(shoot_ballistic(kind, &ShootingConfig::for_flow(kind))?)
}

#[derive(Serialize)]
struct SpeedMapSummary {
    flow: FlowKind,
    n: usize,
    t_eval: f64,
    max: Option<MapExtreme>,
    min: Option<MapExtreme>,
    max_plus_min: f64,
    missing: usize,
    missing_fraction: f64,
    orbit_speed: f64,
    orbit_yz: [f64; 2],
    argmax_cell_distance: f64,
    max_over_orbit_speed: f64,
}

fn speed_map(r: &mut Resolver, out: &mut OutputDir) -> Result<Option<String>, CliError> {
    let kind = flow_kind(r)?;
    let n: usize = r.get_or("n", 100)?;
    let t_eval: f64 = r.get_or("t_eval", 200.0)?;
    let cfg = integrator(r, IntegratorConfig::with_tolerances(1e-8, 1e-10))?;
    let threshold: f64 = r.get_or("missing_threshold", 1e-3)?;

    let map = compute_speed_map(&FlowField::unit(kind), n, n, t_eval, &cfg)?;
    let rows = (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).map(|(j, k)| vec![map.y(j), map.z(k), map.get(j, k)]);
    out.write_text("speed_map.csv", &csv_table(&["y", "z", "speed"], rows.collect::<Vec<_>>()))?;

    let cert = certificate(kind)?;
    let orbit_yz = [cert.start.y.rem_euclid(TWO_PI), cert.start.z.rem_euclid(TWO_PI)];
    let max = map.argmax();
    let min = map.argmin();
    let missing_fraction = map.missing() as f64 / (n * n) as f64;
    let summary = SpeedMapSummary {
        flow: kind,
        n,
        t_eval,
        max,
        min,
        max_plus_min: match (max, min) {
            (Some(a), Some(b)) => a.value + b.value,
            _ => f64::NAN,
        },
        missing: map.missing(),
        missing_fraction,
        orbit_speed: cert.mean_speed(),
        orbit_yz,
        argmax_cell_distance: max.map_or(f64::NAN, |m| map.cell_distance(m.j, m.k, orbit_yz[0], orbit_yz[1])),
        max_over_orbit_speed: max.map_or(f64::NAN, |m| m.value / cert.mean_speed()),
    };
    out.write_json("speed_map_summary.json", &summary)?;
    Ok((missing_fraction > threshold)
        .then(|| format!("{} of {} cells failed, above the {threshold} threshold", map.missing(), n * n)))
}

#[derive(Serialize)]
struct OrbitReport<'a> {
    certificate: &'a OrbitCertificate,
    mean_speed: f64,
    tight_closure_residual: f64,
    symmetry: SymmetryReport,
    bound_lines: BoundLines,
}

fn orbit(r: &mut Resolver, out: &mut OutputDir) -> Result<Option<String>, CliError> {
    let kind = flow_kind(r)?;
    let direction: String = r.get_or("direction", "positive".to_string())?;
    let samples: usize = r.get_or("samples", 512)?;
    let mut shooting = ShootingConfig::for_flow(kind);
    shooting.integrator = integrator(r, shooting.integrator)?;
    shooting.certification_tol = r.get_or("closure_tol", shooting.certification_tol)?;
    if samples < 2 {
        return Err(CliError::Usage("samples must be at least 2".into()));
    }

    let positive = shoot_ballistic(kind, &shooting)?;
    let cert = match direction.as_str() {
        "positive" => positive.clone(),
        "negative" => negative_orbit(&positive, &shooting)?,
        other => return Err(CliError::Usage(format!("unknown direction `{other}`"))),
    };
    let tight = closure_residual(&cert, &shooting.integrator.tightened(10.0))?;
    let symmetry = verify_symmetry_composition(&cert, &shooting.integrator, 1e-6)?;
    let report = OrbitReport {
        certificate: &cert,
        mean_speed: cert.mean_speed(),
        tight_closure_residual: tight,
        symmetry,
        bound_lines: bound_lines(&positive),
    };
    out.write_json("orbit.json", &report)?;

    let times: Vec<f64> = (0..samples).map(|m| cert.period * m as f64 / (samples - 1) as f64).collect();
    let points = sample(&FlowField::unit(kind), cert.start, &times, &shooting.integrator)?;
    let rows = times.iter().zip(&points).map(|(t, p)| vec![*t, p.x, p.y, p.z]);
    out.write_text("orbit_trajectory.csv", &csv_table(&["t", "x", "y", "z"], rows.collect::<Vec<_>>()))?;
    Ok((!report.symmetry.all_passed()).then(|| "symmetry composition check failed".to_string()))
}

#[derive(Serialize)]
struct BoundsSummary {
    flow: FlowKind,
    period: f64,
    lines: BoundLines,
    coefficients: [f64; 4],
}

fn bounds(r: &mut Resolver, out: &mut OutputDir) -> Result<Option<String>, CliError> {
    let kind = flow_kind(r)?;
    let a_max: f64 = r.get_or("a_max", 20.0)?;
    let a_step: f64 = r.get_or("a_step", 1.0)?;
    let quadrature_n: usize = r.get_or("quadrature_n", 256)?;
    let cfg = integrator(r, IntegratorConfig::default())?;
    let values = SweepSpec::parse_range(&format!("0:{a_max}:{a_step}"))?;

    let cert = certificate(kind)?;
    let lines = bound_lines(&cert);
    let rows = values
        .iter()
        .map(|&a| {
            let traced = traced_period(&cert, a, quadrature_n, &cfg)?;
            Ok(vec![a, lines.lower(a), lines.upper(a), traced.speed()])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.write_text("bounds.csv", &csv_table(&["A", "lower", "upper", "traced_speed"], rows))?;
    out.write_json(
        "bounds.json",
        &BoundsSummary { flow: kind, period: cert.period, lines, coefficients: lines.coefficients() },
    )?;
    Ok(None)
}

/// Shared solver settings of `solve` and `st-curve`.
struct SolverSettings {
    base: SolverConfig,
    slack: f64,
}

fn solver_settings(r: &mut Resolver, kind: FlowKind) -> Result<SolverSettings, CliError> {
    let d = SolverConfig::default();
    let n: usize = r.get_or("n", d.n)?;
    let t_final: f64 = r.get_or("t_final", d.t_final)?;
    let cfl_safety: f64 = r.get_or("cfl_safety", d.cfl_safety)?;
    let rule: String = r.get_or("dt_rule", "intermediate".to_string())?;
    let dt_rule = match rule.as_str() {
        "fd" => TimeStepRule::fd_for(kind),
        other => other.parse::<TimeStepRule>()?,
    };
    let fit_start: f64 = r.get_or("fit_start", 0.5 * t_final)?;
    let fit_end: f64 = r.get_or("fit_end", t_final)?;
    let slack: f64 = r.get_or("slack", 0.05)?;
    Ok(SolverSettings {
        base: SolverConfig {
            n,
            flow: kind,
            intensity: 0.0,
            cfl_safety,
            t_final,
            dt_rule,
            snapshots: 0,
            fit_window: Some((fit_start, fit_end)),
        },
        slack,
    })
}

fn series_csv(s: &FrontSpeedSeries) -> String {
    let rows = (0..s.times.len()).map(|m| vec![s.times[m], s.speeds[m], s.mean_regression[m], s.pointwise_speeds[m]]);
    csv_table(&["t", "s_t", "minus_mean_u", "s_t_pointwise"], rows.collect::<Vec<_>>())
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    flow: FlowKind,
    intensity: f64,
    n: usize,
    dt: f64,
    steps: usize,
    dt_rule: TimeStepRule,
    fit_window: (f64, f64),
    fitted_slope: f64,
    slope_std_error: f64,
    config_hash: &'a str,
    bounds: BoundCheck,
    snapshots: Vec<String>,
}

fn solve(r: &mut Resolver, out: &mut OutputDir) -> Result<Option<String>, CliError> {
    let kind = flow_kind(r)?;
    let intensity: f64 = r.get_or("intensity", 1.0)?;
    let snapshots: usize = r.get_or("snapshots", 0)?;
    let settings = solver_settings(r, kind)?;
    let cfg = SolverConfig { intensity, snapshots, ..settings.base };
    cfg.validate()?;

    let steps = cfg.step_count();
    let width = steps.to_string().len().max(4);
    let mut written = Vec::new();
    let mut write_error = None;
    let result = run_with(&cfg, |snap| {
        let g = level_set_function(&snap.field);
        let stem = format!("snapshots/g_step{:0width$}", snap.step);
        let title = format!("G = x + U, {} flow, A = {}, t = {}", kind, intensity, snap.time);
        out.write_text(&format!("{stem}.vtk"), &vtk_structured_points(&g, "G", &title))
            .and_then(|_| out.write_bytes(&format!("{stem}.raw"), &raw_le_f64(&g)))
            .and_then(|_| {
                let raw_name = format!("g_step{:0width$}.raw", snap.step);
                out.write_json(&format!("{stem}.json"), &RawSidecar::new(&raw_name, "G", &g, snap.step, snap.time))
            })
            .map_err(|e| {
                let msg = e.to_string();
                write_error = Some(e);
                gflame_core::Error::InvalidArgument(msg)
            })?;
        written.push(format!("{stem}.vtk"));
        Ok(())
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let (_, series) = result?;

    let lines = bound_lines(&certificate(kind)?);
    let check = check_speed(intensity, series.fitted_slope, &lines, settings.slack);
    out.write_text("front_speed.csv", &series_csv(&series))?;
    let hash = r.resolved().hash();
    out.write_json(
        "front_speed.json",
        &SolveSummary {
            flow: kind,
            intensity,
            n: cfg.n,
            dt: cfg.dt(),
            steps,
            dt_rule: cfg.dt_rule,
            fit_window: series.fit_window,
            fitted_slope: series.fitted_slope,
            slope_std_error: series.slope_std_error,
            config_hash: &hash,
            bounds: check,
            snapshots: written,
        },
    )?;
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
struct CurveRow {
    intensity: f64,
    fitted_slope: f64,
    slope_std_error: f64,
    check: Option<BoundCheck>,
    error: Option<String>,
}

#[derive(Serialize)]
struct CurveSummary<'a> {
    sweep: &'a SweepSpec,
    lines: BoundLines,
    slack: f64,
    config_hash: &'a str,
    rows: &'a [CurveRow],
    all_within_bounds: bool,
}

fn st_curve(r: &mut Resolver, out: &mut OutputDir) -> Result<Option<String>, CliError> {
    let kind = flow_kind(r)?;
    let values = match (r.get_str("a_values"), r.get_str("a_range")) {
        (Some(list), None) => SweepSpec::parse_list(&list)?,
        (None, Some(range)) => SweepSpec::parse_range(&range)?,
        (Some(_), Some(_)) => return Err(CliError::Usage("give either A-values or A-range, not both".into())),
        (None, None) => return Err(CliError::Usage("st-curve needs --A-values or --A-range".into())),
    };
    let sweep = SweepSpec::new(kind, values)?;
    let settings = solver_settings(r, kind)?;
    for &a in &sweep.values {
        SolverConfig { intensity: a, ..settings.base.clone() }.validate()?;
    }
    let lines = bound_lines(&certificate(kind)?);

    let rows: Vec<CurveRow> = sweep
        .values
        .par_iter()
        .map(|&a| {
            let cfg = SolverConfig { intensity: a, ..settings.base.clone() };
            match run_with(&cfg, |_| Ok(())) {
                Ok((_, s)) => CurveRow {
                    intensity: a,
                    fitted_slope: s.fitted_slope,
                    slope_std_error: s.slope_std_error,
                    check: Some(check_speed(a, s.fitted_slope, &lines, settings.slack)),
                    error: None,
                },
                Err(e) => CurveRow {
                    intensity: a,
                    fitted_slope: f64::NAN,
                    slope_std_error: f64::NAN,
                    check: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let passed = |row: &CurveRow| row.check.is_some_and(|c| c.passed);
    let table = rows.iter().map(|row| {
        vec![
            row.intensity,
            row.fitted_slope,
            row.slope_std_error,
            lines.lower(row.intensity),
            lines.upper(row.intensity),
            if passed(row) { 1.0 } else { 0.0 },
        ]
    });
    out.write_text(
        "st_curve.csv",
        &csv_table(&["A", "s_t", "std_error", "lower", "upper", "within_bounds"], table.collect::<Vec<_>>()),
    )?;
    let all = rows.iter().all(passed);
    let hash = r.resolved().hash();
    out.write_json(
        "st_curve.json",
        &CurveSummary { sweep: &sweep, lines, slack: settings.slack, config_hash: &hash, rows: &rows, all_within_bounds: all },
    )?;
    let failed: Vec<String> = rows.iter().filter(|row| !passed(row)).map(|row| row.intensity.to_string()).collect();
    Ok((!failed.is_empty()).then(|| format!("A = {} failed or left the bounds", failed.join(", "))))
}
