use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::KvConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GFLAME_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "gflame-out";

#[derive(Debug, Parser)]
#[command(name = "gflame", version, about = "Ballistic orbits, front-speed bounds and G-equation solves for ABC and Kolmogorov flows")]
pub struct Cli {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory [default: $GFLAME_OUT_DIR, else ./gflame-out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic x-speeds of orbits started on the plane x = 0.
    SpeedMap(SpeedMapArgs),
    /// Shoot and certify the ballistic orbit.
    Orbit(OrbitArgs),
    /// Lower and upper front-speed lines over a range of intensities.
    Bounds(BoundsArgs),
    /// Solve the G-equation and fit the front speed.
    Solve(SolveArgs),
    /// Front speed over a sweep of intensities, checked against the bounds.
    StCurve(StCurveArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SpeedMap(_) => "speed-map",
            Command::Orbit(_) => "orbit",
            Command::Bounds(_) => "bounds",
            Command::Solve(_) => "solve",
            Command::StCurve(_) => "st-curve",
        }
    }

    /// Flags given on the command line, as config entries.
    pub fn overrides(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        match self {
            Command::SpeedMap(a) => {
                kv.set_opt("flow", a.flow.clone());
                kv.set_opt("n", a.n);
                kv.set_opt("t_eval", a.t);
                a.tol.apply(&mut kv);
                kv.set_opt("missing_threshold", a.missing_threshold);
            }
            Command::Orbit(a) => {
                kv.set_opt("flow", a.flow.clone());
                kv.set_opt("direction", a.direction.map(|d| d.name()));
                kv.set_opt("samples", a.samples);
                kv.set_opt("closure_tol", a.closure_tol);
                a.tol.apply(&mut kv);
            }
            Command::Bounds(a) => {
                kv.set_opt("flow", a.flow.clone());
                kv.set_opt("a_max", a.a_max);
                kv.set_opt("a_step", a.a_step);
                kv.set_opt("quadrature_n", a.quadrature_n);
                a.tol.apply(&mut kv);
            }
            Command::Solve(a) => {
                kv.set_opt("flow", a.flow.clone());
                kv.set_opt("intensity", a.intensity);
                kv.set_opt("snapshots", a.snapshots);
                a.solver.apply(&mut kv);
            }
            Command::StCurve(a) => {
                kv.set_opt("flow", a.flow.clone());
                kv.set_opt("a_values", a.a_values.clone());
                kv.set_opt("a_range", a.a_range.clone());
                a.solver.apply(&mut kv);
            }
        }
        kv
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ToleranceArgs {
    /// Relative tolerance of the orbit integrator.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Absolute tolerance of the orbit integrator.
    #[arg(long)]
    pub abs_tol: Option<f64>,
}

impl ToleranceArgs {
    fn apply(&self, kv: &mut KvConfig) {
        kv.set_opt("rel_tol", self.rel_tol);
        kv.set_opt("abs_tol", self.abs_tol);
    }
}

#[derive(Debug, Clone, Args)]
pub struct SpeedMapArgs {
    /// abc or kolmogorov.
    #[arg(long)]
    pub flow: Option<String>,
    /// Cells per side of the (y, z) map.
    #[arg(long)]
    pub n: Option<usize>,
    /// Evaluation time.
    #[arg(long = "t", alias = "t-eval")]
    pub t: Option<f64>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    /// Largest tolerated fraction of failed cells.
    #[arg(long)]
    pub missing_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrbitDirection {
    Positive,
    Negative,
}

impl OrbitDirection {
    pub fn name(self) -> &'static str {
        match self {
            OrbitDirection::Positive => "positive",
            OrbitDirection::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OrbitArgs {
    #[arg(long)]
    pub flow: Option<String>,
    #[arg(long, value_enum)]
    pub direction: Option<OrbitDirection>,
    /// Trajectory samples over one period.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Largest accepted closure residual.
    #[arg(long)]
    pub closure_tol: Option<f64>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub flow: Option<String>,
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long)]
    pub a_step: Option<f64>,
    /// Simpson panels for the traced period.
    #[arg(long)]
    pub quadrature_n: Option<usize>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Grid points per side.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Safety factor on the time-step rule, in (0, 1].
    #[arg(long)]
    pub cfl_safety: Option<f64>,
    /// intermediate, eikonal or fd.
    #[arg(long)]
    pub dt_rule: Option<String>,
    /// Start of the least-squares window [default: t_final/2].
    #[arg(long)]
    pub fit_start: Option<f64>,
    /// End of the least-squares window [default: t_final].
    #[arg(long)]
    pub fit_end: Option<f64>,
    /// Relative slack when checking the speed against the bound lines.
    #[arg(long)]
    pub slack: Option<f64>,
}

impl SolverArgs {
    fn apply(&self, kv: &mut KvConfig) {
        kv.set_opt("n", self.n);
        kv.set_opt("t_final", self.t_final);
        kv.set_opt("cfl_safety", self.cfl_safety);
        kv.set_opt("dt_rule", self.dt_rule.clone());
        kv.set_opt("fit_start", self.fit_start);
        kv.set_opt("fit_end", self.fit_end);
        kv.set_opt("slack", self.slack);
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub flow: Option<String>,
    /// Flow intensity.
    #[arg(long = "A")]
    pub intensity: Option<f64>,
    /// Evenly spaced snapshots of G to write.
    #[arg(long)]
    pub snapshots: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StCurveArgs {
    #[arg(long)]
    pub flow: Option<String>,
    /// Comma-separated intensities, e.g. `0,1,2,4`.
    #[arg(long = "A-values", value_name = "LIST")]
    pub a_values: Option<String>,
    /// Inclusive range `start:stop:step`.
    #[arg(long = "A-range", value_name = "RANGE")]
    pub a_range: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
}
