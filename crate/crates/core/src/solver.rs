//! Strang-split semi-Lagrangian solver for the periodic part `U` of
//! `G = x + U`, where `∂U/∂t + V·(∇U + e₁) + |∇U + e₁| = 0`, `U(·,0) = 0`.
//!
//! One time step is the palindrome `X/2 Y/2 Z/2 E Z/2 Y/2 X/2`: three
//! semi-Lagrangian convection half-steps with WENO interpolation, and one
//! TVD-RK3 step of the eikonal equation with HJ-WENO derivatives and the
//! Godunov flux.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowField, FlowKind, Vec3};
use crate::grid::{godunov_magnitude_field, map_lines, scatter_lines, shift_line, Grid3, ScalarField3};

/// Slope of the non-periodic part of `G`.
pub const PLANAR_SLOPE: [f64; 3] = [1.0, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeStepRule {
    /// `√(A+3)·Δt/Δx ≤ 1`
    Intermediate,
    /// `√3·Δt/Δx ≤ 1`
    Eikonal,
    /// `(6A+√3)·Δt/Δx ≤ 1`
    FdAbc,
    /// `(3A+√3)·Δt/Δx ≤ 1`
    FdKolmogorov,
}

impl TimeStepRule {
    /// The finite-difference rule matching `kind`.
    pub fn fd_for(kind: FlowKind) -> Self {
        match kind {
            FlowKind::Abc => TimeStepRule::FdAbc,
            FlowKind::Kolmogorov => TimeStepRule::FdKolmogorov,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeStepRule::Intermediate => "intermediate",
            TimeStepRule::Eikonal => "eikonal",
            TimeStepRule::FdAbc => "fd-abc",
            TimeStepRule::FdKolmogorov => "fd-kolmogorov",
        }
    }
}

impl fmt::Display for TimeStepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeStepRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intermediate" => Ok(TimeStepRule::Intermediate),
            "eikonal" => Ok(TimeStepRule::Eikonal),
            "fd-abc" => Ok(TimeStepRule::FdAbc),
            "fd-kolmogorov" => Ok(TimeStepRule::FdKolmogorov),
            other => Err(Error::InvalidArgument(format!("unknown time-step rule `{other}`"))),
        }
    }
}

/// `σ·h / denominator(rule, A)`.
pub fn time_step_rule(intensity: f64, h: f64, rule: TimeStepRule, safety: f64) -> f64 {
    let sqrt3 = 3f64.sqrt();
    let denominator = match rule {
        TimeStepRule::Intermediate => (intensity + 3.0).sqrt(),
        TimeStepRule::Eikonal => sqrt3,
        TimeStepRule::FdAbc => 6.0 * intensity + sqrt3,
        TimeStepRule::FdKolmogorov => 3.0 * intensity + sqrt3,
    };
    safety * h / denominator
}

/// Largest stable step of the explicit eikonal update.
pub fn eikonal_limit(h: f64) -> f64 {
    h / 3f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitOp {
    /// Semi-Lagrangian convection along an axis for `fraction·Δt`.
    Convect { axis: usize, fraction_num: u8, fraction_den: u8 },
    /// Eikonal update for `fraction·Δt`.
    Eikonal { fraction_num: u8, fraction_den: u8 },
}

impl SplitOp {
    pub fn fraction(&self) -> f64 {
        match *self {
            SplitOp::Convect { fraction_num, fraction_den, .. }
            | SplitOp::Eikonal { fraction_num, fraction_den } => {
                f64::from(fraction_num) / f64::from(fraction_den)
            }
        }
    }
}

/// Ordered operator sequence for one time step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStepPlan {
    pub ops: Vec<SplitOp>,
}

impl SplitStepPlan {
    pub fn strang() -> Self {
        let half = |axis| SplitOp::Convect { axis, fraction_num: 1, fraction_den: 2 };
        Self {
            ops: vec![
                half(0),
                half(1),
                half(2),
                SplitOp::Eikonal { fraction_num: 1, fraction_den: 1 },
                half(2),
                half(1),
                half(0),
            ],
        }
    }

    /// The same plan with every convection half-step removed.
    pub fn eikonal_only() -> Self {
        Self { ops: vec![SplitOp::Eikonal { fraction_num: 1, fraction_den: 1 }] }
    }

    /// The same plan with the eikonal step removed.
    pub fn convection_only() -> Self {
        let mut plan = Self::strang();
        plan.ops.retain(|op| matches!(op, SplitOp::Convect { .. }));
        plan
    }

    pub fn is_palindromic(&self) -> bool {
        self.ops.iter().eq(self.ops.iter().rev())
    }
}

/// Semi-Lagrangian transport along `axis` for time `dt`:
/// `U'(x_m) = I[U](x_m − c·dt) − c·dt·[axis = x]`.
///
/// Each axis velocity component of both flows is independent of the
/// coordinate along that axis, so every node of a grid line shares the same
/// velocity and the characteristic feet are exact.
pub fn convection_sweep(u: &ScalarField3, flow: &FlowField, axis: usize, dt: f64) -> ScalarField3 {
    assert!(axis < 3, "axis {axis} out of range");
    let grid = u.grid();
    let n = grid.n();
    let h = grid.h();
    let planar = PLANAR_SLOPE[axis];
    let lines = map_lines(u, axis, |id, line, out| {
        let (a, b) = (grid.coord(id / n), grid.coord(id % n));
        let p = match axis {
            0 => Vec3::new(0.0, a, b),
            1 => Vec3::new(a, 0.0, b),
            _ => Vec3::new(a, b, 0.0),
        };
        let c = flow.component(axis, p);
        let shift = c * dt / h;
        shift_line(line, shift, out);
        if planar != 0.0 {
            let correction = planar * c * dt;
            for v in out.iter_mut() {
                *v -= correction;
            }
        }
    });
    let mut out = ScalarField3::zeros(grid);
    let data = out.data_mut();
    scatter_lines(grid, axis, &lines, |idx, v| data[idx] = v);
    out
}

/// `−|∇U + slope|` with HJ-WENO one-sided derivatives and the Godunov flux.
fn eikonal_rhs(u: &ScalarField3, slope: [f64; 3]) -> ScalarField3 {
    let mut mag = godunov_magnitude_field(u, slope);
    mag.data_mut().par_iter_mut().for_each(|v| *v = -*v);
    mag
}

fn axpy_into(out: &mut ScalarField3, terms: &[(f64, &ScalarField3)]) {
    let dst = out.data_mut();
    dst.par_iter_mut().enumerate().for_each(|(idx, d)| {
        *d = terms.iter().map(|(c, f)| c * f.data()[idx]).sum();
    });
}

/// Third-order TVD Runge–Kutta step of `∂U/∂t + |∇U + slope| = 0`.
pub fn eikonal_step_with_slope(u: &ScalarField3, dt: f64, slope: [f64; 3]) -> Result<ScalarField3> {
    let limit = eikonal_limit(u.grid().h());
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let grid = u.grid();
    let mut u1 = ScalarField3::zeros(grid);
    let l0 = eikonal_rhs(u, slope);
    axpy_into(&mut u1, &[(1.0, u), (dt, &l0)]);
    let l1 = eikonal_rhs(&u1, slope);
    let mut u2 = ScalarField3::zeros(grid);
    axpy_into(&mut u2, &[(0.75, u), (0.25, &u1), (0.25 * dt, &l1)]);
    let l2 = eikonal_rhs(&u2, slope);
    let mut out = u1;
    axpy_into(&mut out, &[(1.0 / 3.0, u), (2.0 / 3.0, &u2), (2.0 / 3.0 * dt, &l2)]);
    Ok(out)
}

/// Eikonal part of the split step for `U` (gradient taken of `U + x`).
pub fn eikonal_step(u: &ScalarField3, dt: f64) -> Result<ScalarField3> {
    eikonal_step_with_slope(u, dt, PLANAR_SLOPE)
}

pub fn strang_step(u: &ScalarField3, plan: &SplitStepPlan, flow: &FlowField, dt: f64) -> Result<ScalarField3> {
    let mut cur = u.clone();
    for op in &plan.ops {
        let sub = op.fraction() * dt;
        cur = match *op {
            SplitOp::Convect { axis, .. } => {
                if flow.intensity == 0.0 {
                    continue;
                }
                convection_sweep(&cur, flow, axis, sub)
            }
            SplitOp::Eikonal { .. } => eikonal_step(&cur, sub)?,
        };
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    pub flow: FlowKind,
    pub intensity: f64,
    pub cfl_safety: f64,
    pub t_final: f64,
    pub dt_rule: TimeStepRule,
    /// Number of evenly spaced snapshots (the last one at `t_final`); 0 for none.
    pub snapshots: usize,
    /// Least-squares window for the front speed; `None` means the second half
    /// of the run.
    pub fit_window: Option<(f64, f64)>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 160,
            flow: FlowKind::Abc,
            intensity: 1.0,
            cfl_safety: 1.0,
            t_final: 10.0,
            dt_rule: TimeStepRule::Intermediate,
            snapshots: 0,
            fit_window: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        Grid3::new(self.n)?;
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::InvalidArgument("intensity must be finite and >= 0".into()));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument("cfl_safety must lie in (0, 1]".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument("t_final must be positive".into()));
        }
        if let Some((a, b)) = self.fit_window {
            if !(0.0 <= a && a < b && b <= self.t_final) {
                return Err(Error::InvalidArgument(format!("bad fit window [{a}, {b}]")));
            }
        }
        let h = self.h();
        let dt = self.rule_dt();
        // √(A+3) ≥ √3 for A ≥ 0, so only a malformed rule can trip this
        if dt > eikonal_limit(h) * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit: eikonal_limit(h) });
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        crate::flow::TWO_PI / self.n as f64
    }

    pub fn flow_field(&self) -> FlowField {
        FlowField::new(self.flow, self.intensity)
    }

    /// Step allowed by the selected rule.
    pub fn rule_dt(&self) -> f64 {
        time_step_rule(self.intensity, self.h(), self.dt_rule, self.cfl_safety)
    }

    /// Number of equal steps that reach `t_final` without exceeding the rule.
    pub fn step_count(&self) -> usize {
        (self.t_final / self.rule_dt() * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.step_count() as f64
    }

    pub fn window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or((0.5 * self.t_final, self.t_final))
    }
}

/// `(t, s_T(t))` samples of one run and the late-time front speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSpeedSeries {
    pub flow: FlowKind,
    pub intensity: f64,
    /// Sample times, strictly increasing.
    pub times: Vec<f64>,
    /// `−mean(U)` at each sample time.
    pub mean_regression: Vec<f64>,
    /// `−mean(U)/t` at each sample time.
    pub speeds: Vec<f64>,
    /// `−U(0)/t` at each sample time; a pointwise cross-check of `speeds`.
    pub pointwise_speeds: Vec<f64>,
    pub fitted_slope: f64,
    /// Standard error of the fitted slope.
    pub slope_std_error: f64,
    pub fit_window: (f64, f64),
}

impl FrontSpeedSeries {
    pub fn s_t(&self) -> f64 {
        self.fitted_slope
    }
}

/// Ordinary least-squares slope and its standard error.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let se = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, se))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub field: ScalarField3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub field: ScalarField3,
    pub series: FrontSpeedSeries,
    pub snapshots: Vec<Snapshot>,
}

/// Step indices at which snapshots are taken.
fn snapshot_steps(cfg: &SolverConfig) -> Vec<usize> {
    let total = cfg.step_count();
    (1..=cfg.snapshots)
        .map(|s| ((s * total) as f64 / cfg.snapshots as f64).round() as usize)
        .collect()
}

/// Advance from `U = 0` to `t_final`, calling `on_snapshot` for each
/// scheduled snapshot instead of keeping it.
pub fn run_with<F>(cfg: &SolverConfig, mut on_snapshot: F) -> Result<(ScalarField3, FrontSpeedSeries)>
where
    F: FnMut(&Snapshot) -> Result<()>,
{
    cfg.validate()?;
    let grid = Grid3::new(cfg.n)?;
    let flow = cfg.flow_field();
    let plan = SplitStepPlan::strang();
    let steps = cfg.step_count();
    let dt = cfg.dt();
    let wanted = snapshot_steps(cfg);

    let mut u = ScalarField3::zeros(grid);
    let mut times = Vec::with_capacity(steps);
    let mut regression = Vec::with_capacity(steps);
    let mut pointwise = Vec::with_capacity(steps);
    for step in 1..=steps {
        u = strang_step(&u, &plan, &flow, dt)?;
        let t = step as f64 * dt;
        let mean = u.mean();
        if !mean.is_finite() || !u.all_finite() {
            return Err(Error::Instability { step, t });
        }
        times.push(t);
        regression.push(-mean);
        pointwise.push(-u.get(0, 0, 0) / t);
        if wanted.contains(&step) {
            // move the field in and out to avoid a copy
            let snap = Snapshot { step, time: t, field: u };
            on_snapshot(&snap)?;
            u = snap.field;
        }
    }

    let window = cfg.window();
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&regression)
        .filter(|(t, _)| **t >= window.0 - 1e-12 && **t <= window.1 + 1e-12)
        .map(|(t, r)| (*t, *r))
        .unzip();
    let (slope, se) = least_squares_slope(&xs, &ys).ok_or_else(|| {
        Error::InvalidArgument(format!("fit window [{}, {}] holds fewer than two samples", window.0, window.1))
    })?;
    let speeds = times.iter().zip(&regression).map(|(t, r)| r / t).collect();
    let series = FrontSpeedSeries {
        flow: cfg.flow,
        intensity: cfg.intensity,
        times,
        mean_regression: regression,
        speeds,
        pointwise_speeds: pointwise,
        fitted_slope: slope,
        slope_std_error: se,
        fit_window: window,
    };
    Ok((u, series))
}

pub fn run(cfg: &SolverConfig) -> Result<RunOutput> {
    let mut snapshots = Vec::new();
    let (field, series) = run_with(cfg, |s| {
        snapshots.push(s.clone());
        Ok(())
    })?;
    Ok(RunOutput { field, series, snapshots })
}

/// `G = x + U` on the grid nodes.
pub fn level_set_function(u: &ScalarField3) -> ScalarField3 {
    let grid = u.grid();
    let n = grid.n();
    let mut g = u.clone();
    g.data_mut()
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(i, slab)| {
            let x = grid.coord(i);
            slab.iter_mut().for_each(|v| *v += x);
        });
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::TWO_PI;

    #[test]
    fn time_step_rules() {
        let h = TWO_PI / 160.0;
        assert!((time_step_rule(13.0, h, TimeStepRule::Intermediate, 1.0) - h / 4.0).abs() < 1e-16);
        for a in [0.0, 5.0, 100.0] {
            let dt = time_step_rule(a, h, TimeStepRule::Eikonal, 0.5);
            assert!((dt - 0.5 * h / 3f64.sqrt()).abs() < 1e-16);
        }
        let dt = time_step_rule(1.0, h, TimeStepRule::FdAbc, 0.9);
        assert!((dt - 0.9 * h / (6.0 + 3f64.sqrt())).abs() < 1e-16);
        let dt = time_step_rule(2.0, h, TimeStepRule::FdKolmogorov, 1.0);
        assert!((dt - h / (6.0 + 3f64.sqrt())).abs() < 1e-16);
        assert_eq!(TimeStepRule::fd_for(FlowKind::Abc), TimeStepRule::FdAbc);
        assert_eq!("fd-kolmogorov".parse::<TimeStepRule>().unwrap(), TimeStepRule::FdKolmogorov);
    }

    #[test]
    fn intermediate_rule_never_exceeds_eikonal_limit() {
        let h = TWO_PI / 64.0;
        for a in [0.0, 0.5, 1.0, 16.0, 1e4] {
            assert!(time_step_rule(a, h, TimeStepRule::Intermediate, 1.0) <= eikonal_limit(h));
        }
    }

    #[test]
    fn plan_is_palindromic() {
        let plan = SplitStepPlan::strang();
        assert!(plan.is_palindromic());
        assert_eq!(plan.ops.len(), 7);
        let total: f64 = plan
            .ops
            .iter()
            .filter(|op| matches!(op, SplitOp::Convect { axis: 0, .. }))
            .map(|op| op.fraction())
            .sum();
        assert_eq!(total, 1.0);
        assert_eq!(plan.ops[3], SplitOp::Eikonal { fraction_num: 1, fraction_den: 1 });
    }

    #[test]
    fn flat_field_regresses_at_unit_speed() {
        let g = Grid3::new(16).unwrap();
        let dt = 0.5 * eikonal_limit(g.h());
        let mut u = ScalarField3::zeros(g);
        for m in 1..=5 {
            u = eikonal_step(&u, dt).unwrap();
            let expect = -(m as f64) * dt;
            assert!(u.data().iter().all(|v| (v - expect).abs() < 1e-14));
        }
    }

    #[test]
    fn eikonal_rejects_large_steps() {
        let g = Grid3::new(16).unwrap();
        let u = ScalarField3::zeros(g);
        let err = eikonal_step(&u, 1.01 * eikonal_limit(g.h())).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn x_sweep_of_flat_field_subtracts_displacement() {
        let g = Grid3::new(16).unwrap();
        let flow = FlowField::new(FlowKind::Abc, 2.0);
        let dt = 0.1;
        let u = ScalarField3::zeros(g);
        let out = convection_sweep(&u, &flow, 0, dt);
        for i in 0..16 {
            for j in 0..16 {
                for k in 0..16 {
                    let p = Vec3::new(g.coord(i), g.coord(j), g.coord(k));
                    let expect = -flow.component(0, p) * dt;
                    assert!((out.get(i, j, k) - expect).abs() < 1e-14);
                }
            }
        }
        // y and z sweeps carry no planar term
        for axis in [1, 2] {
            assert!(convection_sweep(&u, &flow, axis, dt).data().iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn integer_shift_is_exact_translation() {
        // Kolmogorov y-velocity is A sin x; at x = π/2 and A·dt = h it moves one cell
        let g = Grid3::new(16).unwrap();
        let flow = FlowField::new(FlowKind::Kolmogorov, 1.0);
        let u = ScalarField3::from_fn(g, |x, y, z| (y + 0.1 * x).sin() + z.cos());
        let out = convection_sweep(&u, &flow, 1, g.h());
        let i = 4; // x = π/2
        for j in 0..16 {
            for k in 0..16 {
                let expect = u.get_wrapped(i as isize, j as isize - 1, k as isize);
                assert!((out.get(i, j, k) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_intensity_skips_convection() {
        let g = Grid3::new(16).unwrap();
        let u = ScalarField3::from_fn(g, |x, y, z| 0.1 * (x + 2.0 * y).sin() * z.cos());
        let dt = 0.05;
        let flow = FlowField::new(FlowKind::Abc, 0.0);
        let a = strang_step(&u, &SplitStepPlan::strang(), &flow, dt).unwrap();
        let b = eikonal_step(&u, dt).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig { n: 16, t_final: 1.0, ..Default::default() };
        assert!(ok.validate().is_ok());
        assert!(ok.dt() <= ok.rule_dt());
        assert!((ok.dt() * ok.step_count() as f64 - 1.0).abs() < 1e-12);
        for bad in [
            SolverConfig { n: 4, ..ok.clone() },
            SolverConfig { intensity: -1.0, ..ok.clone() },
            SolverConfig { cfl_safety: 1.5, ..ok.clone() },
            SolverConfig { t_final: 0.0, ..ok.clone() },
            SolverConfig { fit_window: Some((0.8, 0.2)), ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn least_squares_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (slope, se) = least_squares_slope(&xs, &ys).unwrap();
        assert!((slope - 2.5).abs() < 1e-14);
        assert!(se < 1e-12);
        assert!(least_squares_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn laminar_run_on_small_grid() {
        let cfg = SolverConfig { n: 16, intensity: 0.0, t_final: 1.0, snapshots: 2, ..Default::default() };
        let out = run(&cfg).unwrap();
        assert!((out.series.s_t() - 1.0).abs() < 1e-12);
        assert_eq!(out.snapshots.len(), 2);
        assert!((out.snapshots[1].time - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level_set_adds_planar_part() {
        let g = Grid3::new(8).unwrap();
        let u = ScalarField3::constant(g, -1.0);
        let gf = level_set_function(&u);
        assert!((gf.get(3, 1, 2) - (g.coord(3) - 1.0)).abs() < 1e-15);
    }
}
