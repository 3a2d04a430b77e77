//! Adaptive Dormand–Prince 5(4) integration of streamlines `ẋ = V(x)` with
//! continuous output and plane-crossing events.
//!
//! Positions are never wrapped: a trajectory that travels one period along
//! `e₁` ends with `x` increased by `2π`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Vec3, VelocityField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Order of the propagated solution. Only 5 is available.
    pub method_order: u32,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.25,
            method_order: 5,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    /// Both tolerances divided by `factor`.
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidArgument("max_step must be positive".into()));
        }
        if self.method_order < 4 {
            return Err(Error::InvalidArgument("method_order must be at least 4".into()));
        }
        if self.method_order != 5 {
            return Err(Error::InvalidArgument(format!(
                "method_order {} not available (only 5)",
                self.method_order
            )));
        }
        Ok(())
    }
}

/// Accepted step times and states of one streamline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec3>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, Vec3)> {
        Some((*self.times.last()?, *self.points.last()?))
    }

    /// Points reduced modulo 2π.
    pub fn wrapped_points(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.wrapped()).collect()
    }

    /// Sum of chord lengths.
    pub fn polyline_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
    Any,
}

/// The plane `p[axis] = level`, crossed in `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneEvent {
    pub axis: Axis,
    pub level: f64,
    pub direction: Direction,
}

impl PlaneEvent {
    pub fn new(axis: Axis, level: f64, direction: Direction) -> Self {
        Self { axis, level, direction }
    }

    fn value(&self, p: Vec3) -> f64 {
        p[self.axis.index()] - self.level
    }

    fn crosses(&self, g0: f64, g1: f64) -> bool {
        match self.direction {
            Direction::Increasing => g0 < 0.0 && g1 >= 0.0,
            Direction::Decreasing => g0 > 0.0 && g1 <= 0.0,
            Direction::Any => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
        }
    }
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec3; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> Vec3 {
        self.coeffs[0]
    }

    pub fn end(&self) -> Vec3 {
        self.coeffs[0] + self.coeffs[1]
    }

    /// State at `t ∈ [t0, t0 + h]`, fourth-order accurate.
    pub fn eval(&self, t: f64) -> Vec3 {
        if self.h == 0.0 {
            return self.coeffs[0];
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coeffs;
        c[0] + (c[1] + (c[2] + (c[3] + c[4] * th1) * th) * th1) * th
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-by-step driver. Each call to [`Stepper::step`] performs exactly one
/// accepted step (retrying rejected ones internally).
pub struct Stepper<'a, F: VelocityField + ?Sized> {
    field: &'a F,
    cfg: IntegratorConfig,
    t: f64,
    y: Vec3,
    f: Vec3,
    h: f64,
    steps: usize,
}

impl<'a, F: VelocityField + ?Sized> Stepper<'a, F> {
    pub fn new(field: &'a F, x0: Vec3, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let f = field.velocity(x0);
        Ok(Self {
            field,
            cfg,
            t: 0.0,
            y: x0,
            f,
            h: cfg.max_step.min(1e-2),
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> Vec3 {
        self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advance by one accepted step without passing `t_stop`.
    pub fn step(&mut self, t_stop: f64) -> Result<DenseStep> {
        if self.steps >= self.cfg.max_steps {
            return Err(Error::TooManySteps { steps: self.steps, t_end: t_stop });
        }
        let v = |p: Vec3| self.field.velocity(p);
        let y = self.y;
        let k1 = self.f;
        let mut h = self.h.min(self.cfg.max_step);
        loop {
            let remaining = t_stop - self.t;
            let tiny = 1e-14 * self.t.abs().max(1.0);
            // stretch rather than leave a sliver behind
            let last = h >= remaining - 64.0 * tiny;
            if last {
                h = remaining;
            }
            if last && h <= tiny {
                let y1 = y + k1 * h;
                let step = DenseStep { t0: self.t, h, coeffs: [y, y1 - y, Vec3::ZERO, Vec3::ZERO, Vec3::ZERO] };
                self.t = t_stop;
                self.y = y1;
                self.f = v(y1);
                self.steps += 1;
                return Ok(step);
            }
            if h <= tiny {
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }
            let k2 = v(y + k1 * (h * A21));
            let k3 = v(y + (k1 * A31 + k2 * A32) * h);
            let k4 = v(y + (k1 * A41 + k2 * A42 + k3 * A43) * h);
            let k5 = v(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
            let k6 = v(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
            let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let k7 = v(y1);
            let e = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;

            let mut acc = 0.0;
            for i in 0..3 {
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y1[i].abs());
                acc += (e[i] / sc).powi(2);
            }
            let err = (acc / 3.0).sqrt();
            if !err.is_finite() {
                h *= 0.2;
                continue;
            }
            if err <= 1.0 {
                let factor = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
                let ydiff = y1 - y;
                let bspl = k1 * h - ydiff;
                let step = DenseStep {
                    t0: self.t,
                    h,
                    coeffs: [
                        y,
                        ydiff,
                        bspl,
                        ydiff - k7 * h - bspl,
                        (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
                    ],
                };
                self.t = if last { t_stop } else { self.t + h };
                self.y = y1;
                self.f = k7;
                self.steps += 1;
                // keep the controller's proposal even when the step was clipped
                if !last || factor < 1.0 {
                    self.h = (h * factor).min(self.cfg.max_step);
                }
                return Ok(step);
            }
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
}

/// Integrate from `x0` at `t=0` to `t_end`, recording every accepted step.
pub fn integrate<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec3,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_horizon(t_end)?;
    let mut stepper = Stepper::new(field, x0, *cfg)?;
    let mut traj = Trajectory { times: vec![0.0], points: vec![x0] };
    while stepper.time() < t_end {
        stepper.step(t_end)?;
        traj.times.push(stepper.time());
        traj.points.push(stepper.state());
    }
    Ok(traj)
}

/// State at `t_end` only.
pub fn integrate_endpoint<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec3,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec3> {
    check_horizon(t_end)?;
    let mut stepper = Stepper::new(field, x0, *cfg)?;
    while stepper.time() < t_end {
        stepper.step(t_end)?;
    }
    Ok(stepper.state())
}

/// States at the given nondecreasing, nonnegative sample times, read from
/// the continuous extension.
pub fn sample<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec3,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec3>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("sample times must be sorted and nonnegative".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let Some(&t_end) = times.last() else {
        return Ok(out);
    };
    let mut stepper = Stepper::new(field, x0, *cfg)?;
    let mut idx = 0;
    while idx < times.len() && times[idx] <= 0.0 {
        out.push(x0);
        idx += 1;
    }
    while idx < times.len() {
        let seg = stepper.step(t_end)?;
        while idx < times.len() && times[idx] <= seg.t1() {
            out.push(if times[idx] == seg.t1() { seg.end() } else { seg.eval(times[idx]) });
            idx += 1;
        }
    }
    Ok(out)
}

/// Earliest crossing of `event` in `(0, t_max]`.
///
/// Each accepted step is scanned at a few interior points of its continuous
/// extension; the bracketing sub-interval is then bisected to `1e-10` in time.
pub fn first_event<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec3,
    event: &PlaneEvent,
    cfg: &IntegratorConfig,
    t_max: f64,
) -> Result<(f64, Vec3)> {
    check_horizon(t_max)?;
    let mut stepper = Stepper::new(field, x0, *cfg)?;
    while stepper.time() < t_max {
        let seg = stepper.step(t_max)?;
        if let Some(hit) = locate_in_step(&seg, event) {
            return Ok(hit);
        }
    }
    Err(Error::NoCrossing { t_max })
}

const EVENT_SCAN: usize = 4;
const EVENT_TIME_TOL: f64 = 1e-10;

pub(crate) fn locate_in_step(seg: &DenseStep, event: &PlaneEvent) -> Option<(f64, Vec3)> {
    let mut ta = seg.t0;
    let mut ga = event.value(seg.start());
    for s in 1..=EVENT_SCAN {
        let tb = if s == EVENT_SCAN { seg.t1() } else { seg.t0 + seg.h * s as f64 / EVENT_SCAN as f64 };
        let pb = if s == EVENT_SCAN { seg.end() } else { seg.eval(tb) };
        let gb = event.value(pb);
        if event.crosses(ga, gb) {
            let (mut lo, mut hi) = (ta, tb);
            let (mut glo, mut ghi) = (ga, gb);
            while hi - lo > EVENT_TIME_TOL {
                let mid = 0.5 * (lo + hi);
                let gm = event.value(seg.eval(mid));
                if gm * ga > 0.0 {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                    ghi = gm;
                }
            }
            // secant on the final bracket
            let t = if ghi != glo { lo - glo * (hi - lo) / (ghi - glo) } else { hi };
            let t = t.clamp(lo, hi);
            return Some((t, seg.eval(t)));
        }
        ta = tb;
        ga = gb;
    }
    None
}

/// `X(t_eval)·e₁ / t_eval`
pub fn asymptotic_speed<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec3,
    t_eval: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let end = integrate_endpoint(field, x0, t_eval, cfg)?;
    Ok((end.x - x0.x) / t_eval)
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("integration horizon must be positive, got {t}")))
    }
}
