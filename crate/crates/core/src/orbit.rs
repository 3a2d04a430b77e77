//! Asymptotic-speed maps, one-parameter shooting for the ballistic orbits, and
//! their periodicity certificates.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{symmetry_catalog, FlowField, FlowKind, TrajectoryAction, Vec3, TWO_PI};
use crate::ode::{self, Axis, Direction, IntegratorConfig, PlaneEvent};

/// `x̄(0, y_j, z_k)` on a uniform `ny × nz` grid of `[0, 2π)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedMap {
    pub flow_kind: FlowKind,
    pub intensity: f64,
    pub ny: usize,
    pub nz: usize,
    pub t_eval: f64,
    /// Row-major in `y`: `values[j * nz + k]`. Failed cells are `NaN`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapExtreme {
    pub j: usize,
    pub k: usize,
    pub y: f64,
    pub z: f64,
    pub value: f64,
}

impl SpeedMap {
    pub fn dy(&self) -> f64 {
        TWO_PI / self.ny as f64
    }

    pub fn dz(&self) -> f64 {
        TWO_PI / self.nz as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    pub fn z(&self, k: usize) -> f64 {
        k as f64 * self.dz()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.nz + k]
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> Option<MapExtreme> {
        let mut best: Option<(usize, f64)> = None;
        for (idx, &v) in self.values.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|(_, b)| better(v, b)) {
                best = Some((idx, v));
            }
        }
        best.map(|(idx, value)| {
            let (j, k) = (idx / self.nz, idx % self.nz);
            MapExtreme { j, k, y: self.y(j), z: self.z(k), value }
        })
    }

    pub fn argmax(&self) -> Option<MapExtreme> {
        self.extreme(|a, b| a > b)
    }

    pub fn argmin(&self) -> Option<MapExtreme> {
        self.extreme(|a, b| a < b)
    }

    /// Periodic index distance (Chebyshev) from cell `(j, k)` to the point `(y, z)`,
    /// in cells.
    pub fn cell_distance(&self, j: usize, k: usize, y: f64, z: f64) -> f64 {
        let wrap = |d: f64| {
            let d = d.rem_euclid(TWO_PI);
            d.min(TWO_PI - d)
        };
        let dj = wrap(self.y(j) - y) / self.dy();
        let dk = wrap(self.z(k) - z) / self.dz();
        dj.max(dk)
    }
}

/// Cells are integrated in parallel and independently.
pub fn compute_speed_map(
    flow: &FlowField,
    ny: usize,
    nz: usize,
    t_eval: f64,
    cfg: &IntegratorConfig,
) -> Result<SpeedMap> {
    if ny < 2 || nz < 2 {
        return Err(Error::InvalidArgument("speed map needs at least 2×2 cells".into()));
    }
    if !(t_eval > 0.0) {
        return Err(Error::InvalidArgument("t_eval must be positive".into()));
    }
    cfg.validate()?;
    let dy = TWO_PI / ny as f64;
    let dz = TWO_PI / nz as f64;
    let values = (0..ny * nz)
        .into_par_iter()
        .map(|idx| {
            let (j, k) = (idx / nz, idx % nz);
            let x0 = Vec3::new(0.0, j as f64 * dy, k as f64 * dz);
            ode::asymptotic_speed(flow, x0, t_eval, cfg).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(SpeedMap {
        flow_kind: flow.kind,
        intensity: flow.intensity,
        ny,
        nz,
        t_eval,
        values,
    })
}

/// Certificate of an orbit of the unit-intensity flow that is periodic modulo
/// `2π` along `e₁`: `X(τ) = X(0) + displacement` with `displacement = ±2π e₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCertificate {
    pub flow_kind: FlowKind,
    pub start: Vec3,
    pub period: f64,
    pub displacement: Vec3,
    pub closure_residual: f64,
    /// `a_i`: offset of the start point on the shooting segment.
    pub shooting_parameter: f64,
    /// `b_i`: offset of the quarter-period point along its symmetry axis.
    pub axis_offset: f64,
    pub quarter_time: f64,
    pub quarter_point: Vec3,
    /// `+1` along `e₁`, `-1` along `-e₁`.
    pub direction: i8,
}

impl OrbitCertificate {
    /// Mean speed along `e₁`, `±2π/τ`.
    pub fn mean_speed(&self) -> f64 {
        self.displacement.x / self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub integrator: IntegratorConfig,
    pub bracket: (f64, f64),
    /// Bisection stops once the bracket is narrower than this.
    pub parameter_tol: f64,
    pub certification_tol: f64,
}

impl ShootingConfig {
    pub fn for_flow(kind: FlowKind) -> Self {
        let bracket = match kind {
            FlowKind::Abc => (0.30, 0.40),
            FlowKind::Kolmogorov => (0.02, 0.04),
        };
        Self {
            integrator: IntegratorConfig::with_tolerances(1e-11, 1e-13),
            bracket,
            parameter_tol: 1e-14,
            certification_tol: 1e-5,
        }
    }
}

/// Shooting family and section for each flow.
struct ShootingProblem {
    start: fn(f64) -> Vec3,
    section: PlaneEvent,
    /// Signed transverse coordinate of the section crossing.
    objective: fn(Vec3) -> f64,
    /// `b_i` from the crossing point.
    axis_offset: fn(Vec3) -> f64,
}

fn problem(kind: FlowKind) -> ShootingProblem {
    match kind {
        // start (0, -a, π/2); section x = π/2; face sign of y
        FlowKind::Abc => ShootingProblem {
            start: |a| Vec3::new(0.0, -a, FRAC_PI_2),
            section: PlaneEvent::new(Axis::X, FRAC_PI_2, Direction::Increasing),
            objective: |p| p.y,
            axis_offset: |p| p.z - FRAC_PI_2,
        },
        // start (0, a, π/2); section y = π; face sign of x - π/2
        FlowKind::Kolmogorov => ShootingProblem {
            start: |a| Vec3::new(0.0, a, FRAC_PI_2),
            section: PlaneEvent::new(Axis::Y, PI, Direction::Increasing),
            objective: |p| p.x - FRAC_PI_2,
            axis_offset: |p| p.z - PI,
        },
    }
}

const SECTION_HORIZON: f64 = 20.0;

fn section_crossing(kind: FlowKind, a: f64, cfg: &IntegratorConfig) -> Result<(f64, Vec3)> {
    let prob = problem(kind);
    let flow = FlowField::unit(kind);
    ode::first_event(&flow, (prob.start)(a), &prob.section, cfg, SECTION_HORIZON)
}

/// Bisection on the shooting parameter followed by certification of the full
/// period. Only a sign change at the bracket ends is assumed.
pub fn shoot_ballistic(kind: FlowKind, cfg: &ShootingConfig) -> Result<OrbitCertificate> {
    let prob = problem(kind);
    let objective = |a: f64| -> Result<f64> {
        let (_, p) = section_crossing(kind, a, &cfg.integrator)?;
        Ok((prob.objective)(p))
    };
    let (mut lo, mut hi) = cfg.bracket;
    let f_lo = objective(lo)?;
    let f_hi = objective(hi)?;
    if f_lo * f_hi > 0.0 || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::BracketFailure { lo, hi, f_lo, f_hi });
    }
    let lo_sign = f_lo.signum();
    while hi - lo > cfg.parameter_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = objective(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let (quarter_time, quarter_point) = section_crossing(kind, a, &cfg.integrator)?;
    let start = (prob.start)(a);
    let cert = close_period(
        kind,
        start,
        1,
        quarter_time,
        &cfg.integrator,
        cfg.certification_tol,
    )?;
    Ok(OrbitCertificate {
        shooting_parameter: a,
        axis_offset: (prob.axis_offset)(quarter_point),
        quarter_point,
        ..cert
    })
}

pub fn shoot_ballistic_abc() -> Result<OrbitCertificate> {
    shoot_ballistic(FlowKind::Abc, &ShootingConfig::for_flow(FlowKind::Abc))
}

pub fn shoot_ballistic_kolmogorov() -> Result<OrbitCertificate> {
    shoot_ballistic(FlowKind::Kolmogorov, &ShootingConfig::for_flow(FlowKind::Kolmogorov))
}

/// Integrate from `start` until `x` has moved by `direction·2π`, and measure how
/// far the endpoint is from `start + direction·2π e₁`.
fn close_period(
    kind: FlowKind,
    start: Vec3,
    direction: i8,
    quarter_time: f64,
    cfg: &IntegratorConfig,
    tolerance: f64,
) -> Result<OrbitCertificate> {
    let flow = FlowField::unit(kind);
    let sign = f64::from(direction);
    let event = PlaneEvent::new(
        Axis::X,
        start.x + sign * TWO_PI,
        if direction > 0 { Direction::Increasing } else { Direction::Decreasing },
    );
    let horizon = 8.0 * quarter_time.max(1.0);
    let (period, end) = ode::first_event(&flow, start, &event, cfg, horizon)?;
    let displacement = Vec3::new(sign * TWO_PI, 0.0, 0.0);
    let residual = (end - start - displacement).norm();
    if !(residual <= tolerance) {
        return Err(Error::ClosureExceeded { residual, tolerance });
    }
    Ok(OrbitCertificate {
        flow_kind: kind,
        start,
        period,
        displacement,
        closure_residual: residual,
        shooting_parameter: f64::NAN,
        axis_offset: f64::NAN,
        quarter_time,
        quarter_point: Vec3::ZERO,
        direction,
    })
}

/// `‖X(τ) − X(0) − displacement‖` after re-integrating to the certified
/// period with `cfg`.
pub fn closure_residual(cert: &OrbitCertificate, cfg: &IntegratorConfig) -> Result<f64> {
    closure_residual_after(cert, 1, cfg)
}

/// Same as [`closure_residual`] over `periods` consecutive periods.
pub fn closure_residual_after(
    cert: &OrbitCertificate,
    periods: usize,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let flow = FlowField::unit(cert.flow_kind);
    let n = periods as f64;
    let end = ode::integrate_endpoint(&flow, cert.start, n * cert.period, cfg)?;
    Ok((end - cert.start - cert.displacement * n).norm())
}

/// The symmetry that maps the `+e₁` orbit onto the `−e₁` orbit.
fn reversing_relation(kind: FlowKind) -> crate::flow::SymmetryRelation {
    symmetry_catalog(kind)
        .into_iter()
        .find(|r| {
            r.trajectory_action() == TrajectoryAction::Forward && r.input_map.sign[0] < 0.0
        })
        .expect("every built-in flow has a direction-reversing symmetry")
}

/// Maps a certified `+e₁` orbit to its `−e₁` counterpart and certifies it by
/// direct integration.
pub fn negative_orbit(cert: &OrbitCertificate, cfg: &ShootingConfig) -> Result<OrbitCertificate> {
    if cert.direction != 1 {
        return Err(Error::InvalidArgument("negative_orbit expects a +e1 orbit".into()));
    }
    let rel = reversing_relation(cert.flow_kind);
    let start = rel.input_map.apply(cert.start);
    let mut neg = close_period(
        cert.flow_kind,
        start,
        -1,
        cert.quarter_time,
        &cfg.integrator,
        cfg.certification_tol,
    )?;
    neg.shooting_parameter = cert.shooting_parameter;
    neg.axis_offset = cert.axis_offset;
    neg.quarter_point = rel.input_map.apply(cert.quarter_point);
    Ok(neg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub flow_kind: FlowKind,
    pub direction: i8,
    pub checks: Vec<SymmetryCheck>,
}

impl SymmetryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&SymmetryCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Symmetry composition of one certified orbit: quarter-period point on the
/// first symmetry axis, half-period point on the second, and the closure they
/// imply.
pub fn verify_symmetry_composition(
    cert: &OrbitCertificate,
    cfg: &IntegratorConfig,
    tolerance: f64,
) -> Result<SymmetryReport> {
    let kind = cert.flow_kind;
    let a = cert.shooting_parameter;
    let tau = cert.period;
    // predictions for the +e1 orbit
    let (quarter_axis, half_point, shifted_start) = match kind {
        FlowKind::Abc => (
            (FRAC_PI_2, 0.0),
            Vec3::new(PI, a, FRAC_PI_2),
            None,
        ),
        FlowKind::Kolmogorov => (
            (FRAC_PI_2, PI),
            Vec3::new(PI, TWO_PI - a, FRAC_PI_2),
            Some(Vec3::new(0.0, PI + a, FRAC_PI_2)),
        ),
    };
    let map = |p: Vec3| {
        if cert.direction > 0 {
            p
        } else {
            reversing_relation(kind).input_map.apply(p)
        }
    };

    let flow = FlowField::unit(kind);
    let pts = ode::sample(&flow, cert.start, &[0.25 * tau, 0.5 * tau, tau], cfg)?;
    let mut checks = Vec::new();
    let mut push = |name: &str, error: f64| {
        checks.push(SymmetryCheck {
            name: name.to_string(),
            error,
            tolerance,
            passed: error <= tolerance,
        })
    };

    // the axis is a line along z; the reversing relations have diagonal linear
    // part, so the mapped axis is again a z-line
    let q = pts[0];
    let axis_pt = map(Vec3::new(quarter_axis.0, quarter_axis.1, 0.0));
    let quarter_err = (q.x - axis_pt.x).hypot(q.y - axis_pt.y);
    push("quarter point on symmetry axis", quarter_err);
    push("half-period point", (pts[1] - map(half_point)).norm());
    push(
        "full-period closure",
        (pts[2] - cert.start - cert.displacement).norm(),
    );
    push(
        "period equals four quarter times",
        (tau - 4.0 * cert.quarter_time).abs(),
    );
    if kind == FlowKind::Abc && cert.direction > 0 {
        push("a equals b", (cert.axis_offset - a).abs());
    }
    if let (Some(shifted), true) = (shifted_start, cert.direction > 0) {
        let end = ode::integrate_endpoint(&flow, shifted, tau, cfg)?;
        push(
            "shifted orbit is ballistic",
            (end - shifted - cert.displacement).norm(),
        );
    }
    Ok(SymmetryReport { flow_kind: kind, direction: cert.direction, checks })
}
