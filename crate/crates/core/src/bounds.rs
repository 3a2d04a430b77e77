//! Lower and upper lines bracketing the front speed `s_T(A)`.
//!
//! The upper line follows from `|∇G|`-growth at most `‖V·e₁‖∞·A + 1`.
//! The lower line comes from steering a particle along a ballistic orbit of
//! the flow; its period shrinks to the traced period `τ′` once the control
//! adds a unit speed along the orbit tangent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{sup_norms, FlowField, FlowKind, VelocityField, TWO_PI};
use crate::ode::{sample, IntegratorConfig};
use crate::orbit::OrbitCertificate;
use crate::solver::FrontSpeedSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundLines {
    pub flow_kind: FlowKind,
    pub lower_slope: f64,
    pub lower_intercept: f64,
    pub upper_slope: f64,
    pub upper_intercept: f64,
}

impl BoundLines {
    pub fn lower(&self, a: f64) -> f64 {
        self.lower_slope * a + self.lower_intercept
    }

    pub fn upper(&self, a: f64) -> f64 {
        self.upper_slope * a + self.upper_intercept
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.lower_slope, self.lower_intercept, self.upper_slope, self.upper_intercept]
    }
}

pub fn bound_lines(cert: &OrbitCertificate) -> BoundLines {
    let norms = sup_norms(cert.flow_kind);
    let tau = cert.period;
    BoundLines {
        flow_kind: cert.flow_kind,
        lower_slope: TWO_PI / tau,
        lower_intercept: TWO_PI / (tau * norms.full),
        upper_slope: norms.e1,
        upper_intercept: 1.0,
    }
}

/// An orbit re-timed under intensity `A` with unit tangential control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedOrbit {
    pub base: OrbitCertificate,
    pub intensity: f64,
    /// `τ′ = ∫₀^τ |V(X)| / (A|V(X)| + 1) dt`
    pub period: f64,
    /// `τ‖V‖∞ / (A‖V‖∞ + 1)`
    pub ceiling: f64,
    pub quadrature_n: usize,
}

impl TracedOrbit {
    /// Mean speed `2π/τ′` of the traced particle.
    pub fn speed(&self) -> f64 {
        TWO_PI / self.period
    }
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n % 2 == 0);
    let inner: f64 = values[1..n]
        .iter()
        .enumerate()
        .map(|(m, v)| if m % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    h / 3.0 * (values[0] + inner + values[n])
}

/// Composite Simpson quadrature of the traced-period integrand on
/// `quadrature_n` (rounded up to even) uniform panels of the base orbit.
pub fn traced_period(
    cert: &OrbitCertificate,
    intensity: f64,
    quadrature_n: usize,
    cfg: &IntegratorConfig,
) -> Result<TracedOrbit> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidArgument(format!("intensity must be >= 0, got {intensity}")));
    }
    if quadrature_n < 16 {
        return Err(Error::InvalidArgument(format!("quadrature_n must be >= 16, got {quadrature_n}")));
    }
    let panels = quadrature_n + quadrature_n % 2;
    let tau = cert.period;
    let h = tau / panels as f64;
    let times: Vec<f64> = (0..=panels).map(|m| m as f64 * h).collect();
    let field = FlowField::unit(cert.flow_kind);
    let points = sample(&field, cert.start, &times, cfg)?;
    let integrand: Vec<f64> = points
        .iter()
        .map(|&p| {
            let speed = field.velocity(p).norm();
            speed / (intensity * speed + 1.0)
        })
        .collect();
    let sup = sup_norms(cert.flow_kind).full;
    Ok(TracedOrbit {
        base: cert.clone(),
        intensity,
        period: simpson(&integrand, h),
        ceiling: tau * sup / (intensity * sup + 1.0),
        quadrature_n: panels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub intensity: f64,
    pub speed: f64,
    pub lower: f64,
    pub upper: f64,
    /// `speed / lower − 1`; negative means below the line.
    pub lower_margin: f64,
    /// `1 − speed / upper`; negative means above the line.
    pub upper_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lines: BoundLines,
    pub slack: f64,
    pub checks: Vec<BoundCheck>,
}

impl BoundsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Whether `speed` lies in `[(1 − slack)·lower(A), (1 + slack)·upper(A)]`.
pub fn check_speed(intensity: f64, speed: f64, lines: &BoundLines, slack: f64) -> BoundCheck {
    let lower = lines.lower(intensity);
    let upper = lines.upper(intensity);
    BoundCheck {
        intensity,
        speed,
        lower,
        upper,
        lower_margin: speed / lower - 1.0,
        upper_margin: 1.0 - speed / upper,
        passed: speed >= (1.0 - slack) * lower && speed <= (1.0 + slack) * upper,
    }
}

/// One check per series, using the fitted slope as the front speed.
pub fn check_speed_within_bounds(series: &[FrontSpeedSeries], lines: &BoundLines, slack: f64) -> BoundsReport {
    BoundsReport {
        lines: *lines,
        slack,
        checks: series
            .iter()
            .map(|s| check_speed(s.intensity, s.fitted_slope, lines, slack))
            .collect(),
    }
}
