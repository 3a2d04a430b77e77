//! Steady 2π-periodic velocity fields: the ABC flow and the Kolmogorov flow.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const E1: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Element-wise (Hadamard) product.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Component along `axis` (0 = x, 1 = y, 2 = z).
    pub fn component(self, axis: usize) -> f64 {
        self[axis]
    }

    /// Each coordinate reduced into `[0, 2π)`.
    pub fn wrapped(self) -> Vec3 {
        Vec3::new(
            self.x.rem_euclid(TWO_PI),
            self.y.rem_euclid(TWO_PI),
            self.z.rem_euclid(TWO_PI),
        )
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A steady velocity field on R³.
///
/// The ODE integrator is generic over this trait so that periodic fields other
/// than the two built-in flows can be traced.
pub trait VelocityField: Sync {
    fn velocity(&self, p: Vec3) -> Vec3;
}

impl<F: Fn(Vec3) -> Vec3 + Sync> VelocityField for F {
    fn velocity(&self, p: Vec3) -> Vec3 {
        self(p)
    }
}

/// The field `-V`, used to run trajectories backward in time.
#[derive(Debug, Clone, Copy)]
pub struct Reversed<'a, F: ?Sized>(pub &'a F);

impl<F: VelocityField + ?Sized> VelocityField for Reversed<'_, F> {
    fn velocity(&self, p: Vec3) -> Vec3 {
        -self.0.velocity(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Abc,
    Kolmogorov,
}

impl FlowKind {
    pub const ALL: [FlowKind; 2] = [FlowKind::Abc, FlowKind::Kolmogorov];

    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Abc => "abc",
            FlowKind::Kolmogorov => "kolmogorov",
        }
    }

    /// Unit-intensity velocity `V_i(p)`.
    pub fn unit_velocity(self, p: Vec3) -> Vec3 {
        match self {
            FlowKind::Abc => Vec3::new(
                p.z.sin() + p.y.cos(),
                p.x.sin() + p.z.cos(),
                p.y.sin() + p.x.cos(),
            ),
            FlowKind::Kolmogorov => Vec3::new(p.z.sin(), p.x.sin(), p.y.sin()),
        }
    }

    /// Component `axis` of the unit-intensity velocity. For both flows this
    /// component does not depend on the coordinate along `axis`.
    pub fn unit_component(self, axis: usize, p: Vec3) -> f64 {
        match (self, axis) {
            (FlowKind::Abc, 0) => p.z.sin() + p.y.cos(),
            (FlowKind::Abc, 1) => p.x.sin() + p.z.cos(),
            (FlowKind::Abc, 2) => p.y.sin() + p.x.cos(),
            (FlowKind::Kolmogorov, 0) => p.z.sin(),
            (FlowKind::Kolmogorov, 1) => p.x.sin(),
            (FlowKind::Kolmogorov, 2) => p.y.sin(),
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn sup_norms(self) -> SupNorms {
        sup_norms(self)
    }

    pub fn symmetry_catalog(self) -> Vec<SymmetryRelation> {
        symmetry_catalog(self)
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FlowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "abc" => Ok(FlowKind::Abc),
            "kolmogorov" | "archontis" => Ok(FlowKind::Kolmogorov),
            other => Err(Error::InvalidArgument(format!("unknown flow `{other}`"))),
        }
    }
}

/// One of the two flows at intensity `A`, i.e. the field `A·V_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub kind: FlowKind,
    pub intensity: f64,
}

impl FlowField {
    pub fn new(kind: FlowKind, intensity: f64) -> Self {
        Self { kind, intensity }
    }

    pub fn unit(kind: FlowKind) -> Self {
        Self::new(kind, 1.0)
    }

    pub fn evaluate(&self, p: Vec3) -> Vec3 {
        self.kind.unit_velocity(p) * self.intensity
    }

    pub fn component(&self, axis: usize, p: Vec3) -> f64 {
        self.intensity * self.kind.unit_component(axis, p)
    }
}

impl VelocityField for FlowField {
    fn velocity(&self, p: Vec3) -> Vec3 {
        self.evaluate(p)
    }
}

/// Analytic sup-norms of the unit-intensity field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNorms {
    /// `‖V_i‖∞`
    pub full: f64,
    /// `‖V_i·e₁‖∞`
    pub e1: f64,
}

pub fn sup_norms(kind: FlowKind) -> SupNorms {
    match kind {
        FlowKind::Abc => SupNorms { full: 6f64.sqrt(), e1: 2.0 },
        FlowKind::Kolmogorov => SupNorms { full: 3f64.sqrt(), e1: 1.0 },
    }
}

/// `out[k] = sign[k] * p[perm[k]] + offset[k]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineMap {
    pub perm: [usize; 3],
    pub sign: [f64; 3],
    pub offset: Vec3,
}

impl AffineMap {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            self.sign[0] * p[self.perm[0]] + self.offset.x,
            self.sign[1] * p[self.perm[1]] + self.offset.y,
            self.sign[2] * p[self.perm[2]] + self.offset.z,
        )
    }

    /// The linear part applied to a displacement.
    pub fn apply_linear(&self, d: Vec3) -> Vec3 {
        Vec3::new(
            self.sign[0] * d[self.perm[0]],
            self.sign[1] * d[self.perm[1]],
            self.sign[2] * d[self.perm[2]],
        )
    }
}

/// A pointwise identity `V(input_map(p)) = output_sign ⊙ V(p)[output_perm]`.
///
/// `output_perm` is the identity for every relation except the coordinate
/// swap `σ:(x,y,z)↦(x,z,y)` of the ABC flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryRelation {
    pub name: &'static str,
    pub input_map: AffineMap,
    pub output_perm: [usize; 3],
    pub output_sign: Vec3,
}

/// How a symmetry acts on trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryAction {
    /// `t ↦ R(X(t))` is a trajectory.
    Forward,
    /// `t ↦ R(X(-t))` is a trajectory.
    Reversed,
    /// The relation does not map streamlines to streamlines.
    None,
}

impl SymmetryRelation {
    pub fn transform_velocity(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            v[self.output_perm[0]],
            v[self.output_perm[1]],
            v[self.output_perm[2]],
        )
        .hadamard(self.output_sign)
    }

    /// `‖V(input_map(p)) − output_sign ⊙ V(p)‖`
    pub fn residual(&self, kind: FlowKind, p: Vec3) -> f64 {
        let lhs = kind.unit_velocity(self.input_map.apply(p));
        let rhs = self.transform_velocity(kind.unit_velocity(p));
        (lhs - rhs).norm()
    }

    pub fn trajectory_action(&self) -> TrajectoryAction {
        let lin = &self.input_map;
        let out_sign = self.output_sign.to_array();
        let same_perm = lin.perm == self.output_perm;
        if same_perm && (0..3).all(|k| lin.sign[k] == out_sign[k]) {
            TrajectoryAction::Forward
        } else if same_perm && (0..3).all(|k| lin.sign[k] == -out_sign[k]) {
            TrajectoryAction::Reversed
        } else {
            TrajectoryAction::None
        }
    }
}

const ID: [usize; 3] = [0, 1, 2];

fn relation(
    name: &'static str,
    perm: [usize; 3],
    sign: [f64; 3],
    offset: [f64; 3],
    output_perm: [usize; 3],
    output_sign: [f64; 3],
) -> SymmetryRelation {
    SymmetryRelation {
        name,
        input_map: AffineMap { perm, sign, offset: Vec3::from_array(offset) },
        output_perm,
        output_sign: Vec3::from_array(output_sign),
    }
}

/// The symmetries behind the periodicity arguments for the ballistic orbits.
pub fn symmetry_catalog(kind: FlowKind) -> Vec<SymmetryRelation> {
    match kind {
        FlowKind::Abc => vec![
            relation(
                "axis x=pi/2,y=0",
                ID,
                [-1.0, -1.0, 1.0],
                [PI, 0.0, 0.0],
                ID,
                [1.0, 1.0, -1.0],
            ),
            relation(
                "axis x=pi,z=pi/2",
                ID,
                [-1.0, 1.0, -1.0],
                [TWO_PI, 0.0, PI],
                ID,
                [1.0, -1.0, 1.0],
            ),
            relation(
                "reverse direction",
                ID,
                [-1.0, -1.0, 1.0],
                [0.0, PI, -PI],
                ID,
                [-1.0, -1.0, 1.0],
            ),
            relation(
                "swap y,z",
                [0, 2, 1],
                [-1.0, -1.0, -1.0],
                [FRAC_PI_2, FRAC_PI_2, FRAC_PI_2],
                [0, 2, 1],
                [1.0, 1.0, 1.0],
            ),
        ],
        FlowKind::Kolmogorov => vec![
            relation(
                "axis x=pi/2,y=pi",
                ID,
                [-1.0, -1.0, 1.0],
                [PI, TWO_PI, 0.0],
                ID,
                [1.0, 1.0, -1.0],
            ),
            relation(
                "axis x=pi,z=pi/2",
                ID,
                [-1.0, 1.0, -1.0],
                [TWO_PI, 0.0, PI],
                ID,
                [1.0, -1.0, 1.0],
            ),
            relation(
                "point reflection",
                ID,
                [-1.0, -1.0, -1.0],
                [0.0, 0.0, 0.0],
                ID,
                [-1.0, -1.0, -1.0],
            ),
            relation(
                "shift y by pi",
                ID,
                [1.0, 1.0, 1.0],
                [0.0, PI, 0.0],
                ID,
                [1.0, 1.0, -1.0],
            ),
        ],
    }
}
