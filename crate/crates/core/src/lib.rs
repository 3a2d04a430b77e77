//! Ballistic orbits of the ABC and Kolmogorov flows, the front-speed bounds
//! they imply for the G-equation, and a semi-Lagrangian WENO solver that
//! measures turbulent flame speeds directly.

pub mod error;
pub mod flow;
pub mod ode;

pub use error::{Error, Result};
pub use flow::{FlowField, FlowKind, Vec3, VelocityField};
pub mod orbit;
pub mod grid;
pub mod solver;
pub mod bounds;
