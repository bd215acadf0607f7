//! Simulation and control of a pneumatic soft continuum arm mounted on a
//! hybrid PAM/piston prismatic base.
//!
//! The arm is modelled with piecewise constant curvature (PCC) segments, each
//! bending about the base x and y axes.  The prismatic joint translates the arm
//! base along +z.  Generalized coordinates are ordered
//! `[extension, phi_x_0, phi_y_0, phi_x_1, phi_y_1, ...]`.
//!
//! Module map:
//!
//! - [`model`]: parameter set, configurations and poses
//! - [`kinematics`]: PCC forward kinematics and tip Jacobians
//! - [`dynamics`]: lumped-mass Lagrangian terms and RK4 integration
//! - [`actuation`]: piston and PAM models, hysteresis, actuation matrix
//! - [`control`]: task-space PD, nullspace-damped inverse dynamics, pressure inversion
//! - [`workspace`]: Monte-Carlo reachable workspace and shell fitting

pub mod actuation;
pub mod control;
pub mod dynamics;
mod error;
pub mod kinematics;
pub mod linalg;
pub mod model;
pub mod workspace;

pub use error::{Error, Result};
pub use model::{Configuration, ConfigurationRates, Pose, RobotModel};
