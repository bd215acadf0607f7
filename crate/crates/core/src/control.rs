//! Task-space controller.
//!
//! The pipeline per tick is
//!
//! 1. saturated PD on the tip position gives a reference task acceleration,
//! 2. a damped pseudoinverse of the tip Jacobian maps it to joint
//!    accelerations, with joint-velocity damping projected into the nullspace,
//! 3. the equation of motion is inverted for signed actuator pressures,
//! 4. chamber pressures are offset to be non-negative and the prismatic demand
//!    is routed to the PAMs (up) or the piston (down).
//!
//! The PAMs take the static pressure `p_s(q, q̇)` as their feedforward in place
//! of the prismatic gravity term, so that term is left out of step 3.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::actuation::{self, HysteresisModel, PressureCommand, CHAMBERS_PER_SEGMENT};
use crate::dynamics::{self, DynamicsTerms, SimState};
use crate::linalg;
use crate::model::{Configuration, ConfigurationRates, RobotModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Proportional gain (1/s²).
    pub kp: f64,
    /// Derivative gain (1/s), also used for nullspace velocity damping.
    pub kd: f64,
    /// Magnitude limit on each feedback term (m/s²).
    pub accel_saturation: f64,
    /// Damping λ of the pseudoinverses.
    pub pinv_damping: f64,
}

impl ControllerGains {
    pub fn validated(self) -> Result<Self> {
        let pos = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Configuration {
                    field: field.into(),
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        pos("kp", self.kp)?;
        pos("kd", self.kd)?;
        pos("accel_saturation", self.accel_saturation)?;
        if !(self.pinv_damping.is_finite() && self.pinv_damping >= 0.0) {
            return Err(Error::Configuration {
                field: "pinv_damping".into(),
                reason: format!("must be non-negative, got {}", self.pinv_damping),
            });
        }
        Ok(self)
    }
}

/// Desired tip position with its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskReference {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

impl TaskReference {
    pub fn stationary(position: Vector3<f64>) -> Self {
        TaskReference {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.velocity.iter())
            .chain(self.acceleration.iter())
            .all(|v| v.is_finite())
    }
}

fn saturate(v: Vector3<f64>, limit: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}

/// `ẍ_ref = ẍ_des + sat(k_p(x_des − x)) + sat(k_d(ẋ_des − ẋ))`.
pub fn pd_reference(
    gains: &ControllerGains,
    reference: &TaskReference,
    x: &Vector3<f64>,
    xd: &Vector3<f64>,
) -> Vector3<f64> {
    let p = saturate((reference.position - x) * gains.kp, gains.accel_saturation);
    let d = saturate((reference.velocity - xd) * gains.kd, gains.accel_saturation);
    reference.acceleration + p + d
}

/// `q̈_ref = J⁺(ẍ_ref − J̇q̇) + (I − J⁺J)(−k_d q̇)`.
pub fn inverse_dynamics_projection(
    terms: &DynamicsTerms,
    accel_ref: &Vector3<f64>,
    qd: &ConfigurationRates,
    gains: &ControllerGains,
) -> Result<ConfigurationRates> {
    let j = DMatrix::from_column_slice(3, terms.jacobian.ncols(), terms.jacobian.as_slice());
    let n = j.ncols();
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 coordinates, got {n}")));
    }
    let pinv = linalg::damped_pinv(&j, gains.pinv_damping)?;
    let v = qd.as_vector();
    let task = DVector::from_column_slice((accel_ref - &terms.jacobian_dot * v).as_slice());
    let null_input = v * -gains.kd;
    let projector = DMatrix::identity(n, n) - &pinv * &j;
    ConfigurationRates::from_vector(&pinv * task + projector * null_input)
}

/// Signed actuator demand before arbitration and offsetting.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureDemand {
    /// Required generalized force, prismatic gravity excluded.
    pub generalized_force: DVector<f64>,
    /// Least-norm signed chamber pressures per segment (Pa).
    pub chambers: Vec<[f64; CHAMBERS_PER_SEGMENT]>,
    /// Positive: PAM overpressure. Negative: piston pressure, negated (Pa).
    pub prismatic: f64,
}

/// Inverts `A p = B q̈_ref + K q + D q̇ + c + g` for signed pressures, leaving
/// out the prismatic gravity entry (the PAM static pressure replaces it).
///
/// The prismatic column of the inverted matrix is the PAM gain for an upward
/// demand and the piston area for a downward one, so the signed pressure is
/// directly the arbitration input.
pub fn invert_for_pressure(
    terms: &DynamicsTerms,
    q: &Configuration,
    qd: &ConfigurationRates,
    accel_ref: &ConfigurationRates,
    gains: &ControllerGains,
) -> Result<PressureDemand> {
    let mut tau = &terms.mass * accel_ref.as_vector()
        + &terms.stiffness * q.as_vector()
        + &terms.damping * qd.as_vector()
        + &terms.coriolis
        + &terms.gravity;
    tau[0] -= terms.gravity[0];

    let n = tau.len();
    let chamber_cols = terms.actuation.ncols() - 2;
    let mut signed = DMatrix::zeros(n, chamber_cols + 1);
    signed
        .view_mut((0, 0), (n, chamber_cols))
        .copy_from(&terms.actuation.view((0, 0), (n, chamber_cols)));
    signed[(0, chamber_cols)] = if tau[0] >= 0.0 {
        terms.actuation[(0, chamber_cols)]
    } else {
        -terms.actuation[(0, chamber_cols + 1)]
    };
    let p = linalg::row_scaled_damped_pinv(&signed, gains.pinv_damping)? * &tau;

    let chambers = p
        .as_slice()
        .chunks(CHAMBERS_PER_SEGMENT)
        .take(chamber_cols / CHAMBERS_PER_SEGMENT)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(PressureDemand {
        generalized_force: tau,
        chambers,
        prismatic: p[chamber_cols],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub command: PressureCommand,
    /// Some pressure was clipped at the limit.
    pub saturated: bool,
    pub tip: Vector3<f64>,
    pub tip_velocity: Vector3<f64>,
    pub accel_ref: Vector3<f64>,
}

/// PD → inverse dynamics → pressure inversion → allocation and arbitration.
pub fn control_step(
    model: &RobotModel,
    h: &HysteresisModel,
    gains: &ControllerGains,
    reference: &TaskReference,
    state: &SimState,
) -> Result<ControlOutput> {
    if !reference.is_finite() {
        return Err(Error::Domain("task reference is not finite".into()));
    }
    let mut terms = dynamics::assemble_terms(model, &state.q, &state.qd)?;
    if model.prismatic_locked {
        terms.jacobian.column_mut(0).fill(0.0);
        terms.jacobian_dot.column_mut(0).fill(0.0);
    }
    let tip_velocity = &terms.jacobian * state.qd.as_vector();
    let accel_ref = pd_reference(gains, reference, &terms.tip, &tip_velocity);
    let qdd_ref = inverse_dynamics_projection(&terms, &accel_ref, &state.qd, gains)?;
    let demand = invert_for_pressure(&terms, &state.q, &state.qd, &qdd_ref, gains)?;
    let (command, saturated) = command_from_demand(model, h, &demand, state);
    if !command.flatten().iter().all(|p| p.is_finite()) {
        return Err(Error::Numerical("controller produced a non-finite pressure".into()));
    }
    Ok(ControlOutput {
        command,
        saturated,
        tip: terms.tip,
        tip_velocity,
        accel_ref,
    })
}

/// Turns a signed demand into valve pressures within `[0, p_max]`.
pub fn command_from_demand(
    model: &RobotModel,
    h: &HysteresisModel,
    demand: &PressureDemand,
    state: &SimState,
) -> (PressureCommand, bool) {
    let mut saturated = false;
    let mut arm_chambers = Vec::with_capacity(CHAMBERS_PER_SEGMENT * demand.chambers.len());
    for signed in &demand.chambers {
        let alloc = actuation::shift_to_nonnegative(*signed, model);
        saturated |= alloc.saturated;
        arm_chambers.extend_from_slice(&alloc.pressures);
    }
    let prismatic = if model.prismatic_locked { 0.0 } else { demand.prismatic };
    let pris = actuation::arbitrate_prismatic(model, prismatic, h, state.q.prismatic(), state.qd[0]);
    saturated |= pris.saturated;
    (
        PressureCommand {
            arm_chambers,
            pam: pris.pam,
            piston: pris.piston,
        },
        saturated,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::testutil::hysteresis;
    use crate::model::testutil::model;

    fn gains() -> ControllerGains {
        ControllerGains {
            kp: 100.0,
            kd: 20.0,
            accel_saturation: 5.0,
            pinv_damping: 1e-3,
        }
    }

    #[test]
    fn zero_error_passes_feedforward() {
        let r = TaskReference {
            position: Vector3::new(0.01, 0.02, 0.3),
            velocity: Vector3::new(0.1, 0.0, 0.0),
            acceleration: Vector3::new(0.0, 0.3, -0.2),
        };
        assert_eq!(pd_reference(&gains(), &r, &r.position, &r.velocity), r.acceleration);
    }

    #[test]
    fn proportional_term() {
        let r = TaskReference::stationary(Vector3::new(0.01, 0.0, 0.0));
        let a = pd_reference(&gains(), &r, &Vector3::zeros(), &Vector3::zeros());
        assert!((a - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn feedback_saturates_at_limit() {
        let r = TaskReference::stationary(Vector3::new(0.3, -0.4, 0.0));
        let a = pd_reference(&gains(), &r, &Vector3::zeros(), &Vector3::zeros());
        assert!((a.norm() - 5.0).abs() < 1e-12);
        assert!((a.normalize() - Vector3::new(0.6, -0.8, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gains_validation() {
        assert!(gains().validated().is_ok());
        assert!(ControllerGains { kp: 0.0, ..gains() }.validated().is_err());
        assert!(ControllerGains {
            pinv_damping: -1.0,
            ..gains()
        }
        .validated()
        .is_err());
    }

    #[test]
    fn rest_and_zero_reference_gives_zero_acceleration() {
        let m = model();
        let q = Configuration::new(0.04, &[[0.2, 0.1], [-0.3, 0.2]]);
        let qd = ConfigurationRates::zeros(&m);
        let terms = dynamics::assemble_terms(&m, &q, &qd).unwrap();
        let acc = inverse_dynamics_projection(&terms, &Vector3::zeros(), &qd, &gains()).unwrap();
        assert_eq!(acc.as_vector().amax(), 0.0);
    }

    #[test]
    fn singular_jacobian_without_damping_is_reported() {
        let m = model().with_prismatic_locked();
        let q = Configuration::zeros(&m);
        let qd = ConfigurationRates::zeros(&m);
        let mut terms = dynamics::assemble_terms(&m, &q, &qd).unwrap();
        terms.jacobian.column_mut(0).fill(0.0);
        let undamped = ControllerGains {
            pinv_damping: 0.0,
            ..gains()
        };
        assert!(matches!(
            inverse_dynamics_projection(&terms, &Vector3::zeros(), &qd, &undamped),
            Err(Error::Numerical(_))
        ));
        assert!(inverse_dynamics_projection(&terms, &Vector3::zeros(), &qd, &gains()).is_ok());
    }

    #[test]
    fn static_straight_pose_needs_no_signed_pressure() {
        let m = model();
        let q = Configuration::new(0.04, &[[0.0, 0.0], [0.0, 0.0]]);
        let qd = ConfigurationRates::zeros(&m);
        let terms = dynamics::assemble_terms(&m, &q, &qd).unwrap();
        let demand = invert_for_pressure(&terms, &q, &qd, &ConfigurationRates::zeros(&m), &gains()).unwrap();
        assert_eq!(demand.prismatic, 0.0);
        assert!(demand.chambers.iter().flatten().all(|&p| p.abs() < 1e-12));
    }

    #[test]
    fn no_gravity_rest_gives_zero_pressures() {
        let mut m = model();
        m.gravity = Vector3::zeros();
        let q = Configuration::zeros(&m);
        let qd = ConfigurationRates::zeros(&m);
        let terms = dynamics::assemble_terms(&m, &q, &qd).unwrap();
        let demand = invert_for_pressure(&terms, &q, &qd, &ConfigurationRates::zeros(&m), &gains()).unwrap();
        assert_eq!(demand.prismatic, 0.0);
        assert!(demand.chambers.iter().flatten().all(|&p| p == 0.0));
    }

    #[test]
    fn step_reference_above_and_below_tip() {
        let m = model();
        let h = hysteresis();
        let state = SimState::at_rest(Configuration::new(0.04, &[[0.0, 0.0], [0.0, 0.0]]));
        let tip = Vector3::new(0.0, 0.0, 0.29);
        let up = control_step(
            &m,
            &h,
            &gains(),
            &TaskReference::stationary(tip + Vector3::z() * 0.02),
            &state,
        )
        .unwrap();
        let p_s = actuation::static_pressure(&h, 0.04, 0.0);
        assert!(up.command.pam > p_s);
        assert_eq!(up.command.piston, 0.0);

        let down = control_step(
            &m,
            &h,
            &gains(),
            &TaskReference::stationary(tip - Vector3::z() * 0.02),
            &state,
        )
        .unwrap();
        assert!(down.command.piston > 0.0);
        assert!((down.command.pam - p_s).abs() < 1e-9);
    }

    #[test]
    fn hold_command_at_reference_is_static_pressure() {
        let m = model();
        let h = hysteresis();
        let state = SimState::at_rest(Configuration::new(0.03, &[[0.0, 0.0], [0.0, 0.0]]));
        let r = TaskReference::stationary(Vector3::new(0.0, 0.0, 0.28));
        let out = control_step(&m, &h, &gains(), &r, &state).unwrap();
        assert!((out.command.pam - actuation::static_pressure(&h, 0.03, 0.0)).abs() < 1e-6);
        assert_eq!(out.command.piston, 0.0);
        assert!(!out.saturated);
    }
}
