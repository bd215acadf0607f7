mod common;

use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;
use rand::Rng;
use softarm::actuation::actuator_forces;
use softarm::control::{
    command_from_demand, control_step, inverse_dynamics_projection, invert_for_pressure, pd_reference, ControllerGains,
    TaskReference,
};
use softarm::dynamics::{assemble_terms, forward_dynamics, SimState};
use softarm::kinematics::{tip_jacobian, tip_position};
use softarm::linalg::damped_pinv;
use softarm::{Configuration, ConfigurationRates};

fn dense(j: &nalgebra::Matrix3xX<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, j.ncols(), j.as_slice())
}

fn well_conditioned(rng: &mut impl Rng) -> Configuration {
    let m = common::model();
    loop {
        let q = common::random_configuration(rng, &m, 1.2);
        let sv = dense(&tip_jacobian(&m, &q).unwrap()).singular_values();
        if sv.min() > 1e-2 {
            return q;
        }
    }
}

#[test]
fn pseudoinverse_is_right_inverse() {
    let m = common::model();
    let mut rng = common::rng(41);
    for _ in 0..500 {
        let j = dense(&tip_jacobian(&m, &well_conditioned(&mut rng)).unwrap());
        let exact = &j * damped_pinv(&j, 0.0).unwrap();
        assert!((exact - DMatrix::identity(3, 3)).amax() < 1e-10);
        // damping biases JJ⁺ by at most λ²/σ_min²
        let damped = &j * damped_pinv(&j, 1e-3).unwrap();
        assert!((damped - DMatrix::identity(3, 3)).amax() < 1e-6 / 1e-4);
    }
}

#[test]
fn nullspace_projection_is_invisible_at_the_tip() {
    let m = common::model();
    let mut rng = common::rng(42);
    for _ in 0..500 {
        let j = dense(&tip_jacobian(&m, &well_conditioned(&mut rng)).unwrap());
        let pinv = damped_pinv(&j, 0.0).unwrap();
        let v = nalgebra::DVector::from_fn(m.dof(), |_, _| rng.random_range(-1.0..1.0));
        let projected = (DMatrix::identity(m.dof(), m.dof()) - &pinv * &j) * v;
        assert!((&j * projected).amax() < 1e-10);
    }
}

#[test]
fn singular_jacobian_needs_damping() {
    let m = common::model();
    // straight arm with the base locked: no coordinate moves the tip along z
    let q = Configuration::new(0.0, &[[0.0, 0.0], [0.0, 0.0]]);
    let mut j = dense(&tip_jacobian(&m, &q).unwrap());
    j.column_mut(0).fill(0.0);
    assert!(damped_pinv(&j, 0.0).is_err());
    assert!(j.singular_values().min() < 1e-12);
    let pinv = damped_pinv(&j, 1e-2).unwrap();
    assert!(pinv.iter().all(|v| v.is_finite()));
}

#[test]
fn pressure_inversion_round_trip() {
    let m = common::model();
    let h = common::hysteresis();
    let gains = common::gains();
    let mut rng = common::rng(43);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < 100 {
        attempts += 1;
        assert!(attempts < 10_000, "too few feasible draws");
        let q = well_conditioned(&mut rng);
        let qd = common::random_rates(&mut rng, &m, 0.3);
        let state = SimState { q, qd, t: 0.0 };
        let terms = assemble_terms(&m, &state.q, &state.qd).unwrap();
        let x_ref = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let qdd_ref = inverse_dynamics_projection(&terms, &x_ref, &state.qd, &gains).unwrap();
        let demand = invert_for_pressure(&terms, &state.q, &state.qd, &qdd_ref, &gains).unwrap();
        let (cmd, saturated) = command_from_demand(&m, &h, &demand, &state);
        if saturated {
            continue;
        }
        accepted += 1;
        let tau = actuator_forces(&m, &h, &state.q, &state.qd, &cmd);
        let qdd = forward_dynamics(&m, &state, &tau).unwrap();
        let err = (qdd.as_vector() - qdd_ref.as_vector()).norm() / qdd_ref.as_vector().norm().max(1e-3);
        assert!(err < 0.02, "joint acceleration round trip off by {:.3}%", 100.0 * err);
        let tip_acc = &terms.jacobian * qdd.as_vector() + &terms.jacobian_dot * state.qd.as_vector();
        let tip_err = (tip_acc - x_ref).norm() / x_ref.norm();
        assert!(
            tip_err < 0.02,
            "task acceleration round trip off by {:.3}%",
            100.0 * tip_err
        );
    }
}

#[test]
fn pd_terms_saturate_independently() {
    let gains = common::gains();
    let r = TaskReference::stationary(Vector3::new(1.0, 0.0, 0.0));
    let a = pd_reference(&gains, &r, &Vector3::zeros(), &Vector3::new(0.0, 10.0, 0.0));
    assert!((a.x - gains.accel_saturation).abs() < 1e-12);
    assert!((a.y + gains.accel_saturation).abs() < 1e-12);
    let r = TaskReference {
        acceleration: Vector3::new(0.0, 0.0, 20.0),
        ..TaskReference::stationary(Vector3::zeros())
    };
    // feedforward is not saturated
    assert_eq!(pd_reference(&gains, &r, &Vector3::zeros(), &Vector3::zeros()).z, 20.0);
}

#[test]
fn locked_base_never_commands_the_piston() {
    let m = common::model().with_prismatic_locked();
    let h = common::hysteresis();
    let gains = common::gains();
    let state = SimState::at_rest(Configuration::new(0.0, &[[0.2, 0.1], [0.1, -0.2]]));
    let tip = tip_position(&m, &state.q).unwrap();
    let r = TaskReference::stationary(tip - Vector3::new(0.0, 0.0, 0.05));
    let out = control_step(&m, &h, &gains, &r, &state).unwrap();
    assert_eq!(out.command.piston, 0.0);
}

fn gains_strategy() -> impl Strategy<Value = ControllerGains> {
    (1.0f64..400.0, 1.0f64..60.0, 0.5f64..20.0, 1e-4f64..1e-1).prop_map(|(kp, kd, s, l)| ControllerGains {
        kp,
        kd,
        accel_saturation: s,
        pinv_damping: l,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn commands_stay_within_valve_limits(
        bends in proptest::collection::vec(-1.5f64..1.5, 4),
        rates in proptest::collection::vec(-3.0f64..3.0, 5),
        ext in 0.0f64..0.08,
        target in proptest::collection::vec(-0.5f64..0.5, 3),
        gains in gains_strategy(),
    ) {
        let m = common::model();
        let h = common::hysteresis();
        let mut r = rates.clone();
        r[0] *= 0.05;
        let state = SimState {
            q: Configuration::new(ext, &[[bends[0], bends[1]], [bends[2], bends[3]]]),
            qd: ConfigurationRates::new(r[0], &[[r[1], r[2]], [r[3], r[4]]]),
            t: 0.0,
        };
        let reference = TaskReference::stationary(Vector3::new(target[0], target[1], target[2]));
        let out = control_step(&m, &h, &gains, &reference, &state).unwrap();
        prop_assert!(out.command.check(&m).is_ok());
        prop_assert!(out.command.max_pressure() <= m.pressure_limit);
        prop_assert!(out.command.arm_chambers.chunks(3).all(|c| c.contains(&0.0)));
    }
}
