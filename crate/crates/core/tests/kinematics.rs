mod common;

use nalgebra::{DVector, Matrix3xX, Vector3};
use proptest::prelude::*;
use rand::Rng;
use softarm::kinematics::{
    forward_kinematics, jacobian_time_derivative, segment_transform, tip_jacobian, tip_position, SERIES_THRESHOLD_RAD,
};
use softarm::{Configuration, ConfigurationRates, Pose};

#[test]
fn segment_matches_integrated_arc() {
    let mut rng = common::rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = rng.random_range(-3.0..3.0);
        let b = rng.random_range(-3.0..3.0);
        let len = rng.random_range(0.05..0.3);
        let pose = segment_transform(a, b, len).unwrap();
        let (p, r) = common::arc_integrated(a, b, len, 2000);
        worst = worst.max((pose.position - p).norm());
        assert!((pose.orientation - r).norm() < 1e-9);
    }
    assert!(worst < 1e-9, "worst position error {worst:e} m");
}

#[test]
fn spot_value_against_arc_integration() {
    let pose = segment_transform(0.3, -0.4, 0.12).unwrap();
    let (p, _) = common::arc_integrated(0.3, -0.4, 0.12, 4000);
    assert!((pose.position - p).norm() < 1e-9);
}

#[test]
fn chain_matches_hand_composed_closed_form() {
    let m = common::model();
    let mut rng = common::rng(12);
    for _ in 0..200 {
        let q = common::random_configuration(&mut rng, &m, 2.0);
        let poses = forward_kinematics(&m, &q).unwrap();
        let mut frame = Pose::translation(Vector3::new(0.0, 0.0, q.prismatic()));
        for (s, pose) in poses.iter().enumerate() {
            let [a, b] = q.segment(s);
            let (p, r) = common::arc_closed_form(a, b, m.segment_lengths[s]);
            frame = frame.compose(&Pose {
                position: p,
                orientation: r,
            });
            assert!((frame.position - pose.position).norm() < 1e-13);
            assert!((frame.orientation - pose.orientation).norm() < 1e-12);
        }
    }
}

fn finite_difference_jacobian(q: &Configuration, h: f64) -> Matrix3xX<f64> {
    let m = common::model();
    let n = q.len();
    let mut j = Matrix3xX::zeros(n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = h;
        let plus = Configuration::from_vector(q.as_vector() + &e).unwrap();
        let minus = Configuration::from_vector(q.as_vector() - &e).unwrap();
        let col = (tip_position(&m, &plus).unwrap() - tip_position(&m, &minus).unwrap()) / (2.0 * h);
        j.set_column(i, &col);
    }
    j
}

#[test]
fn jacobian_matches_central_differences() {
    let m = common::model();
    let mut rng = common::rng(13);
    for _ in 0..1000 {
        let q = common::random_configuration(&mut rng, &m, 2.0);
        let j = tip_jacobian(&m, &q).unwrap();
        let fd = finite_difference_jacobian(&q, 1e-6);
        assert!((j - fd).amax() < 1e-6);
    }
}

#[test]
fn jacobian_is_accurate_near_straight() {
    // derivative series branch, where cancellation would hurt most
    let m = common::model();
    let q = Configuration::new(0.01, &[[2e-5, -1e-5], [3e-4, 1e-3]]);
    let fd = finite_difference_jacobian(&q, 1e-7);
    assert!((tip_jacobian(&m, &q).unwrap() - fd).amax() < 1e-7);
}

#[test]
fn jacobian_rate_matches_symmetric_difference() {
    let m = common::model();
    let mut rng = common::rng(14);
    let h = 1e-6;
    for _ in 0..200 {
        let q = common::random_configuration(&mut rng, &m, 1.5);
        let qd = common::random_rates(&mut rng, &m, 1.0);
        let jdot = jacobian_time_derivative(&m, &q, &qd).unwrap();
        let plus = Configuration::from_vector(q.as_vector() + qd.as_vector() * h).unwrap();
        let minus = Configuration::from_vector(q.as_vector() - qd.as_vector() * h).unwrap();
        let oracle = (tip_jacobian(&m, &plus).unwrap() - tip_jacobian(&m, &minus).unwrap()) / (2.0 * h);
        assert!((jdot - oracle).amax() < 1e-5);
    }
}

#[test]
fn tip_never_exceeds_chain_length() {
    let m = common::model();
    let mut rng = common::rng(15);
    for _ in 0..100_000 {
        let q = common::random_configuration(&mut rng, &m, 3.0);
        let d = tip_position(&m, &q).unwrap().norm();
        assert!(d <= q.prismatic() + m.arm_length() + 1e-12);
    }
}

#[test]
fn continuous_across_series_switch() {
    // straddle the switch; only the first-order change L/2 * dphi may remain
    for &delta in &[1e-9, 1e-8, 1e-7] {
        let lo = SERIES_THRESHOLD_RAD - delta;
        let hi = SERIES_THRESHOLD_RAD + delta;
        let a = segment_transform(lo * 0.6, lo * 0.8, 0.125).unwrap();
        let b = segment_transform(hi * 0.6, hi * 0.8, 0.125).unwrap();
        let predicted = 0.5 * 0.125 * 2.0 * delta;
        let d = (a.position - b.position).norm();
        assert!((d - predicted).abs() < 1e-14, "jump {d:e} at delta {delta:e}");
        assert!((a.orientation - b.orientation).norm() < 4.0 * delta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn composed_rotations_stay_orthonormal(
        bends in proptest::collection::vec(-3.0f64..3.0, 2..12),
        ext in 0.0f64..0.08,
    ) {
        let segs: Vec<[f64; 2]> = bends.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let mut m = common::model();
        m.segment_lengths = vec![0.1; segs.len()];
        m.segment_masses = vec![0.1; segs.len()];
        m.segment_stiffness = vec![0.5; segs.len()];
        m.segment_damping = vec![0.0; segs.len()];
        let q = Configuration::new(ext, &segs);
        for pose in forward_kinematics(&m, &q).unwrap() {
            prop_assert!(pose.orthonormality_error() < 1e-10);
            prop_assert!((pose.orientation.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn prismatic_column_is_vertical(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0, e in 0.0f64..0.08,
    ) {
        let m = common::model();
        let j = tip_jacobian(&m, &Configuration::new(e, &[[a, b], [c, d]])).unwrap();
        prop_assert_eq!(j.column(0).into_owned(), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn zero_rate_gives_zero_jdot(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let m = common::model();
        let q = Configuration::new(0.02, &[[a, b], [b, a]]);
        let jd = jacobian_time_derivative(&m, &q, &ConfigurationRates::zeros(&m)).unwrap();
        prop_assert_eq!(jd.amax(), 0.0);
    }
}
