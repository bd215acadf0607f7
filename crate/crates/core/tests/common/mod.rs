#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softarm::actuation::{HysteresisMode, HysteresisModel, PressureCurve};
use softarm::control::ControllerGains;
use softarm::{Configuration, ConfigurationRates, RobotModel};

pub fn model() -> RobotModel {
    RobotModel {
        segment_lengths: vec![0.125, 0.125],
        segment_masses: vec![0.1, 0.1],
        lumped_masses_per_segment: 5,
        shaft_mass: 0.15,
        piston_area: 1.0e-4,
        pam_count: 4,
        lever_count: 2,
        lever_ratio: 2.5,
        pam_area: 5.0e-5,
        stroke_max: 0.08,
        chamber_moment_arm: 0.012,
        chamber_gain: 4.0e-4,
        segment_stiffness: vec![0.5, 0.5],
        segment_damping: vec![0.02, 0.02],
        pressure_limit: 2.0e5,
        gravity: Vector3::new(0.0, 0.0, -9.81),
        bend_limit: std::f64::consts::FRAC_PI_2,
        prismatic_locked: false,
    }
    .validated()
    .unwrap()
}

pub fn hysteresis() -> HysteresisModel {
    HysteresisModel::new(
        PressureCurve::affine(0.0, 2.0e4, 0.08, 1.2e5).unwrap(),
        PressureCurve::affine(0.0, 4.0e4, 0.08, 1.4e5).unwrap(),
        -0.005,
        0.005,
        HysteresisMode::Interpolated,
    )
    .unwrap()
}

pub fn gains() -> ControllerGains {
    ControllerGains {
        kp: 100.0,
        kd: 20.0,
        accel_saturation: 5.0,
        pinv_damping: 1e-3,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_configuration(rng: &mut impl Rng, model: &RobotModel, bend: f64) -> Configuration {
    let segs: Vec<[f64; 2]> = (0..model.segment_count())
        .map(|_| [rng.random_range(-bend..bend), rng.random_range(-bend..bend)])
        .collect();
    Configuration::new(rng.random_range(0.0..model.stroke_max), &segs)
}

pub fn random_rates(rng: &mut impl Rng, model: &RobotModel, scale: f64) -> ConfigurationRates {
    let segs: Vec<[f64; 2]> = (0..model.segment_count())
        .map(|_| [rng.random_range(-scale..scale), rng.random_range(-scale..scale)])
        .collect();
    ConfigurationRates::new(rng.random_range(-0.1 * scale..0.1 * scale), &segs)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Textbook arc in bending-plane form: `θ, β` and `Rz(β)Ry(θ)Rz(−β)`.
pub fn arc_closed_form(phi_x: f64, phi_y: f64, len: f64) -> (Vector3<f64>, Matrix3<f64>) {
    let theta = phi_x.hypot(phi_y);
    if theta == 0.0 {
        return (Vector3::new(0.0, 0.0, len), Matrix3::identity());
    }
    let beta = phi_y.atan2(phi_x);
    let rho = len / theta;
    let lateral = rho * (1.0 - theta.cos());
    let p = Vector3::new(lateral * beta.cos(), lateral * beta.sin(), rho * theta.sin());
    (p, rot_z(beta) * rot_y(theta) * rot_z(-beta))
}

/// Integrates the arc centerline `p' = t`, `R' = κ[k]×R` with RK4.
pub fn arc_integrated(phi_x: f64, phi_y: f64, len: f64, steps: usize) -> (Vector3<f64>, Matrix3<f64>) {
    let theta = phi_x.hypot(phi_y);
    // bending axis scaled by curvature
    let w = if theta == 0.0 {
        Vector3::zeros()
    } else {
        Vector3::new(-phi_y, phi_x, 0.0) / len
    };
    let wx = Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0);
    let f = |r: &Matrix3<f64>| -> (Vector3<f64>, Matrix3<f64>) { (r.column(2).into_owned(), wx * r) };
    let h = len / steps as f64;
    let mut p = Vector3::zeros();
    let mut r = Matrix3::identity();
    for _ in 0..steps {
        let (k1p, k1r) = f(&r);
        let (k2p, k2r) = f(&(r + k1r * (0.5 * h)));
        let (k3p, k3r) = f(&(r + k2r * (0.5 * h)));
        let (k4p, k4r) = f(&(r + k3r * h));
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        r += (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (h / 6.0);
    }
    (p, r)
}
