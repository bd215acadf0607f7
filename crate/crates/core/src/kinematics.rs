//! Piecewise constant curvature forward kinematics and Jacobians.
//!
//! A segment with bend components `(phi_x, phi_y)` bends by the total angle
//! `θ = √(phi_x² + phi_y²)` in the plane at angle `atan2(phi_y, phi_x)` from the
//! base x axis. Writing `ω = (−phi_y, phi_x, 0)` and `W = [ω]×`, the tip is
//!
//! ```text
//! p = L · ( f1·phi_x, f1·phi_y, f2 )        R = I + f2·W + f1·W²
//! f1 = (1 − cos θ)/θ²                      f2 = sin θ / θ
//! ```
//!
//! Both shape functions are even in θ, so the map is smooth through the
//! straight pose; near θ = 0 they are evaluated by truncated series.

use nalgebra::{DVector, Matrix3, Matrix3xX, Vector3};

use crate::model::{Configuration, ConfigurationRates, Pose, RobotModel};
use crate::{Error, Result};

/// Below this total bend angle the shape functions switch to their series.
pub const SERIES_THRESHOLD_RAD: f64 = 1.0e-4;

/// The derivative functions `g = f'(θ)/θ` cancel badly for small θ, so they
/// use a longer series up to this angle.
const DERIVATIVE_SERIES_THRESHOLD_RAD: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
struct ShapeFunctions {
    f1: f64,
    f2: f64,
    /// f1'(θ)/θ
    g1: f64,
    /// f2'(θ)/θ
    g2: f64,
}

fn shape_functions(theta_sq: f64) -> ShapeFunctions {
    let theta = theta_sq.sqrt();
    let (f1, f2) = if theta < SERIES_THRESHOLD_RAD {
        shape_series(theta_sq)
    } else {
        shape_exact(theta)
    };
    let (g1, g2) = if theta < DERIVATIVE_SERIES_THRESHOLD_RAD {
        derivative_series(theta_sq)
    } else {
        let (s, c) = theta.sin_cos();
        let t3 = theta_sq * theta;
        ((theta * s - 2.0 * (1.0 - c)) / (t3 * theta), (theta * c - s) / t3)
    };
    ShapeFunctions { f1, f2, g1, g2 }
}

fn shape_series(t2: f64) -> (f64, f64) {
    let f1 = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    let f2 = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    (f1, f2)
}

fn shape_exact(theta: f64) -> (f64, f64) {
    let half = (0.5 * theta).sin();
    (2.0 * half * half / (theta * theta), theta.sin() / theta)
}

/// g1 = Σ_{k≥1} (−1)^k 2k θ^{2k−2} / (2k+2)!,  g2 = Σ_{k≥1} (−1)^k 2k θ^{2k−2} / (2k+1)!
fn derivative_series(t2: f64) -> (f64, f64) {
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    // inv_fact holds 1/(2k+1)! at the top of each iteration.
    let mut inv_fact = 1.0 / 6.0;
    let mut power = 1.0;
    let mut sign = -1.0;
    for k in 1..=12 {
        let kk = k as f64;
        let inv_fact_next = inv_fact / (2.0 * kk + 2.0);
        g2 += sign * 2.0 * kk * power * inv_fact;
        g1 += sign * 2.0 * kk * power * inv_fact_next;
        inv_fact = inv_fact_next / (2.0 * kk + 3.0);
        power *= t2;
        sign = -sign;
    }
    (g1, g2)
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn check_segment_inputs(phi_x: f64, phi_y: f64, length: f64) -> Result<()> {
    if !(phi_x.is_finite() && phi_y.is_finite() && length.is_finite()) {
        return Err(Error::Domain(format!(
            "segment inputs must be finite, got ({phi_x}, {phi_y}, {length})"
        )));
    }
    if length <= 0.0 {
        return Err(Error::Domain(format!("segment length must be positive, got {length}")));
    }
    Ok(())
}

fn arc_pose(phi_x: f64, phi_y: f64, length: f64, sf: &ShapeFunctions) -> Pose {
    let w = skew(&Vector3::new(-phi_y, phi_x, 0.0));
    Pose {
        position: Vector3::new(length * sf.f1 * phi_x, length * sf.f1 * phi_y, length * sf.f2),
        orientation: Matrix3::identity() + w * sf.f2 + w * w * sf.f1,
    }
}

/// Constant-curvature arc transform from segment base to segment tip.
pub fn segment_transform(phi_x: f64, phi_y: f64, length: f64) -> Result<Pose> {
    check_segment_inputs(phi_x, phi_y, length)?;
    let sf = shape_functions(phi_x * phi_x + phi_y * phi_y);
    Ok(arc_pose(phi_x, phi_y, length, &sf))
}

/// Segment pose together with its partial derivatives in `phi_x` and `phi_y`.
#[derive(Debug, Clone, Copy)]
struct SegmentJet {
    pose: Pose,
    dp: [Vector3<f64>; 2],
    dr: [Matrix3<f64>; 2],
}

fn segment_jet(a: f64, b: f64, length: f64) -> SegmentJet {
    let sf = shape_functions(a * a + b * b);
    let pose = arc_pose(a, b, length, &sf);
    let w = skew(&Vector3::new(-b, a, 0.0));
    let w2 = w * w;
    let wa = skew(&Vector3::new(0.0, 1.0, 0.0));
    let wb = skew(&Vector3::new(-1.0, 0.0, 0.0));
    let dp_a = Vector3::new(sf.f1 + sf.g1 * a * a, sf.g1 * a * b, sf.g2 * a) * length;
    let dp_b = Vector3::new(sf.g1 * a * b, sf.f1 + sf.g1 * b * b, sf.g2 * b) * length;
    let dr_a = w * (sf.g2 * a) + wa * sf.f2 + w2 * (sf.g1 * a) + (wa * w + w * wa) * sf.f1;
    let dr_b = w * (sf.g2 * b) + wb * sf.f2 + w2 * (sf.g1 * b) + (wb * w + w * wb) * sf.f1;
    SegmentJet {
        pose,
        dp: [dp_a, dp_b],
        dr: [dr_a, dr_b],
    }
}

/// A material point on the arm: `fraction` of the way along `segment`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPoint {
    pub segment: usize,
    pub fraction: f64,
}

/// Position and 3×n positional Jacobian of a material point.
#[derive(Debug, Clone)]
pub struct PointJacobian {
    pub position: Vector3<f64>,
    pub jacobian: Matrix3xX<f64>,
}

/// Evaluates positions and Jacobians of several material points in one pass
/// over the chain. The prismatic extension enters only as a final
/// translation, so the bend columns do not depend on it.
pub fn point_jacobians(model: &RobotModel, q: &Configuration, points: &[ArcPoint]) -> Result<Vec<PointJacobian>> {
    q.check(model)?;
    let n_seg = model.segment_count();
    let dof = model.dof();

    // Frames at the start of each segment, base at the (unextended) origin.
    let mut starts = Vec::with_capacity(n_seg + 1);
    let mut jets = Vec::with_capacity(n_seg);
    let mut frame = Pose::identity();
    starts.push(frame);
    for s in 0..n_seg {
        let [a, b] = q.segment(s);
        let jet = segment_jet(a, b, model.segment_lengths[s]);
        frame = frame.compose(&jet.pose);
        jets.push(jet);
        starts.push(frame);
    }

    let lift = Vector3::new(0.0, 0.0, q.prismatic());
    let mut out = Vec::with_capacity(points.len());
    for pt in points {
        if pt.segment >= n_seg || !(0.0..=1.0).contains(&pt.fraction) {
            return Err(Error::Domain(format!("invalid arc point {pt:?}")));
        }
        let k = pt.segment;
        let sigma = pt.fraction;
        let [a, b] = q.segment(k);
        let base = &starts[k];
        let (p, own_cols) = if sigma == 1.0 {
            (base.compose(&jets[k].pose).position, [jets[k].dp[0], jets[k].dp[1]])
        } else {
            let sub = segment_jet(sigma * a, sigma * b, sigma * model.segment_lengths[k]);
            (
                base.position + base.orientation * sub.pose.position,
                [sub.dp[0] * sigma, sub.dp[1] * sigma],
            )
        };

        let mut jac = Matrix3xX::zeros(dof);
        jac[(2, 0)] = 1.0;
        for (axis, col) in own_cols.iter().enumerate() {
            jac.set_column(1 + 2 * k + axis, &(base.orientation * col));
        }
        for j in 0..k {
            let start = &starts[j];
            let end = &starts[j + 1];
            // point relative to the tip of segment j, in that tip frame
            let r = end.orientation.transpose() * (p - end.position);
            for axis in 0..2 {
                let col = start.orientation * (jets[j].dp[axis] + jets[j].dr[axis] * r);
                jac.set_column(1 + 2 * j + axis, &col);
            }
        }
        out.push(PointJacobian {
            position: p + lift,
            jacobian: jac,
        });
    }
    Ok(out)
}

/// Tip pose of every segment in the base frame, prismatic offset applied first.
/// The last entry is the arm tip.
pub fn forward_kinematics(model: &RobotModel, q: &Configuration) -> Result<Vec<Pose>> {
    q.check(model)?;
    let mut frame = Pose::translation(Vector3::new(0.0, 0.0, q.prismatic()));
    let mut poses = Vec::with_capacity(model.segment_count());
    for (s, &len) in model.segment_lengths.iter().enumerate() {
        let [a, b] = q.segment(s);
        frame = frame.compose(&segment_transform(a, b, len)?);
        poses.push(frame);
    }
    Ok(poses)
}

pub fn tip_position(model: &RobotModel, q: &Configuration) -> Result<Vector3<f64>> {
    forward_kinematics(model, q).map(|p| p[p.len() - 1].position)
}

fn tip_point(model: &RobotModel) -> ArcPoint {
    ArcPoint {
        segment: model.segment_count() - 1,
        fraction: 1.0,
    }
}

/// Tip position and its 3×n Jacobian.
pub fn tip_position_and_jacobian(model: &RobotModel, q: &Configuration) -> Result<PointJacobian> {
    point_jacobians(model, q, &[tip_point(model)]).map(|mut v| v.remove(0))
}

/// ∂(tip position)/∂q, one column per generalized coordinate.
pub fn tip_jacobian(model: &RobotModel, q: &Configuration) -> Result<Matrix3xX<f64>> {
    tip_position_and_jacobian(model, q).map(|pj| pj.jacobian)
}

/// Time derivative of the tip Jacobian along `qd`, from a five-point
/// directional stencil of the analytic Jacobian.
pub fn jacobian_time_derivative(
    model: &RobotModel,
    q: &Configuration,
    qd: &ConfigurationRates,
) -> Result<Matrix3xX<f64>> {
    q.check(model)?;
    qd.check(model)?;
    let speed = qd.as_vector().amax();
    if speed == 0.0 {
        return Ok(Matrix3xX::zeros(model.dof()));
    }
    let dir = qd.as_vector() / speed;
    let h = 1.0e-3;
    let at = |s: f64| tip_jacobian(model, &shifted(q, &dir, s * h));
    let stencil = (at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * h);
    Ok(stencil * speed)
}

/// Tip velocity `J q̇`.
pub fn tip_velocity(jacobian: &Matrix3xX<f64>, qd: &ConfigurationRates) -> Vector3<f64> {
    jacobian * qd.as_vector()
}

pub(crate) fn shifted(q: &Configuration, dir: &DVector<f64>, h: f64) -> Configuration {
    Configuration::from_vector(q.as_vector() + dir * h).expect("shape preserved")
}
