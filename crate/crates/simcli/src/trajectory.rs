//! Task-space reference trajectories with analytic first and second
//! derivatives. All of them are C² in time.

use std::f64::consts::PI;

use nalgebra::Vector3;
use softarm::control::TaskReference;
use softarm::RobotModel;

use crate::config::Waypoint;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Circle in a horizontal plane rising by `pitch` per revolution, starting
    /// at `base + (radius, 0, 0)`.
    Helix {
        base: Vector3<f64>,
        radius: f64,
        pitch: f64,
        frequency: f64,
    },
    /// Circle rotated by `incline` about the x axis.
    Circle {
        center: Vector3<f64>,
        radius: f64,
        incline: f64,
        frequency: f64,
    },
    /// Rest-to-rest quintic from `start` to `end` over `duration`, then held.
    Line {
        start: Vector3<f64>,
        end: Vector3<f64>,
        duration: f64,
    },
    /// Quintic moves between waypoints with dwells, plus a gripper channel.
    Waypoints {
        start: Vector3<f64>,
        legs: Vec<Leg>,
    },
    Hold {
        position: Vector3<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub from: Vector3<f64>,
    pub to: Vector3<f64>,
    pub t_start: f64,
    pub move_s: f64,
    pub dwell_s: f64,
    pub gripper_closed: bool,
}

/// Quintic rest-to-rest blend `s(τ) = 10τ³ − 15τ⁴ + 6τ⁵` and its time derivatives.
pub fn quintic(t: f64, duration: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= duration {
        return (1.0, 0.0, 0.0);
    }
    let tau = t / duration;
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let s = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
    let sd = 30.0 * t2 * (1.0 - 2.0 * tau + t2) / duration;
    let sdd = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2) / (duration * duration);
    (s, sd, sdd)
}

fn blend(from: Vector3<f64>, to: Vector3<f64>, t: f64, duration: f64) -> TaskReference {
    let (s, sd, sdd) = quintic(t, duration);
    let d = to - from;
    TaskReference {
        position: from + d * s,
        velocity: d * sd,
        acceleration: d * sdd,
    }
}

impl Trajectory {
    pub fn waypoints(start: Vector3<f64>, waypoints: &[Waypoint]) -> Self {
        let mut legs = Vec::with_capacity(waypoints.len());
        let mut from = start;
        let mut t = 0.0;
        for w in waypoints {
            let to = Vector3::from(w.position_m);
            legs.push(Leg {
                from,
                to,
                t_start: t,
                move_s: w.move_s,
                dwell_s: w.dwell_s,
                gripper_closed: w.gripper_closed,
            });
            t += w.move_s + w.dwell_s;
            from = to;
        }
        Trajectory::Waypoints { start, legs }
    }

    pub fn sample(&self, t: f64) -> TaskReference {
        match self {
            Trajectory::Helix {
                base,
                radius,
                pitch,
                frequency,
            } => {
                let w = 2.0 * PI * frequency;
                let (s, c) = (w * t).sin_cos();
                let rise = pitch * frequency;
                TaskReference {
                    position: base + Vector3::new(radius * c, radius * s, rise * t),
                    velocity: Vector3::new(-radius * w * s, radius * w * c, rise),
                    acceleration: Vector3::new(-radius * w * w * c, -radius * w * w * s, 0.0),
                }
            }
            Trajectory::Circle {
                center,
                radius,
                incline,
                frequency,
            } => {
                let w = 2.0 * PI * frequency;
                let (s, c) = (w * t).sin_cos();
                let (si, ci) = incline.sin_cos();
                let plane = |a: f64, b: f64| Vector3::new(a, b * ci, b * si);
                TaskReference {
                    position: center + plane(radius * c, radius * s),
                    velocity: plane(-radius * w * s, radius * w * c),
                    acceleration: plane(-radius * w * w * c, -radius * w * w * s),
                }
            }
            Trajectory::Line { start, end, duration } => blend(*start, *end, t, *duration),
            Trajectory::Waypoints { start, legs } => match legs.iter().rev().find(|l| t >= l.t_start) {
                Some(leg) => blend(leg.from, leg.to, t - leg.t_start, leg.move_s),
                None => TaskReference::stationary(*start),
            },
            Trajectory::Hold { position } => TaskReference::stationary(*position),
        }
    }

    /// Gripper state at `t`, for trajectories that have one.
    pub fn gripper_closed(&self, t: f64) -> Option<bool> {
        match self {
            Trajectory::Waypoints { legs, .. } => Some(
                legs.iter()
                    .rev()
                    .find(|l| t >= l.t_start + l.move_s)
                    .is_some_and(|l| l.gripper_closed),
            ),
            _ => None,
        }
    }

    /// Time at which the last waypoint's dwell ends (waypoints only).
    pub fn script_length(&self) -> Option<f64> {
        match self {
            Trajectory::Waypoints { legs, .. } => Some(legs.last().map_or(0.0, |l| l.t_start + l.move_s + l.dwell_s)),
            _ => None,
        }
    }
}

/// Checks every sample at `rate` Hz over `[0, duration]` against the reach
/// bound of the model (prismatic travel plus arm length).
pub fn validate_reach(model: &RobotModel, trajectory: &Trajectory, duration: f64, rate: f64) -> Result<()> {
    let ticks = (duration * rate + 1e-9).floor() as usize;
    for k in 0..=ticks {
        let t = k as f64 / rate;
        let r = trajectory.sample(t);
        if !r.is_finite() {
            return Err(SimError::Validation(format!("reference is not finite at t = {t} s")));
        }
        if !model.within_reach(&r.position) {
            return Err(SimError::Validation(format!(
                "reference ({:.4}, {:.4}, {:.4}) m at t = {t} s is outside the reach of the arm \
                 (arm length {} m, prismatic travel {} m)",
                r.position.x,
                r.position.y,
                r.position.z,
                model.arm_length(),
                model.effective_stroke()
            )));
        }
    }
    Ok(())
}
