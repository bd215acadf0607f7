//! Closed-loop scenarios: RK4 plant at 1 kHz, controller at 100 Hz with a
//! zero-order hold on the pressure command.

use nalgebra::{DMatrix, DVector, Vector3};
use softarm::actuation::{actuator_forces, HysteresisModel, PressureCommand};
use softarm::control::{control_step, ControllerGains};
use softarm::dynamics::{self, SimState};
use softarm::kinematics;
use softarm::linalg::damped_pinv;
use softarm::{Configuration, ConfigurationRates, RobotModel};

use crate::config::TrajectoryParams;
use crate::error::{Result, SimError, StateDump};
use crate::trajectory::{validate_reach, Trajectory};

pub const CONTROL_RATE_HZ: f64 = 100.0;
pub const PLANT_STEPS_PER_TICK: usize = 10;
pub const PLANT_DT: f64 = 1.0 / (CONTROL_RATE_HZ * PLANT_STEPS_PER_TICK as f64);

const IK_TOLERANCE_M: f64 = 1e-10;
const IK_MAX_ITERATIONS: usize = 2000;
const IK_DAMPING: f64 = 1e-3;
/// Largest change of any coordinate per iteration (rad, or m for the base).
const IK_MAX_STEP: f64 = 0.05;
/// Gain of the pull toward the home posture during the initial pose solve.
const IK_POSTURE_GAIN: f64 = 0.1;
/// Below this error the posture pull is dropped: the damped projector leaks
/// a small task-space component that would stall convergence.
const IK_POSTURE_CUTOFF_M: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    TrackHelix,
    TrackCircle,
    TrackLine,
    TrackVerticalLine,
    PickPlace,
    Hold,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TrackHelix => "track_helix",
            ScenarioKind::TrackCircle => "track_circle",
            ScenarioKind::TrackLine => "track_line",
            ScenarioKind::TrackVerticalLine => "track_vertical_line",
            ScenarioKind::PickPlace => "pick_place",
            ScenarioKind::Hold => "hold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub trajectory: Trajectory,
    pub duration: f64,
    pub seed: u64,
}

impl Scenario {
    /// Builds a scenario from config parameters. `duration` overrides the
    /// configured one; a line then spans the overridden duration.
    pub fn new(kind: ScenarioKind, p: &TrajectoryParams, duration: Option<f64>, seed: u64) -> Result<Self> {
        let v = Vector3::from;
        let (trajectory, default_duration) = match kind {
            ScenarioKind::TrackHelix => (
                Trajectory::Helix {
                    base: v(p.helix_base_m),
                    radius: p.helix_radius_m,
                    pitch: p.helix_pitch_m,
                    frequency: p.helix_frequency_hz,
                },
                p.helix_duration_s,
            ),
            ScenarioKind::TrackCircle => (
                Trajectory::Circle {
                    center: v(p.circle_center_m),
                    radius: p.circle_radius_m,
                    incline: p.circle_incline_rad,
                    frequency: p.circle_frequency_hz,
                },
                p.circle_duration_s,
            ),
            ScenarioKind::TrackLine => {
                let d = duration.unwrap_or(p.line_duration_s);
                let line = Trajectory::Line {
                    start: v(p.line_start_m),
                    end: v(p.line_end_m),
                    duration: d,
                };
                (line, d)
            }
            ScenarioKind::TrackVerticalLine => {
                let d = duration.unwrap_or(p.vertical_line_duration_s);
                let line = Trajectory::Line {
                    start: v(p.vertical_line_start_m),
                    end: v(p.vertical_line_end_m),
                    duration: d,
                };
                (line, d)
            }
            ScenarioKind::PickPlace => {
                let t = Trajectory::waypoints(v(p.pick_start_m), &p.pick_waypoints);
                let d = t.script_length().unwrap_or(0.0);
                (t, d)
            }
            ScenarioKind::Hold => (
                Trajectory::Hold {
                    position: v(p.hold_position_m),
                },
                p.hold_duration_s,
            ),
        };
        let duration = duration.unwrap_or(default_duration);
        if !(duration.is_finite() && duration >= 1.0 / CONTROL_RATE_HZ) {
            return Err(SimError::Validation(format!(
                "duration {duration} s is shorter than one control tick ({} s)",
                1.0 / CONTROL_RATE_HZ
            )));
        }
        Ok(Scenario {
            kind,
            trajectory,
            duration,
            seed,
        })
    }

    /// Number of control intervals; the log has one more row than this.
    pub fn ticks(&self) -> usize {
        (self.duration * CONTROL_RATE_HZ + 1e-9).floor() as usize
    }
}

/// One row per control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub tip: Vector3<f64>,
    pub reference: Vector3<f64>,
    pub command: PressureCommand,
    /// The command issued at this tick hit the pressure limit.
    pub saturated: bool,
    /// A joint limit was enforced since the previous tick.
    pub limit_hit: bool,
    pub gripper_closed: Option<bool>,
}

impl LogRow {
    pub fn tip_error(&self) -> f64 {
        (self.tip - self.reference).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub rms_error_m: f64,
    pub mean_error_m: f64,
    pub max_error_m: f64,
    pub max_pressure_pa: f64,
    pub saturation_count: usize,
    pub limit_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub scenario: String,
    pub seed: u64,
    pub duration: f64,
    pub prismatic_enabled: bool,
    pub rows: Vec<LogRow>,
    pub summary: Summary,
}

pub fn summarize(rows: &[LogRow]) -> Summary {
    let n = rows.len() as f64;
    let errors: Vec<f64> = rows.iter().map(LogRow::tip_error).collect();
    Summary {
        rms_error_m: (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        mean_error_m: errors.iter().sum::<f64>() / n,
        max_error_m: errors.iter().copied().fold(0.0, f64::max),
        max_pressure_pa: rows.iter().map(|r| r.command.max_pressure()).fold(0.0, f64::max),
        saturation_count: rows.iter().filter(|r| r.saturated).count(),
        limit_count: rows.iter().filter(|r| r.limit_hit).count(),
    }
}

fn task_jacobian(model: &RobotModel, q: &Configuration) -> Result<DMatrix<f64>> {
    let j = kinematics::tip_jacobian(model, q).map_err(validation)?;
    let mut j = DMatrix::from_column_slice(3, j.ncols(), j.as_slice());
    if model.prismatic_locked {
        j.column_mut(0).fill(0.0);
    }
    Ok(j)
}

fn validation(e: softarm::Error) -> SimError {
    SimError::Validation(e.to_string())
}

fn clamp_to_limits(model: &RobotModel, q: &mut DVector<f64>) {
    for i in 0..q.len() {
        let (lo, hi) = model.coordinate_limits(i);
        q[i] = q[i].clamp(lo, hi);
    }
}

/// Least-squares joint motion for a task motion `dx`, with coordinates that
/// sit on a limit and would move outward removed from the solve. Also
/// returns the solve's Jacobian with the removed columns zeroed.
fn constrained_solve(
    model: &RobotModel,
    j: &DMatrix<f64>,
    q: &DVector<f64>,
    dx: &Vector3<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dx = DVector::from_column_slice(dx.as_slice());
    let mut j = j.clone();
    loop {
        let pinv = damped_pinv(&j, IK_DAMPING).map_err(validation)?;
        let dq = &pinv * &dx;
        let mut changed = false;
        for i in 0..q.len() {
            let (lo, hi) = model.coordinate_limits(i);
            let pushing = (q[i] <= lo && dq[i] < 0.0) || (q[i] >= hi && dq[i] > 0.0);
            if pushing && j.column(i).iter().any(|&v| v != 0.0) {
                j.column_mut(i).fill(0.0);
                changed = true;
            }
        }
        if !changed {
            return Ok((dq, j));
        }
    }
}

/// Damped least-squares pose solve for the reference at t = 0, starting from
/// and pulled toward the home posture (mid-stroke, straight), with rates
/// `q̇ = J⁺ẋ_des`.
pub fn initial_state(model: &RobotModel, trajectory: &Trajectory) -> Result<SimState> {
    let target = trajectory.sample(0.0);
    let n = model.dof();
    let mut home = DVector::zeros(n);
    home[0] = 0.5 * model.effective_stroke();
    let mut q = home.clone();
    for _ in 0..IK_MAX_ITERATIONS {
        let cq = Configuration::from_vector(q.clone()).map_err(validation)?;
        let err = target.position - kinematics::tip_position(model, &cq).map_err(validation)?;
        let j = task_jacobian(model, &cq)?;
        if err.norm() < IK_TOLERANCE_M {
            let (qd, _) = constrained_solve(model, &j, &q, &target.velocity)?;
            let qd = ConfigurationRates::from_vector(qd).map_err(validation)?;
            return Ok(SimState { q: cq, qd, t: 0.0 });
        }
        let (mut dq, active) = constrained_solve(model, &j, &q, &err)?;
        if err.norm() > IK_POSTURE_CUTOFF_M {
            let mut pull = (&home - &q) * IK_POSTURE_GAIN;
            for i in 0..n {
                if active.column(i).iter().all(|&v| v == 0.0) {
                    pull[i] = 0.0;
                }
            }
            let pinv = damped_pinv(&active, IK_DAMPING).map_err(validation)?;
            dq += (DMatrix::identity(n, n) - &pinv * &active) * pull;
        }
        let largest = dq.amax();
        if largest > IK_MAX_STEP {
            dq *= IK_MAX_STEP / largest;
        }
        q += dq;
        clamp_to_limits(model, &mut q);
    }
    Err(SimError::Validation(format!(
        "no configuration reaches the initial reference ({:.4}, {:.4}, {:.4}) m",
        target.position.x, target.position.y, target.position.z
    )))
}

fn divergence(t: f64, reason: impl Into<String>, last: &SimState) -> SimError {
    SimError::Divergence {
        t,
        reason: reason.into(),
        last: StateDump(last.clone()),
    }
}

/// Runs a scenario to completion. Every reference sample is validated against
/// the reach bound before the simulation starts.
pub fn run_scenario(
    model: &RobotModel,
    h: &HysteresisModel,
    gains: &ControllerGains,
    scenario: &Scenario,
) -> Result<RunLog> {
    validate_reach(model, &scenario.trajectory, scenario.duration, CONTROL_RATE_HZ)?;
    h.check_coverage(model.stroke_max).map_err(validation)?;
    let mut state = initial_state(model, &scenario.trajectory)?;
    let ticks = scenario.ticks();
    let mut rows = Vec::with_capacity(ticks + 1);
    let mut limit_hit = false;
    for k in 0..=ticks {
        let t = k as f64 / CONTROL_RATE_HZ;
        state.t = t;
        let reference = scenario.trajectory.sample(t);
        let out =
            control_step(model, h, gains, &reference, &state).map_err(|e| divergence(t, e.to_string(), &state))?;
        if !((out.tip - reference.position).norm() <= model.arm_length()) {
            return Err(divergence(t, "tip error exceeds the arm length", &state));
        }
        rows.push(LogRow {
            t,
            q: state.q.as_vector().iter().copied().collect(),
            qd: state.qd.as_vector().iter().copied().collect(),
            tip: out.tip,
            reference: reference.position,
            command: out.command.clone(),
            saturated: out.saturated,
            limit_hit,
            gripper_closed: scenario.trajectory.gripper_closed(t),
        });
        if k == ticks {
            break;
        }
        limit_hit = false;
        let cmd = out.command;
        for _ in 0..PLANT_STEPS_PER_TICK {
            let report = dynamics::step_with(model, &state, PLANT_DT, |q, qd| {
                Ok(actuator_forces(model, h, q, qd, &cmd))
            })
            .map_err(|e| divergence(state.t, e.to_string(), &state))?;
            limit_hit |= report.limit_hit;
            state = report.state;
        }
    }
    let summary = summarize(&rows);
    Ok(RunLog {
        scenario: scenario.kind.name().to_string(),
        seed: scenario.seed,
        duration: scenario.duration,
        prismatic_enabled: !model.prismatic_locked,
        rows,
        summary,
    })
}
