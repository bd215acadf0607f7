//! TOML configuration: `[robot]`, `[hysteresis]`, `[controller]`, `[limits]`
//! and an optional `[trajectory]` section. Units are part of every key name.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Deserialize;
use softarm::actuation::{HysteresisMode, HysteresisModel, PressureCurve};
use softarm::control::ControllerGains;
use softarm::RobotModel;

use crate::error::{Result, SimError};

/// The shipped configuration, approximating the physical prototype.
pub const SHIPPED_CONFIG: &str = include_str!("../config/default.toml");

pub const DEFAULT_PINV_DAMPING: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: RobotModel,
    pub hysteresis: HysteresisModel,
    pub gains: ControllerGains,
    pub trajectory: TrajectoryParams,
}

impl SimConfig {
    /// Parses [`SHIPPED_CONFIG`].
    pub fn shipped() -> Result<Self> {
        parse_config(SHIPPED_CONFIG, Path::new("."))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    robot: RobotSection,
    hysteresis: HysteresisSection,
    controller: ControllerSection,
    limits: LimitsSection,
    #[serde(default)]
    trajectory: TrajectoryParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotSection {
    segment_lengths_m: Vec<f64>,
    segment_masses_kg: Vec<f64>,
    #[serde(default = "default_lumps")]
    lumped_masses_per_segment: usize,
    shaft_mass_kg: f64,
    piston_area_m2: f64,
    pam_count: u32,
    lever_count: u32,
    lever_ratio: f64,
    pam_area_m2: f64,
    stroke_max_m: f64,
    chamber_moment_arm_m: f64,
    chamber_area_m2: f64,
    segment_stiffness_nm_per_rad: Vec<f64>,
    segment_damping_nms_per_rad: Vec<f64>,
    #[serde(default = "default_gravity")]
    gravity_m_s2: [f64; 3],
    #[serde(default)]
    prismatic_locked: bool,
}

fn default_lumps() -> usize {
    5
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HysteresisSection {
    #[serde(default)]
    mode: ModeKey,
    v_th_relax_m_s: f64,
    v_th_contract_m_s: f64,
    relax_curve: Option<Vec<[f64; 2]>>,
    relax_curve_csv: Option<PathBuf>,
    contract_curve: Option<Vec<[f64; 2]>>,
    contract_curve_csv: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeKey {
    #[default]
    Interpolated,
    Literal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    kp_per_s2: f64,
    kd_per_s: f64,
    accel_saturation_m_s2: f64,
    #[serde(default = "default_pinv_damping")]
    pinv_damping: f64,
}

fn default_pinv_damping() -> f64 {
    DEFAULT_PINV_DAMPING
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsSection {
    pressure_limit_pa: f64,
    bend_limit_rad: f64,
}

/// Reference trajectory parameters. Every key is optional.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryParams {
    pub helix_radius_m: f64,
    pub helix_pitch_m: f64,
    pub helix_frequency_hz: f64,
    /// Helix axis point at t = 0; the helix rises from here.
    pub helix_base_m: [f64; 3],
    pub helix_duration_s: f64,
    pub circle_radius_m: f64,
    /// Rotation of the circle plane about the x axis.
    pub circle_incline_rad: f64,
    pub circle_frequency_hz: f64,
    pub circle_center_m: [f64; 3],
    pub circle_duration_s: f64,
    pub line_start_m: [f64; 3],
    pub line_end_m: [f64; 3],
    pub line_duration_s: f64,
    pub vertical_line_start_m: [f64; 3],
    pub vertical_line_end_m: [f64; 3],
    pub vertical_line_duration_s: f64,
    pub hold_position_m: [f64; 3],
    pub hold_duration_s: f64,
    pub pick_start_m: [f64; 3],
    pub pick_waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub position_m: [f64; 3],
    /// Time to travel here from the previous waypoint.
    pub move_s: f64,
    /// Time spent here after arriving.
    #[serde(default)]
    pub dwell_s: f64,
    /// Gripper state from arrival on.
    #[serde(default)]
    pub gripper_closed: bool,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        let wp = |p: [f64; 3], move_s, dwell_s, gripper_closed| Waypoint {
            position_m: p,
            move_s,
            dwell_s,
            gripper_closed,
        };
        TrajectoryParams {
            helix_radius_m: 0.05,
            helix_pitch_m: 0.04,
            helix_frequency_hz: 0.1,
            helix_base_m: [0.0, 0.0, 0.25],
            helix_duration_s: 15.0,
            circle_radius_m: 0.05,
            circle_incline_rad: 20f64.to_radians(),
            circle_frequency_hz: 0.1,
            circle_center_m: [0.0, 0.0, 0.29],
            circle_duration_s: 10.0,
            line_start_m: [0.10, -0.06, 0.205],
            line_end_m: [0.10, 0.06, 0.205],
            line_duration_s: 5.0,
            vertical_line_start_m: [0.03, 0.0, 0.255],
            vertical_line_end_m: [0.03, 0.0, 0.325],
            vertical_line_duration_s: 5.0,
            hold_position_m: [0.0, 0.0, 0.29],
            hold_duration_s: 5.0,
            pick_start_m: [0.0, 0.0, 0.29],
            pick_waypoints: vec![
                wp([0.06, 0.0, 0.28], 2.0, 0.5, false),
                wp([0.06, 0.0, 0.255], 1.5, 1.0, true),
                wp([0.06, 0.0, 0.29], 1.5, 0.5, true),
                wp([-0.04, 0.04, 0.31], 3.0, 1.0, false),
                wp([0.0, 0.0, 0.29], 2.0, 0.5, false),
            ],
        }
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Parses and validates a configuration. Curve CSV paths are resolved
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<SimConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
    let r = file.robot;
    let model = RobotModel {
        segment_lengths: r.segment_lengths_m,
        segment_masses: r.segment_masses_kg,
        lumped_masses_per_segment: r.lumped_masses_per_segment,
        shaft_mass: r.shaft_mass_kg,
        piston_area: r.piston_area_m2,
        pam_count: r.pam_count,
        lever_count: r.lever_count,
        lever_ratio: r.lever_ratio,
        pam_area: r.pam_area_m2,
        stroke_max: r.stroke_max_m,
        chamber_moment_arm: r.chamber_moment_arm_m,
        chamber_gain: r.chamber_area_m2,
        segment_stiffness: r.segment_stiffness_nm_per_rad,
        segment_damping: r.segment_damping_nms_per_rad,
        pressure_limit: file.limits.pressure_limit_pa,
        gravity: Vector3::from(r.gravity_m_s2),
        bend_limit: file.limits.bend_limit_rad,
        prismatic_locked: r.prismatic_locked,
    }
    .validated()
    .map_err(core_error)?;

    let h = file.hysteresis;
    let relax = load_curve("relax_curve", h.relax_curve, h.relax_curve_csv, base_dir)?;
    let contract = load_curve("contract_curve", h.contract_curve, h.contract_curve_csv, base_dir)?;
    let mode = match h.mode {
        ModeKey::Interpolated => HysteresisMode::Interpolated,
        ModeKey::Literal => HysteresisMode::Literal,
    };
    let hysteresis =
        HysteresisModel::new(relax, contract, h.v_th_relax_m_s, h.v_th_contract_m_s, mode).map_err(core_error)?;
    hysteresis.check_coverage(model.stroke_max).map_err(core_error)?;

    let c = file.controller;
    let gains = ControllerGains {
        kp: c.kp_per_s2,
        kd: c.kd_per_s,
        accel_saturation: c.accel_saturation_m_s2,
        pinv_damping: c.pinv_damping,
    }
    .validated()
    .map_err(core_error)?;

    check_trajectory(&file.trajectory)?;
    Ok(SimConfig {
        model,
        hysteresis,
        gains,
        trajectory: file.trajectory,
    })
}

fn load_curve(
    field: &str,
    inline: Option<Vec<[f64; 2]>>,
    csv: Option<PathBuf>,
    base_dir: &Path,
) -> Result<PressureCurve> {
    let curve = match (inline, csv) {
        (Some(points), None) => PressureCurve::new(points.into_iter().map(|[q, p]| (q, p)).collect()),
        (None, Some(path)) => PressureCurve::from_csv_path(&base_dir.join(path)),
        (Some(_), Some(_)) => {
            return Err(SimError::Config(format!(
                "hysteresis.{field}: give either `{field}` or `{field}_csv`, not both"
            )))
        }
        (None, None) => {
            return Err(SimError::Config(format!(
                "hysteresis.{field}: missing (`{field}` or `{field}_csv` required)"
            )))
        }
    };
    curve.map_err(|e| match e {
        softarm::Error::Configuration { reason, .. } => SimError::Config(format!("hysteresis.{field}: {reason}")),
        other => SimError::Config(format!("hysteresis.{field}: {other}")),
    })
}

/// Maps a model field name back to the key that sets it.
fn config_key(field: &str) -> String {
    let key = match field {
        "segment_lengths" => "robot.segment_lengths_m",
        "segment_masses" => "robot.segment_masses_kg",
        "segment_stiffness" => "robot.segment_stiffness_nm_per_rad",
        "segment_damping" => "robot.segment_damping_nms_per_rad",
        "lumped_masses_per_segment" => "robot.lumped_masses_per_segment",
        "shaft_mass" => "robot.shaft_mass_kg",
        "piston_area" => "robot.piston_area_m2",
        "pam_area" => "robot.pam_area_m2",
        "pam_count" => "robot.pam_count",
        "lever_count" => "robot.lever_count",
        "lever_ratio" => "robot.lever_ratio",
        "stroke_max" => "robot.stroke_max_m",
        "chamber_moment_arm" => "robot.chamber_moment_arm_m",
        "chamber_gain" => "robot.chamber_area_m2",
        "gravity" => "robot.gravity_m_s2",
        "pressure_limit" => "limits.pressure_limit_pa",
        "bend_limit" => "limits.bend_limit_rad",
        "v_th_relax" => "hysteresis.v_th_relax_m_s",
        "v_th_contract" => "hysteresis.v_th_contract_m_s",
        "relax_curve" | "contract_curve" => return format!("hysteresis.{field}"),
        "kp" => "controller.kp_per_s2",
        "kd" => "controller.kd_per_s",
        "accel_saturation" => "controller.accel_saturation_m_s2",
        "pinv_damping" => "controller.pinv_damping",
        other => return other.to_string(),
    };
    key.to_string()
}

fn core_error(e: softarm::Error) -> SimError {
    match e {
        softarm::Error::Configuration { field, reason } => {
            SimError::Config(format!("{}: {reason}", config_key(&field)))
        }
        other => SimError::Config(other.to_string()),
    }
}

fn check_trajectory(t: &TrajectoryParams) -> Result<()> {
    let finite3 = |p: &[f64; 3]| p.iter().all(|v| v.is_finite());
    let points = [
        ("helix_base_m", &t.helix_base_m),
        ("circle_center_m", &t.circle_center_m),
        ("line_start_m", &t.line_start_m),
        ("line_end_m", &t.line_end_m),
        ("vertical_line_start_m", &t.vertical_line_start_m),
        ("vertical_line_end_m", &t.vertical_line_end_m),
        ("hold_position_m", &t.hold_position_m),
        ("pick_start_m", &t.pick_start_m),
    ];
    for (key, p) in points {
        if !finite3(p) {
            return Err(SimError::Config(format!("trajectory.{key}: must be finite")));
        }
    }
    let positive = [
        ("helix_radius_m", t.helix_radius_m),
        ("helix_frequency_hz", t.helix_frequency_hz),
        ("helix_duration_s", t.helix_duration_s),
        ("circle_radius_m", t.circle_radius_m),
        ("circle_frequency_hz", t.circle_frequency_hz),
        ("circle_duration_s", t.circle_duration_s),
        ("line_duration_s", t.line_duration_s),
        ("vertical_line_duration_s", t.vertical_line_duration_s),
        ("hold_duration_s", t.hold_duration_s),
    ];
    for (key, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(SimError::Config(format!("trajectory.{key}: must be positive, got {v}")));
        }
    }
    if !(t.helix_pitch_m.is_finite() && t.circle_incline_rad.is_finite()) {
        return Err(SimError::Config(
            "trajectory: helix_pitch_m and circle_incline_rad must be finite".into(),
        ));
    }
    for (i, w) in t.pick_waypoints.iter().enumerate() {
        if !finite3(&w.position_m)
            || !(w.move_s > 0.0 && w.move_s.is_finite())
            || !(w.dwell_s >= 0.0 && w.dwell_s.is_finite())
        {
            return Err(SimError::Config(format!(
                "trajectory.pick_waypoints[{i}]: needs a finite position, move_s > 0 and dwell_s ≥ 0"
            )));
        }
    }
    Ok(())
}
