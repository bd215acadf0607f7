//! Actuator models: piston, McKibben PAMs with velocity-resolved hysteresis,
//! arm chambers, and the map from pressures to generalized forces.
//!
//! Sign conventions: positive extension is up. PAM overpressure above the
//! static pressure `p_s(q, q̇)` accelerates the base upward, the piston pushes
//! it down.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::model::{Configuration, ConfigurationRates, RobotModel};
use crate::{Error, Result};

/// Chambers per arm segment, spaced 120° apart.
pub const CHAMBERS_PER_SEGMENT: usize = 3;

/// Piecewise-linear static pressure as a function of prismatic extension.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureCurve {
    extension: Vec<f64>,
    pressure: Vec<f64>,
}

impl PressureCurve {
    /// Knots must have strictly increasing extension and monotone pressure.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::named("pressure_curve", points)
    }

    fn named(field: &str, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config(field, "curve has no points"));
        }
        if points.iter().any(|(q, p)| !q.is_finite() || !p.is_finite()) {
            return Err(Error::config(field, "curve contains non-finite values"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config(field, "extension must be strictly increasing"));
        }
        let rising = points.windows(2).all(|w| w[1].1 >= w[0].1);
        let falling = points.windows(2).all(|w| w[1].1 <= w[0].1);
        if !(rising || falling) {
            return Err(Error::config(field, "pressure must be monotone in extension"));
        }
        let (extension, pressure) = points.into_iter().unzip();
        Ok(PressureCurve { extension, pressure })
    }

    /// Straight line through two knots.
    pub fn affine(q0: f64, p0: f64, q1: f64, p1: f64) -> Result<Self> {
        Self::new(vec![(q0, p0), (q1, p1)])
    }

    /// Reads `extension_m, pressure_pa` rows. A header row is expected.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::config("pressure_curve", format!("row {}: {e}", i + 1)))?;
            if rec.len() != 2 {
                return Err(Error::config(
                    "pressure_curve",
                    format!("row {}: expected 2 columns, got {}", i + 1, rec.len()),
                ));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::config("pressure_curve", format!("row {}: `{s}`: {e}", i + 1)))
            };
            points.push((parse(&rec[0])?, parse(&rec[1])?));
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::config("pressure_curve", format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.extension.iter().copied().zip(self.pressure.iter().copied())
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.extension[0], self.extension[self.extension.len() - 1])
    }

    /// Linear interpolation, constant beyond the end knots.
    pub fn eval(&self, q: f64) -> f64 {
        let xs = &self.extension;
        let ys = &self.pressure;
        if q <= xs[0] {
            return ys[0];
        }
        let last = xs.len() - 1;
        if q >= xs[last] {
            return ys[last];
        }
        let i = xs.partition_point(|&x| x <= q) - 1;
        let t = (q - xs[i]) / (xs[i + 1] - xs[i]);
        ys[i] + t * (ys[i + 1] - ys[i])
    }
}

/// How the static pressure is resolved between the two hysteresis branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HysteresisMode {
    /// Continuous piecewise-linear blend: relax branch at the relax threshold,
    /// mean pressure at zero velocity, contract branch at the contract threshold.
    #[default]
    Interpolated,
    /// `p_m·(1 + q̇/Δq̇_th)` in the middle band, clamped to the branch envelope.
    /// Discontinuous at the thresholds for generic curves; kept for comparison.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisModel {
    pub relax: PressureCurve,
    pub contract: PressureCurve,
    /// Below this velocity the PAM is relaxing (m/s, negative).
    pub v_th_relax: f64,
    /// Above this velocity the PAM is contracting (m/s, positive).
    pub v_th_contract: f64,
    pub mode: HysteresisMode,
}

impl HysteresisModel {
    pub fn new(
        relax: PressureCurve,
        contract: PressureCurve,
        v_th_relax: f64,
        v_th_contract: f64,
        mode: HysteresisMode,
    ) -> Result<Self> {
        if !(v_th_relax.is_finite() && v_th_relax < 0.0) {
            return Err(Error::config("v_th_relax", "relax threshold must be negative"));
        }
        if !(v_th_contract.is_finite() && v_th_contract > 0.0) {
            return Err(Error::config("v_th_contract", "contract threshold must be positive"));
        }
        // both curves are piecewise linear, so checking every knot suffices
        for q in relax.knots().chain(contract.knots()).map(|(q, _)| q) {
            if contract.eval(q) < relax.eval(q) {
                return Err(Error::config(
                    "contract_curve",
                    format!("contraction pressure below relaxation pressure at {q} m"),
                ));
            }
        }
        Ok(HysteresisModel {
            relax,
            contract,
            v_th_relax,
            v_th_contract,
            mode,
        })
    }

    /// Both curves must be defined over the whole stroke.
    pub fn check_coverage(&self, stroke_max: f64) -> Result<()> {
        for (field, c) in [("relax_curve", &self.relax), ("contract_curve", &self.contract)] {
            let (lo, hi) = c.domain();
            if lo > 0.0 || hi < stroke_max {
                return Err(Error::config(
                    field,
                    format!("covers [{lo}, {hi}] m but the stroke is [0, {stroke_max}] m"),
                ));
            }
        }
        Ok(())
    }

    /// Mean of the two branches.
    pub fn mid_pressure(&self, q: f64) -> f64 {
        0.5 * (self.relax.eval(q) + self.contract.eval(q))
    }
}

/// Static PAM pressure resolved from the motion direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticPressure {
    pub pressure: f64,
    /// The extension was outside the curve domain and was clamped.
    pub clamped: bool,
}

/// Velocity-resolved static pressure `p_s(q, q̇)`.
pub fn static_pressure(h: &HysteresisModel, q: f64, qd: f64) -> f64 {
    static_pressure_flagged(h, q, qd).pressure
}

pub fn static_pressure_flagged(h: &HysteresisModel, q: f64, qd: f64) -> StaticPressure {
    let (lo, hi) = h.relax.domain();
    let (lo2, hi2) = h.contract.domain();
    let lo = lo.max(lo2);
    let hi = hi.min(hi2);
    let qc = q.clamp(lo, hi);
    let p_r = h.relax.eval(qc);
    let p_c = h.contract.eval(qc);
    let p_m = 0.5 * (p_r + p_c);
    let pressure = if qd <= h.v_th_relax {
        p_r
    } else if qd >= h.v_th_contract {
        p_c
    } else {
        match h.mode {
            HysteresisMode::Interpolated => {
                if qd < 0.0 {
                    p_r + (p_m - p_r) * (qd - h.v_th_relax) / -h.v_th_relax
                } else {
                    p_m + (p_c - p_m) * qd / h.v_th_contract
                }
            }
            HysteresisMode::Literal => {
                let band = h.v_th_relax - h.v_th_contract;
                p_m * (1.0 + qd / band)
            }
        }
    };
    StaticPressure {
        pressure: pressure.clamp(p_r, p_c),
        clamped: qc != q,
    }
}

fn check_pressure(model: &RobotModel, name: &str, p: f64) -> Result<()> {
    if !p.is_finite() || p < 0.0 {
        return Err(Error::Domain(format!(
            "{name} pressure must be non-negative, got {p} Pa"
        )));
    }
    if p > model.pressure_limit {
        return Err(Error::Domain(format!(
            "{name} pressure {p} Pa exceeds the limit {} Pa",
            model.pressure_limit
        )));
    }
    Ok(())
}

/// Prismatic acceleration produced by the piston, `−A_pist·p_p / m_tot`
/// (the piston only pushes down).
pub fn piston_accel(model: &RobotModel, p_piston: f64) -> Result<f64> {
    check_pressure(model, "piston", p_piston)?;
    Ok(-model.piston_area * p_piston / model.total_mass())
}

/// Prismatic acceleration from PAM overpressure,
/// `n_Mc·r·A_a·(p_M − p_s(q, q̇)) / (n_L·m_tot)`, positive upward.
pub fn pam_accel(model: &RobotModel, h: &HysteresisModel, q: f64, qd: f64, p_pam: f64) -> Result<f64> {
    check_pressure(model, "PAM", p_pam)?;
    let overpressure = p_pam - static_pressure(h, q, qd);
    Ok(model.pam_gain() * overpressure / model.total_mass())
}

/// Angle of chamber `j` around the segment axis.
pub fn chamber_angle(j: usize) -> f64 {
    2.0 * std::f64::consts::PI * j as f64 / CHAMBERS_PER_SEGMENT as f64
}

/// Columns of the flattened pressure vector: all arm chambers, then PAM, then piston.
pub fn pressure_columns(model: &RobotModel) -> usize {
    CHAMBERS_PER_SEGMENT * model.segment_count() + 2
}

/// `A`: generalized force per unit pressure for every actuator.
///
/// The arm block maps chamber `j` of segment `s` to `a_ch·d·(cos θ_j, sin θ_j)`
/// on that segment's bend coordinates. The prismatic row has the PAM gain on
/// the PAM column and `−A_pist` on the piston column. The PAM's static hold
/// is affine, not linear, and is added by [`actuator_forces`].
pub fn actuation_matrix(model: &RobotModel) -> DMatrix<f64> {
    let n_seg = model.segment_count();
    let mut a = DMatrix::zeros(model.dof(), pressure_columns(model));
    let gain = model.chamber_gain * model.chamber_moment_arm;
    for s in 0..n_seg {
        for j in 0..CHAMBERS_PER_SEGMENT {
            let col = CHAMBERS_PER_SEGMENT * s + j;
            let (sin, cos) = chamber_angle(j).sin_cos();
            a[(1 + 2 * s, col)] = gain * cos;
            a[(2 + 2 * s, col)] = gain * sin;
        }
    }
    let pam_col = CHAMBERS_PER_SEGMENT * n_seg;
    a[(0, pam_col)] = model.pam_gain();
    a[(0, pam_col + 1)] = -model.piston_area;
    a
}

/// Pressures sent to the valve array.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureCommand {
    /// Three chambers per segment, segment-major.
    pub arm_chambers: Vec<f64>,
    pub pam: f64,
    pub piston: f64,
}

impl PressureCommand {
    pub fn zeros(model: &RobotModel) -> Self {
        PressureCommand {
            arm_chambers: vec![0.0; CHAMBERS_PER_SEGMENT * model.segment_count()],
            pam: 0.0,
            piston: 0.0,
        }
    }

    pub fn flatten(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.arm_chambers.len() + 2);
        for (i, &p) in self.arm_chambers.iter().enumerate() {
            v[i] = p;
        }
        v[self.arm_chambers.len()] = self.pam;
        v[self.arm_chambers.len() + 1] = self.piston;
        v
    }

    pub fn max_pressure(&self) -> f64 {
        self.arm_chambers
            .iter()
            .copied()
            .fold(self.pam.max(self.piston), f64::max)
    }

    /// Range check against the model's pressure limit.
    pub fn check(&self, model: &RobotModel) -> Result<()> {
        if self.arm_chambers.len() != CHAMBERS_PER_SEGMENT * model.segment_count() {
            return Err(Error::Domain(format!(
                "expected {} chamber pressures, got {}",
                CHAMBERS_PER_SEGMENT * model.segment_count(),
                self.arm_chambers.len()
            )));
        }
        for &p in &self.arm_chambers {
            check_pressure(model, "chamber", p)?;
        }
        check_pressure(model, "PAM", self.pam)?;
        check_pressure(model, "piston", self.piston)
    }
}

/// Generalized forces produced by a pressure command at `(q, q̇)`.
///
/// The PAM term is `pam_gain·(p_M − p_s(q, q̇))` on top of a hold force equal
/// to the prismatic gravity load: at the static pressure the PAMs exactly
/// carry the weight.
pub fn actuator_forces(
    model: &RobotModel,
    h: &HysteresisModel,
    q: &Configuration,
    qd: &ConfigurationRates,
    cmd: &PressureCommand,
) -> DVector<f64> {
    let mut tau = actuation_matrix(model) * cmd.flatten();
    let hold = -model.total_mass() * model.gravity.z;
    tau[0] += hold - model.pam_gain() * static_pressure(h, q.prismatic(), qd[0]);
    tau
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamberAllocation {
    pub pressures: [f64; CHAMBERS_PER_SEGMENT],
    /// The requested torque needed more than the pressure limit.
    pub saturated: bool,
}

/// Least-norm signed chamber pressures for a bending torque `(τ_x, τ_y)`.
pub fn signed_chamber_pressures(torque: [f64; 2], model: &RobotModel) -> [f64; CHAMBERS_PER_SEGMENT] {
    // AAᵀ = (3/2)(a_ch·d)² I for three chambers at 120°
    let gain = model.chamber_gain * model.chamber_moment_arm;
    let scale = 1.0 / (1.5 * gain);
    std::array::from_fn(|j| {
        let (sin, cos) = chamber_angle(j).sin_cos();
        scale * (torque[0] * cos + torque[1] * sin)
    })
}

/// Shifts signed pressures by a common offset so the smallest is zero, then
/// clamps to `[0, p_max]`. The common offset produces no torque.
pub fn shift_to_nonnegative(signed: [f64; CHAMBERS_PER_SEGMENT], model: &RobotModel) -> ChamberAllocation {
    let min = signed.iter().copied().fold(f64::INFINITY, f64::min);
    let mut saturated = false;
    let pressures = signed.map(|p| {
        let shifted = p - min;
        if shifted > model.pressure_limit {
            saturated = true;
        }
        shifted.clamp(0.0, model.pressure_limit)
    });
    ChamberAllocation { pressures, saturated }
}

/// Non-negative chamber pressures realizing a bending torque with the
/// smallest common offset.
pub fn allocate_chambers(torque: [f64; 2], model: &RobotModel) -> ChamberAllocation {
    shift_to_nonnegative(signed_chamber_pressures(torque, model), model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrismaticCommand {
    pub pam: f64,
    pub piston: f64,
    pub saturated: bool,
}

/// Routes a signed prismatic demand to one actuator.
///
/// Positive demand is PAM overpressure on top of the static pressure. Negative
/// demand drives the piston while the PAMs hold at the static pressure.
pub fn arbitrate_prismatic(
    model: &RobotModel,
    signed_pressure: f64,
    h: &HysteresisModel,
    q: f64,
    qd: f64,
) -> PrismaticCommand {
    let p_max = model.pressure_limit;
    let p_s = static_pressure(h, q, qd);
    let clamp = |p: f64| (p.clamp(0.0, p_max), p > p_max);
    if signed_pressure > 0.0 {
        let (pam, saturated) = clamp(p_s + signed_pressure);
        PrismaticCommand {
            pam,
            piston: 0.0,
            saturated,
        }
    } else if signed_pressure < 0.0 {
        let (piston, sat_piston) = clamp(-signed_pressure);
        let (pam, sat_pam) = clamp(p_s);
        PrismaticCommand {
            pam,
            piston,
            saturated: sat_piston || sat_pam,
        }
    } else {
        let (pam, saturated) = clamp(p_s);
        PrismaticCommand {
            pam,
            piston: 0.0,
            saturated,
        }
    }
}
