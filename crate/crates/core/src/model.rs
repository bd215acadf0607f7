//! Parameter set, generalized coordinates and poses.

use nalgebra::{DVector, Matrix3, Vector3};

use crate::{Error, Result};

/// Highest pressure the valve array can deliver.
pub const VALVE_PRESSURE_LIMIT_PA: f64 = 2.0e5;

/// Geometric, inertial and actuator parameters of the arm and its prismatic base.
///
/// Fields are public so a loader can fill them in; call [`RobotModel::validated`]
/// before use. Every operation in this crate assumes a validated model.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    /// Arc length of each PCC segment (m), base to tip.
    pub segment_lengths: Vec<f64>,
    /// Mass of each segment (kg).
    pub segment_masses: Vec<f64>,
    /// Point masses used to discretize each segment.
    pub lumped_masses_per_segment: usize,
    /// Mass of the moving inner shaft and base plate (kg).
    pub shaft_mass: f64,
    /// Piston surface area (m²).
    pub piston_area: f64,
    /// Number of PAMs.
    pub pam_count: u32,
    /// Number of lever arms the PAMs act through.
    pub lever_count: u32,
    /// Lever arm aspect ratio.
    pub lever_ratio: f64,
    /// Effective PAM surface area (m²).
    pub pam_area: f64,
    /// Prismatic travel (m). Extension lives in `[0, stroke_max]`.
    pub stroke_max: f64,
    /// Radial distance of the arm chambers from the segment centerline (m).
    pub chamber_moment_arm: f64,
    /// Chamber force per unit pressure (N/Pa).
    pub chamber_gain: f64,
    /// Bending stiffness of each segment (N·m/rad).
    pub segment_stiffness: Vec<f64>,
    /// Bending damping of each segment (N·m·s/rad).
    pub segment_damping: Vec<f64>,
    /// Upper bound on any commanded pressure (Pa).
    pub pressure_limit: f64,
    /// Gravity vector in the base frame (m/s²).
    pub gravity: Vector3<f64>,
    /// Per-axis bend limit |phi_x|, |phi_y| ≤ bend_limit (rad).
    pub bend_limit: f64,
    /// When set the prismatic joint is held at zero extension.
    pub prismatic_locked: bool,
}

impl RobotModel {
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.segment_lengths.len();
        if n == 0 {
            return Err(Error::config("segment_lengths", "at least one segment is required"));
        }
        for (field, v) in [
            ("segment_masses", &self.segment_masses),
            ("segment_stiffness", &self.segment_stiffness),
            ("segment_damping", &self.segment_damping),
        ] {
            if v.len() != n {
                return Err(Error::config(
                    field,
                    format!("expected {n} entries (one per segment), got {}", v.len()),
                ));
            }
        }
        positive_all("segment_lengths", &self.segment_lengths)?;
        positive_all("segment_masses", &self.segment_masses)?;
        non_negative_all("segment_stiffness", &self.segment_stiffness)?;
        non_negative_all("segment_damping", &self.segment_damping)?;
        if self.lumped_masses_per_segment == 0 {
            return Err(Error::config("lumped_masses_per_segment", "must be at least 1"));
        }
        positive("shaft_mass", self.shaft_mass)?;
        positive("piston_area", self.piston_area)?;
        positive("pam_area", self.pam_area)?;
        positive("chamber_moment_arm", self.chamber_moment_arm)?;
        positive("chamber_gain", self.chamber_gain)?;
        if self.pam_count == 0 {
            return Err(Error::config("pam_count", "must be positive"));
        }
        if self.lever_count == 0 {
            return Err(Error::config("lever_count", "must be positive"));
        }
        if !(self.lever_ratio.is_finite() && self.lever_ratio > 1.0) {
            return Err(Error::config("lever_ratio", "must be greater than 1"));
        }
        non_negative("stroke_max", self.stroke_max)?;
        non_negative("bend_limit", self.bend_limit)?;
        positive("pressure_limit", self.pressure_limit)?;
        if self.pressure_limit > VALVE_PRESSURE_LIMIT_PA {
            return Err(Error::config(
                "pressure_limit",
                format!(
                    "{} Pa exceeds the valve limit of {VALVE_PRESSURE_LIMIT_PA} Pa",
                    self.pressure_limit
                ),
            ));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::config("gravity", "must be finite"));
        }
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        self.segment_lengths.len()
    }

    /// Number of generalized coordinates: one prismatic plus two per segment.
    pub fn dof(&self) -> usize {
        1 + 2 * self.segment_count()
    }

    pub fn arm_length(&self) -> f64 {
        self.segment_lengths.iter().sum()
    }

    /// Mass carried by the prismatic joint: shaft plus the whole arm.
    pub fn total_mass(&self) -> f64 {
        self.shaft_mass + self.segment_masses.iter().sum::<f64>()
    }

    /// Prismatic generalized force per pascal of PAM overpressure (N/Pa).
    pub fn pam_gain(&self) -> f64 {
        self.pam_count as f64 * self.lever_ratio * self.pam_area / self.lever_count as f64
    }

    /// Stroke actually usable, zero when the joint is locked.
    pub fn effective_stroke(&self) -> f64 {
        if self.prismatic_locked {
            0.0
        } else {
            self.stroke_max
        }
    }

    /// Lower and upper bound of coordinate `i`.
    pub fn coordinate_limits(&self, i: usize) -> (f64, f64) {
        if i == 0 {
            (0.0, self.effective_stroke())
        } else {
            (-self.bend_limit, self.bend_limit)
        }
    }

    /// Copy of this model with the prismatic joint locked at zero extension.
    pub fn with_prismatic_locked(&self) -> Self {
        RobotModel {
            prismatic_locked: true,
            ..self.clone()
        }
    }

    /// True if `p` is within arm length of some point of the prismatic travel.
    pub fn within_reach(&self, p: &Vector3<f64>) -> bool {
        let z = p.z.clamp(0.0, self.effective_stroke());
        let d = (p - Vector3::new(0.0, 0.0, z)).norm();
        d <= self.arm_length()
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

fn positive_all(field: &str, v: &[f64]) -> Result<()> {
    v.iter().try_for_each(|&x| positive(field, x))
}

fn non_negative_all(field: &str, v: &[f64]) -> Result<()> {
    v.iter().try_for_each(|&x| non_negative(field, x))
}

macro_rules! coordinate_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(DVector<f64>);

        impl $name {
            pub fn new(prismatic: f64, segments: &[[f64; 2]]) -> Self {
                let mut v = DVector::zeros(1 + 2 * segments.len());
                v[0] = prismatic;
                for (i, s) in segments.iter().enumerate() {
                    v[1 + 2 * i] = s[0];
                    v[2 + 2 * i] = s[1];
                }
                $name(v)
            }

            pub fn zeros(model: &RobotModel) -> Self {
                $name(DVector::zeros(model.dof()))
            }

            /// Wraps a flat coordinate vector. The length must be odd.
            pub fn from_vector(v: DVector<f64>) -> Result<Self> {
                if v.len() % 2 == 0 {
                    return Err(Error::Domain(format!(
                        "coordinate vector must have odd length (1 + 2 per segment), got {}",
                        v.len()
                    )));
                }
                Ok($name(v))
            }

            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_vector(self) -> DVector<f64> {
                self.0
            }

            pub fn prismatic(&self) -> f64 {
                self.0[0]
            }

            pub fn segment(&self, i: usize) -> [f64; 2] {
                [self.0[1 + 2 * i], self.0[2 + 2 * i]]
            }

            pub fn segment_count(&self) -> usize {
                (self.0.len() - 1) / 2
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            /// Shape and finiteness check against a model.
            pub fn check(&self, model: &RobotModel) -> Result<()> {
                if self.0.len() != model.dof() {
                    return Err(Error::Domain(format!(
                        "{} has {} entries, model has {} coordinates",
                        stringify!($name),
                        self.0.len(),
                        model.dof()
                    )));
                }
                if !self.is_finite() {
                    return Err(Error::Domain(format!("{} has non-finite entries", stringify!($name))));
                }
                Ok(())
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

coordinate_vector!(
    /// Generalized coordinates: prismatic extension (m) then `(phi_x, phi_y)` per segment (rad).
    Configuration
);
coordinate_vector!(
    /// Time derivatives of a [`Configuration`] (per second, or per second squared for accelerations).
    ConfigurationRates
);

impl Configuration {
    /// As [`Configuration::check`], and additionally requires the extension to lie in the stroke.
    pub fn check_limits(&self, model: &RobotModel) -> Result<()> {
        self.check(model)?;
        let e = self.prismatic();
        if e < 0.0 || e > model.stroke_max {
            return Err(Error::Domain(format!(
                "prismatic extension {e} m outside [0, {}]",
                model.stroke_max
            )));
        }
        Ok(())
    }
}

/// Position and orientation of a frame in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            orientation: Matrix3::identity(),
        }
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Pose {
            position: t,
            orientation: Matrix3::identity(),
        }
    }

    /// `self * other`: `other` expressed in `self`'s frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation * other.position,
            orientation: self.orientation * other.orientation,
        }
    }

    /// ‖RᵀR − I‖, zero for a proper rotation.
    pub fn orthonormality_error(&self) -> f64 {
        (self.orientation.transpose() * self.orientation - Matrix3::identity()).norm()
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Desk-scale two-segment arm used throughout the unit tests.
    pub(crate) fn model() -> RobotModel {
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
}
