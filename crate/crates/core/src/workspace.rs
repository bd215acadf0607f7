//! Monte-Carlo reachable workspace and hemispherical shell fitting.
//!
//! Sample `i` of a cloud draws its configuration from its own ChaCha stream
//! `(seed, i)`, so a cloud is bit-identical whatever the thread count. The
//! bend angles are drawn before the extension and the extension uniform is
//! always consumed, so clouds with and without the prismatic joint share their
//! bend draws sample by sample.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kinematics;
use crate::model::{Configuration, RobotModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceCloud {
    /// Tip positions in the base frame (m).
    pub points: Vec<Vector3<f64>>,
    /// Prismatic extension of each sample (m).
    pub extensions: Vec<f64>,
    pub seed: u64,
    pub sample_count: usize,
    pub prismatic_enabled: bool,
}

/// Configuration of sample `index` in the cloud seeded with `seed`.
pub fn draw_configuration(model: &RobotModel, seed: u64, index: u64, prismatic_enabled: bool) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let limit = model.bend_limit;
    let mut uniform_bend = || limit * (2.0 * rng.random::<f64>() - 1.0);
    let segments: Vec<[f64; 2]> = (0..model.segment_count())
        .map(|_| {
            let x = uniform_bend();
            let y = uniform_bend();
            [x, y]
        })
        .collect();
    let u: f64 = rng.random();
    let ext = if prismatic_enabled { u * model.stroke_max } else { 0.0 };
    Configuration::new(ext, &segments)
}

/// Draws `n` configurations uniformly over the joint ranges and records the tip of each.
pub fn sample_workspace(model: &RobotModel, n: usize, seed: u64, prismatic_enabled: bool) -> Result<WorkspaceCloud> {
    if n == 0 {
        return Err(Error::Domain("workspace sample count must be at least 1".into()));
    }
    let samples: Vec<(Vector3<f64>, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let q = draw_configuration(model, seed, i, prismatic_enabled);
            kinematics::tip_position(model, &q).map(|p| (p, q.prismatic()))
        })
        .collect::<Result<_>>()?;
    let (points, extensions) = samples.into_iter().unzip();
    Ok(WorkspaceCloud {
        points,
        extensions,
        seed,
        sample_count: n,
        prismatic_enabled,
    })
}

/// Where radial distances are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShellOrigin {
    /// The arm base at zero extension. The prismatic sweep shows up as a
    /// larger outer radius.
    #[default]
    FixedBase,
    /// The arm base at each sample's own extension. The sweep is added as an
    /// annular cylinder of height equal to the extension range.
    MovingBase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellFitRule {
    pub inner_percentile: f64,
    pub outer_percentile: f64,
    /// Only points at or above this height (relative to the origin) are used.
    pub z_min: f64,
    pub origin: ShellOrigin,
}

impl Default for ShellFitRule {
    fn default() -> Self {
        ShellFitRule {
            inner_percentile: 1.0,
            outer_percentile: 99.0,
            z_min: 0.0,
            origin: ShellOrigin::FixedBase,
        }
    }
}

/// Minimum number of points a shell fit needs.
pub const MIN_FIT_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellFit {
    pub r_inner: f64,
    pub r_outer: f64,
    pub z_min: f64,
    /// Height of the cylindrical sweep term (zero for [`ShellOrigin::FixedBase`]).
    pub sweep: f64,
    pub volume: f64,
}

/// Percentile with linear interpolation between order statistics; `sorted` must be ascending.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_shell(cloud: &WorkspaceCloud) -> Result<ShellFit> {
    fit_shell_with(cloud, &ShellFitRule::default())
}

/// Fits a hemispherical shell to the cloud: inner and outer radii are
/// percentiles of the radial distance over points above `z_min`.
pub fn fit_shell_with(cloud: &WorkspaceCloud, rule: &ShellFitRule) -> Result<ShellFit> {
    if !(0.0..100.0).contains(&rule.inner_percentile)
        || !(rule.inner_percentile < rule.outer_percentile && rule.outer_percentile <= 100.0)
    {
        return Err(Error::Domain(format!(
            "shell percentiles must satisfy 0 ≤ inner < outer ≤ 100, got {} and {}",
            rule.inner_percentile, rule.outer_percentile
        )));
    }
    let moving = rule.origin == ShellOrigin::MovingBase;
    let mut radii = Vec::with_capacity(cloud.points.len());
    let mut ext_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, &ext) in cloud.points.iter().zip(&cloud.extensions) {
        let base = if moving { ext } else { 0.0 };
        let rel = p - Vector3::new(0.0, 0.0, base);
        if rel.z >= rule.z_min {
            radii.push(rel.norm());
            ext_range = (ext_range.0.min(ext), ext_range.1.max(ext));
        }
    }
    if radii.len() < MIN_FIT_POINTS {
        return Err(Error::Domain(format!(
            "shell fit needs at least {MIN_FIT_POINTS} points above z_min, got {}",
            radii.len()
        )));
    }
    radii.sort_by(f64::total_cmp);
    let r_inner = percentile(&radii, rule.inner_percentile);
    let r_outer = percentile(&radii, rule.outer_percentile);
    if !(r_outer > r_inner) {
        return Err(Error::Domain(format!(
            "degenerate cloud: inner radius {r_inner} m, outer radius {r_outer} m"
        )));
    }
    let shell = 2.0 * PI / 3.0 * (r_outer.powi(3) - r_inner.powi(3));
    let sweep = if moving { ext_range.1 - ext_range.0 } else { 0.0 };
    let cylinder = sweep * PI * (r_outer * r_outer - r_inner * r_inner);
    Ok(ShellFit {
        r_inner,
        r_outer,
        z_min: rule.z_min,
        sweep,
        volume: shell + cylinder,
    })
}

/// Volume ratio of two shell fits.
pub fn compare_volumes(with_prismatic: &ShellFit, without: &ShellFit) -> Result<f64> {
    if !(without.volume > 0.0) {
        return Err(Error::Domain(format!(
            "baseline volume must be positive, got {}",
            without.volume
        )));
    }
    Ok(with_prismatic.volume / without.volume)
}

/// Writes `x_m,y_m,z_m` rows.
pub fn write_cloud_csv<W: Write>(cloud: &WorkspaceCloud, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_m", "y_m", "z_m"])?;
    for p in &cloud.points {
        w.write_record([p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
    }
    w.flush()
}

/// Key-value report of a with/without comparison.
pub fn fit_report(with_prismatic: &ShellFit, without: &ShellFit, ratio: f64, samples: usize, seed: u64) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    };
    kv("samples", samples.to_string());
    kv("seed", seed.to_string());
    for (prefix, fit) in [("with_prismatic", with_prismatic), ("without_prismatic", without)] {
        kv(&format!("{prefix}.r_inner_m"), fit.r_inner.to_string());
        kv(&format!("{prefix}.r_outer_m"), fit.r_outer.to_string());
        kv(&format!("{prefix}.z_min_m"), fit.z_min.to_string());
        kv(&format!("{prefix}.sweep_m"), fit.sweep.to_string());
        kv(&format!("{prefix}.volume_m3"), fit.volume.to_string());
    }
    kv("volume_ratio", ratio.to_string());
    kv("volume_increase_pct", (100.0 * (ratio - 1.0)).to_string());
    s
}
