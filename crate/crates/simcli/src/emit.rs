//! Result files: `run.csv`, `summary.txt`, `traj3d.svg`, `timeseries.svg`,
//! and the workspace cloud outputs.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use softarm::workspace::{self, ShellFit, WorkspaceCloud};

use crate::error::{Result, SimError};
use crate::runner::{RunLog, CONTROL_RATE_HZ, PLANT_STEPS_PER_TICK};
use crate::svg::{self, Panel, MEASURED, REFERENCE};

/// Column names of `run.csv`, in order.
pub fn csv_header(log: &RunLog) -> Vec<String> {
    let first = &log.rows[0];
    let mut cols = vec!["t_s".to_string()];
    cols.extend((0..first.q.len()).map(|i| format!("q_{i}")));
    cols.extend((0..first.qd.len()).map(|i| format!("qd_{i}")));
    for prefix in ["tip", "ref"] {
        cols.extend(["x", "y", "z"].iter().map(|a| format!("{prefix}_{a}_m")));
    }
    cols.extend((0..first.command.arm_chambers.len()).map(|i| format!("p_ch_{i}_pa")));
    cols.extend(["p_pam_pa", "p_piston_pa", "sat_flag", "limit_flag"].map(String::from));
    if first.gripper_closed.is_some() {
        cols.push("gripper_closed".into());
    }
    cols
}

/// One row per control tick. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_run_csv<W: Write>(log: &RunLog, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(log))?;
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in &log.rows {
        let mut rec: Vec<String> = Vec::with_capacity(32);
        rec.push(r.t.to_string());
        rec.extend(r.q.iter().chain(&r.qd).map(f64::to_string));
        rec.extend(r.tip.iter().chain(r.reference.iter()).map(f64::to_string));
        rec.extend(r.command.arm_chambers.iter().map(f64::to_string));
        rec.push(r.command.pam.to_string());
        rec.push(r.command.piston.to_string());
        rec.push(flag(r.saturated));
        rec.push(flag(r.limit_hit));
        if let Some(g) = r.gripper_closed {
            rec.push(flag(g));
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn summary_text(log: &RunLog) -> String {
    let s = &log.summary;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("scenario", log.scenario.clone());
    kv("seed", log.seed.to_string());
    kv("duration_s", log.duration.to_string());
    kv("prismatic_enabled", log.prismatic_enabled.to_string());
    kv("control_rate_hz", CONTROL_RATE_HZ.to_string());
    kv(
        "plant_rate_hz",
        (CONTROL_RATE_HZ * PLANT_STEPS_PER_TICK as f64).to_string(),
    );
    kv("rows", log.rows.len().to_string());
    kv("rms_tip_error_m", s.rms_error_m.to_string());
    kv("mean_tip_error_m", s.mean_error_m.to_string());
    kv("max_tip_error_m", s.max_error_m.to_string());
    kv("max_pressure_pa", s.max_pressure_pa.to_string());
    kv("saturation_count", s.saturation_count.to_string());
    kv("limit_count", s.limit_count.to_string());
    out
}

/// Oblique projection of the tip path and the reference.
pub fn traj3d_svg(log: &RunLog) -> String {
    let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
    let project = |p: &nalgebra::Vector3<f64>| ((p.x - p.y) * c, p.z + (p.x + p.y) * s * 0.5);
    let tip: Vec<(f64, f64)> = log.rows.iter().map(|r| project(&r.tip)).collect();
    let reference: Vec<(f64, f64)> = log.rows.iter().map(|r| project(&r.reference)).collect();
    let all = || tip.iter().chain(&reference);
    let mut xr = svg::padded_range(all().map(|p| p.0));
    let mut yr = svg::padded_range(all().map(|p| p.1));
    // equal scale on both axes
    let (pw, ph) = (640.0, 520.0);
    let scale = ((xr.1 - xr.0) / pw).max((yr.1 - yr.0) / ph);
    let (mx, my) = (0.5 * (xr.0 + xr.1), 0.5 * (yr.0 + yr.1));
    xr = (mx - 0.5 * scale * pw, mx + 0.5 * scale * pw);
    yr = (my - 0.5 * scale * ph, my + 0.5 * scale * ph);
    let panel = Panel {
        left: 100.0,
        top: 40.0,
        width: pw,
        height: ph,
        x_range: xr,
        y_range: yr,
    };
    let mut out = String::new();
    svg::header(&mut out, 620.0, &format!("{}: tip path (oblique view)", log.scenario));
    svg::axes(&mut out, &panel, "(x − y)·cos 30° (m)", "z + (x + y)·sin 30°/2 (m)");
    svg::polyline(&mut out, reference.iter().map(|p| panel.map(p.0, p.1)), REFERENCE);
    svg::polyline(&mut out, tip.iter().map(|p| panel.map(p.0, p.1)), MEASURED);
    svg::legend(&mut out, 620.0, 60.0, &[("tip", MEASURED), ("reference", REFERENCE)]);
    svg::footer(&mut out);
    out
}

/// Tip and reference coordinates and the tip error against time.
pub fn timeseries_svg(log: &RunLog) -> String {
    let t_range = (0.0, log.rows.last().map_or(1.0, |r| r.t).max(1e-3));
    let panel_h = 120.0;
    let gap = 40.0;
    let mut out = String::new();
    svg::header(
        &mut out,
        40.0 + 4.0 * (panel_h + gap) + 20.0,
        &format!("{}: time response", log.scenario),
    );
    for axis in 0..3 {
        let values = log.rows.iter().flat_map(|r| [r.tip[axis], r.reference[axis]]);
        let panel = Panel {
            left: 100.0,
            top: 40.0 + axis as f64 * (panel_h + gap),
            width: 640.0,
            height: panel_h,
            x_range: t_range,
            y_range: svg::padded_range(values),
        };
        let name = ["x (m)", "y (m)", "z (m)"][axis];
        svg::axes(&mut out, &panel, "", name);
        svg::polyline(
            &mut out,
            log.rows.iter().map(|r| panel.map(r.t, r.reference[axis])),
            REFERENCE,
        );
        svg::polyline(&mut out, log.rows.iter().map(|r| panel.map(r.t, r.tip[axis])), MEASURED);
    }
    let errors = || log.rows.iter().map(|r| 1e3 * r.tip_error());
    let panel = Panel {
        left: 100.0,
        top: 40.0 + 3.0 * (panel_h + gap),
        width: 640.0,
        height: panel_h,
        x_range: t_range,
        y_range: (0.0, svg::padded_range(errors()).1.max(1.0)),
    };
    svg::axes(&mut out, &panel, "t (s)", "tip error (mm)");
    svg::polyline(
        &mut out,
        log.rows.iter().zip(errors()).map(|(r, e)| panel.map(r.t, e)),
        MEASURED,
    );
    svg::legend(&mut out, 620.0, 30.0, &[("tip", MEASURED), ("reference", REFERENCE)]);
    svg::footer(&mut out);
    out
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(|e| SimError::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

/// Writes the four run outputs into `dir`, creating it if needed.
pub fn emit_results(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>> {
    if log.rows.is_empty() {
        return Err(SimError::Validation("run log has no rows".into()));
    }
    ensure_dir(dir)?;
    let mut csv = Vec::new();
    write_run_csv(log, &mut csv).map_err(|e| SimError::io(dir.join("run.csv"), e))?;
    Ok(vec![
        write_file(dir.join("run.csv"), &csv)?,
        write_file(dir.join("summary.txt"), summary_text(log).as_bytes())?,
        write_file(dir.join("traj3d.svg"), traj3d_svg(log).as_bytes())?,
        write_file(dir.join("timeseries.svg"), timeseries_svg(log).as_bytes())?,
    ])
}

/// Side view (x–z) of both clouds, every `stride`-th point.
pub fn workspace_svg(with: Option<&WorkspaceCloud>, without: &WorkspaceCloud, stride: usize) -> String {
    let clouds: Vec<(&WorkspaceCloud, &str)> = with
        .map(|c| (c, "#1f5fbf"))
        .into_iter()
        .chain([(without, "#d9822b")])
        .collect();
    let xs = || {
        clouds
            .iter()
            .flat_map(|(c, _)| c.points.iter().step_by(stride).map(|p| p.x))
    };
    let zs = || {
        clouds
            .iter()
            .flat_map(|(c, _)| c.points.iter().step_by(stride).map(|p| p.z))
    };
    let panel = Panel {
        left: 100.0,
        top: 40.0,
        width: 640.0,
        height: 520.0,
        x_range: svg::padded_range(xs()),
        y_range: svg::padded_range(zs()),
    };
    let mut out = String::new();
    svg::header(&mut out, 620.0, "reachable tip positions (side view)");
    svg::axes(&mut out, &panel, "x (m)", "z (m)");
    for (cloud, color) in &clouds {
        for p in cloud.points.iter().step_by(stride) {
            let (px, py) = panel.map(p.x, p.z);
            let _ = writeln!(
                out,
                r#"<circle cx="{px:.1}" cy="{py:.1}" r="1" fill="{color}" fill-opacity="0.4"/>"#
            );
        }
    }
    let mut legend_y = 60.0;
    for (cloud, color) in &clouds {
        let name = if cloud.prismatic_enabled {
            "with prismatic joint"
        } else {
            "without prismatic joint"
        };
        let _ = writeln!(out, r#"<circle cx="612" cy="{legend_y}" r="4" fill="{color}"/>"#);
        let _ = writeln!(out, r#"<text x="622" y="{}">{name}</text>"#, legend_y + 4.0);
        legend_y += 16.0;
    }
    svg::footer(&mut out);
    out
}

/// Outcome of a workspace comparison, as written to disk.
pub struct WorkspaceResult<'a> {
    pub with: Option<(&'a WorkspaceCloud, ShellFit)>,
    pub without: (&'a WorkspaceCloud, ShellFit),
    pub samples: usize,
    pub seed: u64,
}

pub fn emit_workspace(result: &WorkspaceResult<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    let mut clouds = vec![("workspace_without.csv", result.without.0)];
    if let Some((c, _)) = &result.with {
        clouds.insert(0, ("workspace_with.csv", *c));
    }
    for (name, cloud) in clouds {
        let mut buf = Vec::new();
        workspace::write_cloud_csv(cloud, &mut buf).map_err(|e| SimError::io(dir.join(name), e))?;
        files.push(write_file(dir.join(name), &buf)?);
    }
    let summary = match &result.with {
        Some((_, fit)) => {
            let ratio =
                workspace::compare_volumes(fit, &result.without.1).map_err(|e| SimError::Validation(e.to_string()))?;
            workspace::fit_report(fit, &result.without.1, ratio, result.samples, result.seed)
        }
        None => {
            let f = &result.without.1;
            format!(
                "samples = {}\nseed = {}\nwithout_prismatic.r_inner_m = {}\nwithout_prismatic.r_outer_m = {}\n\
                 without_prismatic.z_min_m = {}\nwithout_prismatic.sweep_m = {}\nwithout_prismatic.volume_m3 = {}\n",
                result.samples, result.seed, f.r_inner, f.r_outer, f.z_min, f.sweep, f.volume
            )
        }
    };
    files.push(write_file(dir.join("workspace_summary.txt"), summary.as_bytes())?);
    let stride = (result.samples / 4000).max(1);
    let plot = workspace_svg(result.with.as_ref().map(|(c, _)| *c), result.without.0, stride);
    files.push(write_file(dir.join("workspace.svg"), plot.as_bytes())?);
    Ok(files)
}
