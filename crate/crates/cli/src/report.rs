//! Sweep outputs: `sweep.csv`, `summary.json` and `run-manifest.json`.

use std::path::Path;

use ovalwig_core::sweep::{BranchSummary, SweepOutput, SweepRecord};
use serde_json::{json, Value};

use crate::config::{RunConfig, Sector};
use crate::dump::producer;
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 17] = [
    "theta",
    "branch",
    "k",
    "h_r",
    "h_i",
    "N",
    "Z_plus",
    "F_plus",
    "F_minus",
    "F_tilde_minus",
    "dhi_fd",
    "dhi_score",
    "bound_rhs",
    "slack",
    "decomp_residual",
    "masked_fraction",
    "degenerate_flag",
];

/// 17 significant digits.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(r: &SweepRecord) -> Vec<String> {
    let mut out = vec![real(r.theta), r.branch.to_string()];
    out.extend(
        [
            r.k,
            r.h_r,
            r.h_i,
            r.n,
            r.z_plus,
            r.f_plus,
            r.f_minus,
            r.f_tilde_minus,
            r.dhi_fd,
            r.dhi_score,
            r.bound_rhs,
            r.slack,
            r.decomposition_residual,
            r.masked_fraction,
        ]
        .into_iter()
        .map(real),
    );
    out.push(u8::from(r.degenerate).to_string());
    out
}

/// Rows ordered by θ, then by branch.
pub fn write_csv(path: &Path, output: &SweepOutput) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    let samples = output.records.first().map_or(0, Vec::len);
    for s in 0..samples {
        for branch in &output.records {
            w.write_record(row(&branch[s])).map_err(csv_err)?;
        }
    }
    w.flush().map_err(Error::io(path))?;
    Ok(())
}

fn branch_json(b: &BranchSummary) -> Value {
    json!({
        "branch": b.branch,
        "h_i_max_theta": b.h_i_max_theta,
        "dhi_min_theta": b.dhi_min_theta,
        "dhi_global_min_theta": b.dhi_global_min_theta,
        "f_minus_peak_theta": b.f_minus_peak_theta,
        "f_plus_peak_theta": b.f_plus_peak_theta,
        "h_i_offset": b.h_i_offset,
        "f_minus_offset": b.f_minus_offset,
        "f_plus_offset": b.f_plus_offset,
        "f_ratio_at_star": b.f_ratio_at_star,
        "f_minus_exceeds_plus": b.f_minus_exceeds_plus,
        "center": b.center.map(|c| json!({
            "index": c.index,
            "theta": c.theta,
            "theta_refined": c.theta_refined,
            "mean_score_ratio": c.mean_score_ratio,
            "centering": c.centering,
        })),
    })
}

pub fn summary_json(output: &SweepOutput) -> Value {
    let labelled: Vec<Value> = labelled_points(output)
        .into_iter()
        .map(|(label, r)| json!({"label": label, "theta": r.theta, "branch": r.branch, "k": r.k, "h_i": r.h_i}))
        .collect();
    json!({
        "producer": producer(),
        "tau": output.config.tau,
        "crossing": output.crossing.map(|c| json!({
            "theta_star": c.theta_star,
            "gap": c.gap,
            "sample": c.index,
            "branches": output.crossing_branches,
        })),
        "detected_crossings": output.detected.iter().map(|d| json!({
            "parity": Sector::from(d.parity),
            "index": d.index,
            "theta_star": d.theta_star,
            "gap": d.gap,
        })).collect::<Vec<_>>(),
        "exchange": output.exchange.map(|e| json!({
            "lower_self": e.lower_self,
            "upper_self": e.upper_self,
            "lower_to_upper": e.lower_to_upper,
            "upper_to_lower": e.upper_to_lower,
        })),
        "halvings": output.halvings,
        "labelled_points": labelled,
        "summary": output.summary.as_ref().map(|s| json!({
            "spacing": s.spacing,
            "theta_star": s.theta_star,
            "gap": s.gap,
            "branches": s.branches.iter().map(branch_json).collect::<Vec<_>>(),
        })),
    })
}

/// Records at `θ_min`, the sample nearest `θ*`, and `θ_max`, per branch.
pub fn labelled_points(output: &SweepOutput) -> Vec<(&'static str, &SweepRecord)> {
    let mut out = Vec::new();
    for branch in &output.records {
        let (Some(first), Some(last)) = (branch.first(), branch.last()) else { continue };
        out.push(("theta_min", first));
        if let Some(c) = output.crossing {
            out.push(("theta_star", &branch[c.index]));
        }
        out.push(("theta_max", last));
    }
    out
}

pub fn manifest_json(config: &RunConfig, output: &SweepOutput) -> Value {
    let g = &output.grid;
    let r = &output.resolution;
    json!({
        "producer": producer(),
        "config": config.resolved(),
        "solver_grid": {"x_min": g.x_min, "y_min": g.y_min, "dx": g.dx, "dy": g.dy, "nx": g.nx, "ny": g.ny},
        "resolution": {
            "h": r.h,
            "wigner_stride": r.wigner_stride,
            "positions": [r.positions.0, r.positions.1],
            "momentum_points": r.momentum_points,
            "p_max": r.p_max,
        },
        "outputs": ["sweep.csv", "summary.json", "run-manifest.json"],
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

/// The run configuration echoed in a manifest.
pub fn read_manifest(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config = value.get("config").ok_or_else(|| Error::Config(format!("{}: no config entry", path.display())))?;
    let config: RunConfig =
        serde_json::from_value(config.clone()).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}
