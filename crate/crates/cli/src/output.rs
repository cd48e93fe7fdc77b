//! File formats: trajectory and summary CSVs, metrics JSON and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use roundabout_core::simulator::{EpisodeMetrics, ForwardSample, LogRow};
use serde::{Deserialize, Serialize};

pub const TRAJECTORY_HEADER: [&str; 14] = [
    "t",
    "vehicle_id",
    "x",
    "y",
    "theta",
    "v",
    "a_applied",
    "w",
    "r_collision",
    "r_gap",
    "r_velocity",
    "r_target",
    "r_comfort",
    "r_total",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "planner",
    "seed",
    "total_reward",
    "travel_time",
    "collisions",
    "emergency_brakes",
    "reached_target",
    "safety_violations",
];

pub const FORWARD_HEADER: [&str; 8] = ["step", "t", "x", "y", "theta", "v", "policy", "lateral_error"];

/// Nine significant digits, plain decimal for moderate magnitudes, trailing zeros dropped.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        trim_zeros(format!("{:.*}", (8 - exp).max(0) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

pub fn write_trajectory<W: Write>(w: W, log: &[LogRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for r in log {
        out.write_record([
            sig9(r.t),
            r.vehicle_id.to_string(),
            sig9(r.x),
            sig9(r.y),
            sig9(r.theta),
            sig9(r.v),
            sig9(r.a_applied),
            sig9(r.w),
            opt(r.r_collision),
            opt(r.r_gap),
            opt(r.r_velocity),
            opt(r.r_target),
            opt(r.r_comfort),
            opt(r.r_total),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn trajectory_bytes(log: &[LogRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_trajectory(&mut buf, log)?;
    Ok(buf)
}

pub fn write_summary<W: Write>(w: W, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for m in rows {
        out.write_record([
            m.planner.name().to_string(),
            m.seed.to_string(),
            sig9(m.total_reward),
            sig9(m.travel_time),
            m.collision_events.to_string(),
            m.emergency_brake_events.to_string(),
            m.reached_target.to_string(),
            m.safety_violations.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_forward<W: Write>(w: W, samples: &[ForwardSample<f64>], dt: f64) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FORWARD_HEADER)?;
    for s in samples {
        out.write_record([
            s.step.to_string(),
            sig9(s.step as f64 * dt),
            sig9(s.state.x),
            sig9(s.state.y),
            sig9(s.state.theta),
            sig9(s.state.v),
            s.policy.map(|k| format!("{k:?}").to_lowercase()).unwrap_or_default(),
            sig9(s.lateral_error),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Record of one invocation; written last, so its presence marks a complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<String>,
    pub planners: Vec<String>,
    /// First and last seed, inclusive.
    pub seeds: Option<(u64, u64)>,
    pub out_dir: PathBuf,
    /// Paths relative to `out_dir`, in the order they were written.
    pub artifacts: Vec<PathBuf>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Collects the files a command writes below one output directory.
pub struct ArtifactSink {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactSink {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(rel.to_path_buf());
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, rel: impl AsRef<Path>, value: &S) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(rel, &text)
    }

    /// Adds files that were written by someone else below the root.
    pub fn adopt(&mut self, rels: impl IntoIterator<Item = PathBuf>) {
        self.written.extend(rels);
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.out_dir = self.root.clone();
        manifest.artifacts = std::mem::take(&mut self.written);
        manifest.artifacts.push(MANIFEST_FILE.into());
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(manifest)
    }
}
