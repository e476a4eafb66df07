//! CSV and manifest writers.
//!
//! Every number is written with 17 significant digits, which round-trips
//! through `f64` parsing exactly.

use std::path::{Path, PathBuf};

use petc_core::netsim::{Logs, MetricsReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const EVENTS: &str = "events.csv";
pub const METRICS: &str = "metrics.csv";
pub const MANIFEST: &str = "manifest.json";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Other(e.into()))
}

fn finish(mut w: csv::Writer<std::fs::File>) -> Result<(), CliError> {
    w.flush()?;
    Ok(())
}

fn row(w: &mut csv::Writer<std::fs::File>, fields: Vec<String>) -> Result<(), CliError> {
    w.write_record(&fields).map_err(|e| CliError::Other(e.into()))
}

/// `t, agent, x1..xn, u1..um`; sub-sampled points follow their grid row.
pub fn write_trajectory(path: &Path, logs: &Logs, n: usize, m: usize, subsample: usize) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string(), "agent".to_string()];
    header.extend((1..=n).map(|k| format!("x{k}")));
    header.extend((1..=m).map(|k| format!("u{k}")));
    row(&mut w, header)?;
    let per = subsample.saturating_sub(1);
    let emit = |w: &mut csv::Writer<std::fs::File>, t: f64, xs: &[Vec<f64>], us: &[Vec<f64>]| -> Result<(), CliError> {
        for (i, (x, u)) in xs.iter().zip(us).enumerate() {
            let mut f = vec![num(t), i.to_string()];
            f.extend(x.iter().map(|&v| num(v)));
            f.extend(u.iter().map(|&v| num(v)));
            row(w, f)?;
        }
        Ok(())
    };
    for (k, s) in logs.steps.iter().enumerate() {
        emit(&mut w, s.t, &s.x, &s.u)?;
        if per > 0 {
            for fine in logs.fine.iter().skip(k * per).take(per) {
                emit(&mut w, fine.t, &fine.x, &fine.u)?;
            }
        }
    }
    finish(w)
}

/// `t, agent`, the initial broadcasts included.
pub fn write_events(path: &Path, logs: &Logs, h: f64) -> Result<(), CliError> {
    let mut w = writer(path)?;
    row(&mut w, vec!["t".into(), "agent".into()])?;
    for e in &logs.events {
        row(&mut w, vec![num(e.step as f64 * h), e.agent.to_string()])?;
    }
    finish(w)
}

/// `t, V, envelope, max_disagreement`; the envelope is empty without a design.
pub fn write_metrics(path: &Path, m: &MetricsReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    row(&mut w, vec!["t".into(), "V".into(), "envelope".into(), "max_disagreement".into()])?;
    for (k, &t) in m.t.iter().enumerate() {
        let env = m.envelope.get(k).map(|&e| num(e)).unwrap_or_default();
        row(&mut w, vec![num(t), num(m.v[k]), env, num(m.max_disagreement[k])])?;
    }
    finish(w)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GuaranteeSummary {
    pub envelope_violations: usize,
    pub tail_max_disagreement: f64,
    pub disagreement_bound: Option<f64>,
    pub tail_bound_violated: bool,
    pub inter_event_floor_steps: Option<u64>,
    pub inter_event_violations: usize,
    pub min_inter_event: Option<f64>,
    pub event_counts: Vec<u64>,
    pub v_max: f64,
    pub v_m: Option<f64>,
    pub vm_exceeded: bool,
    pub hold: bool,
}

impl GuaranteeSummary {
    pub fn from_metrics(m: &MetricsReport) -> Self {
        Self {
            envelope_violations: m.envelope_violations,
            tail_max_disagreement: m.tail_max_disagreement,
            disagreement_bound: m.disagreement_bound,
            tail_bound_violated: m.tail_bound_violated,
            inter_event_floor_steps: m.inter_event_floor_steps,
            inter_event_violations: m.inter_event_violations,
            min_inter_event: m.min_inter_event_all(),
            event_counts: m.event_counts.clone(),
            v_max: m.v_max,
            v_m: m.v_m,
            vm_exceeded: m.vm_exceeded,
            hold: m.guarantees_hold(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: PathBuf,
    pub config_sha256: String,
    pub seed: u64,
    pub duration: f64,
    pub steps: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
    pub guarantees: GuaranteeSummary,
    pub exit_code: u8,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Other(e.into()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
