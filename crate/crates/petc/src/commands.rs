//! Subcommand bodies, independent of argument parsing.

use std::path::{Path, PathBuf};

use petc_core::netsim;
use rayon::prelude::*;

use crate::config::ScenarioFile;
use crate::error::CliError;
use crate::output::{self, GuaranteeSummary, RunManifest};
use crate::report::{self, SynthReport};

pub fn synth(config: &Path) -> Result<SynthReport, CliError> {
    let (file, _) = ScenarioFile::load(config)?;
    let cfg = file.to_config()?;
    let syn = netsim::synthesize(&cfg)?;
    report::build(file.name.clone(), &cfg, &syn, file.witness.as_ref())
}

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub duration: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub exit_code: u8,
    pub guarantees: GuaranteeSummary,
    pub steps: u64,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs one scenario and writes its CSVs and manifest into `out_dir`.
/// Exit code 4 in the summary flags a violated guarantee; files are still written.
pub fn run(config: &Path, overrides: &RunOverrides, out_dir: &Path) -> Result<RunSummary, CliError> {
    let started = now();
    let (mut file, bytes) = ScenarioFile::load(config)?;
    if let Some(seed) = overrides.seed {
        file.seed = seed;
    }
    if let Some(duration) = overrides.duration {
        file.duration = duration;
    }
    let cfg = file.to_config()?;
    let out = netsim::run(&cfg)?;

    std::fs::create_dir_all(out_dir)?;
    let traj = out_dir.join(output::TRAJECTORY);
    let events = out_dir.join(output::EVENTS);
    let metrics = out_dir.join(output::METRICS);
    let manifest_path = out_dir.join(output::MANIFEST);
    output::write_trajectory(&traj, &out.logs, cfg.a.rows(), cfg.b.cols(), cfg.subsample)?;
    output::write_events(&events, &out.logs, cfg.h)?;
    output::write_metrics(&metrics, &out.metrics)?;

    let guarantees = GuaranteeSummary::from_metrics(&out.metrics);
    let exit_code = if guarantees.hold { 0 } else { 4 };
    let manifest = RunManifest {
        config: config.to_path_buf(),
        config_sha256: output::sha256_hex(&bytes),
        seed: cfg.seed,
        duration: cfg.duration,
        steps: out.steps,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        outputs: vec![traj, events, metrics, manifest_path.clone()],
        guarantees: guarantees.clone(),
        exit_code,
    };
    output::write_manifest(&manifest_path, &manifest)?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), exit_code, guarantees, steps: out.steps })
}

/// Scenario files of a batch directory, sorted by name.
pub fn batch_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("no .json scenarios in {}", dir.display())));
    }
    Ok(files)
}

/// Every scenario of `dir` in parallel, each into `out_dir/<file stem>`.
pub fn run_batch(dir: &Path, overrides: &RunOverrides, out_dir: &Path) -> Result<Vec<(PathBuf, Result<RunSummary, CliError>)>, CliError> {
    let files = batch_files(dir)?;
    Ok(files
        .into_par_iter()
        .map(|f| {
            let stem = f.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
            let res = run(&f, overrides, &out_dir.join(stem));
            (f, res)
        })
        .collect())
}
