//! JSON scenario files.

use std::path::Path;

use petc_core::netsim::ScenarioConfig;
use petc_core::synthesis::{Mode, VmPolicy};
use petc_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantDto {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeDto {
    #[default]
    NoDelay,
    Delay,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum VmPolicyDto {
    #[default]
    Envelope,
    Initial,
}

/// A `P` checked against the Riccati inequality at `alpha` and reported;
/// gains still come from the solver.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WitnessDto {
    pub p: Vec<Vec<f64>>,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub plant: PlantDto,
    /// 0-based agent pairs.
    pub edges: Vec<(usize, usize)>,
    /// One state per agent; also fixes the agent count.
    pub x0: Vec<Vec<f64>>,
    #[serde(default)]
    pub mode: ModeDto,
    pub h: f64,
    #[serde(default)]
    pub d: f64,
    /// Seconds.
    #[serde(default)]
    pub delays: Vec<f64>,
    #[serde(default)]
    pub per_recipient_delays: bool,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Replaces the Riccati solution.
    #[serde(default)]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub witness: Option<WitnessDto>,
    #[serde(default)]
    pub vm_policy: VmPolicyDto,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_subsample")]
    pub subsample: usize,
}

fn default_sigma() -> f64 {
    0.5
}

fn default_b() -> f64 {
    1.0
}

fn default_duration() -> f64 {
    20.0
}

fn default_subsample() -> usize {
    1
}

pub fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix, CliError> {
    Matrix::from_rows(rows).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file = Self::parse(&bytes).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok((file, bytes))
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_config(&self) -> Result<ScenarioConfig, CliError> {
        let a = matrix(&self.plant.a, "plant.a")?;
        let b = matrix(&self.plant.b, "plant.b")?;
        let mut cfg = ScenarioConfig::new(a, b, self.x0.len(), self.edges.clone(), self.x0.clone(), self.h);
        cfg.mode = match self.mode {
            ModeDto::NoDelay => Mode::NoDelay,
            ModeDto::Delay => Mode::Delay,
        };
        cfg.d = self.d;
        cfg.delays = self.delays.clone();
        cfg.per_recipient_delays = self.per_recipient_delays;
        cfg.sigma = self.sigma;
        cfg.b_param = self.b;
        cfg.alpha = self.alpha;
        cfg.eps = self.eps;
        cfg.c = self.c;
        cfg.eta = self.eta;
        cfg.p = self.p.as_deref().map(|p| matrix(p, "p")).transpose()?;
        cfg.vm_policy = match self.vm_policy {
            VmPolicyDto::Envelope => VmPolicy::Envelope,
            VmPolicyDto::Initial => VmPolicy::Initial,
        };
        cfg.duration = self.duration;
        cfg.seed = self.seed;
        cfg.subsample = self.subsample;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            name: None,
            plant: PlantDto { a: cfg.a.to_rows(), b: cfg.b.to_rows() },
            edges: cfg.edges.clone(),
            x0: cfg.x0.clone(),
            mode: match cfg.mode {
                Mode::NoDelay => ModeDto::NoDelay,
                Mode::Delay => ModeDto::Delay,
            },
            h: cfg.h,
            d: cfg.d,
            delays: cfg.delays.clone(),
            per_recipient_delays: cfg.per_recipient_delays,
            sigma: cfg.sigma,
            b: cfg.b_param,
            alpha: cfg.alpha,
            eps: cfg.eps,
            c: cfg.c,
            eta: cfg.eta,
            p: cfg.p.as_ref().map(Matrix::to_rows),
            witness: None,
            vm_policy: match cfg.vm_policy {
                VmPolicy::Envelope => VmPolicyDto::Envelope,
                VmPolicy::Initial => VmPolicyDto::Initial,
            },
            duration: cfg.duration,
            seed: cfg.seed,
            subsample: cfg.subsample,
        }
    }
}
