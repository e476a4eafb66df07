//! Synthesis report.

use petc_core::graph::Topology;
use petc_core::matlib::{riccati_lhs, sym_eig};
use petc_core::netsim::ScenarioConfig;
use petc_core::synthesis::{
    design_events, max_feasible_delay, DesignInputs, Mode, PlantModel, Synthesis, VmPolicy,
};
use serde::Serialize;

use crate::config::{matrix, WitnessDto};
use crate::error::CliError;

/// `b` values tried for the `η` sweep.
pub const B_GRID: [f64; 9] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];

#[derive(Debug, Clone, Serialize)]
pub struct GainReport {
    pub p: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub c: f64,
    pub c1: f64,
    pub alpha: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub lambda2: f64,
    pub lambda_max_l: f64,
    pub laplacian_eigenvalues: Vec<f64>,
    pub beta: f64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub kernel_dim: usize,
    pub kernel_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub mode: &'static str,
    pub sigma: f64,
    pub b: f64,
    pub h: f64,
    pub d: f64,
    pub p: usize,
    pub eta: f64,
    pub eta_bound: f64,
    pub eta_overridden: bool,
    pub eta_rhs: Vec<f64>,
    pub vm_policy: &'static str,
    pub v0: f64,
    pub v_m: f64,
    pub lambda_bar: f64,
    pub z_bar: Vec<f64>,
    pub b_e: Vec<f64>,
    pub upsilon: f64,
    pub upsilon_h: f64,
    pub e_norm: f64,
    pub g_p_norm: f64,
    pub feasibility_margin: f64,
    pub disagreement_bound: f64,
    pub envelope_floor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayReport {
    pub d_max: f64,
    pub p_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub alpha: f64,
    pub min_eig_p: f64,
    pub max_eig_lhs: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub b: f64,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub name: Option<String>,
    pub agents: usize,
    pub gains: GainReport,
    pub analysis: AnalysisReport,
    pub design: DesignReport,
    pub max_feasible_delay: Option<DelayReport>,
    pub witness: Option<WitnessReport>,
    /// Synthesized `η` for each `b` with the remaining inputs unchanged.
    pub eta_sweep: Vec<SweepPoint>,
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::NoDelay => "no_delay",
        Mode::Delay => "delay",
    }
}

pub fn check_witness(plant: &PlantModel, w: &WitnessDto) -> Result<WitnessReport, CliError> {
    let p = matrix(&w.p, "witness.p")?;
    if p.shape() != plant.a().shape() {
        return Err(CliError::Config("witness.p must match the shape of A".into()));
    }
    let lhs = riccati_lhs(plant.a(), plant.b(), w.alpha, &p).symmetric_part();
    let min_eig_p = sym_eig(&p.symmetric_part()).map_err(|e| CliError::Config(e.to_string()))?.min();
    let max_eig_lhs = sym_eig(&lhs).map_err(|e| CliError::Config(e.to_string()))?.max();
    Ok(WitnessReport { alpha: w.alpha, min_eig_p, max_eig_lhs, feasible: min_eig_p > 1e-10 && max_eig_lhs < -1e-10 })
}

pub fn build(
    name: Option<String>,
    cfg: &ScenarioConfig,
    syn: &Synthesis,
    witness: Option<&WitnessDto>,
) -> Result<SynthReport, CliError> {
    let plant = cfg.plant()?;
    let top: Topology = cfg.topology()?;
    let (g, a, d) = (&syn.gains, &syn.analysis, &syn.design);
    let max_delay = if d.mode == Mode::Delay {
        let (d_max, p_max) = max_feasible_delay(&plant, g, &top, d.b, d.h)?;
        Some(DelayReport { d_max, p_max: (p_max != usize::MAX).then_some(p_max) })
    } else {
        None
    };
    let eta_sweep = B_GRID
        .iter()
        .map(|&b| {
            let probe = DesignInputs { b, eta: None, ..cfg.design_inputs() };
            let eta = design_events(&plant, g, &top, a, &probe, d.v0).ok().map(|x| x.eta);
            SweepPoint { b, eta }
        })
        .collect();
    Ok(SynthReport {
        name,
        agents: cfg.n_agents,
        gains: GainReport { p: g.p.to_rows(), f: g.f.to_rows(), c: g.c, c1: g.c1, alpha: g.alpha, eps: g.eps },
        analysis: AnalysisReport {
            lambda2: a.lambda2,
            lambda_max_l: a.lambda_max_l,
            laplacian_eigenvalues: syn.spectrum.eigenvalues.clone(),
            beta: a.beta,
            lambda_min_p: a.lambda_min_p,
            lambda_max_p: a.lambda_max_p,
            kernel_dim: a.kernel_dim,
            kernel_residual: a.kernel_residual,
        },
        design: DesignReport {
            mode: mode_name(d.mode),
            sigma: d.sigma,
            b: d.b,
            h: d.h,
            d: d.d,
            p: d.p,
            eta: d.eta,
            eta_bound: d.eta_bound,
            eta_overridden: d.eta_overridden,
            eta_rhs: d.eta_rhs.clone(),
            vm_policy: match d.vm_policy {
                VmPolicy::Envelope => "envelope",
                VmPolicy::Initial => "initial",
            },
            v0: d.v0,
            v_m: d.v_m,
            lambda_bar: d.lambda_bar,
            z_bar: d.z_bar.clone(),
            b_e: d.b_e.clone(),
            upsilon: d.upsilon,
            upsilon_h: d.upsilon_h,
            e_norm: d.e_norm,
            g_p_norm: d.g_p_norm,
            feasibility_margin: d.feasibility_margin,
            disagreement_bound: d.disagreement_bound(),
            envelope_floor: d.n_agents as f64 * d.eta / d.beta,
        },
        max_feasible_delay: max_delay,
        witness: witness.map(|w| check_witness(&plant, w)).transpose()?,
        eta_sweep,
    })
}
