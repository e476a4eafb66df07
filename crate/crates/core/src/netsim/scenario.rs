use alloc::format;
use alloc::vec::Vec;

use libm::round;

use crate::graph::{self, Topology};
use crate::matlib::Matrix;
use crate::synthesis::{
    self, delay_steps, DesignInputs, GainOptions, GainSet, Mode, PlantModel, Synthesis, VmPolicy,
};

use super::channel::DelayModel;
use super::metrics::{metrics, MetricsReport};
use super::world::{Logs, Policy, SimWorld, WorldSetup};
use super::SimError;

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub a: Matrix,
    pub b: Matrix,
    pub n_agents: usize,
    /// 0-based agent pairs.
    pub edges: Vec<(usize, usize)>,
    pub x0: Vec<Vec<f64>>,
    pub mode: Mode,
    pub h: f64,
    pub d: f64,
    /// Admissible delays in seconds.
    pub delays: Vec<f64>,
    /// Draw a separate delay for every recipient of a broadcast.
    pub per_recipient_delays: bool,
    pub sigma: f64,
    pub b_param: f64,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub eta: Option<f64>,
    /// Use this `P` instead of solving the Riccati equation; `alpha` is then
    /// the rate it is checked against.
    pub p: Option<Matrix>,
    pub vm_policy: VmPolicy,
    pub duration: f64,
    pub seed: u64,
    pub subsample: usize,
    pub record_detail: bool,
}

impl ScenarioConfig {
    /// Delay-free defaults for the given plant, graph and initial states.
    pub fn new(a: Matrix, b: Matrix, n_agents: usize, edges: Vec<(usize, usize)>, x0: Vec<Vec<f64>>, h: f64) -> Self {
        Self {
            a,
            b,
            n_agents,
            edges,
            x0,
            mode: Mode::NoDelay,
            h,
            d: 0.0,
            delays: Vec::new(),
            per_recipient_delays: false,
            sigma: 0.5,
            b_param: 1.0,
            alpha: None,
            eps: None,
            c: None,
            eta: None,
            p: None,
            vm_policy: VmPolicy::Envelope,
            duration: 20.0,
            seed: 0,
            subsample: 1,
            record_detail: false,
        }
    }

    pub fn steps(&self) -> u64 {
        round(self.duration / self.h) as u64
    }

    pub fn plant(&self) -> Result<PlantModel, SimError> {
        Ok(PlantModel::new(self.a.clone(), self.b.clone())?)
    }

    pub fn topology(&self) -> Result<Topology, SimError> {
        Ok(Topology::from_edges(self.n_agents, &self.edges)?)
    }

    pub fn design_inputs(&self) -> DesignInputs {
        DesignInputs {
            mode: self.mode,
            sigma: self.sigma,
            b: self.b_param,
            h: self.h,
            d: self.d,
            eta: self.eta,
            vm_policy: self.vm_policy,
        }
    }

    /// Shape, range and grid checks that need no synthesis.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.into()));
        if !(self.h > 0.0) || !self.h.is_finite() {
            return bad("sampling period h must be positive");
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad("duration must be finite and nonnegative");
        }
        if self.subsample == 0 {
            return bad("subsample must be at least 1");
        }
        if self.x0.len() != self.n_agents {
            return Err(SimError::Config(format!(
                "{} initial states given for {} agents",
                self.x0.len(),
                self.n_agents
            )));
        }
        if self.x0.iter().any(|x| x.len() != self.a.rows() || x.iter().any(|v| !v.is_finite())) {
            return bad("every initial state must be a finite n-vector");
        }
        let top = self.topology()?;
        if !graph::is_connected(&top)? {
            return bad("graph not connected");
        }
        if self.mode == Mode::Delay {
            let p = delay_steps(self.d, self.h).map_err(|e| SimError::Config(format!("{e}")))?;
            DelayModel::new(&self.delays, self.h, p, self.seed, self.per_recipient_delays)?;
        }
        Ok(())
    }

    fn gains(&self, plant: &PlantModel, top: &Topology) -> Result<Option<GainSet>, SimError> {
        let Some(p) = &self.p else { return Ok(None) };
        let spec = graph::laplacian(top)?;
        let l2 = spec.lambda2.ok_or(SimError::Config("synthesis needs at least two agents".into()))?;
        let c = self.c.unwrap_or(1.0 / l2);
        let alpha = self.alpha.unwrap_or_else(|| synthesis::default_alpha(plant));
        Ok(Some(GainSet::from_p(plant, p.clone(), c, alpha)?))
    }

    fn gain_options(&self) -> GainOptions {
        GainOptions { alpha: self.alpha, eps: self.eps, c: self.c }
    }
}

/// Gains, analysis and event design for a scenario.
pub fn synthesize(cfg: &ScenarioConfig) -> Result<Synthesis, SimError> {
    cfg.validate()?;
    let plant = cfg.plant()?;
    let top = cfg.topology()?;
    let given = cfg.gains(&plant, &top)?;
    Ok(synthesis::synthesize(&plant, &top, given, &cfg.gain_options(), &cfg.design_inputs(), &cfg.x0)?)
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub synthesis: Synthesis,
    pub logs: Logs,
    pub metrics: MetricsReport,
    pub steps: u64,
    pub queued: u64,
    pub delivered: u64,
    pub dropped_stale: u64,
    pub in_flight: usize,
}

fn execute(cfg: &ScenarioConfig, syn: Synthesis, policy: Policy, coupling: f64, delayed: bool) -> Result<RunOutput, SimError> {
    let plant = cfg.plant()?;
    let topology = cfg.topology()?;
    let delays = if delayed {
        Some(DelayModel::new(&cfg.delays, cfg.h, syn.design.p, cfg.seed, cfg.per_recipient_delays)?)
    } else {
        None
    };
    let design = match &policy {
        Policy::Triggered(d) => Some(d.clone()),
        Policy::EveryStep => None,
    };
    let setup = WorldSetup {
        plant,
        topology,
        h: cfg.h,
        f: syn.gains.f.clone(),
        coupling,
        p_lyap: syn.gains.p.clone(),
        policy,
        delays,
        record_detail: cfg.record_detail,
        subsample: cfg.subsample,
    };
    let mut world = SimWorld::new(setup, &cfg.x0)?;
    let steps = cfg.steps();
    world.run(steps)?;
    let metrics = metrics(&world.logs, cfg.n_agents, cfg.h, design.as_ref());
    let ch = world.channel();
    let (queued, delivered, dropped_stale, in_flight) = (ch.queued, ch.delivered, ch.dropped_stale, ch.in_flight().len());
    Ok(RunOutput { synthesis: syn, logs: world.logs, metrics, steps, queued, delivered, dropped_stale, in_flight })
}

/// Synthesis followed by `round(duration/h)` sampling instants.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let syn = synthesize(cfg)?;
    let policy = Policy::Triggered(syn.design.clone());
    let coupling = syn.gains.c1;
    execute(cfg, syn, policy, coupling, cfg.mode == Mode::Delay)
}

/// Every agent broadcasts at every instant without delay and the inputs use
/// `c` instead of `c₁`; the grid counterpart of the continuous protocol.
pub fn continuous_baseline(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let mut base = cfg.clone();
    base.mode = Mode::NoDelay;
    base.vm_policy = VmPolicy::Initial;
    let syn = synthesize(&base)?;
    let coupling = syn.gains.c;
    execute(&base, syn, Policy::EveryStep, coupling, false)
}
