//! What one agent does at a sampling instant, using only its own data.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use thiserror::Error;

use crate::matlib::{axpy, norm, sub, Matrix};
use crate::synthesis::{EventDesign, GainSet, Mode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("agent {agent} holds no model of agent {sender}")]
    UnknownSender { agent: usize, sender: usize },
}

/// Local copy of one tracked agent's model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub id: usize,
    pub y: Vec<f64>,
    pub y_prev: Vec<f64>,
    /// `G·y_prev`, the value before any update delivered this step.
    pub y_flow: Vec<f64>,
}

/// Models of the agent itself and of each neighbor, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    entries: Vec<ModelEntry>,
}

impl ModelBank {
    /// Every tracked model starts at `init(id)`.
    pub fn new(tracked: &[usize], init: impl Fn(usize) -> Vec<f64>) -> Self {
        let mut ids = tracked.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let entries = ids
            .into_iter()
            .map(|id| {
                let y = init(id);
                ModelEntry { id, y_prev: y.clone(), y_flow: y.clone(), y }
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> Option<&ModelEntry> {
        self.entries.binary_search_by_key(&id, |e| e.id).ok().map(|k| &self.entries[k])
    }

    fn get_mut(&mut self, id: usize) -> Option<&mut ModelEntry> {
        self.entries.binary_search_by_key(&id, |e| e.id).ok().map(move |k| &mut self.entries[k])
    }

    pub fn y(&self, id: usize) -> Option<&[f64]> {
        self.get(id).map(|e| e.y.as_slice())
    }

    /// `y_prev ← y`, `y ← G·y` for every entry.
    pub fn propagate(&mut self, g: &Matrix) {
        for e in &mut self.entries {
            let next = g.mul_vec(&e.y);
            e.y_prev = core::mem::replace(&mut e.y, next);
            e.y_flow.clone_from(&e.y);
        }
    }

    /// `y_prev ← y` without moving the models; used at the first instant.
    pub fn hold(&mut self) {
        for e in &mut self.entries {
            e.y_prev.clone_from(&e.y);
            e.y_flow.clone_from(&e.y);
        }
    }

    /// Sets the sender's model to `G^{p_elapsed}·x_sent`, applied one step at
    /// a time; bit-identical to a locally propagated copy.
    pub fn apply_update(
        &mut self,
        owner: usize,
        sender: usize,
        x_sent: &[f64],
        p_elapsed: usize,
        g: &Matrix,
    ) -> Result<(), AgentError> {
        let entry = self.get_mut(sender).ok_or(AgentError::UnknownSender { agent: owner, sender })?;
        let mut y = x_sent.to_vec();
        for _ in 0..p_elapsed {
            y = g.mul_vec(&y);
        }
        entry.y = y;
        Ok(())
    }
}

/// Broadcast of one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub x: Vec<f64>,
    pub send_step: u64,
}

/// One agent's sampled state, models and event bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRuntime {
    pub id: usize,
    pub neighbors: Vec<usize>,
    pub x_now: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub bank: ModelBank,
    /// `y_self − x_now`.
    pub e_local: Vec<f64>,
    pub last_event_step: Option<u64>,
    pub u_held: Vec<f64>,
    pub event_count: u64,
}

impl AgentRuntime {
    /// Models of self and neighbors start from the true initial states.
    pub fn new(id: usize, neighbors: &[usize], x0: &[Vec<f64>], m: usize) -> Self {
        let mut tracked = neighbors.to_vec();
        tracked.push(id);
        let bank = ModelBank::new(&tracked, |j| x0[j].clone());
        let n = x0[id].len();
        Self {
            id,
            neighbors: neighbors.to_vec(),
            x_now: x0[id].clone(),
            x_prev: x0[id].clone(),
            bank,
            e_local: vec![0.0; n],
            last_event_step: None,
            u_held: vec![0.0; m],
            event_count: 0,
        }
    }

    pub fn y_self(&self) -> &[f64] {
        self.bank.y(self.id).expect("bank tracks its owner")
    }

    /// Records a new plant sample.
    pub fn sample(&mut self, x: Vec<f64>) {
        self.x_prev = core::mem::replace(&mut self.x_now, x);
    }

    /// Starts the current instant without a previous sample.
    pub fn sample_first(&mut self, x: Vec<f64>) {
        self.x_prev.clone_from(&x);
        self.x_now = x;
    }

    pub fn refresh_error(&mut self) {
        self.e_local = sub(self.y_self(), &self.x_now);
    }

    /// Resets the self model to the current sample and returns the broadcast.
    pub fn on_fire(&mut self, step: u64) -> Message {
        let id = self.id;
        let x = self.x_now.clone();
        let entry = self.bank.get_mut(id).expect("bank tracks its owner");
        entry.y.clone_from(&x);
        self.e_local.iter_mut().for_each(|v| *v = 0.0);
        self.last_event_step = Some(step);
        self.event_count += 1;
        Message { sender: id, x, send_step: step }
    }
}

/// `z_i = Σ_{j∈𝒩_i} (x_i − y_j)`.
pub fn compute_z(agent: &AgentRuntime) -> Vec<f64> {
    let mut z = vec![0.0; agent.x_now.len()];
    for &j in &agent.neighbors {
        let yj = agent.bank.y(j).expect("bank tracks every neighbor");
        for ((zk, xk), yk) in z.iter_mut().zip(&agent.x_now).zip(yj) {
            *zk += xk - yk;
        }
    }
    z
}

/// `u = coupling·F·z`.
pub fn control_input_with(z: &[f64], f: &Matrix, coupling: f64) -> Vec<f64> {
    let mut u = f.mul_vec(z);
    u.iter_mut().for_each(|v| *v *= coupling);
    u
}

/// `u_i = c₁·F·z_i`.
pub fn control_input(agent: &AgentRuntime, gains: &GainSet) -> Vec<f64> {
    control_input_with(&compute_z(agent), &gains.f, gains.c1)
}

/// Discretization errors over the last sampling interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscErrors {
    /// `x_i(t_{μ−1}) − x_i(t_μ)`.
    pub x_breve: Vec<f64>,
    /// `(j, y_j(t_{μ−1}) − y_j(t_μ⁻))` for every tracked model.
    pub y_breve: Vec<(usize, Vec<f64>)>,
    /// `y̌_self − x̌`.
    pub e_breve: Vec<f64>,
    /// `Σ_{j∈𝒩_i} (x̌ − y̌_j)`.
    pub z_breve: Vec<f64>,
}

pub fn disc_errors(agent: &AgentRuntime) -> DiscErrors {
    let x_breve = sub(&agent.x_prev, &agent.x_now);
    let y_breve: Vec<(usize, Vec<f64>)> =
        agent.bank.entries().iter().map(|e| (e.id, sub(&e.y_prev, &e.y_flow))).collect();
    let find = |id: usize| &y_breve.iter().find(|(j, _)| *j == id).expect("tracked model").1;
    let e_breve = sub(find(agent.id), &x_breve);
    let mut z_breve = vec![0.0; x_breve.len()];
    for &j in &agent.neighbors {
        axpy(&mut z_breve, 1.0, &x_breve);
        axpy(&mut z_breve, -1.0, find(j));
    }
    DiscErrors { x_breve, y_breve, e_breve, z_breve }
}

/// Outcome of one trigger evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerDecision {
    pub fired: bool,
    pub delta: f64,
    /// `σc₁zᵀPBBᵀPz + η`.
    pub threshold: f64,
    /// Without delays: the `e`, `ž` and `ě` terms. With delays: the `ž`
    /// term, `δ_d` and `δ̌`.
    pub components: [f64; 3],
}

impl TriggerDecision {
    fn from_parts(components: [f64; 3], threshold: f64) -> Self {
        let components = components.map(|v| v.max(0.0));
        let delta = components.iter().sum();
        Self { fired: delta > threshold, delta, threshold, components }
    }
}

fn threshold(design: &EventDesign, z: &[f64]) -> f64 {
    (design.sigma * design.c1 * design.m_pbbp.quad_form(z)).max(0.0) + design.eta
}

/// Delay-free rule: fire when `δ_i > σc₁zᵀPBBᵀPz + η`.
pub fn trigger_no_delay(agent: &AgentRuntime, design: &EventDesign, z: &[f64], disc: &DiscErrors) -> TriggerDecision {
    let n = design.n_agents as f64;
    let ni = design.degrees[agent.id] as f64;
    let (b, c, c1) = (design.b, design.c, design.c1);
    let m = &design.m_pbbp;
    let ce = c * ni * (b * (n - 1.0) + (3.0 * n - 1.0) / b);
    let cz = c1 * (1.0 + 2.0 * b * ni);
    let cb = c * ni * ((n + 1.0) / b + 3.0 * b * (n - 1.0));
    TriggerDecision::from_parts(
        [
            ce * m.quad_form(&agent.e_local),
            cz * m.quad_form(&disc.z_breve),
            cb * m.quad_form(&disc.e_breve),
        ],
        threshold(design, z),
    )
}

/// `a² + 2ak + k²`.
fn square_sum(a: f64, k: f64) -> f64 {
    a * a + 2.0 * a * k + k * k
}

/// Delayed rule, evaluated from the local error `e_ii` and the frozen
/// worst-case constants of the design.
pub fn trigger_delay(agent: &AgentRuntime, design: &EventDesign, z: &[f64], disc: &DiscErrors) -> TriggerDecision {
    let i = agent.id;
    let (b, c1) = (design.b, design.c1);
    let zb = design.z_bar[i];
    let lb = design.lambda_bar;
    let e = &agent.e_local;

    let z_term = c1 * (1.0 + b) * (1.0 + b) * design.m_pbbp.quad_form(&disc.z_breve);
    let gpe = norm(&design.g_p.mul_vec(e));
    let d_term = c1 * (1.0 + 1.0 / b) * lb * square_sum(gpe, design.upsilon * zb);
    let gse = norm(&design.g_step.mul_vec(e));
    let k = (design.g_minus_i_norm * design.upsilon_h + design.e_norm) * zb;
    let breve_term = c1 * (1.0 + b) * (1.0 + 1.0 / b) * lb * square_sum(gse, k);
    TriggerDecision::from_parts([z_term, d_term, breve_term], threshold(design, z))
}

/// Dispatches on the design mode.
pub fn evaluate_trigger(agent: &AgentRuntime, design: &EventDesign, z: &[f64], disc: &DiscErrors) -> TriggerDecision {
    match design.mode {
        Mode::NoDelay => trigger_no_delay(agent, design, z, disc),
        Mode::Delay => trigger_delay(agent, design, z, disc),
    }
}

/// Euclidean norm of a model mismatch, used by the delay bookkeeping checks.
pub fn mismatch(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}
