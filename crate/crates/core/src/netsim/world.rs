use alloc::vec;
use alloc::vec::Vec;

use crate::agents::{self, AgentError, AgentRuntime, DiscErrors, TriggerDecision};
use crate::graph::{self, Topology};
use crate::matlib::{norm, zoh_pair, Matrix};
use crate::synthesis::{EventDesign, PlantModel};
use crate::tol::TOL;

use super::channel::{Channel, DelayModel};
use super::SimError;

/// When agents broadcast.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Trigger rule of the design's mode.
    Triggered(EventDesign),
    /// Every agent broadcasts at every instant.
    EveryStep,
}

/// Everything needed to build a [`SimWorld`].
#[derive(Debug, Clone)]
pub struct WorldSetup {
    pub plant: PlantModel,
    pub topology: Topology,
    pub h: f64,
    pub f: Matrix,
    /// Coupling applied in `u = coupling·F·z`.
    pub coupling: f64,
    /// Weight of the disagreement function.
    pub p_lyap: Matrix,
    pub policy: Policy,
    /// `None` delivers at the sending instant.
    pub delays: Option<DelayModel>,
    /// Keep per-agent snapshots of every instant.
    pub record_detail: bool,
    /// Extra trajectory points per interval (1 = grid only).
    pub subsample: usize,
}

/// One logged sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub t: f64,
    /// Plant states in the original frame.
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub v: f64,
    pub max_disagreement: f64,
}

/// Extra trajectory point between grid instants.
#[derive(Debug, Clone, PartialEq)]
pub struct FineLog {
    pub t: f64,
    pub x: Vec<Vec<f64>>,
    /// Input held over the interval.
    pub u: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub step: u64,
    pub agent: usize,
    /// The broadcast at the first instant.
    pub initial: bool,
}

/// Per-agent snapshot of one instant. Vectors are in the simulation frame,
/// which differs from the original one by a common offset.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDetail {
    pub x: Vec<f64>,
    /// `y_self − x` before any reset at this instant.
    pub e_pre: Vec<f64>,
    pub disc: DiscErrors,
    /// `z` seen by the trigger, before same-instant deliveries.
    pub z_decision: Vec<f64>,
    pub decision: Option<TriggerDecision>,
    pub fired: bool,
    /// `z` used for the held input.
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// `(j, y_j)` after the whole instant.
    pub models: Vec<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailLog {
    pub step: u64,
    pub agents: Vec<AgentDetail>,
    /// Messages applied at this instant as `(recipient, sender, send_step)`.
    pub deliveries: Vec<(usize, usize, u64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Logs {
    pub steps: Vec<StepLog>,
    pub fine: Vec<FineLog>,
    pub events: Vec<EventRecord>,
    pub detail: Vec<DetailLog>,
}

/// Sampled-time world.
///
/// States are stored relative to a reference `r` that starts at the mean
/// initial state and follows `r ← G·r`. Agents only ever use differences of
/// states and models, so the offset cancels, while the unstable common mode
/// no longer inflates the stored numbers.
#[derive(Debug, Clone)]
pub struct SimWorld {
    setup: WorldSetup,
    g: Matrix,
    h_zoh: Matrix,
    fine_pair: Option<(Matrix, Matrix)>,
    step: u64,
    agents: Vec<AgentRuntime>,
    x: Vec<Vec<f64>>,
    r: Vec<f64>,
    channel: Channel,
    pub logs: Logs,
}

impl SimWorld {
    pub fn new(setup: WorldSetup, x0: &[Vec<f64>]) -> Result<Self, SimError> {
        let n_agents = setup.topology.agent_count();
        let n = setup.plant.n();
        if x0.len() != n_agents || x0.iter().any(|x| x.len() != n) {
            return Err(SimError::Config("initial states must give one n-vector per agent".into()));
        }
        if !(setup.h > 0.0) || !setup.h.is_finite() {
            return Err(SimError::Config("sampling period h must be positive".into()));
        }
        if setup.subsample == 0 {
            return Err(SimError::Config("subsample must be at least 1".into()));
        }
        let (g, h_zoh) = zoh_pair(setup.plant.a(), setup.plant.b(), setup.h)?;
        let fine_pair = if setup.subsample > 1 {
            Some(zoh_pair(setup.plant.a(), setup.plant.b(), setup.h / setup.subsample as f64)?)
        } else {
            None
        };
        let mut r = vec![0.0; n];
        for x in x0 {
            for (rk, xk) in r.iter_mut().zip(x) {
                *rk += xk / n_agents as f64;
            }
        }
        let x: Vec<Vec<f64>> = x0.iter().map(|xi| crate::matlib::sub(xi, &r)).collect();
        let m = setup.plant.m();
        let agents = (0..n_agents)
            .map(|i| AgentRuntime::new(i, setup.topology.neighbors(i), &x, m))
            .collect();
        let channel = Channel::new(n_agents, setup.delays.clone());
        Ok(Self { setup, g, h_zoh, fine_pair, step: 0, agents, x, r, channel, logs: Logs::default() })
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn agents(&self) -> &[AgentRuntime] {
        &self.agents
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn setup(&self) -> &WorldSetup {
        &self.setup
    }

    /// Plant states in the original frame.
    pub fn states(&self) -> Vec<Vec<f64>> {
        self.x.iter().map(|xi| xi.iter().zip(&self.r).map(|(a, b)| a + b).collect()).collect()
    }

    fn deliver(&mut self, step: u64) -> Result<Vec<(usize, usize, u64)>, SimError> {
        let mut applied = Vec::new();
        for d in self.channel.take_due(step) {
            let owner = d.recipient;
            self.agents[owner]
                .bank
                .apply_update(owner, d.msg.sender, &d.msg.x, d.elapsed, &self.g)
                .map_err(|e: AgentError| SimError::Agent(e))?;
            applied.push((owner, d.msg.sender, d.msg.send_step));
        }
        Ok(applied)
    }

    /// One sampling instant: propagate models, deliver due messages, sample,
    /// decide, deliver instant messages, hold inputs, log, advance the plant.
    pub fn step(&mut self) -> Result<(), SimError> {
        let mu = self.step;
        let first = mu == 0;
        let n_agents = self.agents.len();

        for a in &mut self.agents {
            if first {
                a.bank.hold();
            } else {
                a.bank.propagate(&self.g);
            }
        }

        let mut deliveries = Vec::new();
        if self.channel.is_delayed() {
            deliveries.extend(self.deliver(mu)?);
        }

        for (a, x) in self.agents.iter_mut().zip(&self.x) {
            if first {
                a.sample_first(x.clone());
            } else {
                a.sample(x.clone());
            }
            a.refresh_error();
        }

        let e_pre: Vec<Vec<f64>> = self.agents.iter().map(|a| a.e_local.clone()).collect();
        let mut discs = Vec::with_capacity(n_agents);
        let mut z_decisions = Vec::with_capacity(n_agents);
        let mut decisions = vec![None; n_agents];
        let mut fired = vec![false; n_agents];
        for i in 0..n_agents {
            let disc = agents::disc_errors(&self.agents[i]);
            let z = agents::compute_z(&self.agents[i]);
            if first {
                fired[i] = true;
            } else {
                match &self.setup.policy {
                    Policy::EveryStep => fired[i] = true,
                    Policy::Triggered(design) => {
                        let dec = agents::evaluate_trigger(&self.agents[i], design, &z, &disc);
                        fired[i] = dec.fired;
                        decisions[i] = Some(dec);
                    }
                }
            }
            discs.push(disc);
            z_decisions.push(z);
        }
        for i in 0..n_agents {
            if fired[i] {
                let msg = self.agents[i].on_fire(mu);
                let event_index = self.agents[i].event_count - 1;
                self.logs.events.push(EventRecord { step: mu, agent: i, initial: first });
                if !first {
                    let recipients = self.setup.topology.neighbors(i).to_vec();
                    self.channel.send(&msg, &recipients, event_index);
                }
            }
        }

        if !self.channel.is_delayed() {
            deliveries.extend(self.deliver(mu)?);
        }

        let mut zs = Vec::with_capacity(n_agents);
        for a in &mut self.agents {
            let z = agents::compute_z(a);
            a.u_held = agents::control_input_with(&z, &self.setup.f, self.setup.coupling);
            zs.push(z);
        }

        let t = mu as f64 * self.setup.h;
        let v = graph::disagreement(&self.setup.topology, &self.setup.p_lyap, &self.x);
        let max_disagreement = graph::max_pairwise_sq(&self.x);
        let u: Vec<Vec<f64>> = self.agents.iter().map(|a| a.u_held.clone()).collect();
        self.logs.steps.push(StepLog { step: mu, t, x: self.states(), u: u.clone(), v, max_disagreement });

        if self.setup.record_detail {
            let agents = self
                .agents
                .iter()
                .zip(e_pre)
                .zip(discs)
                .zip(zs)
                .zip(z_decisions)
                .enumerate()
                .map(|(i, ((((a, e_pre), disc), z), z_decision))| AgentDetail {
                    x: a.x_now.clone(),
                    e_pre,
                    disc,
                    z_decision,
                    decision: decisions[i],
                    fired: fired[i],
                    z,
                    u: a.u_held.clone(),
                    models: a.bank.entries().iter().map(|e| (e.id, e.y.clone())).collect(),
                })
                .collect();
            self.logs.detail.push(DetailLog { step: mu, agents, deliveries });
        }

        if let Some((gs, hs)) = &self.fine_pair {
            let mut xs = self.x.clone();
            let mut rs = self.r.clone();
            for j in 1..self.setup.subsample {
                for (xi, ui) in xs.iter_mut().zip(&u) {
                    let mut next = gs.mul_vec(xi);
                    crate::matlib::axpy(&mut next, 1.0, &hs.mul_vec(ui));
                    *xi = next;
                }
                rs = gs.mul_vec(&rs);
                let abs = xs.iter().map(|xi| xi.iter().zip(&rs).map(|(a, b)| a + b).collect()).collect();
                let tj = t + self.setup.h * j as f64 / self.setup.subsample as f64;
                self.logs.fine.push(FineLog { t: tj, x: abs, u: u.clone() });
            }
        }

        for (i, (xi, ui)) in self.x.iter_mut().zip(&u).enumerate() {
            let mut next = self.g.mul_vec(xi);
            crate::matlib::axpy(&mut next, 1.0, &self.h_zoh.mul_vec(ui));
            let size = norm(&next);
            if !(size <= TOL.divergence) {
                return Err(SimError::Divergence { step: mu + 1, agent: i, norm: size });
            }
            *xi = next;
        }
        self.r = self.g.mul_vec(&self.r);
        self.step += 1;
        Ok(())
    }

    /// Runs `steps` instants.
    pub fn run(&mut self, steps: u64) -> Result<(), SimError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}
