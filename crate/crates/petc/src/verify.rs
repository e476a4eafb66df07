//! Randomized property suites behind `petc verify`.

use std::collections::HashMap;

use petc_core::agents::mismatch;
use petc_core::graph::{self, stack, Topology};
use petc_core::matlib::{input_integral, mat_exp, sym_eig};
use petc_core::netsim::{self, DetailLog, Policy, RunOutput, ScenarioConfig, SimWorld, WorldSetup};
use petc_core::synthesis::{closed_loop_analysis, design_gains_with, Mode, PlantModel};
use petc_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::random;

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl Property {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, trials: 0, failures: 0, worst: 0.0, tolerance }
    }

    /// Records `value`, failing when it exceeds the tolerance or is NaN.
    fn observe(&mut self, value: f64) {
        self.trials += 1;
        if !(value <= self.tolerance) {
            self.failures += 1;
        }
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    fn check(&mut self, ok: bool) {
        self.observe(if ok { 0.0 } else { 1.0 });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub properties: Vec<Property>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failures == 0 && p.trials > 0)
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .properties
            .iter()
            .map(|p| {
                let verdict = if p.failures == 0 && p.trials > 0 { "PASS" } else { "FAIL" };
                format!(
                    "{verdict} {}/{}: {}/{} ok, worst {:.3e} (tol {:.1e})",
                    self.suite,
                    p.name,
                    p.trials - p.failures,
                    p.trials,
                    p.worst,
                    p.tolerance
                )
            })
            .collect();
        out.extend(self.notes.iter().map(|n| format!("note {}: {n}", self.suite)));
        out
    }
}

/// Kernel structure of `L̄` for one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub n: usize,
    pub zero_count: usize,
    /// Largest non-kernel eigenvalue over the spectral radius.
    pub max_nonzero: f64,
    /// `‖L̄(1⊗ς)‖` over `‖L̄‖_F·√N`, worst over unit `ς`.
    pub residual: f64,
    /// Eigenvalues within `1e-12` of zero after normalizing.
    pub near_exact_zeros: usize,
}

impl KernelCheck {
    pub fn holds(&self) -> bool {
        self.zero_count == self.n && self.max_nonzero < 0.0 && self.residual < 1e-9
    }
}

pub fn kernel_check(plant: &PlantModel, top: &Topology) -> Option<KernelCheck> {
    let spec = graph::laplacian(top).ok()?;
    let gains = design_gains_with(plant, &spec, &random::gain_options(plant)).ok()?;
    let an = closed_loop_analysis(plant, &gains, &spec).ok();
    let l_bar = match an {
        Some(a) => a.l_bar,
        None => {
            let bf = plant.b() * &gains.f;
            let l = &spec.laplacian;
            let l_hat = graph::kron_lift(l, &gains.p);
            let a_c = &graph::kron_lift(&Matrix::identity(l.rows()), plant.a()) + &graph::kron_lift(l, &bf.scale(gains.c));
            (&(&l_hat * &a_c) + &(&a_c.transpose() * &l_hat)).symmetric_part()
        }
    };
    let eig = sym_eig(&l_bar).ok()?.eigenvalues;
    let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_count = eig.iter().filter(|v| v.abs() <= 1e-8 * scale).count();
    let max_nonzero = eig.iter().filter(|v| v.abs() > 1e-8 * scale).fold(f64::NEG_INFINITY, |m, &v| m.max(v / scale));
    let near_exact_zeros = eig.iter().filter(|v| v.abs() <= 1e-12 * scale).count();
    let n = plant.n();
    let agents = top.agent_count();
    let denom = l_bar.norm_fro() * (agents as f64).sqrt();
    let residual = (0..n)
        .map(|k| {
            let mut s = vec![0.0; n];
            s[k] = 1.0;
            let v = stack(&vec![s; agents]);
            petc_core::matlib::norm(&l_bar.mul_vec(&v)) / denom
        })
        .fold(0.0, f64::max);
    Some(KernelCheck { n, zero_count, max_nonzero, residual, near_exact_zeros })
}

pub fn spectral(seed: u64, draws: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dim = Property::new("kernel_dimension_equals_n", 0.0);
    let mut neg = Property::new("other_eigenvalues_negative", 0.0);
    let mut res = Property::new("consensus_kernel_residual", 1e-9);
    let mut resolved = 0;
    let mut done = 0;
    while done < draws {
        let plant = random::plant(&mut rng, 3);
        let top = random::topology(&mut rng, 6);
        let Some(k) = kernel_check(&plant, &top) else { continue };
        dim.observe((k.zero_count as f64 - k.n as f64).abs());
        neg.observe(k.max_nonzero.max(0.0) + if k.max_nonzero < 0.0 { 0.0 } else { 1.0 });
        res.observe(k.residual);
        resolved += usize::from(k.near_exact_zeros == k.n);
        done += 1;
    }
    let notes = vec![format!("{resolved}/{draws} draws have exactly n eigenvalues within 1e-12 of zero")];
    SuiteReport { suite: "spectral", properties: vec![dim, neg, res], notes }
}

fn every_step_world(plant: &PlantModel, top: &Topology, f: &Matrix, coupling: f64, p: &Matrix, h: f64, x0: &[Vec<f64>]) -> SimWorld {
    let setup = WorldSetup {
        plant: plant.clone(),
        topology: top.clone(),
        h,
        f: f.clone(),
        coupling,
        p_lyap: p.clone(),
        policy: Policy::EveryStep,
        delays: None,
        record_detail: true,
        subsample: 1,
    };
    SimWorld::new(setup, x0).expect("valid setup")
}

/// Worst `‖e_i(t_k+h) + E·z_i(t_k)‖` over agents of one random episode,
/// together with the worst `‖ě_i − E·z_i‖`.
pub fn error_identity_episode(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let plant = random::plant(rng, 3);
        let top = random::topology(rng, 4);
        let h = rng.random_range(0.001..0.05);
        let Ok(spec) = graph::laplacian(&top) else { continue };
        let Ok(gains) = design_gains_with(&plant, &spec, &random::gain_options(&plant)) else { continue };
        let x0 = random::states(rng, top.agent_count(), plant.n(), 5.0);
        let mut world = every_step_world(&plant, &top, &gains.f, gains.c1, &gains.p, h, &x0);
        world.run(2).expect("bounded run");
        let e = input_integral(plant.a(), plant.b(), gains.c1, &gains.f, h).expect("finite");
        let (d0, d1) = (&world.logs.detail[0], &world.logs.detail[1]);
        let mut worst = (0.0f64, 0.0f64);
        for i in 0..top.agent_count() {
            let ez = e.mul_vec(&d0.agents[i].z);
            let neg: Vec<f64> = ez.iter().map(|v| -v).collect();
            worst.0 = worst.0.max(mismatch(&d1.agents[i].e_pre, &neg));
            worst.1 = worst.1.max(mismatch(&d1.agents[i].disc.e_breve, &ez));
        }
        return worst;
    }
}

pub fn errors(seed: u64, episodes: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut id = Property::new("error_after_event_is_minus_E_z", 1e-10);
    let mut breve = Property::new("e_breve_after_event_is_E_z", 1e-10);
    for _ in 0..episodes {
        let (a, b) = error_identity_episode(&mut rng);
        id.observe(a);
        breve.observe(b);
    }
    SuiteReport { suite: "errors", properties: vec![id, breve], notes: Vec::new() }
}

fn model<'a>(d: &'a DetailLog, holder: usize, of: usize) -> &'a [f64] {
    &d.agents[holder].models.iter().find(|(j, _)| *j == of).expect("tracked model").1
}

/// Log replay of the delayed model bookkeeping of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayCheck {
    /// `max ‖y_ij − y_ii‖` between delivery and the sender's next event.
    pub synced_mismatch: f64,
    pub synced_windows: usize,
    /// `max ‖ν_i(t_k) − e_ii(t_k⁻)‖`.
    pub nu_event: f64,
    /// `max ‖ν_i − G·ν_i(prev)‖` over transit steps, relative to `max(‖ν‖, 1)`.
    pub nu_transit: f64,
    pub nu_windows: usize,
    /// Queued equals deliveries plus stale drops plus in-flight, and every
    /// non-initial event queued one message per neighbor.
    pub conserved: bool,
    /// Every applied message arrived `1..=p` steps after sending.
    pub lags_in_range: bool,
}

pub fn delay_check(out: &RunOutput, top: &Topology, g: &Matrix) -> DelayCheck {
    let detail = &out.logs.detail;
    let p = out.synthesis.design.p as u64;
    let end = detail.len() as u64;
    let mut check = DelayCheck { conserved: true, lags_in_range: true, ..DelayCheck::default() };

    let mut queued = 0u64;
    for e in out.logs.events.iter().filter(|e| !e.initial) {
        queued += top.degree(e.agent) as u64;
    }
    check.conserved = queued == out.queued && out.delivered + out.dropped_stale + out.in_flight as u64 == out.queued;

    let mut arrival: HashMap<(usize, usize, u64), u64> = HashMap::new();
    for d in detail {
        for &(r, s, send) in &d.deliveries {
            let lag = d.step - send;
            check.lags_in_range &= lag >= 1 && lag <= p;
            arrival.insert((r, s, send), d.step);
        }
    }

    for i in 0..top.agent_count() {
        let fires: Vec<u64> = out.logs.events.iter().filter(|e| e.agent == i).map(|e| e.step).collect();
        for &j in top.neighbors(i) {
            let delivered = |k: u64| if k == 0 { Some(0) } else { arrival.get(&(j, i, k)).copied() };
            for (idx, &k) in fires.iter().enumerate() {
                let next = fires.get(idx + 1).copied().unwrap_or(end).min(end);
                let arr = delivered(k);
                if let Some(at) = arr {
                    if at < next {
                        check.synced_windows += 1;
                        for mu in at..next {
                            let d = &detail[mu as usize];
                            check.synced_mismatch = check.synced_mismatch.max(mismatch(model(d, j, i), model(d, i, i)));
                        }
                    }
                }
                let prev_ok = idx > 0 && delivered(fires[idx - 1]).is_some_and(|at| at <= k);
                if !prev_ok || k >= end {
                    continue;
                }
                check.nu_windows += 1;
                let nu_at = |mu: u64| -> Vec<f64> {
                    let d = &detail[mu as usize];
                    model(d, j, i).iter().zip(model(d, i, i)).map(|(a, b)| a - b).collect()
                };
                let mut nu = nu_at(k);
                check.nu_event = check.nu_event.max(mismatch(&nu, &detail[k as usize].agents[i].e_pre));
                let stop = arr.unwrap_or(end).min(next);
                for mu in k + 1..stop {
                    let want = g.mul_vec(&nu);
                    let got = nu_at(mu);
                    let scale = petc_core::matlib::norm(&want).max(1.0);
                    check.nu_transit = check.nu_transit.max(mismatch(&got, &want) / scale);
                    nu = got;
                }
            }
        }
    }
    check
}

fn delay_runs(seed: u64, runs: usize) -> Vec<(ScenarioConfig, RunOutput)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(runs);
    let mut k = 0;
    while out.len() < runs {
        let mut cfg = if k % 2 == 0 {
            let mut c = crate::example::config();
            c.seed = rng.random();
            c.per_recipient_delays = rng.random_bool(0.5);
            c.duration = 6.0;
            c
        } else {
            let mut c = random::scenario(&mut rng, Mode::Delay, 3.0);
            let probe = netsim::synthesize(&c).expect("synthesizable draw");
            c.eta = Some(10f64.powf(rng.random_range(-4.0..-1.0)) * probe.design.v0.max(1e-9));
            c
        };
        k += 1;
        cfg.record_detail = true;
        if let Ok(run) = netsim::run(&cfg) {
            out.push((cfg, run));
        }
    }
    out
}

pub fn delays(seed: u64, runs: usize) -> SuiteReport {
    let mut synced = Property::new("neighbor_model_equals_self_model_after_delivery", 1e-12);
    let mut nu_event = Property::new("mismatch_at_event_equals_pre_reset_error", 1e-12);
    let mut nu_transit = Property::new("mismatch_propagates_by_G_in_transit", 1e-12);
    let mut conserved = Property::new("message_conservation", 0.0);
    let mut lags = Property::new("delivery_lag_within_1_to_p", 0.0);
    let mut windows = (0, 0);
    for (cfg, run) in delay_runs(seed, runs) {
        let top = cfg.topology().expect("validated");
        let g = mat_exp(&cfg.a, cfg.h).expect("finite");
        let c = delay_check(&run, &top, &g);
        synced.observe(c.synced_mismatch);
        nu_event.observe(c.nu_event);
        nu_transit.observe(c.nu_transit);
        conserved.check(c.conserved);
        lags.check(c.lags_in_range);
        windows.0 += c.synced_windows;
        windows.1 += c.nu_windows;
    }
    let notes = vec![format!("{} delivery windows and {} transit windows replayed", windows.0, windows.1)];
    SuiteReport { suite: "delays", properties: vec![synced, nu_event, nu_transit, conserved, lags], notes }
}

pub fn bounds(seed: u64, scenarios: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Property::new("lyapunov_envelope", 0.0);
    let mut tail = Property::new("tail_disagreement_bound", 0.0);
    let mut gaps = Property::new("inter_event_floor", 0.0);
    let mut later_events = 0u64;
    for k in 0..scenarios {
        let mode = if k % 2 == 0 { Mode::NoDelay } else { Mode::Delay };
        let cfg = random::scenario(&mut rng, mode, 5.0);
        let Ok(out) = netsim::run(&cfg) else {
            env.check(false);
            continue;
        };
        let m = &out.metrics;
        env.observe(m.envelope_violations as f64);
        tail.check(!m.tail_bound_violated);
        gaps.observe(m.inter_event_violations as f64);
        later_events += out.logs.events.iter().filter(|e| !e.initial).count() as u64;
    }
    let notes = vec![format!("{later_events} events after the initial broadcasts")];
    SuiteReport { suite: "bounds", properties: vec![env, tail, gaps], notes }
}

pub const SUITES: [&str; 4] = ["spectral", "errors", "delays", "bounds"];

pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    Some(match name {
        "spectral" => spectral(seed, 50),
        "errors" => errors(seed, 100),
        "delays" => delays(seed, 8),
        "bounds" => bounds(seed, 20),
        _ => return None,
    })
}
