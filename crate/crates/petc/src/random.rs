//! Seeded random scenarios for the property suites.

use petc_core::graph::{self, Topology};
use petc_core::matlib::controllability_margin;
use petc_core::netsim::{self, ScenarioConfig};
use petc_core::synthesis::{
    default_alpha, design_gains_with, max_feasible_delay, GainOptions, Mode, PlantModel, VmPolicy,
};
use petc_core::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Draws with a smaller controllability margin are rejected.
pub const MIN_MARGIN: f64 = 0.2;

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).expect("finite entries")
}

/// Controllable `(A, B)` with `n ≤ max_n`, `m ≤ min(n, 2)`.
pub fn plant(rng: &mut ChaCha8Rng, max_n: usize) -> PlantModel {
    loop {
        let n = rng.random_range(1..=max_n);
        let m = rng.random_range(1..=n.min(2));
        let a = uniform_matrix(rng, n, n, 1.0);
        let b = uniform_matrix(rng, n, m, 1.0);
        if controllability_margin(&a, &b).is_ok_and(|c| c >= MIN_MARGIN) {
            return PlantModel::new(a, b).expect("controllable");
        }
    }
}

/// Random tree on `n` nodes plus a few extra edges.
pub fn connected_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|k| (rng.random_range(0..k), k)).collect();
    for _ in 0..rng.random_range(0..n) {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let e = (i.min(j), i.max(j));
        if i != j && !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges
}

pub fn topology(rng: &mut ChaCha8Rng, max_agents: usize) -> Topology {
    let n = rng.random_range(2..=max_agents);
    Topology::from_edges(n, &connected_edges(rng, n)).expect("valid edges")
}

pub fn states(rng: &mut ChaCha8Rng, agents: usize, n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..agents).map(|_| (0..n).map(|_| rng.random_range(-scale..scale)).collect()).collect()
}

/// Riccati weights for random plants: default rate, `ε = 1e-3·max(‖A‖₂, 1)`.
pub fn gain_options(plant: &PlantModel) -> GainOptions {
    GainOptions { alpha: Some(default_alpha(plant)), eps: Some(1e-3 * plant.a().norm2().max(1.0)), c: None }
}

/// A synthesizable scenario with `N ≤ 6`, `n ≤ 3`, synthesized `η` and the
/// `Initial` bound policy. Delay mode uses the largest feasible `p ≤ 5` and
/// a delay set inside `[h, d]` that contains `d`.
pub fn scenario(rng: &mut ChaCha8Rng, mode: Mode, duration: f64) -> ScenarioConfig {
    loop {
        if let Some(cfg) = try_scenario(rng, mode, duration) {
            return cfg;
        }
    }
}

fn try_scenario(rng: &mut ChaCha8Rng, mode: Mode, duration: f64) -> Option<ScenarioConfig> {
    let plant = plant(rng, 3);
    let top = topology(rng, 6);
    let n_agents = top.agent_count();
    let h = [0.002, 0.005, 0.01][rng.random_range(0..3)];
    let x0 = states(rng, n_agents, plant.n(), 5.0);
    let opts = gain_options(&plant);
    let mut cfg = ScenarioConfig::new(plant.a().clone(), plant.b().clone(), n_agents, top.edges().to_vec(), x0, h);
    cfg.alpha = opts.alpha;
    cfg.eps = opts.eps;
    cfg.vm_policy = VmPolicy::Initial;
    cfg.duration = duration;
    cfg.seed = rng.random();
    cfg.sigma = rng.random_range(0.1..0.9);
    if mode == Mode::Delay {
        let spec = graph::laplacian(&top).ok()?;
        let gains = design_gains_with(&plant, &spec, &opts).ok()?;
        let (_, p_max) = max_feasible_delay(&plant, &gains, &top, cfg.b_param, h).ok()?;
        if p_max == 0 {
            return None;
        }
        let p = p_max.min(5);
        cfg.mode = Mode::Delay;
        cfg.d = p as f64 * h;
        let mut delays: Vec<f64> = (1..p).filter(|_| rng.random_bool(0.5)).map(|k| k as f64 * h).collect();
        delays.push(cfg.d);
        cfg.delays = delays;
        cfg.per_recipient_delays = rng.random_bool(0.5);
    }
    netsim::synthesize(&cfg).ok().map(|_| cfg)
}
