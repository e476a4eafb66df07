#![allow(dead_code)]

use petc_core::graph::Topology;
use petc_core::matlib::controllability_margin;
use petc_core::netsim::ScenarioConfig;
use petc_core::synthesis::{default_alpha, GainOptions, Mode, PlantModel, VmPolicy};
use petc_core::Matrix;
use proptest::prelude::*;

pub fn example_a() -> Matrix {
    Matrix::from_rows(&[[0.2, -0.8], [0.26, 0.05]]).unwrap()
}

pub fn example_b() -> Matrix {
    Matrix::column(&[0.7, -1.1])
}

pub fn example_x0() -> Vec<Vec<f64>> {
    vec![vec![-5.5, -6.1], vec![-1.6, -1.5], vec![5.9, 2.5], vec![12.35, 15.1]]
}

pub fn witness_p() -> Matrix {
    Matrix::from_rows(&[[0.5859, -0.1575], [-0.1575, 0.4274]]).unwrap()
}

pub fn example_config(mode: Mode) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(example_a(), example_b(), 4, vec![(0, 1), (1, 2), (2, 3)], example_x0(), 0.002);
    cfg.mode = mode;
    if mode == Mode::Delay {
        cfg.d = 0.014;
        cfg.delays = vec![0.010, 0.012, 0.014];
    }
    cfg.eta = Some(10.85);
    cfg.vm_policy = VmPolicy::Initial;
    cfg.seed = 7;
    cfg
}

pub fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-scale..scale, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

/// Controllable `(A, B)` with `n ≤ 3`, `m ≤ 2` and controllability margin at least 0.2.
pub fn plant() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..=3, 1usize..=2)
        .prop_flat_map(|(n, m)| (matrix(n, n, 1.0), matrix(n, m.min(n), 1.0)))
        .prop_filter("well controllable", |(a, b)| controllability_margin(a, b).unwrap() >= 0.2)
}

/// Connected graph on `2..=max_n` nodes: a random tree plus extra edges.
pub fn connected_graph(max_n: usize) -> impl Strategy<Value = Topology> {
    (2usize..=max_n)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            (Just(n), parents, prop::collection::vec((0..n, 0..n), 0..n))
        })
        .prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(k, &p)| (p, k + 1)).collect();
            for (i, j) in extra {
                let e = (i.min(j), i.max(j));
                if i != j && !edges.iter().any(|&(a, b)| (a.min(b), a.max(b)) == e) {
                    edges.push(e);
                }
            }
            Topology::from_edges(n, &edges).unwrap()
        })
}

pub fn states(n_agents: usize, n: usize, scale: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-scale..scale, n), n_agents)
}

/// Riccati weights for random draws: the default rate and `ε = 1e-3·max(‖A‖₂, 1)`.
pub fn draw_gain_options(plant: &PlantModel) -> GainOptions {
    GainOptions { alpha: Some(default_alpha(plant)), eps: Some(1e-3 * plant.a().norm2().max(1.0)), c: None }
}
