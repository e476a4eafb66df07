//! Undirected unweighted topologies and their Laplacian spectra.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::matlib::{sym_eig, MatError, Matrix};
use crate::tol::TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph needs at least one agent")]
    Empty,
    #[error("self-loop at agent {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references an agent outside 0..{2}")]
    OutOfRange(usize, usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("spectral connectivity (lambda2 = {lambda2:e}) disagrees with breadth-first search ({reachable})")]
    ConnectivityMismatch { lambda2: f64, reachable: bool },
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Undirected graph on agents `0..N` with 0/1 adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: Matrix,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Edges are unordered pairs; each pair may appear once.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut adjacency = Matrix::zeros(n, n);
        let mut normalized = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(GraphError::OutOfRange(i, j, n));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if adjacency[(i, j)] != 0.0 {
                return Err(GraphError::DuplicateEdge(i, j));
            }
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
            normalized.push((i.min(j), i.max(j)));
        }
        normalized.sort_unstable();
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[(i, j)] != 0.0).collect())
            .collect();
        Ok(Self { adjacency, neighbors, edges: normalized })
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn ring(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges).expect("ring edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges).expect("complete edges are valid")
    }

    pub fn agent_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// Sorted neighbor ids of agent `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `L = D − A`, built entry by entry; rows sum to zero exactly.
    pub fn laplacian_matrix(&self) -> Matrix {
        let n = self.agent_count();
        let mut l = self.adjacency.scale(-1.0);
        for i in 0..n {
            l[(i, i)] = self.degree(i) as f64;
        }
        l
    }

    /// Breadth-first reachability from agent 0.
    pub fn reachable_from_first(&self) -> bool {
        let n = self.agent_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

/// Laplacian and its ascending spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSpectrum {
    pub laplacian: Matrix,
    pub eigenvalues: Vec<f64>,
    /// `None` for a single agent.
    pub lambda2: Option<f64>,
    pub lambda_max: f64,
}

impl LaplacianSpectrum {
    pub fn is_connected(&self) -> bool {
        self.lambda2.map_or(true, |l2| l2 > TOL.connectivity)
    }
}

pub fn laplacian(topology: &Topology) -> Result<LaplacianSpectrum, GraphError> {
    let l = topology.laplacian_matrix();
    let spec = sym_eig(&l)?;
    let mut eigenvalues = spec.eigenvalues;
    // Snap λ₁ to 0.
    if let Some(first) = eigenvalues.first_mut() {
        if first.abs() < 1e-10 * (1.0 + l.max_abs()) {
            *first = 0.0;
        }
    }
    let lambda2 = eigenvalues.get(1).copied();
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0);
    Ok(LaplacianSpectrum { laplacian: l, eigenvalues, lambda2, lambda_max })
}

/// Spectral connectivity test, cross-checked by breadth-first search.
pub fn is_connected(topology: &Topology) -> Result<bool, GraphError> {
    let spec = laplacian(topology)?;
    let spectral = spec.is_connected();
    let reachable = topology.reachable_from_first();
    if spectral != reachable {
        return Err(GraphError::ConnectivityMismatch {
            lambda2: spec.lambda2.unwrap_or(0.0),
            reachable,
        });
    }
    Ok(spectral)
}

/// `L ⊗ M`: block `(i, j)` is `L[i, j]·M`.
pub fn kron_lift(l: &Matrix, m: &Matrix) -> Matrix {
    l.kron(m)
}

/// `V = xᵀ(L⊗P)x = Σ_{(i,j)∈edges} (x_i − x_j)ᵀP(x_i − x_j)`.
pub fn disagreement(topology: &Topology, p: &Matrix, states: &[Vec<f64>]) -> f64 {
    topology
        .edges()
        .iter()
        .map(|&(i, j)| p.quad_form(&crate::matlib::sub(&states[i], &states[j])))
        .sum()
}

/// `max_{i,j} ‖x_i − x_j‖²`.
pub fn max_pairwise_sq(states: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..states.len() {
        for j in (i + 1)..states.len() {
            let d: f64 = states[i].iter().zip(&states[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max(d);
        }
    }
    best
}

/// Stacks per-agent vectors into one column.
pub fn stack(states: &[Vec<f64>]) -> Vec<f64> {
    states.iter().flatten().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k2() {
        let s = laplacian(&Topology::complete(2)).unwrap();
        assert_eq!(s.laplacian, Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap());
        assert!((s.lambda2.unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn path4_lambda2() {
        let s = laplacian(&Topology::path(4)).unwrap();
        let closed = 2.0 - 2.0 * (core::f64::consts::PI / 4.0).cos();
        assert!((s.lambda2.unwrap() - closed).abs() < 1e-12);
        assert!((s.lambda2.unwrap() - (2.0 - 2.0f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn k4_spectrum() {
        let s = laplacian(&Topology::complete(4)).unwrap();
        assert_eq!(s.eigenvalues[0], 0.0);
        for &l in &s.eigenvalues[1..] {
            assert!((l - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn connectivity() {
        let split = Topology::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!is_connected(&split).unwrap());
        assert!(is_connected(&Topology::path(4)).unwrap());
        let single = Topology::from_edges(1, &[]).unwrap();
        assert!(is_connected(&single).unwrap());
        assert_eq!(laplacian(&single).unwrap().lambda2, None);
    }

    #[test]
    fn kron_lift_cases() {
        let m = Matrix::from_rows(&[[2.0, 1.0], [1.0, 3.0]]).unwrap();
        let d = kron_lift(&Matrix::identity(2), &m);
        assert_eq!(d.block(0, 0, 2, 2), m);
        assert_eq!(d.block(2, 2, 2, 2), m);
        let l = Topology::complete(2).laplacian_matrix();
        assert_eq!(kron_lift(&l, &Matrix::identity(1)), l);
        let lhat = kron_lift(&Topology::path(3).laplacian_matrix(), &m);
        let ones = lhat.mul_vec(&[0.3, -1.2, 0.3, -1.2, 0.3, -1.2]);
        assert!(ones.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn invalid_edges() {
        assert_eq!(Topology::from_edges(3, &[(1, 1)]), Err(GraphError::SelfLoop(1)));
        assert_eq!(Topology::from_edges(3, &[(0, 3)]), Err(GraphError::OutOfRange(0, 3, 3)));
        assert_eq!(Topology::from_edges(3, &[(0, 1), (1, 0)]), Err(GraphError::DuplicateEdge(1, 0)));
        assert_eq!(Topology::from_edges(0, &[]), Err(GraphError::Empty));
    }

    #[test]
    fn disagreement_matches_quadratic_form() {
        let top = Topology::path(3);
        let p = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        let xs = vec![vec![1.0, 2.0], vec![-0.5, 0.0], vec![3.0, -1.0]];
        let lhat = kron_lift(&top.laplacian_matrix(), &p);
        let v = lhat.quad_form(&stack(&xs));
        assert!((disagreement(&top, &p, &xs) - v).abs() < 1e-12);
    }
}
