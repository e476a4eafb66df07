//! Gain design, closed-loop spectral analysis and trigger constants.
//!
//! The pipeline is [`design_gains`] → [`closed_loop_analysis`] →
//! [`design_events`], or [`synthesize`] for all three at once.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, expm1, fabs, sqrt};
use thiserror::Error;

use crate::graph::{self, GraphError, LaplacianSpectrum, Topology};
use crate::matlib::{
    care_solve, controllability_rank, input_integral, mat_exp, norm_integral, riccati_lhs, sym_eig,
    zoh_pair, MatError, Matrix,
};
use crate::tol::TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph not connected")]
    Disconnected,
    #[error("synthesis needs at least two agents")]
    SingleAgent,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("P is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("Riccati inequality fails at alpha = {alpha} (largest eigenvalue {max_eig:e})")]
    RiccatiInfeasible { alpha: f64, max_eig: f64 },
    #[error("closed-loop kernel has dimension {zero_count}, expected {n} (largest nonzero eigenvalue {max_nonzero:e}, kernel residual {residual:e}); a larger eps separates the spectrum")]
    KernelStructure {
        zero_count: usize,
        n: usize,
        max_nonzero: f64,
        residual: f64,
    },
    #[error("delay d = {d} is not a positive multiple of h = {h}")]
    DelayNotMultiple { d: f64, h: f64 },
    #[error("delay bound infeasible: b_e*Upsilon = {product:.6} >= 1; largest feasible d = {d_max:.6e} s ({p_max} steps)")]
    Infeasible { product: f64, d_max: f64, p_max: usize },
    #[error("eta/V_M fixed point diverged after {iterations} iterations (contraction factor {kappa:.3e})")]
    EtaDivergence { iterations: usize, kappa: f64 },
}

/// Shared agent dynamics `ẋ = Ax + Bu`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: Matrix,
    b: Matrix,
}

impl PlantModel {
    /// Rejects shape mismatches and uncontrollable pairs.
    pub fn new(a: Matrix, b: Matrix) -> Result<Self, SynthesisError> {
        if !a.is_square() {
            return Err(MatError::NotSquare { rows: a.rows(), cols: a.cols() }.into());
        }
        if b.rows() != a.rows() || b.cols() == 0 {
            return Err(MatError::Shape { op: "plant", left: a.shape(), right: b.shape() }.into());
        }
        let rank = controllability_rank(&a, &b)?;
        if rank < a.rows() {
            return Err(MatError::Uncontrollable { rank, n: a.rows() }.into());
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }
}

/// Controller parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub p: Matrix,
    /// `F = −BᵀP`.
    pub f: Matrix,
    pub c: f64,
    /// Applied coupling `c₁ = 2c`.
    pub c1: f64,
    pub alpha: f64,
    /// `−λ_max` of the Riccati left-hand side at `alpha`.
    pub eps: f64,
}

impl GainSet {
    /// Wraps a given `P`, checking it is positive definite and satisfies the
    /// Riccati inequality at `alpha`.
    pub fn from_p(plant: &PlantModel, p: Matrix, c: f64, alpha: f64) -> Result<Self, SynthesisError> {
        if p.shape() != plant.a().shape() {
            return Err(MatError::Shape { op: "P", left: plant.a().shape(), right: p.shape() }.into());
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(SynthesisError::InvalidParameter("coupling c must be positive".into()));
        }
        let p = p.symmetric_part();
        let pmin = sym_eig(&p)?.min();
        if pmin <= 0.0 {
            return Err(SynthesisError::NotPositiveDefinite(pmin));
        }
        let lhs = riccati_lhs(plant.a(), plant.b(), alpha, &p).symmetric_part();
        let max_eig = sym_eig(&lhs)?.max();
        if max_eig >= 0.0 {
            return Err(SynthesisError::RiccatiInfeasible { alpha, max_eig });
        }
        let f = (&plant.b().transpose() * &p).scale(-1.0);
        Ok(Self { p, f, c, c1: 2.0 * c, alpha, eps: -max_eig })
    }

    /// `PBBᵀP`.
    pub fn pbbp(&self, plant: &PlantModel) -> Matrix {
        let pb = &self.p * plant.b();
        (&pb * &pb.transpose()).symmetric_part()
    }
}

/// Optional overrides for [`design_gains_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GainOptions {
    /// Defaults to `0.1·‖A‖₂` (or 0.1 when `A = 0`).
    pub alpha: Option<f64>,
    /// Defaults to `1e-6·‖A‖₂` (or 1e-6 when `A = 0`).
    pub eps: Option<f64>,
    /// Defaults to `1/λ₂`; smaller values are rejected.
    pub c: Option<f64>,
}

fn norm_scale(plant: &PlantModel) -> f64 {
    let s = plant.a().norm2();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

pub fn default_alpha(plant: &PlantModel) -> f64 {
    TOL.alpha_scale * norm_scale(plant)
}

pub fn default_eps(plant: &PlantModel) -> f64 {
    TOL.care_eps_scale * norm_scale(plant)
}

fn connected_lambda2(spectrum: &LaplacianSpectrum) -> Result<f64, SynthesisError> {
    let l2 = spectrum.lambda2.ok_or(SynthesisError::SingleAgent)?;
    if l2 <= TOL.connectivity {
        return Err(SynthesisError::Disconnected);
    }
    Ok(l2)
}

/// `P` from the Riccati equation at `alpha`, `F = −BᵀP`, `c = 1/λ₂`, `c₁ = 2c`.
pub fn design_gains(plant: &PlantModel, spectrum: &LaplacianSpectrum, alpha: f64) -> Result<GainSet, SynthesisError> {
    design_gains_with(plant, spectrum, &GainOptions { alpha: Some(alpha), ..GainOptions::default() })
}

pub fn design_gains_with(
    plant: &PlantModel,
    spectrum: &LaplacianSpectrum,
    opts: &GainOptions,
) -> Result<GainSet, SynthesisError> {
    let l2 = connected_lambda2(spectrum)?;
    let alpha = opts.alpha.unwrap_or_else(|| default_alpha(plant));
    let eps = opts.eps.unwrap_or_else(|| default_eps(plant));
    let c_min = 1.0 / l2;
    let c = opts.c.unwrap_or(c_min);
    if c < c_min - 1e-12 {
        return Err(SynthesisError::InvalidParameter(alloc::format!(
            "coupling c = {c} is below 1/lambda2 = {c_min}"
        )));
    }
    let p = care_solve(plant.a(), plant.b(), alpha, eps)?;
    let f = (&plant.b().transpose() * &p).scale(-1.0);
    Ok(GainSet { p, f, c, c1: 2.0 * c, alpha, eps })
}

/// Spectral quantities of the continuous closed loop `A_c = I⊗A + cL⊗BF`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopAnalysis {
    pub l_hat: Matrix,
    pub a_c: Matrix,
    pub l_bar: Matrix,
    /// Ascending.
    pub l_bar_eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    /// `max_k ‖L̄(1_N⊗e_k)‖ / ‖L̄‖`.
    pub kernel_residual: f64,
    pub beta: f64,
    pub lambda2: f64,
    pub lambda_max_l: f64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_max_lhat: f64,
    /// Smallest nonzero eigenvalue of `L̂`, which is `λ₂·λ_min(P)`.
    pub lambda_min_lhat: f64,
}

pub fn closed_loop_analysis(
    plant: &PlantModel,
    gains: &GainSet,
    spectrum: &LaplacianSpectrum,
) -> Result<ClosedLoopAnalysis, SynthesisError> {
    let l2 = connected_lambda2(spectrum)?;
    let n = plant.n();
    let agents = spectrum.laplacian.rows();
    let l = &spectrum.laplacian;
    let l_hat = graph::kron_lift(l, &gains.p);
    let bf = plant.b() * &gains.f;
    let a_c = &graph::kron_lift(&Matrix::identity(agents), plant.a()) + &graph::kron_lift(l, &bf.scale(gains.c));
    let l_bar = (&(&l_hat * &a_c) + &(&a_c.transpose() * &l_hat)).symmetric_part();
    let eig = sym_eig(&l_bar)?;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
    let zero_count = eig.eigenvalues.iter().filter(|v| fabs(**v) < TOL.kernel * scale).count();
    let max_nonzero = eig
        .eigenvalues
        .iter()
        .filter(|v| fabs(**v) >= TOL.kernel * scale)
        .fold(f64::NEG_INFINITY, |m, v| m.max(*v));

    let mut residual = 0.0f64;
    let lnorm = l_bar.norm_fro().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut v = alloc::vec![0.0; n * agents];
        for i in 0..agents {
            v[i * n + k] = 1.0;
        }
        residual = residual.max(crate::matlib::norm(&l_bar.mul_vec(&v)) / lnorm);
    }

    if zero_count != n || max_nonzero >= -TOL.kernel * scale || residual >= TOL.kernel_residual {
        return Err(SynthesisError::KernelStructure { zero_count, n, max_nonzero, residual });
    }

    let p_spec = sym_eig(&gains.p)?;
    let lambda_min_p = p_spec.min();
    let lambda_max_p = p_spec.max();
    let lambda_max_lhat = spectrum.lambda_max * lambda_max_p;
    let lambda_min_lhat = l2 * lambda_min_p;
    // Eigenvalues of −L̄ ascending are the negated L̄ eigenvalues in reverse;
    // the first n are the kernel.
    let smallest_nonzero_neg = -eig.eigenvalues[eig.len() - 1 - n];
    let beta = smallest_nonzero_neg / lambda_max_lhat;

    Ok(ClosedLoopAnalysis {
        l_hat,
        a_c,
        l_bar,
        l_bar_eigenvalues: eig.eigenvalues,
        kernel_dim: zero_count,
        kernel_residual: residual,
        beta,
        lambda2: l2,
        lambda_max_l: spectrum.lambda_max,
        lambda_min_p,
        lambda_max_p,
        lambda_max_lhat,
        lambda_min_lhat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NoDelay,
    Delay,
}

/// How the disagreement ceiling `V_M` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VmPolicy {
    /// `V_M = max{V(0), Nη/β}` solved jointly with `η`.
    #[default]
    Envelope,
    /// `V_M = V(0)`; the simulation then checks that `V` never exceeds it.
    Initial,
}

/// Timing and trigger parameters supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignInputs {
    pub mode: Mode,
    pub sigma: f64,
    pub b: f64,
    pub h: f64,
    /// Delay bound; ignored without delays.
    pub d: f64,
    /// Use this `η` instead of the synthesized one.
    pub eta: Option<f64>,
    pub vm_policy: VmPolicy,
}

impl DesignInputs {
    pub fn no_delay(h: f64) -> Self {
        Self { mode: Mode::NoDelay, sigma: 0.5, b: 1.0, h, d: 0.0, eta: None, vm_policy: VmPolicy::Envelope }
    }

    pub fn delay(h: f64, d: f64) -> Self {
        Self { mode: Mode::Delay, d, ..Self::no_delay(h) }
    }
}

/// Everything the triggers and the simulator need, frozen at design time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDesign {
    pub mode: Mode,
    pub sigma: f64,
    pub b: f64,
    pub h: f64,
    pub d: f64,
    /// `d = p·h`; zero without delays.
    pub p: usize,
    pub n_agents: usize,
    pub degrees: Vec<usize>,
    pub c: f64,
    pub c1: f64,
    pub g: Matrix,
    /// ZOH input matrix.
    pub h_zoh: Matrix,
    /// `∫₀ʰ e^{A(h−s)} c₁BF ds`.
    pub e: Matrix,
    pub e_norm: f64,
    pub upsilon: f64,
    pub upsilon_h: f64,
    pub g_p: Matrix,
    pub g_p_norm: f64,
    /// `(G − I)G^{p−1}`.
    pub g_step: Matrix,
    pub g_step_norm: f64,
    pub g_minus_i_norm: f64,
    pub b_e: Vec<f64>,
    pub lambda_bar: f64,
    pub z_bar: Vec<f64>,
    pub v0: f64,
    pub v_m: f64,
    pub vm_policy: VmPolicy,
    pub eta: f64,
    /// Largest per-agent lower bound on `η`.
    pub eta_bound: f64,
    pub eta_overridden: bool,
    /// Per-agent `η` lower bounds.
    pub eta_rhs: Vec<f64>,
    /// `1 − max_i b_e,i·Υ`; 1 without delays.
    pub feasibility_margin: f64,
    pub beta: f64,
    pub lambda_min_p: f64,
    /// `PBBᵀP`.
    pub m_pbbp: Matrix,
    pub m_norm: f64,
    pub fixed_point_iterations: usize,
}

impl EventDesign {
    /// `(V(0) − Nη/β)e^{−βt} + Nη/β`.
    pub fn envelope(&self, t: f64) -> f64 {
        let floor = self.n_agents as f64 * self.eta / self.beta;
        self.v0 * exp(-self.beta * t) - floor * expm1(-self.beta * t)
    }

    pub fn disagreement_bound(&self) -> f64 {
        disagreement_bound(self.eta, self.n_agents, self.beta, self.lambda_min_p)
    }

    /// Whether `V_M = max{V(0), Nη/β}` holds.
    pub fn vm_consistent(&self) -> bool {
        let want = self.v0.max(self.n_agents as f64 * self.eta / self.beta);
        fabs(self.v_m - want) <= 1e-9 * want.max(f64::MIN_POSITIVE)
    }
}

/// `Nη/(β·λ_min(P))`.
pub fn disagreement_bound(eta: f64, n_agents: usize, beta: f64, lambda_min_p: f64) -> f64 {
    n_agents as f64 * eta / (beta * lambda_min_p)
}

/// `λ_max(𝒜²)·λ_max(PBBᵀP)`.
pub fn lambda_bar(topology: &Topology, pbbp: &Matrix) -> Result<f64, SynthesisError> {
    let a = topology.adjacency();
    let a2 = sym_eig(&(a * a).symmetric_part())?.max().max(0.0);
    let m = sym_eig(&pbbp.symmetric_part())?.max().max(0.0);
    Ok(a2 * m)
}

/// `√(N_i·N·(N−1)·(b/2 + 1/(2b)))`.
pub fn b_e(degree: usize, n_agents: usize, b: f64) -> f64 {
    let n = n_agents as f64;
    sqrt(degree as f64 * n * (n - 1.0) * (b / 2.0 + 1.0 / (2.0 * b)))
}

/// Grid constants shared by both modes.
struct Kernel {
    g: Matrix,
    h_zoh: Matrix,
    e: Matrix,
    e_norm: f64,
    cbf: Matrix,
}

fn grid_kernel(plant: &PlantModel, gains: &GainSet, h: f64) -> Result<Kernel, SynthesisError> {
    let (g, h_zoh) = zoh_pair(plant.a(), plant.b(), h)?;
    let e = input_integral(plant.a(), plant.b(), gains.c1, &gains.f, h)?;
    let e_norm = e.norm2();
    let cbf = (plant.b() * &gains.f).scale(gains.c1);
    Ok(Kernel { g, h_zoh, e, e_norm, cbf })
}

/// `Υ(d) = ∫₀ᵈ ‖e^{A(d−s)}c₁BF‖ ds`.
pub fn upsilon(plant: &PlantModel, gains: &GainSet, d: f64) -> Result<f64, SynthesisError> {
    let cbf = (plant.b() * &gains.f).scale(gains.c1);
    Ok(norm_integral(plant.a(), &cbf, d)?)
}

/// Largest delay (seconds, and whole steps of `h`) with `max_i b_e,i·Υ(d) < 1`.
pub fn max_feasible_delay(
    plant: &PlantModel,
    gains: &GainSet,
    topology: &Topology,
    b: f64,
    h: f64,
) -> Result<(f64, usize), SynthesisError> {
    let n_agents = topology.agent_count();
    let be_max = (0..n_agents).map(|i| b_e(topology.degree(i), n_agents, b)).fold(0.0, f64::max);
    let feasible = |d: f64| -> Result<bool, SynthesisError> { Ok(be_max * upsilon(plant, gains, d)? < 1.0) };
    let mut lo = 0.0;
    let mut hi = h.max(f64::MIN_POSITIVE);
    let mut grow = 0;
    while feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Ok((f64::INFINITY, usize::MAX));
        }
    }
    for _ in 0..TOL.delay_bisection_steps {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = libm::floor(lo / h) as usize;
    while p > 0 && !feasible(p as f64 * h)? {
        p -= 1;
    }
    Ok((lo, p))
}

/// Whole number of steps in `d`, or an error when `d` is off the grid.
pub fn delay_steps(d: f64, h: f64) -> Result<usize, SynthesisError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(SynthesisError::InvalidParameter("sampling period h must be positive".into()));
    }
    let ratio = d / h;
    let p = libm::round(ratio);
    if !(d > 0.0) || p < 1.0 || fabs(ratio - p) > 1e-9 * p.max(1.0) {
        return Err(SynthesisError::DelayNotMultiple { d, h });
    }
    Ok(p as usize)
}

/// Per-agent `η` lower bound as a function of `V_M`, with the matching `z̄`.
struct EtaBound<'a> {
    mode: Mode,
    b: f64,
    c1: f64,
    n_agents: usize,
    degrees: &'a [usize],
    b_e: &'a [f64],
    lambda_max_l: f64,
    lambda_min_lhat: f64,
    m_norm: f64,
    e_norm: f64,
    upsilon: f64,
    upsilon_h: f64,
    g_p_norm: f64,
    g_step_norm: f64,
    g_minus_i_norm: f64,
    lambda_bar: f64,
}

impl EtaBound<'_> {
    fn z_bar(&self, i: usize, v_m: f64) -> f64 {
        let base = self.lambda_max_l * sqrt(v_m / self.lambda_min_lhat);
        match self.mode {
            Mode::NoDelay => base,
            Mode::Delay => base / (1.0 - self.b_e[i] * self.upsilon),
        }
    }

    fn rhs(&self, i: usize, v_m: f64) -> f64 {
        let (b, c1) = (self.b, self.c1);
        let n = self.n_agents as f64;
        let ni = self.degrees[i] as f64;
        let be = self.b_e[i];
        let zb = self.z_bar(i, v_m);
        match self.mode {
            Mode::NoDelay => {
                let t1 = 2.0 * c1 * ni * (b * (n - 1.0) + n / b) * self.e_norm * self.e_norm;
                let t2 = c1 * (1.0 + 2.0 * b * ni) * sq(2.0 + be * self.e_norm);
                (t1 + t2) * self.m_norm * zb * zb
            }
            Mode::Delay => {
                let ratio = 1.0 / (1.0 - be * self.upsilon) + 1.0 / (1.0 - be * self.upsilon_h);
                let t1 = c1 * sq(1.0 + b) * self.m_norm * sq(self.lambda_max_l) / self.lambda_min_lhat
                    * v_m
                    * ratio
                    * ratio;
                let t2 = c1 * (1.0 + 1.0 / b) * sq(self.g_p_norm + 1.0) * sq(self.upsilon) * zb * zb;
                let k = self.g_step_norm * self.upsilon + self.g_minus_i_norm * self.upsilon_h + self.e_norm;
                let t3 = c1 * (1.0 + b) * (1.0 + 1.0 / b) * k * k * zb * zb;
                // Delayed terms weighted by max(λ̄, 1).
                t1 + self.lambda_bar.max(1.0) * (t2 + t3)
            }
        }
    }

    fn max_rhs(&self, v_m: f64) -> f64 {
        (0..self.n_agents).map(|i| self.rhs(i, v_m)).fold(0.0, f64::max)
    }
}

/// Trigger constants for the chosen mode.
///
/// `v0` is `V(0)` of the initial states. With an `η` override the bound is
/// still evaluated and reported but not enforced.
pub fn design_events(
    plant: &PlantModel,
    gains: &GainSet,
    topology: &Topology,
    analysis: &ClosedLoopAnalysis,
    inputs: &DesignInputs,
    v0: f64,
) -> Result<EventDesign, SynthesisError> {
    if !(inputs.sigma > 0.0 && inputs.sigma < 1.0) {
        return Err(SynthesisError::InvalidParameter("sigma must lie in (0, 1)".into()));
    }
    if !(inputs.b > 0.0) || !inputs.b.is_finite() {
        return Err(SynthesisError::InvalidParameter("b must be positive".into()));
    }
    if !(inputs.h > 0.0) || !inputs.h.is_finite() {
        return Err(SynthesisError::InvalidParameter("sampling period h must be positive".into()));
    }
    if !(v0 >= 0.0) || !v0.is_finite() {
        return Err(SynthesisError::InvalidParameter("V(0) must be finite and nonnegative".into()));
    }
    if let Some(eta) = inputs.eta {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(SynthesisError::InvalidParameter("eta must be positive".into()));
        }
    }
    let n_agents = topology.agent_count();
    let degrees = topology.degrees();
    let kernel = grid_kernel(plant, gains, inputs.h)?;
    let n = plant.n();
    let id = Matrix::identity(n);
    let m_pbbp = gains.pbbp(plant);
    let m_norm = sym_eig(&m_pbbp)?.max().max(0.0);
    let lam_bar = lambda_bar(topology, &m_pbbp)?;
    let b_e_list: Vec<f64> = degrees.iter().map(|&k| b_e(k, n_agents, inputs.b)).collect();
    let be_max = b_e_list.iter().copied().fold(0.0, f64::max);
    let g_minus_i = &kernel.g - &id;

    let (d, p, upsilon_v, upsilon_h, g_p, g_step) = match inputs.mode {
        Mode::NoDelay => (0.0, 0, 0.0, 0.0, id.clone(), g_minus_i.clone()),
        Mode::Delay => {
            let p = delay_steps(inputs.d, inputs.h)?;
            let d = p as f64 * inputs.h;
            let ups = norm_integral(plant.a(), &kernel.cbf, d)?;
            let ups_h = norm_integral(plant.a(), &kernel.cbf, d - inputs.h)?;
            if be_max * ups >= 1.0 {
                let (d_max, p_max) = max_feasible_delay(plant, gains, topology, inputs.b, inputs.h)?;
                return Err(SynthesisError::Infeasible { product: be_max * ups, d_max, p_max });
            }
            let g_p = kernel.g.pow(p);
            let g_step = &g_minus_i * &kernel.g.pow(p - 1);
            (d, p, ups, ups_h, g_p, g_step)
        }
    };

    let bound = EtaBound {
        mode: inputs.mode,
        b: inputs.b,
        c1: gains.c1,
        n_agents,
        degrees: &degrees,
        b_e: &b_e_list,
        lambda_max_l: analysis.lambda_max_l,
        lambda_min_lhat: analysis.lambda_min_lhat,
        m_norm,
        e_norm: kernel.e_norm,
        upsilon: upsilon_v,
        upsilon_h,
        g_p_norm: g_p.norm2(),
        g_step_norm: g_step.norm2(),
        g_minus_i_norm: g_minus_i.norm2(),
        lambda_bar: lam_bar,
    };

    let beta = analysis.beta;
    let floor_of = |eta: f64| n_agents as f64 * eta / beta;
    let (eta, v_m, iterations) = match (inputs.eta, inputs.vm_policy) {
        (Some(eta), VmPolicy::Envelope) => (eta, v0.max(floor_of(eta)), 0),
        (Some(eta), VmPolicy::Initial) => (eta, v0, 0),
        (None, VmPolicy::Initial) => (positive(TOL.eta_safety * bound.max_rhs(v0)), v0, 1),
        (None, VmPolicy::Envelope) => {
            // The bound is linear in V_M, so the slope gives the contraction factor.
            let kappa = TOL.eta_safety * bound.max_rhs(1.0) * n_agents as f64 / beta;
            let mut v_m = v0;
            let mut eta = positive(TOL.eta_safety * bound.max_rhs(v_m));
            let mut iterations = 1;
            loop {
                let next_vm = v0.max(floor_of(eta));
                let next_eta = positive(TOL.eta_safety * bound.max_rhs(next_vm));
                let change = fabs(next_eta - eta) / next_eta.max(f64::MIN_POSITIVE);
                v_m = next_vm;
                eta = next_eta;
                iterations += 1;
                if !eta.is_finite() || iterations >= TOL.eta_max_iter {
                    return Err(SynthesisError::EtaDivergence { iterations, kappa });
                }
                if change < TOL.eta_rel_change {
                    let settled = v0.max(floor_of(eta));
                    if fabs(settled - v_m) <= 1e-9 * settled.max(f64::MIN_POSITIVE) {
                        break;
                    }
                }
            }
            (eta, v_m, iterations)
        }
    };

    let z_bar = (0..n_agents).map(|i| bound.z_bar(i, v_m)).collect();
    let eta_rhs: Vec<f64> = (0..n_agents).map(|i| bound.rhs(i, v_m)).collect();
    let eta_bound = eta_rhs.iter().copied().fold(0.0, f64::max);

    Ok(EventDesign {
        mode: inputs.mode,
        sigma: inputs.sigma,
        b: inputs.b,
        h: inputs.h,
        d,
        p,
        n_agents,
        degrees: degrees.clone(),
        c: gains.c,
        c1: gains.c1,
        g: kernel.g,
        h_zoh: kernel.h_zoh,
        e: kernel.e,
        e_norm: kernel.e_norm,
        upsilon: upsilon_v,
        upsilon_h,
        g_p_norm: bound.g_p_norm,
        g_step_norm: bound.g_step_norm,
        g_minus_i_norm: bound.g_minus_i_norm,
        g_p,
        g_step,
        b_e: b_e_list,
        lambda_bar: lam_bar,
        z_bar,
        v0,
        v_m,
        vm_policy: inputs.vm_policy,
        eta,
        eta_bound,
        eta_overridden: inputs.eta.is_some(),
        eta_rhs,
        feasibility_margin: 1.0 - be_max * upsilon_v,
        beta,
        lambda_min_p: analysis.lambda_min_p,
        m_pbbp,
        m_norm,
        fixed_point_iterations: iterations,
    })
}

fn sq(x: f64) -> f64 {
    x * x
}

fn positive(eta: f64) -> f64 {
    if eta > 0.0 {
        eta
    } else {
        f64::EPSILON
    }
}

/// `η` and `z̄` without delays for initial disagreement `v0`.
pub fn eta_no_delay(
    plant: &PlantModel,
    gains: &GainSet,
    topology: &Topology,
    analysis: &ClosedLoopAnalysis,
    sigma: f64,
    b: f64,
    h: f64,
    v0: f64,
    policy: VmPolicy,
) -> Result<EventDesign, SynthesisError> {
    let inputs = DesignInputs { mode: Mode::NoDelay, sigma, b, h, d: 0.0, eta: None, vm_policy: policy };
    design_events(plant, gains, topology, analysis, &inputs, v0)
}

/// Smallest synthesized `η` over a grid of `b` values, as `(b, η)`.
pub fn eta_sweep_b(
    plant: &PlantModel,
    gains: &GainSet,
    topology: &Topology,
    analysis: &ClosedLoopAnalysis,
    inputs: &DesignInputs,
    v0: f64,
    grid: &[f64],
) -> Option<(f64, f64)> {
    grid.iter()
        .filter_map(|&b| {
            let probe = DesignInputs { b, eta: None, ..*inputs };
            design_events(plant, gains, topology, analysis, &probe, v0).ok().map(|d| (b, d.eta))
        })
        .min_by(|x, y| x.1.total_cmp(&y.1))
}

/// Result of [`synthesize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub spectrum: LaplacianSpectrum,
    pub gains: GainSet,
    pub analysis: ClosedLoopAnalysis,
    pub design: EventDesign,
}

/// Gains (designed, or `given` when supplied), analysis and event design in one call.
pub fn synthesize(
    plant: &PlantModel,
    topology: &Topology,
    given: Option<GainSet>,
    gain_opts: &GainOptions,
    inputs: &DesignInputs,
    x0: &[Vec<f64>],
) -> Result<Synthesis, SynthesisError> {
    if x0.len() != topology.agent_count() || x0.iter().any(|x| x.len() != plant.n()) {
        return Err(SynthesisError::InvalidParameter(
            "initial states must give one n-vector per agent".into(),
        ));
    }
    if !graph::is_connected(topology)? {
        return Err(SynthesisError::Disconnected);
    }
    let spectrum = graph::laplacian(topology)?;
    let gains = match given {
        Some(g) => {
            let c_min = 1.0 / connected_lambda2(&spectrum)?;
            if g.c < c_min - 1e-12 {
                return Err(SynthesisError::InvalidParameter(alloc::format!(
                    "coupling c = {} is below 1/lambda2 = {c_min}",
                    g.c
                )));
            }
            g
        }
        None => design_gains_with(plant, &spectrum, gain_opts)?,
    };
    let analysis = closed_loop_analysis(plant, &gains, &spectrum)?;
    let v0 = graph::disagreement(topology, &gains.p, x0);
    let design = design_events(plant, &gains, topology, &analysis, inputs, v0)?;
    Ok(Synthesis { spectrum, gains, analysis, design })
}

/// `e^{At}` convenience for callers holding a plant.
pub fn transition(plant: &PlantModel, t: f64) -> Result<Matrix, SynthesisError> {
    Ok(mat_exp(plant.a(), t)?)
}
