//! Numerical tolerances shared by every module.

/// Every threshold used by the crate, in one place.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Relative asymmetry `‖M − Mᵀ‖_F / ‖M‖_F` accepted by the symmetric eigensolver.
    pub symmetry: f64,
    /// Jacobi sweeps stop once the off-diagonal mass falls below this fraction of `‖M‖_F`.
    pub jacobi_offdiag: f64,
    pub jacobi_max_sweeps: usize,
    /// Relative pivot threshold for rank decisions (controllability).
    pub rank: f64,
    pub care_max_iter: usize,
    /// Newton–Kleinman stops when successive iterates agree to this relative Frobenius distance.
    pub care_rel_step: f64,
    /// `ε = care_eps_scale · ‖A‖₂` unless the caller fixes `ε`.
    pub care_eps_scale: f64,
    /// Default `α = alpha_scale · ‖A‖₂`.
    pub alpha_scale: f64,
    /// Simpson panels for the norm integrals (even).
    pub simpson_panels: usize,
    /// An eigenvalue of `L̄` counts as zero when `|λ| / max|λ|` is below this.
    pub kernel: f64,
    /// Residual `‖L̄(1_N ⊗ ς)‖ / ‖L̄‖` accepted for the consensus kernel.
    pub kernel_residual: f64,
    /// `λ₂` above this means connected.
    pub connectivity: f64,
    pub eta_safety: f64,
    pub eta_max_iter: usize,
    pub eta_rel_change: f64,
    /// Bisection steps for the largest feasible delay bound.
    pub delay_bisection_steps: usize,
    /// Slack subtracted before taking the ceiling when rounding delays onto the grid.
    pub delay_round: f64,
    /// Abort a simulation once any state norm exceeds this.
    pub divergence: f64,
    /// Relative slack on the Lyapunov envelope.
    pub envelope_slack: f64,
}

pub const TOL: Tolerances = Tolerances {
    symmetry: 1e-10,
    jacobi_offdiag: 1e-15,
    jacobi_max_sweeps: 100,
    rank: 1e-10,
    care_max_iter: 100,
    care_rel_step: 1e-14,
    care_eps_scale: 1e-6,
    alpha_scale: 0.1,
    simpson_panels: 200,
    kernel: 1e-8,
    kernel_residual: 1e-9,
    connectivity: 1e-9,
    eta_safety: 1.01,
    eta_max_iter: 1000,
    eta_rel_change: 1e-10,
    delay_bisection_steps: 60,
    delay_round: 1e-12,
    divergence: 1e12,
    envelope_slack: 1e-6,
};
