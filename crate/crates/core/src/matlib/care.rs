use alloc::vec::Vec;

use super::{sym_eig, MatError, Matrix};
use crate::tol::TOL;

fn controllability_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix, MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if b.rows() != a.rows() {
        return Err(MatError::Shape { op: "controllability", left: a.shape(), right: b.shape() });
    }
    let n = a.rows();
    let m = b.cols();
    let mut ctrb = Matrix::zeros(n, n * m);
    let mut blk = b.clone();
    for k in 0..n {
        ctrb.set_block(0, k * m, &blk);
        blk = a * &blk;
    }
    Ok(ctrb)
}

/// Rank of `[B, AB, …, A^{n−1}B]`.
pub fn controllability_rank(a: &Matrix, b: &Matrix) -> Result<usize, MatError> {
    Ok(controllability_matrix(a, b)?.rank(TOL.rank))
}

/// `σ_min/σ_max` of the controllability matrix; 0 when uncontrollable.
pub fn controllability_margin(a: &Matrix, b: &Matrix) -> Result<f64, MatError> {
    let c = controllability_matrix(a, b)?;
    let eig = sym_eig(&(&c * &c.transpose()).symmetric_part())?;
    if !(eig.max() > 0.0) {
        return Ok(0.0);
    }
    Ok(libm::sqrt(eig.min().max(0.0) / eig.max()))
}

pub fn is_controllable(a: &Matrix, b: &Matrix) -> Result<bool, MatError> {
    Ok(controllability_rank(a, b)? == a.rows())
}

/// Solves `AᵀX + XA + Q = 0` by Kronecker vectorisation.
pub fn lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix, MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if q.shape() != a.shape() {
        return Err(MatError::Shape { op: "lyapunov", left: a.shape(), right: q.shape() });
    }
    let n = a.rows();
    let at = a.transpose();
    let id = Matrix::identity(n);
    // Row-major vec: vec(AᵀX) = (Aᵀ ⊗ I)·vec X and vec(XA) = (I ⊗ Aᵀ)·vec X.
    let k = &at.kron(&id) + &id.kron(&at);
    let rhs = Matrix::column(&q.as_slice().iter().map(|v| -v).collect::<Vec<_>>());
    let x = k.solve(&rhs)?;
    Ok(Matrix::from_vec(n, n, x.as_slice().to_vec())?.symmetric_part())
}

/// `(A+αI)ᵀP + P(A+αI) − 2PBBᵀP`.
pub fn riccati_lhs(a: &Matrix, b: &Matrix, alpha: f64, p: &Matrix) -> Matrix {
    let ah = a.shift(alpha);
    let pb = p * b;
    let quad = (&pb * &pb.transpose()).scale(2.0);
    &(&(&ah.transpose() * p) + &(p * &ah)) - &quad
}

/// Stabilising solution of `(A+αI)ᵀP + P(A+αI) − 2PBBᵀP = −εI`.
///
/// Newton–Kleinman iteration started from Bass's stabilising gain.
pub fn care_solve(a: &Matrix, b: &Matrix, alpha: f64, eps: f64) -> Result<Matrix, MatError> {
    if !a.is_finite() || !b.is_finite() || !alpha.is_finite() || !eps.is_finite() {
        return Err(MatError::NonFinite);
    }
    if alpha < 0.0 {
        return Err(MatError::InvalidParameter("alpha must be nonnegative"));
    }
    if eps < 0.0 {
        return Err(MatError::InvalidParameter("eps must be nonnegative"));
    }
    let n = a.rows();
    let rank = controllability_rank(a, b)?;
    if rank < n {
        return Err(MatError::Uncontrollable { rank, n });
    }
    let ah = a.shift(alpha);
    let bt = b.transpose();

    let omega = ah.norm_one() + 1.0;
    let shifted = ah.shift(omega);
    let z = lyapunov(&shifted.transpose(), &(b * &bt).scale(-2.0))?;
    let mut k = &bt * &z.inverse()?;

    let q = Matrix::identity(n).scale(eps);
    let mut p = Matrix::zeros(n, n);
    let mut prev_step = f64::INFINITY;
    for iter in 1..=TOL.care_max_iter {
        let ak = &ah - &(b * &k);
        let rhs = &q + &(&k.transpose() * &k).scale(0.5);
        let next = lyapunov(&ak, &rhs)?;
        let step = (&next - &p).norm_fro() / next.norm_fro().max(f64::MIN_POSITIVE);
        p = next;
        k = (&bt * &p).scale(2.0);
        if step <= TOL.care_rel_step || (iter > 2 && step < 1e-10 && step >= prev_step) {
            return Ok(p);
        }
        prev_step = step;
    }
    Err(MatError::NoConvergence { what: "Newton-Kleinman", iterations: TOL.care_max_iter })
}
