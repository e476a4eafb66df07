use libm::{ceil, log2};

use super::{MatError, Matrix};
use crate::tol::TOL;

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn check_square(a: &Matrix) -> Result<(), MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if !a.is_finite() {
        return Err(MatError::NonFinite);
    }
    Ok(())
}

fn check_duration(t: f64) -> Result<(), MatError> {
    if !t.is_finite() {
        return Err(MatError::NonFinite);
    }
    if t < 0.0 {
        return Err(MatError::NegativeDuration(t));
    }
    Ok(())
}

/// `e^{At}` by scaling and squaring with the degree-13 Padé approximant.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix, MatError> {
    check_square(a)?;
    check_duration(t)?;
    let n = a.rows();
    let at = a.scale(t);
    let norm = at.norm_one();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let s = if norm > THETA_13 { ceil(log2(norm / THETA_13)).max(0.0) as i32 } else { 0 };
    let x = at.scale(libm::pow(2.0, -f64::from(s)));

    let b = &PADE_13;
    let id = Matrix::identity(n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;

    let u_inner = &(&x6.scale(b[13]) + &x4.scale(b[11])) + &x2.scale(b[9]);
    let u_tail = &(&(&(&x6.scale(b[7]) + &x4.scale(b[5])) + &x2.scale(b[3])) + &id.scale(b[1]));
    let u = &x * &(&(&x6 * &u_inner) + u_tail);

    let v_inner = &(&x6.scale(b[12]) + &x4.scale(b[10])) + &x2.scale(b[8]);
    let v_tail = &(&(&x6.scale(b[6]) + &x4.scale(b[4])) + &x2.scale(b[2])) + &id.scale(b[0]);
    let v = &(&x6 * &v_inner) + &v_tail;

    let mut r = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(MatError::NonFinite);
    }
    Ok(r)
}

/// Exact zero-order-hold pair `(G, H)`: `G = e^{Ah}`, `H = ∫₀ʰ e^{As} ds · B`,
/// read off the exponential of `[[A, B], [0, 0]]·h`.
pub fn zoh_pair(a: &Matrix, b: &Matrix, h: f64) -> Result<(Matrix, Matrix), MatError> {
    check_square(a)?;
    if b.rows() != a.rows() {
        return Err(MatError::Shape { op: "zoh_pair", left: a.shape(), right: b.shape() });
    }
    if !b.is_finite() {
        return Err(MatError::NonFinite);
    }
    let n = a.rows();
    let m = b.cols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, a);
    aug.set_block(0, n, b);
    let e = mat_exp(&aug, h)?;
    Ok((e.block(0, 0, n, n), e.block(0, n, n, m)))
}

/// `E = ∫₀ʰ e^{A(h−s)} c B F ds`.
pub fn input_integral(a: &Matrix, b: &Matrix, c: f64, f: &Matrix, h: f64) -> Result<Matrix, MatError> {
    let cbf = b.try_mul(f)?.scale(c);
    Ok(zoh_pair(a, &cbf, h)?.1)
}

/// `∫₀ᵀ ‖e^{A(T−s)} M‖₂ ds` by composite Simpson on a fixed grid.
pub fn norm_integral(a: &Matrix, m: &Matrix, t: f64) -> Result<f64, MatError> {
    check_square(a)?;
    check_duration(t)?;
    if m.rows() != a.rows() {
        return Err(MatError::Shape { op: "norm_integral", left: a.shape(), right: m.shape() });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let panels = TOL.simpson_panels + TOL.simpson_panels % 2;
    let step = t / panels as f64;
    let mut acc = 0.0;
    for k in 0..=panels {
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let g = mat_exp(a, step * k as f64)?;
        acc += w * (&g * m).norm2();
    }
    Ok(acc * step / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_a() -> Matrix {
        Matrix::from_rows(&[[0.2, -0.8], [0.26, 0.05]]).unwrap()
    }

    fn example_b() -> Matrix {
        Matrix::from_rows(&[[0.7], [-1.1]]).unwrap()
    }

    fn series_exp(a: &Matrix, t: f64, terms: usize) -> Matrix {
        let at = a.scale(t);
        let mut term = Matrix::identity(a.rows());
        let mut sum = term.clone();
        for k in 1..=terms {
            term = (&term * &at).scale(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }

    fn simpson<F: Fn(f64) -> Matrix>(f: F, t: f64, panels: usize) -> Matrix {
        let step = t / panels as f64;
        let mut acc = f(0.0).scale(0.0);
        for k in 0..=panels {
            let w = if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc = &acc + &f(step * k as f64).scale(w);
        }
        acc.scale(step / 3.0)
    }

    #[test]
    fn zero_matrix_gives_identity() {
        assert_eq!(mat_exp(&Matrix::zeros(2, 2), 1.0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn diagonal_case() {
        let h = 0.37;
        let g = mat_exp(&Matrix::from_diag(&[-1.5, 0.8]), h).unwrap();
        assert!((g[(0, 0)] - (-1.5f64 * h).exp()).abs() < 1e-15);
        assert!((g[(1, 1)] - (0.8f64 * h).exp()).abs() < 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn example_matrix_matches_series() {
        let a = example_a();
        let got = mat_exp(&a, 0.002).unwrap();
        let want = series_exp(&a, 0.002, 20);
        assert!((&got - &want).max_abs() < 1e-12);
    }

    #[test]
    fn large_norm_uses_squaring() {
        let a = Matrix::from_rows(&[[-3.0, 4.0], [-4.0, -3.0]]).unwrap();
        let t = 2.5;
        let got = mat_exp(&a, t).unwrap();
        let (e, c, s) = ((-3.0f64 * t).exp(), (4.0f64 * t).cos(), (4.0f64 * t).sin());
        let want = Matrix::from_rows(&[[e * c, e * s], [-e * s, e * c]]).unwrap();
        assert!((&got - &want).max_abs() < 1e-12 * want.max_abs().max(1.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(mat_exp(&Matrix::zeros(2, 3), 1.0), Err(MatError::NotSquare { .. })));
        assert!(matches!(mat_exp(&Matrix::identity(2), -1.0), Err(MatError::NegativeDuration(_))));
        assert!(matches!(mat_exp(&Matrix::identity(2), f64::NAN), Err(MatError::NonFinite)));
    }

    #[test]
    fn zoh_trivial_cases() {
        let (g, h) = zoh_pair(&Matrix::zeros(2, 2), &Matrix::identity(2), 0.5).unwrap();
        assert_eq!(g, Matrix::identity(2));
        assert!((&h - &Matrix::identity(2).scale(0.5)).max_abs() < 1e-15);

        let a = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let b = Matrix::column(&[0.0, 1.0]);
        let t = 0.3;
        let (_, h) = zoh_pair(&a, &b, t).unwrap();
        assert!((h[(0, 0)] - t * t / 2.0).abs() < 1e-15);
        assert!((h[(1, 0)] - t).abs() < 1e-15);
    }

    #[test]
    fn zoh_matches_quadrature() {
        let (a, b, h) = (example_a(), example_b(), 0.002);
        let (g, hm) = zoh_pair(&a, &b, h).unwrap();
        let quad = simpson(|s| &series_exp(&a, s, 20) * &b, h, 200);
        assert!((&hm - &quad).max_abs() < 1e-10);
        assert!((&g - &series_exp(&a, h, 20)).max_abs() < 1e-12);
    }

    #[test]
    fn input_integral_cases() {
        let b = example_b();
        let f = Matrix::from_rows(&[[0.3, -0.2]]).unwrap();
        let c = 1.7;
        let e0 = input_integral(&Matrix::zeros(2, 2), &b, c, &f, 0.1).unwrap();
        assert!((&e0 - &(&b * &f).scale(c * 0.1)).max_abs() < 1e-15);
        let ez = input_integral(&example_a(), &b, 0.0, &f, 0.1).unwrap();
        assert_eq!(ez.max_abs(), 0.0);

        let (a, h) = (example_a(), 0.002);
        let cbf = (&b * &f).scale(c);
        let e = input_integral(&a, &b, c, &f, h).unwrap();
        let quad = simpson(|s| &series_exp(&a, h - s, 20) * &cbf, h, 200);
        assert!((&e - &quad).max_abs() < 1e-10);
    }

    #[test]
    fn norm_integral_cases() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, -1.0]]).unwrap();
        assert_eq!(norm_integral(&example_a(), &m, 0.0).unwrap(), 0.0);
        let flat = norm_integral(&Matrix::zeros(2, 2), &m, 0.7).unwrap();
        assert!((flat - 0.7 * m.norm2()).abs() < 1e-14);
        assert!(matches!(norm_integral(&m, &m, -0.1), Err(MatError::NegativeDuration(_))));
    }

    #[test]
    fn norm_integral_matches_richardson_oracle() {
        let a = example_a();
        let b = example_b();
        let p = Matrix::from_rows(&[[0.5859, -0.1575], [-0.1575, 0.4274]]).unwrap();
        let f = (&b.transpose() * &p).scale(-1.0);
        let c = 1.0 / (2.0 - 2.0f64.sqrt());
        let m = (&b * &f).scale(c);
        let t = 0.014;
        let integrand = |s: f64| Matrix::from_vec(1, 1, alloc::vec![(&series_exp(&a, s, 20) * &m).norm2()]).unwrap();
        let coarse = simpson(integrand, t, 200)[(0, 0)];
        let fine = simpson(integrand, t, 400)[(0, 0)];
        let oracle = fine + (fine - coarse) / 15.0;
        let got = norm_integral(&a, &m, t).unwrap();
        assert!((got - oracle).abs() < 1e-8);
    }
}
