//! Small dense linear-algebra helpers shared by the gust filters, the
//! Riccati solver, and the navigation filter discretization.

use nalgebra::{Complex, DMatrix, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Eigenvalues of a general real matrix.
///
/// The plain QR iteration can stall on defective spectra (e.g. nilpotent
/// blocks, which several design matrices here contain), so this runs a
/// bounded iteration and, on failure, retries under deterministic random
/// orthogonal similarity transforms that break the stalling structure
/// without moving the spectrum.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    assert_eq!(m.ncols(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(schur) = Schur::try_new(m.clone(), 1e-13, 2000) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0e16);
    for _ in 0..4 {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        let q = g.qr().q();
        let rotated = q.transpose() * m * &q;
        if let Some(schur) = Schur::try_new(rotated, 1e-13, 2000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::Domain(
        "eigenvalue iteration did not converge".into(),
    ))
}

/// Largest real part over the spectrum of a general real matrix.
pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Exact zero-order-hold discretization of x_dot = A x + B u over `dt`:
/// returns (Ad, Bd) with x+ = Ad x + Bd u for u held constant, computed from
/// the exponential of the augmented matrix [[A, B], [0, 0]].
pub fn zoh_discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    (ad, bd)
}

/// Discretizes continuous white process noise of intensity Qc driving
/// x_dot = A x + w over `dt` (Van Loan): returns (Ad, Qd) with
/// Qd = integral_0^dt exp(A s) Qc exp(A' s) ds.
pub fn van_loan_discretize(
    a: &DMatrix<f64>,
    qc: &DMatrix<f64>,
    dt: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(qc.nrows(), n);
    assert_eq!(qc.ncols(), n);
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    aug.view_mut((0, n), (n, n)).copy_from(&(qc * dt));
    aug.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let e = aug.exp();
    let ad = e.view((n, n), (n, n)).transpose().into_owned();
    let qd = &ad * e.view((0, n), (n, n));
    // Symmetrize away roundoff.
    let qd = (&qd + qd.transpose()) * 0.5;
    (ad, qd)
}

/// Solves the continuous Lyapunov equation F' X + X F = W for X via the
/// Kronecker-product linearization. Intended for the small systems used
/// here (n <= 10); cost is O(n^6).
pub fn solve_lyapunov(f: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    assert_eq!(f.ncols(), n);
    assert_eq!(w.nrows(), n);
    assert_eq!(w.ncols(), n);
    // vec(F' X + X F) = (I kron F' + F' kron I) vec(X), column-major vec.
    let ft = f.transpose();
    let mut m = DMatrix::zeros(n * n, n * n);
    for col in 0..n {
        for row in 0..n {
            let ri = col * n + row;
            // I kron F': block-diagonal F' acting within each column.
            for k in 0..n {
                m[(ri, col * n + k)] += ft[(row, k)];
            }
            // F' kron I: couples columns, X F term.
            for k in 0..n {
                m[(ri, k * n + row)] += f[(k, col)];
            }
        }
    }
    let rhs = DMatrix::from_column_slice(n * n, 1, w.as_slice());
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Riccati("singular Lyapunov operator".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Numerical rank with a relative singular-value threshold.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Rank of the complex matrix (Ar + i Ai) computed through its real
/// embedding [[Ar, -Ai], [Ai, Ar]], whose real rank is twice the complex
/// rank.
pub fn complex_rank(ar: &DMatrix<f64>, ai: &DMatrix<f64>, rel_tol: f64) -> usize {
    let (r, c) = (ar.nrows(), ar.ncols());
    assert_eq!((ai.nrows(), ai.ncols()), (r, c));
    let mut emb = DMatrix::zeros(2 * r, 2 * c);
    emb.view_mut((0, 0), (r, c)).copy_from(ar);
    emb.view_mut((0, c), (r, c)).copy_from(&(-ai));
    emb.view_mut((r, 0), (r, c)).copy_from(ai);
    emb.view_mut((r, c), (r, c)).copy_from(ar);
    rank(&emb, rel_tol) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zoh_matches_scalar_lag() {
        // x_dot = -x/tau + u/tau: Ad = exp(-dt/tau), Bd = 1 - exp(-dt/tau).
        let tau = 0.02;
        let a = DMatrix::from_element(1, 1, -1.0 / tau);
        let b = DMatrix::from_element(1, 1, 1.0 / tau);
        let (ad, bd) = zoh_discretize(&a, &b, 0.001);
        let want = (-0.001f64 / tau).exp();
        assert_relative_eq!(ad[(0, 0)], want, epsilon = 1e-14);
        assert_relative_eq!(bd[(0, 0)], 1.0 - want, epsilon = 1e-14);
    }

    #[test]
    fn zoh_double_integrator() {
        // x_dot = v, v_dot = u: exact Ad = [[1, dt], [0, 1]],
        // Bd = [dt^2/2, dt].
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let dt = 0.25;
        let (ad, bd) = zoh_discretize(&a, &b, dt);
        assert_relative_eq!(ad[(0, 1)], dt, epsilon = 1e-14);
        assert_relative_eq!(bd[(0, 0)], dt * dt / 2.0, epsilon = 1e-14);
        assert_relative_eq!(bd[(1, 0)], dt, epsilon = 1e-14);
    }

    #[test]
    fn van_loan_scalar_ou_variance() {
        // Ornstein-Uhlenbeck x_dot = -x/T + w, intensity q: the exact
        // one-step noise variance is (qT/2)(1 - exp(-2 dt / T)).
        let t = 0.5;
        let q = 3.0;
        let dt = 0.01;
        let a = DMatrix::from_element(1, 1, -1.0 / t);
        let qc = DMatrix::from_element(1, 1, q);
        let (ad, qd) = van_loan_discretize(&a, &qc, dt);
        assert_relative_eq!(ad[(0, 0)], (-dt / t).exp(), epsilon = 1e-13);
        let want = q * t / 2.0 * (1.0 - (-2.0 * dt / t).exp());
        assert_relative_eq!(qd[(0, 0)], want, epsilon = 1e-13);
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let f = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.0, -0.5, -2.0, 1.0, 0.2, 0.0, -3.0]);
        let w = DMatrix::from_row_slice(3, 3, &[-2.0, 0.1, 0.3, 0.1, -1.0, 0.0, 0.3, 0.0, -4.0]);
        let x = solve_lyapunov(&f, &w).unwrap();
        let resid = f.transpose() * &x + &x * &f - &w;
        assert!(resid.norm() < 1e-12, "residual {}", resid.norm());
    }

    #[test]
    fn lyapunov_known_scalar() {
        // f x + x f = w with f = -2: x = w / (2 f) = -w/4.
        let f = DMatrix::from_element(1, 1, -2.0);
        let w = DMatrix::from_element(1, 1, 1.0);
        let x = solve_lyapunov(&f, &w).unwrap();
        assert_relative_eq!(x[(0, 0)], -0.25, epsilon = 1e-14);
    }

    #[test]
    fn rank_thresholds() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]);
        assert_eq!(rank(&m, 1e-9), 1);
        assert_eq!(rank(&m, 1e-15), 2);
    }

    #[test]
    fn complex_rank_drops_at_eigenvalue() {
        // A = [[0, 1], [-1, 0]] has eigenvalues +-i; A - iI is singular.
        let ar = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ai = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert_eq!(complex_rank(&ar, &ai, 1e-9), 1);
        let ai_off = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -0.5]);
        assert_eq!(complex_rank(&ar, &ai_off, 1e-9), 2);
    }
}
