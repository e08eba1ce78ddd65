//! Continuous-time algebraic Riccati solvers for regulator and filter gain
//! synthesis.
//!
//! `solve_care` finds the stabilizing solution of
//!
//!   A' P + P A - P B R^-1 B' P + Q = 0
//!
//! by extracting the stable invariant subspace of the Hamiltonian
//! [[A, -B R^-1 B'], [-Q, -A']] with a scaled matrix-sign iteration, then
//! polishing with Newton defect-correction steps (each one a Lyapunov
//! solve) until the residual meets tolerance. Sizes here are small
//! (n <= 10), so dense O(n^3)-per-iteration methods are the right tool.
//!
//! `solve_filter_care` solves the dual (estimation) equation
//!
//!   A P + P A' + G Qn G' - P C' Rn^-1 C P = 0
//!
//! and returns the corresponding filter gain L = P C' Rn^-1.

use nalgebra::DMatrix;

use crate::linalg::{complex_rank, eigenvalues, rank, solve_lyapunov};
use crate::{Error, Result};

/// Relative singular-value threshold for the rank tests.
pub const RANK_TOL: f64 = 1e-9;
/// Required normalized residual of a converged solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Regulator Riccati problem data.
#[derive(Debug, Clone)]
pub struct CareProblem {
    /// State matrix, n x n.
    pub a: DMatrix<f64>,
    /// Input matrix, n x m.
    pub b: DMatrix<f64>,
    /// State weight, n x n symmetric positive semidefinite.
    pub q: DMatrix<f64>,
    /// Input weight, m x m symmetric positive definite.
    pub r: DMatrix<f64>,
}

/// Converged Riccati solution.
#[derive(Debug, Clone)]
pub struct CareSolution {
    /// Stabilizing solution, symmetric.
    pub p: DMatrix<f64>,
    /// Gain K = R^-1 B' P (regulator) or L' (filter dual).
    pub k: DMatrix<f64>,
    /// Frobenius residual normalized by max(1, ||Q||_F).
    pub residual: f64,
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let defect = (m - m.transpose()).norm();
    if defect > 1e-9 * m.norm().max(1.0) {
        return Err(Error::Riccati(format!("{name} is not symmetric (defect {defect:.3e})")));
    }
    Ok(())
}

fn care_residual(p: &CareProblem, sol: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let res = p.a.transpose() * sol + sol * &p.a - sol * g * sol + &p.q;
    res.norm() / p.q.norm().max(1.0)
}

/// Solves the regulator Riccati equation. Errors when the data is invalid,
/// (A, B) is not stabilizable, or the iteration cannot reach the residual
/// tolerance (e.g. Hamiltonian eigenvalues on the imaginary axis).
pub fn solve_care(problem: &CareProblem) -> Result<CareSolution> {
    let n = problem.a.nrows();
    let m = problem.b.ncols();
    if problem.a.ncols() != n || problem.b.nrows() != n {
        return Err(Error::Riccati("A/B dimension mismatch".into()));
    }
    if problem.q.nrows() != n || problem.q.ncols() != n {
        return Err(Error::Riccati("Q dimension mismatch".into()));
    }
    if problem.r.nrows() != m || problem.r.ncols() != m {
        return Err(Error::Riccati("R dimension mismatch".into()));
    }
    let all = [&problem.a, &problem.b, &problem.q, &problem.r];
    if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(Error::Riccati("non-finite entry in problem data".into()));
    }
    check_symmetric(&problem.q, "Q")?;
    check_symmetric(&problem.r, "R")?;

    // Q must be positive semidefinite.
    let q_sym = (&problem.q + problem.q.transpose()) * 0.5;
    let q_eigs = q_sym.symmetric_eigenvalues();
    let q_scale = problem.q.norm().max(1.0);
    if q_eigs.iter().any(|&e| e < -1e-10 * q_scale) {
        return Err(Error::Riccati("Q is not positive semidefinite".into()));
    }
    // R must be positive definite.
    let r_inv = problem
        .r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Riccati("R is not positive definite".into()))?
        .inverse();

    if !is_stabilizable(&problem.a, &problem.b, RANK_TOL)? {
        return Err(Error::Riccati("(A, B) is not stabilizable".into()));
    }

    let g = &problem.b * &r_inv * problem.b.transpose();

    // Hamiltonian sign-function iteration with determinant scaling.
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(&problem.a);
    z.view_mut((0, n), (n, n)).copy_from(&(-&g));
    z.view_mut((n, 0), (n, n)).copy_from(&(-&problem.q));
    z.view_mut((n, n), (n, n)).copy_from(&(-problem.a.transpose()));

    let mut converged = false;
    for _ in 0..120 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det == 0.0 {
            return Err(Error::Riccati(
                "Hamiltonian is singular; eigenvalues on the imaginary axis".into(),
            ));
        }
        let z_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Riccati("Hamiltonian inverse failed".into()))?;
        // Byers determinant scaling accelerates initial convergence.
        let c = det.abs().powf(-1.0 / (2.0 * n as f64));
        let next = (&z * c + z_inv / c) * 0.5;
        let delta = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if delta <= 1e-13 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Riccati("sign iteration did not converge".into()));
    }

    // Stable subspace is the graph of P: (Z + I) [I; P] = 0, giving the
    // overdetermined system [Z12; Z22 + I] P = -[Z11 + I; Z21].
    let z11 = z.view((0, 0), (n, n));
    let z12 = z.view((0, n), (n, n));
    let z21 = z.view((n, 0), (n, n));
    let z22 = z.view((n, n), (n, n));
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z12);
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(z22 + DMatrix::<f64>::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(z11 + DMatrix::<f64>::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-z21));
    let svd = lhs.svd(true, true);
    let mut p = svd
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::Riccati(format!("subspace extraction failed: {e}")))?;
    p = (&p + p.transpose()) * 0.5;

    // Newton defect correction: each step solves
    // (A - G P)' D + D (A - G P) = -residual(P).
    let target = 1e-11 * problem.q.norm().max(1.0);
    for _ in 0..30 {
        let res = problem.a.transpose() * &p + &p * &problem.a - &p * &g * &p + &problem.q;
        if res.norm() <= target {
            break;
        }
        let f_cl = &problem.a - &g * &p;
        let delta = solve_lyapunov(&f_cl, &(-res))?;
        p += delta;
        p = (&p + p.transpose()) * 0.5;
    }

    let residual = care_residual(problem, &p, &g);
    if residual > RESIDUAL_TOL {
        return Err(Error::Riccati(format!(
            "residual {residual:.3e} above tolerance {RESIDUAL_TOL:.1e}"
        )));
    }

    // The stabilizing solution is symmetric PSD and the closed loop must be
    // Hurwitz.
    let p_eigs = p.symmetric_eigenvalues();
    let p_scale = p.norm().max(1.0);
    if p_eigs.iter().any(|&e| e < -1e-10 * p_scale) {
        return Err(Error::Riccati("solution P is not positive semidefinite".into()));
    }
    let f_cl = &problem.a - &g * &p;
    let cl_eigs = eigenvalues(&f_cl)?;
    if let Some(bad) = cl_eigs.iter().find(|e| e.re >= 0.0) {
        return Err(Error::Riccati(format!(
            "closed loop not stable: eigenvalue {:.3e} + {:.3e}i",
            bad.re, bad.im
        )));
    }

    let k = &r_inv * problem.b.transpose() * &p;
    Ok(CareSolution { p, k, residual })
}

/// Solution of the filter (estimation) Riccati equation.
#[derive(Debug, Clone)]
pub struct FilterCareSolution {
    /// Estimation error covariance, symmetric.
    pub p: DMatrix<f64>,
    /// Filter gain L = P C' Rn^-1, n x p.
    pub l: DMatrix<f64>,
    /// Frobenius residual normalized by max(1, ||G Qn G'||_F).
    pub residual: f64,
}

/// Solves A P + P A' + G Qn G' - P C' Rn^-1 C P = 0 through the regulator
/// dual (A', C', G Qn G', Rn).
pub fn solve_filter_care(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    g: &DMatrix<f64>,
    qn: &DMatrix<f64>,
    rn: &DMatrix<f64>,
) -> Result<FilterCareSolution> {
    let process_noise = g * qn * g.transpose();
    let dual = CareProblem {
        a: a.transpose(),
        b: c.transpose(),
        q: process_noise,
        r: rn.clone(),
    };
    let sol = solve_care(&dual)?;
    let l = sol.k.transpose();
    Ok(FilterCareSolution {
        p: sol.p,
        l,
        residual: sol.residual,
    })
}

/// Kalman rank test of the controllability matrix [B, AB, ..., A^(n-1) B]
/// with a relative singular-value threshold.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> bool {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    rank(&ctrb, rel_tol) == n
}

/// Dual observability test on (A, C).
pub fn is_observable(a: &DMatrix<f64>, c: &DMatrix<f64>, rel_tol: f64) -> bool {
    is_controllable(&a.transpose(), &c.transpose(), rel_tol)
}

/// PBH stabilizability: every eigenvalue of A with non-negative real part
/// must keep [A - lambda I, B] at full row rank.
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> Result<bool> {
    let n = a.nrows();
    let m = b.ncols();
    let eigs = eigenvalues(a)?;
    for lam in eigs.iter() {
        if lam.re < -1e-9 * a.norm().max(1.0) {
            continue;
        }
        // Real embedding of [A - lambda I, B].
        let mut ar = DMatrix::zeros(n, n + m);
        ar.view_mut((0, 0), (n, n)).copy_from(a);
        for i in 0..n {
            ar[(i, i)] -= lam.re;
        }
        ar.view_mut((0, n), (n, m)).copy_from(b);
        let mut ai = DMatrix::zeros(n, n + m);
        for i in 0..n {
            ai[(i, i)] = -lam.im;
        }
        if complex_rank(&ar, &ai, rel_tol) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_problem() -> CareProblem {
        CareProblem {
            a: DMatrix::from_element(1, 1, 0.0),
            b: DMatrix::from_element(1, 1, 1.0),
            q: DMatrix::from_element(1, 1, 1.0),
            r: DMatrix::from_element(1, 1, 1.0),
        }
    }

    #[test]
    fn scalar_care_exact() {
        // a=0, b=q=r=1: p^2 = 1 -> p = 1, k = 1.
        let sol = solve_care(&scalar_problem()).unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.k[(0, 0)], 1.0, epsilon = 1e-12);
        assert!(sol.residual <= RESIDUAL_TOL);
    }

    #[test]
    fn double_integrator_closed_form() {
        // Known solution: P = [[sqrt(3), 1], [1, sqrt(3)]], K = [1, sqrt(3)].
        let p = CareProblem {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(1, 1),
        };
        let sol = solve_care(&p).unwrap();
        let s3 = 3.0f64.sqrt();
        assert_relative_eq!(sol.p[(0, 0)], s3, epsilon = 1e-9);
        assert_relative_eq!(sol.p[(0, 1)], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.p[(1, 1)], s3, epsilon = 1e-9);
        assert_relative_eq!(sol.k[(0, 0)], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.k[(0, 1)], s3, epsilon = 1e-9);
    }

    #[test]
    fn unstable_plant_is_stabilized() {
        let p = CareProblem {
            a: DMatrix::from_row_slice(3, 3, &[1.2, 1.0, 0.0, 0.0, 0.3, 1.0, -0.5, 0.0, -0.2]),
            b: DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
            q: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 0.1])),
            r: DMatrix::from_element(1, 1, 0.5),
        };
        let sol = solve_care(&p).unwrap();
        assert!(sol.residual <= RESIDUAL_TOL);
        let g = &p.b * p.r.clone().try_inverse().unwrap() * p.b.transpose();
        let cl = &p.a - g * &sol.p;
        for e in eigenvalues(&cl).unwrap() {
            assert!(e.re < 0.0, "closed-loop eigenvalue {e} not stable");
        }
        // P is symmetric positive definite here.
        for e in sol.p.symmetric_eigenvalues().iter() {
            assert!(*e > 0.0);
        }
    }

    #[test]
    fn scaling_q_and_r_scales_p_not_k() {
        let base = CareProblem {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.4]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.5]),
            q: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0])),
            r: DMatrix::from_element(1, 1, 2.0),
        };
        let sol1 = solve_care(&base).unwrap();
        let scaled = CareProblem {
            q: &base.q * 7.0,
            r: &base.r * 7.0,
            ..base.clone()
        };
        let sol2 = solve_care(&scaled).unwrap();
        assert_relative_eq!(sol2.k[(0, 0)], sol1.k[(0, 0)], max_relative = 1e-9);
        assert_relative_eq!(sol2.k[(0, 1)], sol1.k[(0, 1)], max_relative = 1e-9);
        assert_relative_eq!(sol2.p[(0, 0)], 7.0 * sol1.p[(0, 0)], max_relative = 1e-9);
    }

    #[test]
    fn rejects_invalid_problems() {
        // Non-PD R.
        let mut p = scalar_problem();
        p.r = DMatrix::from_element(1, 1, 0.0);
        assert!(solve_care(&p).is_err());
        // Negative-definite Q.
        let mut p = scalar_problem();
        p.q = DMatrix::from_element(1, 1, -1.0);
        assert!(solve_care(&p).is_err());
        // Unstabilizable: unstable mode with no input authority.
        let p = CareProblem {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(1, 1),
        };
        assert!(matches!(solve_care(&p), Err(Error::Riccati(_))));
    }

    #[test]
    fn filter_dual_matches_hand_solution() {
        // Scalar: a=0, c=1, g=1, qn=q, rn=r: p = sqrt(q r), l = sqrt(q/r).
        let a = DMatrix::from_element(1, 1, 0.0);
        let c = DMatrix::from_element(1, 1, 1.0);
        let g = DMatrix::from_element(1, 1, 1.0);
        let qn = DMatrix::from_element(1, 1, 4.0);
        let rn = DMatrix::from_element(1, 1, 0.25);
        let sol = solve_filter_care(&a, &c, &g, &qn, &rn).unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.l[(0, 0)], 4.0, epsilon = 1e-9);
    }

    #[test]
    fn controllability_and_observability_ranks() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(is_controllable(&a, &b, RANK_TOL));
        // Input into the first state cannot reach the second.
        let b2 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(!is_controllable(&a, &b2, RANK_TOL));
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(is_observable(&a, &c, RANK_TOL));
        let c2 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(!is_observable(&a, &c2, RANK_TOL));
    }

    #[test]
    fn stabilizable_despite_uncontrollable_stable_mode() {
        // Stable mode uncontrollable: still stabilizable.
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(!is_controllable(&a, &b, RANK_TOL));
        assert!(is_stabilizable(&a, &b, RANK_TOL).unwrap());
        // Flip: unstable mode uncontrollable.
        let b2 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(!is_stabilizable(&a, &b2, RANK_TOL).unwrap());
    }

    #[test]
    fn oscillatory_unstabilizable_pair_detected() {
        // Undamped oscillator with input orthogonal to both modes is
        // caught by the complex PBH test.
        let a = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            -4.0, 0.0, 0.0, 0.0,
            0.0, 0.0, -1.0, 0.0,
            0.0, 0.0, 0.0, -2.0,
        ]);
        let b = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 1.0, 1.0]);
        assert!(!is_stabilizable(&a, &b, RANK_TOL).unwrap());
        let b_ok = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 0.0, 0.0]);
        assert!(is_stabilizable(&a, &b_ok, RANK_TOL).unwrap());
    }
}
