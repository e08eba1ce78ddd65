//! Attitude representations and frame kinematics.
//!
//! Frames:
//!  - inertial {I}: launch-site fixed, x_i points up (away from Earth's
//!    center), y_i and z_i horizontal, right handed.
//!  - body {B}: x_b along the vehicle's longitudinal axis (nose forward),
//!    y_b and z_b transverse, right handed.
//!
//! Attitude is the 3-2-1 Euler angle triple lambda = (phi, theta, psi),
//! roll/pitch/yaw, with the body->inertial rotation
//!
//!   R(lambda) = Rz(psi) * Ry(theta) * Rx(phi)
//!
//! so a vertical vehicle (lambda = 0) has x_b aligned with x_i (up). The
//! parametrization is singular at theta = +-pi/2; constructors reject pitch
//! at or beyond the singularity and rate mappings enforce a configurable
//! guard margin.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Guard margin (rad) used by [`euler_rates`] when none is supplied.
pub const DEFAULT_SINGULARITY_MARGIN: f64 = 1e-3;

/// 3-2-1 Euler angle attitude, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    /// Roll about x_b, rad.
    pub phi: f64,
    /// Pitch about y, rad; |theta| < pi/2.
    pub theta: f64,
    /// Yaw about z, rad.
    pub psi: f64,
}

impl EulerAngles {
    /// Builds an attitude, rejecting non-finite angles and pitch at or
    /// beyond the +-pi/2 singularity.
    pub fn new(phi: f64, theta: f64, psi: f64) -> Result<Self> {
        if !(phi.is_finite() && theta.is_finite() && psi.is_finite()) {
            return Err(Error::Domain("non-finite Euler angle".into()));
        }
        if theta.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Singularity {
                theta,
                margin: 0.0,
            });
        }
        Ok(Self { phi, theta, psi })
    }

    /// Vertical attitude, lambda = 0.
    pub fn zero() -> Self {
        Self {
            phi: 0.0,
            theta: 0.0,
            psi: 0.0,
        }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.phi, self.theta, self.psi)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Result<Self> {
        Self::new(v.x, v.y, v.z)
    }
}

/// Body->inertial rotation matrix R(lambda) = Rz(psi) Ry(theta) Rx(phi).
pub fn rotation_from_euler(lambda: &EulerAngles) -> Matrix3<f64> {
    let (sph, cph) = lambda.phi.sin_cos();
    let (sth, cth) = lambda.theta.sin_cos();
    let (sps, cps) = lambda.psi.sin_cos();
    Matrix3::new(
        cps * cth,
        cps * sth * sph - sps * cph,
        cps * sth * cph + sps * sph,
        sps * cth,
        sps * sth * sph + cps * cph,
        sps * sth * cph - cps * sph,
        -sth,
        cth * sph,
        cth * cph,
    )
}

/// Skew-symmetric cross-product matrix: skew(a) * b == a x b.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Euler-rate mapping matrix E(lambda) with lambda_dot = E(lambda) * omega.
///
/// Shared by the attitude kinematics and the attitude filter model; callers
/// are responsible for the singularity guard.
pub fn euler_rate_matrix(lambda: &EulerAngles) -> Matrix3<f64> {
    let (sph, cph) = lambda.phi.sin_cos();
    let cth = lambda.theta.cos();
    let tth = lambda.theta.tan();
    Matrix3::new(
        1.0,
        sph * tth,
        cph * tth,
        0.0,
        cph,
        -sph,
        0.0,
        sph / cth,
        cph / cth,
    )
}

/// Maps body angular velocity to Euler angle rates:
///
///   phi_dot   = p + (q sin(phi) + r cos(phi)) tan(theta)
///   theta_dot = q cos(phi) - r sin(phi)
///   psi_dot   = (q sin(phi) + r cos(phi)) / cos(theta)
///
/// Errors when |theta| is within `margin` of pi/2, where tan(theta) and
/// 1/cos(theta) blow up.
pub fn euler_rates(lambda: &EulerAngles, omega: &Vector3<f64>, margin: f64) -> Result<Vector3<f64>> {
    if lambda.theta.abs() >= std::f64::consts::FRAC_PI_2 - margin {
        return Err(Error::Singularity {
            theta: lambda.theta,
            margin,
        });
    }
    Ok(euler_rate_matrix(lambda) * omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn rx(a: f64) -> Matrix3<f64> {
        let (s, c) = a.sin_cos();
        Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
    }

    fn ry(a: f64) -> Matrix3<f64> {
        let (s, c) = a.sin_cos();
        Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
    }

    fn rz(a: f64) -> Matrix3<f64> {
        let (s, c) = a.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn identity_at_zero_attitude() {
        let r = rotation_from_euler(&EulerAngles::zero());
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn matches_elementary_rotation_product() {
        let lam = EulerAngles::new(0.3, -0.7, 1.9).unwrap();
        let want = rz(lam.psi) * ry(lam.theta) * rx(lam.phi);
        assert_relative_eq!(rotation_from_euler(&lam), want, epsilon = 1e-14);
    }

    #[test]
    fn pure_yaw_rotates_body_x_to_inertial_y() {
        let lam = EulerAngles::new(0.0, 0.0, FRAC_PI_2).unwrap();
        let r = rotation_from_euler(&lam);
        let xi = r * Vector3::x();
        assert_relative_eq!(xi, Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_singular_pitch() {
        assert!(EulerAngles::new(0.0, FRAC_PI_2, 0.0).is_err());
        assert!(EulerAngles::new(0.0, -FRAC_PI_2 - 0.1, 0.0).is_err());
        assert!(EulerAngles::new(0.0, f64::NAN, 0.0).is_err());
        assert!(EulerAngles::new(0.0, FRAC_PI_2 - 1e-6, 0.0).is_ok());
    }

    #[test]
    fn skew_reproduces_cross_product() {
        let a = Vector3::new(0.3, -1.2, 2.5);
        let b = Vector3::new(-0.7, 0.4, 1.1);
        assert_relative_eq!(skew(&a) * b, a.cross(&b), epsilon = 1e-15);
        // Antisymmetry.
        assert_relative_eq!(skew(&a).transpose(), -skew(&a), epsilon = 0.0);
    }

    #[test]
    fn euler_rates_guard_margin() {
        let omega = Vector3::new(0.1, 0.2, -0.3);
        let near = EulerAngles::new(0.0, FRAC_PI_2 - 5e-4, 0.0).unwrap();
        assert!(euler_rates(&near, &omega, DEFAULT_SINGULARITY_MARGIN).is_err());
        let ok = EulerAngles::new(0.0, FRAC_PI_2 - 2e-3, 0.0).unwrap();
        assert!(euler_rates(&ok, &omega, DEFAULT_SINGULARITY_MARGIN).is_ok());
    }

    #[test]
    fn euler_rates_match_component_form() {
        let lam = EulerAngles::new(0.4, 0.8, -1.1).unwrap();
        let omega = Vector3::new(0.05, -0.3, 0.2);
        let (p, q, r) = (omega.x, omega.y, omega.z);
        let want = Vector3::new(
            p + (q * lam.phi.sin() + r * lam.phi.cos()) * lam.theta.tan(),
            q * lam.phi.cos() - r * lam.phi.sin(),
            (q * lam.phi.sin() + r * lam.phi.cos()) / lam.theta.cos(),
        );
        let got = euler_rates(&lam, &omega, DEFAULT_SINGULARITY_MARGIN).unwrap();
        assert_relative_eq!(got, want, epsilon = 1e-15);
    }

    /// d/dt R(lambda(t)) = R * skew(omega) when lambda_dot = E(lambda) omega.
    /// Central-difference error in h decays quadratically.
    #[test]
    fn rotation_derivative_consistent_with_kinematics() {
        let lam = EulerAngles::new(0.3, 0.5, -0.9).unwrap();
        let omega = Vector3::new(0.4, -0.2, 0.7);
        let lrate = euler_rates(&lam, &omega, DEFAULT_SINGULARITY_MARGIN).unwrap();
        let analytic = rotation_from_euler(&lam) * skew(&omega);

        let fd = |h: f64| -> f64 {
            let lp = EulerAngles::from_vector(&(lam.as_vector() + lrate * h)).unwrap();
            let lm = EulerAngles::from_vector(&(lam.as_vector() - lrate * h)).unwrap();
            let diff = (rotation_from_euler(&lp) - rotation_from_euler(&lm)) / (2.0 * h);
            (diff - analytic).norm()
        };
        let e1 = fd(1e-3);
        let e2 = fd(5e-4);
        assert!(e1 < 1e-5, "central difference error too large: {e1}");
        // Quadratic decay: halving h should quarter the error.
        assert!(e2 < e1 / 3.0, "error decay not quadratic: {e1} -> {e2}");
    }

    proptest! {
        /// R is orthonormal with unit determinant for any valid attitude.
        #[test]
        fn rotation_is_special_orthogonal(
            phi in -3.2f64..3.2,
            theta in -1.55f64..1.55,
            psi in -3.2f64..3.2,
        ) {
            let lam = EulerAngles::new(phi, theta, psi).unwrap();
            let r = rotation_from_euler(&lam);
            let err = (r.transpose() * r - Matrix3::identity()).norm();
            prop_assert!(err < 1e-12, "orthonormality defect {err}");
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        /// Rotation preserves vector norms.
        #[test]
        fn rotation_preserves_norm(
            phi in -3.0f64..3.0,
            theta in -1.5f64..1.5,
            psi in -3.0f64..3.0,
            x in -10.0f64..10.0,
            y in -10.0f64..10.0,
            z in -10.0f64..10.0,
        ) {
            let lam = EulerAngles::new(phi, theta, psi).unwrap();
            let v = Vector3::new(x, y, z);
            let rv = rotation_from_euler(&lam) * v;
            prop_assert!((rv.norm() - v.norm()).abs() < 1e-10 * (1.0 + v.norm()));
        }

        /// E(lambda) inverts the body-rate map: omega -> rates -> omega.
        #[test]
        fn euler_rate_matrix_invertible_inside_guard(
            phi in -3.0f64..3.0,
            theta in -1.4f64..1.4,
            psi in -3.0f64..3.0,
            p in -2.0f64..2.0,
            q in -2.0f64..2.0,
            r in -2.0f64..2.0,
        ) {
            let lam = EulerAngles::new(phi, theta, psi).unwrap();
            let omega = Vector3::new(p, q, r);
            let e = euler_rate_matrix(&lam);
            let back = e.try_inverse().unwrap() * (e * omega);
            prop_assert!((back - omega).norm() < 1e-9);
        }
    }
}
