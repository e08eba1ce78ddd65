//! Sensor models and complementary navigation filters.
//!
//! The attitude filter fuses Euler-angle fixes with gyro rates and tracks
//! the gyro bias; the position filter fuses satnav position fixes with
//! accelerometer data rotated through the attitude estimate and tracks
//! the accelerometer bias. Both run at the guidance rate using the exact
//! zero-order-hold discretization of their error dynamics, so the update
//! is not a source of integration error on top of the sample-and-hold
//! itself.
//!
//! Convention: the modeled accelerometer reports the full kinematic body
//! acceleration dv/dt + omega x v (the total force over mass, gravity
//! included), which is what the position filter's velocity channel
//! integrates. A physical instrument would report specific force; the
//! difference is deliberate and documented here.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::frames::{euler_rate_matrix, rotation_from_euler, EulerAngles};
use crate::linalg::zoh_discretize;
use crate::riccati::solve_filter_care;
use crate::vehicle::RigidBodyState;
use crate::{Error, Result};

/// Measurement noise and bias model of the sensor suite. All values are
/// one-sigma; biases start at the given constant offset on every axis and
/// random-walk with the given intensities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSuiteConfig {
    /// Euler-angle fix noise, rad.
    pub euler_noise: f64,
    /// Gyro rate noise, rad/s.
    pub gyro_noise: f64,
    /// Accelerometer noise, m/s^2.
    pub accel_noise: f64,
    /// Position fix noise, m.
    pub gnss_noise: f64,
    /// Initial gyro bias per axis, rad/s.
    pub gyro_bias: f64,
    /// Initial accelerometer bias per axis, m/s^2.
    pub accel_bias: f64,
    /// Gyro bias random-walk intensity, rad/s per sqrt(s).
    pub gyro_bias_walk: f64,
    /// Accelerometer bias random-walk intensity, m/s^2 per sqrt(s).
    pub accel_bias_walk: f64,
}

impl Default for SensorSuiteConfig {
    fn default() -> Self {
        SensorSuiteConfig {
            euler_noise: 0.05_f64.to_radians(),
            gyro_noise: 0.001,
            accel_noise: 0.05,
            gnss_noise: 1.5,
            gyro_bias: 0.5_f64.to_radians(),
            accel_bias: 0.1,
            gyro_bias_walk: 1e-5,
            accel_bias_walk: 1e-4,
        }
    }
}

impl SensorSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.euler_noise,
            self.gyro_noise,
            self.accel_noise,
            self.gnss_noise,
            self.gyro_bias_walk,
            self.accel_bias_walk,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("sensor noise values must be non-negative".into()));
        }
        if !self.gyro_bias.is_finite() || !self.accel_bias.is_finite() {
            return Err(Error::Config("sensor biases must be finite".into()));
        }
        Ok(())
    }

    /// Copy with every noise and bias zeroed; measurements then report
    /// truth exactly.
    pub fn noiseless() -> Self {
        SensorSuiteConfig {
            euler_noise: 0.0,
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gnss_noise: 0.0,
            gyro_bias: 0.0,
            accel_bias: 0.0,
            gyro_bias_walk: 0.0,
            accel_bias_walk: 0.0,
        }
    }
}

/// One synchronous reading of the full suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    /// Euler-angle fix, rad.
    pub euler: Vector3<f64>,
    /// Body rates, rad/s.
    pub gyro: Vector3<f64>,
    /// Kinematic body acceleration, m/s^2.
    pub accel: Vector3<f64>,
    /// Inertial position fix, m.
    pub position: Vector3<f64>,
}

/// Evolving sensor errors plus the noise stream.
#[derive(Debug, Clone)]
pub struct SensorSuite {
    cfg: SensorSuiteConfig,
    gyro_bias: Vector3<f64>,
    accel_bias: Vector3<f64>,
    rng: ChaCha8Rng,
}

impl SensorSuite {
    pub fn new(cfg: SensorSuiteConfig, seed: u64) -> Self {
        let b = cfg.gyro_bias;
        let a = cfg.accel_bias;
        SensorSuite {
            cfg,
            gyro_bias: Vector3::new(b, b, b),
            accel_bias: Vector3::new(a, a, a),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn gyro_bias(&self) -> Vector3<f64> {
        self.gyro_bias
    }

    pub fn accel_bias(&self) -> Vector3<f64> {
        self.accel_bias
    }

    fn gauss3(&mut self) -> Vector3<f64> {
        Vector3::new(
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
        )
    }

    /// Advances the bias walks over `dt` and reads every instrument.
    /// `accel_body` is the kinematic body acceleration of the truth
    /// state. Draw order is fixed for reproducibility.
    pub fn sample(
        &mut self,
        truth: &RigidBodyState,
        accel_body: &Vector3<f64>,
        dt: f64,
    ) -> SensorSample {
        let sq = dt.sqrt();
        let gyro_walk = self.gauss3() * (self.cfg.gyro_bias_walk * sq);
        self.gyro_bias += gyro_walk;
        let accel_walk = self.gauss3() * (self.cfg.accel_bias_walk * sq);
        self.accel_bias += accel_walk;
        let euler = truth.attitude.as_vector() + self.gauss3() * self.cfg.euler_noise;
        let gyro = truth.omega + self.gyro_bias + self.gauss3() * self.cfg.gyro_noise;
        let accel = accel_body + self.accel_bias + self.gauss3() * self.cfg.accel_noise;
        let position = truth.position + self.gauss3() * self.cfg.gnss_noise;
        SensorSample {
            euler,
            gyro,
            accel,
            position,
        }
    }
}

/// Fixed attitude-filter gain blocks: innovation into the attitude and
/// bias channels. The flown values place every error pole at
/// s^2 + 0.5 s + 1 per axis.
pub const ATTITUDE_GAIN_ANGLE: f64 = 0.5;
pub const ATTITUDE_GAIN_BIAS: f64 = -1.0;

/// Attitude complementary filter: estimates the Euler angles and the
/// gyro bias from angle fixes and rates.
#[derive(Debug, Clone)]
pub struct AttitudeFilter {
    pub attitude: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    l1: Matrix3<f64>,
    l2: Matrix3<f64>,
}

impl AttitudeFilter {
    pub fn new(initial_attitude: Vector3<f64>) -> Self {
        AttitudeFilter::with_gains(
            initial_attitude,
            Matrix3::identity() * ATTITUDE_GAIN_ANGLE,
            Matrix3::identity() * ATTITUDE_GAIN_BIAS,
        )
    }

    pub fn with_gains(initial_attitude: Vector3<f64>, l1: Matrix3<f64>, l2: Matrix3<f64>) -> Self {
        AttitudeFilter {
            attitude: initial_attitude,
            gyro_bias: Vector3::zeros(),
            l1,
            l2,
        }
    }

    pub fn estimate(&self) -> Result<EulerAngles> {
        EulerAngles::new(self.attitude.x, self.attitude.y, self.attitude.z)
    }

    /// Bias-corrected body rates.
    pub fn rate_estimate(&self, measured_rate: &Vector3<f64>) -> Vector3<f64> {
        measured_rate - self.gyro_bias
    }

    /// Continuous-time derivative of (attitude, bias) under the given
    /// measurements. This is the model the discrete update holds over a
    /// sample period; the verification harness integrates it directly.
    pub fn continuous_dynamics(
        attitude: &Vector3<f64>,
        gyro_bias: &Vector3<f64>,
        l1: &Matrix3<f64>,
        l2: &Matrix3<f64>,
        measured_attitude: &Vector3<f64>,
        measured_rate: &Vector3<f64>,
    ) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let meas = EulerAngles::new(measured_attitude.x, measured_attitude.y, measured_attitude.z)?;
        let e = euler_rate_matrix(&meas);
        let innovation = measured_attitude - attitude;
        Ok((
            e * (measured_rate - gyro_bias) + l1 * innovation,
            l2 * innovation,
        ))
    }

    pub fn gains(&self) -> (Matrix3<f64>, Matrix3<f64>) {
        (self.l1, self.l2)
    }

    /// One filter step with the measurements held over `dt`, advanced by
    /// the exact matrix exponential of the held dynamics.
    pub fn update(
        &mut self,
        measured_attitude: &Vector3<f64>,
        measured_rate: &Vector3<f64>,
        dt: f64,
    ) -> Result<()> {
        let meas = EulerAngles::new(measured_attitude.x, measured_attitude.y, measured_attitude.z)?;
        let e = euler_rate_matrix(&meas);

        // x = (attitude, bias); closed loop (F - L C) with held inputs
        // (rates, angle fix).
        let mut f = DMatrix::zeros(6, 6);
        f.view_mut((0, 3), (3, 3)).copy_from(&(-e));
        for i in 0..3 {
            for j in 0..3 {
                f[(i, j)] -= self.l1[(i, j)];
                f[(i + 3, j)] -= self.l2[(i, j)];
            }
        }
        let mut b = DMatrix::zeros(6, 6);
        b.view_mut((0, 0), (3, 3)).copy_from(&e);
        b.view_mut((0, 3), (3, 3)).copy_from(&self.l1);
        b.view_mut((3, 3), (3, 3)).copy_from(&self.l2);

        let (ad, bd) = zoh_discretize(&f, &b, dt);
        let mut x = DMatrix::zeros(6, 1);
        x.view_mut((0, 0), (3, 1)).copy_from(&self.attitude);
        x.view_mut((3, 0), (3, 1)).copy_from(&self.gyro_bias);
        let mut u = DMatrix::zeros(6, 1);
        u.view_mut((0, 0), (3, 1)).copy_from(measured_rate);
        u.view_mut((3, 0), (3, 1)).copy_from(measured_attitude);
        let next = ad * x + bd * u;
        self.attitude = Vector3::new(next[(0, 0)], next[(1, 0)], next[(2, 0)]);
        self.gyro_bias = Vector3::new(next[(3, 0)], next[(4, 0)], next[(5, 0)]);
        Ok(())
    }
}

/// Fixed position-filter gain blocks; the bias block is scaled by the
/// transposed attitude rotation at run time. Error poles sit at
/// s^3 + s^2 + s + 0.5 per axis.
pub const POSITION_GAIN_POSITION: f64 = 1.0;
pub const POSITION_GAIN_VELOCITY: f64 = 1.0;
pub const POSITION_GAIN_BIAS: f64 = -0.5;

/// Position complementary filter: estimates inertial position and
/// velocity plus the accelerometer bias.
#[derive(Debug, Clone)]
pub struct PositionFilter {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
    l1: Matrix3<f64>,
    l2: Matrix3<f64>,
    l3: Matrix3<f64>,
}

impl PositionFilter {
    pub fn new(initial_position: Vector3<f64>, initial_velocity: Vector3<f64>) -> Self {
        PositionFilter::with_gains(
            initial_position,
            initial_velocity,
            Matrix3::identity() * POSITION_GAIN_POSITION,
            Matrix3::identity() * POSITION_GAIN_VELOCITY,
            Matrix3::identity() * POSITION_GAIN_BIAS,
        )
    }

    pub fn with_gains(
        initial_position: Vector3<f64>,
        initial_velocity: Vector3<f64>,
        l1: Matrix3<f64>,
        l2: Matrix3<f64>,
        l3: Matrix3<f64>,
    ) -> Self {
        PositionFilter {
            position: initial_position,
            velocity: initial_velocity,
            accel_bias: Vector3::zeros(),
            l1,
            l2,
            l3,
        }
    }

    pub fn gains(&self) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
        (self.l1, self.l2, self.l3)
    }

    /// Continuous-time derivative of (position, velocity, bias); the
    /// bias gain acts through the transposed attitude rotation.
    #[allow(clippy::too_many_arguments)]
    pub fn continuous_dynamics(
        position: &Vector3<f64>,
        velocity: &Vector3<f64>,
        accel_bias: &Vector3<f64>,
        l1: &Matrix3<f64>,
        l2: &Matrix3<f64>,
        l3: &Matrix3<f64>,
        attitude_estimate: &EulerAngles,
        measured_position: &Vector3<f64>,
        measured_accel: &Vector3<f64>,
    ) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let r = rotation_from_euler(attitude_estimate);
        let innovation = measured_position - position;
        (
            velocity + l1 * innovation,
            r * (measured_accel - accel_bias) + l2 * innovation,
            l3 * r.transpose() * innovation,
        )
    }

    /// One filter step with measurements and the attitude estimate held
    /// over `dt`, advanced by the exact matrix exponential.
    pub fn update(
        &mut self,
        measured_position: &Vector3<f64>,
        measured_accel: &Vector3<f64>,
        attitude_estimate: &EulerAngles,
        dt: f64,
    ) {
        let r = rotation_from_euler(attitude_estimate);
        let l3r = self.l3 * r.transpose();

        // x = (position, velocity, bias), inputs (accel, position fix).
        let mut f = DMatrix::zeros(9, 9);
        for i in 0..3 {
            f[(i, i + 3)] = 1.0;
        }
        f.view_mut((3, 6), (3, 3)).copy_from(&(-r));
        for i in 0..3 {
            for j in 0..3 {
                f[(i, j)] -= self.l1[(i, j)];
                f[(i + 3, j)] -= self.l2[(i, j)];
                f[(i + 6, j)] -= l3r[(i, j)];
            }
        }
        let mut b = DMatrix::zeros(9, 6);
        b.view_mut((3, 0), (3, 3)).copy_from(&r);
        b.view_mut((0, 3), (3, 3)).copy_from(&self.l1);
        b.view_mut((3, 3), (3, 3)).copy_from(&self.l2);
        b.view_mut((6, 3), (3, 3)).copy_from(&l3r);

        let (ad, bd) = zoh_discretize(&f, &b, dt);
        let mut x = DMatrix::zeros(9, 1);
        x.view_mut((0, 0), (3, 1)).copy_from(&self.position);
        x.view_mut((3, 0), (3, 1)).copy_from(&self.velocity);
        x.view_mut((6, 0), (3, 1)).copy_from(&self.accel_bias);
        let mut u = DMatrix::zeros(6, 1);
        u.view_mut((0, 0), (3, 1)).copy_from(measured_accel);
        u.view_mut((3, 0), (3, 1)).copy_from(measured_position);
        let next = ad * x + bd * u;
        self.position = Vector3::new(next[(0, 0)], next[(1, 0)], next[(2, 0)]);
        self.velocity = Vector3::new(next[(3, 0)], next[(4, 0)], next[(5, 0)]);
        self.accel_bias = Vector3::new(next[(6, 0)], next[(7, 0)], next[(8, 0)]);
    }
}

/// Gains produced by [`design_filter_gains`].
#[derive(Debug, Clone)]
pub struct DesignedFilterGains {
    pub attitude_l1: Matrix3<f64>,
    pub attitude_l2: Matrix3<f64>,
    pub position_l1: Matrix3<f64>,
    pub position_l2: Matrix3<f64>,
    pub position_l3: Matrix3<f64>,
    pub attitude_covariance: DMatrix<f64>,
    pub position_covariance: DMatrix<f64>,
}

/// Recomputes both filter gains as stationary estimation Riccati
/// solutions at the vertical reference attitude.
///
/// The flown constants are a pole-placement choice; they are not the
/// Riccati gains of any positive-semidefinite noise model (their bias
/// blocks violate the covariance structure), so this function will not
/// reproduce them. It exists to re-derive statistically weighted gains
/// from a sensor budget.
pub fn design_filter_gains(cfg: &SensorSuiteConfig) -> Result<DesignedFilterGains> {
    cfg.validate()?;
    for (name, v) in [
        ("euler_noise", cfg.euler_noise),
        ("gyro_noise", cfg.gyro_noise),
        ("gyro_bias_walk", cfg.gyro_bias_walk),
        ("accel_noise", cfg.accel_noise),
        ("gnss_noise", cfg.gnss_noise),
        ("accel_bias_walk", cfg.accel_bias_walk),
    ] {
        if v <= 0.0 {
            return Err(Error::Config(format!(
                "{name} must be positive to design filter gains"
            )));
        }
    }

    // Attitude: states (angles, gyro bias), E = I at vertical.
    let mut a = DMatrix::zeros(6, 6);
    for i in 0..3 {
        a[(i, i + 3)] = -1.0;
    }
    let mut c = DMatrix::zeros(3, 6);
    for i in 0..3 {
        c[(i, i)] = 1.0;
    }
    let g = DMatrix::identity(6, 6);
    let mut qn = DMatrix::zeros(6, 6);
    for i in 0..3 {
        qn[(i, i)] = cfg.gyro_noise * cfg.gyro_noise;
        qn[(i + 3, i + 3)] = cfg.gyro_bias_walk * cfg.gyro_bias_walk;
    }
    let rn = DMatrix::identity(3, 3) * (cfg.euler_noise * cfg.euler_noise);
    let att = solve_filter_care(&a, &c, &g, &qn, &rn)?;

    // Position: states (position, velocity, accel bias), R = I at
    // vertical.
    let mut a = DMatrix::zeros(9, 9);
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
        a[(i + 3, i + 6)] = -1.0;
    }
    let mut c = DMatrix::zeros(3, 9);
    for i in 0..3 {
        c[(i, i)] = 1.0;
    }
    let g = DMatrix::identity(9, 9);
    let mut qn = DMatrix::zeros(9, 9);
    for i in 0..3 {
        qn[(i + 3, i + 3)] = cfg.accel_noise * cfg.accel_noise;
        qn[(i + 6, i + 6)] = cfg.accel_bias_walk * cfg.accel_bias_walk;
    }
    let rn = DMatrix::identity(3, 3) * (cfg.gnss_noise * cfg.gnss_noise);
    let pos = solve_filter_care(&a, &c, &g, &qn, &rn)?;

    let block = |m: &DMatrix<f64>, r0: usize| {
        Matrix3::from_fn(|i, j| m[(r0 + i, j)])
    };
    Ok(DesignedFilterGains {
        attitude_l1: block(&att.l, 0),
        attitude_l2: block(&att.l, 3),
        position_l1: block(&pos.l, 0),
        position_l2: block(&pos.l, 3),
        position_l3: block(&pos.l, 6),
        attitude_covariance: att.p,
        position_covariance: pos.p,
    })
}
