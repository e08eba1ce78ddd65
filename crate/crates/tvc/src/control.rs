//! Gain synthesis and the flight control law.
//!
//! Synthesis augments each decoupled plane with an attitude-tracking
//! integrator, solves the regulator Riccati equation per operating point,
//! and schedules the resulting gains on altitude. The flown law is
//! partial-state feedback: velocity perturbations are unmeasured and
//! their gain column is dropped, so every node is re-checked for closed
//! loop stability with the truncated gain, not just the optimal one.
//!
//! The axial velocity state never enters the design problem. On the
//! nominal it is uncontrollable from the gimbal and carries no weight,
//! which would put the Riccati Hamiltonian exactly on the imaginary
//! axis; its gain would be discarded by the partial feedback anyway.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::max_real_eigenvalue;
use crate::linearize::{decouple, linearize, DecoupledModel, OperatingPoint};
use crate::riccati::{solve_care, CareProblem};
use crate::vehicle::Deflections;
use crate::{Error, Result};

/// Schedule file format version.
pub const SCHEDULE_SCHEMA_VERSION: u32 = 1;

/// Quadratic weights for one control plane: state weights on the rate,
/// the attitude, and the tracking integrator, plus the deflection effort.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AxisWeights {
    pub rate: f64,
    pub attitude: f64,
    pub integral: f64,
    pub effort: f64,
}

/// Weights for both planes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LqiWeights {
    pub lon: AxisWeights,
    pub lat: AxisWeights,
}

impl Default for LqiWeights {
    fn default() -> Self {
        // Fixed by examples/tune_weights.rs: mid-band step tracking
        // (rise ~0.33 s, settling ~0.55 s, overshoot ~1.4%) at every
        // scheduled flight point of the default vehicle, servo lag and
        // loop discretization included. The reference enters through
        // the integrator alone, so the integral-to-attitude weight
        // ratio sets the tracking bandwidth; the absolute scale is the
        // smallest that meets the bands, keeping gain magnitudes and
        // with them sensor-noise feedthrough low.
        let lon = AxisWeights {
            rate: 20.0,
            attitude: 1000.0,
            integral: 96000.0,
            effort: 1.0,
        };
        // Yaw only regulates: its tracking error under estimated state
        // is set by the filter, not the gains, so a softer axis buys
        // quieter actuation for free.
        let lat = AxisWeights {
            rate: 14.0,
            attitude: 700.0,
            integral: 67200.0,
            effort: 1.0,
        };
        LqiWeights { lon, lat }
    }
}

impl AxisWeights {
    fn validate(&self, name: &str) -> Result<()> {
        let vals = [self.rate, self.attitude, self.integral, self.effort];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Synthesis(format!("{name} weights must be non-negative")));
        }
        if self.effort <= 0.0 {
            return Err(Error::Synthesis(format!("{name} effort weight must be positive")));
        }
        if self.integral <= 0.0 {
            return Err(Error::Synthesis(format!(
                "{name} integral weight must be positive for tracking"
            )));
        }
        Ok(())
    }
}

/// Design-plane matrices: the measured states of one plane augmented with
/// the attitude-tracking integrator.
///
/// Pitch plane: (dw, dq, dtheta, integral). Yaw plane: (dv, dr, dpsi,
/// integral). The integrator obeys xi' = command - attitude.
pub fn design_plane(dec: &DecoupledModel, lon: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a_src, b_src, keep): (&DMatrix<f64>, &DMatrix<f64>, &[usize]) = if lon {
        // Drop the axial-velocity row/column of (du, dw, dq, dtheta).
        (&dec.lon_a, &dec.lon_b, &[1, 2, 3])
    } else {
        (&dec.lat_a, &dec.lat_b, &[0, 1, 2])
    };
    let n = keep.len();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut b = DMatrix::zeros(n + 1, 1);
    for (ri, &i) in keep.iter().enumerate() {
        for (ci, &j) in keep.iter().enumerate() {
            a[(ri, ci)] = a_src[(i, j)];
        }
        b[(ri, 0)] = b_src[(i, 0)];
    }
    // Attitude is the last kept state; the integrator accumulates its
    // negative so that xi' = r - y.
    a[(n, n - 1)] = -1.0;
    (a, b)
}

/// One synthesized node of the schedule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GainNode {
    /// Altitude key the schedule interpolates on.
    pub altitude: f64,
    /// Nominal time of the underlying operating point.
    pub time: f64,
    /// Trim pitch attitude, rate, and deflection the feedback works
    /// around. Yaw trims are identically zero on a pitch-plane nominal.
    pub theta0: f64,
    pub q0: f64,
    pub mu_p0: f64,
    /// Pitch-plane gains (k_q, k_theta, k_integral).
    pub lon: [f64; 3],
    /// Yaw-plane gains (k_r, k_psi, k_integral).
    pub lat: [f64; 3],
}

/// Altitude-scheduled attitude-control gains.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GainSchedule {
    pub schema_version: u32,
    pub weights: LqiWeights,
    pub nodes: Vec<GainNode>,
}

impl GainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEDULE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schedule schema version {}",
                self.schema_version
            )));
        }
        if self.nodes.is_empty() {
            return Err(Error::Config("schedule has no nodes".into()));
        }
        for pair in self.nodes.windows(2) {
            if pair[1].altitude <= pair[0].altitude {
                return Err(Error::Config(
                    "schedule node altitudes must be strictly increasing".into(),
                ));
            }
        }
        for node in &self.nodes {
            let vals = [
                node.altitude,
                node.time,
                node.theta0,
                node.q0,
                node.mu_p0,
            ];
            if vals.iter().any(|v| !v.is_finite())
                || node.lon.iter().chain(node.lat.iter()).any(|v| !v.is_finite())
            {
                return Err(Error::Config("schedule contains non-finite values".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schedule: GainSchedule = serde_json::from_str(text)?;
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Gains and trims interpolated at one altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledGains {
    pub lon: [f64; 3],
    pub lat: [f64; 3],
    pub theta0: f64,
    pub q0: f64,
    pub mu_p0: f64,
}

/// Piecewise-linear interpolation of the schedule in altitude, clamped at
/// both ends.
pub fn gains_at(schedule: &GainSchedule, altitude: f64) -> ScheduledGains {
    let nodes = &schedule.nodes;
    let from_node = |n: &GainNode| ScheduledGains {
        lon: n.lon,
        lat: n.lat,
        theta0: n.theta0,
        q0: n.q0,
        mu_p0: n.mu_p0,
    };
    if altitude <= nodes[0].altitude {
        return from_node(&nodes[0]);
    }
    if altitude >= nodes[nodes.len() - 1].altitude {
        return from_node(&nodes[nodes.len() - 1]);
    }
    let hi = nodes.partition_point(|n| n.altitude < altitude);
    let (a, b) = (&nodes[hi - 1], &nodes[hi]);
    let t = (altitude - a.altitude) / (b.altitude - a.altitude);
    let lerp = |x: f64, y: f64| x + (y - x) * t;
    ScheduledGains {
        lon: [
            lerp(a.lon[0], b.lon[0]),
            lerp(a.lon[1], b.lon[1]),
            lerp(a.lon[2], b.lon[2]),
        ],
        lat: [
            lerp(a.lat[0], b.lat[0]),
            lerp(a.lat[1], b.lat[1]),
            lerp(a.lat[2], b.lat[2]),
        ],
        theta0: lerp(a.theta0, b.theta0),
        q0: lerp(a.q0, b.q0),
        mu_p0: lerp(a.mu_p0, b.mu_p0),
    }
}

/// Closed-loop design matrix under the flown (partial) feedback: the
/// velocity gain is zeroed before closing the loop.
pub fn partial_feedback_closed_loop(
    a_aug: &DMatrix<f64>,
    b_aug: &DMatrix<f64>,
    gains: &[f64; 3],
) -> DMatrix<f64> {
    let n = a_aug.nrows();
    let mut k = DMatrix::zeros(1, n);
    // First design state is the unmeasured velocity; its column stays 0.
    k[(0, 1)] = gains[0];
    k[(0, 2)] = gains[1];
    k[(0, 3)] = gains[2];
    a_aug - b_aug * k
}

fn synthesize_plane(
    dec: &DecoupledModel,
    weights: &AxisWeights,
    lon: bool,
    label: &str,
) -> Result<[f64; 3]> {
    let (a_aug, b_aug) = design_plane(dec, lon);
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        0.0,
        weights.rate,
        weights.attitude,
        weights.integral,
    ]));
    let r = DMatrix::from_element(1, 1, weights.effort);
    let sol = solve_care(&CareProblem {
        a: a_aug.clone(),
        b: b_aug.clone(),
        q,
        r,
    })
    .map_err(|e| Error::Synthesis(format!("{label}: {e}")))?;
    let gains = [sol.k[(0, 1)], sol.k[(0, 2)], sol.k[(0, 3)]];

    // The optimal loop is stable by construction; the flown loop drops
    // the velocity gain and must be re-verified.
    let cl = partial_feedback_closed_loop(&a_aug, &b_aug, &gains);
    let max_re = max_real_eigenvalue(&cl).map_err(|e| Error::Synthesis(format!("{label}: {e}")))?;
    if max_re >= 0.0 {
        return Err(Error::Synthesis(format!(
            "{label}: partial feedback leaves an eigenvalue at Re = {max_re:.3e}"
        )));
    }
    Ok(gains)
}

/// Synthesizes the full schedule. Fails atomically: any node that cannot
/// be stabilized (by the flown partial feedback, not just the optimal
/// gain) rejects the whole schedule.
pub fn synthesize_schedule(
    points: &[OperatingPoint],
    weights: &LqiWeights,
) -> Result<GainSchedule> {
    if points.is_empty() {
        return Err(Error::Synthesis("no operating points supplied".into()));
    }
    weights.lon.validate("pitch")?;
    weights.lat.validate("yaw")?;
    let mut nodes = Vec::with_capacity(points.len());
    for op in points {
        let model = linearize(op);
        let dec = decouple(&model, op)?;
        let label_lon = format!("pitch plane at t = {:.1} s", op.time);
        let label_lat = format!("yaw plane at t = {:.1} s", op.time);
        let lon = synthesize_plane(&dec, &weights.lon, true, &label_lon)?;
        let lat = synthesize_plane(&dec, &weights.lat, false, &label_lat)?;
        nodes.push(GainNode {
            altitude: op.altitude,
            time: op.time,
            theta0: op.theta0,
            q0: op.q0,
            mu_p0: op.mu_p0,
            lon,
            lat,
        });
    }
    let schedule = GainSchedule {
        schema_version: SCHEDULE_SCHEMA_VERSION,
        weights: *weights,
        nodes,
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Attitude commands and measurements consumed by one controller tick,
/// already rotated into the non-spinning frame.
#[derive(Debug, Clone, Copy)]
pub struct AttitudeMeasurement {
    pub theta: f64,
    pub psi: f64,
    pub q_ns: f64,
    pub r_ns: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AttitudeCommand {
    pub theta: f64,
    pub psi: f64,
}

/// Integral-augmented attitude controller state.
#[derive(Debug, Clone, Copy, Default)]
pub struct LqiController {
    pub lon_integrator: f64,
    pub lat_integrator: f64,
}

impl LqiController {
    pub fn reset(&mut self) {
        *self = LqiController::default();
    }

    /// One controller tick. Returns total non-spinning deflection
    /// commands (trim plus feedback). Integration is conditional: an
    /// axis whose command sits at the position limit stops integrating
    /// while the error would push it deeper.
    pub fn step(
        &mut self,
        gains: &ScheduledGains,
        meas: &AttitudeMeasurement,
        cmd: &AttitudeCommand,
        dt: f64,
        position_limit: f64,
    ) -> Deflections {
        let mu_p = axis_step(
            &mut self.lon_integrator,
            &gains.lon,
            gains.mu_p0,
            meas.q_ns - gains.q0,
            meas.theta - gains.theta0,
            cmd.theta - meas.theta,
            dt,
            position_limit,
        );
        let mu_y = axis_step(
            &mut self.lat_integrator,
            &gains.lat,
            0.0,
            meas.r_ns,
            meas.psi,
            cmd.psi - meas.psi,
            dt,
            position_limit,
        );
        Deflections { mu_p, mu_y }
    }
}

#[allow(clippy::too_many_arguments)]
fn axis_step(
    integrator: &mut f64,
    k: &[f64; 3],
    trim: f64,
    rate_err: f64,
    att_err: f64,
    track_err: f64,
    dt: f64,
    position_limit: f64,
) -> f64 {
    let command = |xi: f64| trim - (k[0] * rate_err + k[1] * att_err + k[2] * xi);
    let u = command(*integrator);
    let saturated = u.abs() >= position_limit;
    // Direction the pending integration would move the command.
    let push = -k[2] * track_err;
    if !(saturated && push * u > 0.0) {
        *integrator += track_err * dt;
    }
    u
}

/// Rotates body-frame rate estimates into the non-spinning frame using
/// the accumulated roll angle chi.
pub fn despin_rates(q: f64, r: f64, chi: f64) -> (f64, f64) {
    let (s, c) = chi.sin_cos();
    (q * c + r * s, -q * s + r * c)
}

/// Rotates non-spinning deflection commands back into the body frame.
pub fn respin_commands(cmd: Deflections, chi: f64) -> Deflections {
    let (s, c) = chi.sin_cos();
    Deflections {
        mu_p: cmd.mu_p * c - cmd.mu_y * s,
        mu_y: cmd.mu_p * s + cmd.mu_y * c,
    }
}

/// Gimbal servo model: first-order lag with slew and travel limits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorConfig {
    /// Lag time constant in seconds.
    pub tau: f64,
    /// Slew limit in rad/s.
    pub rate_limit: f64,
    /// Travel limit in rad, symmetric.
    pub position_limit: f64,
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        ActuatorConfig {
            tau: 0.02,
            rate_limit: std::f64::consts::TAU,
            position_limit: 7.0_f64.to_radians(),
        }
    }
}

impl ActuatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 || self.rate_limit <= 0.0 || self.position_limit <= 0.0 {
            return Err(Error::Config("actuator parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Achieved gimbal deflections.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActuatorState {
    pub deflections: Deflections,
}

impl ActuatorState {
    /// Advances the servo by one plant step toward `cmd`. The lag uses
    /// its exact discrete solution, so the step size only limits how
    /// often the slew and travel clamps are enforced.
    pub fn update(&mut self, cfg: &ActuatorConfig, cmd: Deflections, dt: f64) -> Deflections {
        let alpha = 1.0 - (-dt / cfg.tau).exp();
        let slew = cfg.rate_limit * dt;
        let advance = |current: f64, target: f64| {
            let step = ((target - current) * alpha).clamp(-slew, slew);
            (current + step).clamp(-cfg.position_limit, cfg.position_limit)
        };
        let mu_p = advance(self.deflections.mu_p, cmd.mu_p);
        let mu_y = advance(self.deflections.mu_y, cmd.mu_y);
        self.deflections = Deflections { mu_p, mu_y };
        self.deflections
    }
}

/// Proportional-integral-derivative gains for the comparison attitude
/// loop. Signs follow the gimbal convention: a positive pitch error
/// demands a negative deflection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: -10.0,
            ki: -20.0,
            kd: -5.0,
        }
    }
}

/// Integral state of one PID axis.
#[derive(Debug, Clone, Copy, Default)]
pub struct PidState {
    pub integral: f64,
}

impl PidState {
    /// One tick: u = kp e + ki int(e) + kd de/dt, with the caller
    /// supplying the error rate (command rate minus measured body rate).
    pub fn step(&mut self, gains: &PidGains, error: f64, error_rate: f64, dt: f64) -> f64 {
        self.integral += error * dt;
        gains.kp * error + gains.ki * self.integral + gains.kd * error_rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Mid-burn vertical operating point (same regime as the nominal
    /// ascent before pitch-over).
    fn vertical_point() -> OperatingPoint {
        OperatingPoint {
            time: 20.0,
            altitude: 800.0,
            u0: 55.0,
            v0: 0.0,
            w0: 0.0,
            q0: 0.0,
            r0: 0.0,
            phi0: 0.0,
            theta0: 0.0,
            psi0: 0.0,
            mu_p0: 0.0,
            mu_y0: 0.0,
            mass: 74.0,
            thrust: 900.0,
            qbar: 0.5 * 1.13 * 55.0 * 55.0,
            speed: 55.0,
            gravity: 9.804,
            lever: 1.56,
            j_t: 78.0,
            c_a: 0.45,
            c_n_alpha: 2.2,
            c_y_beta: -2.2,
            c_m_q: -30.0,
            c_n_r: -30.0,
            static_margin: -3.2,
            diameter: 0.24,
            area: 0.045239,
        }
    }

    fn later_point() -> OperatingPoint {
        OperatingPoint {
            time: 50.0,
            altitude: 2400.0,
            u0: 80.0,
            speed: 80.0,
            qbar: 0.5 * 0.95 * 80.0 * 80.0,
            mass: 58.0,
            thrust: 890.0,
            lever: 1.65,
            j_t: 62.0,
            ..vertical_point()
        }
    }

    #[test]
    fn synthesis_stabilizes_partial_feedback_both_planes() {
        let op = vertical_point();
        let schedule = synthesize_schedule(&[op.clone()], &LqiWeights::default()).unwrap();
        let node = &schedule.nodes[0];
        let dec = decouple(&linearize(&op), &op).unwrap();
        for (lon, gains) in [(true, &node.lon), (false, &node.lat)] {
            let (a_aug, b_aug) = design_plane(&dec, lon);
            // Open-loop design plane is unstable (weathercock pair plus
            // the tracking integrator); the flown gain must fix it.
            assert!(max_real_eigenvalue(&a_aug).unwrap() > 0.0);
            let cl = partial_feedback_closed_loop(&a_aug, &b_aug, gains);
            assert!(max_real_eigenvalue(&cl).unwrap() < 0.0);
        }
    }

    #[test]
    fn gain_signs_match_gimbal_geometry() {
        // Pitch-plane control authority enters q' with a negative sign,
        // yaw-plane with a positive one, so stabilizing attitude gains
        // are negative and positive respectively.
        let mut weights = LqiWeights::default();
        weights.lat = weights.lon;
        let schedule = synthesize_schedule(&[vertical_point()], &weights).unwrap();
        let node = &schedule.nodes[0];
        // u = trim - k . z with the integrator fed by (command - theta):
        // proportional entries oppose the (negative) pitch authority while
        // the integral entry pulls toward the command.
        assert!(node.lon[0] < 0.0 && node.lon[1] < 0.0 && node.lon[2] > 0.0);
        assert!(node.lat[0] > 0.0 && node.lat[1] > 0.0 && node.lat[2] < 0.0);
        // Symmetric aero under equal axis weights gives mirror-image
        // magnitudes.
        for i in 0..3 {
            assert_relative_eq!(node.lon[i].abs(), node.lat[i].abs(), max_relative = 1e-6);
        }
        // The integral gain magnitude equals sqrt(q_integral / r_effort):
        // the loop integrator pins the return difference at s = 0.
        let expected = (schedule.weights.lon.integral / schedule.weights.lon.effort).sqrt();
        assert_relative_eq!(node.lon[2], expected, max_relative = 1e-9);
    }

    #[test]
    fn synthesis_fails_atomically_without_thrust() {
        let good = vertical_point();
        let mut bad = later_point();
        bad.thrust = 0.0;
        let err = synthesize_schedule(&[good, bad], &LqiWeights::default());
        assert!(matches!(err, Err(Error::Synthesis(_))));
    }

    #[test]
    fn schedule_interpolates_and_clamps_on_altitude() {
        let schedule =
            synthesize_schedule(&[vertical_point(), later_point()], &LqiWeights::default())
                .unwrap();
        let (n0, n1) = (&schedule.nodes[0], &schedule.nodes[1]);
        let mid = gains_at(&schedule, 0.5 * (n0.altitude + n1.altitude));
        for i in 0..3 {
            assert_relative_eq!(mid.lon[i], 0.5 * (n0.lon[i] + n1.lon[i]), max_relative = 1e-12);
        }
        let below = gains_at(&schedule, 0.0);
        assert_eq!(below.lon, n0.lon);
        let above = gains_at(&schedule, 1e9);
        assert_eq!(above.lon, n1.lon);
    }

    #[test]
    fn schedule_json_round_trip_is_stable() {
        let schedule =
            synthesize_schedule(&[vertical_point(), later_point()], &LqiWeights::default())
                .unwrap();
        let text = schedule.to_json().unwrap();
        let reloaded = GainSchedule::from_json(&text).unwrap();
        assert_eq!(schedule, reloaded);
        assert_eq!(text, reloaded.to_json().unwrap());
        // Unknown fields and wrong versions are rejected.
        assert!(GainSchedule::from_json(&text.replace("\"schema_version\": 1", "\"schema_version\": 9")).is_err());
        assert!(GainSchedule::from_json(&text.replacen('{', "{\"extra\": 0,", 1)).is_err());
    }

    #[test]
    fn controller_tracks_attitude_error_toward_command() {
        let schedule =
            synthesize_schedule(&[vertical_point()], &LqiWeights::default()).unwrap();
        let gains = gains_at(&schedule, 800.0);
        let mut ctl = LqiController::default();
        let meas = AttitudeMeasurement {
            theta: 0.0,
            psi: 0.0,
            q_ns: 0.0,
            r_ns: 0.0,
        };
        // Small enough that a few ticks of integration stay off the stops.
        let cmd = AttitudeCommand {
            theta: 0.2_f64.to_radians(),
            psi: 0.0,
        };
        let limit = ActuatorConfig::default().position_limit;
        // The reference enters through the integrator, so the first tick
        // at trim returns the trim deflection and arms the integrator.
        let u1 = ctl.step(&gains, &meas, &cmd, 0.01, limit);
        assert_relative_eq!(u1.mu_p, 0.0);
        assert_relative_eq!(u1.mu_y, 0.0);
        assert!(ctl.lon_integrator > 0.0);
        // Nose-up demand then drives a negative pitch deflection that
        // deepens while the error persists.
        let u2 = ctl.step(&gains, &meas, &cmd, 0.01, limit);
        assert!(u2.mu_p < 0.0);
        let u3 = ctl.step(&gains, &meas, &cmd, 0.01, limit);
        assert!(u3.mu_p < u2.mu_p);
    }

    #[test]
    fn saturated_axis_stops_integrating() {
        let gains = ScheduledGains {
            lon: [-0.5, -2.0, 30.0],
            lat: [0.5, 2.0, -30.0],
            theta0: 0.0,
            q0: 0.0,
            mu_p0: 0.0,
        };
        let mut ctl = LqiController::default();
        let meas = AttitudeMeasurement {
            theta: 0.0,
            psi: 0.0,
            q_ns: 0.0,
            r_ns: 0.0,
        };
        let cmd = AttitudeCommand {
            theta: 1.0,
            psi: 0.0,
        };
        // First tick arms the integrator, second saturates the command;
        // from then on the integrator must hold while the error keeps
        // pushing into the stop.
        let limit = 0.05;
        ctl.step(&gains, &meas, &cmd, 0.01, limit);
        ctl.step(&gains, &meas, &cmd, 0.01, limit);
        let frozen = ctl.lon_integrator;
        let u = ctl.step(&gains, &meas, &cmd, 0.01, limit);
        assert!(u.mu_p.abs() >= limit);
        assert_eq!(ctl.lon_integrator, frozen);
        // Error reversal integrates again (back out of saturation).
        let cmd_back = AttitudeCommand {
            theta: -1.0,
            psi: 0.0,
        };
        ctl.step(&gains, &meas, &cmd_back, 0.01, limit);
        assert!(ctl.lon_integrator < frozen);
    }

    #[test]
    fn spin_corrections_are_inverse_rotations() {
        let chi = 0.7;
        let (q_ns, r_ns) = despin_rates(0.23, -0.11, chi);
        // Rotating the commands back through chi must undo the despin.
        let body = respin_commands(
            Deflections {
                mu_p: q_ns,
                mu_y: r_ns,
            },
            chi,
        );
        assert_relative_eq!(body.mu_p, 0.23, epsilon = 1e-15);
        assert_relative_eq!(body.mu_y, -0.11, epsilon = 1e-15);
        // Quarter turn swaps the planes.
        let (qn, rn) = despin_rates(1.0, 0.0, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(qn, 0.0, epsilon = 1e-15);
        assert_relative_eq!(rn, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn actuator_lag_matches_exact_exponential() {
        let cfg = ActuatorConfig {
            rate_limit: 1e6,
            ..ActuatorConfig::default()
        };
        let mut servo = ActuatorState::default();
        let cmd = Deflections {
            mu_p: 0.05,
            mu_y: -0.02,
        };
        // 100 steps of 1 ms = 5 time constants.
        for _ in 0..100 {
            servo.update(&cfg, cmd, 0.001);
        }
        let expect = 0.05 * (1.0 - (-0.1f64 / 0.02).exp());
        assert_relative_eq!(servo.deflections.mu_p, expect, max_relative = 1e-12);
        assert_relative_eq!(servo.deflections.mu_y, -0.4 * expect, max_relative = 1e-12);
    }

    #[test]
    fn actuator_honors_slew_and_travel_limits() {
        let cfg = ActuatorConfig::default();
        let mut servo = ActuatorState::default();
        let big = Deflections {
            mu_p: 1.0,
            mu_y: 0.0,
        };
        let dt = 0.001;
        let after = servo.update(&cfg, big, dt);
        // Lag alone would move ~4.9 mrad; the slew limit caps the step.
        assert_relative_eq!(after.mu_p, cfg.rate_limit * dt, max_relative = 1e-12);
        for _ in 0..10_000 {
            servo.update(&cfg, big, dt);
        }
        assert_relative_eq!(
            servo.deflections.mu_p,
            cfg.position_limit,
            max_relative = 1e-9
        );
    }

    #[test]
    fn pid_terms_accumulate_as_defined() {
        let gains = PidGains::default();
        let mut axis = PidState::default();
        let u1 = axis.step(&gains, 0.1, 0.0, 0.01);
        assert_relative_eq!(u1, -10.0 * 0.1 - 20.0 * 0.1 * 0.01, epsilon = 1e-15);
        let u2 = axis.step(&gains, 0.1, 0.2, 0.01);
        assert_relative_eq!(
            u2,
            -10.0 * 0.1 - 20.0 * 0.2 * 0.01 - 5.0 * 0.2,
            epsilon = 1e-15
        );
    }
}
