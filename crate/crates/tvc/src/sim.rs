//! Scenario orchestration: the multi-rate closed-loop simulator and the
//! experiments built on top of it.
//!
//! One run wires everything together at two rates. The plant integrates
//! at `dt_plant` with the actuator stepped and the wind held over each
//! step; the GNC stack (sensing, filtering, gain interpolation, control)
//! ticks every `dt_gnc`. All randomness flows from the scenario seed
//! through fixed derived streams, so identical scenarios reproduce
//! identical logs byte for byte.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::compute_metrics;
use crate::control::{
    despin_rates, design_plane, gains_at, partial_feedback_closed_loop, respin_commands,
    synthesize_schedule, ActuatorConfig, ActuatorState, AttitudeCommand, AttitudeMeasurement,
    GainSchedule, LqiController, LqiWeights, PidGains, PidState,
};
use crate::environment::{WindConfig, WindGenerator};
use crate::error::{Error, Result};
use crate::frames::EulerAngles;
use crate::io::{csv_to_table, sha256_hex, table_to_csv, Table};
use crate::linalg::{eigenvalues, zoh_discretize};
use crate::linearize::{
    decouple, extract_operating_points, linearize, ExtractOptions, NominalSample, OperatingPoint,
};
use crate::navigation::{
    AttitudeFilter, PositionFilter, SensorSample, SensorSuite, SensorSuiteConfig,
};
use crate::vehicle::{
    dynamics_rhs, dynamics_with_acceleration, Deflections, RigidBodyState, Table1D, VehicleConfig,
};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Truth attitude error beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 30.0 * std::f64::consts::PI / 180.0;

/// Admissible range for plant uncertainty factors.
pub const UNCERTAINTY_FACTOR_MIN: f64 = 0.5;
pub const UNCERTAINTY_FACTOR_MAX: f64 = 1.5;

/// Plant parameters that may be scaled for robustness studies.
pub const UNCERTAINTY_PARAMETERS: [&str; 4] = ["x_cm", "thrust", "c_n_alpha", "j_t"];

/// Feedback selection for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Lqi,
    Pid,
    /// Replays the stored nominal commands with no feedback at all.
    FeedforwardOnly,
}

/// Launch state overrides; all zeros is at rest on the pad, vertical.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialStateConfig {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub omega: [f64; 3],
    pub attitude: [f64; 3],
}

/// One complete run description. Together with its seed a scenario pins
/// every byte of the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub vehicle: VehicleConfig,
    /// Commanded pitch attitude vs time, rad. Yaw and roll references
    /// are identically zero.
    pub pitch_program: Table1D,
    /// Wind model; absent flies in still air.
    #[serde(default)]
    pub wind: Option<WindConfig>,
    pub sensors: SensorSuiteConfig,
    /// Feed truth to the controller, bypassing sensors and filters.
    #[serde(default)]
    pub exact_state: bool,
    pub weights: LqiWeights,
    pub controller: ControllerKind,
    pub pid: PidGains,
    pub actuator: ActuatorConfig,
    /// Plant parameter scalings applied to the flown vehicle only; the
    /// controller, schedule, and filters keep nominal knowledge.
    #[serde(default)]
    pub uncertainty: BTreeMap<String, f64>,
    #[serde(default)]
    pub initial: InitialStateConfig,
    pub dt_plant: f64,
    pub dt_gnc: f64,
    pub duration: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario schema version {}",
                self.schema_version
            )));
        }
        self.vehicle.validate()?;
        self.sensors.validate()?;
        self.actuator.validate()?;
        if let Some(wind) = &self.wind {
            wind.validate()?;
        }
        if !(self.dt_plant > 0.0 && self.dt_gnc > 0.0 && self.duration > 0.0) {
            return Err(Error::Config("step sizes and duration must be positive".into()));
        }
        let ratio = self.dt_gnc / self.dt_plant;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio < 1.0 {
            return Err(Error::Config(format!(
                "dt_gnc must be an integer multiple of dt_plant (ratio {ratio})"
            )));
        }
        let steep = self
            .pitch_program
            .points()
            .iter()
            .any(|(_, theta)| theta.abs() > 1.3);
        if steep {
            return Err(Error::Config(
                "pitch program exceeds 1.3 rad; the attitude representation \
                 degenerates near +-pi/2"
                    .into(),
            ));
        }
        for (name, factor) in &self.uncertainty {
            if !UNCERTAINTY_PARAMETERS.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown uncertainty parameter {name:?} (supported: {})",
                    UNCERTAINTY_PARAMETERS.join(", ")
                )));
            }
            if !(*factor >= UNCERTAINTY_FACTOR_MIN && *factor <= UNCERTAINTY_FACTOR_MAX) {
                return Err(Error::Config(format!(
                    "uncertainty factor {factor} for {name:?} outside \
                     [{UNCERTAINTY_FACTOR_MIN}, {UNCERTAINTY_FACTOR_MAX}]"
                )));
            }
        }
        Ok(())
    }

    /// Canonical serialization used for hashing and for file artifacts.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: ScenarioConfig = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Provenance stamp: SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_json()?))
    }

    pub fn initial_state(&self) -> Result<RigidBodyState> {
        let i = &self.initial;
        Ok(RigidBodyState {
            position: Vector3::from_column_slice(&i.position),
            velocity: Vector3::from_column_slice(&i.velocity),
            omega: Vector3::from_column_slice(&i.omega),
            attitude: EulerAngles::new(i.attitude[0], i.attitude[1], i.attitude[2])?,
            mass: self.vehicle.total_mass,
        })
    }

    /// The vehicle actually flown: nominal parameters times the
    /// configured uncertainty factors.
    pub fn plant_vehicle(&self) -> Result<VehicleConfig> {
        let mut cfg = self.vehicle.clone();
        for (name, &factor) in &self.uncertainty {
            match name.as_str() {
                "x_cm" => cfg.x_cm = scale_values(&cfg.x_cm, factor)?,
                // Exhaust velocity scales with thrust so the mass flow,
                // and with it the propellant budget, is unchanged.
                "thrust" => {
                    cfg.thrust_curve = scale_values(&cfg.thrust_curve, factor)?;
                    cfg.exhaust_velocity *= factor;
                }
                "c_n_alpha" => cfg.c_n_alpha = scale_values(&cfg.c_n_alpha, factor)?,
                "j_t" => cfg.j_t = scale_values(&cfg.j_t, factor)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown uncertainty parameter {other:?}"
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn substeps(&self) -> u64 {
        (self.dt_gnc / self.dt_plant).round() as u64
    }
}

fn scale_values(table: &Table1D, factor: f64) -> Result<Table1D> {
    Table1D::new(
        table
            .points()
            .iter()
            .map(|&(k, v)| (k, v * factor))
            .collect(),
    )
}

/// Stream seeds derive from the master seed and a label, so adding or
/// removing one random consumer never shifts another's draws.
fn derive_seed(master: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stream.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Stored nominal commands, one row per GNC tick, non-spinning frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedforwardRow {
    pub t: f64,
    pub altitude: f64,
    pub mu_p: f64,
    pub mu_y: f64,
}

/// Nominal command table replayed as feedforward control.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardTable {
    /// Tick period the table was recorded at, s.
    pub dt: f64,
    pub rows: Vec<FeedforwardRow>,
}

impl FeedforwardTable {
    /// Command at tick `k`; clamps past the recorded range (the motor is
    /// spent there and the stored trims decay to coast values).
    pub fn at_tick(&self, k: u64) -> Deflections {
        let row = self.rows[(k as usize).min(self.rows.len() - 1)];
        Deflections {
            mu_p: row.mu_p,
            mu_y: row.mu_y,
        }
    }

    /// Piecewise-linear command at an arbitrary time.
    pub fn at_time(&self, t: f64) -> Deflections {
        let rows = &self.rows;
        if t <= rows[0].t {
            return Deflections {
                mu_p: rows[0].mu_p,
                mu_y: rows[0].mu_y,
            };
        }
        let last = rows[rows.len() - 1];
        if t >= last.t {
            return Deflections {
                mu_p: last.mu_p,
                mu_y: last.mu_y,
            };
        }
        let i = rows.partition_point(|r| r.t <= t) - 1;
        let (a, b) = (rows[i], rows[i + 1]);
        let s = (t - a.t) / (b.t - a.t);
        Deflections {
            mu_p: a.mu_p + s * (b.mu_p - a.mu_p),
            mu_y: a.mu_y + s * (b.mu_y - a.mu_y),
        }
    }

    pub fn to_csv(&self, scenario_sha256: &str) -> String {
        let mut table = Table::new(&["t", "h", "mu_p", "mu_y"]);
        for r in &self.rows {
            table.push(vec![r.t, r.altitude, r.mu_p, r.mu_y]);
        }
        let comments = vec![
            "feedforward schema v1".to_string(),
            format!("scenario_sha256: {scenario_sha256}"),
            format!("dt: {}", self.dt),
        ];
        table_to_csv(&table, &comments)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let doc = csv_to_table(text)?;
        let t = doc.table.column_index("t")?;
        let h = doc.table.column_index("h")?;
        let p = doc.table.column_index("mu_p")?;
        let y = doc.table.column_index("mu_y")?;
        if doc.table.rows.is_empty() {
            return Err(Error::Config("feedforward table has no rows".into()));
        }
        let rows: Vec<FeedforwardRow> = doc
            .table
            .rows
            .iter()
            .map(|r| FeedforwardRow {
                t: r[t],
                altitude: r[h],
                mu_p: r[p],
                mu_y: r[y],
            })
            .collect();
        let dt = match doc.comment_value("dt") {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::Config("malformed dt comment".into()))?,
            None if rows.len() > 1 => rows[1].t - rows[0].t,
            None => return Err(Error::Config("feedforward table lacks a dt".into())),
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("bad feedforward dt {dt}")));
        }
        for (k, r) in rows.iter().enumerate() {
            if !r.t.is_finite() || (r.t - k as f64 * dt).abs() > 1e-6 * (1.0 + r.t.abs()) {
                return Err(Error::Config(format!(
                    "feedforward row {k} is not on the tick grid (t = {})",
                    r.t
                )));
            }
        }
        Ok(FeedforwardTable { dt, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Burnout,
    Apogee,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Altitude at the event, sub-step refined for apogee.
    pub altitude: f64,
}

/// Everything the loop saw and did at one GNC tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub truth: RigidBodyState,
    pub attitude_estimate: Vector3<f64>,
    pub gyro_bias_estimate: Vector3<f64>,
    pub position_estimate: Vector3<f64>,
    /// Inertial velocity estimate.
    pub velocity_estimate: Vector3<f64>,
    pub accel_bias_estimate: Vector3<f64>,
    pub theta_ref: f64,
    pub psi_ref: f64,
    /// Body-frame command entering the actuator this tick.
    pub command: Deflections,
    /// Servo position when the command was issued.
    pub achieved: Deflections,
    pub wind: Vector3<f64>,
    pub saturated: bool,
}

/// Uniform GNC-rate run record plus discrete events.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub dt: f64,
    pub records: Vec<LogRecord>,
    pub events: Vec<SimEvent>,
}

const LOG_COLUMNS: [&str; 39] = [
    "t", "x", "y", "z", "u", "v", "w", "p", "q", "r", "phi", "theta", "psi", "mass", "phi_est",
    "theta_est", "psi_est", "bias_p", "bias_q", "bias_r", "x_est", "y_est", "z_est", "vx_est",
    "vy_est", "vz_est", "bias_ax", "bias_ay", "bias_az", "theta_ref", "psi_ref", "mu_p_cmd",
    "mu_y_cmd", "mu_p", "mu_y", "wind_x", "wind_y", "wind_z", "saturated",
];

impl SimLog {
    pub fn apogee(&self) -> Option<&SimEvent> {
        self.events.iter().find(|e| e.kind == EventKind::Apogee)
    }

    pub fn to_csv(&self, scenario_sha256: &str) -> String {
        let mut table = Table::new(&LOG_COLUMNS);
        for r in &self.records {
            let s = r.truth.to_array();
            let mut row = Vec::with_capacity(LOG_COLUMNS.len());
            row.push(r.t);
            row.extend_from_slice(&s);
            row.extend_from_slice(r.attitude_estimate.as_slice());
            row.extend_from_slice(r.gyro_bias_estimate.as_slice());
            row.extend_from_slice(r.position_estimate.as_slice());
            row.extend_from_slice(r.velocity_estimate.as_slice());
            row.extend_from_slice(r.accel_bias_estimate.as_slice());
            row.push(r.theta_ref);
            row.push(r.psi_ref);
            row.push(r.command.mu_p);
            row.push(r.command.mu_y);
            row.push(r.achieved.mu_p);
            row.push(r.achieved.mu_y);
            row.extend_from_slice(r.wind.as_slice());
            row.push(if r.saturated { 1.0 } else { 0.0 });
            table.push(row);
        }
        let mut comments = vec![
            "run log schema v1".to_string(),
            format!("scenario_sha256: {scenario_sha256}"),
            format!("dt: {}", self.dt),
        ];
        for e in &self.events {
            let kind = match e.kind {
                EventKind::Burnout => "burnout",
                EventKind::Apogee => "apogee",
            };
            comments.push(format!("event: {kind} {} {}", e.time, e.altitude));
        }
        table_to_csv(&table, &comments)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let doc = csv_to_table(text)?;
        if doc.table.columns != LOG_COLUMNS {
            return Err(Error::Config("unexpected run log columns".into()));
        }
        let dt: f64 = doc
            .comment_value("dt")
            .ok_or_else(|| Error::Config("run log lacks a dt comment".into()))?
            .parse()
            .map_err(|_| Error::Config("malformed dt comment".into()))?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("bad run log dt {dt}")));
        }
        let mut events = Vec::new();
        for line in &doc.comments {
            if let Some(spec) = line.strip_prefix("event: ") {
                let parts: Vec<&str> = spec.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!("malformed event comment {spec:?}")));
                }
                let kind = match parts[0] {
                    "burnout" => EventKind::Burnout,
                    "apogee" => EventKind::Apogee,
                    other => {
                        return Err(Error::Config(format!("unknown event kind {other:?}")))
                    }
                };
                let time: f64 = parts[1]
                    .parse()
                    .map_err(|_| Error::Config("malformed event time".into()))?;
                let altitude: f64 = parts[2]
                    .parse()
                    .map_err(|_| Error::Config("malformed event altitude".into()))?;
                events.push(SimEvent {
                    time,
                    kind,
                    altitude,
                });
            }
        }
        let mut records = Vec::with_capacity(doc.table.rows.len());
        for row in &doc.table.rows {
            let truth = RigidBodyState::from_array(row[1..14].try_into().unwrap())?;
            let v3 = |i: usize| Vector3::new(row[i], row[i + 1], row[i + 2]);
            records.push(LogRecord {
                t: row[0],
                truth,
                attitude_estimate: v3(14),
                gyro_bias_estimate: v3(17),
                position_estimate: v3(20),
                velocity_estimate: v3(23),
                accel_bias_estimate: v3(26),
                theta_ref: row[29],
                psi_ref: row[30],
                command: Deflections {
                    mu_p: row[31],
                    mu_y: row[32],
                },
                achieved: Deflections {
                    mu_p: row[33],
                    mu_y: row[34],
                },
                wind: v3(35),
                saturated: row[38] != 0.0,
            });
        }
        Ok(SimLog {
            dt,
            records,
            events,
        })
    }
}

/// Headline numbers of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetrics {
    /// Sum of squared pitch tracking errors over GNC samples, deg^2.
    pub sum_sq_pitch_error_deg2: f64,
    /// Sum of squared yaw tracking errors over GNC samples, deg^2.
    pub sum_sq_yaw_error_deg2: f64,
    /// Root-mean-square achieved deflections, deg.
    pub rms_mu_p_deg: f64,
    pub rms_mu_y_deg: f64,
    pub apogee_m: f64,
    pub max_velocity_ms: f64,
    pub time_to_apogee_s: f64,
}

/// One classical fourth-order Runge-Kutta step of a generic ODE.
/// Any non-finite derivative aborts with the time and state attached.
pub fn integrate_rk4<F>(rhs: &mut F, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::Sim(format!("step size {dt} must be positive")));
    }
    let eval = |k: Vec<f64>, t: f64, x: &[f64]| -> Result<Vec<f64>> {
        if k.len() != x.len() {
            return Err(Error::Sim("derivative dimension mismatch".into()));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Sim(format!(
                "non-finite derivative at t = {t}: state {x:?}"
            )));
        }
        Ok(k)
    };
    let shift = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    let k1 = eval(rhs(t, x)?, t, x)?;
    let x2 = shift(x, &k1, 0.5 * dt);
    let k2 = eval(rhs(t + 0.5 * dt, &x2)?, t, x)?;
    let x3 = shift(x, &k2, 0.5 * dt);
    let k3 = eval(rhs(t + 0.5 * dt, &x3)?, t, x)?;
    let x4 = shift(x, &k3, dt);
    let k4 = eval(rhs(t + dt, &x4)?, t, x)?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| xi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// RK4 step of the rigid-body plant with deflections and wind held.
pub fn step_rigid_body(
    cfg: &VehicleConfig,
    t: f64,
    state: &RigidBodyState,
    defl: Deflections,
    wind: &Vector3<f64>,
    dt: f64,
) -> Result<RigidBodyState> {
    let mut rhs = |tt: f64, x: &[f64]| -> Result<Vec<f64>> {
        let s = RigidBodyState::from_array(x.try_into().unwrap())?;
        Ok(dynamics_rhs(cfg, tt, &s, defl, wind)?.to_array().to_vec())
    };
    let next = integrate_rk4(&mut rhs, t, &state.to_array(), dt)?;
    RigidBodyState::from_array(&next.try_into().unwrap())
}

/// Reference step injected mid-flight by the step-response experiment.
#[derive(Debug, Clone, Copy)]
struct StepSpec {
    t_inject: f64,
    d_theta: f64,
    d_psi: f64,
}

struct RunOutput {
    log: SimLog,
    nominal: Vec<NominalSample>,
    feedforward: FeedforwardTable,
}

/// The multi-rate loop shared by every run flavor. Always records the
/// nominal-sample and command streams; callers that do not need them
/// drop them.
fn engine(
    scenario: &ScenarioConfig,
    schedule: Option<&GainSchedule>,
    feedforward: Option<&FeedforwardTable>,
    step: Option<StepSpec>,
) -> Result<RunOutput> {
    scenario.validate()?;
    match scenario.controller {
        ControllerKind::Lqi if schedule.is_none() => {
            return Err(Error::Config("feedback mode needs a gain schedule".into()))
        }
        ControllerKind::Pid | ControllerKind::FeedforwardOnly if feedforward.is_none() => {
            return Err(Error::Config(
                "replay and feedforward-assisted modes need a feedforward table".into(),
            ))
        }
        _ => {}
    }
    if let Some(s) = schedule {
        s.validate()?;
    }

    let plant = scenario.plant_vehicle()?;
    let act_cfg = scenario.actuator;
    let dt_p = scenario.dt_plant;
    let dt_g = scenario.dt_gnc;
    let n_sub = scenario.substeps();
    let n_ticks = (scenario.duration / dt_g + 1e-9).floor() as u64;

    let mut state = scenario.initial_state()?;
    let mut actuator = ActuatorState::default();
    let mut wind_gen = match &scenario.wind {
        Some(w) => Some(WindGenerator::new(w, dt_p, derive_seed(scenario.seed, "wind"))?),
        None => None,
    };
    let mut last_wind = scenario
        .wind
        .as_ref()
        .map(|w| w.mean_wind(state.altitude()))
        .unwrap_or_else(Vector3::zeros);
    let mut sensors = (!scenario.exact_state)
        .then(|| SensorSuite::new(scenario.sensors, derive_seed(scenario.seed, "sensors")));
    let mut acf = AttitudeFilter::new(state.attitude.as_vector());
    let mut pcf = PositionFilter::new(state.position, state.inertial_velocity());
    let mut prev_sample: Option<SensorSample> = None;
    let mut lqi = LqiController::default();
    let mut pid_pitch = PidState::default();
    // The gimbal couples into yaw with the opposite sign from pitch
    // (positive mu_y raises the yaw rate, positive mu_p lowers the pitch
    // rate), so the yaw axis flies the same PID magnitudes negated.
    let pid_yaw_gains = PidGains {
        kp: -scenario.pid.kp,
        ki: -scenario.pid.ki,
        kd: -scenario.pid.kd,
    };
    let mut pid_yaw = PidState::default();
    let mut chi = 0.0_f64;

    let mut records = Vec::with_capacity(n_ticks as usize + 1);
    let mut nominal = Vec::with_capacity(n_ticks as usize + 1);
    let mut ff_rows = Vec::with_capacity(n_ticks as usize + 1);
    let mut events = Vec::new();
    let mut burnout_seen = false;
    let mut climbing = false;

    'ticks: for tick in 0..=n_ticks {
        let t = (tick * n_sub) as f64 * dt_p;

        // References for this tick.
        let mut theta_ref = scenario.pitch_program.eval(t);
        let mut psi_ref = 0.0;
        if let Some(s) = step {
            if t >= s.t_inject {
                theta_ref += s.d_theta;
                psi_ref += s.d_psi;
            }
        }

        // Divergence is only a controller failure while the motor can
        // act; after burnout the vehicle is a passive dart and attitude
        // drift through the short coast is expected.
        let pitch_err = state.attitude.theta - theta_ref;
        let yaw_err = state.attitude.psi - psi_ref;
        if t < plant.burn_time()
            && (pitch_err.abs() > DIVERGENCE_LIMIT || yaw_err.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::Sim(format!(
                "attitude diverged at t = {t:.2} s: pitch error {:.1} deg, yaw error {:.1} deg",
                pitch_err.to_degrees(),
                yaw_err.to_degrees()
            )));
        }

        // Sense and estimate. On each tick the filters advance across
        // the just-elapsed interval with the trapezoidal average of its
        // endpoint samples as the held input, so the estimates read
        // here align with this tick and include the fresh angle fix.
        // Exact-state mode bypasses the whole stack.
        let (att_est, rate_est, pos_est, vel_est, gyro_bias_est, accel_bias_est) =
            if let Some(suite) = &mut sensors {
                let (_, accel) =
                    dynamics_with_acceleration(&plant, t, &state, actuator.deflections, &last_wind)?;
                let sample = suite.sample(&state, &accel, dt_g);
                if let Some(prev) = &prev_sample {
                    let attitude = acf.estimate()?;
                    acf.update(
                        &(0.5 * (prev.euler + sample.euler)),
                        &(0.5 * (prev.gyro + sample.gyro)),
                        dt_g,
                    )?;
                    pcf.update(
                        &(0.5 * (prev.position + sample.position)),
                        &(0.5 * (prev.accel + sample.accel)),
                        &attitude,
                        dt_g,
                    );
                }
                let read = (
                    acf.attitude,
                    acf.rate_estimate(&sample.gyro),
                    pcf.position,
                    pcf.velocity,
                    acf.gyro_bias,
                    pcf.accel_bias,
                );
                prev_sample = Some(sample);
                read
            } else {
                (
                    state.attitude.as_vector(),
                    state.omega,
                    state.position,
                    state.inertial_velocity(),
                    Vector3::zeros(),
                    Vector3::zeros(),
                )
            };

        // Control in the non-spinning frame, then rotate back by the
        // accumulated roll angle and clamp to the gimbal stops.
        let (q_ns, r_ns) = despin_rates(rate_est.y, rate_est.z, chi);
        let raw_cmd = match scenario.controller {
            ControllerKind::Lqi => {
                let gains = gains_at(schedule.unwrap(), pos_est.x);
                let meas = AttitudeMeasurement {
                    theta: att_est.y,
                    psi: att_est.z,
                    q_ns,
                    r_ns,
                };
                let cmd = AttitudeCommand {
                    theta: theta_ref,
                    psi: psi_ref,
                };
                let u = lqi.step(&gains, &meas, &cmd, dt_g, act_cfg.position_limit);
                respin_commands(u, chi)
            }
            ControllerKind::Pid => {
                let ff = feedforward.unwrap().at_tick(tick);
                let ep = theta_ref - att_est.y;
                let ey = psi_ref - att_est.z;
                let up = pid_pitch.step(&scenario.pid, ep, -q_ns, dt_g);
                let uy = pid_yaw.step(&pid_yaw_gains, ey, -r_ns, dt_g);
                let fb = respin_commands(Deflections { mu_p: up, mu_y: uy }, chi);
                Deflections {
                    mu_p: ff.mu_p + fb.mu_p,
                    mu_y: ff.mu_y + fb.mu_y,
                }
            }
            ControllerKind::FeedforwardOnly => feedforward.unwrap().at_tick(tick),
        };
        chi += rate_est.x * dt_g;
        let limit = act_cfg.position_limit;
        let command = Deflections {
            mu_p: raw_cmd.mu_p.clamp(-limit, limit),
            mu_y: raw_cmd.mu_y.clamp(-limit, limit),
        };
        let saturated = raw_cmd.mu_p.abs() > limit || raw_cmd.mu_y.abs() > limit;

        records.push(LogRecord {
            t,
            truth: state,
            attitude_estimate: att_est,
            gyro_bias_estimate: gyro_bias_est,
            position_estimate: pos_est,
            velocity_estimate: vel_est,
            accel_bias_estimate: accel_bias_est,
            theta_ref,
            psi_ref,
            command,
            achieved: actuator.deflections,
            wind: last_wind,
            saturated,
        });
        nominal.push(NominalSample {
            time: t,
            state,
            deflections: actuator.deflections,
        });
        ff_rows.push(FeedforwardRow {
            t,
            altitude: state.altitude(),
            mu_p: command.mu_p,
            mu_y: command.mu_y,
        });

        if tick == n_ticks {
            break;
        }

        // Plant sub-steps with the tick's command held at the servo input.
        for j in 0..n_sub {
            let tj = (tick * n_sub + j) as f64 * dt_p;
            if let Some(gen) = &mut wind_gen {
                last_wind = gen.next(state.altitude());
            }
            let achieved = actuator.update(&act_cfg, command, dt_p);
            let prev_vx = state.inertial_velocity().x;
            let prev_alt = state.altitude();
            state = step_rigid_body(&plant, tj, &state, achieved, &last_wind, dt_p)?;

            if !burnout_seen && tj + dt_p >= plant.burn_time() {
                events.push(SimEvent {
                    time: plant.burn_time(),
                    kind: EventKind::Burnout,
                    altitude: state.altitude(),
                });
                burnout_seen = true;
            }
            let vx = state.inertial_velocity().x;
            if !climbing && vx > 1.0 {
                climbing = true;
            }
            if climbing && prev_vx > 0.0 && vx <= 0.0 {
                // Refine the crossing inside the step; near apogee both
                // velocity and altitude are locally linear in the fraction.
                let f = prev_vx / (prev_vx - vx);
                events.push(SimEvent {
                    time: tj + f * dt_p,
                    kind: EventKind::Apogee,
                    altitude: prev_alt + f * (state.altitude() - prev_alt),
                });
                break 'ticks;
            }
        }
    }

    Ok(RunOutput {
        log: SimLog {
            dt: dt_g,
            records,
            events,
        },
        nominal,
        feedforward: FeedforwardTable {
            dt: dt_g,
            rows: ff_rows,
        },
    })
}

/// Flies the scenario closed loop and reduces the log to metrics.
pub fn run_closed_loop(
    scenario: &ScenarioConfig,
    schedule: Option<&GainSchedule>,
    feedforward: Option<&FeedforwardTable>,
) -> Result<(SimLog, RunMetrics)> {
    let out = engine(scenario, schedule, feedforward, None)?;
    let metrics = compute_metrics(&out.log)?;
    Ok((out.log, metrics))
}

/// Disturbance-free nominal flight under PID tracking of the reference
/// program; the recorded commands become the feedforward table and the
/// state log feeds operating-point extraction.
pub fn generate_feedforward(
    scenario: &ScenarioConfig,
) -> Result<(FeedforwardTable, Vec<NominalSample>, SimLog)> {
    let mut nominal = scenario.clone();
    nominal.wind = None;
    nominal.exact_state = true;
    nominal.controller = ControllerKind::Pid;
    nominal.uncertainty.clear();
    // The PID path consumes a feedforward table; the nominal run is where
    // that table comes from, so it bootstraps with zero trim.
    let zero = FeedforwardTable {
        dt: nominal.dt_gnc,
        rows: vec![FeedforwardRow {
            t: 0.0,
            altitude: 0.0,
            mu_p: 0.0,
            mu_y: 0.0,
        }],
    };
    let out = engine(&nominal, None, Some(&zero), None)?;
    Ok((out.feedforward, out.nominal, out.log))
}

/// Everything the build pipeline produces from one scenario.
pub struct BuildArtifacts {
    pub feedforward: FeedforwardTable,
    pub points: Vec<OperatingPoint>,
    pub schedule: GainSchedule,
    pub nominal_log: SimLog,
    pub nominal_metrics: RunMetrics,
}

/// Chains the nominal run, operating-point extraction, and gain
/// synthesis.
pub fn run_nominal_and_build(scenario: &ScenarioConfig) -> Result<BuildArtifacts> {
    let (feedforward, samples, nominal_log) = generate_feedforward(scenario)?;
    let points = extract_operating_points(&scenario.vehicle, &samples, &ExtractOptions::default())?;
    let schedule = synthesize_schedule(&points, &scenario.weights)?;
    let nominal_metrics = compute_metrics(&nominal_log)?;
    Ok(BuildArtifacts {
        feedforward,
        points,
        schedule,
        nominal_log,
        nominal_metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAxis {
    Pitch,
    Yaw,
}

/// Standard step-response figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 10% to 90% rise time, s.
    pub rise_time_s: f64,
    /// Time to stay inside the +-2% band, s.
    pub settling_time_s: f64,
    /// Peak overshoot, percent of the step size.
    pub overshoot_pct: f64,
}

/// Linear-domain and nonlinear step responses around one flight point.
#[derive(Debug, Clone)]
pub struct StepResponse {
    pub linear: StepMetrics,
    pub nonlinear: StepMetrics,
    /// Response traces (time since injection, attitude response), rad.
    pub linear_trace: Vec<(f64, f64)>,
    pub nonlinear_trace: Vec<(f64, f64)>,
}

const STEP_WINDOW_MAX: f64 = 3.0;
const STEP_BURNOUT_MARGIN: f64 = 0.2;

/// Extracts rise, settling, and overshoot from a uniformly sampled
/// response that starts at zero and should converge to `target`.
fn step_metrics(dt: f64, y: &[f64], target: f64) -> Result<StepMetrics> {
    if y.len() < 3 || target == 0.0 {
        return Err(Error::Sim("step trace too short or zero-size step".into()));
    }
    let s: Vec<f64> = y.iter().map(|v| v / target).collect();
    let crossing = |level: f64| -> Option<f64> {
        for i in 1..s.len() {
            if s[i - 1] < level && s[i] >= level {
                let f = (level - s[i - 1]) / (s[i] - s[i - 1]);
                return Some((i as f64 - 1.0 + f) * dt);
            }
        }
        None
    };
    let t10 = crossing(0.1);
    let t90 = crossing(0.9);
    let (Some(t10), Some(t90)) = (t10, t90) else {
        return Err(Error::Sim(
            "step response never reached 90% of the command".into(),
        ));
    };
    let last_outside = s.iter().rposition(|v| (v - 1.0).abs() > 0.02);
    let settling = match last_outside {
        Some(i) if i + 1 < s.len() => (i + 1) as f64 * dt,
        Some(_) => {
            return Err(Error::Sim(
                "step response still outside the 2% band at the end of the window".into(),
            ))
        }
        None => 0.0,
    };
    let peak = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(StepMetrics {
        rise_time_s: t90 - t10,
        settling_time_s: settling,
        overshoot_pct: ((peak - 1.0) * 100.0).max(0.0),
    })
}

fn nearest_point<'a>(points: &'a [OperatingPoint], t: f64) -> Result<&'a OperatingPoint> {
    points
        .iter()
        .min_by(|a, b| {
            (a.time - t)
                .abs()
                .partial_cmp(&(b.time - t).abs())
                .unwrap()
        })
        .ok_or_else(|| Error::Config("no operating points".into()))
}

fn step_window(scenario: &ScenarioConfig, t_inject: f64) -> Result<f64> {
    let window = STEP_WINDOW_MAX
        .min(scenario.vehicle.burn_time() - STEP_BURNOUT_MARGIN - t_inject)
        .min(scenario.duration - t_inject);
    if window < 1.0 {
        return Err(Error::Config(format!(
            "step at t = {t_inject} s leaves less than 1 s of powered flight to measure"
        )));
    }
    Ok(window)
}

/// Steps the attitude reference on the decoupled linear plant frozen at
/// the operating point nearest `t_inject`, flown through the same
/// discrete controller, command clamp, and servo as the nonlinear
/// engine. Returns the metrics and the (time since injection, response)
/// trace sampled at the GNC rate.
pub fn linear_step_response(
    scenario: &ScenarioConfig,
    points: &[OperatingPoint],
    schedule: &GainSchedule,
    t_inject: f64,
    magnitude: f64,
    axis: StepAxis,
) -> Result<(StepMetrics, Vec<(f64, f64)>)> {
    let window = step_window(scenario, t_inject)?;
    let op = nearest_point(points, t_inject)?;
    let model = linearize(op);
    let dec = decouple(&model, op)?;
    let lon = axis == StepAxis::Pitch;
    let (a, b) = if lon {
        (&dec.lon_a, &dec.lon_b)
    } else {
        (&dec.lat_a, &dec.lat_b)
    };
    let (ad, bd) = zoh_discretize(a, b, scenario.dt_plant);
    let gains = gains_at(schedule, op.altitude);
    let limit = scenario.actuator.position_limit;
    let n = a.nrows();
    // Attitude is the last decoupled state and its rate the one before
    // it in both planes.
    let (att, rate) = (n - 1, n - 2);
    let mut x = DMatrix::zeros(n, 1);
    let mut lqi = LqiController::default();
    let mut servo = ActuatorState {
        deflections: Deflections { mu_p: gains.mu_p0, mu_y: 0.0 },
    };
    let ticks = (window / scenario.dt_gnc).round() as usize;
    let mut linear_y = Vec::with_capacity(ticks + 1);
    linear_y.push(0.0);
    for _ in 0..ticks {
        let meas = if lon {
            AttitudeMeasurement {
                theta: gains.theta0 + x[(att, 0)],
                psi: 0.0,
                q_ns: gains.q0 + x[(rate, 0)],
                r_ns: 0.0,
            }
        } else {
            AttitudeMeasurement {
                theta: gains.theta0,
                psi: x[(att, 0)],
                q_ns: gains.q0,
                r_ns: x[(rate, 0)],
            }
        };
        let cmd = AttitudeCommand {
            theta: gains.theta0 + if lon { magnitude } else { 0.0 },
            psi: if lon { 0.0 } else { magnitude },
        };
        let raw = lqi.step(&gains, &meas, &cmd, scenario.dt_gnc, limit);
        let clamped = Deflections {
            mu_p: raw.mu_p.clamp(-limit, limit),
            mu_y: raw.mu_y.clamp(-limit, limit),
        };
        for _ in 0..scenario.substeps() {
            let ach = servo.update(&scenario.actuator, clamped, scenario.dt_plant);
            let du = if lon { ach.mu_p - gains.mu_p0 } else { ach.mu_y };
            x = &ad * x + &bd * du;
        }
        linear_y.push(x[(att, 0)]);
    }
    let metrics = step_metrics(scenario.dt_gnc, &linear_y, magnitude)?;
    let trace = linear_y
        .iter()
        .enumerate()
        .map(|(i, &y)| (i as f64 * scenario.dt_gnc, y))
        .collect();
    Ok((metrics, trace))
}

/// Injects an attitude reference step at `t_inject` and measures the
/// response twice: on the closed-loop linear model frozen at the nearest
/// operating point, and on the full nonlinear plant (as the difference
/// against an unstepped run of the same scenario).
pub fn step_response_experiment(
    scenario: &ScenarioConfig,
    points: &[OperatingPoint],
    schedule: &GainSchedule,
    t_inject: f64,
    magnitude: f64,
    axis: StepAxis,
) -> Result<StepResponse> {
    let window = step_window(scenario, t_inject)?;
    let (linear, linear_trace) =
        linear_step_response(scenario, points, schedule, t_inject, magnitude, axis)?;

    // Nonlinear: disturbance-free closed-loop flights with and without
    // the reference step, differenced so the trajectory drift cancels.
    let mut base = scenario.clone();
    base.wind = None;
    base.exact_state = true;
    base.controller = ControllerKind::Lqi;
    base.uncertainty.clear();
    base.duration = t_inject + window;
    let spec = StepSpec {
        t_inject,
        d_theta: if axis == StepAxis::Pitch { magnitude } else { 0.0 },
        d_psi: if axis == StepAxis::Yaw { magnitude } else { 0.0 },
    };
    let quiet = engine(&base, Some(schedule), None, None)?;
    let stepped = engine(&base, Some(schedule), None, Some(spec))?;
    if quiet.log.records.len() != stepped.log.records.len() {
        return Err(Error::Sim("step and baseline runs ended at different times".into()));
    }
    let k0 = quiet
        .log
        .records
        .iter()
        .position(|r| r.t >= t_inject - 1e-9)
        .ok_or_else(|| Error::Sim("injection time beyond the run".into()))?;
    let pick = |r: &LogRecord| match axis {
        StepAxis::Pitch => r.truth.attitude.theta,
        StepAxis::Yaw => r.truth.attitude.psi,
    };
    let nonlinear_y: Vec<f64> = quiet.log.records[k0..]
        .iter()
        .zip(&stepped.log.records[k0..])
        .map(|(q, s)| pick(s) - pick(q))
        .collect();
    let nonlinear = step_metrics(scenario.dt_gnc, &nonlinear_y, magnitude)?;

    let nonlinear_trace = nonlinear_y
        .iter()
        .enumerate()
        .map(|(i, &y)| (i as f64 * scenario.dt_gnc, y))
        .collect();
    Ok(StepResponse {
        linear,
        nonlinear,
        linear_trace,
        nonlinear_trace,
    })
}

/// Open- and closed-loop spectra at one flight point.
#[derive(Debug, Clone)]
pub struct PolePoint {
    pub time: f64,
    pub altitude: f64,
    /// True for the pitch plane, false for the yaw plane.
    pub lon: bool,
    pub open: Vec<Complex<f64>>,
    pub closed: Vec<Complex<f64>>,
}

/// Eigenvalues of the decoupled plant (open loop) and of the augmented
/// design model under the scheduled partial feedback (closed loop), per
/// plane and per operating point.
pub fn pole_analysis(
    points: &[OperatingPoint],
    schedule: &GainSchedule,
) -> Result<Vec<PolePoint>> {
    let mut out = Vec::with_capacity(points.len() * 2);
    for op in points {
        let model = linearize(op);
        let dec = decouple(&model, op)?;
        let gains = gains_at(schedule, op.altitude);
        for lon in [true, false] {
            let open_a = if lon { &dec.lon_a } else { &dec.lat_a };
            let open = eigenvalues(open_a)?;
            let (a_aug, b_aug) = design_plane(&dec, lon);
            let k = if lon { gains.lon } else { gains.lat };
            let closed = eigenvalues(&partial_feedback_closed_loop(&a_aug, &b_aug, &k))?;
            out.push(PolePoint {
                time: op.time,
                altitude: op.altitude,
                lon,
                open,
                closed,
            });
        }
    }
    Ok(out)
}

/// Flattens pole sets to a numeric table: one row per eigenvalue with
/// plane (0 pitch, 1 yaw), loop (0 open, 1 closed), and stability flags.
pub fn poles_to_table(poles: &[PolePoint]) -> Table {
    let mut table = Table::new(&["t", "h", "plane", "loop", "re", "im", "stable"]);
    for p in poles {
        let plane = if p.lon { 0.0 } else { 1.0 };
        for (loop_id, eigs) in [(0.0, &p.open), (1.0, &p.closed)] {
            for e in eigs {
                table.push(vec![
                    p.time,
                    p.altitude,
                    plane,
                    loop_id,
                    e.re,
                    e.im,
                    if e.re < 0.0 { 1.0 } else { 0.0 },
                ]);
            }
        }
    }
    table
}

/// One row of a robustness sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub factor: f64,
    pub stable: bool,
    /// Present when the run survived to its end.
    pub metrics: Option<RunMetrics>,
}

/// Re-flies the powered segment with one plant parameter scaled; the
/// controller keeps its nominal schedule. Only the powered phase is
/// judged: past burnout an aerodynamically unstable airframe tumbles no
/// matter what the gimbal did, so coasting would only add noise to the
/// comparison. A destabilized run is recorded, not fatal.
pub fn robustness_sweep(
    scenario: &ScenarioConfig,
    schedule: &GainSchedule,
    feedforward: &FeedforwardTable,
    parameter: &str,
    factors: &[f64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(factors.len());
    for &factor in factors {
        let mut s = scenario.clone();
        s.uncertainty.insert(parameter.to_string(), factor);
        s.duration = s.duration.min(s.vehicle.burn_time());
        s.validate()?;
        match run_closed_loop(&s, Some(schedule), Some(feedforward)) {
            Ok((_, metrics)) => rows.push(SweepRow {
                factor,
                stable: true,
                metrics: Some(metrics),
            }),
            Err(Error::Sim(_)) | Err(Error::Singularity { .. }) => rows.push(SweepRow {
                factor,
                stable: false,
                metrics: None,
            }),
            Err(other) => return Err(other),
        }
    }
    Ok(rows)
}

pub fn sweep_to_table(rows: &[SweepRow]) -> Table {
    let mut table = Table::new(&[
        "factor",
        "stable",
        "sum_sq_pitch_error_deg2",
        "sum_sq_yaw_error_deg2",
        "rms_mu_p_deg",
        "rms_mu_y_deg",
        "apogee_m",
        "max_velocity_ms",
        "time_to_apogee_s",
    ]);
    for r in rows {
        let m = r.metrics;
        let get = |f: fn(&RunMetrics) -> f64| m.as_ref().map(f).unwrap_or(f64::NAN);
        table.push(vec![
            r.factor,
            if r.stable { 1.0 } else { 0.0 },
            get(|m| m.sum_sq_pitch_error_deg2),
            get(|m| m.sum_sq_yaw_error_deg2),
            get(|m| m.rms_mu_p_deg),
            get(|m| m.rms_mu_y_deg),
            get(|m| m.apogee_m),
            get(|m| m.max_velocity_ms),
            get(|m| m.time_to_apogee_s),
        ]);
    }
    table
}

/// Worst filter tracking errors over a joint truth/filter integration.
#[derive(Debug, Clone, Copy)]
pub struct KinematicExactness {
    pub max_attitude_error_rad: f64,
    pub max_position_error_m: f64,
}

/// Integrates the plant and both complementary filters as one continuous
/// system, the filters consuming noise-free measurements evaluated at
/// every integration stage. With exact initialization the filter states
/// ride the truth manifold; the returned maxima are pure integration
/// roundoff and bound the structural fidelity of the filter equations.
pub fn kinematic_exactness_run(
    scenario: &ScenarioConfig,
    schedule: &GainSchedule,
) -> Result<KinematicExactness> {
    let mut quiet = scenario.clone();
    quiet.wind = None;
    quiet.exact_state = true;
    quiet.controller = ControllerKind::Lqi;
    quiet.uncertainty.clear();
    quiet.validate()?;
    schedule.validate()?;

    let plant = quiet.vehicle.clone();
    let act_cfg = quiet.actuator;
    let dt_p = quiet.dt_plant;
    let dt_g = quiet.dt_gnc;
    let n_sub = quiet.substeps();
    let n_ticks = (quiet.duration / dt_g + 1e-9).floor() as u64;

    let (l1a, l2a) = AttitudeFilter::new(Vector3::zeros()).gains();
    let (l1p, l2p, l3p) = PositionFilter::new(Vector3::zeros(), Vector3::zeros()).gains();

    let truth0 = quiet.initial_state()?;
    // Joint state: truth (13), attitude filter (6), position filter (9).
    let mut x = [0.0; 28].to_vec();
    x[..13].copy_from_slice(&truth0.to_array());
    x[13..16].copy_from_slice(truth0.attitude.as_vector().as_slice());
    x[19..22].copy_from_slice(truth0.position.as_slice());
    x[22..25].copy_from_slice(truth0.inertial_velocity().as_slice());

    let wind = Vector3::zeros();
    let mut actuator = ActuatorState::default();
    let mut lqi = LqiController::default();
    let mut chi = 0.0_f64;
    let mut max_att = 0.0_f64;
    let mut max_pos = 0.0_f64;
    let mut climbing = false;

    'ticks: for tick in 0..n_ticks {
        let t = (tick * n_sub) as f64 * dt_p;
        let theta_ref = quiet.pitch_program.eval(t);

        // Control from the co-integrated estimates.
        let att_est = Vector3::new(x[13], x[14], x[15]);
        let gyro_bias = Vector3::new(x[16], x[17], x[18]);
        let rate_est = Vector3::new(x[6], x[7], x[8]) - gyro_bias;
        let (q_ns, r_ns) = despin_rates(rate_est.y, rate_est.z, chi);
        let gains = gains_at(schedule, x[19]);
        let u = lqi.step(
            &gains,
            &AttitudeMeasurement {
                theta: att_est.y,
                psi: att_est.z,
                q_ns,
                r_ns,
            },
            &AttitudeCommand {
                theta: theta_ref,
                psi: 0.0,
            },
            dt_g,
            act_cfg.position_limit,
        );
        let cmd = respin_commands(u, chi);
        chi += rate_est.x * dt_g;
        let limit = act_cfg.position_limit;
        let command = Deflections {
            mu_p: cmd.mu_p.clamp(-limit, limit),
            mu_y: cmd.mu_y.clamp(-limit, limit),
        };

        for j in 0..n_sub {
            let tj = (tick * n_sub + j) as f64 * dt_p;
            let defl = actuator.update(&act_cfg, command, dt_p);
            let mut rhs = |tt: f64, z: &[f64]| -> Result<Vec<f64>> {
                let truth = RigidBodyState::from_array(z[..13].try_into().unwrap())?;
                let (d, accel) = dynamics_with_acceleration(&plant, tt, &truth, defl, &wind)?;
                let lam_hat = Vector3::new(z[13], z[14], z[15]);
                let bw_hat = Vector3::new(z[16], z[17], z[18]);
                let (dl, db) = AttitudeFilter::continuous_dynamics(
                    &lam_hat,
                    &bw_hat,
                    &l1a,
                    &l2a,
                    &truth.attitude.as_vector(),
                    &truth.omega,
                )?;
                let att = EulerAngles::from_vector(&lam_hat)?;
                let (dp, dv, dba) = PositionFilter::continuous_dynamics(
                    &Vector3::new(z[19], z[20], z[21]),
                    &Vector3::new(z[22], z[23], z[24]),
                    &Vector3::new(z[25], z[26], z[27]),
                    &l1p,
                    &l2p,
                    &l3p,
                    &att,
                    &truth.position,
                    &accel,
                );
                let mut out = Vec::with_capacity(28);
                out.extend_from_slice(&d.to_array());
                out.extend_from_slice(dl.as_slice());
                out.extend_from_slice(db.as_slice());
                out.extend_from_slice(dp.as_slice());
                out.extend_from_slice(dv.as_slice());
                out.extend_from_slice(dba.as_slice());
                Ok(out)
            };
            let prev = RigidBodyState::from_array(x[..13].try_into().unwrap())?;
            let prev_vx = prev.inertial_velocity().x;
            x = integrate_rk4(&mut rhs, tj, &x, dt_p)?;

            for i in 0..3 {
                max_att = max_att.max((x[13 + i] - x[9 + i]).abs());
                max_pos = max_pos.max((x[19 + i] - x[i]).abs());
            }
            let truth = RigidBodyState::from_array(x[..13].try_into().unwrap())?;
            let vx = truth.inertial_velocity().x;
            if !climbing && vx > 1.0 {
                climbing = true;
            }
            if climbing && prev_vx > 0.0 && vx <= 0.0 {
                break 'ticks;
            }
        }
    }

    Ok(KinematicExactness {
        max_attitude_error_rad: max_att,
        max_position_error_m: max_pos,
    })
}

/// Flight vehicle shipped as the default configuration: a 3.6 m finless
/// sounding rocket with a regressive boost-sustain motor. The thrust
/// knots were fixed by examples/tune_thrust.rs so the vertical flight
/// peaks near 82 m/s and tops out near 4.9 km at about 100 s.
pub fn default_vehicle() -> VehicleConfig {
    let thrust_curve = Table1D::new(vec![
        (0.0, 950.5),
        (10.0, 906.2),
        (25.0, 837.2),
        (40.0, 751.6),
        (45.0, 640.2),
        (50.0, 453.6),
        (60.0, 387.5),
        (80.0, 349.7),
        (97.0, 322.2),
    ])
    .unwrap();
    // Sized so the burn consumes exactly the propellant load.
    let exhaust_velocity = thrust_curve.integral_to(97.0) / (82.9 - 40.0);
    VehicleConfig {
        diameter: 0.24,
        length: 3.57,
        total_mass: 82.9,
        dry_mass: 40.0,
        x_cm: Table1D::new(vec![(0.0, 1.95), (97.0, 1.70)]).unwrap(),
        j_l: Table1D::new(vec![(0.0, 0.60), (97.0, 0.29)]).unwrap(),
        j_t: Table1D::new(vec![(0.0, 88.0), (97.0, 42.5)]).unwrap(),
        x_gimbal: 3.45,
        thrust_curve,
        exhaust_velocity,
        exit_pressure: 90_000.0,
        exit_area: 0.002,
        c_a: Table1D::constant(0.45),
        c_n_alpha: Table1D::constant(2.2),
        c_y_beta: Table1D::constant(-2.2),
        x_cp: Table1D::constant(1.10),
        c_l_p: -1.0,
        c_m_q: -30.0,
        c_n_r: -30.0,
        k_roll: 2.0,
    }
}

fn scenario_template(vehicle: VehicleConfig, pitch_program: Table1D) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCENARIO_SCHEMA_VERSION,
        vehicle,
        pitch_program,
        wind: None,
        sensors: SensorSuiteConfig::default(),
        exact_state: false,
        weights: LqiWeights::default(),
        controller: ControllerKind::Lqi,
        pid: PidGains::default(),
        actuator: ActuatorConfig::default(),
        uncertainty: BTreeMap::new(),
        initial: InitialStateConfig::default(),
        dt_plant: 1e-3,
        dt_gnc: 1e-2,
        duration: 120.0,
        seed: 1,
    }
}

/// Straight-up reference flight in calm air.
pub fn vertical_scenario() -> ScenarioConfig {
    scenario_template(default_vehicle(), Table1D::constant(0.0))
}

/// Default ascent: vertical to 25 s, a constant-rate pitch-over to 8
/// degrees by 45 s, then attitude hold. Carries a light mean-wind
/// profile with gusts for disturbance runs.
pub fn ascent_scenario() -> ScenarioConfig {
    let theta_f = 8.0_f64.to_radians();
    let program = Table1D::new(vec![
        (0.0, 0.0),
        (25.0, 0.0),
        (45.0, theta_f),
        (97.0, theta_f),
    ])
    .unwrap();
    let mut scenario = scenario_template(default_vehicle(), program);
    scenario.wind = Some(WindConfig {
        mean_profile: vec![
            crate::environment::WindProfilePoint {
                altitude: 0.0,
                speed: 2.0,
                direction: 0.0,
            },
            crate::environment::WindProfilePoint {
                altitude: 1500.0,
                speed: 4.0,
                direction: 0.4,
            },
            crate::environment::WindProfilePoint {
                altitude: 4000.0,
                speed: 6.0,
                direction: 0.9,
            },
        ],
        gust: crate::environment::GustConfig {
            intensity: 1.0,
            ..Default::default()
        },
    });
    scenario
}
