//! Small-signal models of the ascent dynamics about nominal trajectory
//! points.
//!
//! The model keeps seven states, x = (du, dv, dw, dq, dr, dtheta, dpsi),
//! and the two gimbal deflections as inputs. Roll rate and roll angle are
//! held at zero (the roll damper keeps them there on the nominal), and the
//! slowly varying quantities — dynamic pressure, thrust, mass, gravity,
//! and total airspeed — are frozen at their trim values. The incidence
//! angle alpha = atan2(w, u) stays free because both of its arguments are
//! states.
//!
//! Two independent routes produce the Jacobians:
//!
//! * [`linearize`] evaluates closed-form coefficient expressions;
//! * [`finite_difference_model`] central-differences [`reduced_rhs`], the
//!   frozen-parameter right-hand side itself.
//!
//! They are checked against each other in the test suite and must never be
//! merged into one implementation, since each guards the other.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::environment::{atmosphere, gravity, MAX_ALTITUDE};
use crate::vehicle::{aero_angles, Deflections, RigidBodyState, VehicleConfig, AIRSPEED_FLOOR};
use crate::{Error, Result};

/// State ordering of the seven-state model.
pub const IDX_U: usize = 0;
pub const IDX_V: usize = 1;
pub const IDX_W: usize = 2;
pub const IDX_Q: usize = 3;
pub const IDX_R: usize = 4;
pub const IDX_THETA: usize = 5;
pub const IDX_PSI: usize = 6;

/// Pitch-plane states (du, dw, dq, dtheta) driven by the pitch deflection.
pub const LON_STATES: [usize; 4] = [IDX_U, IDX_W, IDX_Q, IDX_THETA];
/// Yaw-plane states (dv, dr, dpsi) driven by the yaw deflection.
pub const LAT_STATES: [usize; 3] = [IDX_V, IDX_R, IDX_PSI];

/// Largest trim magnitude of the lateral quantities (v0, r0, phi0, psi0,
/// mu_y0) for which the planes decouple.
pub const DECOUPLE_TOL: f64 = 1e-9;

/// One record of a disturbance-free nominal flight.
#[derive(Debug, Clone)]
pub struct NominalSample {
    pub time: f64,
    pub state: RigidBodyState,
    pub deflections: Deflections,
}

/// Trajectory point with every quantity the linear model freezes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    pub time: f64,
    pub altitude: f64,
    pub u0: f64,
    pub v0: f64,
    pub w0: f64,
    pub q0: f64,
    pub r0: f64,
    pub phi0: f64,
    pub theta0: f64,
    pub psi0: f64,
    pub mu_p0: f64,
    pub mu_y0: f64,
    pub mass: f64,
    pub thrust: f64,
    pub qbar: f64,
    /// Total airspeed at trim; the beta and damping terms freeze it.
    pub speed: f64,
    pub gravity: f64,
    /// Gimbal-to-center-of-mass lever arm.
    pub lever: f64,
    pub j_t: f64,
    pub c_a: f64,
    pub c_n_alpha: f64,
    pub c_y_beta: f64,
    pub c_m_q: f64,
    pub c_n_r: f64,
    /// (x_cp - x_cm) / d; negative ahead-of-cp layouts are unstable.
    pub static_margin: f64,
    pub diameter: f64,
    pub area: f64,
}

impl OperatingPoint {
    /// Builds an operating point from a nominal-flight sample, evaluating
    /// atmosphere, thrust, mass properties, and aero coefficients there.
    pub fn from_sample(cfg: &VehicleConfig, sample: &NominalSample) -> Result<Self> {
        let state = &sample.state;
        if state.omega.x.abs() > 1e-9 {
            return Err(Error::Config(format!(
                "operating point at t = {} has roll rate {:.3e}; the model assumes p = 0",
                sample.time, state.omega.x
            )));
        }
        let altitude = state.altitude().clamp(0.0, MAX_ALTITUDE);
        let atmo = atmosphere(altitude)?;
        // Nominal flights are flown without wind, so the body velocity is
        // the air-relative velocity.
        let angles = aero_angles(&state.velocity, atmo.speed_of_sound);
        if angles.speed <= AIRSPEED_FLOOR {
            return Err(Error::Config(format!(
                "operating point at t = {} is below the airspeed floor",
                sample.time
            )));
        }
        if state.velocity.x <= 0.0 {
            return Err(Error::Config(format!(
                "operating point at t = {} has non-positive axial velocity",
                sample.time
            )));
        }
        let qbar = 0.5 * atmo.density * angles.speed * angles.speed;
        let props = cfg.mass_properties(sample.time);
        let thrust = cfg.thrust(sample.time, altitude)?;
        let x_cp = cfg.x_cp.eval(angles.mach);
        Ok(OperatingPoint {
            time: sample.time,
            altitude,
            u0: state.velocity.x,
            v0: state.velocity.y,
            w0: state.velocity.z,
            q0: state.omega.y,
            r0: state.omega.z,
            phi0: state.attitude.phi,
            theta0: state.attitude.theta,
            psi0: state.attitude.psi,
            mu_p0: sample.deflections.mu_p,
            mu_y0: sample.deflections.mu_y,
            mass: state.mass,
            thrust,
            qbar,
            speed: angles.speed,
            gravity: gravity(altitude),
            lever: cfg.x_gimbal - props.x_cm,
            j_t: props.j_t,
            c_a: cfg.c_a.eval(angles.mach),
            c_n_alpha: cfg.c_n_alpha.eval(angles.mach),
            c_y_beta: cfg.c_y_beta.eval(angles.mach),
            c_m_q: cfg.c_m_q,
            c_n_r: cfg.c_n_r,
            static_margin: (x_cp - props.x_cm) / cfg.diameter,
            diameter: cfg.diameter,
            area: cfg.reference_area(),
        })
    }
}

/// Seven-state, two-input Jacobian pair.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearModel {
    /// Largest absolute entry difference across both matrices.
    pub fn max_abs_diff(&self, other: &LinearModel) -> f64 {
        let da = (&self.a - &other.a).abs().max();
        let db = (&self.b - &other.b).abs().max();
        da.max(db)
    }
}

/// Closed-form Jacobians at an operating point.
pub fn linearize(op: &OperatingPoint) -> LinearModel {
    let mut a = DMatrix::zeros(7, 7);
    let mut b = DMatrix::zeros(7, 2);

    let g = op.gravity;
    let (s_phi, c_phi) = op.phi0.sin_cos();
    let (s_th, c_th) = op.theta0.sin_cos();
    let (s_ps, c_ps) = op.psi0.sin_cos();
    let (s_mp, c_mp) = op.mu_p0.sin_cos();
    let (s_my, c_my) = op.mu_y0.sin_cos();

    let qs_m = op.qbar * op.area / op.mass;
    let qsd_jt = op.qbar * op.area * op.diameter / op.j_t;
    let t_m = op.thrust / op.mass;
    let tl_jt = op.thrust * op.lever / op.j_t;
    // Planar speed that alpha = atan2(w, u) differentiates against.
    let uw2 = op.u0 * op.u0 + op.w0 * op.w0;
    // d(beta)/dv with the total speed frozen.
    let beta_den = (1.0 - (op.v0 / op.speed).powi(2)).sqrt() * op.speed;
    let damp = op.diameter / (2.0 * op.speed);

    a[(IDX_U, IDX_V)] = op.r0;
    a[(IDX_U, IDX_W)] = -op.q0;
    a[(IDX_U, IDX_Q)] = -op.w0;
    a[(IDX_U, IDX_R)] = op.v0;
    a[(IDX_U, IDX_THETA)] = g * s_th * c_ps;
    a[(IDX_U, IDX_PSI)] = g * c_th * s_ps;

    a[(IDX_V, IDX_U)] = -op.r0;
    a[(IDX_V, IDX_V)] = qs_m * op.c_y_beta / beta_den;
    a[(IDX_V, IDX_R)] = -op.u0;
    a[(IDX_V, IDX_THETA)] = -g * s_phi * c_th * c_ps;
    a[(IDX_V, IDX_PSI)] = g * (s_phi * s_th * s_ps + c_phi * c_ps);

    a[(IDX_W, IDX_U)] = op.q0 + qs_m * op.c_n_alpha * op.w0 / uw2;
    a[(IDX_W, IDX_W)] = -qs_m * op.c_n_alpha * op.u0 / uw2;
    a[(IDX_W, IDX_Q)] = op.u0;
    a[(IDX_W, IDX_THETA)] = -g * c_phi * c_th * c_ps;
    a[(IDX_W, IDX_PSI)] = -g * (s_phi * c_ps - c_phi * s_th * s_ps);

    a[(IDX_Q, IDX_U)] = qsd_jt * op.static_margin * op.c_n_alpha * op.w0 / uw2;
    a[(IDX_Q, IDX_W)] = -qsd_jt * op.static_margin * op.c_n_alpha * op.u0 / uw2;
    a[(IDX_Q, IDX_Q)] = qsd_jt * op.c_m_q * damp;

    a[(IDX_R, IDX_V)] = -qsd_jt * op.static_margin * op.c_y_beta / beta_den;
    a[(IDX_R, IDX_R)] = qsd_jt * op.c_n_r * damp;

    a[(IDX_THETA, IDX_Q)] = c_phi;
    a[(IDX_THETA, IDX_R)] = -s_phi;

    a[(IDX_PSI, IDX_Q)] = s_phi / c_th;
    a[(IDX_PSI, IDX_R)] = c_phi / c_th;
    a[(IDX_PSI, IDX_THETA)] = (op.q0 * s_phi + op.r0 * c_phi) * s_th / (c_th * c_th);

    b[(IDX_U, 0)] = -t_m * s_mp * c_my;
    b[(IDX_U, 1)] = -t_m * c_mp * s_my;
    b[(IDX_V, 0)] = t_m * s_mp * s_my;
    b[(IDX_V, 1)] = -t_m * c_mp * c_my;
    b[(IDX_W, 0)] = -t_m * c_mp;
    b[(IDX_Q, 0)] = -tl_jt * c_mp;
    b[(IDX_R, 0)] = -tl_jt * s_mp * s_my;
    b[(IDX_R, 1)] = tl_jt * c_mp * c_my;

    LinearModel { a, b }
}

/// Frozen-parameter right-hand side the seven-state model is the Jacobian
/// of. `x` holds absolute values (u, v, w, q, r, theta, psi) and `u` the
/// absolute deflections (mu_p, mu_y); roll rate and roll angle are fixed
/// at zero and phi0 respectively.
pub fn reduced_rhs(op: &OperatingPoint, x: &[f64; 7], u: &[f64; 2]) -> [f64; 7] {
    let (vu, vv, vw, q, r, theta, psi) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
    let (mu_p, mu_y) = (u[0], u[1]);

    let g = op.gravity;
    let (s_phi, c_phi) = op.phi0.sin_cos();
    let (s_th, c_th) = theta.sin_cos();
    let (s_ps, c_ps) = psi.sin_cos();
    let (s_mp, c_mp) = mu_p.sin_cos();
    let (s_my, c_my) = mu_y.sin_cos();

    let qs_m = op.qbar * op.area / op.mass;
    let qsd_jt = op.qbar * op.area * op.diameter / op.j_t;
    let t_m = op.thrust / op.mass;
    let tl_jt = op.thrust * op.lever / op.j_t;
    let damp = op.diameter / (2.0 * op.speed);

    let alpha = vw.atan2(vu);
    let beta = (vv / op.speed).asin();
    let c_n = op.c_n_alpha * alpha;
    let c_y = op.c_y_beta * beta;
    let c_m = -c_n * op.static_margin + op.c_m_q * q * damp;
    let c_n_yaw = -c_y * op.static_margin + op.c_n_r * r * damp;

    [
        -g * c_th * c_ps - qs_m * op.c_a + t_m * c_mp * c_my - q * vw + r * vv,
        -g * (s_phi * s_th * c_ps - c_phi * s_ps) + qs_m * c_y - t_m * c_mp * s_my - r * vu,
        -g * (c_phi * s_th * c_ps + s_phi * s_ps) - qs_m * c_n - t_m * s_mp + q * vu,
        (qsd_jt * c_m - tl_jt * s_mp) * 1.0,
        qsd_jt * c_n_yaw + tl_jt * c_mp * s_my,
        q * c_phi - r * s_phi,
        (q * s_phi + r * c_phi) / c_th,
    ]
}

/// Jacobians by central differences of [`reduced_rhs`]. This is the
/// independent check on [`linearize`]; keep the two implementations
/// separate.
pub fn finite_difference_model(op: &OperatingPoint) -> LinearModel {
    let x0 = [op.u0, op.v0, op.w0, op.q0, op.r0, op.theta0, op.psi0];
    let u0 = [op.mu_p0, op.mu_y0];
    let mut a = DMatrix::zeros(7, 7);
    let mut b = DMatrix::zeros(7, 2);
    for j in 0..7 {
        let h = 1e-6 * x0[j].abs().max(1.0);
        let mut xp = x0;
        xp[j] += h;
        let mut xm = x0;
        xm[j] -= h;
        let fp = reduced_rhs(op, &xp, &u0);
        let fm = reduced_rhs(op, &xm, &u0);
        for i in 0..7 {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    for j in 0..2 {
        let h = 1e-6 * u0[j].abs().max(1.0);
        let mut up = u0;
        up[j] += h;
        let mut um = u0;
        um[j] -= h;
        let fp = reduced_rhs(op, &x0, &up);
        let fm = reduced_rhs(op, &x0, &um);
        for i in 0..7 {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    LinearModel { a, b }
}

/// Pitch- and yaw-plane submodels of a seven-state model.
#[derive(Debug, Clone)]
pub struct DecoupledModel {
    /// (du, dw, dq, dtheta) with input dmu_p.
    pub lon_a: DMatrix<f64>,
    pub lon_b: DMatrix<f64>,
    /// (dv, dr, dpsi) with input dmu_y.
    pub lat_a: DMatrix<f64>,
    pub lat_b: DMatrix<f64>,
}

/// Splits the model into pitch and yaw planes. Valid only at trim points
/// whose lateral quantities vanish; every discarded cross coupling is
/// checked against [`DECOUPLE_TOL`] rather than silently dropped.
pub fn decouple(model: &LinearModel, op: &OperatingPoint) -> Result<DecoupledModel> {
    for (name, value) in [
        ("v0", op.v0),
        ("r0", op.r0),
        ("phi0", op.phi0),
        ("psi0", op.psi0),
        ("mu_y0", op.mu_y0),
    ] {
        if value.abs() > DECOUPLE_TOL {
            return Err(Error::Decoupling(format!(
                "trim value {name} = {value:.3e} exceeds {DECOUPLE_TOL:.1e}"
            )));
        }
    }

    let mut worst = 0.0f64;
    for &i in &LON_STATES {
        for &j in &LAT_STATES {
            worst = worst.max(model.a[(i, j)].abs()).max(model.a[(j, i)].abs());
        }
        worst = worst.max(model.b[(i, 1)].abs());
    }
    for &i in &LAT_STATES {
        worst = worst.max(model.b[(i, 0)].abs());
    }
    if worst > DECOUPLE_TOL {
        return Err(Error::Decoupling(format!(
            "cross coupling {worst:.3e} exceeds {DECOUPLE_TOL:.1e}"
        )));
    }

    let pick = |idx: &[usize], col: usize| {
        let n = idx.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 1);
        for (ri, &i) in idx.iter().enumerate() {
            for (ci, &j) in idx.iter().enumerate() {
                a[(ri, ci)] = model.a[(i, j)];
            }
            b[(ri, 0)] = model.b[(i, col)];
        }
        (a, b)
    };
    let (lon_a, lon_b) = pick(&LON_STATES, 0);
    let (lat_a, lat_b) = pick(&LAT_STATES, 1);
    Ok(DecoupledModel {
        lon_a,
        lon_b,
        lat_a,
        lat_b,
    })
}

/// Operating-point extraction settings.
#[derive(Debug, Clone)]
pub struct ExtractOptions {
    /// Spacing between candidate points in seconds.
    pub interval: f64,
    /// Candidates slower than this are skipped (the model divides by
    /// airspeed).
    pub min_speed: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            interval: 5.0,
            min_speed: 2.0,
        }
    }
}

/// Walks a nominal trajectory and produces operating points at regular
/// intervals over the powered phase. Altitudes must come out strictly
/// increasing since gain schedules interpolate on altitude.
pub fn extract_operating_points(
    cfg: &VehicleConfig,
    samples: &[NominalSample],
    opts: &ExtractOptions,
) -> Result<Vec<OperatingPoint>> {
    if samples.is_empty() {
        return Err(Error::Config("empty nominal trajectory".into()));
    }
    if opts.interval <= 0.0 {
        return Err(Error::Config("extraction interval must be positive".into()));
    }
    let burn_time = cfg.burn_time();
    let t_end = samples.last().unwrap().time;
    let mut points = Vec::new();
    let mut k = 1usize;
    loop {
        let t = opts.interval * k as f64;
        if t >= burn_time || t > t_end {
            break;
        }
        k += 1;
        // Nearest recorded sample; the logger runs at a fixed rate, so
        // this lands within half a plant step of the target.
        let idx = match samples.binary_search_by(|s| s.time.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) if i == 0 => 0,
            Err(i) if i >= samples.len() => samples.len() - 1,
            Err(i) => {
                if (samples[i].time - t).abs() < (t - samples[i - 1].time).abs() {
                    i
                } else {
                    i - 1
                }
            }
        };
        let sample = &samples[idx];
        let speed = sample.state.velocity.norm();
        if speed < opts.min_speed {
            continue;
        }
        let op = OperatingPoint::from_sample(cfg, sample)?;
        if op.thrust <= 0.0 {
            continue;
        }
        if let Some(prev) = points.last() {
            let prev: &OperatingPoint = prev;
            if op.altitude <= prev.altitude {
                return Err(Error::Config(format!(
                    "operating-point altitudes are not strictly increasing at t = {}",
                    op.time
                )));
            }
        }
        points.push(op);
    }
    if points.is_empty() {
        return Err(Error::Config(
            "no usable operating points on the nominal trajectory".into(),
        ));
    }
    Ok(points)
}
