//! Vehicle configuration and six degree of freedom rigid-body dynamics.
//!
//! The translational states are the body-frame velocity (u, v, w) and the
//! inertial position (x_i up); rotational states are body rates (p, q, r)
//! and 3-2-1 Euler angles. Mass is a state integrated from the dynamic
//! thrust. Forces:
//!
//!  - gravity, rotated into the body frame, inverse-square with altitude;
//!  - propulsion through a two-axis gimbal (pitch deflection mu_p about
//!    y_b, yaw deflection mu_y about z_b) acting at the nozzle a lever arm
//!    l = x_gimbal - x_cm behind the center of mass;
//!  - aerodynamics from incidence-linear normal/side force coefficients,
//!    an axial drag coefficient, and rate-damping derivatives, acting at
//!    the center of pressure;
//!  - a configurable roll damper torque tau_r = -k_roll * p standing in
//!    for the (unmodeled) roll control loop.
//!
//! Attitude rates use the Euler-angle kinematics from [`crate::frames`]
//! and inherit its pitch singularity guard.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::environment::{atmosphere, gravity};
use crate::frames::{euler_rates, rotation_from_euler, EulerAngles, DEFAULT_SINGULARITY_MARGIN};
use crate::{Error, Result};

/// Relative airspeed below which the incidence angles are treated as zero.
pub const AIRSPEED_FLOOR: f64 = 0.5;

/// Piecewise-linear lookup table with strictly increasing keys. Evaluation
/// clamps to the end values outside the key range.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Table1D {
    points: Vec<(f64, f64)>,
}

impl Table1D {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Table("table must have at least one point".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Table(format!(
                    "table keys must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points.iter().any(|(k, v)| !k.is_finite() || !v.is_finite()) {
            return Err(Error::Table("table entries must be finite".into()));
        }
        Ok(Self { points })
    }

    /// Constant table.
    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        if x >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let i = pts.partition_point(|p| p.0 <= x) - 1;
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Integral of the table from the first key to `x`, treating the curve
    /// as zero outside the key range (trapezoid rule is exact here).
    pub fn integral_to(&self, x: f64) -> f64 {
        let pts = &self.points;
        let mut acc = 0.0;
        for w in pts.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if x <= x0 {
                break;
            }
            if x >= x1 {
                acc += 0.5 * (y0 + y1) * (x1 - x0);
            } else {
                let ym = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
                acc += 0.5 * (y0 + ym) * (x - x0);
                break;
            }
        }
        acc
    }

    pub fn first_key(&self) -> f64 {
        self.points[0].0
    }

    pub fn last_key(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

impl TryFrom<Vec<(f64, f64)>> for Table1D {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<Table1D> for Vec<(f64, f64)> {
    fn from(t: Table1D) -> Self {
        t.points
    }
}

/// Full vehicle description. Time-keyed tables cover the burn; evaluation
/// clamps afterwards, so the last knot values are the burnout properties.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    /// Body diameter, m (aerodynamic reference length).
    pub diameter: f64,
    /// Vehicle length, m.
    pub length: f64,
    /// Lift-off mass, kg.
    pub total_mass: f64,
    /// Mass without propellant, kg.
    pub dry_mass: f64,
    /// Center of mass location from the nose tip vs time, m.
    pub x_cm: Table1D,
    /// Longitudinal (roll) moment of inertia vs time, kg m^2.
    pub j_l: Table1D,
    /// Transverse (pitch/yaw) moment of inertia vs time, kg m^2.
    pub j_t: Table1D,
    /// Gimbal pivot location from the nose tip, m.
    pub x_gimbal: f64,
    /// Dynamic (momentum) thrust vs time from ignition, N. Zero after the
    /// last knot; the last knot time is the burn time.
    pub thrust_curve: Table1D,
    /// Effective exhaust velocity, m/s; mass flow is dynamic thrust / v_e.
    pub exhaust_velocity: f64,
    /// Nozzle exit pressure, Pa (static thrust term).
    pub exit_pressure: f64,
    /// Nozzle exit area, m^2.
    pub exit_area: f64,
    /// Axial force coefficient vs Mach.
    pub c_a: Table1D,
    /// Normal force coefficient slope vs Mach, 1/rad.
    pub c_n_alpha: Table1D,
    /// Side force coefficient slope vs Mach, 1/rad (negative: positive
    /// sideslip pushes the vehicle toward -y_b).
    pub c_y_beta: Table1D,
    /// Center of pressure location from the nose tip vs Mach, m.
    pub x_cp: Table1D,
    /// Roll damping coefficient (on p d / 2V).
    pub c_l_p: f64,
    /// Combined pitch damping coefficient (on q d / 2V).
    pub c_m_q: f64,
    /// Combined yaw damping coefficient (on r d / 2V).
    pub c_n_r: f64,
    /// Roll damper torque gain, N m s.
    pub k_roll: f64,
}

impl VehicleConfig {
    /// Aerodynamic reference area, m^2.
    pub fn reference_area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }

    /// Burn duration, s.
    pub fn burn_time(&self) -> f64 {
        self.thrust_curve.last_key()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_mass > self.dry_mass && self.dry_mass > 0.0) {
            return Err(Error::Config("need total_mass > dry_mass > 0".into()));
        }
        if self.diameter <= 0.0 || self.length <= 0.0 || self.exhaust_velocity <= 0.0 {
            return Err(Error::Config(
                "diameter, length, exhaust velocity must be positive".into(),
            ));
        }
        if self.exit_area < 0.0 || self.exit_pressure < 0.0 || self.k_roll < 0.0 {
            return Err(Error::Config(
                "exit area, exit pressure, roll damper gain must be non-negative".into(),
            ));
        }
        // Propellant bookkeeping: the thrust-curve impulse divided by v_e
        // must consume the propellant load.
        let burned = self.thrust_curve.integral_to(self.burn_time()) / self.exhaust_velocity;
        let propellant = self.total_mass - self.dry_mass;
        if (burned - propellant).abs() > 0.02 * propellant {
            return Err(Error::Config(format!(
                "thrust curve burns {burned:.2} kg but propellant load is {propellant:.2} kg"
            )));
        }
        Ok(())
    }

    /// Interpolated mass, inertias, and center of mass at time `t` since
    /// ignition. Mass comes from the thrust-curve integral, so it agrees
    /// with the integrated mass state on nominal flights.
    pub fn mass_properties(&self, t: f64) -> MassProperties {
        let m = self.total_mass - self.thrust_curve.integral_to(t) / self.exhaust_velocity;
        MassProperties {
            mass: m.max(self.dry_mass),
            j_l: self.j_l.eval(t),
            j_t: self.j_t.eval(t),
            x_cm: self.x_cm.eval(t),
        }
    }

    /// Total thrust magnitude at time `t` and altitude `h`: dynamic term
    /// plus the pressure term (p_e - p_a) A_e, clamped at zero.
    pub fn thrust(&self, t: f64, h: f64) -> Result<f64> {
        let dynamic = self.dynamic_thrust(t);
        let p_a = atmosphere(h.clamp(0.0, crate::environment::MAX_ALTITUDE))?.pressure;
        Ok((dynamic + (self.exit_pressure - p_a) * self.exit_area).max(0.0))
    }

    /// Momentum thrust only; zero after burnout.
    pub fn dynamic_thrust(&self, t: f64) -> f64 {
        if t < self.thrust_curve.first_key() || t >= self.burn_time() {
            0.0
        } else {
            self.thrust_curve.eval(t).max(0.0)
        }
    }
}

/// Mass distribution snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub mass: f64,
    pub j_l: f64,
    pub j_t: f64,
    pub x_cm: f64,
}

/// Gimbal deflections, rad. Positive mu_p tilts the nozzle so thrust gains
/// a -z_b component (pitching moment about -y_b); positive mu_y gives the
/// thrust a -y_b component (pitching moment about +z_b).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deflections {
    pub mu_p: f64,
    pub mu_y: f64,
}

/// Rigid-body state. Position is inertial; velocity and angular velocity
/// are body-frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    /// Inertial position, m; x is altitude above the launch point.
    pub position: Vector3<f64>,
    /// Body-frame velocity (u, v, w), m/s.
    pub velocity: Vector3<f64>,
    /// Body angular velocity (p, q, r), rad/s.
    pub omega: Vector3<f64>,
    /// Attitude.
    pub attitude: EulerAngles,
    /// Mass, kg.
    pub mass: f64,
}

impl RigidBodyState {
    /// At rest on the pad, vertical attitude.
    pub fn on_pad(mass: f64) -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            omega: Vector3::zeros(),
            attitude: EulerAngles::zero(),
            mass,
        }
    }

    pub fn altitude(&self) -> f64 {
        self.position.x
    }

    /// Inertial velocity R(lambda) v.
    pub fn inertial_velocity(&self) -> Vector3<f64> {
        rotation_from_euler(&self.attitude) * self.velocity
    }

    pub fn to_array(&self) -> [f64; 13] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.velocity.x,
            self.velocity.y,
            self.velocity.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.attitude.phi,
            self.attitude.theta,
            self.attitude.psi,
            self.mass,
        ]
    }

    pub fn from_array(a: &[f64; 13]) -> Result<Self> {
        Ok(Self {
            position: Vector3::new(a[0], a[1], a[2]),
            velocity: Vector3::new(a[3], a[4], a[5]),
            omega: Vector3::new(a[6], a[7], a[8]),
            attitude: EulerAngles::new(a[9], a[10], a[11])?,
            mass: a[12],
        })
    }
}

/// Incidence angles and airspeed of the relative wind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroAngles {
    /// Angle of attack atan2(w_rel, u_rel), rad.
    pub alpha: f64,
    /// Sideslip asin(v_rel / speed), rad.
    pub beta: f64,
    /// Relative airspeed magnitude, m/s.
    pub speed: f64,
    /// Mach number.
    pub mach: f64,
}

/// Incidence angles from the body-frame relative velocity. Below the
/// airspeed floor the angles are zero (the direction of the relative wind
/// is numerically meaningless at rest).
pub fn aero_angles(v_rel: &Vector3<f64>, speed_of_sound: f64) -> AeroAngles {
    let speed = v_rel.norm();
    if speed < AIRSPEED_FLOOR {
        return AeroAngles {
            alpha: 0.0,
            beta: 0.0,
            speed,
            mach: speed / speed_of_sound,
        };
    }
    AeroAngles {
        alpha: v_rel.z.atan2(v_rel.x),
        beta: (v_rel.y / speed).asin(),
        speed,
        mach: speed / speed_of_sound,
    }
}

/// Gravity force in the body frame: R' (-m g, 0, 0).
pub fn gravity_force(lambda: &EulerAngles, mass: f64, h: f64) -> Vector3<f64> {
    let g = gravity(h.max(0.0));
    rotation_from_euler(lambda).transpose() * Vector3::new(-mass * g, 0.0, 0.0)
}

/// Propulsive force and torque in the body frame for thrust magnitude `t`
/// through gimbal deflections, with lever arm `l` from the center of mass
/// to the pivot:
///
///   f_p   = ( T cos(mu_p) cos(mu_y), -T cos(mu_p) sin(mu_y), -T sin(mu_p) )
///   tau_p = ( 0, -T sin(mu_p) l, T cos(mu_p) sin(mu_y) l )
pub fn propulsive_forces(t: f64, defl: Deflections, l: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (sp, cp) = defl.mu_p.sin_cos();
    let (sy, cy) = defl.mu_y.sin_cos();
    let f = Vector3::new(t * cp * cy, -t * cp * sy, -t * sp);
    let tau = Vector3::new(0.0, -t * sp * l, t * cp * sy * l);
    (f, tau)
}

/// Aerodynamic force and torque in the body frame.
///
/// Forces: f_a = (-qbar S C_A, qbar S C_Y, -qbar S C_N) with C_N/C_Y linear
/// in incidence. Moments use the static margin (x_cp - x_cm)/d (negative
/// for this unfinned vehicle: destabilizing) plus rate damping:
///
///   C_l = C_lp p d / 2V
///   C_m = -C_N SM + C_mq q d / 2V
///   C_n = -C_Y SM + C_nr r d / 2V
pub fn aero_forces(
    cfg: &VehicleConfig,
    qbar: f64,
    angles: &AeroAngles,
    omega: &Vector3<f64>,
    x_cm: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let s = cfg.reference_area();
    let d = cfg.diameter;
    let mach = angles.mach;
    let c_n = cfg.c_n_alpha.eval(mach) * angles.alpha;
    let c_y = cfg.c_y_beta.eval(mach) * angles.beta;
    let c_a = cfg.c_a.eval(mach);
    let sm = (cfg.x_cp.eval(mach) - x_cm) / d;
    let v = angles.speed.max(AIRSPEED_FLOOR);
    let rate_scale = d / (2.0 * v);
    let c_l = cfg.c_l_p * omega.x * rate_scale;
    let c_m = -c_n * sm + cfg.c_m_q * omega.y * rate_scale;
    let c_n_yaw = -c_y * sm + cfg.c_n_r * omega.z * rate_scale;
    let f = Vector3::new(-qbar * s * c_a, qbar * s * c_y, -qbar * s * c_n);
    let tau = Vector3::new(qbar * s * d * c_l, qbar * s * d * c_m, qbar * s * d * c_n_yaw);
    (f, tau)
}

/// Time derivative of the rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyDerivative {
    pub position_dot: Vector3<f64>,
    pub velocity_dot: Vector3<f64>,
    pub omega_dot: Vector3<f64>,
    pub attitude_dot: Vector3<f64>,
    pub mass_dot: f64,
}

impl RigidBodyDerivative {
    pub fn to_array(&self) -> [f64; 13] {
        [
            self.position_dot.x,
            self.position_dot.y,
            self.position_dot.z,
            self.velocity_dot.x,
            self.velocity_dot.y,
            self.velocity_dot.z,
            self.omega_dot.x,
            self.omega_dot.y,
            self.omega_dot.z,
            self.attitude_dot.x,
            self.attitude_dot.y,
            self.attitude_dot.z,
            self.mass_dot,
        ]
    }
}

/// Full nonlinear dynamics right-hand side.
///
/// `wind` is the inertial-frame wind vector, held constant by the caller
/// over an integration step. Forces divide by the integrated mass state;
/// inertias and the center of mass interpolate from the configured
/// histories at `t`.
pub fn dynamics_rhs(
    cfg: &VehicleConfig,
    t: f64,
    x: &RigidBodyState,
    defl: Deflections,
    wind: &Vector3<f64>,
) -> Result<RigidBodyDerivative> {
    let (deriv, _) = dynamics_with_acceleration(cfg, t, x, defl, wind)?;
    Ok(deriv)
}

/// As [`dynamics_rhs`], also returning the body-frame kinematic
/// acceleration a = v_dot + omega x v (the second derivative of inertial
/// position expressed in body axes), which the accelerometer model senses.
pub fn dynamics_with_acceleration(
    cfg: &VehicleConfig,
    t: f64,
    x: &RigidBodyState,
    defl: Deflections,
    wind: &Vector3<f64>,
) -> Result<(RigidBodyDerivative, Vector3<f64>)> {
    let h = x.altitude();
    let atm = atmosphere(h.clamp(0.0, crate::environment::MAX_ALTITUDE))?;
    let r = rotation_from_euler(&x.attitude);
    let props = cfg.mass_properties(t);
    let m = x.mass;
    if m <= 0.0 {
        return Err(Error::Sim(format!("non-positive mass {m} at t={t}")));
    }

    let v_rel = x.velocity - r.transpose() * wind;
    let angles = aero_angles(&v_rel, atm.speed_of_sound);
    let qbar = 0.5 * atm.density * angles.speed * angles.speed;

    let thrust = cfg.thrust(t, h)?;
    let lever = cfg.x_gimbal - props.x_cm;

    let f_g = gravity_force(&x.attitude, m, h);
    let (f_p, tau_p) = propulsive_forces(thrust, defl, lever);
    let (f_a, tau_a) = aero_forces(cfg, qbar, &angles, &x.omega, props.x_cm);
    let tau_r = Vector3::new(-cfg.k_roll * x.omega.x, 0.0, 0.0);

    let f_total = f_g + f_p + f_a;
    let tau_total = tau_p + tau_a + tau_r;

    let accel = f_total / m;
    let velocity_dot = accel - x.omega.cross(&x.velocity);

    let j = Matrix3::from_diagonal(&Vector3::new(props.j_l, props.j_t, props.j_t));
    let j_inv = Matrix3::from_diagonal(&Vector3::new(
        1.0 / props.j_l,
        1.0 / props.j_t,
        1.0 / props.j_t,
    ));
    let omega_dot = j_inv * (tau_total - x.omega.cross(&(j * x.omega)));

    let attitude_dot = euler_rates(&x.attitude, &x.omega, DEFAULT_SINGULARITY_MARGIN)?;
    let position_dot = r * x.velocity;
    let mass_dot = -cfg.dynamic_thrust(t) / cfg.exhaust_velocity;

    Ok((
        RigidBodyDerivative {
            position_dot,
            velocity_dot,
            omega_dot,
            attitude_dot,
            mass_dot,
        },
        accel,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{atmosphere, gravity};
    use crate::test_support::test_vehicle;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn table_interpolates_and_clamps() {
        let t = Table1D::new(vec![(0.0, 1.0), (2.0, 3.0), (4.0, 2.0)]).unwrap();
        assert_relative_eq!(t.eval(-1.0), 1.0);
        assert_relative_eq!(t.eval(1.0), 2.0);
        assert_relative_eq!(t.eval(3.0), 2.5);
        assert_relative_eq!(t.eval(9.0), 2.0);
        assert!(Table1D::new(vec![]).is_err());
        assert!(Table1D::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn table_integral_is_exact_for_piecewise_linear() {
        let t = Table1D::new(vec![(0.0, 0.0), (2.0, 4.0), (6.0, 4.0)]).unwrap();
        assert_relative_eq!(t.integral_to(2.0), 4.0);
        assert_relative_eq!(t.integral_to(1.0), 1.0);
        assert_relative_eq!(t.integral_to(6.0), 20.0);
        // Zero contribution beyond the last knot.
        assert_relative_eq!(t.integral_to(100.0), 20.0);
    }

    #[test]
    fn mass_depletes_to_dry_mass() {
        let cfg = test_vehicle();
        cfg.validate().unwrap();
        assert_relative_eq!(cfg.mass_properties(0.0).mass, 82.9, epsilon = 1e-12);
        let end = cfg.mass_properties(cfg.burn_time()).mass;
        assert_relative_eq!(end, 40.0, max_relative = 1e-3);
        // Monotone depletion.
        assert!(cfg.mass_properties(10.0).mass > cfg.mass_properties(50.0).mass);
    }

    #[test]
    fn thrust_increases_with_altitude_and_clamps() {
        let cfg = test_vehicle();
        let t0 = cfg.thrust(10.0, 0.0).unwrap();
        let t5k = cfg.thrust(10.0, 5000.0).unwrap();
        assert!(t5k > t0, "ambient pressure drop must raise thrust");
        // After burnout the pressure term alone is negative at sea level
        // (p_e < p_a) and clamps to zero.
        assert_relative_eq!(cfg.thrust(200.0, 0.0).unwrap(), 0.0);
        assert_eq!(cfg.dynamic_thrust(200.0), 0.0);
    }

    #[test]
    fn aero_angles_floor_and_signs() {
        let a = aero_angles(&Vector3::new(0.1, 0.1, 0.1), 340.0);
        assert_eq!(a.alpha, 0.0);
        assert_eq!(a.beta, 0.0);
        let b = aero_angles(&Vector3::new(50.0, 0.0, 5.0), 340.0);
        assert!(b.alpha > 0.0);
        assert_relative_eq!(b.alpha, (5.0f64 / 50.0).atan(), epsilon = 1e-12);
        let c = aero_angles(&Vector3::new(50.0, 5.0, 0.0), 340.0);
        assert!(c.beta > 0.0);
        assert_relative_eq!(c.beta, (5.0 / c.speed).asin(), epsilon = 1e-12);
    }

    #[test]
    fn gravity_force_points_down_in_body_frame() {
        let lam = EulerAngles::zero();
        let f = gravity_force(&lam, 10.0, 0.0);
        assert_relative_eq!(f.x, -10.0 * G0_LOCAL, epsilon = 1e-9);
        assert_relative_eq!(f.y, 0.0, epsilon = 1e-12);
        // Pitched 90-ish degrees: weight moves into the body z axis.
        let lam2 = EulerAngles::new(0.0, 1.5, 0.0).unwrap();
        let f2 = gravity_force(&lam2, 10.0, 0.0);
        assert!(f2.z < -9.0 * 10.0 * 0.99);
        assert_relative_eq!(f2.norm(), 10.0 * G0_LOCAL, epsilon = 1e-9);
    }
    const G0_LOCAL: f64 = 9.80665;

    #[test]
    fn propulsive_forces_match_gimbal_geometry() {
        let (f, tau) = propulsive_forces(100.0, Deflections::default(), 1.5);
        assert_relative_eq!(f, Vector3::new(100.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(tau, Vector3::zeros(), epsilon = 1e-12);
        // Positive pitch deflection: thrust tips to -z, nose-down torque.
        let (f, tau) = propulsive_forces(100.0, Deflections { mu_p: 0.1, mu_y: 0.0 }, 1.5);
        assert!(f.z < 0.0);
        assert!(tau.y < 0.0);
        assert_relative_eq!(tau.y, -100.0 * 0.1f64.sin() * 1.5, epsilon = 1e-12);
        // Positive yaw deflection: thrust tips to -y, positive yaw torque.
        let (f, tau) = propulsive_forces(100.0, Deflections { mu_p: 0.0, mu_y: 0.1 }, 1.5);
        assert!(f.y < 0.0);
        assert!(tau.z > 0.0);
    }

    #[test]
    fn negative_static_margin_destabilizes_pitch() {
        let cfg = test_vehicle();
        let angles = AeroAngles {
            alpha: 0.05,
            beta: 0.0,
            speed: 60.0,
            mach: 60.0 / 340.0,
        };
        let (f, tau) = aero_forces(&cfg, 2000.0, &angles, &Vector3::zeros(), 1.9);
        // Positive alpha: normal force toward -z, nose-up (positive q)
        // moment since the center of pressure is ahead of the mass center.
        assert!(f.z < 0.0);
        assert!(tau.y > 0.0);
        // Drag opposes forward motion.
        assert!(f.x < 0.0);
    }

    #[test]
    fn rate_damping_opposes_rotation() {
        let cfg = test_vehicle();
        let angles = AeroAngles {
            alpha: 0.0,
            beta: 0.0,
            speed: 60.0,
            mach: 0.18,
        };
        let omega = Vector3::new(0.0, 0.4, 0.0);
        let (_, tau) = aero_forces(&cfg, 2000.0, &angles, &omega, 1.9);
        assert!(tau.y < 0.0, "pitch damping must oppose q");
    }

    /// Independent transcription of the equations of motion, assembled
    /// scalar-by-scalar, as the oracle for `dynamics_rhs`.
    fn oracle_rhs(
        cfg: &VehicleConfig,
        t: f64,
        x: &RigidBodyState,
        defl: Deflections,
        wind: &Vector3<f64>,
    ) -> [f64; 13] {
        let h = x.position.x;
        let atm = atmosphere(h.max(0.0)).unwrap();
        let g = gravity(h.max(0.0));
        let props = cfg.mass_properties(t);
        let m = x.mass;
        let (u, v, w) = (x.velocity.x, x.velocity.y, x.velocity.z);
        let (p, q, r) = (x.omega.x, x.omega.y, x.omega.z);
        let (sph, cph) = x.attitude.phi.sin_cos();
        let (sth, cth) = x.attitude.theta.sin_cos();
        let (sps, cps) = x.attitude.psi.sin_cos();
        let rot = rotation_from_euler(&x.attitude);

        let vr = x.velocity - rot.transpose() * wind;
        let vmag = vr.norm();
        let (alpha, beta) = if vmag < AIRSPEED_FLOOR {
            (0.0, 0.0)
        } else {
            (vr.z.atan2(vr.x), (vr.y / vmag).asin())
        };
        let mach = vmag / atm.speed_of_sound;
        let qbar = 0.5 * atm.density * vmag * vmag;
        let s = std::f64::consts::PI * cfg.diameter * cfg.diameter / 4.0;
        let d = cfg.diameter;
        let c_a = cfg.c_a.eval(mach);
        let c_n = cfg.c_n_alpha.eval(mach) * alpha;
        let c_y = cfg.c_y_beta.eval(mach) * beta;
        let sm = (cfg.x_cp.eval(mach) - props.x_cm) / d;
        let vf = vmag.max(AIRSPEED_FLOOR);
        let c_l = cfg.c_l_p * p * d / (2.0 * vf);
        let c_m = -c_n * sm + cfg.c_m_q * q * d / (2.0 * vf);
        let c_nn = -c_y * sm + cfg.c_n_r * r * d / (2.0 * vf);

        let thrust = {
            let dynamic = if t < cfg.thrust_curve.first_key() || t >= cfg.burn_time() {
                0.0
            } else {
                cfg.thrust_curve.eval(t).max(0.0)
            };
            (dynamic + (cfg.exit_pressure - atm.pressure) * cfg.exit_area).max(0.0)
        };
        let l = cfg.x_gimbal - props.x_cm;
        let (smu1, cmu1) = defl.mu_p.sin_cos();
        let (smu2, cmu2) = defl.mu_y.sin_cos();

        let u_dot = -g * cth * cps - qbar / m * s * c_a + thrust / m * cmu1 * cmu2 - q * w + r * v;
        let v_dot = -g * (sph * sth * cps - cph * sps) + qbar / m * s * c_y
            - thrust / m * cmu1 * smu2
            - r * u
            + p * w;
        let w_dot = -g * (cph * sth * cps + sph * sps) - qbar / m * s * c_n - thrust / m * smu1
            - p * v
            + q * u;
        let (jl, jt) = (props.j_l, props.j_t);
        let p_dot = (qbar * s * d * c_l - cfg.k_roll * p) / jl;
        let q_dot = (qbar * s * d * c_m - thrust * smu1 * l + (jt - jl) * p * r) / jt;
        let r_dot = (qbar * s * d * c_nn + thrust * cmu1 * smu2 * l + (jl - jt) * p * q) / jt;
        let phi_dot = p + (q * sph + r * cph) * sth / cth;
        let theta_dot = q * cph - r * sph;
        let psi_dot = (q * sph + r * cph) / cth;
        let pos_dot = rot * x.velocity;
        let m_dot = -(if t < cfg.burn_time() && t >= cfg.thrust_curve.first_key() {
            cfg.thrust_curve.eval(t).max(0.0)
        } else {
            0.0
        }) / cfg.exhaust_velocity;

        [
            pos_dot.x, pos_dot.y, pos_dot.z, u_dot, v_dot, w_dot, p_dot, q_dot, r_dot, phi_dot,
            theta_dot, psi_dot, m_dot,
        ]
    }

    #[test]
    fn dynamics_matches_independent_equation_transcription() {
        let cfg = test_vehicle();
        let state = RigidBodyState {
            position: Vector3::new(1200.0, 30.0, -12.0),
            velocity: Vector3::new(55.0, 1.5, -2.5),
            omega: Vector3::new(0.05, 0.12, -0.07),
            attitude: EulerAngles::new(0.04, 0.25, -0.1).unwrap(),
            mass: 70.0,
        };
        let defl = Deflections { mu_p: 0.03, mu_y: -0.02 };
        let wind = Vector3::new(0.0, 4.0, -1.0);
        let got = dynamics_rhs(&cfg, 30.0, &state, defl, &wind)
            .unwrap()
            .to_array();
        let want = oracle_rhs(&cfg, 30.0, &state, defl, &wind);
        for i in 0..13 {
            assert_relative_eq!(got[i], want[i], epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn dynamics_matches_oracle_over_state_space(
            hx in 0.0f64..20_000.0,
            u in -5.0f64..90.0,
            v in -8.0f64..8.0,
            w in -8.0f64..8.0,
            p in -0.5f64..0.5,
            q in -0.5f64..0.5,
            r in -0.5f64..0.5,
            phi in -0.5f64..0.5,
            theta in -1.0f64..1.0,
            psi in -1.0f64..1.0,
            mass in 41.0f64..82.0,
            mu_p in -0.12f64..0.12,
            mu_y in -0.12f64..0.12,
            t in 0.0f64..120.0,
            wy in -10.0f64..10.0,
            wz in -10.0f64..10.0,
        ) {
            let cfg = test_vehicle();
            let state = RigidBodyState {
                position: Vector3::new(hx, 0.0, 0.0),
                velocity: Vector3::new(u, v, w),
                omega: Vector3::new(p, q, r),
                attitude: EulerAngles::new(phi, theta, psi).unwrap(),
                mass,
            };
            let defl = Deflections { mu_p, mu_y };
            let wind = Vector3::new(0.0, wy, wz);
            let got = dynamics_rhs(&cfg, t, &state, defl, &wind).unwrap().to_array();
            let want = oracle_rhs(&cfg, t, &state, defl, &wind);
            for i in 0..13 {
                let scale = want[i].abs().max(1.0);
                prop_assert!(
                    (got[i] - want[i]).abs() < 1e-9 * scale,
                    "component {i}: {} vs {}", got[i], want[i]
                );
            }
        }
    }

    #[test]
    fn torque_free_symmetric_body_conserves_rate_magnitude() {
        // No atmosphere force (zero coefficients), no thrust, no damper,
        // equal inertias: |omega| is invariant under the Euler equations.
        let mut cfg = test_vehicle();
        cfg.c_a = Table1D::constant(0.0);
        cfg.c_n_alpha = Table1D::constant(0.0);
        cfg.c_y_beta = Table1D::constant(0.0);
        cfg.c_l_p = 0.0;
        cfg.c_m_q = 0.0;
        cfg.c_n_r = 0.0;
        cfg.k_roll = 0.0;
        cfg.exit_area = 0.0;
        cfg.thrust_curve = Table1D::new(vec![(0.0, 0.0), (97.0, 0.0)]).unwrap();
        cfg.j_l = Table1D::constant(50.0);
        cfg.j_t = Table1D::constant(50.0);

        let mut x = RigidBodyState {
            position: Vector3::new(1000.0, 0.0, 0.0),
            velocity: Vector3::new(10.0, 0.0, 0.0),
            omega: Vector3::new(0.3, 0.2, -0.1),
            attitude: EulerAngles::new(0.1, 0.2, 0.0).unwrap(),
            mass: 60.0,
        };
        let w0 = x.omega.norm();
        let dt = 1e-3;
        let wind = Vector3::zeros();
        for k in 0..2000 {
            let t = k as f64 * dt;
            // RK4 step.
            let a0 = x.to_array();
            let k1 = dynamics_rhs(&cfg, t, &x, Deflections::default(), &wind).unwrap().to_array();
            let advance = |base: &[f64; 13], k: &[f64; 13], s: f64| {
                let mut out = [0.0; 13];
                for i in 0..13 {
                    out[i] = base[i] + k[i] * s;
                }
                out
            };
            let x2 = RigidBodyState::from_array(&advance(&a0, &k1, dt / 2.0)).unwrap();
            let k2 = dynamics_rhs(&cfg, t + dt / 2.0, &x2, Deflections::default(), &wind).unwrap().to_array();
            let x3 = RigidBodyState::from_array(&advance(&a0, &k2, dt / 2.0)).unwrap();
            let k3 = dynamics_rhs(&cfg, t + dt / 2.0, &x3, Deflections::default(), &wind).unwrap().to_array();
            let x4 = RigidBodyState::from_array(&advance(&a0, &k3, dt)).unwrap();
            let k4 = dynamics_rhs(&cfg, t + dt, &x4, Deflections::default(), &wind).unwrap().to_array();
            let mut next = [0.0; 13];
            for i in 0..13 {
                next[i] = a0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            x = RigidBodyState::from_array(&next).unwrap();
        }
        assert_relative_eq!(x.omega.norm(), w0, max_relative = 1e-9);
    }

    #[test]
    fn rejects_inconsistent_propellant_budget() {
        let mut cfg = test_vehicle();
        cfg.exhaust_velocity *= 2.0;
        assert!(cfg.validate().is_err());
    }
}
