//! Launch environment: inverse-square gravity, the 1976 standard atmosphere
//! up to 80 km, and a stochastic wind model (altitude-keyed mean profile
//! plus Dryden-style shaped gusts).
//!
//! Winds are expressed in the inertial frame {I} (x_i up); the plant rotates
//! them into the body frame. Geometric altitude is used directly as
//! geopotential altitude; the difference is below 0.1% over the valid range.

use nalgebra::{DMatrix, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::van_loan_discretize;
use crate::{Error, Result};

/// Standard gravitational acceleration at sea level, m/s^2.
pub const G0: f64 = 9.80665;
/// Mean Earth radius, m.
pub const EARTH_RADIUS: f64 = 6_371_000.0;
/// Specific gas constant of air, J/(kg K).
pub const R_AIR: f64 = 287.052_87;
/// Ratio of specific heats of air.
pub const GAMMA_AIR: f64 = 1.4;
/// Upper altitude limit of the atmosphere model, m.
pub const MAX_ALTITUDE: f64 = 80_000.0;

/// Gravitational acceleration magnitude at altitude `h` (m) above the
/// surface: g0 * (Re / (Re + h))^2.
pub fn gravity(h: f64) -> f64 {
    let r = EARTH_RADIUS / (EARTH_RADIUS + h);
    G0 * r * r
}

/// Static air state at one altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereSample {
    /// Temperature, K.
    pub temperature: f64,
    /// Static pressure, Pa.
    pub pressure: f64,
    /// Density, kg/m^3.
    pub density: f64,
    /// Speed of sound, m/s.
    pub speed_of_sound: f64,
}

/// Base geopotential altitudes (m) of the standard-atmosphere layers.
const LAYER_BASE_H: [f64; 8] = [
    0.0, 11_000.0, 20_000.0, 32_000.0, 47_000.0, 51_000.0, 71_000.0, 84_852.0,
];
/// Temperature lapse rate within each layer, K/m.
const LAYER_LAPSE: [f64; 8] = [-0.0065, 0.0, 0.001, 0.0028, 0.0, -0.0028, -0.002, 0.0];
/// Base temperature of each layer, K.
const LAYER_BASE_T: [f64; 8] = [
    288.15, 216.65, 216.65, 228.65, 270.65, 270.65, 214.65, 186.95,
];
/// Sea-level standard pressure, Pa.
const P_SEA_LEVEL: f64 = 101_325.0;

/// Base pressure of layer `i`, derived recursively from sea level so each
/// layer joins the previous one continuously.
fn layer_base_pressure(i: usize) -> f64 {
    let mut p = P_SEA_LEVEL;
    for k in 0..i {
        let dh = LAYER_BASE_H[k + 1] - LAYER_BASE_H[k];
        p = pressure_in_layer(p, LAYER_BASE_T[k], LAYER_LAPSE[k], dh);
    }
    p
}

fn pressure_in_layer(p_base: f64, t_base: f64, lapse: f64, dh: f64) -> f64 {
    if lapse == 0.0 {
        p_base * (-G0 * dh / (R_AIR * t_base)).exp()
    } else {
        let t = t_base + lapse * dh;
        p_base * (t / t_base).powf(-G0 / (R_AIR * lapse))
    }
}

/// Standard-atmosphere state at altitude `h` (m). Valid for
/// 0 <= h <= 80 km; altitudes outside that range are a domain error.
pub fn atmosphere(h: f64) -> Result<AtmosphereSample> {
    if !h.is_finite() || h < 0.0 || h > MAX_ALTITUDE {
        return Err(Error::Domain(format!(
            "altitude {h} m outside atmosphere model range [0, {MAX_ALTITUDE}]"
        )));
    }
    let mut layer = 0;
    while layer + 1 < LAYER_BASE_H.len() && h >= LAYER_BASE_H[layer + 1] {
        layer += 1;
    }
    let dh = h - LAYER_BASE_H[layer];
    let t = LAYER_BASE_T[layer] + LAYER_LAPSE[layer] * dh;
    let p = pressure_in_layer(layer_base_pressure(layer), LAYER_BASE_T[layer], LAYER_LAPSE[layer], dh);
    Ok(AtmosphereSample {
        temperature: t,
        pressure: p,
        density: p / (R_AIR * t),
        speed_of_sound: (GAMMA_AIR * R_AIR * t).sqrt(),
    })
}

/// One knot of the mean-wind profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindProfilePoint {
    /// Altitude, m.
    pub altitude: f64,
    /// Mean horizontal wind speed, m/s.
    pub speed: f64,
    /// Direction the wind blows toward, rad, measured in the horizontal
    /// y_i/z_i plane from +y_i toward +z_i.
    pub direction: f64,
}

/// Turbulence parameters for the Dryden-style gust filters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GustConfig {
    /// Target standard deviation of each gust component, m/s. Zero disables
    /// the stochastic part entirely.
    pub intensity: f64,
    /// Along-wind length scale, m.
    pub length_scale_u: f64,
    /// Horizontal crosswind length scale, m.
    pub length_scale_v: f64,
    /// Vertical length scale, m.
    pub length_scale_w: f64,
    /// Characteristic airspeed used to convert length scales into filter
    /// time constants, m/s.
    pub reference_airspeed: f64,
}

impl Default for GustConfig {
    fn default() -> Self {
        Self {
            intensity: 0.0,
            length_scale_u: 200.0,
            length_scale_v: 200.0,
            length_scale_w: 50.0,
            reference_airspeed: 50.0,
        }
    }
}

/// Wind model configuration: mean profile plus gusts.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct WindConfig {
    /// Mean profile knots sorted by strictly increasing altitude. Empty
    /// means calm mean wind. Speeds/directions interpolate linearly on the
    /// horizontal components and clamp beyond the end knots.
    pub mean_profile: Vec<WindProfilePoint>,
    pub gust: GustConfig,
}

impl WindConfig {
    pub fn validate(&self) -> Result<()> {
        for w in self.mean_profile.windows(2) {
            if w[1].altitude <= w[0].altitude {
                return Err(Error::Config(
                    "wind profile altitudes must be strictly increasing".into(),
                ));
            }
        }
        if self.gust.intensity < 0.0 {
            return Err(Error::Config("gust intensity must be non-negative".into()));
        }
        if self.gust.intensity > 0.0 {
            let g = &self.gust;
            if g.length_scale_u <= 0.0
                || g.length_scale_v <= 0.0
                || g.length_scale_w <= 0.0
                || g.reference_airspeed <= 0.0
            {
                return Err(Error::Config(
                    "gust length scales and reference airspeed must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Mean wind vector at altitude `h`, inertial frame.
    pub fn mean_wind(&self, h: f64) -> Vector3<f64> {
        if self.mean_profile.is_empty() {
            return Vector3::zeros();
        }
        let comp = |p: &WindProfilePoint| (p.speed * p.direction.cos(), p.speed * p.direction.sin());
        let first = self.mean_profile.first().unwrap();
        let last = self.mean_profile.last().unwrap();
        let (wy, wz) = if h <= first.altitude {
            comp(first)
        } else if h >= last.altitude {
            comp(last)
        } else {
            let i = self
                .mean_profile
                .partition_point(|p| p.altitude <= h)
                .saturating_sub(1);
            let (a, b) = (&self.mean_profile[i], &self.mean_profile[i + 1]);
            let s = (h - a.altitude) / (b.altitude - a.altitude);
            let (ya, za) = comp(a);
            let (yb, zb) = comp(b);
            (ya + s * (yb - ya), za + s * (zb - za))
        };
        Vector3::new(0.0, wy, wz)
    }
}

/// One discretized gust shaping filter (first or second order), stepped at
/// a fixed rate with exact transition and process-noise covariance so the
/// stationary output standard deviation equals the configured intensity.
struct GustFilter {
    ad: DMatrix<f64>,
    /// Cholesky factor of the one-step noise covariance.
    noise_chol: DMatrix<f64>,
    /// Output row.
    c: DMatrix<f64>,
    x: DMatrix<f64>,
}

impl GustFilter {
    /// First-order (Ornstein-Uhlenbeck) along-wind form: stationary
    /// variance sigma^2 with correlation time L/V.
    fn first_order(sigma: f64, length: f64, v: f64, dt: f64) -> Self {
        let a = v / length;
        let q = 2.0 * a * sigma * sigma;
        let am = DMatrix::from_element(1, 1, -a);
        let qc = DMatrix::from_element(1, 1, q);
        let (ad, qd) = van_loan_discretize(&am, &qc, dt);
        let noise_chol = DMatrix::from_element(1, 1, qd[(0, 0)].max(0.0).sqrt());
        Self {
            ad,
            noise_chol,
            c: DMatrix::from_element(1, 1, 1.0),
            x: DMatrix::zeros(1, 1),
        }
    }

    /// Second-order transverse form with transfer function
    /// sigma sqrt(L/(pi V)) (1 + sqrt(3) L s / V) / (1 + L s / V)^2,
    /// driven with white-noise intensity pi so the stationary output
    /// variance is exactly sigma^2.
    fn second_order(sigma: f64, length: f64, v: f64, dt: f64) -> Self {
        let a = v / length;
        let am = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -a * a, -2.0 * a]);
        let qc = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, std::f64::consts::PI]);
        let (ad, qd) = van_loan_discretize(&am, &qc, dt);
        let noise_chol = qd
            .clone()
            .cholesky()
            .map(|c| c.l())
            .unwrap_or_else(|| DMatrix::zeros(2, 2));
        let gain = sigma * (length / (std::f64::consts::PI * v)).sqrt();
        let c = DMatrix::from_row_slice(1, 2, &[gain * a * a, gain * 3.0f64.sqrt() * a]);
        Self {
            ad,
            noise_chol,
            c,
            x: DMatrix::zeros(2, 2 - 1),
        }
    }

    /// Draws the stationary distribution so the process needs no spin-up.
    fn init_stationary(&mut self, rng: &mut ChaCha8Rng) {
        // Stationary covariance from the discrete Lyapunov fixed point,
        // iterated to convergence (contraction since the filter is stable).
        let n = self.ad.nrows();
        let qd = &self.noise_chol * self.noise_chol.transpose();
        let mut p = qd.clone();
        for _ in 0..20_000 {
            let next = &self.ad * &p * self.ad.transpose() + &qd;
            let delta = (&next - &p).norm();
            p = next;
            if delta < 1e-14 {
                break;
            }
        }
        let l = p.cholesky().map(|c| c.l()).unwrap_or_else(|| DMatrix::zeros(n, n));
        let z = DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(rng));
        self.x = l * z;
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let n = self.ad.nrows();
        let z = DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(rng));
        self.x = &self.ad * &self.x + &self.noise_chol * z;
        (&self.c * &self.x)[(0, 0)]
    }
}

/// Stateful wind generator. Stepped once per plant step; the returned wind
/// is held constant within the step. The sequence is a pure function of the
/// configuration, the step size, and the seed.
pub struct WindGenerator {
    config: WindConfig,
    filters: Option<[GustFilter; 3]>,
    /// Gust axes in the inertial frame: along-wind, cross-wind, vertical.
    axes: [Vector3<f64>; 3],
    gust: Vector3<f64>,
    rng: ChaCha8Rng,
}

impl WindGenerator {
    pub fn new(config: &WindConfig, dt: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("wind step size {dt} must be positive")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = &config.gust;
        let filters = if g.intensity > 0.0 {
            let v = g.reference_airspeed;
            let mut f = [
                GustFilter::first_order(g.intensity, g.length_scale_u, v, dt),
                GustFilter::second_order(g.intensity, g.length_scale_v, v, dt),
                GustFilter::second_order(g.intensity, g.length_scale_w, v, dt),
            ];
            for fi in &mut f {
                fi.init_stationary(&mut rng);
            }
            Some(f)
        } else {
            None
        };
        // Along-wind direction from the lowest profile knot with nonzero
        // speed; defaults to +y_i in calm mean wind.
        let dir = config
            .mean_profile
            .iter()
            .find(|p| p.speed > 0.0)
            .map(|p| p.direction)
            .unwrap_or(0.0);
        let along = Vector3::new(0.0, dir.cos(), dir.sin());
        let cross = Vector3::new(0.0, -dir.sin(), dir.cos());
        let vertical = Vector3::x();
        Ok(Self {
            config: config.clone(),
            filters,
            axes: [along, cross, vertical],
            gust: Vector3::zeros(),
            rng,
        })
    }

    /// Advances the gust filters one step and returns the wind at altitude
    /// `h`, inertial frame.
    pub fn next(&mut self, h: f64) -> Vector3<f64> {
        if let Some(filters) = &mut self.filters {
            let mut gust = Vector3::zeros();
            for (f, axis) in filters.iter_mut().zip(&self.axes) {
                gust += *axis * f.step(&mut self.rng);
            }
            self.gust = gust;
        }
        self.config.mean_wind(h) + self.gust
    }

    /// Wind at altitude `h` without advancing the filters.
    pub fn current(&self, h: f64) -> Vector3<f64> {
        self.config.mean_wind(h) + self.gust
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gravity_sea_level_and_decay() {
        assert_relative_eq!(gravity(0.0), 9.80665, epsilon = 1e-12);
        // Inverse-square: at one Earth radius, a quarter of g0.
        assert_relative_eq!(gravity(EARTH_RADIUS), G0 / 4.0, epsilon = 1e-12);
        assert!(gravity(5000.0) < G0);
        assert!(gravity(5000.0) > 0.998 * G0);
    }

    #[test]
    fn atmosphere_sea_level() {
        let a = atmosphere(0.0).unwrap();
        assert_relative_eq!(a.temperature, 288.15, epsilon = 1e-12);
        assert_relative_eq!(a.pressure, 101_325.0, epsilon = 1e-9);
        assert_relative_eq!(a.density, 1.225, epsilon = 1e-3);
        assert_relative_eq!(a.speed_of_sound, 340.29, epsilon = 0.01);
    }

    #[test]
    fn atmosphere_tropopause_pressure() {
        // Troposphere closed form: 101325 (216.65/288.15)^(g0/(R 0.0065)).
        let a = atmosphere(11_000.0).unwrap();
        let want = 101_325.0 * (216.65f64 / 288.15).powf(G0 / (R_AIR * 0.0065));
        assert_relative_eq!(a.pressure, want, epsilon = 1e-9);
        assert!((a.pressure - 22_632.0).abs() < 1.0);
        assert_relative_eq!(a.temperature, 216.65, epsilon = 1e-12);
    }

    #[test]
    fn atmosphere_layers_join_continuously() {
        // Limit from below vs the layer-base value used from above; the
        // residual is the physical gradient over the 1 um probe.
        for &hb in &LAYER_BASE_H[1..7] {
            let below = atmosphere(hb - 1e-6).unwrap();
            let at = atmosphere(hb).unwrap();
            assert_relative_eq!(below.pressure, at.pressure, max_relative = 1e-9);
            assert_relative_eq!(below.temperature, at.temperature, max_relative = 1e-9);
        }
    }

    #[test]
    fn atmosphere_domain_errors() {
        assert!(atmosphere(-1.0).is_err());
        assert!(atmosphere(80_001.0).is_err());
        assert!(atmosphere(f64::NAN).is_err());
        assert!(atmosphere(80_000.0).is_ok());
    }

    proptest! {
        #[test]
        fn pressure_and_density_decrease_with_altitude(
            h in 0.0f64..79_000.0,
            dh in 1.0f64..1000.0,
        ) {
            let lo = atmosphere(h).unwrap();
            let hi = atmosphere(h + dh).unwrap();
            prop_assert!(hi.pressure < lo.pressure);
            prop_assert!(hi.density < lo.density);
        }
    }

    fn profile() -> WindConfig {
        WindConfig {
            mean_profile: vec![
                WindProfilePoint { altitude: 0.0, speed: 2.0, direction: 0.0 },
                WindProfilePoint { altitude: 1000.0, speed: 6.0, direction: 0.0 },
                WindProfilePoint {
                    altitude: 3000.0,
                    speed: 8.0,
                    direction: std::f64::consts::FRAC_PI_2,
                },
            ],
            gust: GustConfig::default(),
        }
    }

    #[test]
    fn mean_profile_interpolates_and_clamps() {
        let cfg = profile();
        assert_relative_eq!(cfg.mean_wind(0.0).y, 2.0, epsilon = 1e-12);
        assert_relative_eq!(cfg.mean_wind(500.0).y, 4.0, epsilon = 1e-12);
        // Component-wise interpolation between the 6 m/s +y knot and the
        // 8 m/s +z knot.
        let mid = cfg.mean_wind(2000.0);
        assert_relative_eq!(mid.y, 3.0, epsilon = 1e-12);
        assert_relative_eq!(mid.z, 4.0, epsilon = 1e-12);
        // Clamped above the last knot; no vertical mean component.
        assert_relative_eq!(cfg.mean_wind(9000.0).z, 8.0, epsilon = 1e-12);
        assert_relative_eq!(cfg.mean_wind(9000.0).x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn calm_config_returns_zero() {
        let cfg = WindConfig::default();
        let mut gen = WindGenerator::new(&cfg, 0.001, 7).unwrap();
        for _ in 0..10 {
            assert_eq!(gen.next(100.0), Vector3::zeros());
        }
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let mut cfg = profile();
        cfg.gust.intensity = 1.5;
        let mut a = WindGenerator::new(&cfg, 0.01, 42).unwrap();
        let mut b = WindGenerator::new(&cfg, 0.01, 42).unwrap();
        let mut c = WindGenerator::new(&cfg, 0.01, 43).unwrap();
        let mut differs = false;
        for _ in 0..200 {
            let (wa, wb, wc) = (a.next(500.0), b.next(500.0), c.next(500.0));
            assert_eq!(wa, wb);
            differs |= (wa - wc).norm() > 1e-9;
        }
        assert!(differs, "different seeds produced identical gust sequences");
    }

    #[test]
    fn gust_standard_deviation_matches_intensity() {
        let mut cfg = WindConfig::default();
        cfg.gust.intensity = 2.0;
        let dt = 0.01;
        let mut gen = WindGenerator::new(&cfg, dt, 2024).unwrap();
        let n = 400_000;
        let mut sums = Vector3::<f64>::zeros();
        let mut sq = Vector3::<f64>::zeros();
        for _ in 0..n {
            let w = gen.next(1000.0);
            sums += w;
            sq += w.component_mul(&w);
        }
        let mean = sums / n as f64;
        for i in 0..3 {
            let var = sq[i] / n as f64 - mean[i] * mean[i];
            let sd = var.sqrt();
            assert!(
                (sd - 2.0).abs() < 0.3,
                "component {i} sample std {sd} departs from intensity 2.0"
            );
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        let mut cfg = profile();
        cfg.mean_profile[1].altitude = 0.0;
        assert!(WindGenerator::new(&cfg, 0.01, 1).is_err());
        let mut cfg2 = WindConfig::default();
        cfg2.gust.intensity = 1.0;
        cfg2.gust.length_scale_v = 0.0;
        assert!(WindGenerator::new(&cfg2, 0.01, 1).is_err());
    }
}
