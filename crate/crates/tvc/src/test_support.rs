//! Shared fixtures for unit tests.

use crate::sim::{ScenarioConfig, SCENARIO_SCHEMA_VERSION};
use crate::vehicle::{Table1D, VehicleConfig};

/// Small sounding-rocket configuration with a flat thrust curve. Mass and
/// geometry match the default vehicle; the simple curve keeps hand oracles
/// tractable.
pub(crate) fn test_vehicle() -> VehicleConfig {
    VehicleConfig {
        diameter: 0.24,
        length: 3.57,
        total_mass: 82.9,
        dry_mass: 40.0,
        x_cm: Table1D::new(vec![(0.0, 1.95), (97.0, 1.70)]).unwrap(),
        j_l: Table1D::new(vec![(0.0, 0.60), (97.0, 0.29)]).unwrap(),
        j_t: Table1D::new(vec![(0.0, 88.0), (97.0, 42.5)]).unwrap(),
        x_gimbal: 3.45,
        thrust_curve: Table1D::new(vec![(0.0, 900.0), (97.0, 900.0)]).unwrap(),
        exhaust_velocity: 900.0 * 97.0 / 42.9,
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

/// Same airframe compressed to a 12 s boost-sustain burn so whole-flight
/// tests finish in tens of milliseconds. The motor tapers so burnout is
/// slow (~20 m/s): with thrust gone the vehicle has no control authority,
/// and a slow burnout keeps the unpowered coast to apogee short enough
/// that the aerodynamic instability cannot grow a visible tumble.
pub(crate) fn short_vehicle() -> VehicleConfig {
    let mut cfg = test_vehicle();
    cfg.x_cm = Table1D::new(vec![(0.0, 1.95), (12.0, 1.70)]).unwrap();
    cfg.j_l = Table1D::new(vec![(0.0, 0.60), (12.0, 0.29)]).unwrap();
    cfg.j_t = Table1D::new(vec![(0.0, 88.0), (12.0, 42.5)]).unwrap();
    cfg.thrust_curve = Table1D::new(vec![
        (0.0, 1100.0),
        (4.0, 1100.0),
        (5.0, 480.0),
        (12.0, 390.0),
    ])
    .unwrap();
    cfg.exhaust_velocity = cfg.thrust_curve.integral_to(12.0) / (cfg.total_mass - cfg.dry_mass);
    cfg
}

/// Short-burn scenario with a gentle pitch-over; disturbance-free and
/// exact-state by default so tests opt in to noise and wind.
pub(crate) fn short_scenario() -> ScenarioConfig {
    use crate::control::{ActuatorConfig, LqiWeights, PidGains};
    use crate::navigation::SensorSuiteConfig;
    use crate::sim::{ControllerKind, InitialStateConfig};
    use std::collections::BTreeMap;

    ScenarioConfig {
        schema_version: SCENARIO_SCHEMA_VERSION,
        vehicle: short_vehicle(),
        pitch_program: Table1D::new(vec![
            (0.0, 0.0),
            (3.0, 0.0),
            (8.0, 0.035),
            (12.0, 0.035),
        ])
        .unwrap(),
        wind: None,
        sensors: SensorSuiteConfig::default(),
        exact_state: true,
        weights: LqiWeights::default(),
        controller: ControllerKind::Lqi,
        pid: PidGains::default(),
        actuator: ActuatorConfig::default(),
        uncertainty: BTreeMap::new(),
        initial: InitialStateConfig::default(),
        dt_plant: 1e-3,
        dt_gnc: 1e-2,
        duration: 40.0,
        seed: 11,
    }
}
