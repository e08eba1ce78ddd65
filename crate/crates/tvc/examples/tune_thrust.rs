//! Thrust-curve tuning utility for the default vehicle.
//!
//! Flies the disturbance-free vertical mission over a grid of boost and
//! sustain thrust scalings and scores each candidate against the target
//! performance figures (peak velocity 82 m/s, apogee 4945 m at about
//! 100 s, burnout slow enough for a short benign coast). Run with no
//! arguments to verify the shipped curve; pass `search` to sweep the
//! grid and print the best knot table.

use tvc::sim::{generate_feedforward, vertical_scenario, ScenarioConfig};
use tvc::vehicle::Table1D;

const TARGET_VMAX: f64 = 82.0;
const TARGET_APOGEE: f64 = 4945.0;
const TARGET_T_APOGEE: f64 = 100.0;
/// Boost knots end at this time; later knots are the sustain phase.
const BOOST_END: f64 = 45.0;

struct Performance {
    vmax: f64,
    apogee: f64,
    t_apogee: f64,
    burnout_speed: f64,
}

fn fly(scenario: &ScenarioConfig) -> Result<Performance, tvc::Error> {
    let (_, _, log) = generate_feedforward(scenario)?;
    let burn = scenario.vehicle.burn_time();
    let vmax = log
        .records
        .iter()
        .map(|r| r.truth.inertial_velocity().norm())
        .fold(0.0, f64::max);
    let burnout_speed = log
        .records
        .iter()
        .filter(|r| r.t <= burn)
        .next_back()
        .map(|r| r.truth.inertial_velocity().norm())
        .unwrap_or(f64::NAN);
    let apogee = log.apogee().ok_or_else(|| {
        tvc::Error::Sim("vertical flight never reached apogee".into())
    })?;
    Ok(Performance {
        vmax,
        apogee: apogee.altitude,
        t_apogee: apogee.time,
        burnout_speed,
    })
}

fn scaled(base: &ScenarioConfig, boost: f64, sustain: f64) -> ScenarioConfig {
    let mut scenario = base.clone();
    let knots: Vec<(f64, f64)> = scenario
        .vehicle
        .thrust_curve
        .points()
        .iter()
        .map(|&(t, f)| (t, if t <= BOOST_END { f * boost } else { f * sustain }))
        .collect();
    scenario.vehicle.thrust_curve = Table1D::new(knots).unwrap();
    let burn = scenario.vehicle.burn_time();
    let propellant = scenario.vehicle.total_mass - scenario.vehicle.dry_mass;
    scenario.vehicle.exhaust_velocity =
        scenario.vehicle.thrust_curve.integral_to(burn) / propellant;
    scenario
}

fn score(p: &Performance) -> f64 {
    let ev = (p.vmax / TARGET_VMAX - 1.0).powi(2);
    let ea = (p.apogee / TARGET_APOGEE - 1.0).powi(2);
    let et = (p.t_apogee / TARGET_T_APOGEE - 1.0).powi(2);
    // A hot burnout lengthens the uncontrolled coast; penalize above 30 m/s.
    let eb = ((p.burnout_speed - 30.0).max(0.0) / 30.0).powi(2);
    ev + 4.0 * ea + et + eb
}

fn report(tag: &str, p: &Performance) {
    println!(
        "{tag}: vmax {:7.2} m/s | apogee {:8.1} m | t_apogee {:6.2} s | burnout {:5.2} m/s",
        p.vmax, p.apogee, p.t_apogee, p.burnout_speed
    );
    let band = |v: f64, target: f64, frac: f64| {
        if (v / target - 1.0).abs() <= frac { "in band" } else { "OUT OF BAND" }
    };
    println!(
        "      vmax {} (+-15%), apogee {} (+-10%), t_apogee {} (+-10%)",
        band(p.vmax, TARGET_VMAX, 0.15),
        band(p.apogee, TARGET_APOGEE, 0.10),
        band(p.t_apogee, TARGET_T_APOGEE, 0.10)
    );
}

fn main() {
    let search = std::env::args().nth(1).as_deref() == Some("search".to_string()).as_deref();
    let base = vertical_scenario();

    let shipped = fly(&base).expect("shipped curve must fly");
    report("shipped", &shipped);

    if !search {
        return;
    }

    let mut best: Option<(f64, f64, f64, Performance)> = None;
    for bi in 0..13 {
        for si in 0..15 {
            let boost = 0.95 + 0.005 * bi as f64;
            let sustain = 0.93 + 0.005 * si as f64;
            let scenario = scaled(&base, boost, sustain);
            let Ok(p) = fly(&scenario) else { continue };
            let s = score(&p);
            if best.as_ref().map(|b| s < b.2).unwrap_or(true) {
                best = Some((boost, sustain, s, p));
            }
        }
    }
    let (boost, sustain, s, p) = best.expect("no candidate flew");
    println!("\nbest: boost x{boost:.3}, sustain x{sustain:.3} (score {s:.5})");
    report("best", &p);
    let tuned = scaled(&base, boost, sustain);
    println!("knots:");
    for (t, f) in tuned.vehicle.thrust_curve.points() {
        println!("    ({t:.1}, {f:.1}),");
    }
    println!("exhaust velocity: {:.2}", tuned.vehicle.exhaust_velocity);
}
