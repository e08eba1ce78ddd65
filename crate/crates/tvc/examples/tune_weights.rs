//! Feedback-weight tuning utility.
//!
//! With no arguments, checks the shipped default weights against the
//! tracking targets: 10-90% rise inside 0.2-0.5 s, 2% settling inside
//! 0.4-0.8 s, overshoot under 5% but visibly nonzero so the nonlinear
//! comparison has something to match.  With `search`, sweeps candidate
//! quadratic weights, synthesizes a schedule for each, and scores the
//! closed-loop linear step response at several flight times.

use tvc::control::{synthesize_schedule, AxisWeights, LqiWeights};
use tvc::linearize::{extract_operating_points, ExtractOptions, OperatingPoint};
use tvc::sim::{
    ascent_scenario, generate_feedforward, linear_step_response, ScenarioConfig, StepAxis,
    StepMetrics,
};

const PROBE_TIMES: [f64; 4] = [5.0, 35.0, 65.0, 95.0];
const STEP: f64 = 3.0 * std::f64::consts::PI / 180.0;

fn probe(
    scenario: &ScenarioConfig,
    points: &[OperatingPoint],
    schedule: &tvc::control::GainSchedule,
    t: f64,
) -> Option<StepMetrics> {
    linear_step_response(scenario, points, schedule, t, STEP, StepAxis::Pitch)
        .ok()
        .map(|(m, _)| m)
}

fn in_band(m: &StepMetrics) -> bool {
    (0.2..=0.5).contains(&m.rise_time_s)
        && (0.4..=0.8).contains(&m.settling_time_s)
        && m.overshoot_pct < 5.0
}

fn main() {
    let search = std::env::args().nth(1).as_deref() == Some("search");
    let scenario = ascent_scenario();
    let (_, samples, _) = generate_feedforward(&scenario).expect("nominal run");
    let points =
        extract_operating_points(&scenario.vehicle, &samples, &ExtractOptions::default())
            .expect("extraction");
    println!("{} operating points", points.len());

    let shipped = synthesize_schedule(&points, &LqiWeights::default()).expect("shipped weights");
    for &t in &PROBE_TIMES {
        match probe(&scenario, &points, &shipped, t) {
            Some(m) => println!(
                "shipped t={t:4.0}: rise {:.3} settle {:.3} overshoot {:.2}% ({})",
                m.rise_time_s,
                m.settling_time_s,
                m.overshoot_pct,
                if in_band(&m) { "in band" } else { "OUT OF BAND" }
            ),
            None => println!("shipped t={t:4.0}: UNSETTLED"),
        }
    }
    if !search {
        return;
    }

    let mut best: Option<(f64, LqiWeights)> = None;
    let attitudes = [1_000.0, 2_000.0, 3_000.0, 6_000.0];
    let rate_fracs = [0.02, 0.05, 0.1, 0.2, 0.4];
    let int_fracs = [12.0, 24.0, 48.0, 96.0];
    for &attitude in &attitudes {
        for &rf in &rate_fracs {
            for &inf in &int_fracs {
                let axis = AxisWeights {
                    rate: attitude * rf,
                    attitude,
                    integral: attitude * inf,
                    effort: 1.0,
                };
                let weights = LqiWeights { lon: axis, lat: axis };
                let Ok(schedule) = synthesize_schedule(&points, &weights) else {
                    println!(
                        "rate={:8.0} attitude={:6.0} integral={:7.0}: synthesis failed",
                        axis.rate, axis.attitude, axis.integral
                    );
                    continue;
                };
                let mut score = 0.0;
                let mut in_band_count = 0;
                let mut summary = String::new();
                for &t in &PROBE_TIMES {
                    let Some(m) = probe(&scenario, &points, &schedule, t) else {
                        summary.push_str(&format!(" t={t}: unsettled |"));
                        continue;
                    };
                    if in_band(&m) {
                        in_band_count += 1;
                    }
                    summary.push_str(&format!(
                        " t={t}: r{:.2} s{:.2} o{:.1}{} |",
                        m.rise_time_s,
                        m.settling_time_s,
                        m.overshoot_pct,
                        if in_band(&m) { "" } else { "*" }
                    ));
                    score += ((m.rise_time_s - 0.35) / 0.35).powi(2)
                        + ((m.settling_time_s - 0.6) / 0.6).powi(2)
                        + ((m.overshoot_pct - 1.0) / 1.0).powi(2);
                }
                println!(
                    "rate={:8.0} attitude={:6.0} integral={:7.0}: [{in_band_count}/4]{summary}",
                    axis.rate, axis.attitude, axis.integral
                );
                if in_band_count < 4 {
                    continue;
                }
                if best.as_ref().map(|(s, _)| score < *s).unwrap_or(true) {
                    best = Some((score, weights));
                }
            }
        }
    }
    match best {
        Some((score, w)) => println!(
            "\nbest score {score:.4}: rate {} attitude {} integral {} effort {}",
            w.lon.rate, w.lon.attitude, w.lon.integral, w.lon.effort
        ),
        None => println!("\nno candidate met every band"),
    }
}
