use tvc::control::{synthesize_schedule, AxisWeights, LqiWeights};
use tvc::linearize::{extract_operating_points, ExtractOptions};
use tvc::sim::*;

fn main() {
    let scenario = ascent_scenario();
    let (ff, samples, _) = generate_feedforward(&scenario).expect("nominal");
    let points = extract_operating_points(&scenario.vehicle, &samples, &ExtractOptions::default()).expect("points");

    let mut pid = scenario.clone();
    pid.exact_state = false;
    pid.controller = ControllerKind::Pid;
    let (_, m_pid) = run_closed_loop(&pid, None, Some(&ff)).expect("pid");
    println!("PID: psi {:.3} rms_y {:.4}", m_pid.sum_sq_yaw_error_deg2, m_pid.rms_mu_y_deg);

    for scale in [1.0, 0.9, 0.8, 0.7, 0.6, 0.5] {
        let mut weights = LqiWeights::default();
        weights.lat = AxisWeights {
            rate: weights.lat.rate * scale,
            attitude: weights.lat.attitude * scale,
            integral: weights.lat.integral * scale,
            effort: 1.0,
        };
        let schedule = synthesize_schedule(&points, &weights).expect("schedule");
        let mut lqi = scenario.clone();
        lqi.exact_state = false;
        lqi.weights = weights;
        let (_, m) = run_closed_loop(&lqi, Some(&schedule), Some(&ff)).expect("lqi");
        println!(
            "lat x{scale:.1}: psi {:.3} (ordering {}) rms_y {:.4} rel {:.3}",
            m.sum_sq_yaw_error_deg2,
            m.sum_sq_yaw_error_deg2 < m_pid.sum_sq_yaw_error_deg2,
            m.rms_mu_y_deg,
            (m.rms_mu_y_deg / m_pid.rms_mu_y_deg - 1.0).abs()
        );
    }
}
