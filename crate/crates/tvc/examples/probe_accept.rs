use tvc::sim::*;

fn main() {
    let scenario = ascent_scenario();
    let t0 = std::time::Instant::now();
    let art = run_nominal_and_build(&scenario).expect("build");
    println!("build took {:.2?}; {} points", t0.elapsed(), art.points.len());

    let poles = pole_analysis(&art.points, &art.schedule).expect("poles");
    let mut worst_closed = f64::NEG_INFINITY;
    let mut all_open_unstable = true;
    for p in &poles {
        let open_max = p.open.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        let closed_max = p.closed.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        if open_max <= 0.0 { all_open_unstable = false; println!("  OPEN STABLE at t={}", p.time); }
        worst_closed = worst_closed.max(closed_max);
    }
    println!("open loop unstable everywhere: {all_open_unstable}; worst closed Re = {worst_closed:.4}");

    for t in [5.0, 35.0, 65.0, 95.0] {
        match step_response_experiment(&scenario, &art.points, &art.schedule, t, 3.0_f64.to_radians(), StepAxis::Pitch) {
            Ok(r) => {
                let rel = |a: f64, b: f64| if b != 0.0 { (a / b - 1.0).abs() } else { f64::NAN };
                println!("t={t:4.0}: lin rise {:.3} settle {:.3} os {:5.2}% | nl rise {:.3} settle {:.3} os {:5.2}% | rel rise {:.2} settle {:.2} os {:.2}",
                    r.linear.rise_time_s, r.linear.settling_time_s, r.linear.overshoot_pct,
                    r.nonlinear.rise_time_s, r.nonlinear.settling_time_s, r.nonlinear.overshoot_pct,
                    rel(r.nonlinear.rise_time_s, r.linear.rise_time_s),
                    rel(r.nonlinear.settling_time_s, r.linear.settling_time_s),
                    rel(r.nonlinear.overshoot_pct, r.linear.overshoot_pct));
            }
            Err(e) => println!("t={t:4.0}: ERROR {e}"),
        }
    }

    // Estimator quality on the flown ascent: max pitch estimate error
    // after 10 s, with wind and with default sensor noise.
    let mut noisy = scenario.clone();
    noisy.exact_state = false;
    let (log, _) = run_closed_loop(&noisy, Some(&art.schedule), Some(&art.feedforward)).expect("noisy run");
    let mut worst_est = 0.0_f64;
    let mut worst_t = 0.0;
    for r in log.records.iter().filter(|r| r.t >= 10.0) {
        let e = (r.attitude_estimate[1] - r.truth.attitude.theta).abs();
        if e > worst_est { worst_est = e; worst_t = r.t; }
    }
    println!("estimated run: worst pitch est err after 10 s = {:.4} deg at t={:.1}", worst_est.to_degrees(), worst_t);

    // Controller comparison under the same seeded wind, estimated state.
    let mut lqi = noisy.clone();
    lqi.controller = ControllerKind::Lqi;
    let mut pid = noisy.clone();
    pid.controller = ControllerKind::Pid;
    let (_, m_lqi) = run_closed_loop(&lqi, Some(&art.schedule), Some(&art.feedforward)).expect("lqi run");
    let (_, m_pid) = run_closed_loop(&pid, None, Some(&art.feedforward)).expect("pid run");
    println!("LQI: th {:.3} psi {:.3} rms_p {:.4} rms_y {:.4} apogee {:.0}",
        m_lqi.sum_sq_pitch_error_deg2, m_lqi.sum_sq_yaw_error_deg2, m_lqi.rms_mu_p_deg, m_lqi.rms_mu_y_deg, m_lqi.apogee_m);
    println!("PID: th {:.3} psi {:.3} rms_p {:.4} rms_y {:.4} apogee {:.0}",
        m_pid.sum_sq_pitch_error_deg2, m_pid.sum_sq_yaw_error_deg2, m_pid.rms_mu_p_deg, m_pid.rms_mu_y_deg, m_pid.apogee_m);
    println!("orderings: th {} psi {} | rms_p rel {:.3} rms_y rel {:.3}",
        m_lqi.sum_sq_pitch_error_deg2 < m_pid.sum_sq_pitch_error_deg2,
        m_lqi.sum_sq_yaw_error_deg2 < m_pid.sum_sq_yaw_error_deg2,
        (m_lqi.rms_mu_p_deg / m_pid.rms_mu_p_deg - 1.0).abs(),
        (m_lqi.rms_mu_y_deg / m_pid.rms_mu_y_deg - 1.0).abs());

    // Exact-state LQI under the same wind must beat the estimated run.
    let mut exact = lqi.clone();
    exact.exact_state = true;
    let (_, m_exact) = run_closed_loop(&exact, Some(&art.schedule), Some(&art.feedforward)).expect("exact run");
    println!("exact LQI: th {:.3} vs estimated {:.3} -> exact better: {}",
        m_exact.sum_sq_pitch_error_deg2, m_lqi.sum_sq_pitch_error_deg2,
        m_exact.sum_sq_pitch_error_deg2 < m_lqi.sum_sq_pitch_error_deg2);
    let mut pid_exact = pid.clone();
    pid_exact.exact_state = true;
    let (_, m_pid_exact) = run_closed_loop(&pid_exact, None, Some(&art.feedforward)).expect("pid exact");
    println!("exact rms_y: LQI {:.4} PID {:.4} | estimated rms_y: LQI {:.4} PID {:.4}",
        m_exact.rms_mu_y_deg, m_pid_exact.rms_mu_y_deg, m_lqi.rms_mu_y_deg, m_pid.rms_mu_y_deg);

    // Center-of-mass robustness sweep, exact state, seeded wind.
    let mut sweep_base = lqi.clone();
    sweep_base.exact_state = true;
    let rows = robustness_sweep(&sweep_base, &art.schedule, &art.feedforward, "x_cm", &[0.8, 0.9, 1.0, 1.1, 1.2]).expect("sweep");
    for r in &rows {
        match &r.metrics {
            Some(m) => println!("x_cm x{:.1}: stable={} th {:.4} rms_p {:.4}", r.factor, r.stable, m.sum_sq_pitch_error_deg2, m.rms_mu_p_deg),
            None => println!("x_cm x{:.1}: stable={} (no metrics)", r.factor, r.stable),
        }
    }

    // Joint-integration filter exactness over the full flight.
    let t1 = std::time::Instant::now();
    let exactness = kinematic_exactness_run(&scenario, &art.schedule).expect("exactness");
    println!("kinematic exactness: att {:.3e} rad, pos {:.3e} m ({:.2?})",
        exactness.max_attitude_error_rad, exactness.max_position_error_m, t1.elapsed());

    // Vertical-profile figures and wall time.
    let vertical = vertical_scenario();
    let t2 = std::time::Instant::now();
    let v_art = run_nominal_and_build(&vertical).expect("vertical build");
    println!("vertical: apogee {:.1} vmax {:.2} t_apogee {:.2} ({:.2?})",
        v_art.nominal_metrics.apogee_m, v_art.nominal_metrics.max_velocity_ms, v_art.nominal_metrics.time_to_apogee_s, t2.elapsed());
}
