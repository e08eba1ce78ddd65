use tvc::navigation::SensorSuiteConfig;
use tvc::sim::*;

fn run_case(label: &str, scenario: &ScenarioConfig, art: &BuildArtifacts) {
    let (log, _) = run_closed_loop(scenario, Some(&art.schedule), Some(&art.feedforward)).expect(label);
    let mut worst = 0.0_f64;
    let mut worst_t = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0.0;
    for r in log.records.iter().filter(|r| r.t >= 10.0) {
        let e = r.attitude_estimate[1] - r.truth.attitude.theta;
        if e.abs() > worst {
            worst = e.abs();
            worst_t = r.t;
        }
        if r.t <= 90.0 {
            sum_sq += e * e;
            count += 1.0;
        }
    }
    let std = (sum_sq / count).sqrt();
    println!(
        "{label:24} worst {:.4} deg at t={:6.2}  std(10-90s) {:.4} deg  ratio {:.1}",
        worst.to_degrees(),
        worst_t,
        std.to_degrees(),
        worst / std
    );
    // Error envelope over the last 8 seconds.
    let mut env = String::new();
    for r in log.records.iter().filter(|r| r.t >= log.records.last().unwrap().t - 8.0) {
        if (r.t * 100.0).round() as i64 % 100 == 0 {
            let e = (r.attitude_estimate[1] - r.truth.attitude.theta).to_degrees();
            env.push_str(&format!(" {:.0}:{:+.3}", r.t, e));
        }
    }
    println!("{label:24} tail:{env}");
}

fn main() {
    let scenario = ascent_scenario();
    let art = run_nominal_and_build(&scenario).expect("build");

    let mut base = scenario.clone();
    base.exact_state = false;

    let mut quiet = base.clone();
    quiet.sensors = SensorSuiteConfig {
        euler_noise: 0.0,
        gyro_noise: 0.0,
        accel_noise: 0.0,
        gnss_noise: 0.0,
        gyro_bias: 0.0,
        accel_bias: 0.0,
        gyro_bias_walk: 0.0,
        accel_bias_walk: 0.0,
    };
    run_case("all zero", &quiet, &art);

    let mut bias_only = quiet.clone();
    bias_only.sensors.gyro_bias = 0.5_f64.to_radians();
    bias_only.sensors.accel_bias = 0.1;
    run_case("bias only", &bias_only, &art);

    let mut noise_only = quiet.clone();
    noise_only.sensors.euler_noise = 0.05_f64.to_radians();
    noise_only.sensors.gyro_noise = 0.001;
    noise_only.sensors.accel_noise = 0.05;
    noise_only.sensors.gnss_noise = 1.5;
    run_case("white noise only", &noise_only, &art);

    run_case("defaults", &base, &art);

    let mut no_wind = base.clone();
    no_wind.wind = None;
    run_case("defaults, no wind", &no_wind, &art);
}
