use nalgebra::Vector3;
use tvc::navigation::{AttitudeFilter, PositionFilter, SensorSuite, SensorSuiteConfig};
use tvc::vehicle::RigidBodyState;

fn main() {
    let mut cfg = SensorSuiteConfig::default();
    cfg.euler_noise = 0.0;
    cfg.gyro_noise = 0.0;
    cfg.accel_noise = 0.0;
    cfg.gnss_noise = 0.0;
    cfg.gyro_bias_walk = 0.0;
    cfg.accel_bias_walk = 0.0;
    let mut suite = SensorSuite::new(cfg, 777);
    let truth = RigidBodyState::on_pad(30.0);
    let mut acf = AttitudeFilter::new(truth.attitude.as_vector());
    let mut pcf = PositionFilter::new(truth.position, truth.inertial_velocity());
    let dt = 0.01;
    // A motionless vehicle has zero coordinate acceleration.
    let accel = Vector3::zeros();
    let mut prev: Option<tvc::navigation::SensorSample> = None;
    for k in 0..=6000 {
        let sample = suite.sample(&truth, &accel, dt);
        if let Some(p) = &prev {
            let att = acf.estimate().unwrap();
            acf.update(&(0.5 * (p.euler + sample.euler)), &(0.5 * (p.gyro + sample.gyro)), dt).unwrap();
            pcf.update(&(0.5 * (p.position + sample.position)), &(0.5 * (p.accel + sample.accel)), &att, dt);
        }
        prev = Some(sample);
        if k % 1000 == 0 {
            let gb = acf.gyro_bias;
            let ab = pcf.accel_bias;
            println!(
                "t={:5.1} gyro_bias_est [{:+.5} {:+.5} {:+.5}] (true {:.5})  accel_bias_est [{:+.5} {:+.5} {:+.5}] (true {:.5})",
                k as f64 * dt, gb.x, gb.y, gb.z, cfg.gyro_bias, ab.x, ab.y, ab.z, cfg.accel_bias
            );
        }
    }
    let gb = acf.gyro_bias;
    let ab = pcf.accel_bias;
    for (i, axis) in ["p", "q", "r"].iter().enumerate() {
        println!("gyro bias {axis}: rel err {:.4}", (gb[i] - cfg.gyro_bias).abs() / cfg.gyro_bias);
    }
    for (i, axis) in ["x", "y", "z"].iter().enumerate() {
        println!("accel bias {axis}: rel err {:.4}", (ab[i] - cfg.accel_bias).abs() / cfg.accel_bias);
    }
}
