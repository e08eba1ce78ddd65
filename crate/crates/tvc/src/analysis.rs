//! Post-flight reduction: metrics computed from run logs and the
//! comparison checks built on them.
//!
//! Metrics are pure functions of the log, so recomputing them from a
//! log that round-tripped through CSV reproduces the stored values bit
//! for bit. Angles live in radians everywhere else in the crate and are
//! converted to degrees here, at the reporting boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{EventKind, RunMetrics, SimLog};

/// Reduces a run log to its headline metrics. Tracking errors and
/// actuation RMS cover the powered segment (up to the burnout event
/// when the log has one): past burnout the gimbal has no authority, so
/// coast attitude says nothing about the controller. The trajectory
/// figures span the whole log and prefer the sub-step refined apogee
/// event over the sampled maximum.
pub fn compute_metrics(log: &SimLog) -> Result<RunMetrics> {
    if log.records.is_empty() {
        return Err(Error::Sim("cannot compute metrics of an empty log".into()));
    }
    let powered_end = log
        .events
        .iter()
        .find(|e| e.kind == EventKind::Burnout)
        .map(|e| e.time)
        .unwrap_or(f64::INFINITY);
    let mut n = 0.0;
    let mut sum_sq_pitch = 0.0;
    let mut sum_sq_yaw = 0.0;
    let mut sum_sq_mu_p = 0.0;
    let mut sum_sq_mu_y = 0.0;
    let mut max_velocity: f64 = 0.0;
    let mut best_alt = f64::NEG_INFINITY;
    let mut best_t = 0.0;
    for r in &log.records {
        if r.t <= powered_end {
            n += 1.0;
            sum_sq_pitch += (r.truth.attitude.theta - r.theta_ref).to_degrees().powi(2);
            sum_sq_yaw += (r.truth.attitude.psi - r.psi_ref).to_degrees().powi(2);
            sum_sq_mu_p += r.achieved.mu_p.to_degrees().powi(2);
            sum_sq_mu_y += r.achieved.mu_y.to_degrees().powi(2);
        }
        max_velocity = max_velocity.max(r.truth.inertial_velocity().norm());
        if r.truth.altitude() > best_alt {
            best_alt = r.truth.altitude();
            best_t = r.t;
        }
    }
    if n == 0.0 {
        return Err(Error::Sim("no samples before the burnout event".into()));
    }
    let (apogee_m, time_to_apogee_s) = match log.apogee() {
        Some(e) => (e.altitude, e.time),
        None => (best_alt, best_t),
    };
    Ok(RunMetrics {
        sum_sq_pitch_error_deg2: sum_sq_pitch,
        sum_sq_yaw_error_deg2: sum_sq_yaw,
        rms_mu_p_deg: (sum_sq_mu_p / n).sqrt(),
        rms_mu_y_deg: (sum_sq_mu_y / n).sqrt(),
        apogee_m,
        max_velocity_ms: max_velocity,
        time_to_apogee_s,
    })
}

/// One scalar column of [`RunMetrics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    SumSqPitchError,
    SumSqYawError,
    RmsMuP,
    RmsMuY,
    Apogee,
    MaxVelocity,
    TimeToApogee,
}

impl MetricKind {
    pub fn get(&self, m: &RunMetrics) -> f64 {
        match self {
            MetricKind::SumSqPitchError => m.sum_sq_pitch_error_deg2,
            MetricKind::SumSqYawError => m.sum_sq_yaw_error_deg2,
            MetricKind::RmsMuP => m.rms_mu_p_deg,
            MetricKind::RmsMuY => m.rms_mu_y_deg,
            MetricKind::Apogee => m.apogee_m,
            MetricKind::MaxVelocity => m.max_velocity_ms,
            MetricKind::TimeToApogee => m.time_to_apogee_s,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::SumSqPitchError => "sum_sq_pitch_error_deg2",
            MetricKind::SumSqYawError => "sum_sq_yaw_error_deg2",
            MetricKind::RmsMuP => "rms_mu_p_deg",
            MetricKind::RmsMuY => "rms_mu_y_deg",
            MetricKind::Apogee => "apogee_m",
            MetricKind::MaxVelocity => "max_velocity_ms",
            MetricKind::TimeToApogee => "time_to_apogee_s",
        }
    }

    pub const ALL: [MetricKind; 7] = [
        MetricKind::SumSqPitchError,
        MetricKind::SumSqYawError,
        MetricKind::RmsMuP,
        MetricKind::RmsMuY,
        MetricKind::Apogee,
        MetricKind::MaxVelocity,
        MetricKind::TimeToApogee,
    ];
}

/// Metrics of one labeled run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledMetrics {
    pub label: String,
    pub metrics: RunMetrics,
}

/// Relation a comparison check asserts between two runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// metric(a) strictly below metric(b).
    Less,
    /// |metric(a)/metric(b) - 1| within the given fraction.
    Within { tol: f64 },
}

/// A named assertion between two labeled runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricCheck {
    pub metric: MetricKind,
    pub a: String,
    pub b: String,
    pub kind: CheckKind,
}

/// Evaluated check with the numbers that decided it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: MetricCheck,
    pub a_value: f64,
    pub b_value: f64,
    pub pass: bool,
}

fn lookup<'a>(runs: &'a [LabeledMetrics], label: &str) -> Result<&'a RunMetrics> {
    runs.iter()
        .find(|r| r.label == label)
        .map(|r| &r.metrics)
        .ok_or_else(|| Error::Config(format!("no run labeled {label:?}")))
}

/// Evaluates every check against the labeled runs; an unknown label is
/// an error, a failed relation is a recorded result.
pub fn evaluate_checks(
    runs: &[LabeledMetrics],
    checks: &[MetricCheck],
) -> Result<Vec<CheckResult>> {
    checks
        .iter()
        .map(|c| {
            let a_value = c.metric.get(lookup(runs, &c.a)?);
            let b_value = c.metric.get(lookup(runs, &c.b)?);
            let pass = match c.kind {
                CheckKind::Less => a_value < b_value,
                CheckKind::Within { tol } => {
                    b_value != 0.0 && (a_value / b_value - 1.0).abs() <= tol
                }
            };
            Ok(CheckResult {
                check: c.clone(),
                a_value,
                b_value,
                pass,
            })
        })
        .collect()
}

/// Side-by-side metrics of several runs of one scenario plus the
/// relations asserted between them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario_sha256: String,
    pub runs: Vec<LabeledMetrics>,
    pub checks: Vec<CheckResult>,
}

impl ComparisonReport {
    pub fn new(
        scenario_sha256: String,
        runs: Vec<LabeledMetrics>,
        checks: &[MetricCheck],
    ) -> Result<Self> {
        let checks = evaluate_checks(&runs, checks)?;
        Ok(ComparisonReport {
            scenario_sha256,
            runs,
            checks,
        })
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Plain-text rendering: one row per run, one line per check.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.scenario_sha256);
        let _ = write!(out, "{:<16}", "run");
        for m in MetricKind::ALL {
            let _ = write!(out, " {:>22}", m.name());
        }
        let _ = writeln!(out);
        for r in &self.runs {
            let _ = write!(out, "{:<16}", r.label);
            for m in MetricKind::ALL {
                let _ = write!(out, " {:>22.6}", m.get(&r.metrics));
            }
            let _ = writeln!(out);
        }
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let relation = match c.check.kind {
                CheckKind::Less => format!(
                    "{} ({:.6}) < {} ({:.6})",
                    c.check.a, c.a_value, c.check.b, c.b_value
                ),
                CheckKind::Within { tol } => format!(
                    "{} ({:.6}) within {:.0}% of {} ({:.6})",
                    c.check.a,
                    c.a_value,
                    tol * 100.0,
                    c.check.b,
                    c.b_value
                ),
            };
            let _ = writeln!(out, "{verdict} {}: {relation}", c.check.metric.name());
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.pass() { "PASS" } else { "FAIL" }
        );
        out
    }
}
