//! Command implementations: orchestration between scenario files, the
//! library pipeline, and the artifact files on disk.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;

use tvc::control::GainSchedule;
use tvc::io::{csv_to_table, from_envelope_json, table_to_csv, to_envelope_json, Table};
use tvc::linearize::{extract_operating_points, ExtractOptions, OperatingPoint};
use tvc::sim::{
    generate_feedforward, pole_analysis, poles_to_table, robustness_sweep, run_closed_loop,
    run_nominal_and_build, step_response_experiment, sweep_to_table, ControllerKind,
    FeedforwardTable, ScenarioConfig, StepAxis,
};

use crate::plot::{chart, Series};

pub const FEEDFORWARD_FILE: &str = "feedforward.csv";
pub const POINTS_FILE: &str = "operating_points.json";
pub const SCHEDULE_FILE: &str = "gain_schedule.json";

/// Errors split by exit code: bad inputs versus failures while running.
pub enum CliError {
    /// Missing or malformed inputs; exit code 2.
    Usage(anyhow::Error),
    /// A stage failed after the inputs checked out; exit code 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

type CliResult<T = ()> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(anyhow!("reading {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| runtime(anyhow!("writing {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_scenario(path: &Path) -> CliResult<ScenarioConfig> {
    ScenarioConfig::from_json(&read_text(path)?)
        .map_err(|e| usage(anyhow!("scenario {}: {e}", path.display())))
}

fn check_provenance(path: &Path, found: &str, expected: &str) -> CliResult {
    if found != expected {
        return Err(usage(anyhow!(
            "{} was built from a different scenario (found {found}, expected {expected}); \
             re-run the build command",
            path.display()
        )));
    }
    Ok(())
}

struct Artifacts {
    points: Vec<OperatingPoint>,
    schedule: GainSchedule,
    feedforward: FeedforwardTable,
}

fn load_schedule(path: &Path, scenario_hash: &str) -> CliResult<GainSchedule> {
    let env = from_envelope_json::<GainSchedule>(&read_text(path)?)
        .map_err(|e| usage(anyhow!("schedule {}: {e}", path.display())))?;
    check_provenance(path, &env.scenario_sha256, scenario_hash)?;
    env.payload
        .validate()
        .map_err(|e| usage(anyhow!("schedule {}: {e}", path.display())))?;
    Ok(env.payload)
}

fn load_feedforward(path: &Path, scenario_hash: &str) -> CliResult<FeedforwardTable> {
    let text = read_text(path)?;
    let doc = csv_to_table(&text).map_err(|e| usage(anyhow!("{}: {e}", path.display())))?;
    let found = doc
        .comment_value("scenario_sha256")
        .ok_or_else(|| usage(anyhow!("{} lacks a scenario_sha256 comment", path.display())))?;
    check_provenance(path, found, scenario_hash)?;
    FeedforwardTable::from_csv(&text).map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

fn load_points(path: &Path, scenario_hash: &str) -> CliResult<Vec<OperatingPoint>> {
    let env = from_envelope_json::<Vec<OperatingPoint>>(&read_text(path)?)
        .map_err(|e| usage(anyhow!("operating points {}: {e}", path.display())))?;
    check_provenance(path, &env.scenario_sha256, scenario_hash)?;
    Ok(env.payload)
}

fn write_artifacts(out: &Path, scenario_hash: &str, artifacts: &Artifacts) -> CliResult {
    fs::create_dir_all(out).map_err(|e| runtime(anyhow!("creating {}: {e}", out.display())))?;
    write_text(
        &out.join(FEEDFORWARD_FILE),
        &artifacts.feedforward.to_csv(scenario_hash),
    )?;
    write_text(
        &out.join(POINTS_FILE),
        &to_envelope_json(&artifacts.points, scenario_hash).map_err(runtime)?,
    )?;
    write_text(
        &out.join(SCHEDULE_FILE),
        &to_envelope_json(&artifacts.schedule, scenario_hash).map_err(runtime)?,
    )?;
    Ok(())
}

/// Loads the build artifacts from `out` when all three are present (their
/// provenance hashes must match the scenario); otherwise builds them
/// in-process and leaves them in `out` for the next command.
fn load_or_build(scenario: &ScenarioConfig, out: &Path) -> CliResult<Artifacts> {
    let hash = scenario.hash().map_err(runtime)?;
    let (ff, pp, sp) = (
        out.join(FEEDFORWARD_FILE),
        out.join(POINTS_FILE),
        out.join(SCHEDULE_FILE),
    );
    if ff.is_file() && pp.is_file() && sp.is_file() {
        return Ok(Artifacts {
            points: load_points(&pp, &hash)?,
            schedule: load_schedule(&sp, &hash)?,
            feedforward: load_feedforward(&ff, &hash)?,
        });
    }
    let built = run_nominal_and_build(scenario).map_err(runtime)?;
    let artifacts = Artifacts {
        points: built.points,
        schedule: built.schedule,
        feedforward: built.feedforward,
    };
    write_artifacts(out, &hash, &artifacts)?;
    Ok(artifacts)
}

pub fn cmd_build(scenario_path: &Path, out: &Path) -> CliResult {
    let scenario = load_scenario(scenario_path)?;
    let hash = scenario.hash().map_err(runtime)?;
    let built = run_nominal_and_build(&scenario).map_err(runtime)?;
    write_artifacts(
        out,
        &hash,
        &Artifacts {
            points: built.points,
            schedule: built.schedule,
            feedforward: built.feedforward,
        },
    )?;
    let m = built.nominal_metrics;
    println!("scenario_sha256      {hash}");
    println!("schedule_nodes       {}", built.schedule.nodes.len());
    println!("apogee_m             {:.1}", m.apogee_m);
    println!("max_velocity_ms      {:.2}", m.max_velocity_ms);
    println!("time_to_apogee_s     {:.2}", m.time_to_apogee_s);
    Ok(())
}

pub struct FlyOptions {
    pub schedule: Option<PathBuf>,
    pub feedforward: Option<PathBuf>,
    pub wind: bool,
    pub no_wind: bool,
    pub exact_state: bool,
    pub controller: Option<ControllerKind>,
    pub seed: Option<u64>,
}

pub fn cmd_fly(scenario_path: &Path, out: &Path, opts: &FlyOptions) -> CliResult {
    let mut scenario = load_scenario(scenario_path)?;
    // Artifacts are stamped with the hash of the scenario as built; flag
    // overrides change the flown variant, not the provenance check.
    let base_hash = scenario.hash().map_err(runtime)?;
    if opts.no_wind {
        scenario.wind = None;
    } else if opts.wind && scenario.wind.is_none() {
        return Err(usage(anyhow!(
            "--wind requested but {} carries no wind model",
            scenario_path.display()
        )));
    }
    if opts.exact_state {
        scenario.exact_state = true;
    }
    if let Some(kind) = opts.controller {
        scenario.controller = kind;
    }
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }

    let schedule_path = opts
        .schedule
        .clone()
        .unwrap_or_else(|| out.join(SCHEDULE_FILE));
    let ff_path = opts
        .feedforward
        .clone()
        .unwrap_or_else(|| out.join(FEEDFORWARD_FILE));
    let schedule = load_schedule(&schedule_path, &base_hash)?;
    let feedforward = load_feedforward(&ff_path, &base_hash)?;

    let flown_hash = scenario.hash().map_err(runtime)?;
    let (log, metrics) = run_closed_loop(&scenario, Some(&schedule), Some(&feedforward))
        .map_err(|e| runtime(anyhow!("flight aborted: {e}")))?;

    fs::create_dir_all(out).map_err(|e| runtime(anyhow!("creating {}: {e}", out.display())))?;
    write_text(&out.join("run.csv"), &log.to_csv(&flown_hash))?;
    write_text(
        &out.join("metrics.json"),
        &to_envelope_json(&metrics, &flown_hash).map_err(runtime)?,
    )?;
    println!("sum_sq_pitch_error_deg2  {:.4}", metrics.sum_sq_pitch_error_deg2);
    println!("sum_sq_yaw_error_deg2    {:.4}", metrics.sum_sq_yaw_error_deg2);
    println!("rms_mu_p_deg             {:.4}", metrics.rms_mu_p_deg);
    println!("rms_mu_y_deg             {:.4}", metrics.rms_mu_y_deg);
    println!("apogee_m                 {:.1}", metrics.apogee_m);
    println!("max_velocity_ms          {:.2}", metrics.max_velocity_ms);
    println!("time_to_apogee_s         {:.2}", metrics.time_to_apogee_s);
    Ok(())
}

fn provenance_comments(kind: &str, scenario_hash: &str) -> Vec<String> {
    vec![
        format!("{kind} schema v1"),
        format!("scenario_sha256: {scenario_hash}"),
    ]
}

pub fn cmd_poles(scenario_path: &Path, out: &Path, svg: bool) -> CliResult {
    let scenario = load_scenario(scenario_path)?;
    let hash = scenario.hash().map_err(runtime)?;
    let artifacts = load_or_build(&scenario, out)?;
    let poles = pole_analysis(&artifacts.points, &artifacts.schedule).map_err(runtime)?;
    let table = poles_to_table(&poles);
    write_text(
        &out.join("poles.csv"),
        &table_to_csv(&table, &provenance_comments("pole map", &hash)),
    )?;

    let pick = |open: bool| -> Vec<(f64, f64)> {
        poles
            .iter()
            .flat_map(|p| if open { p.open.iter() } else { p.closed.iter() })
            .map(|e| (e.re, e.im))
            .collect()
    };
    let worst_closed = pick(false)
        .iter()
        .map(|(re, _)| *re)
        .fold(f64::NEG_INFINITY, f64::max);
    let unstable_open = poles.iter().filter(|p| p.open.iter().any(|e| e.re > 0.0)).count();
    println!("points               {}", poles.len());
    println!("open_loop_unstable   {unstable_open}");
    println!("worst_closed_re      {worst_closed:.6}");

    if svg {
        let series = [
            Series {
                label: "open loop",
                color: "#d62728",
                points: pick(true),
                markers_only: true,
            },
            Series {
                label: "closed loop",
                color: "#1f77b4",
                points: pick(false),
                markers_only: true,
            },
        ];
        write_text(
            &out.join("poles.svg"),
            &chart("eigenvalues along the trajectory", "Re, 1/s", "Im, rad/s", &series),
        )?;
    }
    Ok(())
}

pub fn cmd_step(
    scenario_path: &Path,
    out: &Path,
    t_inject: f64,
    magnitude_deg: f64,
    axis: StepAxis,
    svg: bool,
) -> CliResult {
    let scenario = load_scenario(scenario_path)?;
    let hash = scenario.hash().map_err(runtime)?;
    let artifacts = load_or_build(&scenario, out)?;
    let response = step_response_experiment(
        &scenario,
        &artifacts.points,
        &artifacts.schedule,
        t_inject,
        magnitude_deg.to_radians(),
        axis,
    )
    .map_err(runtime)?;

    let mut table = Table::new(&["t", "linear", "nonlinear"]);
    let rows = response.linear_trace.len().max(response.nonlinear_trace.len());
    for i in 0..rows {
        let t = i as f64 * scenario.dt_gnc;
        let lin = response.linear_trace.get(i).map_or(f64::NAN, |p| p.1);
        let non = response.nonlinear_trace.get(i).map_or(f64::NAN, |p| p.1);
        table.push(vec![t, lin, non]);
    }
    let mut comments = provenance_comments("step response", &hash);
    comments.push(format!("t_inject: {t_inject}"));
    comments.push(format!("magnitude_deg: {magnitude_deg}"));
    write_text(&out.join("step.csv"), &table_to_csv(&table, &comments))?;

    for (name, m) in [("linear", response.linear), ("nonlinear", response.nonlinear)] {
        println!(
            "{name:9} rise_s {:.3}  settle_s {:.3}  overshoot_pct {:.2}",
            m.rise_time_s, m.settling_time_s, m.overshoot_pct
        );
    }

    if svg {
        let series = [
            Series {
                label: "linear",
                color: "#1f77b4",
                points: response.linear_trace.clone(),
                markers_only: false,
            },
            Series {
                label: "nonlinear",
                color: "#d62728",
                points: response.nonlinear_trace.clone(),
                markers_only: false,
            },
        ];
        write_text(
            &out.join("step.svg"),
            &chart(
                &format!("{magnitude_deg} deg reference step at t = {t_inject} s"),
                "time since step, s",
                "attitude response, rad",
                &series,
            ),
        )?;
    }
    Ok(())
}

pub fn cmd_sweep(
    scenario_path: &Path,
    out: &Path,
    parameter: &str,
    factors: &[f64],
    svg: bool,
) -> CliResult {
    if factors.is_empty() {
        return Err(usage(anyhow!("--factors needs at least one value")));
    }
    let scenario = load_scenario(scenario_path)?;
    let hash = scenario.hash().map_err(runtime)?;
    let artifacts = load_or_build(&scenario, out)?;
    let rows = robustness_sweep(
        &scenario,
        &artifacts.schedule,
        &artifacts.feedforward,
        parameter,
        factors,
    )
    .map_err(|e| match e {
        tvc::Error::Config(_) => usage(e),
        other => runtime(other),
    })?;

    let table = sweep_to_table(&rows);
    let mut comments = provenance_comments("robustness sweep", &hash);
    comments.push(format!("parameter: {parameter}"));
    write_text(&out.join("sweep.csv"), &table_to_csv(&table, &comments))?;

    println!("factor   stable   sum_sq_pitch_deg2   rms_mu_p_deg");
    for r in &rows {
        match &r.metrics {
            Some(m) => println!(
                "{:<8.3} {:<8} {:<19.4} {:<12.4}",
                r.factor, r.stable, m.sum_sq_pitch_error_deg2, m.rms_mu_p_deg
            ),
            None => println!("{:<8.3} {:<8} -", r.factor, r.stable),
        }
    }

    if svg {
        let tracking: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.metrics.map(|m| (r.factor, m.sum_sq_pitch_error_deg2)))
            .collect();
        let effort: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.metrics.map(|m| (r.factor, m.rms_mu_p_deg)))
            .collect();
        let series = [
            Series {
                label: "sum sq pitch err, deg^2",
                color: "#1f77b4",
                points: tracking,
                markers_only: false,
            },
            Series {
                label: "rms mu_p, deg",
                color: "#d62728",
                points: effort,
                markers_only: false,
            },
        ];
        write_text(
            &out.join("sweep.svg"),
            &chart(
                &format!("{parameter} robustness sweep"),
                "scale factor",
                "metric value",
                &series,
            ),
        )?;
    }
    Ok(())
}

/// Rebuilds operating points from an existing feedforward-producing run.
/// Exposed for parity checks in tests; the commands above go through
/// `load_or_build`.
#[allow(dead_code)]
pub fn rebuild_points(scenario: &ScenarioConfig) -> CliResult<Vec<OperatingPoint>> {
    let (_, samples, _) = generate_feedforward(scenario).map_err(runtime)?;
    extract_operating_points(&scenario.vehicle, &samples, &ExtractOptions::default())
        .map_err(runtime)
}
