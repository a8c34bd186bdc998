//! Command-line front end: `plan`, `decide`, `simulate`, `audit`, `baseline`.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 infeasible (or a failed
//! audit), 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::baseline::{run_schedule, PrimitiveSchedule};
use crate::decision::{decide, load_traffic, Decision, SharedPlan};
use crate::error::{Error, Result};
use crate::follower::{follow_maneuver, FollowerConfig};
use crate::lookup::{build_table, ManeuverTable};
use crate::planner::{audit_states, AuditReport, FleetTrajectory};
use crate::scenario::Scenario;
use crate::trace::{read_trace, write_plot_data, write_trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "platoon", version, about = "Multi-lane platoon reconfiguration planning and execution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the maneuver table for every pair of a scenario.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "maneuvers.json")]
        out: PathBuf,
        /// Directory for per-quantity CSVs of each pair's first maneuver.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Pick the first stored maneuver that avoids the surrounding traffic.
    Decide {
        #[arg(long)]
        table: PathBuf,
        /// Shared plans; no traffic when omitted.
        #[arg(long)]
        traffic: Option<PathBuf>,
        #[command(flatten)]
        pair: PairArg,
        #[arg(long)]
        dmin: Option<f64>,
    },
    /// Execute a stored maneuver with one path follower per vehicle.
    Simulate {
        #[arg(long)]
        table: PathBuf,
        #[command(flatten)]
        pair: PairArg,
        /// 1-based maneuver index; chosen with `--traffic` when omitted.
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        traffic: Option<PathBuf>,
        /// Follower settings come from here when given.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Follower rate in Hz, keeping the prediction time.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        dmin: Option<f64>,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Recompute every separation of a table or a trace.
    Audit {
        #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
        table: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Vehicle dimensions and obstacles for traces.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        dmin: Option<f64>,
    },
    /// Run the motion-primitive benchmark.
    Baseline {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct PairArg {
    /// Configuration pair as `initial:target` (names or ids).
    #[arg(long, value_parser = parse_pair)]
    pub pair: (String, String),
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once(':') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() && !b.contains(':') => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected initial:target, got {s:?}")),
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Numerical(_) | Error::Follower { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

pub fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Plan { scenario, out, plot_data } => cmd_plan(&scenario, &out, plot_data.as_deref()),
        Command::Decide { table, traffic, pair, dmin } => {
            let table = ManeuverTable::load(&table)?;
            let traffic = traffic.map(load_traffic).transpose()?.unwrap_or_default();
            cmd_decide(&table, &traffic, &pair.pair, dmin)
        }
        Command::Simulate { table, pair, index, traffic, scenario, rate, dmin, out, plot_data } => {
            let table = ManeuverTable::load(&table)?;
            let mut cfg = match &scenario {
                Some(p) => Scenario::load(p)?.follower,
                None => FollowerConfig::default(),
            };
            if let Some(hz) = rate {
                if !(hz > 0.0 && hz.is_finite()) {
                    return Err(Error::InvalidParams(format!("rate must be positive, got {hz}")));
                }
                cfg = cfg.at_rate(hz);
            }
            let traffic = traffic.map(load_traffic).transpose()?.unwrap_or_default();
            let traj = select(&table, &pair.pair, index, &traffic, dmin)?;
            let Some(traj) = traj else {
                println!("infeasible");
                return Ok(EXIT_INFEASIBLE);
            };
            cmd_simulate(traj, &cfg, dmin, &out, plot_data.as_deref())
        }
        Command::Audit { table, trace, scenario, dmin } => {
            let scenario = scenario.map(Scenario::load).transpose()?;
            match (table, trace) {
                (Some(t), _) => cmd_audit_table(&ManeuverTable::load(&t)?, dmin),
                (None, Some(t)) => cmd_audit_trace(&t, scenario.as_ref(), dmin),
                (None, None) => Err(Error::InvalidParams("give --table or --trace".into())),
            }
        }
        Command::Baseline { scenario, schedule, out, plot_data } => {
            cmd_baseline(&Scenario::load(&scenario)?, &PrimitiveSchedule::load(&schedule)?, &out, plot_data.as_deref())
        }
    }
}

pub fn cmd_plan(scenario: &Path, out: &Path, plot_data: Option<&Path>) -> Result<i32> {
    let sc = Scenario::load(scenario)?;
    let table = build_table(&sc.pair_requests()?, &sc.planner, &sc.build_options())?;
    table.save(out)?;
    let mut code = EXIT_OK;
    for e in &table.entries {
        let (a, b) = (&table.configs[&e.initial].names, &table.configs[&e.target].names);
        println!("{} -> {}: {} maneuvers", a.join("/"), b.join("/"), e.maneuvers.len());
        for w in &e.warnings {
            eprintln!("  warning: {w}");
        }
        if e.maneuvers.is_empty() {
            code = EXIT_INFEASIBLE;
        }
        if let (Some(dir), Some(m)) = (plot_data, e.maneuvers.first()) {
            let sub = dir.join(format!("{}_{}", a[0], b[0]));
            write_plot_data(&sub, m.trajectory.dt, &m.trajectory.vehicles)?;
        }
    }
    Ok(code)
}

fn select<'a>(
    table: &'a ManeuverTable,
    pair: &(String, String),
    index: Option<usize>,
    traffic: &[SharedPlan],
    dmin: Option<f64>,
) -> Result<Option<&'a FleetTrajectory>> {
    match index {
        Some(i) => {
            let fam = table.query(&pair.0, &pair.1)?;
            let e = fam
                .iter()
                .find(|e| e.index == i)
                .ok_or_else(|| Error::InvalidParams(format!("no maneuver with index {i} (family has {})", fam.len())))?;
            Ok(Some(&e.trajectory))
        }
        None => Ok(match decide(table, &pair.0, &pair.1, traffic, dmin)? {
            Decision::Selected { trajectory, .. } => Some(trajectory),
            Decision::Infeasible => None,
        }),
    }
}

pub fn cmd_decide(table: &ManeuverTable, traffic: &[SharedPlan], pair: &(String, String), dmin: Option<f64>) -> Result<i32> {
    match decide(table, &pair.0, &pair.1, traffic, dmin)? {
        Decision::Selected { index, rho, .. } => {
            println!("selected index {index} rho {rho}");
            Ok(EXIT_OK)
        }
        Decision::Infeasible => {
            println!("infeasible");
            Ok(EXIT_INFEASIBLE)
        }
    }
}

pub fn cmd_simulate(
    traj: &FleetTrajectory,
    cfg: &FollowerConfig,
    dmin: Option<f64>,
    out: &Path,
    plot_data: Option<&Path>,
) -> Result<i32> {
    let run = follow_maneuver(traj, cfg)?;
    write_trace(out, run.dt, &run.vehicles)?;
    if let Some(dir) = plot_data {
        write_plot_data(dir, run.dt, &run.vehicles)?;
    }
    let summary = run.summary(&traj.obstacles, dmin.unwrap_or(traj.d_min))?;
    print_json(&summary)?;
    Ok(EXIT_OK)
}

fn report(label: &str, r: &AuditReport) {
    let obstacle = if r.min_obstacle_distance.is_finite() { format!(" min obstacle {:.6}", r.min_obstacle_distance) } else { String::new() };
    println!(
        "{label}: {} (min vehicle {:.6}{obstacle}, {} violations)",
        if r.passed() { "PASS" } else { "FAIL" },
        r.min_vehicle_distance,
        r.violations.len()
    );
    for v in &r.violations {
        let what = if v.obstacle { "obstacle" } else { "vehicle" };
        println!("  t={} {what} pair {}-{} dist {:.6}", v.t, v.pair.0, v.pair.1, v.dist);
    }
}

pub fn cmd_audit_table(table: &ManeuverTable, dmin: Option<f64>) -> Result<i32> {
    let mut ok = true;
    for e in &table.entries {
        for m in &e.maneuvers {
            let r = m.trajectory.audit(dmin.unwrap_or(m.trajectory.d_min))?;
            ok &= r.passed();
            report(&format!("{} -> {} #{}", e.initial, e.target, m.index), &r);
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn cmd_audit_trace(path: &Path, scenario: Option<&Scenario>, dmin: Option<f64>) -> Result<i32> {
    let mut trace = read_trace(path)?;
    if let Some(sc) = scenario {
        for v in &mut trace.vehicles {
            if let Some(m) = sc.member(v.vehicle_id) {
                v.params = m.params;
            }
        }
    }
    let d_min = dmin
        .or(scenario.map(|s| s.planner.d_min))
        .ok_or_else(|| Error::InvalidParams("auditing a trace needs --dmin or --scenario".into()))?;
    let obstacles = scenario.map(|s| s.obstacles.clone()).unwrap_or_default();
    let r = audit_states(
        &trace.vehicles.iter().map(|v| (v.vehicle_id, v.params, v.states.as_slice())).collect::<Vec<_>>(),
        &obstacles,
        d_min,
    )?;
    report(&path.display().to_string(), &r);
    Ok(if r.passed() { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn cmd_baseline(sc: &Scenario, schedule: &PrimitiveSchedule, out: &Path, plot_data: Option<&Path>) -> Result<i32> {
    let run = run_schedule(schedule, &sc.fleet, &sc.road, &sc.baseline)?;
    write_trace(out, run.dt, &run.vehicles)?;
    if let Some(dir) = plot_data {
        write_plot_data(dir, run.dt, &run.vehicles)?;
    }
    report("baseline", &run.audit);
    Ok(EXIT_OK)
}
