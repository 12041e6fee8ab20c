use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cablesim_core::design::{optimize_from, random_starts};
use cablesim_core::io::{load_arrangement, parse_design_problem, render_design_result};
use cablesim_core::model::allocation::build_allocation_matrix;
use cablesim_core::scenario::{endurance, load_scenario, run, slice_csv, thrust_plot_csv, write_outputs};
use cablesim_core::wrench::{slice, thrust_profile, SliceKind, ThrustBounds};
use cablesim_core::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "sim", version, about = "Cable-suspended aerial platform toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write its traces.
    Run {
        scenario: PathBuf,
        /// Directory receiving traces and plot data.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Minimize the allocation condition number for a design problem.
    Design {
        problem: PathBuf,
        /// Override the seed from the problem file.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of random starts.
        #[arg(long)]
        starts: Option<usize>,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a slice of the admissible wrench set as CSV.
    Wrench {
        /// Arrangement file, or the preset `baseline`.
        arrangement: String,
        #[arg(long, value_enum, default_value_t = Kind::Force)]
        kind: Kind,
        #[arg(long, default_value_t = 200)]
        directions: usize,
        /// Lower thrust bound for every motor (defaults to 0).
        #[arg(long, allow_hyphen_values = true)]
        lower: Option<f64>,
        /// Upper thrust bound for every motor (defaults to each unit's max_thrust).
        #[arg(long)]
        upper: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Thrusts needed to hold the platform still along a scenario's manipulator trajectory.
    Profile {
        scenario: PathBuf,
        /// Averaging window for the continuous-thrust figure, seconds.
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flight time in minutes from battery and power figures.
    Endurance {
        #[arg(long)]
        cells: u32,
        #[arg(long)]
        cell_voltage: f64,
        /// Pack capacity, Ah.
        #[arg(long)]
        capacity: f64,
        #[arg(long)]
        bus_voltage: f64,
        /// Current draw, A.
        #[arg(long, allow_hyphen_values = true)]
        current: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// Forces reachable with zero net torque.
    Force,
    /// Torques reachable with zero net force.
    Torque,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let report = run(&sc)?;
            let files = write_outputs(&sc, &report, &out)?;
            let s = &report.summary;
            println!(
                "{}",
                json!({
                    "scenario": report.name,
                    "rows": report.rows.len(),
                    "final_yaw_error_deg": s.final_yaw_error.to_degrees(),
                    "final_yaw_rate_deg_s": s.final_yaw_rate.to_degrees(),
                    "max_thrust": s.max_thrust,
                    "saturation_count": s.saturation_count,
                    "energy_drift": s.energy_drift,
                    "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                })
            );
            Ok(())
        }
        Command::Design { problem, seed, starts, out } => {
            let text = std::fs::read_to_string(&problem).map_err(|e| Error::Io(format!("{}: {e}", problem.display())))?;
            let mut doc = parse_design_problem(&text)?;
            if let Some(n) = starts {
                doc.starts = n;
            }
            let base = problem.parent().unwrap_or_else(|| Path::new("."));
            let prob = doc.to_problem(base)?;
            let seed = seed.unwrap_or(doc.seed);
            let mut points = random_starts(prob.starts, seed);
            points.extend(doc.initial_alpha_deg.iter().map(|a| a.map(f64::to_radians)));
            let result = optimize_from(&prob, &points, seed)?;
            emit(&render_design_result(&result)?, out.as_deref())
        }
        Command::Wrench { arrangement, kind, directions, lower, upper, out } => {
            let arr = load_arrangement(&arrangement, Path::new("."))?;
            let defaults = ThrustBounds::from_arrangement(&arr);
            let bounds = ThrustBounds::new(
                lower.map_or(defaults.lower, |l| [l; 8]),
                upper.map_or(defaults.upper, |u| [u; 8]),
            )?;
            let kind = match kind {
                Kind::Force => SliceKind::ForceZeroTorque,
                Kind::Torque => SliceKind::TorqueZeroForce,
            };
            let s = slice(&build_allocation_matrix(&arr), &bounds, kind, directions)?;
            emit(&slice_csv(&s), out.as_deref())
        }
        Command::Profile { scenario, window, out } => {
            let sc = load_scenario(&scenario)?;
            let traj = sc
                .manipulator
                .as_ref()
                .ok_or_else(|| Error::Invalid("scenario has no manipulator trajectory".into()))?;
            let profile = thrust_profile(&sc.model, &sc.arrangement, traj, &sc.bounds, sc.dt)?;
            emit(&thrust_plot_csv(&profile.times, &profile.thrusts), out.as_deref())?;
            eprintln!(
                "{}",
                json!({
                    "scenario": sc.name,
                    "peak_thrust": profile.peak(),
                    "max_continuous_thrust": profile.max_continuous(window),
                    "window_s": window,
                    "saturation_count": profile.saturation_count(),
                })
            );
            Ok(())
        }
        Command::Endurance { cells, cell_voltage, capacity, bus_voltage, current } => {
            let minutes = endurance(cells, cell_voltage, capacity, bus_voltage, current)?;
            println!("{}", json!({ "minutes": minutes }));
            Ok(())
        }
    }
}

fn error_line(kind: &str, step: Option<usize>, message: &str) -> String {
    json!({ "error": kind, "step": step, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", error_line("UsageError", None, first));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), e.step(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
