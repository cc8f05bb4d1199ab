mod export;
mod pipeline;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use survey_core::oracle::ToleranceProfile;

use pipeline::{Overrides, RunError};

/// Minimum-time aerial survey planner.
///
/// Exit status: 0 audit pass, 2 spec error, 3 planner infeasible,
/// 4 internal error or audit failure.
#[derive(Parser, Debug)]
#[command(name = "survey", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for all artifacts (overrides output.out_dir)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Trajectory export rate in Hz, 1 to 1000 (overrides output.sample_rate_hz)
    #[arg(long, global = true)]
    sample_rate: Option<f64>,

    /// Skip quartic smoothing
    #[arg(long, global = true)]
    no_smooth: bool,

    /// Write the waypoint document only
    #[arg(long, global = true)]
    waypoints_only: bool,

    #[arg(long, global = true, value_enum, default_value_t = Profile::Default)]
    tolerance_profile: Profile,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan, smooth, audit and export a survey
    Plan { spec: PathBuf },
    /// Run the NLP and the bang-singular-bang baseline side by side
    Compare { spec: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Profile {
    /// 1e-8
    Strict,
    /// 1e-6
    Default,
}

impl From<Profile> for ToleranceProfile {
    fn from(p: Profile) -> Self {
        match p {
            Profile::Strict => ToleranceProfile::Strict,
            Profile::Default => ToleranceProfile::Default,
        }
    }
}

fn run(cli: Cli) -> Result<u8, RunError> {
    let overrides = Overrides {
        out_dir: cli.out_dir,
        sample_rate_hz: cli.sample_rate,
        no_smooth: cli.no_smooth,
        waypoints_only: cli.waypoints_only,
        profile: cli.tolerance_profile.into(),
    };
    match cli.command {
        Command::Plan { spec } => {
            let spec = pipeline::load(&spec, &overrides)?;
            let run = pipeline::run_plan(&spec, overrides.profile)?;
            let r = &run.report;
            if spec.mode.waypoints_only {
                println!("{} waypoints written to {}", r.waypoints, run.written[0].display());
                return Ok(0);
            }
            println!(
                "{} waypoints, {:?} mode, S={}, total time {:.3} s (warm start {:.3} s)",
                r.waypoints, r.planner.mode, r.planner.switching_points, r.planner.total_time_s, r.planner.warm_start_time_s
            );
            if let Some(b) = &r.baseline {
                println!("baseline {:.3} s ({:?} axis bound)", b.total_time_s, b.axis_bound);
            }
            println!(
                "audit {} ({:?} profile, worst violation {:.3e})",
                if r.pass { "pass" } else { "FAIL" },
                r.profile,
                r.audit.max_violation()
            );
            for p in &run.written {
                println!("  wrote {}", p.display());
            }
            Ok(if r.pass { 0 } else { 4 })
        }
        Command::Compare { spec } => {
            let spec = pipeline::load(&spec, &overrides)?;
            let report = pipeline::run_compare(&spec, overrides.profile)?;
            print!("{}", report.table());
            Ok(if report.complete { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
