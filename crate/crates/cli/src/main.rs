use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use toptrack::io::{self, RunSummary};
use toptrack::{Mode, Scenario, TerminalStatus};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "toptrack", version, about = "Robust time-optimal path tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute controllable sets and write sets.csv.
    Solve(Common),
    /// Simulate one controller and write its telemetry and summary.
    Simulate(Common),
    /// Run every configured controller from the same initial state.
    Compare(Common),
    /// Write sets for R = 0 and the configured R plus the nominal profile.
    SetsPlotData(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file; defaults to the bundled two-link arm.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name (arm2, pendulum).
    #[arg(long)]
    scenario: Option<String>,
    /// Controller: topt, os or tt.
    #[arg(long)]
    mode: Option<Mode>,
    /// Robust radius R.
    #[arg(long)]
    radius: Option<f64>,
    /// Number of path stages N.
    #[arg(long)]
    stages: Option<usize>,
    /// Seed of the initial-error direction.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<Scenario> {
        let mut sc = match (&self.config, &self.scenario) {
            (Some(path), _) => Scenario::load(path).with_context(|| format!("loading {}", path.display()))?,
            (None, name) => Scenario::shipped(name.as_deref().unwrap_or("arm2"))?,
        };
        if let Some(r) = self.radius {
            sc.config.radius = r;
        }
        if let Some(n) = self.stages {
            sc.config.stages = n;
        }
        if let Some(seed) = self.seed {
            sc.config.seed = seed;
        }
        if let Some(out) = &self.out {
            sc.config.out = out.clone();
        }
        if let Some(mode) = self.mode {
            sc.config.modes = vec![mode];
        }
        sc.config.validate()?;
        Ok(sc)
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn exit_for(status: TerminalStatus) -> ExitCode {
    match status {
        TerminalStatus::Reached => ExitCode::SUCCESS,
        TerminalStatus::Infeasible | TerminalStatus::TimedOut => ExitCode::from(EXIT_INFEASIBLE),
        TerminalStatus::Diverged => ExitCode::from(EXIT_DIVERGED),
    }
}

fn solve(args: &Common) -> Result<ExitCode> {
    let sc = args.load()?;
    let report = sc.solve(sc.config.radius)?;
    io::write_sets_csv(create(&sc.config.out, "sets.csv")?, &report.sets, &sc.grid())?;
    println!("stages {}  radius {}", sc.config.stages, sc.config.radius);
    println!("coefficients {:.3} ms", report.coefficient_time.as_secs_f64() * 1e3);
    println!("recursion    {:.3} ms", report.recursion_time.as_secs_f64() * 1e3);
    match report.sets.first_empty {
        None => {
            let k0 = report.sets.get(0).expect("feasible");
            println!("feasible: K_0 = [{}, {}]", k0.lo, k0.hi);
            Ok(ExitCode::SUCCESS)
        }
        Some(stage) => {
            eprintln!("infeasible: controllable set empty at stage {stage}");
            Ok(ExitCode::from(EXIT_INFEASIBLE))
        }
    }
}

fn simulate(args: &Common) -> Result<ExitCode> {
    let sc = args.load()?;
    let mode = args.mode.unwrap_or(Mode::Topt);
    let sets = sc.sets(sc.config.radius)?;
    if let Some(stage) = sets.first_empty {
        eprintln!("infeasible: controllable set empty at stage {stage}");
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }
    let nominal = sc.nominal_profile()?;
    let result = sc.run(mode, &sets, &nominal, sc.config.seed)?;
    let summary = RunSummary::new(mode, &result);
    io::write_telemetry_csv(create(&sc.config.out, &format!("{mode}_telemetry.csv"))?, &result)?;
    io::write_summary_json(create(&sc.config.out, &format!("{mode}_summary.json"))?, &summary)?;
    println!(
        "{mode}: status {:?}  duration {:.4} s  max error {:.4} rad  infeasible samples {}",
        summary.status, summary.duration, summary.max_err_norm, summary.infeasible_count
    );
    Ok(exit_for(result.status))
}

fn compare(args: &Common) -> Result<ExitCode> {
    let sc = args.load()?;
    let sets = sc.sets(sc.config.radius)?;
    if let Some(stage) = sets.first_empty {
        eprintln!("infeasible: controllable set empty at stage {stage}");
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }
    let nominal = sc.nominal_profile()?;
    let rows = sc.compare(&sets, &nominal)?;
    let mut summaries = Vec::new();
    for row in &rows {
        let dir = sc.config.out.join(row.mode.name());
        io::write_telemetry_csv(create(&dir, "telemetry.csv")?, &row.result)?;
        let summary = RunSummary::new(row.mode, &row.result);
        io::write_summary_json(create(&dir, "summary.json")?, &summary)?;
        summaries.push(summary);
    }
    io::write_compare_csv(create(&sc.config.out, "compare.csv")?, &summaries, nominal.duration)?;
    println!("{:<10} {:>12} {:>12} {:>12}  status", "controller", "max err", "duration", "infeasible");
    for s in &summaries {
        println!("{:<10} {:>12.4} {:>12.4} {:>12}  {:?}", s.mode.name(), s.max_err_norm, s.duration, s.infeasible_count, s.status);
    }
    println!("{:<10} {:>12} {:>12.4}", "nominal", "", nominal.duration);
    Ok(ExitCode::SUCCESS)
}

fn sets_plot_data(args: &Common) -> Result<ExitCode> {
    let sc = args.load()?;
    let grid = sc.grid();
    let mut radii = vec![0.0, sc.config.radius];
    radii.dedup();
    let sets = radii.iter().map(|&r| Ok((r, sc.sets(r)?))).collect::<Result<Vec<_>>>()?;
    io::write_sets_plot_csv(create(&sc.config.out, "sets_plot.csv")?, &sets, &grid)?;
    io::write_profile_csv(create(&sc.config.out, "nominal_profile.csv")?, &sc.nominal_profile()?, &grid)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::SetsPlotData(a) => sets_plot_data(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
