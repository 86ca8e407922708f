use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use secrecy_isac::config::{ScenarioConfig, SweepAxis};
use secrecy_isac::experiment::{
    self, angle_grid, emit_beampattern, emit_convergence, run_sweep, solve_trial, SweepSpec,
};
use secrecy_isac::metrics::Constraint;
use secrecy_isac::{Error, SolverReport};

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "secrecy-isac",
    version,
    about = "Secure ISAC beamforming and artificial-noise design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON scenario file; defaults to the reference scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Trials per sweep point; overrides `sweep.trials`.
    #[arg(long, global = true)]
    trials: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and write its convergence trace or full report.
    Solve,
    /// Monte Carlo sweep along the config's `sweep` axis.
    Sweep,
    /// Solve one instance and write its transmit beam pattern.
    Beampattern {
        #[arg(long, default_value_t = 0.5)]
        step_deg: f64,
    },
    /// Sweep the angular uncertainty with the robust design enabled.
    RobustSweep,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Infeasible(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Json(_)
            | Error::AngleOutOfRange { .. }
            | Error::IndexOutOfRange { .. }
            | Error::Domain(_) => Failure::Config(e.to_string()),
            Error::Singular { .. } => Failure::Infeasible(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    Ok(match path {
        Some(p) => ScenarioConfig::from_path(p)?,
        None => ScenarioConfig::default(),
    })
}

fn create(out_dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

/// Hard constraints that the design must meet for a solve to count as feasible.
const HARD: [Constraint; 6] = [
    Constraint::A,
    Constraint::B,
    Constraint::C,
    Constraint::F,
    Constraint::G,
    Constraint::Lmi,
];

fn violated(report: &SolverReport) -> Vec<&'static str> {
    HARD.iter()
        .filter(|&&c| !report.residuals.satisfied(c))
        .map(|c| c.label())
        .collect()
}

fn solve(cli: &Cli, cfg: &ScenarioConfig) -> Result<(), Failure> {
    let (_, report) = solve_trial(cfg, cli.seed)?;
    let path = match cli.format {
        Format::Json => {
            let (path, mut w) = create(&cli.out_dir, "report.json")?;
            serde_json::to_writer_pretty(&mut w, &report).map_err(Error::from)?;
            w.flush()?;
            path
        }
        Format::Csv => {
            let (path, w) = create(&cli.out_dir, "convergence.csv")?;
            experiment::write_convergence_csv(&emit_convergence(&report), w)?;
            path
        }
    };
    println!(
        "sum secrecy rate {:.6} bit/s/Hz, objective {:.6}, {} iterations, converged {}",
        report.final_metrics.sum_secrecy_rate,
        report.objective(),
        report.iterations,
        report.converged
    );
    println!("wrote {}", path.display());
    let bad = violated(&report);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Infeasible(format!(
            "constraints violated: {}",
            bad.join(", ")
        )))
    }
}

fn write_sweep(cli: &Cli, spec: &SweepSpec, stem: &str) -> Result<(), Failure> {
    let result = run_sweep(spec, cli.seed)?;
    let path = match cli.format {
        Format::Json => {
            let (path, mut w) = create(&cli.out_dir, &format!("{stem}.json"))?;
            serde_json::to_writer_pretty(&mut w, &result).map_err(Error::from)?;
            w.flush()?;
            path
        }
        Format::Csv => {
            let (path, w) = create(&cli.out_dir, &format!("{stem}.csv"))?;
            experiment::write_sweep_csv(&result, w)?;
            path
        }
    };
    for p in &result.points {
        println!(
            "{} = {}: mean secrecy {:.4} ± {:.4} ({} of {} trials failed)",
            result.axis.name(),
            p.value,
            p.mean_secrecy,
            p.stderr_secrecy,
            p.failed,
            p.trials
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn beampattern(cli: &Cli, cfg: &ScenarioConfig, step_deg: f64) -> Result<(), Failure> {
    let grid = angle_grid(step_deg)?;
    let (scenario, report) = solve_trial(cfg, cli.seed)?;
    let rows = emit_beampattern(&report.final_state, &scenario.geometry, &grid)?;
    let path = match cli.format {
        Format::Json => {
            let (path, mut w) = create(&cli.out_dir, "beampattern.json")?;
            let value = serde_json::json!({
                "schema_version": experiment::CSV_SCHEMA_VERSION,
                "target_angles_deg": scenario.targets.angles_deg,
                "angle_deg": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
                "gain": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
            });
            serde_json::to_writer_pretty(&mut w, &value).map_err(Error::from)?;
            w.flush()?;
            path
        }
        Format::Csv => {
            let (path, w) = create(&cli.out_dir, "beampattern.csv")?;
            experiment::write_beampattern_csv(&rows, w)?;
            path
        }
    };
    println!("target angles {:?}", scenario.targets.angles_deg);
    println!("wrote {} ({} angles)", path.display(), rows.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Solve => solve(cli, &cfg),
        Command::Sweep => write_sweep(cli, &SweepSpec::from_config(&cfg, cli.trials)?, "sweep"),
        Command::Beampattern { step_deg } => beampattern(cli, &cfg, *step_deg),
        Command::RobustSweep => {
            let mut base = cfg.clone();
            base.robust.enabled = true;
            let values = if cfg.sweep.axis == SweepAxis::DeltaTheta {
                cfg.sweep.values.clone()
            } else {
                vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
            };
            let spec = SweepSpec {
                axis: SweepAxis::DeltaTheta,
                values,
                trials_per_point: cli.trials.unwrap_or(cfg.sweep.trials),
                base,
            };
            spec.validate()?;
            write_sweep(cli, &spec, "robust_sweep")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible scenario: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
