//! `bvis`: reproducible visibility experiments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bvis_core::capacity::CapacityConfig;
use bvis_core::excursions::{ExcursionConfig, MeasureMethod};
use bvis_core::experiments::{
    run_experiment, write_records, CapacityExperiment, CoveringExperiment,
    ExcursionMeasureExperiment, ExperimentConfig, InterlacementExperiment, MeasureTarget,
    OutputFormat, PhaseDiagramExperiment, ShadowPppExperiment, Shape,
};
use bvis_core::interlacements::{EpsRule, VisibilityConfig};
use bvis_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

const RECORD_HELP: &str = "\
Records (ndjson, one object per line): experiment, config (full echo, re-parseable),
seed, metric, point (coordinates such as r or theta), estimate, pessimistic
(estimate with UNRESOLVED outcomes counted against the event, when applicable),
uncertainty {method: binomial-wilson|bootstrap|standard-error|rank-interval|exact,
std_err, ci_low, ci_high}, n, test (statistical test result, when applicable),
warning, version.

Table format columns: experiment, metric, point (k=v;k=v), estimate, pessimistic,
method, std_err, ci_low, ci_high, n, seed, version, warning.

Angles are in radians and probabilities in [0, 1]. Output depends only on the
config and the seed, never on --workers.";

#[derive(Parser, Debug)]
#[command(name = "bvis", version, about = "Visibility experiments for Brownian interlacements and excursions", after_help = RECORD_HELP)]
struct Cli {
    /// Master seed; every replica draws from a substream of it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; affects wall-clock time only.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    workers: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Ndjson)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Ndjson,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Newtonian capacity of a ball or capsule by walk-on-spheres.
    Capacity(CapacityArgs),
    /// Directional visibility f(r) against e^{-α·cap}.
    InterlacementF(InterlacementArgs),
    /// Omnidirectional visibility P_vis(r) and the log-ratio exponent.
    InterlacementPvis(InterlacementArgs),
    /// Excursion measure of long shadows or of a ball.
    ExcursionMeasure(MeasureArgs),
    /// Structure tests of the shadow Poisson process.
    ShadowPpp(ShadowArgs),
    /// Shepp classification and simulated covering for l_n = c/n.
    Covering(CoveringArgs),
    /// Survival of visibility to infinity across levels and truncations.
    PhaseDiagram(PhaseArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeArg {
    Ball,
    Capsule,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, value_enum, default_value_t = ShapeArg::Ball)]
    shape: ShapeArg,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Axis length of a capsule.
    #[arg(long, default_value_t = 0.0)]
    length: f64,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    /// Launch radius over the circumradius.
    #[arg(long, default_value_t = 5.0)]
    launch_factor: f64,
    /// Kill radius over the launch radius.
    #[arg(long, default_value_t = 2.0e4)]
    kill_factor: f64,
}

#[derive(Args, Debug)]
struct InterlacementArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Comma-separated distances.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    r: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    n_reps: u64,
    /// Constant direction resolution ε; ε(r) = 1/r when absent.
    #[arg(long)]
    eps: Option<f64>,
    /// Samples for each capacity reference value.
    #[arg(long, default_value_t = 100_000)]
    n_capacity: u64,
    #[arg(long, default_value_t = 2000)]
    n_boot: u64,
    #[arg(long, default_value_t = 2_000_000)]
    max_directions: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Halfplane,
    Paths,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Shadow length threshold.
    #[arg(
        long,
        conflicts_with = "ball_radius",
        required_unless_present = "ball_radius"
    )]
    theta: Option<f64>,
    /// Radius of a centred ball target instead of a shadow threshold.
    #[arg(long)]
    ball_radius: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Halfplane)]
    method: MethodArg,
}

#[derive(Args, Debug)]
struct ShadowArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    theta_min: f64,
    #[arg(long, default_value_t = 100)]
    replicas: u64,
    #[arg(long, default_value_t = 0.01)]
    level: f64,
    /// Comma-separated ranks for the order-statistic table.
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    ranks: Vec<usize>,
}

#[derive(Args, Debug)]
struct CoveringArgs {
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, value_delimiter = ',', default_value = "10000,100000")]
    n_arcs: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    replicas: u64,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.4,0.785,1.2")]
    alphas: Vec<f64>,
    #[arg(long = "theta-min", value_delimiter = ',', default_value = "0.001")]
    theta_min: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    replicas: u64,
}

fn interlacement(a: &InterlacementArgs, seed: u64) -> InterlacementExperiment {
    InterlacementExperiment {
        visibility: VisibilityConfig {
            d: a.d,
            alpha: a.alpha,
            rho: a.rho,
            r_values: a.r.clone(),
            n_reps: a.n_reps,
            eps_rule: a
                .eps
                .map_or(EpsRule::InverseR, |eps| EpsRule::Constant { eps }),
            seed,
            max_directions: a.max_directions,
            ..VisibilityConfig::default()
        },
        capacity: CapacityConfig {
            n: a.n_capacity,
            launch_factor: 1.1,
            ..CapacityConfig::default()
        },
        n_boot: a.n_boot,
    }
}

fn build(cmd: &Command, seed: u64) -> ExperimentConfig {
    match cmd {
        Command::Capacity(a) => ExperimentConfig::Capacity(CapacityExperiment {
            d: a.d,
            shape: match a.shape {
                ShapeArg::Ball => Shape::Ball,
                ShapeArg::Capsule => Shape::Capsule,
            },
            radius: a.radius,
            length: a.length,
            mc: CapacityConfig {
                n: a.n,
                launch_factor: a.launch_factor,
                kill_factor: a.kill_factor,
                ..CapacityConfig::default()
            },
        }),
        Command::InterlacementF(a) => ExperimentConfig::InterlacementF(interlacement(a, seed)),
        Command::InterlacementPvis(a) => {
            ExperimentConfig::InterlacementPvis(interlacement(a, seed))
        }
        Command::ExcursionMeasure(a) => {
            ExperimentConfig::ExcursionMeasure(ExcursionMeasureExperiment {
                target: match (a.theta, a.ball_radius) {
                    (_, Some(radius)) => MeasureTarget::Ball { radius },
                    (theta, None) => MeasureTarget::Shadow {
                        theta: theta.unwrap_or(std::f64::consts::PI),
                        method: match a.method {
                            MethodArg::Halfplane => MeasureMethod::Halfplane,
                            MethodArg::Paths => MeasureMethod::Paths,
                        },
                    },
                },
                eps: a.eps,
                n: a.n,
                excursion: ExcursionConfig::default(),
            })
        }
        Command::ShadowPpp(a) => ExperimentConfig::ShadowPpp(ShadowPppExperiment {
            alpha: a.alpha,
            theta_min: a.theta_min,
            replicas: a.replicas,
            level: a.level,
            ranks: a.ranks.clone(),
        }),
        Command::Covering(a) => ExperimentConfig::Covering(CoveringExperiment {
            c: a.c,
            n_arcs: a.n_arcs.clone(),
            replicas: a.replicas,
        }),
        Command::PhaseDiagram(a) => ExperimentConfig::PhaseDiagram(PhaseDiagramExperiment {
            alphas: a.alphas.clone(),
            theta_mins: a.theta_min.clone(),
            replicas: a.replicas,
        }),
    }
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    eprintln!("\nFor more information, try '--help'.");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = build(&cli.command, cli.seed);
    if let Err(e) = cfg.validate() {
        return usage_error(e);
    }
    let started = Instant::now();
    let out = match run_experiment(&cfg, cli.seed, cli.workers as usize) {
        Ok(out) => out,
        Err(e @ Error::InvalidParameter { .. }) | Err(e @ Error::UnsupportedDimension { .. }) => {
            return usage_error(e)
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let format = match cli.format {
        Format::Ndjson => OutputFormat::Ndjson,
        Format::Table => OutputFormat::Table,
    };
    let written = match &cli.out {
        Some(path) => File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
            .and_then(|f| write_records(&out.records, format, BufWriter::new(f))),
        None => write_records(&out.records, format, io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    for e in &out.errors {
        eprintln!("error: {e}");
    }
    let _ = writeln!(
        io::stderr(),
        "{}: {} records, seed {}, {} workers, {:.2}s",
        cfg.id(),
        out.records.len(),
        cli.seed,
        cli.workers,
        started.elapsed().as_secs_f64()
    );
    if out.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
