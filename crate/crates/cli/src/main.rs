mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use config::{Grid, RunConfig, SynthSpec};

/// Piecewise-constant spectral graph filters from the command line.
///
/// Every command writes JSON/CSV artifacts into `--out` and exits nonzero
/// if an input is invalid or an internal check fails.
#[derive(Parser)]
#[command(name = "piecon", version)]
struct Cli {
    /// JSON run configuration (see run_config.schema.json); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated split seeds; one run per seed.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads for seeds and sweep cells.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Edge list file.
    #[arg(long, global = true)]
    edges: Option<PathBuf>,
    /// Feature CSV file.
    #[arg(long, global = true)]
    features: Option<PathBuf>,
    /// Label file.
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    /// Use the synthetic twin dataset with this many nodes.
    #[arg(long, global = true, value_name = "N")]
    synth: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    synth_seed: u64,
    #[arg(long, global = true, default_value_t = 0.05)]
    synth_noise: f64,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    num_intervals: Option<usize>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    poly_degree: Option<usize>,
    #[arg(long, global = true)]
    hidden_dim: Option<usize>,
    #[arg(long, global = true)]
    model_seed: Option<u64>,
    /// Any model field, e.g. `--set activation=identity`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    assignments: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigendecomposition of the normalized adjacency and ν(0) report.
    Spectrum {
        /// Also write eigenvectors.csv.
        #[arg(long)]
        vectors: bool,
        /// Tolerance for counting eigenvalue 0.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Eigengap boundaries for `num_intervals` intervals.
    Partition,
    /// Writes the sparsified signed constant filters.
    Filters,
    /// Trains one model per seed and saves checkpoints.
    Train,
    /// Accuracy of a saved checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split seed; defaults to the first of `--seeds`.
        #[arg(long)]
        split_seed: Option<u64>,
    },
    /// Component ablation table over all seeds.
    Ablate,
    /// Mean test accuracy over a window × num_intervals grid.
    Sweep {
        /// Window grid, e.g. `5..=100:5`.
        #[arg(long)]
        windows: Option<Grid>,
        /// Interval grid, e.g. `0..=20`.
        #[arg(long)]
        intervals: Option<Grid>,
    },
    /// Randomized checks of the polynomial lower bounds.
    Theory {
        /// Degree for a single jump instance (with --gap and --h).
        #[arg(long, requires_all = ["gap", "h"])]
        d: Option<usize>,
        #[arg(long, requires_all = ["d", "h"])]
        gap: Option<f64>,
        #[arg(long, requires_all = ["d", "gap"])]
        h: Option<f64>,
        #[arg(long, default_value_t = 100)]
        jump_instances: usize,
        #[arg(long, default_value_t = 50)]
        dense_instances: usize,
        #[arg(long, default_value_t = 500)]
        markov_instances: usize,
        #[arg(long, default_value_t = 8)]
        max_degree: usize,
    },
    /// Writes a synthetic twin dataset as edges/features/labels files.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Filter and epoch timings for constant versus polynomial banks.
    Bench {
        #[arg(long, default_value = "2000")]
        nodes: Grid,
        #[arg(long, default_value = "10,20,40")]
        intervals: Grid,
        #[arg(long, default_value = "3,10")]
        degrees: Grid,
        #[arg(long, default_value_t = 7)]
        epochs: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
    },
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut run = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        run.out = out.clone();
    }
    if let Some(seeds) = &cli.seeds {
        run.seeds = seeds.clone();
    }
    if cli.threads.is_some() {
        run.threads = cli.threads;
    }
    let d = &cli.data;
    for (slot, value) in [(&mut run.edges, &d.edges), (&mut run.features, &d.features), (&mut run.labels, &d.labels)] {
        if value.is_some() {
            slot.clone_from(value);
        }
    }
    if let Some(n) = d.synth {
        run.synth = Some(SynthSpec {
            n,
            seed: d.synth_seed,
            noise: d.synth_noise,
        });
    }
    let m = &cli.model;
    let numeric = [
        ("epochs", m.epochs.map(|v| v as u64)),
        ("num_intervals", m.num_intervals.map(|v| v as u64)),
        ("window", m.window.map(|v| v as u64)),
        ("poly_degree", m.poly_degree.map(|v| v as u64)),
        ("hidden_dim", m.hidden_dim.map(|v| v as u64)),
        ("seed", m.model_seed),
    ];
    for (key, value) in numeric {
        if let Some(v) = value {
            run.set_value(key, Value::from(v))?;
        }
    }
    for a in &m.assignments {
        run.set(a)?;
    }
    if let Command::Sweep { windows, intervals } = &cli.command {
        if let Some(w) = windows {
            run.sweep_windows = w.0.clone();
        }
        if let Some(k) = intervals {
            run.sweep_intervals = k.0.clone();
        }
    }
    run.validate()?;
    Ok(run)
}

fn run(cli: Cli) -> Result<()> {
    let run = run_config(&cli)?;
    if let Some(t) = run.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Spectrum { vectors, tol } => commands::spectrum(&run, vectors, tol),
        Command::Partition => commands::partition(&run),
        Command::Filters => commands::filters(&run),
        Command::Train => commands::train(&run),
        Command::Eval { checkpoint, split_seed } => commands::eval(&run, &checkpoint, split_seed.unwrap_or(run.seeds[0])),
        Command::Ablate => commands::ablate(&run),
        Command::Sweep { .. } => commands::sweep(&run),
        Command::Theory {
            d,
            gap,
            h,
            jump_instances,
            dense_instances,
            markov_instances,
            max_degree,
        } => {
            let single = d.zip(gap).zip(h).map(|((d, gap), h)| (d, gap, h));
            let opts = piecon::theory::SuiteOptions {
                seed: run.seeds[0],
                jump_instances,
                dense_instances,
                markov_instances,
                max_degree,
                ..Default::default()
            };
            commands::theory(&run, single, &opts)
        }
        Command::Synth { n, seed, noise } => commands::synth(&run, n, seed, noise),
        Command::Bench {
            nodes,
            intervals,
            degrees,
            epochs,
            warmup,
        } => {
            let opts = piecon::bench::BenchOptions {
                nodes: nodes.0,
                intervals: intervals.0,
                degrees: degrees.0,
                epochs,
                warmup,
                seed: run.seeds[0],
                budget: run.model.budget,
                ..Default::default()
            };
            commands::bench(&run, &opts)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
