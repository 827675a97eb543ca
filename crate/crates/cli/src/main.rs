use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ensmem::data::{read_dataset_with, write_dataset, generate_synthetic, ReadOptions, SyntheticSpec};
use ensmem::harness::{
    ablation_sweep, format_ablation_table, load_dataset, run_experiment_on, AblationAxis,
    ExperimentConfig, ModelConfig, ModelKind,
};
use ensmem::metrics::{aggregate, fmt6, load_run_summaries, Aggregate};
use ensmem::schedule::{Schedule, ScheduleKind};
use ensmem::Error;

/// Continual learning with an ensemble of t-classifiers over frozen embeddings.
#[derive(Parser, Debug)]
#[command(name = "ensmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic clustered embedding dataset.
    Synth(SynthArgs),
    /// Train and evaluate a model over one or more seeds.
    Run(RunArgs),
    /// Print a dataset's header and per-class counts.
    Inspect {
        /// Dataset file.
        path: PathBuf,
    },
    /// Summarise the runs in a run directory.
    Report {
        /// Directory holding run_*.json files.
        dir: PathBuf,
    },
    /// Sweep ensemble size or k and tabulate final accuracy.
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output dataset path; the sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 1000)]
    train_per_class: usize,
    #[arg(long, default_value_t = 100)]
    test_per_class: usize,
    /// RMS norm of the within-class noise.
    #[arg(long, default_value_t = 0.3)]
    spread: f64,
    #[arg(long, default_value_t = 1.0)]
    center_norm: f64,
    /// Fraction of classes whose center leans towards the previous one.
    #[arg(long, default_value_t = 0.0)]
    overlap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: <out-root>/<model>-<config hash>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "ENSMEM_OUT", default_value = "runs", hide_env_values = true)]
    out_root: PathBuf,
    /// EMC1 dataset; synthetic data is generated when neither this nor the config names one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds to run.
    #[arg(long)]
    runs: Option<usize>,
    /// split<N>, incremental, gaussian or iid.
    #[arg(long)]
    schedule: Option<String>,
    /// ensemble, tanh or vanilla.
    #[arg(long)]
    model: Option<String>,
    /// Number of classifiers in the ensemble.
    #[arg(long)]
    ensemble_size: Option<usize>,
    /// Classifiers selected per input.
    #[arg(long)]
    k: Option<usize>,
    /// Output scale of the tanh activation.
    #[arg(long)]
    tau: Option<f64>,
    /// Step size of the sign optimizer.
    #[arg(long)]
    lr: Option<f64>,
    /// Weight decay per step.
    #[arg(long)]
    decay: Option<f64>,
    /// Batches between evaluations on the test split.
    #[arg(long)]
    eval_every: Option<usize>,
    /// Total training batches.
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Test examples whose raw outputs are dumped at each evaluation.
    #[arg(long)]
    probes: Option<usize>,
    /// Allow more batches than one pass over the training split.
    #[arg(long)]
    allow_multi_epoch: bool,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// ensemble-size or k.
    #[arg(long)]
    axis: String,
    /// Comma-separated values to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    #[command(flatten)]
    run: RunArgs,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Input(_) | Error::Dataset(_) | Error::Format { .. } | Error::Json(_) => 3,
        Error::DegenerateAggregation { .. } | Error::NonFinite { .. } => 4,
        Error::Io { .. } => 1,
    }
}

/// Config file values, then flags.
fn resolve_config(args: &RunArgs) -> ensmem::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(model) = &args.model {
        let kind = ModelKind::parse(model)?;
        if kind != cfg.model.kind {
            let old = std::mem::replace(&mut cfg.model, ModelConfig::new(kind));
            cfg.model.tau = old.tau;
            cfg.model.lr = old.lr;
            cfg.model.decay = old.decay;
            cfg.model.decay_biases = old.decay_biases;
            cfg.model.ensemble_size = old.ensemble_size;
            cfg.model.k = old.k;
        }
    }
    if let Some(path) = &args.data {
        cfg.data.path = Some(path.clone());
        cfg.data.synthetic = None;
    }
    if let Some(s) = &args.schedule {
        cfg.schedule.set_kind(&ScheduleKind::parse(s)?);
    }
    let m = &mut cfg.model;
    m.ensemble_size = args.ensemble_size.unwrap_or(m.ensemble_size);
    m.k = args.k.unwrap_or(m.k);
    m.tau = args.tau.unwrap_or(m.tau);
    m.lr = args.lr.unwrap_or(m.lr);
    m.decay = args.decay.unwrap_or(m.decay);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.runs = args.runs.unwrap_or(cfg.runs);
    cfg.eval_every = args.eval_every.unwrap_or(cfg.eval_every);
    cfg.schedule.batches = args.batches.unwrap_or(cfg.schedule.batches);
    cfg.schedule.batch_size = args.batch_size.unwrap_or(cfg.schedule.batch_size);
    cfg.probe_count = args.probes.unwrap_or(cfg.probe_count);
    cfg.allow_multi_epoch |= args.allow_multi_epoch;
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_aggregate(a: &Aggregate) {
    println!("{:<10} {:>5} {:>24} {:>24}", "model", "runs", "final accuracy", "forgetting");
    println!(
        "{:<10} {:>5} {:>24} {:>24}",
        a.model,
        a.runs,
        format!("{} ± {}", fmt6(a.final_accuracy.mean), fmt6(a.final_accuracy.std)),
        format!("{} ± {}", fmt6(a.forgetting.mean), fmt6(a.forgetting.std)),
    );
    println!("config {}", a.config_hash);
}

fn cmd_synth(a: &SynthArgs) -> ensmem::Result<()> {
    let spec = SyntheticSpec {
        d: a.dim,
        m: a.classes,
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
        cluster_spread: a.spread,
        center_norm: a.center_norm,
        overlap: a.overlap,
        seed: a.seed,
    };
    let ds = generate_synthetic(&spec)?;
    write_dataset(&ds, &a.out)?;
    println!(
        "wrote {} (d={}, m={}, {} train, {} test)",
        a.out.display(),
        ds.d,
        ds.m,
        ds.train.len(),
        ds.test.len()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> ensmem::Result<()> {
    let mut cfg = resolve_config(args)?;
    if cfg.out.is_none() {
        let name = format!("{}-{}", cfg.model.kind.name(), cfg.config_hash());
        cfg.out = Some(args.out_root.join(name));
    }
    let ds = load_dataset(&cfg)?;
    let schedule = Schedule::new(
        cfg.schedule.schedule_kind()?,
        ds.m,
        cfg.schedule.batches,
        cfg.schedule.batch_size,
        cfg.seed,
    )?;
    log::info!("{}", schedule.describe());
    let outcome = run_experiment_on(&cfg, &ds)?;
    print_aggregate(&outcome.aggregate);
    if let Some(out) = &cfg.out {
        println!("artifacts in {}", out.display());
    }
    Ok(())
}

fn cmd_inspect(path: &Path) -> ensmem::Result<()> {
    let ds = read_dataset_with(
        path,
        ReadOptions {
            require_all_classes: false,
            load_meta: true,
        },
    )?;
    println!("d: {}", ds.d);
    println!("m: {}", ds.m);
    println!("train: {}", ds.train.len());
    println!("test: {}", ds.test.len());
    println!("source: {}", if ds.meta.source.is_empty() { "-" } else { &ds.meta.source });
    println!("{:>6} {:>8} {:>8}  name", "class", "train", "test");
    let train = ds.train.class_counts(ds.m);
    let test = ds.test.class_counts(ds.m);
    for c in 0..ds.m {
        let name = ds.meta.class_names.get(c).map(String::as_str).unwrap_or("");
        println!("{c:>6} {:>8} {:>8}  {name}", train[c], test[c]);
    }
    for msg in ds.missing_classes() {
        eprintln!("warning: {msg}");
    }
    Ok(())
}

fn cmd_report(dir: &Path) -> ensmem::Result<()> {
    let summaries = load_run_summaries(dir)?;
    if summaries.is_empty() {
        return Err(Error::Input(format!("no run_*.json files in {}", dir.display())));
    }
    print_aggregate(&aggregate(&summaries)?);
    Ok(())
}

fn cmd_ablate(a: &AblateArgs) -> ensmem::Result<()> {
    let axis = AblationAxis::parse(&a.axis, a.values.clone())?;
    let mut cfg = resolve_config(&a.run)?;
    if cfg.out.is_none() {
        let name = format!("{}-{}", cfg.model.kind.name(), cfg.config_hash());
        cfg.out = Some(a.run.out_root.join(name));
    }
    let ds = load_dataset(&cfg)?;
    let rows = ablation_sweep(&cfg, &ds, &axis)?;
    print!("{}", format_ablation_table(&axis, &rows));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Inspect { path } => cmd_inspect(path),
        Command::Report { dir } => cmd_report(dir),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
