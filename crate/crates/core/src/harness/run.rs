use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use super::config::{ExperimentConfig, ModelKind};
use super::learner::{BaselineClassifier, BaselineFlavor, EnsembleLearner, EvalSet, Example, Learner};
use crate::data::{generate_synthetic, read_dataset, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::metrics::{
    accuracy, aggregate, emit_run, fmt6, per_class_accuracy, Aggregate, EvalPoint, RunRecord,
    RunSummary,
};
use crate::metrics::write_json;
use crate::rng::{stream, Stream};
use crate::schedule::{ClassPools, Schedule};

/// Records of every run plus their aggregate.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<RunSummary>,
    pub aggregate: Aggregate,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<EmbeddingDataset> {
    match (&cfg.data.path, &cfg.data.synthetic) {
        (Some(path), _) => read_dataset(path),
        (None, Some(spec)) => generate_synthetic(spec),
        (None, None) => Err(Error::Config("no data source configured".into())),
    }
}

/// Builds a fresh model for one run.
pub fn build_learner(cfg: &ExperimentConfig, d: usize, m: usize, seed: u64) -> Result<Box<dyn Learner>> {
    let hp = cfg.model.hyperparams(d, m, seed);
    Ok(match cfg.model.kind {
        ModelKind::Ensemble => Box::new(EnsembleLearner::new(hp)?),
        ModelKind::Tanh => Box::new(BaselineClassifier::new(BaselineFlavor::Tanh, &hp)?),
        ModelKind::Vanilla => Box::new(BaselineClassifier::new(BaselineFlavor::Vanilla, &hp)?),
    })
}

/// Batches after which the model is evaluated: every `eval_every` batches,
/// each task boundary and the final batch.
pub fn eval_grid(schedule: &Schedule, eval_every: usize) -> BTreeSet<usize> {
    let total = schedule.total_batches();
    let mut grid: BTreeSet<usize> = (eval_every - 1..total).step_by(eval_every).collect();
    grid.extend(schedule.task_boundaries());
    grid.insert(total - 1);
    grid
}

/// Enforces the single-pass constraint.
pub fn check_online(cfg: &ExperimentConfig, ds: &EmbeddingDataset) -> Result<()> {
    let consumed = cfg.schedule.batches * cfg.schedule.batch_size;
    if consumed > ds.train.len() {
        let msg = format!(
            "{} batches of {} consume {consumed} examples, more than the {} in the training split",
            cfg.schedule.batches,
            cfg.schedule.batch_size,
            ds.train.len()
        );
        if cfg.allow_multi_epoch {
            warn!("{msg}");
        } else {
            return Err(Error::Config(format!(
                "{msg}; set allow_multi_epoch to permit more than one epoch"
            )));
        }
    }
    Ok(())
}

/// Test indices whose raw outputs are dumped: classes in turn, first examples first.
fn probe_indices(eval: &EvalSet, m: usize, count: usize) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &l) in eval.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut out = Vec::with_capacity(count);
    let mut depth = 0;
    while out.len() < count && out.len() < eval.len() {
        for class in &by_class {
            if let Some(&i) = class.get(depth) {
                if out.len() < count {
                    out.push(i);
                }
            }
        }
        depth += 1;
    }
    out
}

/// A single training run. Returns the record and, when probes are requested,
/// the activation dump as CSV text.
pub fn run_single(
    cfg: &ExperimentConfig,
    ds: &EmbeddingDataset,
    eval: &EvalSet,
    run_index: usize,
) -> Result<(RunRecord, Option<String>)> {
    let seed = cfg.run_seed(run_index);
    let kind = cfg.schedule.schedule_kind()?;
    let m = ds.m;
    let schedule = Schedule::new(kind, m, cfg.schedule.batches, cfg.schedule.batch_size, seed)?;
    let pools = ClassPools::from_labels(ds.train.labels().iter().map(|&l| usize::from(l)), m);
    let grid = eval_grid(&schedule, cfg.eval_every);
    let mut learner = build_learner(cfg, ds.d, m, seed)?;
    learner.prepare_eval(eval)?;
    let probes = probe_indices(eval, m, cfg.probe_count);
    let mut dump = (!probes.is_empty()).then(|| {
        let mut s = String::from("t,probe,label");
        for c in 0..m {
            let _ = write!(s, ",y{c}");
        }
        s.push('\n');
        s
    });

    let mut rng = stream(seed, Stream::Sampling);
    let mut record = RunRecord {
        model: learner.name().to_string(),
        seed,
        config_hash: cfg.config_hash(),
        m,
        eval_points: Vec::with_capacity(grid.len()),
    };
    let mut batch: Vec<Example> = Vec::with_capacity(schedule.batch_size());
    for b in 0..schedule.total_batches() {
        let indices = schedule.sample_batch(b, &pools, &mut rng)?;
        batch.clear();
        batch.extend(
            indices
                .iter()
                .map(|&i| (ds.train.vector_f64(i), ds.train.label(i))),
        );
        learner.train_batch(&batch).map_err(|e| e.at_batch(b))?;
        if grid.contains(&b) {
            let preds = learner.predict(eval).map_err(|e| e.at_batch(b))?;
            record.eval_points.push(EvalPoint {
                batch: b,
                overall: accuracy(&preds, eval.labels())?,
                per_class: per_class_accuracy(&preds, eval.labels(), m)?,
            });
            if let Some(text) = dump.as_mut() {
                for &p in &probes {
                    let y = learner.outputs(eval.vector(p)).map_err(|e| e.at_batch(b))?;
                    let _ = write!(text, "{b},{p},{}", eval.labels()[p]);
                    for v in y {
                        text.push(',');
                        text.push_str(&fmt6(v));
                    }
                    text.push('\n');
                }
            }
        }
    }
    Ok((record, dump))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    run_experiment_on(cfg, &ds)
}

/// Runs every seed of `cfg` on an already loaded dataset and, if `cfg.out`
/// is set, writes per-run CSV/JSON, the aggregate summary and the resolved config.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &EmbeddingDataset) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    ds.validate(true)?;
    check_online(cfg, ds)?;
    let eval = EvalSet::from_split(&ds.test, ds.d);
    let out = cfg.out.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        // The output location is left out so identical runs produce identical files.
        let resolved = dir.join("config.toml");
        let portable = ExperimentConfig {
            out: None,
            ..cfg.clone()
        };
        fs::write(&resolved, portable.to_toml_string()?).map_err(|e| Error::io(&resolved, e))?;
    }
    let mut records = Vec::with_capacity(cfg.runs);
    let mut summaries = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let (record, dump) = run_single(cfg, ds, &eval, run)?;
        let summary = match out {
            Some(dir) => {
                let stem = run_stem(dir, run);
                if let Some(text) = dump {
                    let p = dir.join(format!("run_{run:03}_activations.csv"));
                    fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                }
                emit_run(&record, &stem)?
            }
            None => RunSummary::from_record(&record)?,
        };
        info!(
            "{} run {run} (seed {}): final accuracy {}, forgetting {}",
            record.model,
            record.seed,
            fmt6(summary.final_accuracy),
            fmt6(summary.forgetting)
        );
        records.push(record);
        summaries.push(summary);
    }
    let aggregate = aggregate(&summaries)?;
    if let Some(dir) = out {
        write_json(&dir.join("summary.json"), &aggregate)?;
    }
    Ok(ExperimentOutcome {
        records,
        summaries,
        aggregate,
    })
}

fn run_stem(dir: &Path, run: usize) -> PathBuf {
    dir.join(format!("run_{run:03}"))
}
