//! Accuracy, generalised forgetting, and run artifacts.
//!
//! Accuracy is always single-head: a prediction is over all `m` classes.
//! Generalised forgetting averages, over classes, the largest drop from any
//! evaluated point to the final one:
//! `(1/m) * sum_i max_t (a_t^i - a_n^i)`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Index of the last batch trained before this evaluation.
    pub batch: usize,
    pub overall: f64,
    pub per_class: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub m: usize,
    pub eval_points: Vec<EvalPoint>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        if self.eval_points.is_empty() {
            return Err(Error::Input("run record has no evaluation points".into()));
        }
        for (i, p) in self.eval_points.iter().enumerate() {
            if i > 0 && p.batch <= self.eval_points[i - 1].batch {
                return Err(Error::Input(format!(
                    "evaluation points not strictly increasing at batch {}",
                    p.batch
                )));
            }
            if p.per_class.len() != self.m {
                return Err(Error::Input(format!(
                    "evaluation at batch {} has {} per-class accuracies, expected {}",
                    p.batch,
                    p.per_class.len(),
                    self.m
                )));
            }
            let ok = |a: f64| (0.0..=1.0).contains(&a);
            if !ok(p.overall) || !p.per_class.iter().copied().all(ok) {
                return Err(Error::Input(format!(
                    "accuracy outside [0, 1] at batch {}",
                    p.batch
                )));
            }
        }
        Ok(())
    }

    pub fn final_point(&self) -> &EvalPoint {
        self.eval_points.last().expect("validated record")
    }

    pub fn final_accuracy(&self) -> f64 {
        self.final_point().overall
    }
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Input("accuracy of an empty set".into()));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Accuracy restricted to each true class. Every class must have at least one example.
pub fn per_class_accuracy(preds: &[usize], labels: &[usize], m: usize) -> Result<Vec<f64>> {
    if preds.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut hits = vec![0usize; m];
    let mut totals = vec![0usize; m];
    for (&p, &l) in preds.iter().zip(labels) {
        if l >= m {
            return Err(Error::Input(format!("label {l} out of range for {m} classes")));
        }
        totals[l] += 1;
        if p == l {
            hits[l] += 1;
        }
    }
    if let Some(c) = totals.iter().position(|&t| t == 0) {
        return Err(Error::Input(format!("class {c} has no evaluation examples")));
    }
    Ok(hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| h as f64 / t as f64)
        .collect())
}

/// `(1/m) * sum_i max_t (a_t^i - a_n^i)` over the recorded evaluation points.
pub fn generalised_forgetting(rec: &RunRecord) -> Result<f64> {
    rec.validate()?;
    let last = &rec.final_point().per_class;
    let mut total = 0.0;
    for (i, &a_n) in last.iter().enumerate() {
        let peak = rec
            .eval_points
            .iter()
            .map(|p| p.per_class[i])
            .fold(f64::NEG_INFINITY, f64::max);
        total += peak - a_n;
    }
    Ok(total / rec.m as f64)
}

/// Forgetting measured per task on the same evaluation grid: each task's
/// accuracy is the mean of its classes' accuracies, and tasks are weighted by
/// their share of the classes.
pub fn taskwise_forgetting(rec: &RunRecord, tasks: &[Vec<usize>]) -> Result<f64> {
    rec.validate()?;
    let covered: usize = tasks.iter().map(Vec::len).sum();
    if covered != rec.m || tasks.iter().any(Vec::is_empty) {
        return Err(Error::Input(format!(
            "task groups cover {covered} classes, record has {}",
            rec.m
        )));
    }
    let task_acc = |p: &EvalPoint, g: &[usize]| -> f64 {
        g.iter().map(|&c| p.per_class[c]).sum::<f64>() / g.len() as f64
    };
    let last = rec.final_point();
    let mut total = 0.0;
    for g in tasks {
        let a_n = task_acc(last, g);
        let peak = rec
            .eval_points
            .iter()
            .map(|p| task_acc(p, g))
            .fold(f64::NEG_INFINITY, f64::max);
        total += g.len() as f64 * (peak - a_n);
    }
    Ok(total / rec.m as f64)
}

/// `%g`-style formatting with six significant digits.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

/// Rounds to the value `fmt6` would print.
pub fn round6(x: f64) -> f64 {
    fmt6(x).parse().unwrap_or(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub batches: usize,
    pub final_accuracy: f64,
    pub forgetting: f64,
    pub final_per_class: Vec<f64>,
}

impl RunSummary {
    pub fn from_record(rec: &RunRecord) -> Result<Self> {
        let forgetting = generalised_forgetting(rec)?;
        let last = rec.final_point();
        Ok(Self {
            model: rec.model.clone(),
            seed: rec.seed,
            config_hash: rec.config_hash.clone(),
            batches: last.batch + 1,
            final_accuracy: round6(last.overall),
            forgetting: round6(forgetting),
            final_per_class: last.per_class.iter().map(|&a| round6(a)).collect(),
        })
    }
}

pub fn run_csv(rec: &RunRecord) -> String {
    let mut out = String::from("t,overall");
    for i in 0..rec.m {
        let _ = write!(out, ",a{i}");
    }
    out.push('\n');
    for p in &rec.eval_points {
        let _ = write!(out, "{},{}", p.batch, fmt6(p.overall));
        for a in &p.per_class {
            out.push(',');
            out.push_str(&fmt6(*a));
        }
        out.push('\n');
    }
    out
}

pub fn parse_run_csv(text: &str) -> Result<Vec<EvalPoint>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty run CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "t" || cols[1] != "overall" {
        return Err(Error::Input(format!("unexpected run CSV header {header:?}")));
    }
    let m = cols.len() - 2;
    let parse = |s: &str, line: usize| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Input(format!("line {line}: bad number {s:?}")))
    };
    let mut points = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != m + 2 {
            return Err(Error::Input(format!("line {}: expected {} fields", i + 2, m + 2)));
        }
        let batch = fields[0]
            .parse()
            .map_err(|_| Error::Input(format!("line {}: bad batch index", i + 2)))?;
        points.push(EvalPoint {
            batch,
            overall: parse(fields[1], i + 2)?,
            per_class: fields[2..]
                .iter()
                .map(|f| parse(f, i + 2))
                .collect::<Result<_>>()?,
        });
    }
    Ok(points)
}

/// Writes `<stem>.csv` (one row per evaluation) and `<stem>.json` (summary).
pub fn emit_run(rec: &RunRecord, stem: &Path) -> Result<RunSummary> {
    let summary = RunSummary::from_record(rec)?;
    let csv_path = stem.with_extension("csv");
    fs::write(&csv_path, run_csv(rec)).map_err(|e| Error::io(&csv_path, e))?;
    write_json(&stem.with_extension("json"), &summary)?;
    Ok(summary)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }

    fn rounded(self) -> Self {
        Self {
            mean: round6(self.mean),
            std: round6(self.std),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub config_hash: String,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub final_accuracy: Stat,
    pub forgetting: Stat,
}

/// Mean and standard deviation over runs that share one configuration.
pub fn aggregate(summaries: &[RunSummary]) -> Result<Aggregate> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Input("no runs to aggregate".into()))?;
    if let Some(other) = summaries.iter().find(|s| s.config_hash != first.config_hash) {
        return Err(Error::Input(format!(
            "runs come from different configurations ({} vs {})",
            first.config_hash, other.config_hash
        )));
    }
    let acc: Vec<f64> = summaries.iter().map(|s| s.final_accuracy).collect();
    let fgt: Vec<f64> = summaries.iter().map(|s| s.forgetting).collect();
    Ok(Aggregate {
        model: first.model.clone(),
        config_hash: first.config_hash.clone(),
        runs: summaries.len(),
        seeds: summaries.iter().map(|s| s.seed).collect(),
        final_accuracy: Stat::of(&acc).rounded(),
        forgetting: Stat::of(&fgt).rounded(),
    })
}

/// Loads every `run_*.json` summary in a run directory, sorted by file name.
pub fn load_run_summaries(dir: &Path) -> Result<Vec<RunSummary>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("run_"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}
