use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind};
use super::run::run_experiment_on;
use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::metrics::{fmt6, Stat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationAxis {
    EnsembleSize(Vec<usize>),
    K(Vec<usize>),
}

impl AblationAxis {
    pub fn name(&self) -> &'static str {
        match self {
            AblationAxis::EnsembleSize(_) => "ensemble-size",
            AblationAxis::K(_) => "k",
        }
    }

    pub fn values(&self) -> &[usize] {
        match self {
            AblationAxis::EnsembleSize(v) | AblationAxis::K(v) => v,
        }
    }

    /// `ensemble-size` or `k`, with the values to sweep.
    pub fn parse(name: &str, values: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("ablation needs at least one value".into()));
        }
        match name {
            "ensemble-size" | "n" => Ok(AblationAxis::EnsembleSize(values)),
            "k" => Ok(AblationAxis::K(values)),
            _ => Err(Error::Config(format!(
                "unknown ablation axis {name:?}; expected ensemble-size or k"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: usize,
    /// 1 for the best mean final accuracy.
    pub rank: usize,
    pub final_accuracy: Stat,
    pub forgetting: Stat,
}

/// Runs the full experiment once per value on `axis`. Rows keep the sweep
/// order; `rank` orders them by mean final accuracy.
pub fn ablation_sweep(
    cfg: &ExperimentConfig,
    ds: &EmbeddingDataset,
    axis: &AblationAxis,
) -> Result<Vec<AblationRow>> {
    if cfg.model.kind != ModelKind::Ensemble {
        return Err(Error::Config("ablations apply to the ensemble model".into()));
    }
    let mut rows = Vec::with_capacity(axis.values().len());
    for &value in axis.values() {
        let mut point = cfg.clone();
        match axis {
            AblationAxis::EnsembleSize(_) => {
                point.model.ensemble_size = value;
                point.model.k = point.model.k.min(value);
            }
            AblationAxis::K(_) => point.model.k = value,
        }
        point.out = cfg
            .out
            .as_ref()
            .map(|dir| dir.join(format!("{}_{value}", axis.name())));
        let outcome = run_experiment_on(&point, ds)?;
        let acc: Vec<f64> = outcome.summaries.iter().map(|s| s.final_accuracy).collect();
        let fgt: Vec<f64> = outcome.summaries.iter().map(|s| s.forgetting).collect();
        rows.push(AblationRow {
            value,
            rank: 0,
            final_accuracy: Stat::of(&acc),
            forgetting: Stat::of(&fgt),
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[b]
            .final_accuracy
            .mean
            .total_cmp(&rows[a].final_accuracy.mean)
            .then(a.cmp(&b))
    });
    for (rank, i) in order.into_iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(rows)
}

pub fn format_ablation_table(axis: &AblationAxis, rows: &[AblationRow]) -> String {
    let mut out = format!(
        "{:>14} {:>5} {:>22} {:>22}\n",
        axis.name(),
        "rank",
        "final accuracy",
        "forgetting"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>14} {:>5} {:>22} {:>22}",
            r.value,
            r.rank,
            format!("{} ± {}", fmt6(r.final_accuracy.mean), fmt6(r.final_accuracy.std)),
            format!("{} ± {}", fmt6(r.forgetting.mean), fmt6(r.forgetting.std)),
        );
    }
    out
}
