//! Class-sampling schedules for task-free training streams.
//!
//! A [`Schedule`] maps each batch index to a probability distribution over
//! classes. Split schedules present disjoint label subsets one after another;
//! the incremental schedule is a split with one label per subset; the
//! Gaussian schedule lets every class rise and fall along a bell curve so
//! there are no boundaries at all; `Iid` is the stationary control.

use std::fmt::Write as _;
use std::ops::Range;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub const DEFAULT_GAUSSIAN_HEIGHT: f64 = 1.0;
pub const DEFAULT_GAUSSIAN_WIDTH: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleKind {
    Split {
        tasks: usize,
    },
    Incremental,
    Gaussian {
        #[serde(default = "default_height")]
        height: f64,
        #[serde(default = "default_width")]
        width: f64,
        /// Batches between consecutive class peaks; `total_batches / m` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing: Option<f64>,
    },
    Iid,
}

fn default_height() -> f64 {
    DEFAULT_GAUSSIAN_HEIGHT
}

fn default_width() -> f64 {
    DEFAULT_GAUSSIAN_WIDTH
}

impl ScheduleKind {
    pub fn gaussian() -> Self {
        ScheduleKind::Gaussian {
            height: DEFAULT_GAUSSIAN_HEIGHT,
            width: DEFAULT_GAUSSIAN_WIDTH,
            spacing: None,
        }
    }

    /// Parses the short names used on the command line: `split<N>`, `incremental`, `gaussian`, `iid`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "incremental" => Ok(ScheduleKind::Incremental),
            "gaussian" => Ok(Self::gaussian()),
            "iid" => Ok(ScheduleKind::Iid),
            _ => {
                let tasks = s
                    .strip_prefix("split")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "unknown schedule {s:?}; expected split<N>, incremental, gaussian or iid"
                        ))
                    })?;
                Ok(ScheduleKind::Split { tasks })
            }
        }
    }
}

/// Per-batch class distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchSpec {
    pub batch_index: usize,
    pub class_probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    m: usize,
    total_batches: usize,
    batch_size: usize,
    class_order: Vec<usize>,
}

impl Schedule {
    /// Builds a schedule whose class order is a fresh permutation drawn from `seed`.
    pub fn new(
        kind: ScheduleKind,
        m: usize,
        total_batches: usize,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut stream(seed, Stream::ClassOrder));
        Self::with_class_order(kind, total_batches, batch_size, order)
    }

    pub fn with_class_order(
        kind: ScheduleKind,
        total_batches: usize,
        batch_size: usize,
        class_order: Vec<usize>,
    ) -> Result<Self> {
        let m = class_order.len();
        if m == 0 {
            return Err(Error::Config("schedule needs at least one class".into()));
        }
        let mut seen = vec![false; m];
        for &c in &class_order {
            if c >= m || std::mem::replace(&mut seen[c], true) {
                return Err(Error::Config(format!(
                    "class order {class_order:?} is not a permutation of 0..{m}"
                )));
            }
        }
        if total_batches == 0 || batch_size == 0 {
            return Err(Error::Config(
                "schedule needs at least one batch of at least one example".into(),
            ));
        }
        match &kind {
            ScheduleKind::Split { tasks } => {
                let s = *tasks;
                if s == 0 || m % s != 0 {
                    return Err(Error::Config(format!(
                        "{m} classes cannot be split into {s} equal subsets"
                    )));
                }
                if total_batches % s != 0 {
                    return Err(Error::Config(format!(
                        "{total_batches} batches cannot be divided evenly over {s} tasks"
                    )));
                }
            }
            ScheduleKind::Incremental => {
                if total_batches % m != 0 {
                    return Err(Error::Config(format!(
                        "{total_batches} batches cannot be divided evenly over {m} classes"
                    )));
                }
            }
            ScheduleKind::Gaussian {
                height,
                width,
                spacing,
            } => {
                if !(*height > 0.0 && height.is_finite()) || !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::Config(format!(
                        "gaussian height and width must be positive (h={height}, w={width})"
                    )));
                }
                if let Some(sp) = spacing {
                    if !(*sp >= 0.0 && sp.is_finite()) {
                        return Err(Error::Config(format!("gaussian spacing {sp} is invalid")));
                    }
                }
            }
            ScheduleKind::Iid => {}
        }
        Ok(Self {
            kind,
            m,
            total_batches,
            batch_size,
            class_order,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn classes(&self) -> usize {
        self.m
    }

    pub fn total_batches(&self) -> usize {
        self.total_batches
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn class_order(&self) -> &[usize] {
        &self.class_order
    }

    pub fn total_examples(&self) -> usize {
        self.total_batches * self.batch_size
    }

    /// Number of label subsets for split-style schedules; 1 otherwise.
    pub fn task_count(&self) -> usize {
        match self.kind {
            ScheduleKind::Split { tasks } => tasks,
            ScheduleKind::Incremental => self.m,
            _ => 1,
        }
    }

    fn is_split(&self) -> bool {
        matches!(
            self.kind,
            ScheduleKind::Split { .. } | ScheduleKind::Incremental
        )
    }

    /// Contiguous batch ranges, one per task. Continuous schedules have a single range.
    pub fn task_ranges(&self) -> Vec<Range<usize>> {
        let s = self.task_count();
        let len = self.total_batches / s;
        (0..s).map(|t| t * len..(t + 1) * len).collect()
    }

    /// Labels presented during task `t` of a split schedule; all labels otherwise.
    pub fn task_classes(&self, t: usize) -> &[usize] {
        if self.is_split() {
            let per = self.m / self.task_count();
            &self.class_order[t * per..(t + 1) * per]
        } else {
            &self.class_order
        }
    }

    /// Last batch index of each task.
    pub fn task_boundaries(&self) -> Vec<usize> {
        self.task_ranges().iter().map(|r| r.end - 1).collect()
    }

    /// Peak location (in batches) of the class at `position` in the class order.
    pub fn gaussian_center(&self, position: usize) -> f64 {
        let spacing = match self.kind {
            ScheduleKind::Gaussian {
                spacing: Some(sp), ..
            } => sp,
            _ => self.total_batches as f64 / self.m as f64,
        };
        position as f64 * spacing
    }

    /// Unnormalised Gaussian weight `h * exp(-(B - c)^2 / (2 w^2))` of the class at `position`.
    pub fn gaussian_weight(&self, batch: usize, position: usize) -> f64 {
        let (h, w) = match self.kind {
            ScheduleKind::Gaussian { height, width, .. } => (height, width),
            _ => (DEFAULT_GAUSSIAN_HEIGHT, DEFAULT_GAUSSIAN_WIDTH),
        };
        let delta = batch as f64 - self.gaussian_center(position);
        h * (-(delta * delta) / (2.0 * w * w)).exp()
    }

    pub fn class_distribution(&self, batch: usize) -> Result<Vec<f64>> {
        if batch >= self.total_batches {
            return Err(Error::Input(format!(
                "batch {batch} outside schedule of {} batches",
                self.total_batches
            )));
        }
        let mut p = vec![0.0; self.m];
        match self.kind {
            ScheduleKind::Split { .. } | ScheduleKind::Incremental => {
                let len = self.total_batches / self.task_count();
                let active = self.task_classes(batch / len);
                let share = 1.0 / active.len() as f64;
                for &c in active {
                    p[c] = share;
                }
            }
            ScheduleKind::Gaussian { .. } => {
                for (pos, &c) in self.class_order.iter().enumerate() {
                    p[c] = self.gaussian_weight(batch, pos);
                }
                let total: f64 = p.iter().sum();
                if !(total > 0.0) {
                    // Every weight underflowed: far from all peaks. Fall back to the nearest one.
                    let nearest = (0..self.m)
                        .min_by(|&a, &b| {
                            let da = (batch as f64 - self.gaussian_center(a)).abs();
                            let db = (batch as f64 - self.gaussian_center(b)).abs();
                            da.total_cmp(&db)
                        })
                        .unwrap_or(0);
                    p[self.class_order[nearest]] = 1.0;
                } else {
                    for x in &mut p {
                        *x /= total;
                    }
                }
            }
            ScheduleKind::Iid => p.fill(1.0 / self.m as f64),
        }
        Ok(p)
    }

    pub fn batch_spec(&self, batch: usize) -> Result<BatchSpec> {
        Ok(BatchSpec {
            batch_index: batch,
            class_probs: self.class_distribution(batch)?,
        })
    }

    /// Draws `batch_size` training indices: class from the batch's distribution,
    /// then an example uniformly with replacement from that class's pool.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        batch: usize,
        pools: &ClassPools,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        let probs = self.class_distribution(batch)?;
        if pools.classes() < self.m {
            return Err(Error::Dataset(format!(
                "dataset has {} classes, schedule needs {}",
                pools.classes(),
                self.m
            )));
        }
        for (c, &p) in probs.iter().enumerate() {
            if p > 0.0 && pools.pool(c).is_empty() {
                return Err(Error::Dataset(format!(
                    "class {c} has no training examples but is scheduled at batch {batch}"
                )));
            }
        }
        let classes = WeightedIndex::new(&probs)
            .map_err(|e| Error::Config(format!("bad class distribution at batch {batch}: {e}")))?;
        Ok((0..self.batch_size)
            .map(|_| {
                let pool = pools.pool(classes.sample(rng));
                pool[rng.random_range(0..pool.len())]
            })
            .collect())
    }

    /// Human-readable summary with per-task batch ranges.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let name = match &self.kind {
            ScheduleKind::Split { tasks } => format!("split into {tasks} tasks"),
            ScheduleKind::Incremental => format!("fully incremental ({} tasks)", self.m),
            ScheduleKind::Gaussian { height, width, .. } => {
                format!("gaussian (height {height}, width {width})")
            }
            ScheduleKind::Iid => "iid".to_string(),
        };
        let _ = writeln!(
            out,
            "{name}: {} batches of {} over {} classes",
            self.total_batches, self.batch_size, self.m
        );
        for (t, r) in self.task_ranges().iter().enumerate() {
            let _ = write!(
                out,
                "  task {t}: batches {}..{} ({} batches)",
                r.start,
                r.end,
                r.len()
            );
            if self.is_split() {
                let _ = write!(out, " classes {:?}", self.task_classes(t));
            }
            if let ScheduleKind::Gaussian { .. } = self.kind {
                let peaks: Vec<String> = self
                    .class_order
                    .iter()
                    .enumerate()
                    .map(|(pos, c)| format!("{c}@{}", self.gaussian_center(pos)))
                    .collect();
                let _ = write!(out, " peaks {}", peaks.join(" "));
            }
            out.push('\n');
        }
        out
    }
}

/// Training-split indices grouped by label.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassPools {
    pools: Vec<Vec<usize>>,
}

impl ClassPools {
    pub fn from_labels(labels: impl IntoIterator<Item = usize>, m: usize) -> Self {
        let mut pools = vec![Vec::new(); m];
        for (i, l) in labels.into_iter().enumerate() {
            if l < m {
                pools[l].push(i);
            }
        }
        Self { pools }
    }

    pub fn classes(&self) -> usize {
        self.pools.len()
    }

    pub fn pool(&self, class: usize) -> &[usize] {
        &self.pools[class]
    }
}
