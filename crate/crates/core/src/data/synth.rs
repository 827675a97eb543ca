use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DatasetMeta, EmbeddingDataset, Split};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Gaussian class clusters around centers on a sphere.
///
/// `cluster_spread` is the root-mean-square norm of the within-class noise,
/// i.e. each component has standard deviation `cluster_spread / sqrt(d)`. With
/// `center_norm = 1` it reads directly as noise-to-signal ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub d: usize,
    pub m: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub cluster_spread: f64,
    pub center_norm: f64,
    /// Fraction of classes whose center is pulled towards the previous class's center.
    pub overlap: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            d: 64,
            m: 10,
            train_per_class: 1000,
            test_per_class: 100,
            cluster_spread: 0.3,
            center_norm: 1.0,
            overlap: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::Config("synthetic d and m must be positive".into()));
        }
        if self.m > usize::from(u16::MAX) + 1 {
            return Err(Error::Config(format!("{} classes exceed the label range", self.m)));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config(
                "synthetic datasets need at least one train and one test record per class".into(),
            ));
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return Err(Error::Config(format!(
                "cluster_spread must be positive, got {}",
                self.cluster_spread
            )));
        }
        if !(self.center_norm > 0.0 && self.center_norm.is_finite()) {
            return Err(Error::Config(format!(
                "center_norm must be positive, got {}",
                self.center_norm
            )));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap must lie in [0, 1], got {}", self.overlap)));
        }
        Ok(())
    }
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Class centers, row-major `m x d`.
pub(crate) fn class_centers<R: Rng + ?Sized>(rng: &mut R, spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    let correlated = (spec.overlap * spec.m as f64).round() as usize;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let mut dir = unit_direction(rng, spec.d);
        if i > 0 && i <= correlated {
            let prev = &centers[i - 1];
            let norm_prev = spec.center_norm;
            for (x, p) in dir.iter_mut().zip(prev) {
                *x += p / norm_prev;
            }
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|x| *x /= n);
        }
        centers.push(dir.into_iter().map(|x| x * spec.center_norm).collect());
    }
    centers
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<EmbeddingDataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Synthetic);
    let centers = class_centers(&mut rng, spec);
    let sigma = spec.cluster_spread / (spec.d as f64).sqrt();
    let mut draw_split = |per_class: usize| {
        let mut split = Split::with_capacity(spec.d, per_class * spec.m);
        let mut v = vec![0f32; spec.d];
        for (c, mu) in centers.iter().enumerate() {
            for _ in 0..per_class {
                loop {
                    for (x, &mu_j) in v.iter_mut().zip(mu) {
                        let noise: f64 = rng.sample(StandardNormal);
                        *x = (mu_j + sigma * noise) as f32;
                    }
                    if v.iter().any(|&x| x != 0.0) {
                        break;
                    }
                }
                split.push(&v, c as u16);
            }
        }
        split
    };
    let train = draw_split(spec.train_per_class);
    let test = draw_split(spec.test_per_class);
    Ok(EmbeddingDataset {
        d: spec.d,
        m: spec.m,
        train,
        test,
        meta: DatasetMeta {
            source: "synthetic".into(),
            params: serde_json::to_value(spec)?,
            class_names: (0..spec.m).map(|c| format!("class_{c}")).collect(),
        },
    })
}
