use std::cmp::Ordering;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::classifier::TClassifier;
use super::hyper::Hyperparams;
use super::optim::SparseGrad;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::vecops::{argmax, dot, norm};

/// `|sum of selected similarities|` below this makes the weighted average undefined.
pub const DEGENERATE_SUM_TOLERANCE: f64 = 1e-9;

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "cosine similarity of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Input("cosine similarity with a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `-(y . y_hat)` for a one-hot target `y`.
pub fn loss(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Input(format!(
            "target has {} classes, output has {}",
            y.len(),
            y_hat.len()
        )));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    let zeros = y.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || ones + zeros != y.len() {
        return Err(Error::Input("target is not one-hot".into()));
    }
    let class = y.iter().position(|&v| v == 1.0).unwrap_or(0);
    Ok(-y_hat[class])
}

#[inline]
pub fn loss_for_class(y_hat: &[f64], class: usize) -> f64 {
    -y_hat[class]
}

/// The classifiers chosen for one embedding, best match first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub similarities: Vec<f64>,
}

impl Selection {
    /// Aggregation coefficients `gamma_i / sum(gamma)`.
    pub fn coefficients(&self) -> Result<Vec<f64>> {
        let sum: f64 = self.similarities.iter().sum();
        if !sum.is_finite() || sum.abs() < DEGENERATE_SUM_TOLERANCE {
            return Err(Error::DegenerateAggregation { sum, batch: None });
        }
        Ok(self.similarities.iter().map(|g| g / sum).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    pub y_hat: Vec<f64>,
    pub selected: Selection,
}

/// Argmax over the aggregated output, lowest class index on ties.
pub fn predict_from_output(y_hat: &[f64]) -> usize {
    argmax(y_hat)
}

/// Fixed random keys paired with trainable t-classifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMemory {
    d: usize,
    m: usize,
    keys: Vec<f64>,
    key_norms: Vec<f64>,
    classifiers: Vec<TClassifier>,
}

impl EnsembleMemory {
    /// Keys from the standard normal, classifier weights from the truncated-normal initializer.
    ///
    /// Keys and weights come from separate streams of `hp.seed`.
    pub fn new(hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        let mut key_rng = stream(hp.seed, Stream::Keys);
        let mut weight_rng = stream(hp.seed, Stream::Weights);
        let keys: Vec<f64> = (0..hp.n * hp.d)
            .map(|_| key_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let classifiers = (0..hp.n)
            .map(|_| TClassifier::init(&mut weight_rng, hp.m, hp.d, hp.init_scale))
            .collect();
        Self::from_parts(hp.d, hp.m, keys, classifiers)
    }

    pub fn from_parts(
        d: usize,
        m: usize,
        keys: Vec<f64>,
        classifiers: Vec<TClassifier>,
    ) -> Result<Self> {
        let n = classifiers.len();
        if n == 0 || keys.len() != n * d {
            return Err(Error::Config(format!(
                "{} key components for {n} classifiers of dimension {d}",
                keys.len()
            )));
        }
        if classifiers.iter().any(|c| c.classes() != m || c.dim() != d) {
            return Err(Error::Config("classifier shape mismatch".into()));
        }
        let key_norms: Vec<f64> = keys.chunks_exact(d).map(norm).collect();
        if key_norms.iter().any(|&k| k == 0.0) {
            return Err(Error::Config("zero key".into()));
        }
        Ok(Self {
            d,
            m,
            keys,
            key_norms,
            classifiers,
        })
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> usize {
        self.m
    }

    pub fn keys(&self) -> &[f64] {
        &self.keys
    }

    pub fn key(&self, i: usize) -> &[f64] {
        &self.keys[i * self.d..(i + 1) * self.d]
    }

    pub fn classifiers(&self) -> &[TClassifier] {
        &self.classifiers
    }

    pub(crate) fn classifiers_mut(&mut self) -> &mut [TClassifier] {
        &mut self.classifiers
    }

    fn check_query(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.d {
            return Err(Error::Config(format!(
                "embedding has length {}, memory expects {}",
                z.len(),
                self.d
            )));
        }
        let zn = norm(z);
        if zn == 0.0 || !zn.is_finite() {
            return Err(Error::Input(
                "embedding must be finite and nonzero for key lookup".into(),
            ));
        }
        Ok(zn)
    }

    /// The `k` keys most similar to `z`, by non-increasing cosine similarity.
    /// Equal similarities keep the lower key index first.
    pub fn top_k_select(&self, z: &[f64], k: usize) -> Result<Selection> {
        if k == 0 || k > self.len() {
            return Err(Error::Config(format!(
                "cannot select {k} of {} classifiers",
                self.len()
            )));
        }
        let zn = self.check_query(z)?;
        let mut scored: Vec<(usize, f64)> = self
            .keys
            .chunks_exact(self.d)
            .zip(&self.key_norms)
            .map(|(key, kn)| dot(key, z) / (kn * zn))
            .enumerate()
            .collect();
        let rank = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
            b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(rank);
        Ok(Selection {
            indices: scored.iter().map(|s| s.0).collect(),
            similarities: scored.iter().map(|s| s.1.clamp(-1.0, 1.0)).collect(),
        })
    }

    /// Similarity-weighted average of the selected classifiers' outputs.
    pub fn forward_selected(&self, z: &[f64], sel: &Selection, tau: f64) -> Result<Vec<f64>> {
        if z.len() != self.d {
            return Err(Error::Config(format!(
                "embedding has length {}, memory expects {}",
                z.len(),
                self.d
            )));
        }
        let alpha = sel.coefficients()?;
        let mut y_hat = vec![0.0; self.m];
        let mut v = Vec::with_capacity(self.m);
        for (&i, &a) in sel.indices.iter().zip(&alpha) {
            self.classifiers[i].forward_into(z, tau, &mut v);
            for (acc, vi) in y_hat.iter_mut().zip(&v) {
                *acc += a * vi;
            }
        }
        Ok(y_hat)
    }

    pub fn forward(&self, z: &[f64], hp: &Hyperparams) -> Result<ModelOutput> {
        let selected = self.top_k_select(z, hp.k)?;
        let y_hat = self.forward_selected(z, &selected, hp.tau)?;
        Ok(ModelOutput { y_hat, selected })
    }

    pub fn predict(&self, z: &[f64], hp: &Hyperparams) -> Result<usize> {
        Ok(argmax(&self.forward(z, hp)?.y_hat))
    }

    /// Analytic gradient of `-y_hat[class]` for one example.
    pub fn grad(&self, z: &[f64], class: usize, hp: &Hyperparams) -> Result<SparseGrad> {
        let sel = self.top_k_select(z, hp.k)?;
        let mut g = SparseGrad::new(self.d);
        self.accumulate_grad(z, class, &sel, hp.tau, &mut g)?;
        Ok(g)
    }

    /// Adds one example's gradient to `acc`.
    ///
    /// Only row `class` of each selected classifier is touched:
    /// `dL/dW_j[class] = -alpha_j * sech^2(psi_j / tau) * z`, and the same
    /// without `z` for the bias.
    pub fn accumulate_grad(
        &self,
        z: &[f64],
        class: usize,
        sel: &Selection,
        tau: f64,
        acc: &mut SparseGrad,
    ) -> Result<()> {
        if class >= self.m {
            return Err(Error::Input(format!(
                "label {class} out of range for {} classes",
                self.m
            )));
        }
        if z.len() != self.d {
            return Err(Error::Config(format!(
                "embedding has length {}, memory expects {}",
                z.len(),
                self.d
            )));
        }
        let alpha = sel.coefficients()?;
        for (&j, &a) in sel.indices.iter().zip(&alpha) {
            let slope = self.classifiers[j].activation_slope(class, z, tau);
            acc.add_row(j, class, -a * slope, z);
        }
        Ok(())
    }
}
