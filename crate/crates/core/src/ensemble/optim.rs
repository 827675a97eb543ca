use std::collections::BTreeMap;

use super::classifier::TClassifier;
use super::hyper::Hyperparams;
use super::memory::EnsembleMemory;
use crate::error::{Error, Result};

/// Gradient restricted to the (classifier, class) rows that received any signal.
///
/// Rows that are absent have an exactly zero gradient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGrad {
    d: usize,
    rows: BTreeMap<(usize, usize), (Vec<f64>, f64)>,
}

impl SparseGrad {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            rows: BTreeMap::new(),
        }
    }

    /// Adds `scale * z` to the weight row and `scale` to the bias of `(classifier, class)`.
    pub fn add_row(&mut self, classifier: usize, class: usize, scale: f64, z: &[f64]) {
        debug_assert_eq!(z.len(), self.d);
        let d = self.d;
        let (w, b) = self
            .rows
            .entry((classifier, class))
            .or_insert_with(|| (vec![0.0; d], 0.0));
        for (wi, zi) in w.iter_mut().zip(z) {
            *wi += scale * zi;
        }
        *b += scale;
    }

    pub fn row(&self, classifier: usize, class: usize) -> Option<(&[f64], f64)> {
        self.rows
            .get(&(classifier, class))
            .map(|(w, b)| (w.as_slice(), *b))
    }

    pub fn rows(&self) -> impl Iterator<Item = ((usize, usize), &[f64], f64)> {
        self.rows.iter().map(|(&k, (w, b))| (k, w.as_slice(), *b))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign-only descent with decoupled weight decay:
// sign() maps NaN to 0, so a NaN gradient would otherwise pass as "no update".
fn check_gradient(grad: &SparseGrad) -> Result<()> {
    match grad
        .rows()
        .find(|(_, w, b)| !b.is_finite() || w.iter().any(|x| !x.is_finite()))
    {
        Some(((j, class), _, _)) => Err(Error::NonFinite {
            what: format!("gradient of classifier {j}, class {class}"),
            batch: None,
        }),
        None => Ok(()),
    }
}

/// `theta <- theta - lr * sign(g) - decay * theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignOptimizer {
    pub lr: f64,
    pub decay: f64,
    pub decay_biases: bool,
}

impl SignOptimizer {
    pub fn from_hyperparams(hp: &Hyperparams) -> Self {
        Self {
            lr: hp.lr,
            decay: hp.decay,
            decay_biases: hp.decay_biases,
        }
    }

    #[inline]
    pub fn step_param(&self, theta: f64, g: f64, decay: f64) -> f64 {
        theta - self.lr * sign(g) - decay * theta
    }

    /// Decays every parameter and steps the rows present in `grad`.
    pub fn apply_memory(&self, mem: &mut EnsembleMemory, grad: &SparseGrad) -> Result<()> {
        check_gradient(grad)?;
        let classifiers = mem.classifiers_mut();
        if let Some(((j, _), _, _)) = grad.rows().find(|((j, _), _, _)| *j >= classifiers.len()) {
            return Err(Error::Config(format!("gradient for missing classifier {j}")));
        }
        if self.decay != 0.0 {
            for c in classifiers.iter_mut() {
                self.decay_all(c);
            }
        }
        for ((j, class), w, b) in grad.rows() {
            self.step_row(&mut classifiers[j], class, w, b);
        }
        for ((j, _), _, _) in grad.rows() {
            if !classifiers[j].is_finite() {
                return Err(Error::NonFinite {
                    what: format!("classifier {j} after update"),
                    batch: None,
                });
            }
        }
        Ok(())
    }

    /// Same update for a single classifier; `grad` rows must all use classifier index 0.
    pub fn apply_classifier(&self, c: &mut TClassifier, grad: &SparseGrad) -> Result<()> {
        check_gradient(grad)?;
        if self.decay != 0.0 {
            self.decay_all(c);
        }
        for ((j, class), w, b) in grad.rows() {
            if j != 0 {
                return Err(Error::Config(format!("gradient for missing classifier {j}")));
            }
            self.step_row(c, class, w, b);
        }
        if !c.is_finite() {
            return Err(Error::NonFinite {
                what: "classifier after update".into(),
                batch: None,
            });
        }
        Ok(())
    }

    fn decay_all(&self, c: &mut TClassifier) {
        let decay = self.decay;
        let bias_decay = if self.decay_biases { decay } else { 0.0 };
        let (w, b) = c.params_mut();
        for x in w.iter_mut() {
            *x -= decay * *x;
        }
        for x in b.iter_mut() {
            *x -= bias_decay * *x;
        }
    }

    // Decay was already applied to the whole classifier, so only the sign step remains here.
    // `theta - lr*s - decay*theta` is evaluated as `(theta - decay*theta) - lr*s`.
    fn step_row(&self, c: &mut TClassifier, class: usize, gw: &[f64], gb: f64) {
        let (w, b) = c.row_mut(class);
        for (x, g) in w.iter_mut().zip(gw) {
            *x -= self.lr * sign(*g);
        }
        *b -= self.lr * sign(gb);
    }
}
