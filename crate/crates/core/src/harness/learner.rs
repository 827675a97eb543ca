//! The three trainable models behind one interface.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::data::Split;
use crate::ensemble::{
    predict_from_output, EnsembleMemory, Hyperparams, Selection, SignOptimizer, SparseGrad,
    TClassifier,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::vecops::argmax;

static NEXT_EVAL_ID: AtomicU64 = AtomicU64::new(0);

/// Held-out examples converted to `f64` once per run.
#[derive(Debug)]
pub struct EvalSet {
    id: u64,
    d: usize,
    vectors: Vec<f64>,
    labels: Vec<usize>,
}

impl EvalSet {
    pub fn from_split(split: &Split, d: usize) -> Self {
        let mut vectors = Vec::with_capacity(split.len() * d);
        let mut labels = Vec::with_capacity(split.len());
        for (v, l) in split.iter() {
            vectors.extend(v.iter().map(|&x| f64::from(x)));
            labels.push(l);
        }
        Self::new(d, vectors, labels)
    }

    pub fn new(d: usize, vectors: Vec<f64>, labels: Vec<usize>) -> Self {
        assert_eq!(vectors.len(), d * labels.len());
        Self {
            id: NEXT_EVAL_ID.fetch_add(1, Ordering::Relaxed),
            d,
            vectors,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// One training example: an embedding and its label.
pub type Example = (Vec<f64>, usize);

pub trait Learner {
    fn name(&self) -> &'static str;

    /// One optimizer step on the summed gradient of the batch.
    fn train_batch(&mut self, batch: &[Example]) -> Result<()>;

    /// Raw model output for one embedding.
    fn outputs(&self, z: &[f64]) -> Result<Vec<f64>>;

    /// Precompute anything about `eval` that training cannot change.
    fn prepare_eval(&mut self, _eval: &EvalSet) -> Result<()> {
        Ok(())
    }

    fn predict(&self, eval: &EvalSet) -> Result<Vec<usize>> {
        (0..eval.len())
            .map(|i| Ok(argmax(&self.outputs(eval.vector(i))?)))
            .collect()
    }
}

pub struct EnsembleLearner {
    memory: EnsembleMemory,
    hp: Hyperparams,
    opt: SignOptimizer,
    grad: SparseGrad,
    // Keys never change, so each eval example's selection is computed once.
    eval_cache: Option<(u64, Vec<Selection>)>,
}

impl EnsembleLearner {
    pub fn new(hp: Hyperparams) -> Result<Self> {
        let memory = EnsembleMemory::new(&hp)?;
        Ok(Self {
            grad: SparseGrad::new(hp.d),
            opt: SignOptimizer::from_hyperparams(&hp),
            memory,
            hp,
            eval_cache: None,
        })
    }

    pub fn memory(&self) -> &EnsembleMemory {
        &self.memory
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    /// Gradient of the summed batch loss, as used by the last `train_batch`.
    pub fn last_gradient(&self) -> &SparseGrad {
        &self.grad
    }
}

impl Learner for EnsembleLearner {
    fn name(&self) -> &'static str {
        "ensemble"
    }

    fn train_batch(&mut self, batch: &[Example]) -> Result<()> {
        self.grad.clear();
        for (z, y) in batch {
            let sel = self.memory.top_k_select(z, self.hp.k)?;
            self.memory
                .accumulate_grad(z, *y, &sel, self.hp.tau, &mut self.grad)?;
        }
        self.opt.apply_memory(&mut self.memory, &self.grad)
    }

    fn outputs(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.memory.forward(z, &self.hp)?.y_hat)
    }

    fn prepare_eval(&mut self, eval: &EvalSet) -> Result<()> {
        let sels = (0..eval.len())
            .map(|i| self.memory.top_k_select(eval.vector(i), self.hp.k))
            .collect::<Result<Vec<_>>>()?;
        self.eval_cache = Some((eval.id, sels));
        Ok(())
    }

    fn predict(&self, eval: &EvalSet) -> Result<Vec<usize>> {
        match &self.eval_cache {
            Some((id, sels)) if *id == eval.id => (0..eval.len())
                .map(|i| {
                    let y = self
                        .memory
                        .forward_selected(eval.vector(i), &sels[i], self.hp.tau)?;
                    Ok(predict_from_output(&y))
                })
                .collect(),
            _ => (0..eval.len())
                .map(|i| self.memory.predict(eval.vector(i), &self.hp))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineFlavor {
    /// Scaled tanh with the dot-product loss; a one-member ensemble without the key.
    Tanh,
    /// Log-softmax with negative log-likelihood.
    Vanilla,
}

/// A single stand-alone linear classifier trained with the same sign optimizer.
#[derive(Clone, Debug)]
pub struct BaselineClassifier {
    classifier: TClassifier,
    flavor: BaselineFlavor,
    tau: f64,
    opt: SignOptimizer,
    grad: SparseGrad,
}

impl BaselineClassifier {
    /// Weights come from the same random stream an ensemble with this seed would use.
    pub fn new(flavor: BaselineFlavor, hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        let mut rng = stream(hp.seed, Stream::Weights);
        let classifier = TClassifier::init(&mut rng, hp.m, hp.d, hp.init_scale);
        Ok(Self::from_classifier(flavor, classifier, hp))
    }

    pub fn from_classifier(flavor: BaselineFlavor, classifier: TClassifier, hp: &Hyperparams) -> Self {
        Self {
            grad: SparseGrad::new(classifier.dim()),
            classifier,
            flavor,
            tau: hp.tau,
            opt: SignOptimizer::from_hyperparams(hp),
        }
    }

    pub fn classifier(&self) -> &TClassifier {
        &self.classifier
    }

    pub fn flavor(&self) -> BaselineFlavor {
        self.flavor
    }

    /// Per-example loss: `-y_hat[c]` (tanh) or `-log softmax(psi)[c]` (vanilla).
    pub fn loss(&self, z: &[f64], class: usize) -> Result<f64> {
        match self.flavor {
            BaselineFlavor::Tanh => Ok(-self.classifier.forward(z, self.tau)?[class]),
            BaselineFlavor::Vanilla => Ok(-log_softmax(&self.classifier.logits(z)?)[class]),
        }
    }

    /// Adds the gradient of one example's loss to `acc` (rows keyed by classifier 0).
    pub fn accumulate_grad(&self, z: &[f64], class: usize, acc: &mut SparseGrad) -> Result<()> {
        self.classifier.check_dim(z)?;
        let m = self.classifier.classes();
        if class >= m {
            return Err(Error::Input(format!("label {class} out of range for {m} classes")));
        }
        match self.flavor {
            BaselineFlavor::Tanh => {
                // Same expression as the ensemble with a single selected member (alpha = 1).
                let alpha = 1.0;
                let slope = self.classifier.activation_slope(class, z, self.tau);
                acc.add_row(0, class, -alpha * slope, z);
            }
            BaselineFlavor::Vanilla => {
                let logp = log_softmax(&self.classifier.logits(z)?);
                for (i, lp) in logp.iter().enumerate() {
                    let target = if i == class { 1.0 } else { 0.0 };
                    acc.add_row(0, i, lp.exp() - target, z);
                }
            }
        }
        Ok(())
    }

    pub fn gradient(&self, z: &[f64], class: usize) -> Result<SparseGrad> {
        let mut g = SparseGrad::new(self.classifier.dim());
        self.accumulate_grad(z, class, &mut g)?;
        Ok(g)
    }
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

impl Learner for BaselineClassifier {
    fn name(&self) -> &'static str {
        match self.flavor {
            BaselineFlavor::Tanh => "tanh",
            BaselineFlavor::Vanilla => "vanilla",
        }
    }

    fn train_batch(&mut self, batch: &[Example]) -> Result<()> {
        let mut grad = std::mem::take(&mut self.grad);
        grad.clear();
        let result = batch
            .iter()
            .try_for_each(|(z, y)| self.accumulate_grad(z, *y, &mut grad));
        self.grad = grad;
        result?;
        self.opt.apply_classifier(&mut self.classifier, &self.grad)
    }

    fn outputs(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self.flavor {
            BaselineFlavor::Tanh => self.classifier.forward(z, self.tau),
            BaselineFlavor::Vanilla => Ok(log_softmax(&self.classifier.logits(z)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(d: usize, m: usize) -> Hyperparams {
        Hyperparams {
            n: 1,
            k: 1,
            tau: 3.0,
            ..Hyperparams::new(d, m)
        }
    }

    #[test]
    fn vanilla_at_zero_is_uniform() {
        let h = hp(3, 4);
        let b = BaselineClassifier::from_classifier(BaselineFlavor::Vanilla, TClassifier::zeros(4, 3), &h);
        let out = b.outputs(&[1.0, 2.0, 3.0]).unwrap();
        for lp in out {
            assert!((lp.exp() - 0.25).abs() < 1e-15);
        }
        assert!((b.loss(&[1.0, 2.0, 3.0], 2).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn vanilla_gradient_touches_every_row() {
        let h = hp(2, 3);
        let b = BaselineClassifier::from_classifier(BaselineFlavor::Vanilla, TClassifier::zeros(3, 2), &h);
        let g = b.gradient(&[1.0, -1.0], 1).unwrap();
        assert_eq!(g.len(), 3);
        let (_, b1) = g.row(0, 1).unwrap();
        assert!((b1 - (1.0 / 3.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn tanh_gradient_touches_only_true_row() {
        let h = hp(2, 3);
        let mut rng = stream(0, Stream::Weights);
        let c = TClassifier::init(&mut rng, 3, 2, 1.0);
        let b = BaselineClassifier::from_classifier(BaselineFlavor::Tanh, c, &h);
        let g = b.gradient(&[0.3, 0.9], 2).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.row(0, 2).is_some());
    }

    #[test]
    fn log_softmax_is_stable() {
        let lp = log_softmax(&[1000.0, 0.0]);
        assert!(lp[0].abs() < 1e-12);
        assert!((lp[1] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn cached_and_uncached_predictions_agree() {
        let h = Hyperparams {
            n: 16,
            k: 4,
            ..Hyperparams::new(3, 2)
        };
        let mut l = EnsembleLearner::new(h).unwrap();
        let eval = EvalSet::new(3, vec![1.0, 0.0, 0.5, -1.0, 2.0, 0.1], vec![0, 1]);
        let before = l.predict(&eval).unwrap();
        l.prepare_eval(&eval).unwrap();
        assert_eq!(l.predict(&eval).unwrap(), before);
    }
}
