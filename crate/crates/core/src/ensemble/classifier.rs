use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::dot;

/// Standard deviation of a unit normal truncated to [-2, 2].
const TRUNCATED_UNIT_STD: f64 = 0.879_625_661_034_239_8;

/// A single linear layer followed by `tau * tanh(x / tau)`.
///
/// Weights are stored row-major, one row of length `d` per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TClassifier {
    m: usize,
    d: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// Fan-in variance-scaling init from a normal truncated at two standard deviations.
///
/// The target variance is `scale / fan_in`; the underlying normal is widened so
/// the truncated draw still has that variance.
pub fn truncated_normal_init<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    fan_in: usize,
    scale: f64,
) -> Vec<f64> {
    let std = (scale / fan_in as f64).sqrt() / TRUNCATED_UNIT_STD;
    (0..len)
        .map(|_| loop {
            let x: f64 = rng.sample(StandardNormal);
            if x.abs() <= 2.0 {
                break x * std;
            }
        })
        .collect()
}

impl TClassifier {
    pub fn zeros(m: usize, d: usize) -> Self {
        Self {
            m,
            d,
            weights: vec![0.0; m * d],
            biases: vec![0.0; m],
        }
    }

    pub fn init<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, scale: f64) -> Self {
        Self {
            m,
            d,
            weights: truncated_normal_init(rng, m * d, d, scale),
            biases: vec![0.0; m],
        }
    }

    pub fn from_parts(m: usize, d: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != m * d || biases.len() != m {
            return Err(Error::Config(format!(
                "classifier parts do not match {m}x{d}: {} weights, {} biases",
                weights.len(),
                biases.len()
            )));
        }
        Ok(Self {
            m,
            d,
            weights,
            biases,
        })
    }

    pub fn classes(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.d..(class + 1) * self.d]
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.biases)
    }

    pub(crate) fn row_mut(&mut self, class: usize) -> (&mut [f64], &mut f64) {
        let d = self.d;
        (
            &mut self.weights[class * d..(class + 1) * d],
            &mut self.biases[class],
        )
    }

    pub fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.d {
            return Err(Error::Config(format!(
                "embedding has length {}, classifier expects {}",
                z.len(),
                self.d
            )));
        }
        Ok(())
    }

    /// Pre-activation `w_c . z + b_c` for one class.
    #[inline]
    pub fn pre_activation(&self, class: usize, z: &[f64]) -> f64 {
        dot(self.row(class), z) + self.biases[class]
    }

    /// Pre-activations for every class.
    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok((0..self.m).map(|c| self.pre_activation(c, z)).collect())
    }

    /// `tau * tanh(psi / tau)` per class.
    pub fn forward(&self, z: &[f64], tau: f64) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let mut out = Vec::with_capacity(self.m);
        self.forward_into(z, tau, &mut out);
        Ok(out)
    }

    pub(crate) fn forward_into(&self, z: &[f64], tau: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.m).map(|c| scaled_tanh(self.pre_activation(c, z), tau)));
    }

    /// Derivative of the activation of class `class` with respect to its pre-activation.
    #[inline]
    pub fn activation_slope(&self, class: usize, z: &[f64], tau: f64) -> f64 {
        sech2(self.pre_activation(class, z) / tau)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|x| x.is_finite())
    }
}

#[inline]
pub(crate) fn scaled_tanh(x: f64, tau: f64) -> f64 {
    tau * (x / tau).tanh()
}

#[inline]
pub(crate) fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn zero_classifier_outputs_zero() {
        let c = TClassifier::zeros(3, 4);
        assert_eq!(c.forward(&[1.0, -2.0, 3.0, 0.5], 250.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn single_unit_matches_tanh_of_one() {
        // 250 * tanh(1), tanh(1) = 0.76159415595576488812
        let c = TClassifier::from_parts(1, 1, vec![1.0], vec![0.0]).unwrap();
        let out = c.forward(&[250.0], 250.0).unwrap();
        assert!((out[0] - 190.398_538_988_941_22).abs() < 1e-9, "{}", out[0]);
    }

    #[test]
    fn output_is_strictly_inside_tau() {
        let c = TClassifier::from_parts(2, 1, vec![1e6, -1e6], vec![0.0, 0.0]).unwrap();
        let out = c.forward(&[3.0], 5.0).unwrap();
        // tanh saturates to exactly 1.0 in f64 for large inputs; the bound is open in exact arithmetic.
        assert!(out.iter().all(|v| v.abs() <= 5.0));
        let moderate = TClassifier::from_parts(1, 1, vec![2.0], vec![0.0]).unwrap();
        assert!(moderate.forward(&[3.0], 5.0).unwrap()[0] < 5.0);
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let c = TClassifier::zeros(2, 3);
        assert!(matches!(c.forward(&[1.0, 2.0], 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn truncated_init_statistics() {
        let mut rng = stream(3, Stream::Weights);
        let d = 64;
        let w = truncated_normal_init(&mut rng, 200_000, d, 1.0);
        let bound = 2.0 * (1.0 / d as f64).sqrt() / TRUNCATED_UNIT_STD;
        assert!(w.iter().all(|x| x.abs() <= bound));
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        let target = 1.0 / d as f64;
        assert!((var - target).abs() / target < 0.02, "var {var} target {target}");
    }

    #[test]
    fn init_biases_are_zero() {
        let mut rng = stream(1, Stream::Weights);
        let c = TClassifier::init(&mut rng, 4, 8, 10.0);
        assert!(c.biases().iter().all(|&b| b == 0.0));
        assert!(c.weights().iter().any(|&w| w != 0.0));
    }
}
