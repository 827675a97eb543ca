//! Shared helpers for the integration tests. Everything here recomputes
//! quantities from first principles rather than calling the library's own versions.
#![allow(dead_code)]

use ensmem::ensemble::{EnsembleMemory, SparseGrad, TClassifier};
use ensmem::metrics::{EvalPoint, RunRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A memory with standard-normal keys and weights of the given scale.
pub fn random_memory(rng: &mut ChaCha8Rng, d: usize, m: usize, n: usize, scale: f64) -> EnsembleMemory {
    let keys = normal_vec(rng, n * d, 1.0);
    let classifiers = (0..n)
        .map(|_| {
            TClassifier::from_parts(m, d, normal_vec(rng, m * d, scale), normal_vec(rng, m, scale))
                .unwrap()
        })
        .collect();
    EnsembleMemory::from_parts(d, m, keys, classifiers).unwrap()
}

/// Copy of `mem` with one parameter shifted. `param < m*d` addresses a weight, otherwise a bias.
pub fn perturbed(mem: &EnsembleMemory, j: usize, param: usize, h: f64) -> EnsembleMemory {
    let (d, m) = (mem.dim(), mem.classes());
    let classifiers = mem
        .classifiers()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut w = c.weights().to_vec();
            let mut b = c.biases().to_vec();
            if i == j {
                if param < m * d {
                    w[param] += h;
                } else {
                    b[param - m * d] += h;
                }
            }
            TClassifier::from_parts(m, d, w, b).unwrap()
        })
        .collect();
    EnsembleMemory::from_parts(d, m, mem.keys().to_vec(), classifiers).unwrap()
}

/// The loss `-y_hat[class]` written out directly: cosine top-k, weights gamma / sum(gamma).
pub fn reference_loss(mem: &EnsembleMemory, z: &[f64], class: usize, k: usize, tau: f64) -> f64 {
    let d = mem.dim();
    let zn = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut sims: Vec<(usize, f64)> = (0..mem.len())
        .map(|i| {
            let key = &mem.keys()[i * d..(i + 1) * d];
            let kn = key.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dotp: f64 = key.iter().zip(z).map(|(a, b)| a * b).sum();
            (i, dotp / (kn * zn))
        })
        .collect();
    sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let top = &sims[..k];
    let total: f64 = top.iter().map(|s| s.1).sum();
    let mut y = 0.0;
    for &(i, g) in top {
        let c = &mem.classifiers()[i];
        let row = &c.weights()[class * d..(class + 1) * d];
        let psi: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + c.biases()[class];
        y += g / total * tau * (psi / tau).tanh();
    }
    -y
}

/// Dense view of a sparse gradient for classifier `j`: weights then biases.
pub fn dense(g: &SparseGrad, j: usize, m: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * d + m];
    for ((jj, class), w, b) in g.rows() {
        if jj == j {
            out[class * d..(class + 1) * d].copy_from_slice(w);
            out[m * d + class] = b;
        }
    }
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Eval points with random per-class accuracies on a grid of `len` points.
pub fn random_record(rng: &mut ChaCha8Rng, m: usize, len: usize) -> RunRecord {
    let eval_points = (0..len)
        .map(|t| EvalPoint {
            batch: t * 10 + 9,
            overall: 0.0,
            per_class: (0..m).map(|_| rng.random::<f64>()).collect(),
        })
        .collect();
    RunRecord {
        model: "ensemble".into(),
        seed: 0,
        config_hash: "0".into(),
        m,
        eval_points,
    }
}

/// Forgetting by brute force: for every class, every earlier point against the last one.
pub fn brute_force_forgetting(series: &[Vec<f64>]) -> f64 {
    let n = series.len();
    let m = series[0].len();
    let mut sum = 0.0;
    for i in 0..m {
        let mut best = f64::NEG_INFINITY;
        for t in 0..n {
            let drop = series[t][i] - series[n - 1][i];
            if drop > best {
                best = drop;
            }
        }
        sum += best;
    }
    sum / m as f64
}

pub fn series(rec: &RunRecord) -> Vec<Vec<f64>> {
    rec.eval_points.iter().map(|p| p.per_class.clone()).collect()
}
