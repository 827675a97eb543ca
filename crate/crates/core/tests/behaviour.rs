mod common;

use common::*;
use ensmem::data::{generate_synthetic, EmbeddingDataset, SyntheticSpec};
use ensmem::ensemble::{Hyperparams, TClassifier};
use ensmem::harness::{
    run_experiment_on, BaselineClassifier, BaselineFlavor, EvalSet, ExperimentConfig, Learner,
    ModelConfig, ModelKind,
};
use ensmem::rng::{stream, Stream};
use ensmem::schedule::{ClassPools, Schedule, ScheduleKind};
use rand::Rng;

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        d: 16,
        m: 4,
        train_per_class: 200,
        test_per_class: 50,
        ..Default::default()
    }
}

#[test]
fn iid_class_frequencies_are_uniform() {
    let m = 10;
    let labels: Vec<usize> = (0..1000).map(|i| i % m).collect();
    let pools = ClassPools::from_labels(labels.iter().copied(), m);
    let s = Schedule::new(ScheduleKind::Iid, m, 1000, 10, 7).unwrap();
    let mut r = stream(7, Stream::Sampling);
    let mut counts = vec![0usize; m];
    for b in 0..1000 {
        for i in s.sample_batch(b, &pools, &mut r).unwrap() {
            counts[labels[i]] += 1;
        }
    }
    let n = 10_000.0;
    let p = 1.0 / m as f64;
    let sigma = (n * p * (1.0 - p)).sqrt();
    let mut chi2 = 0.0;
    for &c in &counts {
        assert!((c as f64 - n * p).abs() <= 3.0 * sigma, "counts {counts:?}");
        chi2 += (c as f64 - n * p).powi(2) / (n * p);
    }
    // 0.999 quantile of chi-square with 9 degrees of freedom.
    assert!(chi2 < 27.877, "chi2 {chi2}");
}

#[test]
fn split_batches_only_contain_task_classes() {
    let ds = generate_synthetic(&SyntheticSpec { m: 10, ..small_spec() }).unwrap();
    let pools = ClassPools::from_labels(ds.train.labels().iter().map(|&l| l as usize), 10);
    let s = Schedule::new(ScheduleKind::Split { tasks: 5 }, 10, 100, 8, 3).unwrap();
    let mut r = stream(3, Stream::Sampling);
    for b in 0..100 {
        let allowed = s.task_classes(b / 20);
        for i in s.sample_batch(b, &pools, &mut r).unwrap() {
            assert!(allowed.contains(&ds.train.label(i)));
        }
    }
}

/// Mean output of row `row` over the test examples of class `class`.
fn mean_output(c: &BaselineClassifier, eval: &EvalSet, row: usize, class: usize) -> f64 {
    let idx: Vec<usize> = (0..eval.len()).filter(|&i| eval.labels()[i] == class).collect();
    idx.iter()
        .map(|&i| c.outputs(eval.vector(i)).unwrap()[row])
        .sum::<f64>()
        / idx.len() as f64
}

fn targeting_margin(c: &BaselineClassifier, eval: &EvalSet, m: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..m {
        let own = mean_output(c, eval, i, i);
        for j in (0..m).filter(|&j| j != i) {
            total += own - mean_output(c, eval, j, i);
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn training_raises_targeted_output_over_collateral() {
    let spec = SyntheticSpec::default();
    let ds = generate_synthetic(&spec).unwrap();
    let eval = EvalSet::from_split(&ds.test, ds.d);
    let hp = Hyperparams { n: 1, k: 1, seed: 11, init_scale: Hyperparams::BASELINE_INIT_SCALE, ..Hyperparams::new(ds.d, ds.m) };
    let mut c = BaselineClassifier::new(BaselineFlavor::Tanh, &hp).unwrap();
    let before = targeting_margin(&c, &eval, ds.m);
    let pools = ClassPools::from_labels(ds.train.labels().iter().map(|&l| l as usize), ds.m);
    let s = Schedule::new(ScheduleKind::Iid, ds.m, 500, 10, 11).unwrap();
    let mut r = stream(11, Stream::Sampling);
    for b in 0..500 {
        let batch: Vec<_> = s
            .sample_batch(b, &pools, &mut r)
            .unwrap()
            .into_iter()
            .map(|i| (ds.train.vector_f64(i), ds.train.label(i)))
            .collect();
        c.train_batch(&batch).unwrap();
    }
    let after = targeting_margin(&c, &eval, ds.m);
    assert!(after > before, "margin {before} -> {after}");
}

/// Plain multinomial logistic regression by full-batch gradient descent.
fn linear_probe_accuracy(ds: &EmbeddingDataset) -> f64 {
    let (d, m) = (ds.d, ds.m);
    let mut w = vec![0.0f64; m * (d + 1)];
    let xs: Vec<Vec<f64>> = (0..ds.train.len()).map(|i| ds.train.vector_f64(i)).collect();
    let n = xs.len() as f64;
    let scores = |w: &[f64], x: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|c| {
                let row = &w[c * (d + 1)..(c + 1) * (d + 1)];
                row[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[d]
            })
            .collect()
    };
    for _ in 0..300 {
        let mut grad = vec![0.0; w.len()];
        for (x, l) in xs.iter().zip(ds.train.labels()) {
            let s = scores(&w, x);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..m {
                let g = e[c] / z - if c == usize::from(*l) { 1.0 } else { 0.0 };
                let row = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                for (gr, xv) in row[..d].iter_mut().zip(x) {
                    *gr += g * xv;
                }
                row[d] += g;
            }
        }
        for (wv, g) in w.iter_mut().zip(&grad) {
            *wv -= 2.0 * g / n;
        }
    }
    let correct = (0..ds.test.len())
        .filter(|&i| {
            let s = scores(&w, &ds.test.vector_f64(i));
            let best = (0..m).fold(0, |b, c| if s[c] > s[b] { c } else { b });
            best == ds.test.label(i)
        })
        .count();
    correct as f64 / ds.test.len() as f64
}

#[test]
fn default_synthetic_data_is_linearly_separable() {
    let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let acc = linear_probe_accuracy(&ds);
    assert!(acc >= 0.99, "probe accuracy {acc}");
}

#[test]
fn vanilla_gradient_matches_central_differences() {
    let mut r = rng(5);
    for _ in 0..50 {
        let d = r.random_range(1..=8);
        let m = r.random_range(2..=6);
        let hp = Hyperparams { n: 1, k: 1, ..Hyperparams::new(d, m) };
        let w = normal_vec(&mut r, m * d, 0.7);
        let b = normal_vec(&mut r, m, 0.7);
        let z = normal_vec(&mut r, d, 1.0);
        let class = r.random_range(0..m);
        let model = |w: &[f64], b: &[f64]| {
            BaselineClassifier::from_classifier(
                BaselineFlavor::Vanilla,
                TClassifier::from_parts(m, d, w.to_vec(), b.to_vec()).unwrap(),
                &hp,
            )
        };
        // Independent loss: -log(exp(psi_c) / sum exp(psi)).
        let nll = |w: &[f64], b: &[f64]| -> f64 {
            let psi: Vec<f64> = (0..m)
                .map(|c| w[c * d..(c + 1) * d].iter().zip(&z).map(|(a, x)| a * x).sum::<f64>() + b[c])
                .collect();
            psi.iter().map(|p| p.exp()).sum::<f64>().ln() - psi[class]
        };
        let g = model(&w, &b).gradient(&z, class).unwrap();
        let analytic = dense(&g, 0, m, d);
        let h = 1e-5;
        for p in 0..m * d + m {
            let (mut wp, mut bp, mut wm, mut bm) = (w.clone(), b.clone(), w.clone(), b.clone());
            if p < m * d {
                wp[p] += h;
                wm[p] -= h;
            } else {
                bp[p - m * d] += h;
                bm[p - m * d] -= h;
            }
            let numeric = (nll(&wp, &bp) - nll(&wm, &bm)) / (2.0 * h);
            assert!(rel_err(analytic[p], numeric) < 1e-3, "{} vs {numeric}", analytic[p]);
            assert!((model(&w, &b).loss(&z, class).unwrap() - nll(&w, &b)).abs() < 1e-12);
        }
    }
}

fn cfg_for(kind: ModelKind, spec: &SyntheticSpec) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        runs: 2,
        seed: 4,
        model: ModelConfig::new(kind),
        ..Default::default()
    };
    cfg.data.synthetic = Some(spec.clone());
    cfg.schedule.set_kind(&ScheduleKind::Split { tasks: 2 });
    cfg.schedule.batches = 100;
    cfg.schedule.batch_size = 8;
    cfg
}

#[test]
fn single_member_ensemble_follows_tanh_baseline_exactly() {
    let spec = small_spec();
    let ds = generate_synthetic(&spec).unwrap();
    let mut ens = cfg_for(ModelKind::Ensemble, &spec);
    ens.model.ensemble_size = 1;
    ens.model.k = 1;
    ens.model.init_scale = Some(10.0);
    let mut tanh = cfg_for(ModelKind::Tanh, &spec);
    tanh.model.init_scale = Some(10.0);
    let a = run_experiment_on(&ens, &ds).unwrap();
    let b = run_experiment_on(&tanh, &ds).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.eval_points, y.eval_points);
    }
}

#[test]
fn repeated_experiments_are_identical() {
    let spec = small_spec();
    let ds = generate_synthetic(&spec).unwrap();
    for kind in [ModelKind::Ensemble, ModelKind::Tanh, ModelKind::Vanilla] {
        let mut cfg = cfg_for(kind, &spec);
        cfg.model.ensemble_size = 64;
        cfg.model.k = 8;
        let a = run_experiment_on(&cfg, &ds).unwrap();
        let b = run_experiment_on(&cfg, &ds).unwrap();
        assert_eq!(a.records, b.records);
        assert_ne!(a.records[0].eval_points, a.records[1].eval_points);
    }
}

#[test]
fn ensemble_learns_a_split_stream() {
    let spec = SyntheticSpec { m: 4, ..small_spec() };
    let ds = generate_synthetic(&spec).unwrap();
    let mut cfg = cfg_for(ModelKind::Ensemble, &spec);
    cfg.model.ensemble_size = 32;
    cfg.model.k = 4;
    cfg.model.lr = 1e-2;
    let out = run_experiment_on(&cfg, &ds).unwrap();
    assert!(out.aggregate.final_accuracy.mean > 0.9, "{:?}", out.aggregate);
}

#[test]
fn too_many_batches_for_one_epoch_is_rejected() {
    let spec = SyntheticSpec { train_per_class: 10, ..small_spec() };
    let ds = generate_synthetic(&spec).unwrap();
    let mut cfg = cfg_for(ModelKind::Tanh, &spec);
    assert!(matches!(run_experiment_on(&cfg, &ds), Err(ensmem::Error::Config(_))));
    cfg.allow_multi_epoch = true;
    run_experiment_on(&cfg, &ds).unwrap();
}

#[test]
fn outputs_are_written_per_run() {
    let spec = small_spec();
    let ds = generate_synthetic(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = cfg_for(ModelKind::Vanilla, &spec);
    cfg.out = Some(dir.path().to_path_buf());
    cfg.probe_count = 3;
    run_experiment_on(&cfg, &ds).unwrap();
    for name in [
        "config.toml",
        "summary.json",
        "run_000.csv",
        "run_000.json",
        "run_001.csv",
        "run_000_activations.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let dumped = std::fs::read_to_string(dir.path().join("run_000_activations.csv")).unwrap();
    assert!(dumped.starts_with("t,probe,label,y0,y1,y2,y3\n"));
    let reloaded = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(reloaded.config_hash(), cfg.config_hash());
}
