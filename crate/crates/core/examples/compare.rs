//! Runs the three models side by side on synthetic clustered embeddings.
//!
//! `cargo run --release --example compare -- [batch_size] [train_per_class] [seeds] [schedule]`
//!
//! SPREAD, OVERLAP and DIM in the environment change the generator.

use std::time::Instant;

use ensmem::data::{generate_synthetic, SyntheticSpec};
use ensmem::harness::{run_experiment_on, ExperimentConfig, ModelConfig, ModelKind};
use ensmem::schedule::ScheduleKind;

fn main() -> ensmem::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let batch_size = arg(0, 10);
    let per_class = arg(1, 1000);
    let seeds = arg(2, 5);
    let schedule = args.get(3).map(String::as_str).unwrap_or("split5");
    let spec = SyntheticSpec {
        cluster_spread: std::env::var("SPREAD").ok().and_then(|s| s.parse().ok()).unwrap_or(0.4),
        overlap: std::env::var("OVERLAP").ok().and_then(|s| s.parse().ok()).unwrap_or(0.0),
        d: std::env::var("DIM").ok().and_then(|s| s.parse().ok()).unwrap_or(64),
        train_per_class: per_class,
        test_per_class: 100,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec)?;
    for kind in [ModelKind::Ensemble, ModelKind::Tanh, ModelKind::Vanilla] {
        let mut cfg = ExperimentConfig {
            runs: seeds,
            model: ModelConfig::new(kind),
            ..Default::default()
        };
        cfg.data.synthetic = Some(spec.clone());
        cfg.schedule.set_kind(&ScheduleKind::parse(schedule)?);
        cfg.schedule.batch_size = batch_size;
        let start = Instant::now();
        let outcome = run_experiment_on(&cfg, &ds)?;
        let a = &outcome.aggregate;
        println!(
            "{:>8}: accuracy {:.4} ± {:.4}  forgetting {:.4} ± {:.4}  ({:.1}s)",
            kind.name(),
            a.final_accuracy.mean,
            a.final_accuracy.std,
            a.forgetting.mean,
            a.forgetting.std,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
