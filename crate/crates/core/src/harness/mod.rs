//! Experiment orchestration: single-epoch training loops wiring schedule,
//! model, optimizer and metrics together, plus baselines and ablation sweeps.

mod ablation;
mod config;
mod learner;
mod run;

pub use ablation::{ablation_sweep, format_ablation_table, AblationAxis, AblationRow};
pub use config::{
    DataConfig, ExperimentConfig, ModelConfig, ModelKind, ScheduleConfig, SCHEMA_VERSION,
};
pub use learner::{
    BaselineClassifier, BaselineFlavor, EnsembleLearner, EvalSet, Example, Learner,
};
pub use run::{
    build_learner, check_online, eval_grid, load_dataset, run_experiment, run_experiment_on,
    run_single, ExperimentOutcome,
};
