//! Wasserstein InfoGAN training: losses, analytic gradients, the alternating
//! update loop, the gradient-penalty alternative, metrics and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod grads;
pub mod losses;
pub mod optim;
pub mod run;
pub mod step;

pub use checkpoint::{
    checkpoint_config, checkpoint_kind, load_checkpoint, load_classifier_into, read_checkpoint, save_checkpoint,
    save_classifier, write_checkpoint, CheckpointKind,
};
pub use config::{LipschitzMode, TrainConfig};
pub use grads::{critic_grads, generator_grads, CriticTerms, CriticWeights, GeneratorTerms, GeneratorWeights, ModelGrads};
pub use losses::{
    critic_objective, generator_adv_loss, gradient_penalty, interpolate, mi_lower_bound, supervised_ce, SequenceCritic,
    SequenceEncoder,
};
pub use optim::Adam;
pub use run::{continue_run, read_metrics, read_metrics_file, train_run, MetricsRow, MetricsWriter, RunOutput, METRICS_HEADER};
pub use step::{NonFiniteDump, TrainData, TrainMetrics, TrainState};
