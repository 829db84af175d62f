//! Adversarial training of the unrolled generator.

mod config;
mod disc;
mod run;

pub use config::{ConstraintKind, SelectionMetric, TrainConfig};
pub use disc::{
    constraint_loss, d_loss, g_loss, normalized_d, normalized_score, Discriminator, Normalization, NORM_EPS,
};
pub use run::{
    estimate_component_power, mean_power, train_energy_constrained, train_gan_n, train_indirect, EpochRecord,
    IndirectOutcome, TrainOutcome, TrainReport,
};
