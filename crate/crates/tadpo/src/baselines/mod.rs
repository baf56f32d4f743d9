//! Comparison methods sharing the network, rollout, and world stack:
//! dataset-aggregation imitation, KL-regularized on-policy training, and the
//! mode-action evaluation used to score every method on equal footing.

pub mod dagger;
pub mod eval;
pub mod ppo_bc;

pub use dagger::{fit_gaussian_mle, halving_schedule, train_dagger, DaggerConfig, DaggerStats, LabeledSet};
pub use eval::{evaluate, write_csv, EvalController, EvalOutcome, EvalRow, WorldResult};
pub use ppo_bc::{ppo_bc_loss, ppo_bc_loss_grad, train_ppo_bc, PpoBcConfig, TeacherActionEnv};
