//! Teacher-guided reinforcement learning for vehicle navigation.
//!
//! The crate trains a raycast-equipped student policy to drive a kinematic
//! vehicle through obstacle courses it cannot plan through directly, by
//! distilling actions from a privileged teacher that tracks a densified,
//! collision-checked reference path. Everything numerical — networks,
//! gradients, the optimizer, the planner — is implemented here in plain `f64`
//! so that every update is reproducible bit-for-bit from a master seed.
//!
//! Module tour:
//!
//! - [`nn`] — small dense networks with hand-written backprop, a diagonal
//!   Gaussian policy head, Adam, and the named-segment parameter vector that
//!   ties them together.
//! - [`rollout`] — trajectory collection, discounted returns, GAE, and the
//!   frozen teacher demonstration buffer.
//! - [`ppo`] — clipped-surrogate policy optimization on collected rollouts.
//! - [`tadpo`] — the teacher-action distillation update and the interleaved
//!   training loop that mixes it with PPO minibatch steps.
//! - [`worlds`] — procedurally generated driving courses, the vehicle model,
//!   observation encoding, rewards, and episode metrics.
//! - [`planners`] — sparse/dense waypoint planning, the MPPI controller used
//!   as the expert, pure pursuit, and demonstration collection.
//! - [`baselines`] — DAgger and PPO-with-BC-regularization comparison
//!   methods, plus the shared evaluation harness.
//! - [`harness`] — experiment configs, seed derivation, world sets, JSONL
//!   stats, tables, SVG plots, and the end-to-end reproduction suites.
//!
//! The `examples/` directory is the front door: each example is a runnable
//! walkthrough of one capability (generate worlds, drive MPPI, train the
//! teacher, collect demos, train students, evaluate side by side).

pub mod baselines;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod nn;
pub mod ppo;
pub mod rng;
pub mod planners;
pub mod rollout;
pub mod tadpo;
pub mod worlds;

pub use error::{Error, Result};
