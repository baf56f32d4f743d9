//! Demonstration collection: the teacher tracks its dense plans through the
//! training worlds, successful episodes are kept with both views of every
//! state, and the result is frozen into the buffer the distillation steps
//! sample from.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mppi::{MppiConfig, MppiController};
use super::plan::guide_chain;
use super::teacher::TeacherPolicy;
use crate::error::{Error, Result};
use crate::nn::ActorCritic;
use crate::nn::policy::diag_gaussian_logprob;
use crate::rng::{randn, stream};
use crate::rollout::{Env, TeacherBuffer};
use crate::worlds::env::{LearnerView, VehicleEnv, WorldInstance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    /// Transitions to keep (the buffer is truncated to exactly this).
    pub target_transitions: usize,
    /// Attempt cap across all episodes.
    pub max_episodes: usize,
    /// Minimum fraction of attempted episodes that must succeed.
    pub success_floor: f64,
    pub gamma: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig { target_transitions: 100_000, max_episodes: 2_000, success_floor: 0.5, gamma: 0.99 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DemoReport {
    pub episodes_attempted: usize,
    pub episodes_kept: usize,
    pub transitions: usize,
    pub success_rate: f64,
    /// Mean undiscounted return of the kept episodes.
    pub mean_return: f64,
    /// Kept episodes per world, indexed like the input world list.
    pub kept_by_world: Vec<usize>,
}

/// Who demonstrates. Every source yields a Gaussian action with a stored
/// log-density, so the distillation ratio is well defined downstream; the
/// deterministic sources get a narrow Gaussian wrapped around their output.
pub enum DemoSource<'a> {
    /// Dense-plan tracking controller in its Gaussian wrap (the default).
    Tracker(&'a TeacherPolicy),
    /// A trained policy over the dense-plan observation view.
    Policy(&'a ActorCritic),
    /// The sampling planner itself, wrapped at std `sigma`.
    Planner { cfg: MppiConfig, sigma: f64 },
}

/// Roll the demonstrator through `worlds` (all of which need dense plans)
/// until `cfg.target_transitions` successful-episode steps are banked, then
/// freeze. Fails with a teacher-quality error when the success rate over
/// attempted episodes lands under `cfg.success_floor`.
pub fn collect_demonstrations(
    worlds: Vec<WorldInstance>,
    source: &DemoSource,
    cfg: &DemoConfig,
    seed: u64,
) -> Result<(TeacherBuffer, DemoReport)> {
    if cfg.target_transitions == 0 {
        return Err(Error::config("demos.target_transitions: must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.success_floor) {
        return Err(Error::config("demos.success_floor: must be in [0, 1]"));
    }
    if let DemoSource::Planner { cfg: mppi, sigma } = source {
        if mppi.samples == 0 || mppi.horizon == 0 || *sigma <= 0.0 {
            return Err(Error::config("demos: planner source needs samples, horizon, and sigma positive"));
        }
    }
    let guides: Vec<_> = match source {
        DemoSource::Planner { .. } => worlds.iter().map(|w| guide_chain(&w.spec)).collect(),
        _ => Vec::new(),
    };
    let mut env = VehicleEnv::new(worlds, LearnerView::Teacher, true)?;
    let params = *env.params();
    if let DemoSource::Policy(model) = source {
        if model.config.obs_dim != env.obs_dim() || model.config.action_dim != env.action_dim() {
            return Err(Error::shape(format!(
                "demos: policy is {}->{}, teacher view needs {}->{}",
                model.config.obs_dim,
                model.config.action_dim,
                env.obs_dim(),
                env.action_dim()
            )));
        }
    }
    let mut rng = stream(seed, "demo", 0);

    let mut buffer = TeacherBuffer::new(
        env.alt_obs_dim().expect("alt view is on"),
        env.obs_dim(),
        env.action_dim(),
    );
    let mut report = DemoReport { kept_by_world: vec![0; env.worlds().len()], ..DemoReport::default() };
    let mut kept_return_sum = 0.0;

    while buffer.len() < cfg.target_transitions && report.episodes_attempted < cfg.max_episodes {
        let mut obs = env.reset();
        let world_index = env.world_index();
        let plan = env.current_world().dense.as_ref().expect("checked at construction").clone();
        let mut planner = match source {
            DemoSource::Planner { cfg, .. } => {
                Some(MppiController::new(*cfg, params, rng.gen::<u64>()))
            }
            _ => None,
        };

        let mut obs_student = Vec::new();
        let mut obs_teacher = Vec::new();
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        let mut logprobs = Vec::new();
        let mut undiscounted = 0.0;
        let success = loop {
            let (action, logp) = match source {
                DemoSource::Tracker(t) => {
                    let (a, lp) = t.sample(&plan, &env.vehicle_state(), &params, &mut rng);
                    (a.to_vec(), lp)
                }
                DemoSource::Policy(model) => model.sample_action(&obs.primary, &mut rng),
                DemoSource::Planner { sigma, .. } => {
                    let mean = planner.as_mut().expect("constructed above").plan(
                        &env.current_world().spec,
                        &guides[world_index],
                        &env.vehicle_state(),
                    );
                    let a = [mean[0] + sigma * randn(&mut rng), mean[1] + sigma * randn(&mut rng)];
                    let ls = [sigma.ln(), sigma.ln()];
                    (a.to_vec(), diag_gaussian_logprob(&mean, &ls, &a))
                }
            };
            let step = env.step(&action);
            obs_teacher.push(obs.primary.clone());
            obs_student.push(obs.alt.clone().expect("alt view is on"));
            actions.push(action);
            rewards.push(step.reward);
            logprobs.push(logp);
            undiscounted += step.reward;
            if step.terminated || step.truncated {
                break step.metrics.map(|m| m.success).unwrap_or(false);
            }
            obs = step.obs;
        };

        report.episodes_attempted += 1;
        if success {
            let returns = episode_returns_to_go(&rewards, cfg.gamma);
            buffer.push_episode(world_index as u64, &obs_student, &obs_teacher, &actions, &rewards, &logprobs, &returns)?;
            report.episodes_kept += 1;
            report.kept_by_world[world_index] += 1;
            kept_return_sum += undiscounted;
        }
    }

    report.success_rate = if report.episodes_attempted == 0 {
        0.0
    } else {
        report.episodes_kept as f64 / report.episodes_attempted as f64
    };
    if report.success_rate < cfg.success_floor {
        return Err(Error::TeacherQuality(format!(
            "teacher succeeded on {:.0}% of {} episodes (floor {:.0}%)",
            100.0 * report.success_rate,
            report.episodes_attempted,
            100.0 * cfg.success_floor
        )));
    }
    if buffer.len() < cfg.target_transitions {
        return Err(Error::TeacherQuality(format!(
            "banked only {} of {} demonstration steps in {} episodes",
            buffer.len(),
            cfg.target_transitions,
            report.episodes_attempted
        )));
    }

    buffer.truncate(cfg.target_transitions)?;
    buffer.freeze();
    report.transitions = buffer.len();
    report.mean_return = if report.episodes_kept > 0 { kept_return_sum / report.episodes_kept as f64 } else { 0.0 };
    Ok((buffer, report))
}

/// Discounted return-to-go of each step within one terminal episode.
fn episode_returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    out
}
