//! Side-by-side evaluation: drive a trained policy (by its distribution
//! mode), the plan-tracking teacher, or the sampling planner itself across a
//! fixed world set and aggregate the episode metrics.

use std::io::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ActorCritic;
use crate::planners::mppi::{MppiConfig, MppiController};
use crate::planners::teacher::TeacherPolicy;
use crate::rng::derive_seed;
use crate::rollout::Env;
use crate::worlds::env::{LearnerView, VehicleEnv, WorldInstance};
use crate::worlds::metrics::MetricsSummary;

/// What drives the vehicle during evaluation. Policies act deterministically
/// through their distribution mode; the sampling planner reseeds per episode
/// from `seed` so the whole evaluation is a pure function of its inputs.
pub enum EvalController<'a> {
    PolicyMean { model: &'a ActorCritic, view: LearnerView },
    Teacher(&'a TeacherPolicy),
    Mppi { cfg: MppiConfig, seed: u64 },
}

/// Per-world episode metrics plus the flattened aggregate.
#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub per_world: Vec<WorldResult>,
    pub aggregate: MetricsSummary,
}

#[derive(Clone, Debug)]
pub struct WorldResult {
    pub world_seed: u64,
    pub family_label: &'static str,
    pub summary: MetricsSummary,
}

/// Run `episodes_per_world` episodes in every world and aggregate. The
/// dynamics are deterministic, so policy and teacher evaluation is too;
/// repeated calls return identical numbers.
pub fn evaluate(
    controller: &EvalController,
    worlds: &[WorldInstance],
    episodes_per_world: usize,
) -> Result<EvalOutcome> {
    if worlds.is_empty() {
        return Err(Error::config("evaluate: empty world set"));
    }
    if episodes_per_world == 0 {
        return Err(Error::config("evaluate: episodes_per_world must be positive"));
    }
    if matches!(controller, EvalController::Teacher(_)) {
        if let Some(i) = worlds.iter().position(|w| w.dense.is_none()) {
            return Err(Error::config(format!("evaluate: world {i} has no dense plan for the teacher")));
        }
    }
    let view = match controller {
        EvalController::PolicyMean { view, .. } => *view,
        // Observations are unused by privileged controllers.
        _ => LearnerView::Student,
    };

    let mut per_world = Vec::with_capacity(worlds.len());
    let mut all_episodes = Vec::new();
    for (wi, w) in worlds.iter().enumerate() {
        let mut env = VehicleEnv::new(vec![w.clone()], view, false)?;
        if let EvalController::PolicyMean { model, .. } = controller {
            if model.config.obs_dim != env.obs_dim() || model.config.action_dim != env.action_dim() {
                return Err(Error::shape(format!(
                    "evaluate: model is {}->{}, environment needs {}->{}",
                    model.config.obs_dim,
                    model.config.action_dim,
                    env.obs_dim(),
                    env.action_dim()
                )));
            }
        }
        // The online planner gets only the raw reference route; finding a
        // way through the hazards is its sampling problem. (The offline
        // demonstration pipeline is the privileged one — see
        // `planners::plan::densify`.)
        let reference = match controller {
            EvalController::Mppi { .. } => Some(w.spec.chain()),
            _ => None,
        };

        let mut episodes = Vec::with_capacity(episodes_per_world);
        for e in 0..episodes_per_world {
            let mut mppi = match controller {
                EvalController::Mppi { cfg, seed } => Some(MppiController::new(
                    *cfg,
                    *env.params(),
                    derive_seed(*seed, "eval_episode", (wi * 100_000 + e) as u64),
                )),
                _ => None,
            };
            let mut obs = env.reset();
            loop {
                let action: Vec<f64> = match controller {
                    EvalController::PolicyMean { model, .. } => model.policy_mean(&obs.primary),
                    EvalController::Teacher(t) => {
                        let dense = env.current_world().dense.as_ref().expect("checked above");
                        t.mean(dense, &env.vehicle_state(), env.params()).to_vec()
                    }
                    EvalController::Mppi { .. } => {
                        let planner = mppi.as_mut().expect("constructed above");
                        let chain = reference.as_ref().expect("constructed above");
                        planner.plan(&w.spec, chain, &env.vehicle_state()).to_vec()
                    }
                };
                let step = env.step(&action);
                if step.terminated || step.truncated {
                    episodes.push(step.metrics.expect("driving episodes end with metrics"));
                    break;
                }
                obs = step.obs;
            }
        }
        all_episodes.extend_from_slice(&episodes);
        per_world.push(WorldResult {
            world_seed: w.spec.seed,
            family_label: w.spec.family.label(),
            summary: MetricsSummary::from_episodes(&episodes),
        });
    }
    Ok(EvalOutcome { per_world, aggregate: MetricsSummary::from_episodes(&all_episodes) })
}

/// One line of the comparison report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub world_family: String,
    pub seed: u64,
    pub success_rate: f64,
    pub chain_progress: f64,
    pub mean_speed: f64,
}

impl EvalRow {
    pub fn new(method: &str, family: &str, seed: u64, s: &MetricsSummary) -> Self {
        EvalRow {
            method: method.to_string(),
            world_family: family.to_string(),
            seed,
            success_rate: s.success_rate,
            chain_progress: s.mean_chain_progress,
            mean_speed: s.mean_speed,
        }
    }
}

/// Write rows as CSV with the fixed column order
/// `method,world_family,seed,sr,cp,ms`. Floats use the shortest exact
/// representation, so identical results produce identical files.
pub fn write_csv(path: impl AsRef<std::path::Path>, rows: &[EvalRow]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "method,world_family,seed,sr,cp,ms")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method, r.world_family, r.seed, r.success_rate, r.chain_progress, r.mean_speed
        )?;
    }
    Ok(std::fs::write(path, out)?)
}
