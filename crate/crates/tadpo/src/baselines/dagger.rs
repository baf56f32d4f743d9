//! Dataset-aggregation imitation: roll out a decaying teacher/student action
//! mixture, label every visited state with the teacher's action, and refit
//! the student on the growing labeled set after each round.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::policy::{diag_gaussian_logprob, logprob_partials};
use crate::nn::{ActorCritic, OptimizerState, ParameterVector};
use crate::rng::TrainStreams;
use crate::rollout::{minibatch_schedule, Env};
use crate::worlds::env::{LearnerView, VehicleEnv};
use crate::planners::teacher::TeacherPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaggerConfig {
    pub rounds: usize,
    /// Environment steps collected (and labeled) per round.
    pub steps_per_round: usize,
    /// Probability of executing the teacher's action, one entry per round.
    /// Must be non-increasing; labels come from the teacher regardless.
    pub beta_schedule: Vec<f64>,
    /// Passes over the aggregated dataset after each round.
    pub supervised_epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
}

impl Default for DaggerConfig {
    fn default() -> Self {
        DaggerConfig {
            rounds: 10,
            steps_per_round: 2048,
            beta_schedule: halving_schedule(10),
            supervised_epochs: 10,
            minibatch_size: 256,
            learning_rate: 3e-4,
        }
    }
}

/// The conventional mixing decay 1, 1/2, 1/4, ...: round zero executes the
/// teacher everywhere, later rounds hand control to the student.
pub fn halving_schedule(rounds: usize) -> Vec<f64> {
    (0..rounds).map(|k| 0.5f64.powi(k as i32)).collect()
}

impl DaggerConfig {
    pub fn with_rounds(rounds: usize) -> Self {
        DaggerConfig { rounds, beta_schedule: halving_schedule(rounds), ..DaggerConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("dagger.rounds: must be positive"));
        }
        if self.steps_per_round == 0 {
            return Err(Error::config("dagger.steps_per_round: must be positive"));
        }
        if self.supervised_epochs == 0 {
            return Err(Error::config("dagger.supervised_epochs: must be positive"));
        }
        if self.beta_schedule.len() != self.rounds {
            return Err(Error::config(format!(
                "dagger.beta_schedule: {} entries for {} rounds",
                self.beta_schedule.len(),
                self.rounds
            )));
        }
        if self.beta_schedule.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::config("dagger.beta_schedule: values must be in [0, 1]"));
        }
        if self.beta_schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::config("dagger.beta_schedule: must be non-increasing"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::config("dagger.minibatch_size: must be positive"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::config("dagger.learning_rate: must be positive"));
        }
        Ok(())
    }
}

/// Aggregated (student observation, teacher action) pairs.
#[derive(Clone, Debug, Default)]
pub struct LabeledSet {
    pub obs: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn push(&mut self, obs: Vec<f64>, label: Vec<f64>) {
        debug_assert_eq!(self.obs.len(), self.labels.len());
        self.obs.push(obs);
        self.labels.push(label);
    }
}

/// Mean negative log-likelihood per epoch of one supervised fit.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FitStats {
    pub epoch_nll: Vec<f64>,
}

/// Fit the actor by maximum likelihood on `data`: minibatched Adam ascent on
/// `mean log pi(label | obs)`. Both the mean network and the log-std vector
/// move (the usual Gaussian MLE). Errors on a non-finite loss, leaving
/// parameters untouched for that step.
pub fn fit_gaussian_mle(
    model: &mut ActorCritic,
    opt: &mut OptimizerState,
    data: &LabeledSet,
    epochs: usize,
    minibatch_size: usize,
    rng: &mut impl Rng,
) -> Result<FitStats> {
    if data.is_empty() {
        return Err(Error::config("mle fit: empty dataset"));
    }
    let mut stats = FitStats::default();
    for _ in 0..epochs {
        let mut epoch_nll = 0.0;
        let mut seen = 0usize;
        for chunk in minibatch_schedule(data.len(), minibatch_size.min(data.len()), rng) {
            let n = chunk.len() as f64;
            let mut grad = ParameterVector::zeros(model.layout().clone());
            let log_std = model.log_std().to_vec();
            let mut batch_logp = 0.0;
            for &i in &chunk {
                let fwd = model.policy_forward(&data.obs[i]);
                batch_logp += diag_gaussian_logprob(&fwd.head.mean, &log_std, &data.labels[i]);
                let (d_mean, d_ls) = logprob_partials(&fwd.head.mean, &log_std, &data.labels[i]);
                let d_mean: Vec<f64> = d_mean.iter().map(|d| d / n).collect();
                let d_ls: Vec<f64> = d_ls.iter().map(|d| d / n).collect();
                model.policy_backward(&fwd, &d_mean, &d_ls, &mut grad);
            }
            if !batch_logp.is_finite() {
                return Err(Error::NonFinite("mle objective".into()));
            }
            grad.scale(-1.0);
            opt.step(&mut model.params, &grad)?;
            epoch_nll += -batch_logp;
            seen += chunk.len();
        }
        stats.epoch_nll.push(epoch_nll / seen as f64);
    }
    Ok(stats)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DaggerRound {
    pub round: usize,
    pub beta: f64,
    /// Aggregated dataset size after this round's collection.
    pub dataset_size: usize,
    /// Mean NLL over the final supervised epoch.
    pub mean_nll: f64,
}

#[derive(Clone, Debug, Default)]
pub struct DaggerStats {
    pub rounds: Vec<DaggerRound>,
    /// The final aggregated dataset (kept for inspection and examples).
    pub dataset: LabeledSet,
}

/// Train `model` by dataset aggregation in `env`. Per round: drive the
/// beta-mixture (teacher's deterministic action with probability beta, a
/// student sample otherwise), label every visited student observation with
/// the teacher's action at that state, then refit on everything collected so
/// far. The teacher is queried through the environment's dense plan, so every
/// loaded world must carry one.
pub fn train_dagger(
    env: &mut VehicleEnv,
    teacher: &TeacherPolicy,
    model: &mut ActorCritic,
    cfg: &DaggerConfig,
    streams: &mut TrainStreams,
) -> Result<DaggerStats> {
    cfg.validate()?;
    if env.view() != LearnerView::Student {
        return Err(Error::config("dagger: environment must expose the student view"));
    }
    if let Some(i) = env.worlds().iter().position(|w| w.dense.is_none()) {
        return Err(Error::config(format!("dagger: world {i} has no dense plan to query the teacher on")));
    }
    if model.config.obs_dim != env.obs_dim() || model.config.action_dim != env.action_dim() {
        return Err(Error::shape(format!(
            "dagger: model is {}->{}, environment needs {}->{}",
            model.config.obs_dim,
            model.config.action_dim,
            env.obs_dim(),
            env.action_dim()
        )));
    }

    let mut opt = model.optimizer(cfg.learning_rate);
    let mut stats = DaggerStats::default();
    let mut obs = env.reset();
    for (round, &beta) in cfg.beta_schedule.iter().enumerate() {
        for _ in 0..cfg.steps_per_round {
            let label = {
                let dense = env.current_world().dense.as_ref().expect("dense plans checked above");
                teacher.mean(dense, &env.vehicle_state(), env.params())
            };
            stats.dataset.push(obs.primary.clone(), label.to_vec());

            let action: Vec<f64> = if streams.decision.gen::<f64>() < beta {
                label.to_vec()
            } else {
                model.sample_action(&obs.primary, &mut streams.policy).0
            };
            let step = env.step(&action);
            obs = if step.terminated || step.truncated { env.reset() } else { step.obs };
        }
        let fit = fit_gaussian_mle(
            model,
            &mut opt,
            &stats.dataset,
            cfg.supervised_epochs,
            cfg.minibatch_size,
            &mut streams.schedule,
        )?;
        stats.rounds.push(DaggerRound {
            round,
            beta,
            dataset_size: stats.dataset.len(),
            mean_nll: *fit.epoch_nll.last().expect("supervised_epochs >= 1"),
        });
    }
    Ok(stats)
}
