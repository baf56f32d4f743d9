//! Proximal policy optimization with a clipped surrogate.
//!
//! The per-minibatch objective (maximized) is
//! `mean min(r A, clip(r, 1-eps, 1+eps) A) - c1 * mean (V - R)^2 + c2 * mean H`,
//! with `r = exp(logp_new - logp_old)`, advantages normalized (mean and std)
//! inside each minibatch, and `R` the truncation-bootstrapped Monte-Carlo
//! return — the critic regresses on real returns, not on reconstructed
//! advantage targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::policy::{diag_gaussian_entropy, diag_gaussian_logprob, logprob_partials};
use crate::nn::{ActorCritic, OptimizerState, ParameterVector};
use crate::rng::TrainStreams;
use crate::rollout::{collect_rollout, minibatch_schedule, normalize_advantages, Env, NormalizeMode, RolloutBuffer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    /// Surrogate clip radius (eps).
    pub clip_epsilon: f64,
    /// Value-loss coefficient (c1).
    pub vf_coef: f64,
    /// Entropy-bonus coefficient (c2).
    pub entropy_coef: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Passes over the collected buffer per iteration.
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Environment steps collected per iteration.
    pub n_steps: usize,
    pub learning_rate: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            vf_coef: 0.5,
            entropy_coef: 0.001,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs: 20,
            minibatch_size: 256,
            n_steps: 2048,
            learning_rate: 3e-4,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::config("ppo.clip_epsilon: must be in (0, 1)"));
        }
        if self.vf_coef < 0.0 {
            return Err(Error::config("ppo.vf_coef: must be non-negative"));
        }
        if self.entropy_coef < 0.0 {
            return Err(Error::config("ppo.entropy_coef: must be non-negative"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("ppo.gamma: must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("ppo.gae_lambda: must be in [0, 1]"));
        }
        if self.epochs == 0 {
            return Err(Error::config("ppo.epochs: must be positive"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::config("ppo.minibatch_size: must be positive"));
        }
        if self.n_steps == 0 {
            return Err(Error::config("ppo.n_steps: must be positive"));
        }
        if self.minibatch_size > self.n_steps {
            return Err(Error::config("ppo.minibatch_size: larger than n_steps"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::config("ppo.learning_rate: must be positive"));
        }
        Ok(())
    }
}

/// A minibatch drawn from the on-policy buffer. Advantages are already in
/// the form the loss consumes (normalization applied at construction).
#[derive(Clone, Debug)]
pub struct Minibatch {
    pub obs: Vec<Vec<f64>>,
    /// Alternate-view observations of the same states, when collected.
    pub obs_alt: Option<Vec<Vec<f64>>>,
    pub actions: Vec<Vec<f64>>,
    pub old_logprobs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    /// Gather `indices` out of a finalized buffer, normalizing advantages
    /// with `mode` across exactly this minibatch.
    pub fn from_buffer(buf: &RolloutBuffer, indices: &[usize], mode: NormalizeMode) -> Self {
        assert!(buf.is_finalized(), "minibatch from an unfinalized buffer");
        let mut obs = Vec::with_capacity(indices.len());
        let mut actions = Vec::with_capacity(indices.len());
        let mut old_logprobs = Vec::with_capacity(indices.len());
        let mut advantages = Vec::with_capacity(indices.len());
        let mut returns = Vec::with_capacity(indices.len());
        let mut obs_alt = Some(Vec::with_capacity(indices.len()));
        for &i in indices {
            let t = &buf.transitions[i];
            obs.push(t.obs.clone());
            actions.push(t.action.clone());
            old_logprobs.push(t.behavior_logprob);
            advantages.push(buf.advantages[i]);
            returns.push(buf.returns[i]);
            match (&t.obs_alt, &mut obs_alt) {
                (Some(alt), Some(list)) => list.push(alt.clone()),
                _ => obs_alt = None,
            }
        }
        let advantages = normalize_advantages(&advantages, mode);
        Minibatch { obs, obs_alt, actions, old_logprobs, advantages, returns }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// Scalar diagnostics of one loss evaluation.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PpoLossDiag {
    /// Full maximized objective.
    pub objective: f64,
    /// Clipped-surrogate term.
    pub clip_loss: f64,
    /// Mean squared value error (before the c1 weight).
    pub value_loss: f64,
    /// Mean policy entropy.
    pub entropy: f64,
    /// Fraction of samples with the ratio outside the clip interval.
    pub clip_fraction: f64,
    /// `mean((r - 1) - ln r)` — a non-negative drift estimate.
    pub approx_kl: f64,
}

/// Per-sample clipped surrogate: value and the derivative w.r.t. the new
/// log-probability. The derivative is `r * A` while the unclipped branch is
/// active (`r A <= clip(r) A`), and exactly zero once `min` selects the
/// clipped branch with the ratio outside `[1-eps, 1+eps]`.
pub fn surrogate_terms(logp_new: f64, logp_old: f64, adv: f64, eps: f64) -> (f64, f64) {
    let ratio = (logp_new - logp_old).exp();
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    let surr1 = ratio * adv;
    let surr2 = clipped * adv;
    if surr1 <= surr2 {
        (surr1, ratio * adv)
    } else {
        (surr2, 0.0)
    }
}

/// Evaluate the PPO objective on a minibatch; when `grad` is given, also
/// accumulate d(objective)/d(params) into it (ascent direction).
fn eval_ppo(model: &ActorCritic, batch: &Minibatch, cfg: &PpoConfig, mut grad: Option<&mut ParameterVector>) -> PpoLossDiag {
    let n = batch.len() as f64;
    let log_std = model.log_std().to_vec();
    let entropy = diag_gaussian_entropy(&log_std);
    let mut diag = PpoLossDiag { entropy, ..Default::default() };
    for k in 0..batch.len() {
        let obs = &batch.obs[k];
        let action = &batch.actions[k];
        let fwd = model.policy_forward(obs);
        let logp_new = diag_gaussian_logprob(&fwd.head.mean, &log_std, action);
        let adv = batch.advantages[k];
        let (surr, dsurr_dlp) = surrogate_terms(logp_new, batch.old_logprobs[k], adv, cfg.clip_epsilon);
        diag.clip_loss += surr / n;
        let ratio = (logp_new - batch.old_logprobs[k]).exp();
        if (ratio - 1.0).abs() > cfg.clip_epsilon {
            diag.clip_fraction += 1.0 / n;
        }
        diag.approx_kl += ((ratio - 1.0) - (logp_new - batch.old_logprobs[k])) / n;

        let vfwd = model.value_forward(obs);
        let verr = vfwd.value - batch.returns[k];
        diag.value_loss += verr * verr / n;

        if let Some(g) = grad.as_deref_mut() {
            // Policy path: d obj / d logp = dsurr/n; entropy handled once below.
            if dsurr_dlp != 0.0 {
                let (d_mean_lp, d_ls_lp) = logprob_partials(&fwd.head.mean, &log_std, action);
                let scale = dsurr_dlp / n;
                let d_mean: Vec<f64> = d_mean_lp.iter().map(|d| d * scale).collect();
                let d_ls: Vec<f64> = d_ls_lp.iter().map(|d| d * scale).collect();
                model.policy_backward(&fwd, &d_mean, &d_ls, g);
            }
            // Value path: d obj / d V = -c1 * 2 (V - R) / n.
            model.value_backward(&vfwd, -cfg.vf_coef * 2.0 * verr / n, g);
        }
    }
    if let Some(g) = grad {
        // Entropy bonus: d H / d log_std_d = 1 per dimension, batch-constant.
        let seg = model
            .layout()
            .get("actor.log_std")
            .expect("actor.log_std segment exists");
        for i in 0..seg.len {
            g.values_mut()[seg.offset + i] += cfg.entropy_coef;
        }
    }
    diag.objective = diag.clip_loss - cfg.vf_coef * diag.value_loss + cfg.entropy_coef * diag.entropy;
    diag
}

/// Objective value only.
pub fn ppo_loss(model: &ActorCritic, batch: &Minibatch, cfg: &PpoConfig) -> PpoLossDiag {
    eval_ppo(model, batch, cfg, None)
}

/// Objective and its ascent gradient.
pub fn ppo_loss_grad(model: &ActorCritic, batch: &Minibatch, cfg: &PpoConfig) -> (PpoLossDiag, ParameterVector) {
    let mut grad = ParameterVector::zeros(model.layout().clone());
    let diag = eval_ppo(model, batch, cfg, Some(&mut grad));
    (diag, grad)
}

/// One gradient step on one minibatch. Errors (leaving parameters and
/// optimizer untouched) if the loss or gradient is non-finite.
pub fn ppo_minibatch_step(
    model: &mut ActorCritic,
    opt: &mut OptimizerState,
    batch: &Minibatch,
    cfg: &PpoConfig,
) -> Result<PpoLossDiag> {
    let (diag, mut grad) = ppo_loss_grad(model, batch, cfg);
    if !diag.objective.is_finite() {
        return Err(Error::NonFinite("ppo objective".into()));
    }
    grad.scale(-1.0); // Adam minimizes; the objective is maximized.
    opt.step(&mut model.params, &grad)?;
    Ok(diag)
}

/// Mean diagnostics over an update's minibatch steps.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub steps: usize,
    pub objective: f64,
    pub clip_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

impl UpdateStats {
    pub(crate) fn absorb(&mut self, d: &PpoLossDiag) {
        self.steps += 1;
        self.objective += d.objective;
        self.clip_loss += d.clip_loss;
        self.value_loss += d.value_loss;
        self.entropy += d.entropy;
        self.clip_fraction += d.clip_fraction;
        self.approx_kl += d.approx_kl;
    }

    pub(crate) fn finish(mut self) -> Self {
        if self.steps > 0 {
            let n = self.steps as f64;
            self.objective /= n;
            self.clip_loss /= n;
            self.value_loss /= n;
            self.entropy /= n;
            self.clip_fraction /= n;
            self.approx_kl /= n;
        }
        self
    }
}

/// One full PPO update: `epochs` reshuffled passes over the buffer. On a
/// non-finite loss or gradient anywhere, parameters and optimizer state are
/// restored to their pre-update snapshot and the error propagates.
pub fn ppo_update(
    model: &mut ActorCritic,
    opt: &mut OptimizerState,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    schedule_rng: &mut impl rand::Rng,
) -> Result<UpdateStats> {
    assert!(buffer.is_finalized(), "ppo_update needs a finalized buffer");
    let params_snapshot = model.params.clone();
    let opt_snapshot = opt.clone();
    let mut stats = UpdateStats::default();
    for _ in 0..cfg.epochs {
        let schedule = minibatch_schedule(buffer.len(), cfg.minibatch_size, schedule_rng);
        for chunk in schedule {
            let batch = Minibatch::from_buffer(buffer, &chunk, NormalizeMode::MeanAndStd);
            match ppo_minibatch_step(model, opt, &batch, cfg) {
                Ok(diag) => stats.absorb(&diag),
                Err(e) => {
                    model.params = params_snapshot.clone();
                    *opt = opt_snapshot.clone();
                    return Err(e);
                }
            }
        }
    }
    Ok(stats.finish())
}

/// Per-iteration training statistics, serialized one-per-line into the
/// stats JSONL stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterStats {
    pub iteration: usize,
    pub env_steps: usize,
    pub total_env_steps: usize,
    /// Episodes completed during this iteration's collection.
    pub episodes: usize,
    pub mean_return: Option<f64>,
    pub success_rate: Option<f64>,
    pub chain_progress: Option<f64>,
    pub mean_speed: Option<f64>,
    pub objective: f64,
    pub clip_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Student (on-policy) minibatch steps taken this iteration.
    pub student_steps: usize,
    /// Teacher (distillation) minibatch steps taken this iteration.
    pub teacher_steps: usize,
    pub tad_term: Option<f64>,
    pub tad_gated_fraction: Option<f64>,
    pub tad_clip_fraction: Option<f64>,
    /// Distillation steps skipped because their loss went non-finite.
    pub skipped_nonfinite: usize,
}

impl IterStats {
    pub(crate) fn from_buffer(iteration: usize, total_env_steps: usize, buf: &RolloutBuffer, u: &UpdateStats) -> Self {
        let eps = &buf.episode_metrics;
        let n = eps.len();
        let avg = |f: fn(&crate::rollout::EpisodeMetrics) -> f64| -> Option<f64> {
            if n == 0 {
                None
            } else {
                Some(eps.iter().map(f).sum::<f64>() / n as f64)
            }
        };
        IterStats {
            iteration,
            env_steps: buf.len(),
            total_env_steps,
            episodes: buf.episode_returns.len(),
            mean_return: if buf.episode_returns.is_empty() {
                None
            } else {
                Some(buf.episode_returns.iter().sum::<f64>() / buf.episode_returns.len() as f64)
            },
            success_rate: avg(|m| if m.success { 1.0 } else { 0.0 }),
            chain_progress: avg(|m| m.chain_progress),
            mean_speed: avg(|m| m.mean_speed),
            objective: u.objective,
            clip_loss: u.clip_loss,
            value_loss: u.value_loss,
            entropy: u.entropy,
            approx_kl: u.approx_kl,
            clip_fraction: u.clip_fraction,
            student_steps: u.steps,
            teacher_steps: 0,
            tad_term: None,
            tad_gated_fraction: None,
            tad_clip_fraction: None,
            skipped_nonfinite: 0,
        }
    }
}

/// Train `model` in `env` for `iterations` collect/update cycles.
/// `on_iter` sees the stats and the model after every iteration.
pub fn train_ppo(
    env: &mut dyn Env,
    model: &mut ActorCritic,
    cfg: &PpoConfig,
    iterations: usize,
    streams: &mut TrainStreams,
    mut on_iter: impl FnMut(&IterStats, &ActorCritic),
) -> Result<Vec<IterStats>> {
    cfg.validate()?;
    let mut opt = model.optimizer(cfg.learning_rate);
    let mut history = Vec::with_capacity(iterations);
    let mut total_env_steps = 0usize;
    for iteration in 0..iterations {
        let mut buf = collect_rollout(env, model, cfg.n_steps, &mut streams.policy);
        buf.finalize(cfg.gamma, cfg.gae_lambda);
        total_env_steps += buf.len();
        let update = ppo_update(model, &mut opt, &buf, cfg, &mut streams.schedule)?;
        let stats = IterStats::from_buffer(iteration, total_env_steps, &buf, &update);
        on_iter(&stats, model);
        history.push(stats);
    }
    Ok(history)
}
