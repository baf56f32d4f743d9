//! Teacher action distillation layered on PPO.
//!
//! Alongside the on-policy PPO steps, the trainer takes distillation steps
//! on minibatches drawn from a frozen buffer of successful teacher episodes.
//! The distillation objective (maximized) is
//!
//! `L = mean_k max(0, min(rho_k, 1 + eps_mu) * dhat_k) + c2 * H`
//!
//! with `rho_k = pi(a_k | s_k) / mu_k` the student-over-teacher probability
//! ratio at the demonstrated action (student view), and `dhat_k = R_k -
//! V_old(s_k)` the teacher's return-to-go minus the *iteration-start* critic
//! — normalized per minibatch by its standard deviation only, so the sign of
//! every estimate survives. Gradients flow through `rho` (and the entropy
//! bonus) alone: the return is data and the critic is a frozen snapshot, so
//! a distillation step can move only the actor. The live critic is
//! additionally masked out of the optimizer to keep that guarantee bitwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::policy::{diag_gaussian_entropy, diag_gaussian_logprob, logprob_partials};
use crate::nn::{ActorCritic, OptimizerState, ParameterVector};
use crate::ppo::{ppo_minibatch_step, IterStats, Minibatch, PpoConfig, UpdateStats};
use crate::rng::TrainStreams;
use crate::rollout::{collect_rollout, minibatch_schedule, normalize_advantages, Env, NormalizeMode, TeacherBuffer};

/// Log-ratio clamp radius: `rho = exp(clamp(logpi - logmu, ±30))`, keeping
/// the ratio finite (and its gradient zero) for wildly mismatched pairs.
pub const RHO_LOG_CLAMP: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TadpoConfig {
    /// One-sided ratio ceiling (eps_mu): distillation pressure saturates at
    /// `rho = 1 + eps_mu`.
    pub epsilon_mu: f64,
    /// Probability that an update step is a distillation step (p).
    pub teacher_prob: f64,
    /// Entropy bonus on distillation steps (c2).
    pub entropy_coef: f64,
    /// Capacity of the frozen teacher buffer (N_mu).
    pub teacher_buffer_size: usize,
    pub ppo: PpoConfig,
}

impl Default for TadpoConfig {
    fn default() -> Self {
        TadpoConfig {
            epsilon_mu: 0.5,
            teacher_prob: 0.5,
            entropy_coef: 0.001,
            teacher_buffer_size: 100_000,
            ppo: PpoConfig::default(),
        }
    }
}

impl TadpoConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        if !(self.epsilon_mu > 0.0 && self.epsilon_mu.is_finite()) {
            return Err(Error::config("tadpo.epsilon_mu: must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.teacher_prob) {
            return Err(Error::config("tadpo.teacher_prob: must be in [0, 1]"));
        }
        if self.entropy_coef < 0.0 {
            return Err(Error::config("tadpo.entropy_coef: must be non-negative"));
        }
        if self.teacher_buffer_size == 0 {
            return Err(Error::config("tadpo.teacher_buffer_size: must be positive"));
        }
        Ok(())
    }
}

/// Student-over-teacher probability ratio at a demonstrated (state, action)
/// pair. Returns the ratio and whether the log-ratio hit the clamp.
pub fn rho(model: &ActorCritic, teacher_logprob: f64, obs_student: &[f64], action: &[f64]) -> (f64, bool) {
    let (logpi, _) = model.logprob_entropy(obs_student, action);
    let diff = logpi - teacher_logprob;
    let clamped = diff.abs() >= RHO_LOG_CLAMP;
    (diff.clamp(-RHO_LOG_CLAMP, RHO_LOG_CLAMP).exp(), clamped)
}

/// Teacher's return-to-go minus the iteration-start critic's estimate at the
/// student view of the demonstrated state.
pub fn delta_hat(return_to_go: f64, value_snapshot: &ActorCritic, obs_student: &[f64]) -> f64 {
    return_to_go - value_snapshot.value_of(obs_student)
}

/// Minibatch gathered from the frozen teacher buffer.
#[derive(Clone, Debug)]
pub struct TeacherMinibatch {
    pub obs_student: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub teacher_logprobs: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TeacherMinibatch {
    pub fn gather(buffer: &TeacherBuffer, indices: &[usize]) -> Self {
        let mut obs_student = Vec::with_capacity(indices.len());
        let mut actions = Vec::with_capacity(indices.len());
        let mut teacher_logprobs = Vec::with_capacity(indices.len());
        let mut returns = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = buffer.get(i);
            obs_student.push(s.obs_student.to_vec());
            actions.push(s.action.to_vec());
            teacher_logprobs.push(s.teacher_logprob);
            returns.push(s.return_to_go);
        }
        TeacherMinibatch { obs_student, actions, teacher_logprobs, returns }
    }

    pub fn len(&self) -> usize {
        self.obs_student.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs_student.is_empty()
    }
}

/// Diagnostics of one distillation-loss evaluation.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct TadLossDiag {
    /// Full maximized objective (`mean_term + c2 * entropy`).
    pub objective: f64,
    /// The gated, clipped ratio-times-advantage term.
    pub mean_term: f64,
    pub entropy: f64,
    /// Fraction of samples gated off by a non-positive advantage estimate.
    pub gated_fraction: f64,
    /// Fraction of samples whose ratio sat at or above `1 + eps_mu`.
    pub clip_fraction: f64,
    /// Samples whose log-ratio hit the hard clamp.
    pub clamp_hits: usize,
    /// Std of the raw advantage estimates in this minibatch.
    pub delta_std: f64,
}

fn eval_tad(
    model: &ActorCritic,
    snapshot: &ActorCritic,
    batch: &TeacherMinibatch,
    cfg: &TadpoConfig,
    mut grad: Option<&mut ParameterVector>,
) -> TadLossDiag {
    let n = batch.len() as f64;
    let log_std = model.log_std().to_vec();
    let entropy = diag_gaussian_entropy(&log_std);
    // Advantage estimates against the frozen iteration-start critic,
    // scale-normalized (std only — signs must survive).
    let deltas: Vec<f64> = batch
        .obs_student
        .iter()
        .zip(&batch.returns)
        .map(|(obs, r)| delta_hat(*r, snapshot, obs))
        .collect();
    let mean_d = deltas.iter().sum::<f64>() / n;
    let delta_std = (deltas.iter().map(|d| (d - mean_d) * (d - mean_d)).sum::<f64>() / n).sqrt();
    let normalized = normalize_advantages(&deltas, NormalizeMode::StdOnly);

    let mut diag = TadLossDiag { entropy, delta_std, ..Default::default() };
    let ceiling = 1.0 + cfg.epsilon_mu;
    for k in 0..batch.len() {
        let obs = &batch.obs_student[k];
        let action = &batch.actions[k];
        let fwd = model.policy_forward(obs);
        let logpi = diag_gaussian_logprob(&fwd.head.mean, &log_std, action);
        let diff = logpi - batch.teacher_logprobs[k];
        let clamped = diff.abs() >= RHO_LOG_CLAMP;
        if clamped {
            diag.clamp_hits += 1;
        }
        let rho_k = diff.clamp(-RHO_LOG_CLAMP, RHO_LOG_CLAMP).exp();
        let dhat = normalized[k];
        if dhat <= 0.0 {
            diag.gated_fraction += 1.0 / n;
            continue; // max(0, ·) kills both the value and the gradient
        }
        if rho_k >= ceiling {
            diag.clip_fraction += 1.0 / n;
        }
        diag.mean_term += rho_k.min(ceiling) * dhat / n;
        if let Some(g) = grad.as_deref_mut() {
            // d term / d logpi = rho * dhat while the ratio is below the
            // ceiling and off the clamp; zero otherwise.
            if rho_k < ceiling && !clamped {
                let scale = rho_k * dhat / n;
                let (d_mean_lp, d_ls_lp) = logprob_partials(&fwd.head.mean, &log_std, action);
                let d_mean: Vec<f64> = d_mean_lp.iter().map(|d| d * scale).collect();
                let d_ls: Vec<f64> = d_ls_lp.iter().map(|d| d * scale).collect();
                model.policy_backward(&fwd, &d_mean, &d_ls, g);
            }
        }
    }
    if let Some(g) = grad {
        let seg = model.layout().get("actor.log_std").expect("actor.log_std segment exists");
        for i in 0..seg.len {
            g.values_mut()[seg.offset + i] += cfg.entropy_coef;
        }
    }
    diag.objective = diag.mean_term + cfg.entropy_coef * diag.entropy;
    diag
}

/// Distillation objective value only.
pub fn tad_loss(model: &ActorCritic, snapshot: &ActorCritic, batch: &TeacherMinibatch, cfg: &TadpoConfig) -> TadLossDiag {
    eval_tad(model, snapshot, batch, cfg, None)
}

/// Distillation objective and its ascent gradient. The gradient is exactly
/// zero on every critic coordinate: nothing in the objective touches the
/// live critic.
pub fn tad_loss_grad(
    model: &ActorCritic,
    snapshot: &ActorCritic,
    batch: &TeacherMinibatch,
    cfg: &TadpoConfig,
) -> (TadLossDiag, ParameterVector) {
    let mut grad = ParameterVector::zeros(model.layout().clone());
    let diag = eval_tad(model, snapshot, batch, cfg, Some(&mut grad));
    (diag, grad)
}

/// One distillation step. The critic is masked out of the optimizer, so its
/// parameters and moments stay bit-identical. A non-finite loss or gradient
/// leaves everything untouched and errors (callers skip-and-count).
pub fn tadpo_update(
    model: &mut ActorCritic,
    opt: &mut OptimizerState,
    snapshot: &ActorCritic,
    batch: &TeacherMinibatch,
    cfg: &TadpoConfig,
) -> Result<TadLossDiag> {
    let (diag, mut grad) = tad_loss_grad(model, snapshot, batch, cfg);
    if !diag.objective.is_finite() {
        return Err(Error::NonFinite("distillation objective".into()));
    }
    grad.scale(-1.0);
    let mask = model.critic_mask();
    opt.step_masked(&mut model.params, &grad, Some(&mask))?;
    Ok(diag)
}

/// Without-replacement sampler over the teacher buffer: a shuffled pass,
/// reshuffled when exhausted, with the cursor reset at each epoch.
#[derive(Clone, Debug)]
pub struct TeacherSampler {
    order: Vec<usize>,
    cursor: usize,
}

impl TeacherSampler {
    pub fn new(len: usize) -> Self {
        TeacherSampler { order: (0..len).collect(), cursor: 0 }
    }

    /// Start a fresh shuffled pass.
    pub fn reset(&mut self, rng: &mut impl rand::Rng) {
        use rand::seq::SliceRandom;
        self.order.shuffle(rng);
        self.cursor = 0;
    }

    /// Draw `n` indices, reshuffling mid-draw if the pass runs out.
    pub fn draw(&mut self, n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.cursor == self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            let take = (n - out.len()).min(self.order.len() - self.cursor);
            out.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        out
    }
}

struct TadAccum {
    steps: usize,
    mean_term: f64,
    gated: f64,
    clipped: f64,
    skipped: usize,
}

/// Train with interleaved PPO and distillation steps.
///
/// Each iteration: snapshot the model, collect `n_steps` on-policy, then for
/// each of `epochs` passes walk the student minibatch schedule; before every
/// step draw `r ~ U(0,1)` from the decision stream and take a distillation
/// step when `r < p` (not consuming the student schedule), a PPO step
/// otherwise. At `p = 0` no decision is ever drawn and the loop is
/// bit-identical to [`crate::ppo::train_ppo`]; at `p = 1` every step is a
/// distillation step and the student schedule is consumed for loop control
/// only, so an epoch is exactly `schedule.len()` distillation steps.
pub fn train_tadpo(
    env: &mut dyn Env,
    model: &mut ActorCritic,
    teacher: &TeacherBuffer,
    cfg: &TadpoConfig,
    iterations: usize,
    streams: &mut TrainStreams,
    mut on_iter: impl FnMut(&IterStats, &ActorCritic),
) -> Result<Vec<IterStats>> {
    cfg.validate()?;
    let uses_teacher = cfg.teacher_prob > 0.0;
    if uses_teacher {
        if teacher.is_empty() {
            return Err(Error::config("tadpo.teacher_prob > 0 with an empty teacher buffer"));
        }
        if !teacher.is_frozen() {
            return Err(Error::config("teacher buffer must be frozen before training"));
        }
        let (ds, _, da) = teacher.dims();
        if ds != model.config.obs_dim || da != model.config.action_dim {
            return Err(Error::config(format!(
                "teacher buffer dims ({ds} obs, {da} act) do not match the model ({}, {})",
                model.config.obs_dim, model.config.action_dim
            )));
        }
    }
    let teacher_hash_start = uses_teacher.then(|| teacher.content_hash());

    let mut opt = model.optimizer(cfg.ppo.learning_rate);
    let mut sampler = TeacherSampler::new(teacher.len());
    let mut history = Vec::with_capacity(iterations);
    let mut total_env_steps = 0usize;

    for iteration in 0..iterations {
        let snapshot = model.clone();
        let mut buf = collect_rollout(env, model, cfg.ppo.n_steps, &mut streams.policy);
        buf.finalize(cfg.ppo.gamma, cfg.ppo.gae_lambda);
        total_env_steps += buf.len();

        let params_snapshot = model.params.clone();
        let opt_snapshot = opt.clone();
        let mut ppo_stats = UpdateStats::default();
        let mut tad = TadAccum { steps: 0, mean_term: 0.0, gated: 0.0, clipped: 0.0, skipped: 0 };

        'epochs: for _ in 0..cfg.ppo.epochs {
            let schedule = minibatch_schedule(buf.len(), cfg.ppo.minibatch_size, &mut streams.schedule);
            if uses_teacher {
                sampler.reset(&mut streams.teacher_pool);
            }
            let mut si = 0usize;
            while si < schedule.len() {
                use rand::Rng;
                let teacher_turn = uses_teacher && streams.decision.gen::<f64>() < cfg.teacher_prob;
                if teacher_turn {
                    let indices = sampler.draw(cfg.ppo.minibatch_size, &mut streams.teacher_pool);
                    let batch = TeacherMinibatch::gather(teacher, &indices);
                    match tadpo_update(model, &mut opt, &snapshot, &batch, cfg) {
                        Ok(d) => {
                            tad.steps += 1;
                            tad.mean_term += d.mean_term;
                            tad.gated += d.gated_fraction;
                            tad.clipped += d.clip_fraction;
                        }
                        Err(Error::NonFinite(_)) => tad.skipped += 1,
                        Err(e) => return Err(e),
                    }
                    if cfg.teacher_prob >= 1.0 {
                        // Degenerate p = 1: the student schedule only bounds
                        // the epoch; consume it without training on it.
                        si += 1;
                    }
                } else {
                    let batch = Minibatch::from_buffer(&buf, &schedule[si], NormalizeMode::MeanAndStd);
                    match ppo_minibatch_step(model, &mut opt, &batch, &cfg.ppo) {
                        Ok(d) => ppo_stats.absorb(&d),
                        Err(e) => {
                            model.params = params_snapshot.clone();
                            opt = opt_snapshot.clone();
                            let _ = e;
                            break 'epochs;
                        }
                    }
                    si += 1;
                }
            }
        }

        let mut stats = IterStats::from_buffer(iteration, total_env_steps, &buf, &ppo_stats.finish());
        stats.teacher_steps = tad.steps;
        stats.skipped_nonfinite = tad.skipped;
        if tad.steps > 0 {
            let n = tad.steps as f64;
            stats.tad_term = Some(tad.mean_term / n);
            stats.tad_gated_fraction = Some(tad.gated / n);
            stats.tad_clip_fraction = Some(tad.clipped / n);
        }
        on_iter(&stats, model);
        history.push(stats);
    }

    if let Some(h0) = teacher_hash_start {
        debug_assert_eq!(h0, teacher.content_hash(), "teacher buffer mutated during training");
    }
    Ok(history)
}
