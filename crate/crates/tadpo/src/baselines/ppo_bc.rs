//! Clipped-surrogate training with a behavior-cloning regularizer: the plain
//! on-policy objective minus `beta * KL(pi(.|s) || N(teacher action, sigma))`
//! at every visited state. The teacher's action is computed by the
//! environment wrapper at collection time and rides along in the alternate
//! observation slot, so the loss needs no planner access.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::policy::{diag_gaussian_kl, kl_partials};
use crate::nn::{ActorCritic, OptimizerState, ParameterVector};
use crate::ppo::{ppo_loss_grad, IterStats, Minibatch, PpoConfig, PpoLossDiag, UpdateStats};
use crate::rng::TrainStreams;
use crate::rollout::{collect_rollout, minibatch_schedule, Env, EnvObs, EnvStep, NormalizeMode};
use crate::planners::teacher::TeacherPolicy;
use crate::worlds::env::{LearnerView, VehicleEnv, WorldInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoBcConfig {
    pub ppo: PpoConfig,
    /// Weight of the KL penalty toward the teacher (beta >= 0; zero recovers
    /// the plain update exactly).
    pub beta_kl: f64,
    /// Std of the reference Gaussian placed around the teacher's action.
    pub teacher_sigma: f64,
}

impl Default for PpoBcConfig {
    fn default() -> Self {
        PpoBcConfig { ppo: PpoConfig::default(), beta_kl: 1.0, teacher_sigma: 0.05 }
    }
}

impl PpoBcConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        if self.beta_kl < 0.0 {
            return Err(Error::config("ppo_bc.beta_kl: must be non-negative"));
        }
        if self.teacher_sigma <= 0.0 {
            return Err(Error::config("ppo_bc.teacher_sigma: must be positive"));
        }
        Ok(())
    }
}

/// Environment wrapper that rides the teacher's deterministic action along in
/// the alternate observation slot. The learner sees the student view; every
/// loaded world must carry a dense plan for the teacher to track.
pub struct TeacherActionEnv {
    inner: VehicleEnv,
    teacher: TeacherPolicy,
}

impl TeacherActionEnv {
    pub fn new(worlds: Vec<WorldInstance>, teacher: TeacherPolicy) -> Result<Self> {
        if let Some(i) = worlds.iter().position(|w| w.dense.is_none()) {
            return Err(Error::config(format!("teacher-action wrapper: world {i} has no dense plan")));
        }
        let inner = VehicleEnv::new(worlds, LearnerView::Student, false)?;
        Ok(TeacherActionEnv { inner, teacher })
    }

    pub fn inner(&self) -> &VehicleEnv {
        &self.inner
    }

    fn teacher_action(&self) -> Vec<f64> {
        let dense = self.inner.current_world().dense.as_ref().expect("dense plans checked at construction");
        self.teacher.mean(dense, &self.inner.vehicle_state(), self.inner.params()).to_vec()
    }
}

impl Env for TeacherActionEnv {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn alt_obs_dim(&self) -> Option<usize> {
        Some(2)
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn reset(&mut self) -> EnvObs {
        let mut obs = self.inner.reset();
        obs.alt = Some(self.teacher_action());
        obs
    }

    fn step(&mut self, action: &[f64]) -> EnvStep {
        let mut step = self.inner.step(action);
        step.obs.alt = Some(self.teacher_action());
        step
    }
}

/// Diagnostics of one regularized loss evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct PpoBcDiag {
    pub ppo: PpoLossDiag,
    /// Mean KL from the policy to the teacher's Gaussian over the minibatch.
    pub bc_kl: f64,
    /// The maximized total: ppo objective minus beta * bc_kl.
    pub objective: f64,
}

/// Objective and ascent gradient of the regularized loss. With `beta_kl = 0`
/// this is exactly the plain loss and gradient, bit for bit — the KL path is
/// never evaluated. Requires the minibatch to carry teacher actions in its
/// alternate-observation slot when `beta_kl > 0`.
pub fn ppo_bc_loss_grad(
    model: &ActorCritic,
    batch: &Minibatch,
    cfg: &PpoBcConfig,
) -> Result<(PpoBcDiag, ParameterVector)> {
    let (ppo, mut grad) = ppo_loss_grad(model, batch, &cfg.ppo);
    let mut diag = PpoBcDiag { ppo, bc_kl: 0.0, objective: ppo.objective };
    if cfg.beta_kl == 0.0 {
        return Ok((diag, grad));
    }
    let teacher_actions = batch
        .obs_alt
        .as_ref()
        .ok_or_else(|| Error::config("ppo_bc: minibatch has no teacher actions in obs_alt"))?;
    let n = batch.len() as f64;
    let log_std = model.log_std().to_vec();
    let teacher_ls = [cfg.teacher_sigma.ln(), cfg.teacher_sigma.ln()];
    for k in 0..batch.len() {
        let teacher_mean = &teacher_actions[k];
        if teacher_mean.len() != model.config.action_dim {
            return Err(Error::shape(format!(
                "ppo_bc: obs_alt entry has dim {}, want the action dim {}",
                teacher_mean.len(),
                model.config.action_dim
            )));
        }
        let fwd = model.policy_forward(&batch.obs[k]);
        diag.bc_kl += diag_gaussian_kl(&fwd.head.mean, &log_std, teacher_mean, &teacher_ls) / n;
        let (d_mean, d_ls) = kl_partials(&fwd.head.mean, &log_std, teacher_mean, &teacher_ls);
        // Objective subtracts beta * KL / n; ascent gradient gets the minus.
        let scale = -cfg.beta_kl / n;
        let d_mean: Vec<f64> = d_mean.iter().map(|d| d * scale).collect();
        let d_ls: Vec<f64> = d_ls.iter().map(|d| d * scale).collect();
        model.policy_backward(&fwd, &d_mean, &d_ls, &mut grad);
    }
    diag.objective = ppo.objective - cfg.beta_kl * diag.bc_kl;
    Ok((diag, grad))
}

/// Objective value only.
pub fn ppo_bc_loss(model: &ActorCritic, batch: &Minibatch, cfg: &PpoBcConfig) -> Result<PpoBcDiag> {
    ppo_bc_loss_grad(model, batch, cfg).map(|(d, _)| d)
}

/// One gradient step on one minibatch; errors (parameters untouched) on a
/// non-finite objective.
pub fn ppo_bc_minibatch_step(
    model: &mut ActorCritic,
    opt: &mut OptimizerState,
    batch: &Minibatch,
    cfg: &PpoBcConfig,
) -> Result<PpoBcDiag> {
    let (diag, mut grad) = ppo_bc_loss_grad(model, batch, cfg)?;
    if !diag.objective.is_finite() {
        return Err(Error::NonFinite("ppo_bc objective".into()));
    }
    grad.scale(-1.0);
    opt.step(&mut model.params, &grad)?;
    Ok(diag)
}

/// Train with the regularized objective for `iterations` collect/update
/// cycles. Structured exactly like the plain training loop — same stream
/// usage, same epoch/minibatch schedule, same failure handling — so that
/// `beta_kl = 0` reproduces its parameter trajectory bit for bit.
pub fn train_ppo_bc(
    env: &mut dyn Env,
    model: &mut ActorCritic,
    cfg: &PpoBcConfig,
    iterations: usize,
    streams: &mut TrainStreams,
    mut on_iter: impl FnMut(&IterStats, &ActorCritic),
) -> Result<Vec<IterStats>> {
    cfg.validate()?;
    if cfg.beta_kl > 0.0 && env.alt_obs_dim() != Some(model.config.action_dim) {
        return Err(Error::config(
            "ppo_bc: environment must expose teacher actions as the alternate observation",
        ));
    }
    let mut opt = model.optimizer(cfg.ppo.learning_rate);
    let mut history = Vec::with_capacity(iterations);
    let mut total_env_steps = 0usize;
    for iteration in 0..iterations {
        let mut buf = collect_rollout(env, model, cfg.ppo.n_steps, &mut streams.policy);
        buf.finalize(cfg.ppo.gamma, cfg.ppo.gae_lambda);
        total_env_steps += buf.len();

        let params_snapshot = model.params.clone();
        let opt_snapshot = opt.clone();
        let mut update = UpdateStats::default();
        let mut kl_sum = 0.0;
        let mut outcome = Ok(());
        'epochs: for _ in 0..cfg.ppo.epochs {
            let schedule = minibatch_schedule(buf.len(), cfg.ppo.minibatch_size, &mut streams.schedule);
            for chunk in schedule {
                let batch = Minibatch::from_buffer(&buf, &chunk, NormalizeMode::MeanAndStd);
                match ppo_bc_minibatch_step(model, &mut opt, &batch, cfg) {
                    Ok(diag) => {
                        update.absorb(&diag.ppo);
                        kl_sum += diag.bc_kl;
                    }
                    Err(e) => {
                        model.params = params_snapshot.clone();
                        opt = opt_snapshot.clone();
                        outcome = Err(e);
                        break 'epochs;
                    }
                }
            }
        }
        outcome?;
        let steps = update.steps;
        let mut stats = IterStats::from_buffer(iteration, total_env_steps, &buf, &update.finish());
        if steps > 0 {
            stats.tad_term = Some(kl_sum / steps as f64);
        }
        on_iter(&stats, model);
        history.push(stats);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, max_abs_rel_err};
    use crate::nn::ModelConfig;
    use crate::ppo::train_ppo;
    use crate::rng::stream;
    use crate::worlds::geometry::Vec2;
    use crate::worlds::world::WorldSpec;
    use rand::Rng;

    fn open_instance() -> WorldInstance {
        let spec = WorldSpec::open_course(vec![Vec2::new(0.0, 0.0), Vec2::new(60.0, 0.0)]);
        let mut pts = vec![spec.start];
        pts.extend(spec.chain().resample(2.0));
        WorldInstance::with_dense(spec, pts)
    }

    fn student_model(seed: u64) -> ActorCritic {
        let mut cfg = ModelConfig::new(25, 2);
        cfg.hidden = vec![16, 16];
        ActorCritic::new(cfg, &mut stream(seed, "model", 0)).unwrap()
    }

    fn batch_with_teacher(model: &ActorCritic, n: usize, seed: u64) -> Minibatch {
        let mut rng = stream(seed, "batch", 0);
        let mut obs = Vec::new();
        let mut obs_alt = Vec::new();
        let mut actions = Vec::new();
        let mut old_logprobs = Vec::new();
        let mut advantages = Vec::new();
        let mut returns = Vec::new();
        for _ in 0..n {
            let o: Vec<f64> = (0..model.config.obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (lp, _) = model.logprob_entropy(&o, &a);
            old_logprobs.push(lp + rng.gen_range(-0.3..0.3));
            obs.push(o);
            obs_alt.push(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            actions.push(a);
            advantages.push(rng.gen_range(-2.0..2.0));
            returns.push(rng.gen_range(-2.0..2.0));
        }
        Minibatch { obs, obs_alt: Some(obs_alt), actions, old_logprobs, advantages, returns }
    }

    #[test]
    fn config_validation() {
        assert!(PpoBcConfig::default().validate().is_ok());
        let mut bad = PpoBcConfig::default();
        bad.beta_kl = -0.1;
        assert!(bad.validate().is_err());
        let mut bad = PpoBcConfig::default();
        bad.teacher_sigma = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kl_penalty_hand_value() {
        // Zeroed parameters make the policy N(0, I) at any observation. With
        // teacher actions (1, 1) and teacher sigma 1, the per-sample KL is
        // 0.5 per dimension: mean KL exactly 1.
        let mut model = student_model(21);
        model.params.fill(0.0);
        let cfg = PpoBcConfig { beta_kl: 0.7, teacher_sigma: 1.0, ..PpoBcConfig::default() };
        let mut batch = batch_with_teacher(&model, 8, 21);
        for alt in batch.obs_alt.as_mut().unwrap() {
            *alt = vec![1.0, 1.0];
        }
        // Recompute old logprobs at the zeroed policy so ratios stay finite.
        for k in 0..batch.len() {
            batch.old_logprobs[k] = model.logprob_entropy(&batch.obs[k], &batch.actions[k]).0;
        }
        let diag = ppo_bc_loss(&model, &batch, &cfg).unwrap();
        assert!((diag.bc_kl - 1.0).abs() < 1e-12, "bc_kl {}", diag.bc_kl);
        assert!((diag.objective - (diag.ppo.objective - 0.7 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kl_vanishes_when_the_policy_matches_the_teacher() {
        let model = student_model(22);
        // teacher sigma = the policy's initial sigma (log_std starts at 0).
        let cfg = PpoBcConfig { beta_kl: 2.0, teacher_sigma: 1.0, ..PpoBcConfig::default() };
        let mut batch = batch_with_teacher(&model, 6, 22);
        let alts: Vec<Vec<f64>> = batch.obs.iter().map(|o| model.policy_mean(o)).collect();
        batch.obs_alt = Some(alts);
        let diag = ppo_bc_loss(&model, &batch, &cfg).unwrap();
        assert_eq!(diag.bc_kl, 0.0);
        assert_eq!(diag.objective, diag.ppo.objective);
    }

    #[test]
    fn beta_zero_skips_the_teacher_path_bitwise() {
        let model = student_model(23);
        let batch = batch_with_teacher(&model, 12, 23);
        let cfg0 = PpoBcConfig { beta_kl: 0.0, ..PpoBcConfig::default() };
        let (diag, grad) = ppo_bc_loss_grad(&model, &batch, &cfg0).unwrap();
        let (plain, plain_grad) = ppo_loss_grad(&model, &batch, &cfg0.ppo);
        assert_eq!(diag.objective.to_bits(), plain.objective.to_bits());
        for (a, b) in grad.values().iter().zip(plain_grad.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // And a minibatch without teacher actions is fine at beta 0 ...
        let mut bare = batch.clone();
        bare.obs_alt = None;
        assert!(ppo_bc_loss(&model, &bare, &cfg0).is_ok());
        // ... but an error at beta > 0.
        let cfg1 = PpoBcConfig { beta_kl: 0.5, ..PpoBcConfig::default() };
        assert!(ppo_bc_loss(&model, &bare, &cfg1).is_err());
    }

    #[test]
    fn regularized_gradient_matches_finite_differences() {
        let cfg = PpoBcConfig { beta_kl: 0.8, teacher_sigma: 0.05, ..PpoBcConfig::default() };
        for seed in 0..4u64 {
            let model = {
                let mut mc = ModelConfig::new(5, 2);
                mc.hidden = vec![8];
                ActorCritic::new(mc, &mut stream(seed + 70, "model", 0)).unwrap()
            };
            let batch = batch_with_teacher(&model, 10, seed + 700);
            let (_, grad) = ppo_bc_loss_grad(&model, &batch, &cfg).unwrap();
            let fd = finite_diff_grad(&model.params, 1e-6, |p| {
                let mut probe = model.clone();
                probe.params = p.clone();
                ppo_bc_loss(&probe, &batch, &cfg).unwrap().objective
            });
            let err = max_abs_rel_err(grad.values(), &fd, 1e-3);
            assert!(err < 1e-4, "seed {seed}: rel err {err}");
        }
    }

    #[test]
    fn wrapper_exposes_the_teacher_action_each_step() {
        let mut env = TeacherActionEnv::new(vec![open_instance()], TeacherPolicy::default()).unwrap();
        assert_eq!(env.alt_obs_dim(), Some(2));
        let obs = env.reset();
        let expected = {
            let dense = env.inner().current_world().dense.as_ref().unwrap();
            TeacherPolicy::default().mean(dense, &env.inner().vehicle_state(), env.inner().params())
        };
        assert_eq!(obs.alt.as_deref(), Some(&expected[..]));
        // From a standstill on a straight plan the teacher floors it.
        assert_eq!(expected[0], 1.0);
        let step = env.step(&[0.5, 0.0]);
        assert_eq!(step.obs.alt.as_ref().unwrap().len(), 2);

        let bare = WorldSpec::open_course(vec![Vec2::new(0.0, 0.0), Vec2::new(60.0, 0.0)]);
        let err = TeacherActionEnv::new(vec![WorldInstance::new(bare)], TeacherPolicy::default());
        assert!(err.is_err(), "wrapper must reject worlds without dense plans");
    }

    #[test]
    fn beta_zero_training_reproduces_the_plain_trajectory_bitwise() {
        let cfg = PpoBcConfig {
            ppo: PpoConfig { n_steps: 64, minibatch_size: 32, epochs: 2, ..PpoConfig::default() },
            beta_kl: 0.0,
            teacher_sigma: 0.05,
        };
        let run_bc = || {
            let mut env = TeacherActionEnv::new(vec![open_instance()], TeacherPolicy::default()).unwrap();
            let mut model = student_model(31);
            let mut streams = TrainStreams::new(77);
            train_ppo_bc(&mut env, &mut model, &cfg, 3, &mut streams, |_, _| {}).unwrap();
            model.params
        };
        let run_plain = || {
            let mut env = TeacherActionEnv::new(vec![open_instance()], TeacherPolicy::default()).unwrap();
            let mut model = student_model(31);
            let mut streams = TrainStreams::new(77);
            train_ppo(&mut env, &mut model, &cfg.ppo, 3, &mut streams, |_, _| {}).unwrap();
            model.params
        };
        let a = run_bc();
        let b = run_plain();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn positive_beta_pulls_the_policy_toward_the_teacher() {
        // Same worlds, same seeds: after a few iterations the regularized
        // run's policy must sit closer to the teacher action (in KL) than
        // the unregularized one at teacher-visited states.
        let mk_cfg = |beta: f64| PpoBcConfig {
            ppo: PpoConfig { n_steps: 256, minibatch_size: 64, epochs: 4, ..PpoConfig::default() },
            beta_kl: beta,
            teacher_sigma: 0.05,
        };
        let run = |beta: f64| {
            let mut env = TeacherActionEnv::new(vec![open_instance()], TeacherPolicy::default()).unwrap();
            let mut model = student_model(33);
            let mut streams = TrainStreams::new(99);
            train_ppo_bc(&mut env, &mut model, &mk_cfg(beta), 6, &mut streams, |_, _| {}).unwrap();
            model
        };
        let regular = run(4.0);
        let plain = run(0.0);

        // Probe along a fresh teacher drive.
        let teacher = TeacherPolicy::default();
        let mut env = TeacherActionEnv::new(vec![open_instance()], teacher).unwrap();
        let mut obs = env.reset();
        let (mut kl_reg, mut kl_plain) = (0.0, 0.0);
        let teacher_ls = [0.05f64.ln(), 0.05f64.ln()];
        for _ in 0..80 {
            let ta = obs.alt.clone().unwrap();
            let (mr, lr) = regular.dist(&obs.primary);
            let (mp, lp) = plain.dist(&obs.primary);
            kl_reg += diag_gaussian_kl(&mr, &lr, &ta, &teacher_ls);
            kl_plain += diag_gaussian_kl(&mp, &lp, &ta, &teacher_ls);
            let step = env.step(&ta);
            obs = if step.terminated || step.truncated { env.reset() } else { step.obs };
        }
        assert!(
            kl_reg < kl_plain,
            "regularization should cut the gap to the teacher: {kl_reg} vs {kl_plain}"
        );
    }
}
