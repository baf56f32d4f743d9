//! Trajectory collection and return/advantage estimation.
//!
//! Conventions shared by every consumer:
//!
//! - An episode ends either *terminated* (the task itself ended: goal,
//!   collision) or *truncated* (cut off by a step cap or by the end of the
//!   collection window). Returns and advantages bootstrap the critic's value
//!   only at truncations; terminal states are worth exactly zero.
//! - Value targets are Monte-Carlo discounted returns (truncation-
//!   bootstrapped), not advantage-plus-value reconstructions.
//! - Buffers are position-indexed; the minibatch schedule is a seeded
//!   permutation partitioned into chunks, with a short final chunk when the
//!   batch size does not divide the buffer.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::ActorCritic;

/// One observation from the environment. `primary` is the view the learning
/// policy consumes; `alt` is the other view (teacher-side during student
/// training, student-side during demonstration collection) when the
/// environment exposes it.
#[derive(Clone, Debug)]
pub struct EnvObs {
    pub primary: Vec<f64>,
    pub alt: Option<Vec<f64>>,
}

impl EnvObs {
    pub fn simple(primary: Vec<f64>) -> Self {
        EnvObs { primary, alt: None }
    }
}

/// Per-episode summary computed by the environment when an episode ends.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct EpisodeMetrics {
    /// Reached the goal.
    pub success: bool,
    /// Fraction of the waypoint chain's arclength covered, in [0, 1];
    /// success pins this to 1.
    pub chain_progress: f64,
    /// Mean speed over the episode's steps.
    pub mean_speed: f64,
    pub steps: usize,
    pub collided: bool,
}

/// Result of one environment step. `obs` is the observation of the state the
/// step landed in; environments do not auto-reset, callers decide when to.
#[derive(Clone, Debug)]
pub struct EnvStep {
    pub obs: EnvObs,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// Populated on the step that ends an episode, when the environment
    /// tracks task metrics.
    pub metrics: Option<EpisodeMetrics>,
}

/// Minimal environment interface used by collection and evaluation.
pub trait Env {
    fn obs_dim(&self) -> usize;
    fn alt_obs_dim(&self) -> Option<usize> {
        None
    }
    fn action_dim(&self) -> usize;
    fn reset(&mut self) -> EnvObs;
    fn step(&mut self, action: &[f64]) -> EnvStep;
}

/// One collected step.
#[derive(Clone, Debug)]
pub struct Transition {
    /// Observation the acting policy consumed (student view in student
    /// training; see [`crate::rollout::TeacherBuffer`] for demo semantics).
    pub obs: Vec<f64>,
    /// The other view of the same state, when the environment exposes it.
    pub obs_alt: Option<Vec<f64>>,
    pub action: Vec<f64>,
    pub reward: f64,
    /// Log-probability of `action` under the policy that produced it,
    /// recorded at collection time.
    pub behavior_logprob: f64,
    /// Critic value of `obs` at collection time.
    pub value_at_collect: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// Critic value of the successor state, recorded when `truncated`;
    /// zero otherwise.
    pub trunc_bootstrap: f64,
    /// Index of the episode this step belongs to, within its buffer.
    pub episode_id: u64,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// On-policy buffer of exactly `n_steps` transitions plus derived returns
/// and advantages (after [`RolloutBuffer::finalize`]).
#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    /// Critic value of the state following the last transition when the
    /// collection window cut an episode mid-flight; zero otherwise.
    pub tail_bootstrap: f64,
    /// Metrics of episodes that completed during collection.
    pub episode_metrics: Vec<EpisodeMetrics>,
    /// Undiscounted returns of episodes that completed during collection.
    pub episode_returns: Vec<f64>,
    finalized: bool,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Compute Monte-Carlo returns and GAE advantages in place.
    pub fn finalize(&mut self, gamma: f64, lambda: f64) {
        let n = self.len();
        let mut rewards = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut terminated = Vec::with_capacity(n);
        let mut truncated = Vec::with_capacity(n);
        let mut trunc_values = Vec::with_capacity(n);
        for t in &self.transitions {
            rewards.push(t.reward);
            values.push(t.value_at_collect);
            terminated.push(t.terminated);
            truncated.push(t.truncated);
            trunc_values.push(t.trunc_bootstrap);
        }
        self.returns = returns_with_bootstraps(&rewards, &terminated, &truncated, &trunc_values, self.tail_bootstrap, gamma);
        self.advantages = gae_with_bootstraps(
            &rewards,
            &values,
            &terminated,
            &truncated,
            &trunc_values,
            self.tail_bootstrap,
            gamma,
            lambda,
        );
        self.finalized = true;
    }
}

/// Discounted Monte-Carlo returns. `dones[t]` marks a *terminal* end at `t`
/// (no bootstrap). If the sequence ends without a terminal, `bootstrap_value`
/// stands in for the value of the state after the last step.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], bootstrap_value: f64, gamma: f64) -> Vec<f64> {
    let terminated = dones.to_vec();
    let truncated = vec![false; rewards.len()];
    let trunc_values = vec![0.0; rewards.len()];
    returns_with_bootstraps(rewards, &terminated, &truncated, &trunc_values, bootstrap_value, gamma)
}

/// Returns with full boundary structure: terminal ends contribute nothing
/// beyond their reward; truncated ends bootstrap `trunc_values[t]`; a
/// sequence cut mid-episode bootstraps `tail_bootstrap`.
pub fn returns_with_bootstraps(
    rewards: &[f64],
    terminated: &[bool],
    truncated: &[bool],
    trunc_values: &[f64],
    tail_bootstrap: f64,
    gamma: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let mut out = vec![0.0; n];
    let mut running = tail_bootstrap;
    for t in (0..n).rev() {
        if terminated[t] {
            running = 0.0;
        } else if truncated[t] {
            running = trunc_values[t];
        }
        running = rewards[t] + gamma * running;
        out[t] = running;
    }
    out
}

/// Generalized advantage estimation over a sequence that may contain
/// episode boundaries. `dones[t]` marks a terminal end; `bootstrap_value`
/// is the value of the state after the last step when the sequence was cut.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let terminated = dones.to_vec();
    let truncated = vec![false; rewards.len()];
    let trunc_values = vec![0.0; rewards.len()];
    gae_with_bootstraps(rewards, values, &terminated, &truncated, &trunc_values, bootstrap_value, gamma, lambda)
}

/// GAE with the full boundary structure (terminal vs truncated vs cut tail).
/// At a terminal step the successor value is zero; at a truncated step it is
/// `trunc_values[t]`; the advantage recursion never crosses an episode end.
#[allow(clippy::too_many_arguments)]
pub fn gae_with_bootstraps(
    rewards: &[f64],
    values: &[f64],
    terminated: &[bool],
    truncated: &[bool],
    trunc_values: &[f64],
    tail_bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let (next_value, boundary) = if terminated[t] {
            (0.0, true)
        } else if truncated[t] {
            (trunc_values[t], true)
        } else if t + 1 == n {
            (tail_bootstrap, false)
        } else {
            (values[t + 1], false)
        };
        if boundary {
            carry = 0.0;
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        carry = delta + gamma * lambda * carry;
        adv[t] = carry;
    }
    adv
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizeMode {
    /// `(a - mean) / (std + 1e-8)` — the PPO convention.
    MeanAndStd,
    /// `a / (std + 1e-8)`, no centering — scale-only, sign-preserving.
    StdOnly,
}

/// Normalize a batch of advantages. Std is the population standard
/// deviation; the 1e-8 floor keeps constant batches finite.
pub fn normalize_advantages(adv: &[f64], mode: NormalizeMode) -> Vec<f64> {
    let n = adv.len().max(1) as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    match mode {
        NormalizeMode::MeanAndStd => adv.iter().map(|a| (a - mean) / denom).collect(),
        NormalizeMode::StdOnly => adv.iter().map(|a| a / denom).collect(),
    }
}

/// Seeded random partition of `0..buffer_len` into minibatches. Every index
/// appears exactly once; the last chunk may be short.
pub fn minibatch_schedule(buffer_len: usize, minibatch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    assert!(minibatch_size > 0, "minibatch_size must be positive");
    let mut order: Vec<usize> = (0..buffer_len).collect();
    order.shuffle(rng);
    order.chunks(minibatch_size).map(|c| c.to_vec()).collect()
}

/// Run `model` in `env` for exactly `n_steps` steps, starting from a fresh
/// reset. Episodes ending inside the window are followed by a reset; an
/// episode cut by the window's end is left truncated with a critic bootstrap
/// in `tail_bootstrap`.
pub fn collect_rollout(env: &mut dyn Env, model: &ActorCritic, n_steps: usize, rng: &mut impl Rng) -> RolloutBuffer {
    let mut buf = RolloutBuffer::default();
    let mut obs = env.reset();
    let mut episode_id = 0u64;
    let mut episode_return = 0.0;
    for _ in 0..n_steps {
        let (action, logprob) = model.sample_action(&obs.primary, rng);
        let value = model.value_of(&obs.primary);
        let step = env.step(&action);
        episode_return += step.reward;
        let trunc_bootstrap = if step.truncated && !step.terminated {
            model.value_of(&step.obs.primary)
        } else {
            0.0
        };
        buf.transitions.push(Transition {
            obs: obs.primary.clone(),
            obs_alt: obs.alt.clone(),
            action,
            reward: step.reward,
            behavior_logprob: logprob,
            value_at_collect: value,
            terminated: step.terminated,
            truncated: step.truncated,
            trunc_bootstrap,
            episode_id,
        });
        if step.terminated || step.truncated {
            if let Some(m) = step.metrics {
                buf.episode_metrics.push(m);
            }
            buf.episode_returns.push(episode_return);
            episode_return = 0.0;
            episode_id += 1;
            obs = env.reset();
        } else {
            obs = step.obs;
        }
    }
    if let Some(last) = buf.transitions.last() {
        if !last.done() {
            buf.tail_bootstrap = model.value_of(&obs.primary);
        }
    }
    buf
}

/// One demonstration sample as consumed by distillation losses.
#[derive(Clone, Copy, Debug)]
pub struct DemoSample<'a> {
    /// Student-view observation of the demonstrated state.
    pub obs_student: &'a [f64],
    /// Teacher-view observation the demonstrator actually consumed.
    pub obs_teacher: &'a [f64],
    pub action: &'a [f64],
    /// Log-probability of `action` under the teacher at collection time.
    pub teacher_logprob: f64,
    /// Discounted Monte-Carlo return from this state, under the teacher.
    pub return_to_go: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct DemoEpisode {
    world_index: u64,
    start: usize,
    len: usize,
}

/// Frozen buffer of successful teacher episodes. Once frozen it only hands
/// out read views; its content hash is the identity the training loop pins.
#[derive(Clone, Debug, Default)]
pub struct TeacherBuffer {
    obs_student: Vec<f64>,
    obs_teacher: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    logprobs: Vec<f64>,
    returns: Vec<f64>,
    episodes: Vec<DemoEpisode>,
    obs_student_dim: usize,
    obs_teacher_dim: usize,
    action_dim: usize,
    len: usize,
    frozen: bool,
}

const DEMO_VERSION: u64 = 1;

impl TeacherBuffer {
    pub fn new(obs_student_dim: usize, obs_teacher_dim: usize, action_dim: usize) -> Self {
        TeacherBuffer { obs_student_dim, obs_teacher_dim, action_dim, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.obs_student_dim, self.obs_teacher_dim, self.action_dim)
    }

    /// Append one successful episode: per-step student/teacher views,
    /// actions, rewards, teacher log-probs, and precomputed returns-to-go.
    #[allow(clippy::too_many_arguments)]
    pub fn push_episode(
        &mut self,
        world_index: u64,
        obs_student: &[Vec<f64>],
        obs_teacher: &[Vec<f64>],
        actions: &[Vec<f64>],
        rewards: &[f64],
        logprobs: &[f64],
        returns: &[f64],
    ) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen("teacher buffer".into()));
        }
        let n = actions.len();
        if [obs_student.len(), obs_teacher.len(), rewards.len(), logprobs.len(), returns.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::shape("episode fields have mismatched lengths"));
        }
        for (os, ot) in obs_student.iter().zip(obs_teacher) {
            if os.len() != self.obs_student_dim || ot.len() != self.obs_teacher_dim {
                return Err(Error::shape("observation dims differ from buffer dims"));
            }
        }
        let start = self.len;
        for i in 0..n {
            self.obs_student.extend_from_slice(&obs_student[i]);
            self.obs_teacher.extend_from_slice(&obs_teacher[i]);
            self.actions.extend_from_slice(&actions[i]);
            self.rewards.push(rewards[i]);
            self.logprobs.push(logprobs[i]);
            self.returns.push(returns[i]);
        }
        self.len += n;
        self.episodes.push(DemoEpisode { world_index, start, len: n });
        Ok(())
    }

    /// Drop transitions beyond `n` (trimming the final episode if it spans
    /// the cut). Used to pin the buffer to an exact size before freezing.
    pub fn truncate(&mut self, n: usize) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen("teacher buffer".into()));
        }
        if n >= self.len {
            return Ok(());
        }
        self.obs_student.truncate(n * self.obs_student_dim);
        self.obs_teacher.truncate(n * self.obs_teacher_dim);
        self.actions.truncate(n * self.action_dim);
        self.rewards.truncate(n);
        self.logprobs.truncate(n);
        self.returns.truncate(n);
        self.len = n;
        self.episodes.retain_mut(|e| {
            if e.start >= n {
                return false;
            }
            e.len = e.len.min(n - e.start);
            true
        });
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn get(&self, i: usize) -> DemoSample<'_> {
        let (ds, dt, da) = (self.obs_student_dim, self.obs_teacher_dim, self.action_dim);
        DemoSample {
            obs_student: &self.obs_student[i * ds..(i + 1) * ds],
            obs_teacher: &self.obs_teacher[i * dt..(i + 1) * dt],
            action: &self.actions[i * da..(i + 1) * da],
            teacher_logprob: self.logprobs[i],
            return_to_go: self.returns[i],
        }
    }

    /// Serialize to the columnar on-disk layout; also the hashing preimage.
    fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [
            DEMO_VERSION,
            self.len as u64,
            self.obs_student_dim as u64,
            self.obs_teacher_dim as u64,
            self.action_dim as u64,
            self.episodes.len() as u64,
        ] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for e in &self.episodes {
            b.extend_from_slice(&e.world_index.to_le_bytes());
            b.extend_from_slice(&(e.start as u64).to_le_bytes());
            b.extend_from_slice(&(e.len as u64).to_le_bytes());
        }
        for col in [&self.obs_student, &self.obs_teacher, &self.actions, &self.rewards, &self.logprobs, &self.returns] {
            for v in col {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b
    }

    /// SHA-256 of the serialized content, hex-encoded. Stable across runs
    /// and across save/load.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save_demo(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load_demo(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let display = path.as_ref().display().to_string();
        let bytes = std::fs::read(&path)?;
        let mut pos = 0usize;
        let mut next_u64 = |bytes: &[u8]| -> Result<u64> {
            if pos + 8 > bytes.len() {
                return Err(Error::format(&display, "truncated header"));
            }
            let v = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
            pos += 8;
            Ok(v)
        };
        let version = next_u64(&bytes)?;
        if version != DEMO_VERSION {
            return Err(Error::format(&display, format!("unsupported version {version}")));
        }
        let len = next_u64(&bytes)? as usize;
        let ds = next_u64(&bytes)? as usize;
        let dt = next_u64(&bytes)? as usize;
        let da = next_u64(&bytes)? as usize;
        let n_eps = next_u64(&bytes)? as usize;
        let mut episodes = Vec::with_capacity(n_eps);
        for _ in 0..n_eps {
            let world_index = next_u64(&bytes)?;
            let start = next_u64(&bytes)? as usize;
            let elen = next_u64(&bytes)? as usize;
            if start + elen > len {
                return Err(Error::format(&display, "episode range exceeds buffer"));
            }
            episodes.push(DemoEpisode { world_index, start, len: elen });
        }
        let mut pos = pos;
        let mut column = |bytes: &[u8], n: usize| -> Result<Vec<f64>> {
            if pos + 8 * n > bytes.len() {
                return Err(Error::format(&display, "truncated column"));
            }
            let col = (0..n)
                .map(|i| f64::from_le_bytes(bytes[pos + 8 * i..pos + 8 * i + 8].try_into().unwrap()))
                .collect();
            pos += 8 * n;
            Ok(col)
        };
        let obs_student = column(&bytes, len * ds)?;
        let obs_teacher = column(&bytes, len * dt)?;
        let actions = column(&bytes, len * da)?;
        let rewards = column(&bytes, len)?;
        let logprobs = column(&bytes, len)?;
        let returns = column(&bytes, len)?;
        if pos != bytes.len() {
            return Err(Error::format(&display, "trailing bytes after last column"));
        }
        Ok(TeacherBuffer {
            obs_student,
            obs_teacher,
            actions,
            rewards,
            logprobs,
            returns,
            episodes,
            obs_student_dim: ds,
            obs_teacher_dim: dt,
            action_dim: da,
            len,
            frozen: true,
        })
    }

    /// Export one JSON object per transition, in buffer order.
    pub fn export_jsonl(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (ep_idx, ep) in self.episodes.iter().enumerate() {
            for t in 0..ep.len {
                let i = ep.start + t;
                let s = self.get(i);
                let rec = serde_json::json!({
                    "episode": ep_idx,
                    "world_index": ep.world_index,
                    "t": t,
                    "obs_student": s.obs_student,
                    "obs_teacher": s.obs_teacher,
                    "action": s.action,
                    "reward": self.rewards[i],
                    "teacher_logprob": s.teacher_logprob,
                    "return_to_go": s.return_to_go,
                });
                writeln!(f, "{rec}")?;
            }
        }
        Ok(())
    }
}
