//! Actor-critic container: one parameter vector, named segments for the
//! actor head, critic head, and (optionally) a shared feature trunk.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::adam::OptimizerState;
use super::mlp::{Activation, MlpBinding, MlpCache, MlpSpec};
use super::params::{FreezeMask, ParameterVector, SegmentMap};
use super::policy::{diag_gaussian_entropy, diag_gaussian_logprob, GaussianHead, HeadForward};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Hidden widths of the actor-mean and critic networks.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Widths of an optional shared feature trunk; `None` keeps the actor
    /// and critic fully separate (the default).
    #[serde(default)]
    pub shared_trunk: Option<Vec<usize>>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl ModelConfig {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        ModelConfig {
            obs_dim,
            action_dim,
            hidden: default_hidden(),
            shared_trunk: None,
            activation: default_activation(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.obs_dim == 0 {
            return Err(Error::config("model.obs_dim: must be positive"));
        }
        if self.action_dim == 0 {
            return Err(Error::config("model.action_dim: must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("model.hidden: zero-width layer"));
        }
        if let Some(t) = &self.shared_trunk {
            if t.is_empty() || t.iter().any(|&h| h == 0) {
                return Err(Error::config("model.shared_trunk: must be non-empty with positive widths"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct TrunkForward {
    cache: MlpCache,
    features: Vec<f64>,
}

/// Cached policy pass: trunk features (if any) plus the Gaussian head pass.
#[derive(Clone, Debug)]
pub struct PolicyForward {
    trunk: Option<TrunkForward>,
    pub head: HeadForward,
}

impl PolicyForward {
    pub fn mean(&self) -> &[f64] {
        &self.head.mean
    }
}

/// Cached value pass.
#[derive(Clone, Debug)]
pub struct ValueForward {
    trunk: Option<TrunkForward>,
    cache: MlpCache,
    pub value: f64,
}

/// Policy and value function over one flat parameter vector.
///
/// Segment names: `trunk.*` (when a shared trunk is configured), `actor.*`
/// (mean net plus `actor.log_std`), `critic.*`. Freezing by name prefix is
/// how updates restrict themselves to one head.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub config: ModelConfig,
    pub params: ParameterVector,
    trunk: Option<MlpBinding>,
    actor: GaussianHead,
    critic: MlpBinding,
}

impl ActorCritic {
    pub fn new(config: ModelConfig, rng: &mut impl rand::Rng) -> Result<Self> {
        config.validate()?;
        let mut builder = SegmentMap::builder();
        let (trunk, feature_dim) = match &config.shared_trunk {
            Some(widths) => {
                let (hidden, out) = (widths[..widths.len() - 1].to_vec(), *widths.last().unwrap());
                let mut spec = MlpSpec::new(config.obs_dim, hidden, out);
                spec.activation = config.activation;
                (Some(MlpBinding::register(spec, "trunk", &mut builder)), out)
            }
            None => (None, config.obs_dim),
        };
        let actor = GaussianHead::register(feature_dim, &config.hidden, config.action_dim, "actor", &mut builder);
        let mut critic_spec = MlpSpec::new(feature_dim, config.hidden.clone(), 1);
        critic_spec.activation = config.activation;
        let critic = MlpBinding::register(critic_spec, "critic", &mut builder);

        let mut params = ParameterVector::zeros(builder.finish());
        let gain = 2.0_f64.sqrt();
        if let Some(t) = &trunk {
            // The trunk's "output" layer is a feature layer: same gain as hidden.
            t.init(&mut params, gain, gain, rng);
        }
        actor.init(&mut params, rng);
        critic.init(&mut params, gain, 1.0, rng);
        Ok(ActorCritic { config, params, trunk, actor, critic })
    }

    pub fn layout(&self) -> &Arc<SegmentMap> {
        self.params.layout()
    }

    fn trunk_forward(&self, obs: &[f64]) -> Option<TrunkForward> {
        self.trunk.as_ref().map(|t| {
            let cache = t.forward_cached(&self.params, obs);
            let features = cache.output().iter().map(|&z| apply_act(self.config.activation, z)).collect();
            TrunkForward { cache, features }
        })
    }

    fn trunk_backward(&self, tf: &TrunkForward, d_features: &[f64], grad: &mut ParameterVector) {
        let t = self.trunk.as_ref().expect("trunk forward implies trunk binding");
        let d_raw: Vec<f64> = d_features
            .iter()
            .zip(&tf.features)
            .map(|(d, f)| d * act_grad_from_post(self.config.activation, *f))
            .collect();
        t.backward(&self.params, &tf.cache, &d_raw, grad);
    }

    pub fn policy_forward(&self, obs: &[f64]) -> PolicyForward {
        let trunk = self.trunk_forward(obs);
        let features = trunk.as_ref().map(|t| t.features.as_slice()).unwrap_or(obs);
        let head = self.actor.forward(&self.params, features);
        PolicyForward { trunk, head }
    }

    /// Accumulate gradients for a policy-only loss with partials `d_mean`
    /// (w.r.t. the squashed mean) and `d_log_std`.
    pub fn policy_backward(&self, fwd: &PolicyForward, d_mean: &[f64], d_log_std: &[f64], grad: &mut ParameterVector) {
        let d_features = self.actor.backward(&self.params, &fwd.head, d_mean, d_log_std, grad);
        if let Some(tf) = &fwd.trunk {
            self.trunk_backward(tf, &d_features, grad);
        }
    }

    pub fn value_forward(&self, obs: &[f64]) -> ValueForward {
        let trunk = self.trunk_forward(obs);
        let features = trunk.as_ref().map(|t| t.features.as_slice()).unwrap_or(obs);
        let cache = self.critic.forward_cached(&self.params, features);
        let value = cache.output()[0];
        ValueForward { trunk, cache, value }
    }

    pub fn value_backward(&self, fwd: &ValueForward, d_value: f64, grad: &mut ParameterVector) {
        let d_features = self.critic.backward(&self.params, &fwd.cache, &[d_value], grad);
        if let Some(tf) = &fwd.trunk {
            self.trunk_backward(tf, &d_features, grad);
        }
    }

    pub fn value_of(&self, obs: &[f64]) -> f64 {
        self.value_forward(obs).value
    }

    pub fn policy_mean(&self, obs: &[f64]) -> Vec<f64> {
        self.policy_forward(obs).head.mean
    }

    /// (mean, log_std) of the action distribution at `obs`.
    pub fn dist(&self, obs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.policy_mean(obs), self.log_std().to_vec())
    }

    pub fn log_std(&self) -> &[f64] {
        self.actor.log_std(&self.params)
    }

    pub fn sample_action(&self, obs: &[f64], rng: &mut impl rand::Rng) -> (Vec<f64>, f64) {
        let trunk = self.trunk_forward(obs);
        let features = trunk.as_ref().map(|t| t.features.as_slice()).unwrap_or(obs);
        self.actor.sample(&self.params, features, rng)
    }

    pub fn logprob_entropy(&self, obs: &[f64], action: &[f64]) -> (f64, f64) {
        let fwd = self.policy_forward(obs);
        let ls = self.log_std();
        (diag_gaussian_logprob(&fwd.head.mean, ls, action), diag_gaussian_entropy(ls))
    }

    /// Mask freezing every `critic.*` segment.
    pub fn critic_mask(&self) -> FreezeMask {
        FreezeMask::freeze_prefixes(self.layout(), &["critic."])
    }

    /// Mask freezing every `actor.*` segment (and the trunk, which carries
    /// actor gradients when shared).
    pub fn actor_mask(&self) -> FreezeMask {
        FreezeMask::freeze_prefixes(self.layout(), &["actor.", "trunk."])
    }

    /// Fresh Adam state sized for this model.
    pub fn optimizer(&self, learning_rate: f64) -> OptimizerState {
        OptimizerState::new(self.params.len(), learning_rate)
    }

    /// Concatenated critic parameter bytes, for bitwise change detection.
    pub fn critic_bits(&self) -> Vec<u64> {
        let mut bits = Vec::new();
        for seg in self.layout().segments() {
            if seg.name.starts_with("critic.") {
                bits.extend(self.params.values()[seg.offset..seg.offset + seg.len].iter().map(|v| v.to_bits()));
            }
        }
        bits
    }

    pub fn save_pvec(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.params.save_pvec(path)
    }

    /// Load checkpointed parameters into a freshly built model of `config`.
    /// The file's layout must match the config's exactly.
    pub fn load_pvec(config: ModelConfig, path: impl AsRef<std::path::Path>) -> Result<Self> {
        use crate::error::Error;
        let loaded = ParameterVector::load_pvec(&path)?;
        // Seed value is irrelevant: every parameter is overwritten below.
        let mut model = ActorCritic::new(config, &mut crate::rng::stream(0, "load", 0))?;
        if model.layout().segments() != loaded.layout().segments() {
            return Err(Error::format(
                path.as_ref().display().to_string(),
                "segment layout does not match the model config",
            ));
        }
        model.params = ParameterVector::from_values(model.layout().clone(), loaded.values().to_vec())?;
        Ok(model)
    }
}

#[inline]
fn apply_act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Tanh => z.tanh(),
        Activation::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        Activation::Identity => z,
    }
}

#[inline]
fn act_grad_from_post(a: Activation, post: f64) -> f64 {
    match a {
        Activation::Tanh => 1.0 - post * post,
        Activation::Relu => {
            if post > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Identity => 1.0,
    }
}
