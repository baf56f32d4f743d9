//! Experiment configuration: what to run, on which worlds, with which
//! hyperparameters, and where the artifacts go. Configs are plain JSON;
//! parsing is strict (unknown keys are errors) and `parse → serialize →
//! parse` is an identity.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::dagger::DaggerConfig;
use crate::baselines::ppo_bc::PpoBcConfig;
use crate::error::{Error, Result};
use crate::planners::demos::DemoConfig;
use crate::planners::mppi::MppiConfig;
use crate::ppo::PpoConfig;
use crate::tadpo::TadpoConfig;
use crate::worlds::world::WorldFamily;

use super::hashing::sha256_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ppo,
    Tadpo,
    Dagger,
    PpoBc,
    MppiDirect,
    PurePursuit,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ppo => "ppo",
            Method::Tadpo => "tadpo",
            Method::Dagger => "dagger",
            Method::PpoBc => "ppo_bc",
            Method::MppiDirect => "mppi_direct",
            Method::PurePursuit => "pure_pursuit",
        }
    }

    /// Whether the method has a training stage (the planners do not).
    pub fn is_trained(self) -> bool {
        !matches!(self, Method::MppiDirect | Method::PurePursuit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSelection {
    pub family: WorldFamily,
    /// Hazard-count scale, in (0, 1].
    pub difficulty: f64,
    /// World-generator seeds; each seed is one course. Must respect the
    /// role partition of the operation consuming it.
    pub seeds: Vec<u64>,
}

/// One experiment: a method, a world selection, a budget, and optional
/// hyperparameter blocks. Blocks that are omitted fall back to defaults;
/// a block for a *different* trained method is rejected rather than ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub worlds: WorldSelection,
    /// Master seed; every stream in the run derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Training iterations (distillation/update iterations, or rounds for
    /// the imitation baseline). Zero trains nothing and checkpoints the
    /// initialization.
    #[serde(default)]
    pub budget: usize,
    /// Artifact directory; relative paths land under the output root.
    pub out_dir: PathBuf,
    /// Episodes per world during evaluation.
    #[serde(default = "default_episodes")]
    pub episodes_per_world: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppo: Option<PpoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tadpo: Option<TadpoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dagger: Option<DaggerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppo_bc: Option<PpoBcConfig>,
    /// Planner parameters, used both by the direct-planner method and by
    /// dense-path synthesis for any operation that needs privileged plans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mppi: Option<MppiConfig>,
    /// Demonstration-collection parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demos: Option<DemoConfig>,
}

fn default_episodes() -> usize {
    1
}

impl ExperimentConfig {
    /// A minimal valid config for `method` on `family`.
    pub fn new(method: Method, family: WorldFamily, seeds: Vec<u64>, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            method,
            worlds: WorldSelection { family, difficulty: 0.5, seeds },
            seed: 0,
            budget: 0,
            out_dir: out_dir.into(),
            episodes_per_world: default_episodes(),
            ppo: None,
            tadpo: None,
            dagger: None,
            ppo_bc: None,
            mppi: None,
            demos: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.worlds.seeds.is_empty() {
            return Err(Error::config("worlds.seeds: must list at least one world"));
        }
        if !(self.worlds.difficulty > 0.0 && self.worlds.difficulty <= 1.0) {
            return Err(Error::config("worlds.difficulty: must be in (0, 1]"));
        }
        if self.episodes_per_world == 0 {
            return Err(Error::config("episodes_per_world: must be positive"));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::config("out_dir: must not be empty"));
        }
        // Exactly the matching trained-method block may be present.
        let blocks: [(&str, bool, Method); 4] = [
            ("ppo", self.ppo.is_some(), Method::Ppo),
            ("tadpo", self.tadpo.is_some(), Method::Tadpo),
            ("dagger", self.dagger.is_some(), Method::Dagger),
            ("ppo_bc", self.ppo_bc.is_some(), Method::PpoBc),
        ];
        for (name, present, owner) in blocks {
            if present && self.method != owner {
                return Err(Error::config(format!(
                    "{name}: config block does not apply to method {}",
                    self.method.label()
                )));
            }
        }
        if let Some(p) = &self.ppo {
            p.validate()?;
        }
        if let Some(t) = &self.tadpo {
            t.validate()?;
        }
        if let Some(d) = &self.dagger {
            d.validate()?;
            if d.rounds != self.budget {
                return Err(Error::config("dagger.rounds: must equal the budget"));
            }
        }
        if let Some(b) = &self.ppo_bc {
            b.validate()?;
        }
        if let Some(m) = &self.mppi {
            if m.samples == 0 || m.horizon == 0 {
                return Err(Error::config("mppi: samples and horizon must be positive"));
            }
        }
        Ok(())
    }

    /// Hyperparameters each operation actually consumes, defaulted when the
    /// block is absent.
    pub fn ppo_params(&self) -> PpoConfig {
        self.ppo.clone().unwrap_or_default()
    }

    pub fn tadpo_params(&self) -> TadpoConfig {
        self.tadpo.clone().unwrap_or_default()
    }

    pub fn dagger_params(&self) -> DaggerConfig {
        self.dagger.clone().unwrap_or_else(|| DaggerConfig::with_rounds(self.budget))
    }

    pub fn ppo_bc_params(&self) -> PpoBcConfig {
        self.ppo_bc.clone().unwrap_or_default()
    }

    pub fn mppi_params(&self) -> MppiConfig {
        self.mppi.unwrap_or_default()
    }

    pub fn demo_params(&self) -> DemoConfig {
        self.demos.unwrap_or_default()
    }

    /// Parse and validate a config file. Parse failures carry the file path
    /// and serde's line/column diagnostics.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.canonical_json())?)
    }

    /// Canonical serialization: field order is fixed by the struct, floats
    /// print shortest-exact. Equal configs always serialize identically.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Digest identifying the experiment (seed and hyperparameters included,
    /// output location included — it names the run, not just the math).
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}
