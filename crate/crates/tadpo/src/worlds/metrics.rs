//! Aggregation of per-episode task metrics.

use serde::{Deserialize, Serialize};

use crate::rollout::EpisodeMetrics;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub mean_chain_progress: f64,
    pub mean_speed: f64,
    pub mean_steps: f64,
}

impl MetricsSummary {
    pub fn from_episodes(eps: &[EpisodeMetrics]) -> Self {
        if eps.is_empty() {
            return MetricsSummary::default();
        }
        let n = eps.len() as f64;
        MetricsSummary {
            episodes: eps.len(),
            success_rate: eps.iter().filter(|m| m.success).count() as f64 / n,
            collision_rate: eps.iter().filter(|m| m.collided).count() as f64 / n,
            mean_chain_progress: eps.iter().map(|m| m.chain_progress).sum::<f64>() / n,
            mean_speed: eps.iter().map(|m| m.mean_speed).sum::<f64>() / n,
            mean_steps: eps.iter().map(|m| m.steps as f64).sum::<f64>() / n,
        }
    }
}
