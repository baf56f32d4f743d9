//! The demonstration teacher: a dense-plan tracking controller wrapped in a
//! narrow Gaussian so demonstrated actions carry well-defined densities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pure_pursuit::PurePursuit;
use crate::nn::policy::diag_gaussian_logprob;
use crate::rng::randn;
use crate::worlds::geometry::Polyline;
use crate::worlds::vehicle::{VehicleParams, VehicleState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherPolicy {
    pub tracker: PurePursuit,
    /// Std of the Gaussian around the tracker's action.
    pub sigma: f64,
}

impl Default for TeacherPolicy {
    fn default() -> Self {
        TeacherPolicy { tracker: PurePursuit::default(), sigma: 0.05 }
    }
}

impl TeacherPolicy {
    /// Deterministic action the tracker would take (the Gaussian's mean).
    pub fn mean(&self, plan: &Polyline, state: &VehicleState, params: &VehicleParams) -> [f64; 2] {
        self.tracker.act(plan, state, params)
    }

    pub fn log_std(&self) -> [f64; 2] {
        [self.sigma.ln(), self.sigma.ln()]
    }

    /// Density of `action` under the teacher at this state.
    pub fn logprob(&self, plan: &Polyline, state: &VehicleState, params: &VehicleParams, action: &[f64]) -> f64 {
        let mean = self.mean(plan, state, params);
        diag_gaussian_logprob(&mean, &self.log_std(), action)
    }

    /// Draw an action and its log-density.
    pub fn sample(
        &self,
        plan: &Polyline,
        state: &VehicleState,
        params: &VehicleParams,
        rng: &mut impl Rng,
    ) -> ([f64; 2], f64) {
        let mean = self.mean(plan, state, params);
        let action = [mean[0] + self.sigma * randn(rng), mean[1] + self.sigma * randn(rng)];
        let logp = diag_gaussian_logprob(&mean, &self.log_std(), &action);
        (action, logp)
    }
}
