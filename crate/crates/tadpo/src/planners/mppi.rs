//! Sampling-based model-predictive control.
//!
//! Each planning cycle rolls `samples` control sequences of length `horizon`
//! through the true vehicle model (sample 0 is the noise-free warm start,
//! the rest perturb it with Gaussian noise), scores them against the world,
//! and executes the head of the exponentially weighted average. The solved
//! sequence, shifted by one step, warm-starts the next cycle. The budget —
//! `samples * horizon` model evaluations per control step — is the knob that
//! trades plan quality against planning time.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{randn, stream};
use crate::worlds::geometry::Polyline;
use crate::worlds::vehicle::{step_vehicle, VehicleParams, VehicleState};
use crate::worlds::world::WorldSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiConfig {
    pub samples: usize,
    pub horizon: usize,
    /// Refinement passes per control step (each re-samples around the
    /// current solution).
    pub iterations: usize,
    /// Softmax temperature over trajectory costs.
    pub lambda: f64,
    pub noise_throttle: f64,
    pub noise_steering: f64,
    /// Step-to-step correlation of the exploration noise. Sustained
    /// maneuvers — a swerve through a gap — need correlated perturbations;
    /// independent per-step noise almost never holds a direction.
    pub noise_correlation: f64,
    /// Cruise speed the cost prefers, m/s.
    pub v_target: f64,
    pub w_progress: f64,
    pub w_lateral: f64,
    pub w_clearance: f64,
    pub w_speed: f64,
    pub w_effort: f64,
    /// Cost of a colliding rollout step (rollout stops there).
    pub w_collision: f64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            samples: 192,
            horizon: 32,
            iterations: 2,
            lambda: 10.0,
            noise_throttle: 0.4,
            noise_steering: 0.6,
            noise_correlation: 0.75,
            v_target: 4.0,
            w_progress: 12.0,
            w_lateral: 0.3,
            w_clearance: 2.0,
            w_speed: 0.5,
            w_effort: 0.01,
            w_collision: 1e4,
        }
    }
}

impl MppiConfig {
    /// Model evaluations per control step.
    pub fn budget(&self) -> usize {
        self.samples * self.horizon
    }

    /// Same planner with `samples` and `horizon` divided by `f` (floored at
    /// 1): a `f*f`-times cheaper planning budget.
    pub fn scaled_down(&self, f: usize) -> Self {
        MppiConfig { samples: (self.samples / f).max(1), horizon: (self.horizon / f).max(1), ..*self }
    }
}

pub struct MppiController {
    pub cfg: MppiConfig,
    params: VehicleParams,
    warm: Vec<[f64; 2]>,
    rng: ChaCha8Rng,
}

impl MppiController {
    pub fn new(cfg: MppiConfig, params: VehicleParams, seed: u64) -> Self {
        let warm = vec![[0.5, 0.0]; cfg.horizon];
        MppiController { cfg, params, warm, rng: stream(seed, "mppi", 0) }
    }

    /// Score one control sequence from `state`.
    fn rollout_cost(&self, world: &WorldSpec, chain: &Polyline, state: &VehicleState, controls: &[[f64; 2]]) -> f64 {
        let c = &self.cfg;
        let mut cost = 0.0;
        let mut s = *state;
        let mut prev_arc = chain.project(s.position).arc;
        for u in controls {
            let cap = world.zone_cap(s.position);
            s = step_vehicle(&s, u[0], u[1], &self.params, cap);
            if world.collision(s.position, self.params.radius) {
                cost += c.w_collision;
                break;
            }
            let proj = chain.project(s.position);
            cost -= c.w_progress * (proj.arc - prev_arc);
            prev_arc = proj.arc;
            cost += c.w_lateral * proj.distance * proj.distance;
            let safe = (world.clearance(s.position) - self.params.radius).max(0.25);
            cost += c.w_clearance / safe;
            let dv = s.speed - c.v_target;
            cost += c.w_speed * dv * dv;
            cost += c.w_effort * (u[0] * u[0] + u[1] * u[1]);
        }
        cost
    }

    /// One correlated perturbation of the current solution.
    fn sample_sequence(&mut self) -> Vec<[f64; 2]> {
        let c = self.cfg;
        let rho = c.noise_correlation.clamp(0.0, 0.999);
        let fresh = (1.0 - rho * rho).sqrt();
        let mut e = [c.noise_throttle * randn(&mut self.rng), c.noise_steering * randn(&mut self.rng)];
        let mut seq = Vec::with_capacity(self.warm.len());
        for u in &self.warm {
            seq.push([(u[0] + e[0]).clamp(-1.0, 1.0), (u[1] + e[1]).clamp(-1.0, 1.0)]);
            e[0] = rho * e[0] + fresh * c.noise_throttle * randn(&mut self.rng);
            e[1] = rho * e[1] + fresh * c.noise_steering * randn(&mut self.rng);
        }
        seq
    }

    /// Plan from `state` and return the control to execute now.
    pub fn plan(&mut self, world: &WorldSpec, chain: &Polyline, state: &VehicleState) -> [f64; 2] {
        let c = self.cfg;
        for _ in 0..c.iterations.max(1) {
            // Sample 0 re-scores the running solution noise-free.
            let mut seqs: Vec<Vec<[f64; 2]>> = Vec::with_capacity(c.samples);
            seqs.push(self.warm.clone());
            for _ in 1..c.samples {
                seqs.push(self.sample_sequence());
            }

            let costs: Vec<f64> = seqs.iter().map(|seq| self.rollout_cost(world, chain, state, seq)).collect();
            let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut total = 0.0;
            let mut avg = vec![[0.0f64; 2]; c.horizon];
            for (seq, &cost) in seqs.iter().zip(&costs) {
                let w = (-(cost - min) / c.lambda).exp();
                total += w;
                for (a, u) in avg.iter_mut().zip(seq) {
                    a[0] += w * u[0];
                    a[1] += w * u[1];
                }
            }
            for a in &mut avg {
                a[0] /= total;
                a[1] /= total;
            }
            self.warm = avg;
        }

        // Execute the head; the shifted tail seeds the next cycle.
        let head = self.warm[0];
        self.warm.remove(0);
        let last = self.warm.last().copied().unwrap_or(head);
        self.warm.push(last);
        head
    }

    /// Forget the warm start (new episode).
    pub fn reset(&mut self) {
        self.warm = vec![[0.5, 0.0]; self.cfg.horizon];
    }
}
