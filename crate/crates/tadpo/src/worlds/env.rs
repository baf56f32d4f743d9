//! The driving task as a training environment.
//!
//! Actions are `[throttle, steering]` in [-1, 1]. Reward is dense progress
//! along the reference chain, a collision penalty, a smoothness penalty on
//! acceleration changes, and a success bonus inside the goal radius.
//! Episodes terminate on collision (leaving the bounds included) or
//! success, and truncate at a step cap. Resets cycle through the loaded
//! worlds in order; the dynamics are deterministic, so all training
//! stochasticity comes from the policy.

use serde::{Deserialize, Serialize};

use super::geometry::{Polyline, Vec2};
use super::vehicle::{step_vehicle, VehicleParams, VehicleState};
use super::observe::ObservationSpec;
use super::world::WorldSpec;
use crate::error::{Error, Result};
use crate::rollout::{Env, EnvObs, EnvStep, EpisodeMetrics};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub progress: f64,
    pub collision: f64,
    pub jerk: f64,
    pub success: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { progress: 1.0, collision: 50.0, jerk: 0.05, success: 100.0 }
    }
}

/// Which view the learning policy consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerView {
    Student,
    Teacher,
}

/// A world plus its cached chain geometry. `dense` is the planned path the
/// teacher view follows; worlds used only for student training can omit it.
#[derive(Clone, Debug)]
pub struct WorldInstance {
    pub spec: WorldSpec,
    pub sparse: Polyline,
    pub dense: Option<Polyline>,
}

impl WorldInstance {
    pub fn new(spec: WorldSpec) -> Self {
        let sparse = spec.chain();
        WorldInstance { spec, sparse, dense: None }
    }

    pub fn with_dense(spec: WorldSpec, dense_points: Vec<Vec2>) -> Self {
        let sparse = spec.chain();
        WorldInstance { spec, sparse, dense: Some(Polyline::new(dense_points)) }
    }
}

/// One recorded step of a driven trajectory (for rendering and analysis).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrajPoint {
    pub state: VehicleState,
    pub action: [f64; 2],
    pub reward: f64,
}

pub const DEFAULT_STEP_CAP: usize = 400;

pub struct VehicleEnv {
    worlds: Vec<WorldInstance>,
    params: VehicleParams,
    weights: RewardWeights,
    view: LearnerView,
    expose_alt: bool,
    step_cap: usize,
    teacher_spec: ObservationSpec,
    student_spec: ObservationSpec,

    world_idx: usize,
    state: VehicleState,
    steps: usize,
    prev_arc: f64,
    total_arc: f64,
    max_arc: f64,
    speed_sum: f64,
    record: bool,
    traj: Vec<TrajPoint>,
}

impl VehicleEnv {
    pub fn new(worlds: Vec<WorldInstance>, view: LearnerView, expose_alt: bool) -> Result<Self> {
        if worlds.is_empty() {
            return Err(Error::config("environment needs at least one world"));
        }
        let needs_dense = view == LearnerView::Teacher || expose_alt;
        if needs_dense {
            if let Some(i) = worlds.iter().position(|w| w.dense.is_none()) {
                return Err(Error::config(format!(
                    "teacher view requested but world {i} has no dense plan"
                )));
            }
        }
        let n = worlds.len();
        Ok(VehicleEnv {
            worlds,
            params: VehicleParams::default(),
            weights: RewardWeights::default(),
            view,
            expose_alt,
            step_cap: DEFAULT_STEP_CAP,
            teacher_spec: ObservationSpec::teacher(),
            student_spec: ObservationSpec::student(),
            world_idx: n - 1, // first reset advances to world 0
            state: VehicleState::default(),
            steps: 0,
            prev_arc: 0.0,
            total_arc: 0.0,
            max_arc: 0.0,
            speed_sum: 0.0,
            record: false,
            traj: Vec::new(),
        })
    }

    pub fn set_step_cap(&mut self, cap: usize) {
        assert!(cap > 0);
        self.step_cap = cap;
    }

    pub fn set_weights(&mut self, weights: RewardWeights) {
        self.weights = weights;
    }

    pub fn record_trajectory(&mut self, on: bool) {
        self.record = on;
    }

    pub fn trajectory(&self) -> &[TrajPoint] {
        &self.traj
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    /// The world the current episode runs in.
    pub fn current_world(&self) -> &WorldInstance {
        &self.worlds[self.world_idx]
    }

    /// All loaded worlds, in reset-cycling order.
    pub fn worlds(&self) -> &[WorldInstance] {
        &self.worlds
    }

    pub fn view(&self) -> LearnerView {
        self.view
    }

    /// Index of the current world within the loaded set.
    pub fn world_index(&self) -> usize {
        self.world_idx
    }

    /// Ground-truth vehicle state (for privileged controllers; policies see
    /// only observations).
    pub fn vehicle_state(&self) -> VehicleState {
        self.state
    }

    fn view_spec(&self, view: LearnerView) -> &ObservationSpec {
        match view {
            LearnerView::Student => &self.student_spec,
            LearnerView::Teacher => &self.teacher_spec,
        }
    }

    fn view_chain<'a>(w: &'a WorldInstance, view: LearnerView) -> &'a Polyline {
        match view {
            LearnerView::Student => &w.sparse,
            LearnerView::Teacher => w.dense.as_ref().expect("dense plan checked at construction"),
        }
    }

    fn observe(&self) -> EnvObs {
        let w = &self.worlds[self.world_idx];
        let primary = self.view_spec(self.view).build(&w.spec, Self::view_chain(w, self.view), &self.state);
        let alt = self.expose_alt.then(|| {
            let other = match self.view {
                LearnerView::Student => LearnerView::Teacher,
                LearnerView::Teacher => LearnerView::Student,
            };
            self.view_spec(other).build(&w.spec, Self::view_chain(w, other), &self.state)
        });
        EnvObs { primary, alt }
    }
}

impl Env for VehicleEnv {
    fn obs_dim(&self) -> usize {
        self.view_spec(self.view).dim()
    }

    fn alt_obs_dim(&self) -> Option<usize> {
        self.expose_alt.then(|| {
            match self.view {
                LearnerView::Student => self.teacher_spec.dim(),
                LearnerView::Teacher => self.student_spec.dim(),
            }
        })
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self) -> EnvObs {
        self.world_idx = (self.world_idx + 1) % self.worlds.len();
        let w = &self.worlds[self.world_idx];
        self.state = VehicleState::at(w.spec.start, w.spec.start_heading);
        self.steps = 0;
        self.prev_arc = w.sparse.project(self.state.position).arc;
        self.total_arc = w.sparse.length();
        self.max_arc = self.prev_arc;
        self.speed_sum = 0.0;
        self.traj.clear();
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> EnvStep {
        debug_assert_eq!(action.len(), 2);
        let w = &self.worlds[self.world_idx];
        let cap = w.spec.zone_cap(self.state.position);
        let next = step_vehicle(&self.state, action[0], action[1], &self.params, cap);

        let collided = w.spec.collision(next.position, self.params.radius);
        let success = !collided && next.position.dist(w.spec.goal()) <= w.spec.goal_radius;
        let arc = w.sparse.project(next.position).arc;
        let jerk = (next.prev_accel - self.state.prev_accel).abs();
        let reward = self.weights.progress * (arc - self.prev_arc) - self.weights.collision * f64::from(collided)
            + self.weights.success * f64::from(success)
            - self.weights.jerk * jerk;

        self.steps += 1;
        self.speed_sum += next.speed;
        self.max_arc = self.max_arc.max(arc);
        self.prev_arc = arc;
        self.state = next;
        if self.record {
            self.traj.push(TrajPoint { state: next, action: [action[0], action[1]], reward });
        }

        let terminated = collided || success;
        let truncated = !terminated && self.steps >= self.step_cap;
        let metrics = (terminated || truncated).then(|| EpisodeMetrics {
            success,
            chain_progress: if success { 1.0 } else { (self.max_arc / self.total_arc).clamp(0.0, 1.0) },
            mean_speed: self.speed_sum / self.steps as f64,
            steps: self.steps,
            collided,
        });

        EnvStep { obs: self.observe(), reward, terminated, truncated, metrics }
    }
}
