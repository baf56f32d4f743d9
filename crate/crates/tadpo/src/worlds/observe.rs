//! Observation builders for the two views of the task.
//!
//! The teacher view reads the planned dense path: speed, heading error, and
//! five upcoming path points two meters apart. The student view reads only
//! what a deployed vehicle would have: speed, heading error, the next three
//! sparse chain waypoints, and a 16-beam range scan. Both express waypoints
//! in the ego frame, scaled to roughly [-1, 1].

use serde::{Deserialize, Serialize};

use super::geometry::{Polyline, Vec2};
use super::vehicle::VehicleState;
use super::world::WorldSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub n_waypoints: usize,
    /// Arc spacing between consecutive lookahead waypoints, m.
    pub waypoint_spacing: f64,
    /// Scale for ego-frame waypoint offsets before clamping to [-1, 1].
    pub waypoint_range: f64,
    pub ray_count: usize,
    pub ray_range: f64,
    /// Scale for the speed component.
    pub speed_scale: f64,
}

impl ObservationSpec {
    /// Privileged view over the planned dense path.
    pub fn teacher() -> Self {
        ObservationSpec {
            n_waypoints: 5,
            waypoint_spacing: 2.0,
            waypoint_range: 10.0,
            ray_count: 0,
            ray_range: 15.0,
            speed_scale: 6.0,
        }
    }

    /// Deployment view: sparse waypoints plus a range scan.
    pub fn student() -> Self {
        ObservationSpec {
            n_waypoints: 3,
            waypoint_spacing: 20.0,
            waypoint_range: 60.0,
            ray_count: 16,
            ray_range: 15.0,
            speed_scale: 6.0,
        }
    }

    pub fn dim(&self) -> usize {
        3 + 2 * self.n_waypoints + self.ray_count
    }

    /// Assemble the observation of `state` following `chain` through
    /// `world`. The chain is the dense plan for the teacher view and the
    /// sparse reference chain for the student view.
    pub fn build(&self, world: &WorldSpec, chain: &Polyline, state: &VehicleState) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.dim());
        obs.push(state.speed / self.speed_scale);

        let here = chain.project(state.position);
        let target = chain.point_at_arc(here.arc + self.waypoint_spacing);
        let to_target = target.sub(state.position);
        let heading_err = if to_target.norm() < 1e-9 {
            0.0
        } else {
            wrap_angle(to_target.y.atan2(to_target.x) - state.heading)
        };
        obs.push(heading_err.sin());
        obs.push(heading_err.cos());

        for k in 1..=self.n_waypoints {
            let wp = chain.point_at_arc(here.arc + k as f64 * self.waypoint_spacing);
            let rel = wp.sub(state.position).rotate(-state.heading);
            obs.push((rel.x / self.waypoint_range).clamp(-1.0, 1.0));
            obs.push((rel.y / self.waypoint_range).clamp(-1.0, 1.0));
        }

        for i in 0..self.ray_count {
            let angle = state.heading + std::f64::consts::TAU * i as f64 / self.ray_count as f64;
            let d = world.raycast(state.position, Vec2::from_heading(angle), self.ray_range);
            obs.push(d / self.ray_range);
        }
        obs
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(std::f64::consts::TAU);
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}
