//! Path synthesis: drive the world once with the sampling planner, then
//! distill the driven trajectory into a regularly spaced waypoint plan.

use serde::{Deserialize, Serialize};

use super::mppi::{MppiConfig, MppiController};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::worlds::geometry::{Polyline, Vec2};
use crate::worlds::vehicle::{step_vehicle, VehicleParams, VehicleState};
use crate::worlds::world::WorldSpec;

/// Waypoints every `spacing` meters along a driven, collision-checked path
/// from start to goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensePlan {
    pub waypoints: Vec<Vec2>,
    pub spacing: f64,
}

impl DensePlan {
    pub fn polyline(&self) -> Polyline {
        Polyline::new(self.waypoints.clone())
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, serde_json::to_string_pretty(self)?)?)
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Reference-chain waypoints at regular spacing (the deployment-side route
/// handed to the student's observation).
pub fn sparse_waypoints(spec: &WorldSpec, spacing: f64) -> Vec<Vec2> {
    spec.chain().resample(spacing)
}

/// Privileged global route for the planner: the reference chain, warped
/// laterally so it threads every wall's gap. A triangular offset profile
/// peaks at the gap center on the wall line and fades to the chain within
/// six meters of arc on either side. The local planner still owns dynamics,
/// slow zones, and clearance — the guide only settles *which* gap to take.
pub fn guide_chain(spec: &WorldSpec) -> Polyline {
    let chain = spec.chain();
    let mut arcs: Vec<f64> = chain.vertex_arcs().to_vec();
    let mut s = 0.0;
    while s < chain.length() {
        arcs.push(s);
        s += 2.5;
    }
    for w in &spec.walls {
        for d in [-6.0, -3.0, 0.0, 3.0, 6.0] {
            let a = w.arc + d;
            if a > 0.0 && a < chain.length() {
                arcs.push(a);
            }
        }
    }
    arcs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    arcs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let pts = arcs
        .iter()
        .map(|&a| {
            let mut off = 0.0;
            for w in &spec.walls {
                let d = (a - w.arc).abs();
                if d < 6.0 {
                    off += w.gap_center * (1.0 - d / 6.0);
                }
            }
            let p = chain.point_at_arc(a);
            if off == 0.0 {
                p
            } else {
                p.add(crate::worlds::world::chain_normal(&chain, a).scale(off))
            }
        })
        .collect();
    Polyline::new(pts)
}

const DENSIFY_STEP_CAP: usize = 700;
const DENSIFY_ATTEMPTS: usize = 3;

/// Plan a dense path through `spec`: drive it closed-loop with the sampling
/// planner, resample the trajectory every `spacing` meters, and verify the
/// result clears every obstacle at the body radius. Failed attempts retry
/// with doubled sample counts and a reseeded planner.
pub fn densify(spec: &WorldSpec, mppi: &MppiConfig, spacing: f64, seed: u64) -> Result<DensePlan> {
    let params = VehicleParams::default();
    let chain = guide_chain(spec);
    let mut last_failure = String::from("no attempts ran");
    for attempt in 0..DENSIFY_ATTEMPTS {
        let cfg = MppiConfig { samples: mppi.samples * (1 + attempt), ..*mppi };
        let mut controller = MppiController::new(cfg, params, derive_seed(seed, "densify", attempt as u64));
        match drive_to_goal(spec, &chain, &mut controller, &params) {
            Ok(path) => {
                let mut waypoints = vec![spec.start];
                waypoints.extend(Polyline::new(path).resample(spacing));
                match validate_plan(spec, &waypoints, params.radius) {
                    Ok(()) => return Ok(DensePlan { waypoints, spacing }),
                    Err(msg) => last_failure = msg,
                }
            }
            Err(msg) => last_failure = msg,
        }
    }
    Err(Error::Planning(format!("world seed {}: {last_failure}", spec.seed)))
}

/// Closed-loop drive; returns the visited positions on success.
fn drive_to_goal(
    spec: &WorldSpec,
    chain: &Polyline,
    controller: &mut MppiController,
    params: &VehicleParams,
) -> std::result::Result<Vec<Vec2>, String> {
    let mut state = VehicleState::at(spec.start, spec.start_heading);
    let mut path = Vec::with_capacity(256);
    for _ in 0..DENSIFY_STEP_CAP {
        let u = controller.plan(spec, chain, &state);
        state = step_vehicle(&state, u[0], u[1], params, spec.zone_cap(state.position));
        path.push(state.position);
        if spec.collision(state.position, params.radius) {
            return Err(format!("planner collided at {:?}", state.position));
        }
        if state.position.dist(spec.goal()) <= spec.goal_radius {
            return Ok(path);
        }
    }
    Err(format!("planner stalled at {:?}", state.position))
}

/// Every waypoint and segment midpoint must clear the world at `radius`.
fn validate_plan(spec: &WorldSpec, waypoints: &[Vec2], radius: f64) -> std::result::Result<(), String> {
    for (i, pair) in waypoints.windows(2).enumerate() {
        let mid = pair[0].add(pair[1]).scale(0.5);
        for p in [pair[0], mid, pair[1]] {
            if spec.collision(p, radius) {
                return Err(format!("plan blocked near segment {i} at {p:?}"));
            }
        }
    }
    Ok(())
}
