//! Geometric path tracking: steer along the circular arc through a
//! lookahead point on the path, throttle toward a cruise speed.

use serde::{Deserialize, Serialize};

use crate::worlds::geometry::Polyline;
use crate::worlds::vehicle::{VehicleParams, VehicleState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PurePursuit {
    /// Arc distance ahead of the projection to aim at, m.
    pub lookahead: f64,
    /// Speed held on straights, m/s.
    pub cruise: f64,
    /// Throttle per m/s of speed error.
    pub speed_gain: f64,
    /// Slow down when the lookahead point subtends a large angle.
    pub corner_slowdown: f64,
}

impl Default for PurePursuit {
    fn default() -> Self {
        PurePursuit { lookahead: 3.0, cruise: 4.0, speed_gain: 1.0, corner_slowdown: 3.0 }
    }
}

impl PurePursuit {
    /// Control toward `chain` from `state`.
    pub fn act(&self, chain: &Polyline, state: &VehicleState, params: &VehicleParams) -> [f64; 2] {
        let proj = chain.project(state.position);
        let target = chain.point_at_arc(proj.arc + self.lookahead);
        let rel = target.sub(state.position).rotate(-state.heading);
        let d2 = rel.dot(rel);
        let steering = if d2 < 1e-12 {
            0.0
        } else {
            // Curvature of the arc through the target: k = 2 y / d^2.
            let curvature = 2.0 * rel.y / d2;
            ((params.wheelbase * curvature).atan() / params.max_steer).clamp(-1.0, 1.0)
        };
        let heading_err = rel.y.atan2(rel.x).abs();
        let v_des = (self.cruise * (1.0 - self.corner_slowdown * heading_err / std::f64::consts::PI)).max(1.0);
        let throttle = (self.speed_gain * (v_des - state.speed)).clamp(-1.0, 1.0);
        [throttle, steering]
    }
}
