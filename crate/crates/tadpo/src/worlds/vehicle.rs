//! Kinematic bicycle model under acceleration and steering commands.

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Top speed, m/s.
    pub v_max: f64,
    /// Peak commanded acceleration magnitude, m/s^2.
    pub a_max: f64,
    /// Wheelbase, m.
    pub wheelbase: f64,
    /// Steering angle at full lock, rad.
    pub max_steer: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Collision radius of the body, m.
    pub radius: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams { v_max: 6.0, a_max: 3.0, wheelbase: 1.0, max_steer: 0.6, dt: 0.1, radius: 0.6 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Acceleration applied on the previous step (for smoothness costs).
    pub prev_accel: f64,
}

impl VehicleState {
    pub fn at(position: Vec2, heading: f64) -> Self {
        VehicleState { position, heading, speed: 0.0, prev_accel: 0.0 }
    }
}

/// Advance one step. `throttle` and `steering` are clamped to [-1, 1];
/// `speed_cap` scales the admissible top speed (1 in open terrain, lower
/// inside slow zones). Speed updates first, the heading turns at the new
/// speed, and the body translates along the new heading — forward only,
/// never in reverse.
pub fn step_vehicle(state: &VehicleState, throttle: f64, steering: f64, p: &VehicleParams, speed_cap: f64) -> VehicleState {
    let accel = p.a_max * throttle.clamp(-1.0, 1.0);
    let speed = (state.speed + accel * p.dt).clamp(0.0, p.v_max * speed_cap.clamp(0.0, 1.0));
    let steer = p.max_steer * steering.clamp(-1.0, 1.0);
    let heading = state.heading + (speed / p.wheelbase) * steer.tan() * p.dt;
    let position = state.position.add(Vec2::from_heading(heading).scale(speed * p.dt));
    VehicleState { position, heading, speed, prev_accel: accel }
}
