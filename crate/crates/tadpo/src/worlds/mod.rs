//! The driving task: planar geometry, vehicle dynamics, procedural worlds,
//! observations, and the training environment built from them.

pub mod env;
pub mod geometry;
pub mod metrics;
pub mod observe;
pub mod vehicle;
pub mod world;

pub use env::{LearnerView, RewardWeights, TrajPoint, VehicleEnv, WorldInstance, DEFAULT_STEP_CAP};
pub use geometry::{Disc, Polyline, Rect, Vec2};
pub use metrics::MetricsSummary;
pub use observe::ObservationSpec;
pub use vehicle::{step_vehicle, VehicleParams, VehicleState};
pub use world::{generate_world, SlowZone, WallInfo, WorldFamily, WorldSpec};
