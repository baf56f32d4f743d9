//! Planning stack: sampling-based MPC, path distillation into dense plans,
//! geometric tracking, and the demonstration pipeline built from them.

pub mod demos;
pub mod mppi;
pub mod plan;
pub mod pure_pursuit;
pub mod teacher;

pub use demos::{collect_demonstrations, DemoConfig, DemoReport, DemoSource};
pub use mppi::{MppiConfig, MppiController};
pub use plan::{densify, guide_chain, sparse_waypoints, DensePlan};
pub use pure_pursuit::PurePursuit;
pub use teacher::TeacherPolicy;
