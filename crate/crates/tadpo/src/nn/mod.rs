//! Dense networks with hand-written backprop.
//!
//! All parameters of a model live in one flat [`ParameterVector`] whose
//! layout is a map of named segments (`actor.w0`, `critic.b1`, ...). Layers
//! are *bindings* into that vector rather than owners of their weights, so a
//! whole actor-critic can be snapshotted, checkpointed, hashed, or partially
//! frozen by segment name without any copying gymnastics.

pub mod adam;
pub mod mlp;
pub mod model;
pub mod params;
pub mod policy;

pub use adam::OptimizerState;
pub use mlp::{Activation, MlpBinding, MlpCache, MlpSpec};
pub use model::{ActorCritic, ModelConfig, PolicyForward, ValueForward};
pub use params::{FreezeMask, ParameterVector, Segment, SegmentMap, SegmentMapBuilder};
pub use policy::GaussianHead;
