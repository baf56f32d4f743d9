//! World-seed partitioning and world-set construction.
//!
//! Training, demonstration, and evaluation worlds draw their generator seeds
//! from three disjoint ranges, so a student can never be evaluated on a
//! course it trained on (or that its teacher demonstrated). The partition is
//! enforced whenever a config is handed to an operation, not trusted.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::planners::mppi::MppiConfig;
use crate::planners::plan::densify;
use crate::worlds::env::WorldInstance;
use crate::worlds::world::generate_world;

use super::config::WorldSelection;

/// Dense-plan waypoint spacing used everywhere in the pipeline, meters.
pub const DENSE_SPACING: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorldRole {
    Train,
    Demo,
    Eval,
}

impl WorldRole {
    /// The world-generator seed range reserved for this role.
    pub fn range(self) -> Range<u64> {
        match self {
            WorldRole::Train => 0..100_000,
            WorldRole::Demo => 100_000..200_000,
            WorldRole::Eval => 200_000..300_000,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WorldRole::Train => "train",
            WorldRole::Demo => "demo",
            WorldRole::Eval => "eval",
        }
    }
}

/// Reject any seed outside the role's reserved range.
pub fn assert_partition(role: WorldRole, seeds: &[u64]) -> Result<()> {
    let range = role.range();
    for &s in seeds {
        if !range.contains(&s) {
            return Err(Error::config(format!(
                "worlds.seeds: {s} is outside the {} range {}..{}",
                role.label(),
                range.start,
                range.end
            )));
        }
    }
    Ok(())
}

/// The first `count` seeds of a role's range, shifted by `offset` — the
/// counter-based scheme the suites use so different world families never
/// share generator seeds.
pub fn role_seeds(role: WorldRole, offset: u64, count: usize) -> Vec<u64> {
    let range = role.range();
    let base = range.start + offset;
    assert!(base + count as u64 <= range.end, "seed block overflows the {} range", role.label());
    (0..count as u64).map(|i| base + i).collect()
}

/// Generate the selected worlds, sparse waypoints only.
pub fn build_worlds(sel: &WorldSelection) -> Result<Vec<WorldInstance>> {
    sel.seeds
        .iter()
        .map(|&s| Ok(WorldInstance::new(generate_world(sel.family, sel.difficulty, s)?)))
        .collect()
}

/// Generate the selected worlds and plan a dense path through each one.
/// Needed wherever the privileged view or the tracking teacher is involved.
pub fn build_dense_worlds(sel: &WorldSelection, mppi: &MppiConfig) -> Result<Vec<WorldInstance>> {
    sel.seeds
        .iter()
        .map(|&s| {
            let spec = generate_world(sel.family, sel.difficulty, s)?;
            let plan = densify(&spec, mppi, DENSE_SPACING, s)?;
            Ok(WorldInstance::with_dense(spec, plan.waypoints))
        })
        .collect()
}
