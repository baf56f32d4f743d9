//! Procedural task worlds: a reference waypoint chain from start to goal,
//! dressed with hazards drawn from a seeded family.
//!
//! The obstacle family drops disc "walls" across the chain, each pierced by
//! a single lateral gap. Inter-disc surface gaps inside a wall stay at or
//! under 1.0 m — narrower than the vehicle's 1.2 m diameter — and the gap
//! center is offset from the chain by at least 0.8 m beyond its half-width,
//! so following the raw chain always collides: reaching the goal requires
//! leaving the chain, threading the gap, and coming back. The slow-zone
//! family scatters speed-capped discs over the chain instead. Generation is
//! a pure function of `(family, difficulty, seed)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{ray_disc_intersect, ray_rect_exit, Disc, Polyline, Rect, Vec2};
use super::vehicle::VehicleParams;
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldFamily {
    Obstacles,
    SlowZones,
    Hybrid,
}

impl WorldFamily {
    /// Stable lowercase name used in file names and report columns.
    pub fn label(self) -> &'static str {
        match self {
            WorldFamily::Obstacles => "obstacles",
            WorldFamily::SlowZones => "slow_zones",
            WorldFamily::Hybrid => "hybrid",
        }
    }
}

/// Disc-shaped region that caps the admissible speed to `cap * v_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowZone {
    pub disc: Disc,
    pub cap: f64,
}

/// Layout metadata for one generated wall (diagnostics and tests; the discs
/// themselves live in `WorldSpec::obstacles`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallInfo {
    /// Arc length along the chain where the wall crosses it.
    pub arc: f64,
    /// Signed lateral offset of the gap center from the chain.
    pub gap_center: f64,
    pub gap_half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub family: WorldFamily,
    pub difficulty: f64,
    pub seed: u64,
    pub bounds: Rect,
    pub start: Vec2,
    pub start_heading: f64,
    pub goal_radius: f64,
    /// Reference waypoint chain from start to goal (the goal is the last
    /// vertex). Progress and success are measured against this chain.
    pub route: Vec<Vec2>,
    pub obstacles: Vec<Disc>,
    pub walls: Vec<WallInfo>,
    pub slow_zones: Vec<SlowZone>,
}

const ROUTE_XS: [f64; 6] = [0.0, 20.0, 40.0, 60.0, 80.0, 100.0];
const WALL_HALF_EXTENT: f64 = 12.0;
const WALL_ARC_RANGE: (f64, f64) = (25.0, 85.0);
const WALL_MIN_SEPARATION: f64 = 12.0;
const ZONE_ARC_RANGE: (f64, f64) = (20.0, 85.0);
const ZONE_MIN_SEPARATION: f64 = 15.0;

impl WorldSpec {
    /// Hazard-free course over the given chain, with default bounds. Handy
    /// for tests and demos of the raw driving task.
    pub fn open_course(route: Vec<Vec2>) -> Self {
        assert!(route.len() >= 2);
        WorldSpec {
            family: WorldFamily::Obstacles,
            difficulty: 0.0,
            seed: 0,
            bounds: default_bounds(),
            start: route[0],
            start_heading: 0.0,
            goal_radius: 3.0,
            route,
            obstacles: Vec::new(),
            walls: Vec::new(),
            slow_zones: Vec::new(),
        }
    }

    pub fn goal(&self) -> Vec2 {
        *self.route.last().unwrap()
    }

    pub fn chain(&self) -> Polyline {
        Polyline::new(self.route.clone())
    }

    /// Speed-cap factor at `p`: 1 outside every slow zone, the tightest cap
    /// inside overlapping ones.
    pub fn zone_cap(&self, p: Vec2) -> f64 {
        self.slow_zones
            .iter()
            .filter(|z| z.disc.contains(p))
            .map(|z| z.cap)
            .fold(1.0, f64::min)
    }

    /// Is a body of the given radius at `p` in collision? Leaving the world
    /// bounds counts as a collision.
    pub fn collision(&self, p: Vec2, radius: f64) -> bool {
        if self.bounds.boundary_margin(p) < radius {
            return true;
        }
        self.obstacles.iter().any(|d| p.dist(d.center) < radius + d.radius)
    }

    /// Distance from `p` to the nearest obstacle surface or world edge.
    pub fn clearance(&self, p: Vec2) -> f64 {
        let mut c = self.bounds.boundary_margin(p);
        for d in &self.obstacles {
            c = c.min(p.dist(d.center) - d.radius);
        }
        c
    }

    /// Distance to the first obstacle surface or world edge along a ray,
    /// clamped to `max_range`.
    pub fn raycast(&self, origin: Vec2, dir: Vec2, max_range: f64) -> f64 {
        let mut t = ray_rect_exit(origin, dir, &self.bounds);
        if t == 0.0 && !self.bounds.contains(origin) {
            return 0.0;
        }
        for d in &self.obstacles {
            if let Some(hit) = ray_disc_intersect(origin, dir, d) {
                t = t.min(hit);
            }
        }
        t.min(max_range)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, serde_json::to_string_pretty(self)?)?)
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn default_bounds() -> Rect {
    Rect::new(Vec2::new(-10.0, -30.0), Vec2::new(115.0, 30.0))
}

/// Generate a world as a pure function of `(family, difficulty, seed)`.
/// Difficulty in (0, 1] scales hazard counts and, past 0.5, tightens the
/// wall gaps.
pub fn generate_world(family: WorldFamily, difficulty: f64, seed: u64) -> Result<WorldSpec> {
    if !(difficulty > 0.0 && difficulty <= 1.0) {
        return Err(Error::config("world difficulty must be in (0, 1]"));
    }
    let mut rng = stream(seed, "world", 0);

    // Reference chain: fixed x stations, laterally random-walked.
    let mut route = Vec::with_capacity(ROUTE_XS.len());
    let mut y: f64 = 0.0;
    for (i, &x) in ROUTE_XS.iter().enumerate() {
        if i == 1 {
            y = rng.gen_range(-4.0..4.0);
        } else if i > 1 {
            y = (y + rng.gen_range(-6.0..6.0)).clamp(-9.0, 9.0);
        }
        route.push(Vec2::new(x, y));
    }
    let chain = Polyline::new(route.clone());

    let mut spec = WorldSpec {
        family,
        difficulty,
        seed,
        bounds: default_bounds(),
        start: route[0],
        start_heading: 0.0,
        goal_radius: 3.0,
        route,
        obstacles: Vec::new(),
        walls: Vec::new(),
        slow_zones: Vec::new(),
    };

    let vehicle_radius = VehicleParams::default().radius;

    if matches!(family, WorldFamily::Obstacles | WorldFamily::Hybrid) {
        let n_walls = (3.0 * difficulty).ceil() as usize;
        let arcs = sample_separated(&mut rng, n_walls, WALL_ARC_RANGE, WALL_MIN_SEPARATION)?;
        for arc in arcs {
            let mut placed = false;
            for _attempt in 0..50 {
                let (discs, info) = build_wall(&chain, arc, difficulty, &mut rng);
                if chain_is_blocked(&chain, &discs, arc, vehicle_radius) {
                    spec.obstacles.extend(discs);
                    spec.walls.push(info);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Planning(format!("wall at arc {arc:.1} never blocked the chain (seed {seed})")));
            }
        }
    }

    if matches!(family, WorldFamily::SlowZones | WorldFamily::Hybrid) {
        let n_zones = (2.0 * difficulty).ceil() as usize;
        let arcs = sample_separated(&mut rng, n_zones, ZONE_ARC_RANGE, ZONE_MIN_SEPARATION)?;
        for arc in arcs {
            let q = chain.point_at_arc(arc);
            let n = chain_normal(&chain, arc);
            let center = q.add(n.scale(rng.gen_range(-3.0..3.0)));
            let radius = rng.gen_range(5.0..8.0);
            let cap = rng.gen_range(0.25..0.45);
            spec.slow_zones.push(SlowZone { disc: Disc::new(center, radius), cap });
        }
    }

    Ok(spec)
}

/// Draw `n` values in `range`, all pairwise at least `sep` apart, sorted.
fn sample_separated(rng: &mut impl Rng, n: usize, range: (f64, f64), sep: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::Planning("could not separate hazard positions".into()));
        }
        let c = rng.gen_range(range.0..range.1);
        if out.iter().all(|&a| (a - c).abs() >= sep) {
            out.push(c);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// Unit normal of the chain at arc `s` (tangent rotated +90 degrees).
pub fn chain_normal(chain: &Polyline, s: f64) -> Vec2 {
    let ahead = chain.point_at_arc(s + 0.5);
    let behind = chain.point_at_arc(s - 0.5);
    ahead.sub(behind).unit().rotate(std::f64::consts::FRAC_PI_2)
}

/// One disc wall across the chain at arc `arc`, pierced by a single gap.
/// Above difficulty 0.5 the gap narrows (down to ~0.3 m of clearance at
/// 1.0); at or below 0.5 the shrink term is zero and the geometry is
/// bit-identical to earlier revisions.
fn build_wall(chain: &Polyline, arc: f64, difficulty: f64, rng: &mut impl Rng) -> (Vec<Disc>, WallInfo) {
    let q = chain.point_at_arc(arc);
    let n = chain_normal(chain, arc);
    let gap_half_width = rng.gen_range(1.6..2.2) - 1.4 * (difficulty - 0.5).max(0.0);
    let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let gap_center = side * rng.gen_range(gap_half_width + 0.8..6.0);

    let mut discs = Vec::new();
    for dir in [1.0, -1.0] {
        // Grow discs outward from the gap edge; the first surface touches
        // the edge exactly, later ones leave sub-1.0 m surface gaps.
        let mut edge = gap_center + dir * gap_half_width;
        loop {
            let r = rng.gen_range(1.2..1.8);
            let center_off = edge + dir * r;
            if dir * center_off - r > WALL_HALF_EXTENT {
                break;
            }
            discs.push(Disc::new(q.add(n.scale(center_off)), r));
            edge = center_off + dir * (r + rng.gen_range(0.2..1.0));
        }
    }
    (discs, WallInfo { arc, gap_center, gap_half_width })
}

/// Would a body of radius `r` tracing the chain through the wall's arc
/// window collide with it? (It must: the gap sits off the chain and every
/// other surface gap is narrower than the body.)
fn chain_is_blocked(chain: &Polyline, discs: &[Disc], arc: f64, r: f64) -> bool {
    let mut s = arc - 4.0;
    while s <= arc + 4.0 {
        let p = chain.point_at_arc(s);
        if discs.iter().any(|d| p.dist(d.center) < r + d.radius) {
            return true;
        }
        s += 0.25;
    }
    false
}
