//! Planar primitives: vectors, discs, axis-aligned rectangles, and arc-length
//! parameterized polylines, plus the ray and segment queries the sensors and
//! planners are built on.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is CCW of self.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }

    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::new(0.0, 0.0)
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn from_heading(theta: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin())
    }

    /// Rotate by `theta` radians counterclockwise.
    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Disc { center, radius }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.dist(self.center) <= self.radius
    }
}

/// Axis-aligned rectangle given by opposite corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        debug_assert!(min.x < max.x && min.y < max.y);
        Rect { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Distance from `p` to the nearest boundary edge (negative outside).
    pub fn boundary_margin(&self, p: Vec2) -> f64 {
        let dx = (p.x - self.min.x).min(self.max.x - p.x);
        let dy = (p.y - self.min.y).min(self.max.y - p.y);
        dx.min(dy)
    }
}

/// Distance from point `p` to the segment `a..b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// Does the segment `a..b` come within `disc.radius` of the disc center?
pub fn segment_disc_intersects(a: Vec2, b: Vec2, disc: &Disc) -> bool {
    point_segment_distance(disc.center, a, b) <= disc.radius
}

/// Distance along the ray `origin + t * dir` (unit `dir`, `t >= 0`) to the
/// first disc intersection, if any.
pub fn ray_disc_intersect(origin: Vec2, dir: Vec2, disc: &Disc) -> Option<f64> {
    let oc = origin.sub(disc.center);
    let b = oc.dot(dir);
    let c = oc.dot(oc) - disc.radius * disc.radius;
    if c <= 0.0 {
        return Some(0.0); // origin already inside
    }
    let disc_term = b * b - c;
    if disc_term < 0.0 {
        return None;
    }
    let t = -b - disc_term.sqrt();
    if t >= 0.0 {
        Some(t)
    } else {
        None
    }
}

/// Distance along the ray (unit `dir`) to where it exits `rect`; the origin
/// must be inside. Returns 0 when it is not.
pub fn ray_rect_exit(origin: Vec2, dir: Vec2, rect: &Rect) -> f64 {
    if !rect.contains(origin) {
        return 0.0;
    }
    let mut t = f64::INFINITY;
    if dir.x > 0.0 {
        t = t.min((rect.max.x - origin.x) / dir.x);
    } else if dir.x < 0.0 {
        t = t.min((rect.min.x - origin.x) / dir.x);
    }
    if dir.y > 0.0 {
        t = t.min((rect.max.y - origin.y) / dir.y);
    } else if dir.y < 0.0 {
        t = t.min((rect.min.y - origin.y) / dir.y);
    }
    if t.is_finite() {
        t.max(0.0)
    } else {
        0.0 // zero direction
    }
}

/// Piecewise-linear path with precomputed cumulative arc lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pts: Vec<Vec2>,
    cum: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Arc length from the start to the closest point.
    pub arc: f64,
    pub distance: f64,
    pub point: Vec2,
}

impl Polyline {
    pub fn new(pts: Vec<Vec2>) -> Self {
        assert!(pts.len() >= 2, "polyline needs at least two points");
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in pts.windows(2) {
            acc += w[0].dist(w[1]);
            cum.push(acc);
        }
        Polyline { pts, cum }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.pts
    }

    /// Arc length of each vertex from the start.
    pub fn vertex_arcs(&self) -> &[f64] {
        &self.cum
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn start(&self) -> Vec2 {
        self.pts[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.pts.last().unwrap()
    }

    /// Point at arc length `s` from the start, clamped to the ends.
    pub fn point_at_arc(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        // cum is sorted; find the segment containing s.
        let i = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.pts.len() - 2),
            Err(i) => i - 1,
        };
        let seg_len = self.cum[i + 1] - self.cum[i];
        if seg_len == 0.0 {
            return self.pts[i];
        }
        let t = (s - self.cum[i]) / seg_len;
        self.pts[i].add(self.pts[i + 1].sub(self.pts[i]).scale(t))
    }

    /// Closest point on the path. Ties between segments prefer the larger
    /// arc length, so progress never sticks at a corner revisited later.
    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = Projection { arc: 0.0, distance: f64::INFINITY, point: self.pts[0] };
        for i in 0..self.pts.len() - 1 {
            let (a, b) = (self.pts[i], self.pts[i + 1]);
            let ab = b.sub(a);
            let len2 = ab.dot(ab);
            let t = if len2 == 0.0 { 0.0 } else { (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0) };
            let q = a.add(ab.scale(t));
            let d = p.dist(q);
            let arc = self.cum[i] + t * len2.sqrt();
            if d < best.distance - 1e-12 || ((d - best.distance).abs() <= 1e-12 && arc > best.arc) {
                best = Projection { arc, distance: d, point: q };
            }
        }
        best
    }

    /// Resample at regular spacing: points at `spacing, 2*spacing, ...`
    /// (the start is excluded), with the exact endpoint appended.
    pub fn resample(&self, spacing: f64) -> Vec<Vec2> {
        assert!(spacing > 0.0);
        let mut out = Vec::new();
        let mut s = spacing;
        while s < self.length() - 1e-9 {
            out.push(self.point_at_arc(s));
            s += spacing;
        }
        out.push(self.end());
        out
    }
}
