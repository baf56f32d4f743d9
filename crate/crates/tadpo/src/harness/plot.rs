//! Standalone SVG emission: learning-curve line charts and top-down world
//! renders. Pure string building — the files open in any browser and diff
//! cleanly, which is what the determinism checks want.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::worlds::geometry::Vec2;
use crate::worlds::world::WorldSpec;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points }
    }
}

fn fmt2(v: f64) -> String {
    // Fixed two decimals keeps coordinates deterministic and files compact.
    format!("{v:.2}")
}

/// Multi-series line chart with axes, tick labels, and a legend.
pub fn line_chart(
    path: impl AsRef<Path>,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let (w, h) = (720.0, 420.0);
    let (ml, mr, mt, mb) = (64.0, 16.0, 40.0, 48.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
        y0 -= 1.0;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n"
    );
    let _ = write!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n");
    let _ = write!(svg, "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n", w / 2.0, title);

    // Grid and tick labels: 5 divisions each way.
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let gx = ml + t * pw;
        let gy = mt + t * ph;
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            fmt2(gx), fmt2(mt), fmt2(gx), fmt2(mt + ph)
        );
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            fmt2(ml), fmt2(gy), fmt2(ml + pw), fmt2(gy)
        );
        let xv = x0 + t * (x1 - x0);
        let yv = y1 - t * (y1 - y0);
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt2(gx), fmt2(mt + ph + 16.0), fmt2(xv)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt2(ml - 6.0), fmt2(gy + 4.0), fmt2(yv)
        );
    }
    let _ = write!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        fmt2(ml), fmt2(mt), fmt2(pw), fmt2(ph)
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        fmt2(ml + pw / 2.0), fmt2(h - 12.0), x_label
    );
    let _ = write!(
        svg,
        "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt2(mt + ph / 2.0), fmt2(mt + ph / 2.0), y_label
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{},{}", fmt2(sx(x)), fmt2(sy(y)))).collect();
        if !coords.is_empty() {
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                coords.join(" ")
            );
        }
        // Legend swatch.
        let ly = mt + 14.0 + 16.0 * i as f64;
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            fmt2(ml + pw - 120.0), fmt2(ly), fmt2(ml + pw - 100.0), fmt2(ly)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            fmt2(ml + pw - 94.0), fmt2(ly + 4.0), s.label
        );
    }
    svg.push_str("</svg>\n");
    Ok(std::fs::write(path, svg)?)
}

/// A labeled polyline drawn over a world render (a plan, a trajectory).
#[derive(Clone, Debug)]
pub struct Overlay {
    pub label: String,
    pub points: Vec<Vec2>,
}

impl Overlay {
    pub fn new(label: impl Into<String>, points: Vec<Vec2>) -> Self {
        Overlay { label: label.into(), points }
    }
}

/// Top-down render of a course: bounds, obstacles, slow zones, the reference
/// chain, start/goal, and any overlays.
pub fn world_svg(path: impl AsRef<Path>, spec: &WorldSpec, overlays: &[Overlay]) -> Result<()> {
    let b = spec.bounds;
    let scale = 8.0;
    let m = 10.0;
    let w = (b.max.x - b.min.x) * scale + 2.0 * m;
    let h = (b.max.y - b.min.y) * scale + 2.0 * m;
    let sx = |x: f64| m + (x - b.min.x) * scale;
    let sy = |y: f64| m + (b.max.y - y) * scale;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\">\n",
        fmt2(w), fmt2(h), fmt2(w), fmt2(h)
    );
    let _ = write!(svg, "<rect width=\"{}\" height=\"{}\" fill=\"#fafafa\"/>\n", fmt2(w), fmt2(h));
    let _ = write!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\" stroke=\"#333\"/>\n",
        fmt2(sx(b.min.x)), fmt2(sy(b.max.y)), fmt2((b.max.x - b.min.x) * scale), fmt2((b.max.y - b.min.y) * scale)
    );

    for z in &spec.slow_zones {
        let _ = write!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#fde68a\" fill-opacity=\"0.6\" stroke=\"#d97706\" stroke-dasharray=\"4 3\"/>\n",
            fmt2(sx(z.disc.center.x)), fmt2(sy(z.disc.center.y)), fmt2(z.disc.radius * scale)
        );
    }
    for d in &spec.obstacles {
        let _ = write!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#9ca3af\" stroke=\"#4b5563\"/>\n",
            fmt2(sx(d.center.x)), fmt2(sy(d.center.y)), fmt2(d.radius * scale)
        );
    }

    let chain: Vec<String> = spec.route.iter().map(|p| format!("{},{}", fmt2(sx(p.x)), fmt2(sy(p.y)))).collect();
    let _ = write!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#999\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n",
        chain.join(" ")
    );

    for (i, o) in overlays.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = o.points.iter().map(|p| format!("{},{}", fmt2(sx(p.x)), fmt2(sy(p.y)))).collect();
        if !coords.is_empty() {
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                coords.join(" ")
            );
        }
        let ly = 22.0 + 16.0 * i as f64;
        let _ = write!(
            svg,
            "<line x1=\"20\" y1=\"{0}\" x2=\"40\" y2=\"{0}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            fmt2(ly)
        );
        let _ = write!(svg, "<text x=\"46\" y=\"{}\" font-size=\"12\">{}</text>\n", fmt2(ly + 4.0), o.label);
    }

    let goal = spec.goal();
    let _ = write!(
        svg,
        "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"#16a34a\" stroke-width=\"2\"/>\n",
        fmt2(sx(goal.x)), fmt2(sy(goal.y)), fmt2(spec.goal_radius * scale)
    );
    let _ = write!(
        svg,
        "<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"#2563eb\"/>\n",
        fmt2(sx(spec.start.x)), fmt2(sy(spec.start.y))
    );
    svg.push_str("</svg>\n");
    Ok(std::fs::write(path, svg)?)
}
