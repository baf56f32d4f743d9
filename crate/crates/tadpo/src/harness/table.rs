//! Plain-text comparison tables: methods down the side, world families
//! across the top, success rate / chain progress / mean speed in each group.

use crate::baselines::eval::EvalRow;

const FAMILY_ORDER: [&str; 3] = ["obstacles", "slow_zones", "hybrid"];
const GROUP_WIDTH: usize = 20;

/// Render rows as a fixed-width table. Rows sharing (method, family) are
/// averaged — each usually carries one training seed. Methods keep their
/// first-appearance order; families follow the canonical order, present
/// ones only.
pub fn render_table(rows: &[EvalRow]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let families: Vec<&str> = FAMILY_ORDER
        .iter()
        .copied()
        .filter(|f| rows.iter().any(|r| r.world_family == *f))
        .collect();

    let method_width = methods.iter().map(|m| m.len()).chain(["method".len()]).max().unwrap_or(6) + 2;
    let mut out = String::new();

    // Header: family names over their metric group.
    out.push_str(&format!("{:<method_width$}", "method"));
    for f in &families {
        out.push_str(&format!("| {:<width$}", f, width = GROUP_WIDTH - 2));
    }
    out.push('\n');
    out.push_str(&format!("{:<method_width$}", ""));
    for _ in &families {
        out.push_str(&format!("| {:>5} {:>5} {:>5} ", "sr", "cp", "ms"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(method_width));
    for _ in &families {
        out.push('+');
        out.push_str(&"-".repeat(GROUP_WIDTH - 1));
    }
    out.push('\n');

    for m in &methods {
        out.push_str(&format!("{:<method_width$}", m));
        for f in &families {
            let cells: Vec<&EvalRow> =
                rows.iter().filter(|r| r.method == *m && r.world_family == *f).collect();
            if cells.is_empty() {
                out.push_str(&format!("| {:>5} {:>5} {:>5} ", "-", "-", "-"));
            } else {
                let n = cells.len() as f64;
                let sr = cells.iter().map(|r| r.success_rate).sum::<f64>() / n;
                let cp = cells.iter().map(|r| r.chain_progress).sum::<f64>() / n;
                let ms = cells.iter().map(|r| r.mean_speed).sum::<f64>() / n;
                out.push_str(&format!("| {sr:>5.2} {cp:>5.2} {ms:>5.2} "));
            }
        }
        out.push('\n');
    }
    out
}
