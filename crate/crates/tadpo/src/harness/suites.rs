//! Canned comparison suites: `smoke` exercises every method end-to-end in a
//! couple of minutes; `trend` runs the full method comparison across the
//! three world families and judges it against fixed thresholds.
//!
//! The budgets here are desk-scale numbers chosen so the suites finish on a
//! single laptop core; they are definitions of these suites, not anyone
//! else's published settings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::dagger::DaggerConfig;
use crate::baselines::eval::{evaluate, write_csv, EvalController, EvalRow};
use crate::baselines::ppo_bc::PpoBcConfig;
use crate::error::{Error, Result};
use crate::planners::demos::DemoConfig;
use crate::planners::mppi::MppiConfig;
use crate::planners::teacher::TeacherPolicy;
use crate::ppo::PpoConfig;
use crate::rng::derive_seed;
use crate::tadpo::TadpoConfig;
use crate::worlds::world::WorldFamily;

use super::config::{ExperimentConfig, Method, WorldSelection};
use super::hashing::{combined_hash, hash_tree};
use super::plot::{line_chart, Series};
use super::run::{collect_demos, load_policy_checkpoint, train_student, TeacherChoice};
use super::table::render_table;
use super::worldset::{build_dense_worlds, build_worlds, role_seeds, WorldRole};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Smoke,
    Trend,
}

impl Suite {
    pub fn label(self) -> &'static str {
        match self {
            Suite::Smoke => "smoke",
            Suite::Trend => "trend",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Suite::Smoke),
            "trend" => Ok(Suite::Trend),
            other => Err(Error::config(format!("suite: expected smoke or trend, got {other}"))),
        }
    }
}

/// Everything a suite run consumes. One instance fully determines the run
/// given a master seed.
#[derive(Clone, Debug)]
pub struct SuiteSpec {
    pub suite: Suite,
    /// (family, difficulty) pairs, each trained and evaluated separately.
    pub families: Vec<(WorldFamily, f64)>,
    /// Training replicates per trained method.
    pub seeds_per_method: usize,
    /// Worlds cycled during one training run.
    pub train_worlds: usize,
    /// Worlds demonstrations are collected on.
    pub demo_worlds: usize,
    /// Held-out worlds per family; policies drive each once (they are
    /// deterministic at evaluation, so distinct episodes need distinct
    /// worlds).
    pub eval_worlds: usize,
    /// Update iterations for the iteration-trained methods.
    pub trained_budget: usize,
    pub dagger_rounds: usize,
    /// Shared optimization base for every trained method.
    pub ppo: PpoConfig,
    pub demos: DemoConfig,
    /// Generous planner budget: dense-path synthesis and the planner row.
    pub mppi: MppiConfig,
}

/// The methods a suite trains, in report order.
pub const TRAINED_METHODS: [Method; 4] = [Method::Tadpo, Method::Ppo, Method::Dagger, Method::PpoBc];

pub fn suite_spec(suite: Suite) -> SuiteSpec {
    let all = vec![
        (WorldFamily::Obstacles, 0.5),
        (WorldFamily::SlowZones, 0.5),
        (WorldFamily::Hybrid, 0.5),
    ];
    match suite {
        Suite::Smoke => SuiteSpec {
            suite,
            families: all,
            seeds_per_method: 1,
            train_worlds: 1,
            demo_worlds: 1,
            eval_worlds: 2,
            trained_budget: 2,
            dagger_rounds: 2,
            ppo: PpoConfig { n_steps: 256, epochs: 4, minibatch_size: 64, ..PpoConfig::default() },
            demos: DemoConfig { target_transitions: 512, max_episodes: 60, ..DemoConfig::default() },
            mppi: MppiConfig { samples: 48, horizon: 16, ..MppiConfig::default() },
        },
        Suite::Trend => SuiteSpec {
            suite,
            families: all,
            seeds_per_method: 3,
            train_worlds: 4,
            demo_worlds: 4,
            eval_worlds: 20,
            trained_budget: 60,
            dagger_rounds: 8,
            ppo: PpoConfig { n_steps: 1024, epochs: 10, minibatch_size: 256, ..PpoConfig::default() },
            demos: DemoConfig { target_transitions: 8192, max_episodes: 400, ..DemoConfig::default() },
            mppi: MppiConfig::default(),
        },
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerdictCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub checks: Vec<VerdictCheck>,
    pub pass: bool,
}

impl Verdict {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(out, "VERDICT: {}", if self.pass { "PASS" } else { "FAIL" });
        out
    }
}

/// Determinism manifest: per-file digests of everything the run wrote,
/// except files that record wall-clock.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub combined: String,
    pub files: std::collections::BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<EvalRow>,
    pub table: String,
    /// Threshold judgment; the quick suite has none.
    pub verdict: Option<Verdict>,
    pub manifest_path: PathBuf,
    pub combined_hash: String,
}

fn family_offset(fi: usize) -> u64 {
    // Disjoint 1000-wide world blocks per family within each role range.
    (fi * 1000) as u64
}

/// Run a full comparison suite under `out_root`. Every training run,
/// demonstration set, and report lands beneath it; artifacts written before
/// a failure stay on disk.
pub fn run_suite(suite: Suite, master_seed: u64, out_root: &Path) -> Result<SuiteOutcome> {
    let spec = suite_spec(suite);
    std::fs::create_dir_all(out_root)?;
    // Absolute paths keep the ops from re-rooting anything under the output
    // root environment variable.
    let out_root = out_root.canonicalize()?;

    let mut rows: Vec<EvalRow> = Vec::new();
    for (fi, &(family, difficulty)) in spec.families.iter().enumerate() {
        let flabel = family.label();
        let fdir = out_root.join(flabel);
        std::fs::create_dir_all(&fdir)?;
        let offset = family_offset(fi);
        let train_seeds = role_seeds(WorldRole::Train, offset, spec.train_worlds);
        let demo_seeds = role_seeds(WorldRole::Demo, offset, spec.demo_worlds);
        let eval_sel = WorldSelection {
            family,
            difficulty,
            seeds: role_seeds(WorldRole::Eval, offset, spec.eval_worlds),
        };
        let eval_sparse = build_worlds(&eval_sel)?;

        // One demonstration set per family, from the plan tracker.
        let mut dcfg = ExperimentConfig::new(Method::Tadpo, family, demo_seeds, fdir.join("demos"));
        dcfg.worlds.difficulty = difficulty;
        dcfg.seed = derive_seed(master_seed, "suite_demo", fi as u64);
        dcfg.demos = Some(spec.demos);
        dcfg.mppi = Some(spec.mppi);
        let demo_out = collect_demos(&dcfg, &TeacherChoice::PurePursuit)?;

        let mut curve_series: Vec<Series> = Vec::new();
        for method in TRAINED_METHODS {
            for si in 0..spec.seeds_per_method {
                let rdir = fdir.join(format!("{}_{si}", method.label()));
                let mut cfg = ExperimentConfig::new(method, family, train_seeds.clone(), rdir);
                cfg.worlds.difficulty = difficulty;
                cfg.seed = derive_seed(master_seed, method.label(), (fi * 100 + si) as u64);
                cfg.budget = if method == Method::Dagger { spec.dagger_rounds } else { spec.trained_budget };
                cfg.mppi = Some(spec.mppi);
                match method {
                    Method::Tadpo => cfg.tadpo = Some(TadpoConfig { ppo: spec.ppo.clone(), ..TadpoConfig::default() }),
                    Method::Ppo => cfg.ppo = Some(spec.ppo.clone()),
                    Method::Dagger => {
                        cfg.dagger = Some(DaggerConfig {
                            steps_per_round: spec.ppo.n_steps,
                            ..DaggerConfig::with_rounds(spec.dagger_rounds)
                        })
                    }
                    Method::PpoBc => cfg.ppo_bc = Some(PpoBcConfig { ppo: spec.ppo.clone(), ..PpoBcConfig::default() }),
                    Method::MppiDirect | Method::PurePursuit => unreachable!("not trained"),
                }
                let demo_path = (method == Method::Tadpo).then_some(demo_out.demo_path.as_path());
                let tout = train_student(&cfg, demo_path)?;

                if si == 0 {
                    let points: Vec<(f64, f64)> = tout.record.curves[0]
                        .points
                        .iter()
                        .filter_map(|p| p.mean_return.map(|r| (p.iteration as f64, r)))
                        .collect();
                    if !points.is_empty() {
                        curve_series.push(Series::new(method.label(), points));
                    }
                }

                // Held-out evaluation; the row's seed column is the
                // replicate index.
                let (model, view) = load_policy_checkpoint(&tout.checkpoint)?;
                let ctl = EvalController::PolicyMean { model: &model, view };
                let outcome = evaluate(&ctl, &eval_sparse, 1)?;
                rows.push(EvalRow::new(method.label(), flabel, si as u64, &outcome.aggregate));
            }
        }

        // Planner-side reference rows, one per family.
        let eval_dense = build_dense_worlds(&eval_sel, &spec.mppi)?;
        let tracker = TeacherPolicy::default();
        let outcome = evaluate(&EvalController::Teacher(&tracker), &eval_dense, 1)?;
        rows.push(EvalRow::new(Method::PurePursuit.label(), flabel, 0, &outcome.aggregate));
        let mppi_ctl = EvalController::Mppi { cfg: spec.mppi, seed: derive_seed(master_seed, "suite_mppi", fi as u64) };
        let outcome = evaluate(&mppi_ctl, &eval_sparse, 1)?;
        rows.push(EvalRow::new(Method::MppiDirect.label(), flabel, 0, &outcome.aggregate));

        if !curve_series.is_empty() {
            line_chart(fdir.join("curves.svg"), flabel, "iteration", "mean return", &curve_series)?;
        }
    }

    write_csv(out_root.join("report.csv"), &rows)?;
    let table = render_table(&rows);
    std::fs::write(out_root.join("trend_table.txt"), &table)?;

    let verdict = match suite {
        Suite::Smoke => None,
        Suite::Trend => Some(judge_trend(&rows)),
    };
    if let Some(v) = &verdict {
        std::fs::write(out_root.join("verdict.txt"), v.render())?;
    }

    // Wall-clock lives only in run records; everything else must reproduce
    // bit-for-bit, and the manifest is how reruns prove it.
    let files = hash_tree(&out_root, &["run_record.json", "manifest.json"])?;
    let manifest = SuiteManifest { combined: combined_hash(&files), files };
    let manifest_path = out_root.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;

    Ok(SuiteOutcome {
        out_dir: out_root,
        rows,
        table,
        verdict,
        manifest_path,
        combined_hash: manifest.combined,
    })
}

fn mean_over(rows: &[EvalRow], method: &str, family: &str, pick: impl Fn(&EvalRow) -> f64) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.world_family == family)
        .map(&pick)
        .collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Judge the comparison on the obstacle family: distillation must largely
/// solve it, pure on-policy training must not, imitation must trail on both
/// success and speed, and both privileged controllers must be near-perfect.
pub fn judge_trend(rows: &[EvalRow]) -> Verdict {
    let fam = WorldFamily::Obstacles.label();
    let sr = |m: &str| mean_over(rows, m, fam, |r| r.success_rate);
    let ms = |m: &str| mean_over(rows, m, fam, |r| r.mean_speed);

    let mut checks = Vec::new();
    let mut check = |name: &str, got: Option<f64>, ok: bool, detail: String| {
        checks.push(VerdictCheck { name: name.to_string(), pass: got.is_some() && ok, detail });
    };

    let tadpo_sr = sr("tadpo");
    let ppo_sr = sr("ppo");
    let dagger_sr = sr("dagger");
    let tadpo_ms = ms("tadpo");
    let dagger_ms = ms("dagger");
    let teacher_sr = sr("pure_pursuit");
    let mppi_sr = sr("mppi_direct");

    let fmt = |v: Option<f64>| v.map_or("missing".to_string(), |x| format!("{x:.2}"));
    check(
        "distilled student success >= 0.70",
        tadpo_sr,
        tadpo_sr.unwrap_or(0.0) >= 0.7,
        format!("tadpo sr {}", fmt(tadpo_sr)),
    );
    check(
        "pure on-policy success <= 0.20",
        ppo_sr,
        ppo_sr.unwrap_or(1.0) <= 0.2,
        format!("ppo sr {}", fmt(ppo_sr)),
    );
    check(
        "imitation success below distilled",
        dagger_sr.zip(tadpo_sr).map(|(d, t)| d - t),
        dagger_sr.zip(tadpo_sr).is_some_and(|(d, t)| d < t),
        format!("dagger sr {} vs tadpo {}", fmt(dagger_sr), fmt(tadpo_sr)),
    );
    check(
        "imitation speed below distilled",
        dagger_ms.zip(tadpo_ms).map(|(d, t)| d - t),
        dagger_ms.zip(tadpo_ms).is_some_and(|(d, t)| d < t),
        format!("dagger ms {} vs tadpo {}", fmt(dagger_ms), fmt(tadpo_ms)),
    );
    check(
        "plan tracker success >= 0.90",
        teacher_sr,
        teacher_sr.unwrap_or(0.0) >= 0.9,
        format!("pure_pursuit sr {}", fmt(teacher_sr)),
    );
    check(
        "sampling planner success >= 0.90",
        mppi_sr,
        mppi_sr.unwrap_or(0.0) >= 0.9,
        format!("mppi_direct sr {}", fmt(mppi_sr)),
    );

    let pass = checks.iter().all(|c| c.pass);
    Verdict { checks, pass }
}
