//! The operations behind the CLI: teacher training, demonstration
//! collection, student training, and evaluation. Each one reads an
//! [`ExperimentConfig`], enforces the seed partition for its role, writes
//! its artifacts under the output root, and leaves a run record.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::dagger::train_dagger;
use crate::baselines::eval::{evaluate, write_csv, EvalController, EvalOutcome, EvalRow};
use crate::baselines::ppo_bc::{train_ppo_bc, TeacherActionEnv};
use crate::error::{Error, Result};
use crate::nn::{ActorCritic, ModelConfig};
use crate::planners::demos::{collect_demonstrations, DemoReport, DemoSource};
use crate::planners::teacher::TeacherPolicy;
use crate::ppo::{train_ppo, IterStats};
use crate::rng::{derive_seed, stream, TrainStreams};
use crate::rollout::{Env, TeacherBuffer};
use crate::tadpo::train_tadpo;
use crate::worlds::env::{LearnerView, VehicleEnv, WorldInstance};
use crate::worlds::geometry::Vec2;
use crate::worlds::metrics::MetricsSummary;
use crate::worlds::observe::ObservationSpec;

use super::config::{ExperimentConfig, Method};
use super::plot::{world_svg, Overlay};
use super::stats::{write_jsonl, JsonlWriter};
use super::table::render_table;
use super::worldset::{assert_partition, build_dense_worlds, build_worlds, WorldRole};

/// Root directory for artifacts: the `TADPO_OUT` environment variable when
/// set and non-empty, `./tadpo_out` otherwise.
pub fn output_root() -> PathBuf {
    match std::env::var_os("TADPO_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("tadpo_out"),
    }
}

/// Where a config's artifacts land: absolute `out_dir`s are taken as-is,
/// relative ones nest under [`output_root`].
pub fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    if cfg.out_dir.is_absolute() {
        cfg.out_dir.clone()
    } else {
        output_root().join(&cfg.out_dir)
    }
}

/// One learning-curve sample, taken after each training iteration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    /// Cumulative environment steps at this point.
    pub env_steps: usize,
    pub mean_return: Option<f64>,
    pub success_rate: Option<f64>,
}

impl CurvePoint {
    fn from_stats(s: &IterStats) -> Self {
        CurvePoint {
            iteration: s.iteration,
            env_steps: s.total_env_steps,
            mean_return: s.mean_return,
            success_rate: s.success_rate,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedCurve {
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

/// What a finished run was: enough to audit the result without re-running.
/// Wall-clock is informational and excluded from determinism comparisons.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    /// Digest of the exact config that produced this run.
    pub config_hash: String,
    pub method: String,
    pub curves: Vec<SeedCurve>,
    /// Post-training metrics on the run's own worlds, one row per world.
    pub final_eval: Vec<EvalRow>,
    pub wall_clock_s: f64,
    pub version: String,
}

impl RunRecord {
    fn new(cfg: &ExperimentConfig, curves: Vec<SeedCurve>, final_eval: Vec<EvalRow>, started: Instant) -> Self {
        RunRecord {
            config_hash: cfg.hash(),
            method: cfg.method.label().to_string(),
            curves,
            final_eval,
            wall_clock_s: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(std::fs::write(path, s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Who demonstrates for `collect-demos`: a trained checkpoint over the
/// planned-path view, or one of the built-in controllers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TeacherChoice {
    Checkpoint(PathBuf),
    PurePursuit,
    Mppi,
}

impl TeacherChoice {
    pub fn describe(&self) -> String {
        match self {
            TeacherChoice::Checkpoint(p) => format!("checkpoint {}", p.display()),
            TeacherChoice::PurePursuit => "pure_pursuit".to_string(),
            TeacherChoice::Mppi => "mppi".to_string(),
        }
    }
}

impl std::str::FromStr for TeacherChoice {
    type Err = std::convert::Infallible;

    /// `pure-pursuit` and `mppi` name the built-ins; anything else is a
    /// checkpoint path.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "pure-pursuit" | "pure_pursuit" => TeacherChoice::PurePursuit,
            "mppi" => TeacherChoice::Mppi,
            other => TeacherChoice::Checkpoint(PathBuf::from(other)),
        })
    }
}

/// What `evaluate` drives: a checkpoint (view inferred from its layout) or
/// one of the planner-side controllers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalSubject {
    Checkpoint(PathBuf),
    PurePursuit,
    Mppi,
}

impl std::str::FromStr for EvalSubject {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "pure-pursuit" | "pure_pursuit" => EvalSubject::PurePursuit,
            "mppi" => EvalSubject::Mppi,
            other => EvalSubject::Checkpoint(PathBuf::from(other)),
        })
    }
}

/// Artifacts of a training operation.
#[derive(Debug)]
pub struct TrainOutput {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub stats_path: PathBuf,
    pub record: RunRecord,
}

/// Artifacts of demonstration collection.
#[derive(Debug)]
pub struct DemoOutput {
    pub out_dir: PathBuf,
    pub demo_path: PathBuf,
    pub manifest_path: PathBuf,
    pub report: DemoReport,
    pub content_hash: String,
}

/// Sidecar describing a `.demo` file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DemoManifest {
    pub source: String,
    pub content_hash: String,
    pub transitions: usize,
    pub episodes: usize,
    pub obs_student_dim: usize,
    pub obs_teacher_dim: usize,
    pub action_dim: usize,
    pub report: DemoReport,
}

/// Artifacts of an evaluation.
#[derive(Debug)]
pub struct EvalOutput {
    pub out_dir: PathBuf,
    pub csv_path: PathBuf,
    pub table_path: PathBuf,
    pub rows: Vec<EvalRow>,
    pub aggregate: MetricsSummary,
}

fn fresh_model(env: &dyn Env, seed: u64) -> Result<ActorCritic> {
    ActorCritic::new(ModelConfig::new(env.obs_dim(), env.action_dim()), &mut stream(seed, "model_init", 0))
}

/// Stream per-iteration stats to `path` while `train` runs, collecting the
/// learning curve. A zero-iteration run leaves an empty stats file.
fn streamed_training(
    path: &Path,
    train: impl FnOnce(&mut dyn FnMut(&IterStats, &ActorCritic)) -> Result<Vec<IterStats>>,
) -> Result<Vec<CurvePoint>> {
    let mut writer = JsonlWriter::create(path)?;
    let mut sink_err: Option<Error> = None;
    let mut curve = Vec::new();
    {
        let mut on_iter = |s: &IterStats, _m: &ActorCritic| {
            curve.push(CurvePoint::from_stats(s));
            if sink_err.is_none() {
                if let Err(e) = writer.push(s) {
                    sink_err = Some(e);
                }
            }
        };
        train(&mut on_iter)?;
    }
    match sink_err {
        Some(e) => Err(e),
        None => Ok(curve),
    }
}

fn rows_from(method: &str, outcome: &EvalOutcome) -> Vec<EvalRow> {
    outcome
        .per_world
        .iter()
        .map(|r| EvalRow::new(method, r.family_label, r.world_seed, &r.summary))
        .collect()
}

/// Train the teacher: a stochastic policy over the planned-path observation
/// view, optimized with the clipped-surrogate update on worlds from the
/// training partition. Writes `teacher.pvec`, `teacher_stats.jsonl`,
/// `config.json`, and `run_record.json`. Budget 0 checkpoints the
/// initialization untouched.
pub fn train_teacher(cfg: &ExperimentConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if cfg.method != Method::Ppo {
        return Err(Error::config(format!(
            "method: teacher training is a ppo run over planned paths, got {}",
            cfg.method.label()
        )));
    }
    assert_partition(WorldRole::Train, &cfg.worlds.seeds)?;
    let started = Instant::now();
    let out = resolve_out_dir(cfg);
    std::fs::create_dir_all(&out)?;
    cfg.save(out.join("config.json"))?;

    let worlds = build_dense_worlds(&cfg.worlds, &cfg.mppi_params())?;
    let mut env = VehicleEnv::new(worlds.clone(), LearnerView::Teacher, false)?;
    let mut model = fresh_model(&env, cfg.seed)?;
    let mut streams = TrainStreams::new(cfg.seed);

    let stats_path = out.join("teacher_stats.jsonl");
    let curve = streamed_training(&stats_path, |on_iter| {
        if cfg.budget == 0 {
            return Ok(Vec::new());
        }
        train_ppo(&mut env, &mut model, &cfg.ppo_params(), cfg.budget, &mut streams, |s, m| on_iter(s, m))
    })?;

    let checkpoint = out.join("teacher.pvec");
    model.save_pvec(&checkpoint)?;
    let outcome = evaluate(
        &EvalController::PolicyMean { model: &model, view: LearnerView::Teacher },
        &worlds,
        cfg.episodes_per_world,
    )?;
    let record = RunRecord::new(
        cfg,
        vec![SeedCurve { seed: cfg.seed, points: curve }],
        rows_from(cfg.method.label(), &outcome),
        started,
    );
    record.save(out.join("run_record.json"))?;
    Ok(TrainOutput { out_dir: out, checkpoint, stats_path, record })
}

/// Collect demonstrations on the demo partition and freeze them into a
/// `.demo` file with a JSON manifest. Fails with a teacher-quality error
/// (exit 3 at the CLI) when the demonstrator's success rate is under the
/// configured floor.
pub fn collect_demos(cfg: &ExperimentConfig, teacher: &TeacherChoice) -> Result<DemoOutput> {
    cfg.validate()?;
    assert_partition(WorldRole::Demo, &cfg.worlds.seeds)?;
    let out = resolve_out_dir(cfg);
    std::fs::create_dir_all(&out)?;
    cfg.save(out.join("config.json"))?;
    let worlds = build_dense_worlds(&cfg.worlds, &cfg.mppi_params())?;

    let tracker = TeacherPolicy::default();
    let loaded;
    let source = match teacher {
        TeacherChoice::PurePursuit => DemoSource::Tracker(&tracker),
        // The planner source reuses the tracker's wrap width.
        TeacherChoice::Mppi => DemoSource::Planner { cfg: cfg.mppi_params(), sigma: tracker.sigma },
        TeacherChoice::Checkpoint(path) => {
            let layout = ModelConfig::new(ObservationSpec::teacher().dim(), 2);
            loaded = ActorCritic::load_pvec(layout, path)
                .map_err(|e| Error::config(format!("teacher checkpoint {}: {e}", path.display())))?;
            DemoSource::Policy(&loaded)
        }
    };
    let (buffer, report) =
        collect_demonstrations(worlds, &source, &cfg.demo_params(), derive_seed(cfg.seed, "demo_collection", 0))?;

    let demo_path = out.join("demos.demo");
    buffer.save_demo(&demo_path)?;
    let (ds, dt, da) = buffer.dims();
    let manifest = DemoManifest {
        source: teacher.describe(),
        content_hash: buffer.content_hash(),
        transitions: buffer.len(),
        episodes: buffer.episode_count(),
        obs_student_dim: ds,
        obs_teacher_dim: dt,
        action_dim: da,
        report: report.clone(),
    };
    let manifest_path = out.join("demo_manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;
    Ok(DemoOutput { out_dir: out, demo_path, manifest_path, report, content_hash: manifest.content_hash })
}

/// Train a student by the configured method on the training partition.
/// Distillation needs `demos`; the imitation baselines query the built-in
/// tracker live. Writes `student.pvec`, `student_stats.jsonl`,
/// `config.json`, and `run_record.json`.
pub fn train_student(cfg: &ExperimentConfig, demos: Option<&Path>) -> Result<TrainOutput> {
    cfg.validate()?;
    if !cfg.method.is_trained() {
        return Err(Error::config(format!(
            "method {} has no training stage; evaluate it directly",
            cfg.method.label()
        )));
    }
    assert_partition(WorldRole::Train, &cfg.worlds.seeds)?;
    let started = Instant::now();
    let out = resolve_out_dir(cfg);
    std::fs::create_dir_all(&out)?;
    cfg.save(out.join("config.json"))?;

    // On-policy methods run on the raw courses; methods that query the
    // tracker live need the planned paths it follows.
    let needs_dense = matches!(cfg.method, Method::Dagger | Method::PpoBc);
    let worlds = if needs_dense {
        build_dense_worlds(&cfg.worlds, &cfg.mppi_params())?
    } else {
        build_worlds(&cfg.worlds)?
    };

    let mut streams = TrainStreams::new(cfg.seed);
    let stats_path = out.join("student_stats.jsonl");

    let (model, curve) = match cfg.method {
        Method::Ppo => {
            let mut env = VehicleEnv::new(worlds.clone(), LearnerView::Student, false)?;
            let mut model = fresh_model(&env, cfg.seed)?;
            let curve = streamed_training(&stats_path, |on| {
                if cfg.budget == 0 {
                    return Ok(Vec::new());
                }
                train_ppo(&mut env, &mut model, &cfg.ppo_params(), cfg.budget, &mut streams, |s, m| on(s, m))
            })?;
            (model, curve)
        }
        Method::Tadpo => {
            let path = demos.ok_or_else(|| {
                Error::config("train-student: distillation needs a demonstration file (--demos)")
            })?;
            if !path.exists() {
                return Err(Error::config(format!("demonstration file {} does not exist", path.display())));
            }
            let buffer = TeacherBuffer::load_demo(path)
                .map_err(|e| Error::config(format!("demonstration file {}: {e}", path.display())))?;
            let mut env = VehicleEnv::new(worlds.clone(), LearnerView::Student, false)?;
            let (ds, _, da) = buffer.dims();
            if ds != env.obs_dim() || da != env.action_dim() {
                return Err(Error::config(format!(
                    "demonstration file {}: stores {ds}-dim observations and {da}-dim actions, \
                     the student view needs {} and {}",
                    path.display(),
                    env.obs_dim(),
                    env.action_dim()
                )));
            }
            let mut model = fresh_model(&env, cfg.seed)?;
            let tcfg = cfg.tadpo_params();
            let curve = streamed_training(&stats_path, |on| {
                if cfg.budget == 0 {
                    return Ok(Vec::new());
                }
                train_tadpo(&mut env, &mut model, &buffer, &tcfg, cfg.budget, &mut streams, |s, m| on(s, m))
            })?;
            (model, curve)
        }
        Method::Dagger => {
            let mut env = VehicleEnv::new(worlds.clone(), LearnerView::Student, true)?;
            let mut model = fresh_model(&env, cfg.seed)?;
            let teacher = TeacherPolicy::default();
            let dcfg = cfg.dagger_params();
            let stats = train_dagger(&mut env, &teacher, &mut model, &dcfg, &mut streams)?;
            write_jsonl(&stats_path, &stats.rounds)?;
            let curve = stats
                .rounds
                .iter()
                .map(|r| CurvePoint {
                    iteration: r.round,
                    env_steps: (r.round + 1) * dcfg.steps_per_round,
                    mean_return: None,
                    success_rate: None,
                })
                .collect();
            (model, curve)
        }
        Method::PpoBc => {
            let mut env = TeacherActionEnv::new(worlds.clone(), TeacherPolicy::default())?;
            let mut model = fresh_model(&env, cfg.seed)?;
            let bcfg = cfg.ppo_bc_params();
            let curve = streamed_training(&stats_path, |on| {
                if cfg.budget == 0 {
                    return Ok(Vec::new());
                }
                train_ppo_bc(&mut env, &mut model, &bcfg, cfg.budget, &mut streams, |s, m| on(s, m))
            })?;
            (model, curve)
        }
        Method::MppiDirect | Method::PurePursuit => unreachable!("rejected above"),
    };

    let checkpoint = out.join("student.pvec");
    model.save_pvec(&checkpoint)?;
    let outcome = evaluate(
        &EvalController::PolicyMean { model: &model, view: LearnerView::Student },
        &worlds,
        cfg.episodes_per_world,
    )?;
    let record = RunRecord::new(
        cfg,
        vec![SeedCurve { seed: cfg.seed, points: curve }],
        rows_from(cfg.method.label(), &outcome),
        started,
    );
    record.save(out.join("run_record.json"))?;
    Ok(TrainOutput { out_dir: out, checkpoint, stats_path, record })
}

/// Load a checkpoint whose observation view is unknown: the file's segment
/// layout decides between the student and the planned-path (teacher) view.
pub fn load_policy_checkpoint(path: &Path) -> Result<(ActorCritic, LearnerView)> {
    let student_dim = ObservationSpec::student().dim();
    let teacher_dim = ObservationSpec::teacher().dim();
    if let Ok(m) = ActorCritic::load_pvec(ModelConfig::new(student_dim, 2), path) {
        return Ok((m, LearnerView::Student));
    }
    match ActorCritic::load_pvec(ModelConfig::new(teacher_dim, 2), path) {
        Ok(m) => Ok((m, LearnerView::Teacher)),
        Err(e) => Err(Error::config(format!(
            "checkpoint {}: layout matches neither the {student_dim}-dim student nor the \
             {teacher_dim}-dim teacher view ({e})",
            path.display()
        ))),
    }
}

/// Evaluate a subject on the evaluation partition by its distribution mode
/// (policies) or its plan (controllers). Writes `eval.csv`, a rendered
/// `eval_table.txt`, and — with `plots` — one SVG per world showing the
/// course and, for policies and the tracker, the driven trajectory.
pub fn evaluate_subject(cfg: &ExperimentConfig, subject: &EvalSubject, plots: bool) -> Result<EvalOutput> {
    cfg.validate()?;
    assert_partition(WorldRole::Eval, &cfg.worlds.seeds)?;
    let out = resolve_out_dir(cfg);
    std::fs::create_dir_all(&out)?;
    cfg.save(out.join("config.json"))?;

    let tracker = TeacherPolicy::default();
    let loaded;
    let (controller, worlds, label) = match subject {
        EvalSubject::PurePursuit => {
            let worlds = build_dense_worlds(&cfg.worlds, &cfg.mppi_params())?;
            (EvalController::Teacher(&tracker), worlds, Method::PurePursuit.label())
        }
        EvalSubject::Mppi => {
            let worlds = build_worlds(&cfg.worlds)?;
            let ctl = EvalController::Mppi { cfg: cfg.mppi_params(), seed: derive_seed(cfg.seed, "eval_mppi", 0) };
            (ctl, worlds, Method::MppiDirect.label())
        }
        EvalSubject::Checkpoint(path) => {
            let (model, view) = load_policy_checkpoint(path)?;
            loaded = model;
            let worlds = match view {
                LearnerView::Student => build_worlds(&cfg.worlds)?,
                LearnerView::Teacher => build_dense_worlds(&cfg.worlds, &cfg.mppi_params())?,
            };
            (EvalController::PolicyMean { model: &loaded, view }, worlds, cfg.method.label())
        }
    };

    let outcome = evaluate(&controller, &worlds, cfg.episodes_per_world)?;
    let rows = rows_from(label, &outcome);
    let csv_path = out.join("eval.csv");
    write_csv(&csv_path, &rows)?;
    let table_path = out.join("eval_table.txt");
    std::fs::write(&table_path, render_table(&rows))?;

    if plots {
        for w in &worlds {
            let mut overlays = Vec::new();
            if let Some(d) = &w.dense {
                overlays.push(Overlay::new("plan", d.points().to_vec()));
            }
            if let Some(track) = trace_episode(&controller, w)? {
                overlays.push(Overlay::new("driven", track));
            }
            world_svg(out.join(format!("world_{}.svg", w.spec.seed)), &w.spec, &overlays)?;
        }
    }
    Ok(EvalOutput { out_dir: out, csv_path, table_path, rows, aggregate: outcome.aggregate })
}

/// Drive one episode for the render overlay. The sampling planner is skipped
/// (an extra run would be as expensive as the evaluation itself).
fn trace_episode(controller: &EvalController, w: &WorldInstance) -> Result<Option<Vec<Vec2>>> {
    let view = match controller {
        EvalController::PolicyMean { view, .. } => *view,
        EvalController::Teacher(_) => LearnerView::Student,
        EvalController::Mppi { .. } => return Ok(None),
    };
    let mut env = VehicleEnv::new(vec![w.clone()], view, false)?;
    env.record_trajectory(true);
    let mut obs = env.reset();
    loop {
        let action: Vec<f64> = match controller {
            EvalController::PolicyMean { model, .. } => model.policy_mean(&obs.primary),
            EvalController::Teacher(t) => {
                let dense = w.dense.as_ref().expect("tracker evaluation checked density");
                t.mean(dense, &env.vehicle_state(), env.params()).to_vec()
            }
            EvalController::Mppi { .. } => unreachable!("returned above"),
        };
        let step = env.step(&action);
        if step.terminated || step.truncated {
            break;
        }
        obs = step.obs;
    }
    Ok(Some(env.trajectory().iter().map(|p| p.state.position).collect()))
}
