//! Experiment orchestration: configs, seed-partitioned world sets, the
//! train/collect/evaluate operations behind the CLI, canned comparison
//! suites, and the report/plot emitters.

pub mod config;
pub mod hashing;
pub mod plot;
pub mod run;
pub mod stats;
pub mod suites;
pub mod table;
pub mod worldset;

pub use config::{ExperimentConfig, Method, WorldSelection};
pub use run::{
    collect_demos, evaluate_subject, load_policy_checkpoint, output_root, resolve_out_dir, train_student,
    train_teacher, CurvePoint, DemoManifest, DemoOutput, EvalOutput, EvalSubject, RunRecord, SeedCurve,
    TeacherChoice, TrainOutput,
};
pub use suites::{judge_trend, run_suite, suite_spec, Suite, SuiteOutcome, SuiteSpec, Verdict};
pub use table::render_table;
pub use worldset::{assert_partition, build_dense_worlds, build_worlds, role_seeds, WorldRole};
