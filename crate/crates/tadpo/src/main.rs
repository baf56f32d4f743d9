//! Command-line front end. Every subcommand is a thin wrapper over the
//! library's harness operations; exit codes are 0 on success, 2 for
//! configuration problems, 3 for a teacher that failed its quality floor,
//! and 1 otherwise.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tadpo::harness::{
    collect_demos, evaluate_subject, output_root, run_suite, train_student, train_teacher, EvalSubject,
    ExperimentConfig, Suite, TeacherChoice,
};

#[derive(Parser)]
#[command(name = "tadpo", version, about = "Teacher-guided policy training for vehicle navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the privileged teacher policy over planned dense paths.
    TrainTeacher {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Collect frozen demonstrations from a teacher.
    CollectDemos {
        #[arg(long)]
        config: PathBuf,
        /// Teacher checkpoint path, `pure-pursuit`, or `mppi`.
        #[arg(long)]
        teacher: TeacherChoice,
    },
    /// Train a student with the method named in the config.
    TrainStudent {
        #[arg(long)]
        config: PathBuf,
        /// Demonstration file; required by the distillation method.
        #[arg(long)]
        demos: Option<PathBuf>,
    },
    /// Evaluate a checkpoint or built-in controller on held-out worlds.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint path, `pure-pursuit`, or `mppi`.
        #[arg(long)]
        subject: EvalSubject,
        /// Render per-world SVG plots alongside the report.
        #[arg(long)]
        plots: bool,
    },
    /// Run a canned end-to-end comparison suite.
    Reproduce {
        /// `smoke` (minutes) or `trend` (the full comparison).
        #[arg(long)]
        suite: Suite,
        /// Master seed; every stream in the suite derives from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default: a suite directory under the output root).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cmd: Command) -> tadpo::Result<()> {
    match cmd {
        Command::TrainTeacher { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = train_teacher(&cfg)?;
            println!("teacher checkpoint: {}", out.checkpoint.display());
            println!("stats: {}", out.stats_path.display());
            for r in &out.record.final_eval {
                println!("world {}: sr {:.2} cp {:.2} ms {:.2}", r.seed, r.success_rate, r.chain_progress, r.mean_speed);
            }
        }
        Command::CollectDemos { config, teacher } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = collect_demos(&cfg, &teacher)?;
            println!("demonstrations: {}", out.demo_path.display());
            println!("manifest: {}", out.manifest_path.display());
            println!(
                "kept {} transitions from {} episodes (success rate {:.2})",
                out.report.transitions, out.report.episodes_kept, out.report.success_rate
            );
        }
        Command::TrainStudent { config, demos } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = train_student(&cfg, demos.as_deref())?;
            println!("student checkpoint: {}", out.checkpoint.display());
            println!("stats: {}", out.stats_path.display());
            for r in &out.record.final_eval {
                println!("world {}: sr {:.2} cp {:.2} ms {:.2}", r.seed, r.success_rate, r.chain_progress, r.mean_speed);
            }
        }
        Command::Evaluate { config, subject, plots } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = evaluate_subject(&cfg, &subject, plots)?;
            print!("{}", std::fs::read_to_string(&out.table_path)?);
            println!("report: {}", out.csv_path.display());
        }
        Command::Reproduce { suite, seed, out } => {
            let root = out.unwrap_or_else(|| output_root().join(format!("reproduce_{}", suite.label())));
            let outcome = run_suite(suite, seed, &root)?;
            print!("{}", outcome.table);
            println!("report: {}", outcome.out_dir.join("report.csv").display());
            println!("manifest hash: {}", outcome.combined_hash);
            if let Some(v) = &outcome.verdict {
                print!("{}", v.render());
                if !v.pass {
                    std::process::exit(1);
                }
            }
        }
    }
    Ok(())
}
