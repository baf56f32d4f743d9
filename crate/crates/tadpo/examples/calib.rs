// Scratch calibration harness (not part of the deliverable).
use std::time::Instant;

use tadpo::baselines::eval::{evaluate, EvalController, EvalRow};
use tadpo::harness::suites::{suite_spec, Suite, TRAINED_METHODS};
use tadpo::harness::worldset::{build_dense_worlds, build_worlds, role_seeds, WorldRole};
use tadpo::harness::{collect_demos, load_policy_checkpoint, train_student, ExperimentConfig, Method, TeacherChoice, WorldSelection};
use tadpo::planners::teacher::TeacherPolicy;
use tadpo::rng::derive_seed;
use tadpo::worlds::world::WorldFamily;

fn main() -> tadpo::Result<()> {
    let stage = std::env::args().nth(1).unwrap_or_else(|| "experts".into());
    let spec = suite_spec(Suite::Trend);
    let (family, difficulty) = spec.families[0];
    assert_eq!(family, WorldFamily::Obstacles);
    let master = 0u64;
    let eval_sel = WorldSelection {
        family,
        difficulty,
        seeds: role_seeds(WorldRole::Eval, 0, spec.eval_worlds),
    };
    let out_root = std::path::PathBuf::from("/tmp/calib");
    std::fs::create_dir_all(&out_root)?;

    match stage.as_str() {
        "experts" => {
            let t0 = Instant::now();
            let eval_dense = build_dense_worlds(&eval_sel, &spec.mppi)?;
            println!("densify 20 eval worlds: {:.1}s", t0.elapsed().as_secs_f64());
            let tracker = TeacherPolicy::default();
            let t0 = Instant::now();
            let out = evaluate(&EvalController::Teacher(&tracker), &eval_dense, 1)?;
            println!(
                "tracker: sr {:.2} cp {:.2} ms {:.2} ({:.1}s)",
                out.aggregate.success_rate,
                out.aggregate.mean_chain_progress,
                out.aggregate.mean_speed,
                t0.elapsed().as_secs_f64()
            );
            for w in &out.per_world {
                if w.summary.success_rate < 1.0 {
                    println!("  tracker failed world {} (cp {:.2})", w.world_seed, w.summary.mean_chain_progress);
                }
            }
            let eval_sparse = build_worlds(&eval_sel)?;
            let t0 = Instant::now();
            let ctl = EvalController::Mppi { cfg: spec.mppi, seed: derive_seed(master, "suite_mppi", 0) };
            let out = evaluate(&ctl, &eval_sparse, 1)?;
            println!(
                "mppi full ({}x{}): sr {:.2} cp {:.2} ms {:.2} ({:.1}s)",
                spec.mppi.samples,
                spec.mppi.horizon,
                out.aggregate.success_rate,
                out.aggregate.mean_chain_progress,
                out.aggregate.mean_speed,
                t0.elapsed().as_secs_f64()
            );
            let scaled = spec.mppi.scaled_down(4);
            let t0 = Instant::now();
            let ctl = EvalController::Mppi { cfg: scaled, seed: derive_seed(master, "suite_mppi", 0) };
            let out = evaluate(&ctl, &eval_sparse, 1)?;
            println!(
                "mppi 1/16 ({}x{}): sr {:.2} cp {:.2} ms {:.2} ({:.1}s)",
                scaled.samples,
                scaled.horizon,
                out.aggregate.success_rate,
                out.aggregate.mean_chain_progress,
                out.aggregate.mean_speed,
                t0.elapsed().as_secs_f64()
            );
        }
        "demo" => {
            let t0 = Instant::now();
            let mut dcfg = ExperimentConfig::new(
                Method::Tadpo,
                family,
                role_seeds(WorldRole::Demo, 0, spec.demo_worlds),
                out_root.join("demos"),
            );
            dcfg.worlds.difficulty = difficulty;
            dcfg.seed = derive_seed(master, "suite_demo", 0);
            dcfg.demos = Some(spec.demos);
            dcfg.mppi = Some(spec.mppi);
            let out = collect_demos(&dcfg, &TeacherChoice::PurePursuit)?;
            println!(
                "demos: {} transitions, {} episodes kept / {} attempted, sr {:.2} ({:.1}s)",
                out.report.transitions,
                out.report.episodes_kept,
                out.report.episodes_attempted,
                out.report.success_rate,
                t0.elapsed().as_secs_f64()
            );
        }
        m @ ("tadpo" | "ppo" | "dagger" | "ppo_bc") => {
            let method = TRAINED_METHODS.into_iter().find(|x| x.label() == m).unwrap();
            let eval_sparse = build_worlds(&eval_sel)?;
            let demo_path = out_root.join("demos/demos.demo");
            let si: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(0);
            let t0 = Instant::now();
            let rdir = out_root.join(format!("{m}_{si}"));
            let mut cfg = ExperimentConfig::new(method, family, role_seeds(WorldRole::Train, 0, spec.train_worlds), rdir);
            cfg.worlds.difficulty = difficulty;
            cfg.seed = derive_seed(master, method.label(), si as u64);
            cfg.budget = if method == Method::Dagger { spec.dagger_rounds } else { spec.trained_budget };
            cfg.mppi = Some(spec.mppi);
            match method {
                Method::Tadpo => {
                    cfg.tadpo = Some(tadpo::tadpo::TadpoConfig { ppo: spec.ppo.clone(), ..Default::default() })
                }
                Method::Ppo => cfg.ppo = Some(spec.ppo.clone()),
                Method::Dagger => {
                    cfg.dagger = Some(tadpo::baselines::dagger::DaggerConfig {
                        steps_per_round: spec.ppo.n_steps,
                        ..tadpo::baselines::dagger::DaggerConfig::with_rounds(spec.dagger_rounds)
                    })
                }
                Method::PpoBc => {
                    cfg.ppo_bc = Some(tadpo::baselines::ppo_bc::PpoBcConfig { ppo: spec.ppo.clone(), ..Default::default() })
                }
                _ => unreachable!(),
            }
            let demos = (method == Method::Tadpo).then_some(demo_path.as_path());
            let tout = train_student(&cfg, demos)?;
            let train_s = t0.elapsed().as_secs_f64();
            for p in tout.record.curves[0].points.iter().filter(|p| p.iteration % 10 == 0 || p.iteration + 1 == cfg.budget) {
                println!(
                    "  iter {:>3}: return {:>8.2} sr {:.2}",
                    p.iteration,
                    p.mean_return.unwrap_or(f64::NAN),
                    p.success_rate.unwrap_or(f64::NAN)
                );
            }
            let (model, view) = load_policy_checkpoint(&tout.checkpoint)?;
            let out = evaluate(&EvalController::PolicyMean { model: &model, view }, &eval_sparse, 1)?;
            let row = EvalRow::new(m, family.label(), si as u64, &out.aggregate);
            println!(
                "{m}[{si}]: eval sr {:.2} cp {:.2} ms {:.2} | train {:.0}s eval {:.0}s",
                row.success_rate,
                row.chain_progress,
                row.mean_speed,
                train_s,
                t0.elapsed().as_secs_f64() - train_s
            );
        }
        "flank" => {
            // How far off-route does the capped planner wander? Offsets past
            // the widest possible gap position mean it rounds the wall ends.
            use tadpo::planners::mppi::MppiController;
            use tadpo::worlds::vehicle::{step_vehicle, VehicleParams, VehicleState};
            let diff: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
            let sel = WorldSelection { family, difficulty: diff, seeds: role_seeds(WorldRole::Eval, 0, 6) };
            let worlds = build_worlds(&sel)?;
            let p = VehicleParams::default();
            for w in &worlds {
                let ws = &w.spec;
                let chain = ws.chain();
                let mut ctl = MppiController::new(spec.mppi.scaled_down(4), p, 1);
                let mut s = VehicleState::at(ws.start, ws.start_heading);
                let mut max_off: f64 = 0.0;
                let mut outcome = "timeout";
                for _ in 0..400 {
                    let u = ctl.plan(ws, &chain, &s);
                    let cap = ws.zone_cap(s.position);
                    s = step_vehicle(&s, u[0], u[1], &p, cap);
                    max_off = max_off.max(chain.project(s.position).distance);
                    if ws.collision(s.position, p.radius) {
                        outcome = "collision";
                        break;
                    }
                    if s.position.dist(ws.goal()) <= ws.goal_radius {
                        outcome = "goal";
                        break;
                    }
                }
                let worst_gap = ws.walls.iter().map(|x| x.gap_center.abs() + x.gap_half_width).fold(0.0, f64::max);
                println!("world {}: {outcome}, max offset {max_off:.1} (widest gap edge {worst_gap:.1})", ws.seed);
            }
        }
        "gap" => {
            // Generous-budget sweep at the suite difficulty: find the
            // smallest config with sr >= 0.9 whose 1/16 cap drops >= 0.3.
            let mut candidates = Vec::new();
            for (s, h) in [(384usize, 32usize), (512, 32), (384, 48), (512, 48)] {
                let mut c = spec.mppi;
                c.samples = s;
                c.horizon = h;
                candidates.push(c);
            }
            for diff in [difficulty] {
                let sel = WorldSelection {
                    family,
                    difficulty: diff,
                    seeds: role_seeds(WorldRole::Eval, 0, spec.eval_worlds),
                };
                let worlds = build_worlds(&sel)?;
                let mut pairs = Vec::new();
                for c in &candidates {
                    pairs.push(("full", *c));
                    pairs.push(("1/16", c.scaled_down(4)));
                }
                for (name, cfg) in pairs {
                    let t0 = Instant::now();
                    let ctl = EvalController::Mppi { cfg, seed: derive_seed(master, "suite_mppi", 0) };
                    let out = evaluate(&ctl, &worlds, 1)?;
                    println!(
                        "d={diff:.1} {name} ({}x{}): sr {:.2} cp {:.2} ms {:.2} ({:.1}s)",
                        cfg.samples,
                        cfg.horizon,
                        out.aggregate.success_rate,
                        out.aggregate.mean_chain_progress,
                        out.aggregate.mean_speed,
                        t0.elapsed().as_secs_f64()
                    );
                }
            }
        }
        other => panic!("unknown stage {other}"),
    }
    Ok(())
}
