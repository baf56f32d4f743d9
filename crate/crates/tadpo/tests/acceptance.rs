//! Release gates. Eight checks, each printing one PASS/FAIL line (visible
//! with `--nocapture` / `--show-output`): exact reductions and freezes,
//! gradient and estimator oracles, the scaled method comparison, planner
//! budget sensitivity, and end-to-end rerun determinism.

use std::time::Instant;

use tadpo::baselines::eval::{evaluate, EvalController};
use tadpo::baselines::ppo_bc::{ppo_bc_loss, ppo_bc_loss_grad, PpoBcConfig};
use tadpo::gradcheck::{finite_diff_grad, max_abs_err, max_abs_rel_err};
use tadpo::harness::suites::{run_suite, suite_spec, Suite};
use tadpo::harness::worldset::{build_dense_worlds, build_worlds, role_seeds, WorldRole};
use tadpo::harness::{
    collect_demos, load_policy_checkpoint, train_student, ExperimentConfig, Method, TeacherChoice,
    WorldSelection,
};
use tadpo::nn::{ActorCritic, ModelConfig};
use tadpo::planners::teacher::TeacherPolicy;
use tadpo::ppo::{ppo_loss, ppo_loss_grad, train_ppo, Minibatch, PpoConfig};
use tadpo::rng::{derive_seed, stream, TrainStreams};
use tadpo::rollout::{discounted_returns, gae_advantages, TeacherBuffer};
use tadpo::tadpo::{
    tad_loss, tad_loss_grad, tadpo_update, train_tadpo, TadpoConfig, TeacherMinibatch,
    TeacherSampler,
};
use tadpo::worlds::env::{LearnerView, VehicleEnv};
use tadpo::worlds::world::WorldFamily;

use rand::Rng;

fn gate(index: usize, name: &str, pass: bool, detail: String) {
    println!("[{index}/8] {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "[{index}/8] {name}: {detail}");
}

fn bits(model: &ActorCritic) -> Vec<u64> {
    model.params.values().iter().map(|v| v.to_bits()).collect()
}

// ---------------------------------------------------------------------------
// 1. With the distillation mix at zero, the hybrid trainer must walk the
//    exact same parameter trajectory as the plain on-policy trainer.

#[test]
fn gate1_zero_mix_reduces_to_plain_ppo() {
    let sel = WorldSelection {
        family: WorldFamily::Obstacles,
        difficulty: 0.5,
        seeds: vec![0, 1],
    };
    let worlds = build_worlds(&sel).unwrap();
    let ppo = PpoConfig { n_steps: 256, epochs: 4, minibatch_size: 64, ..Default::default() };
    let iterations = 4;

    let run = |with_hybrid: bool| -> Vec<Vec<u64>> {
        let mut env = VehicleEnv::new(worlds.clone(), LearnerView::Student, false).unwrap();
        let mut model = ActorCritic::new(
            ModelConfig::new(env_obs_dim(&env), 2),
            &mut stream(5, "model_init", 0),
        )
        .unwrap();
        let mut streams = TrainStreams::new(77);
        let mut snaps: Vec<Vec<u64>> = Vec::new();
        if with_hybrid {
            let empty = TeacherBuffer::new(env_obs_dim(&env), 13, 2);
            let cfg = TadpoConfig { teacher_prob: 0.0, ppo: ppo.clone(), ..Default::default() };
            train_tadpo(&mut env, &mut model, &empty, &cfg, iterations, &mut streams, |_, m| {
                snaps.push(bits(m))
            })
            .unwrap();
        } else {
            train_ppo(&mut env, &mut model, &ppo, iterations, &mut streams, |_, m| {
                snaps.push(bits(m))
            })
            .unwrap();
        }
        snaps
    };

    let plain = run(false);
    let hybrid = run(true);
    let pass = plain.len() == iterations && plain == hybrid;
    gate(
        1,
        "zero distillation mix reduces to plain on-policy training",
        pass,
        format!("{} iterations, trajectories bitwise {}", plain.len(), if plain == hybrid { "identical" } else { "DIVERGED" }),
    );
}

fn env_obs_dim(env: &VehicleEnv) -> usize {
    use tadpo::rollout::Env;
    env.obs_dim()
}

// ---------------------------------------------------------------------------
// 2. Per-sample gradient gating: a demonstration sample contributes zero
//    actor gradient exactly when its advantage estimate is non-positive, its
//    ratio sits at or above the ceiling, or its log-ratio hit the hard
//    clamp; every surviving sample's gradient matches finite differences.

#[test]
fn gate2_sample_gates_zero_gradients_exactly() {
    let mcfg = ModelConfig { hidden: vec![8, 8], ..ModelConfig::new(6, 2) };
    let model = ActorCritic::new(mcfg.clone(), &mut stream(3, "model", 0)).unwrap();
    let snapshot = ActorCritic::new(mcfg, &mut stream(4, "snapshot", 0)).unwrap();
    let cfg = TadpoConfig { entropy_coef: 0.0, epsilon_mu: 0.5, ..Default::default() };
    let ceiling = 1.0 + cfg.epsilon_mu;

    // Log-ratio targets: active (<ln 1.5 with margin), clipped (>=ln 1.5),
    // and hard-clamped (|x| >= 30). Advantage targets: negatives are gated.
    let ln_rho = [
        0.20, -0.30, 0.92, 35.0, -35.0, 0.10, 0.35, -0.15, 2.00, 0.05, -40.0, 0.30, 0.25, -0.50,
        1.50, 0.15, -0.05, 0.34,
    ];
    let dtarget = [
        1.5, -1.0, 2.0, 0.7, 1.2, -0.4, 0.9, 1.1, -2.0, 0.6, 1.4, 0.8, -0.7, 1.0, 1.3, -1.2, 0.5,
        1.6,
    ];
    let n = ln_rho.len();

    let mut rng = stream(5, "batch", 0);
    let mut obs = Vec::new();
    let mut actions = Vec::new();
    let mut teacher_logprobs = Vec::new();
    let mut returns = Vec::new();
    let mut logpi0 = Vec::new();
    for k in 0..n {
        let o: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (lp, _) = model.logprob_entropy(&o, &a);
        logpi0.push(lp);
        teacher_logprobs.push(lp - ln_rho[k]);
        returns.push(dtarget[k] + snapshot.value_of(&o));
        obs.push(o);
        actions.push(a);
    }
    let batch = TeacherMinibatch {
        obs_student: obs.clone(),
        actions: actions.clone(),
        teacher_logprobs: teacher_logprobs.clone(),
        returns: returns.clone(),
    };

    // Independent normalization oracle (scale only, population std).
    let deltas: Vec<f64> = returns
        .iter()
        .zip(&obs)
        .map(|(r, o)| r - snapshot.value_of(o))
        .collect();
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let std = (deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64).sqrt();
    let dhat: Vec<f64> = deltas.iter().map(|d| d / (std + 1e-8)).collect();

    let mut counts = [0usize; 4]; // gated, clamped, clipped, active
    let mut worst_rel = 0.0f64;
    for k in 0..n {
        // Isolate sample k: every other sample's stored log-prob is pushed
        // 40 nats under the live policy, hard-clamping its log-ratio, which
        // must silence its gradient while the normalization stays put.
        let mut iso = batch.clone();
        for j in 0..n {
            if j != k {
                iso.teacher_logprobs[j] = logpi0[j] + 40.0;
            }
        }
        let (_, grad) = tad_loss_grad(&model, &snapshot, &iso, &cfg);

        let gated = dhat[k] <= 0.0;
        let clamped = ln_rho[k].abs() >= 30.0;
        let clipped = ln_rho[k].exp() >= ceiling;
        if gated || clamped || clipped {
            counts[if gated { 0 } else if clamped { 1 } else { 2 }] += 1;
            let zero = grad.values().iter().all(|v| *v == 0.0);
            assert!(zero, "sample {k} is gated off but left a gradient");
        } else {
            counts[3] += 1;
            let mut scratch = model.clone();
            let fd = finite_diff_grad(&model.params, 1e-5, |p| {
                scratch.params = p.clone();
                tad_loss(&scratch, &snapshot, &iso, &cfg).objective
            });
            worst_rel = worst_rel.max(max_abs_rel_err(grad.values(), &fd, 1e-2));
        }
    }
    assert!(counts[0] >= 4 && counts[1] >= 2 && counts[2] >= 2 && counts[3] >= 6, "{counts:?}");

    // Once a sample is gated or ratio-capped, its stored log-prob must not
    // leak into the batch gradient at all: shifting it leaves every gradient
    // bit unchanged.
    let (_, g0) = tad_loss_grad(&model, &snapshot, &batch, &cfg);
    let gated_k = dtarget.iter().position(|d| *d < 0.0).unwrap();
    let clipped_k = (0..n).find(|&k| dtarget[k] > 0.0 && ln_rho[k] >= 0.5 && ln_rho[k] < 30.0).unwrap();
    let mut shifted = batch.clone();
    shifted.teacher_logprobs[gated_k] += 3.7;
    shifted.teacher_logprobs[clipped_k] -= 2.0; // ratio climbs, stays capped
    let (_, g1) = tad_loss_grad(&model, &snapshot, &shifted, &cfg);
    let invariant = g0
        .values()
        .iter()
        .zip(g1.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    let pass = worst_rel < 1e-6 && invariant;
    gate(
        2,
        "advantage/ratio gates silence per-sample gradients",
        pass,
        format!(
            "classes gated/clamped/capped/active = {}/{}/{}/{}, active worst rel err {worst_rel:.2e}, gated bits {}",
            counts[0], counts[1], counts[2], counts[3],
            if invariant { "inert" } else { "LEAKED" }
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Distillation never moves the critic, and the demonstration store is
//    immutable for the whole life of a training run.

#[test]
fn gate3_critic_frozen_and_buffer_immutable() {
    let mcfg = ModelConfig { hidden: vec![8, 8], ..ModelConfig::new(6, 2) };
    let mut model = ActorCritic::new(mcfg, &mut stream(11, "model", 0)).unwrap();
    let snapshot = model.clone();

    let mut rng = stream(12, "fill", 0);
    let mut buffer = TeacherBuffer::new(6, 4, 2);
    for ep in 0..8u64 {
        let t = 50;
        let obs_s: Vec<Vec<f64>> = (0..t).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let obs_t: Vec<Vec<f64>> = (0..t).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let act: Vec<Vec<f64>> = (0..t).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let rew: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lp: Vec<f64> = (0..t).map(|_| rng.gen_range(-3.0..0.0)).collect();
        let ret: Vec<f64> = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
        buffer.push_episode(ep, &obs_s, &obs_t, &act, &rew, &lp, &ret).unwrap();
    }
    buffer.freeze();
    let hash0 = buffer.content_hash();
    let critic0 = model.critic_bits();

    let cfg = TadpoConfig::default();
    let mut opt = model.optimizer(cfg.ppo.learning_rate);
    let mut pool = stream(9, "pool", 0);
    let mut sampler = TeacherSampler::new(buffer.len());
    sampler.reset(&mut pool);
    let mut frozen_all = true;
    for _ in 0..100 {
        let idx = sampler.draw(32, &mut pool);
        let mb = TeacherMinibatch::gather(&buffer, &idx);
        tadpo_update(&mut model, &mut opt, &snapshot, &mb, &cfg).unwrap();
        frozen_all &= model.critic_bits() == critic0;
    }
    let actor_moved = bits(&model) != bits(&snapshot);
    let buffer_same = buffer.content_hash() == hash0;

    // And across a real mixed training run the buffer hash still cannot move.
    let sel = WorldSelection { family: WorldFamily::Obstacles, difficulty: 0.5, seeds: vec![2] };
    let worlds = build_worlds(&sel).unwrap();
    let mut env = VehicleEnv::new(worlds, LearnerView::Student, false).unwrap();
    let sdim = env_obs_dim(&env);
    let mut demo = TeacherBuffer::new(sdim, 13, 2);
    let mut drng = stream(13, "demo_fill", 0);
    for ep in 0..2u64 {
        let t = 64;
        let obs_s: Vec<Vec<f64>> = (0..t).map(|_| (0..sdim).map(|_| drng.gen_range(-1.0..1.0)).collect()).collect();
        let obs_t: Vec<Vec<f64>> = (0..t).map(|_| (0..13).map(|_| drng.gen_range(-1.0..1.0)).collect()).collect();
        let act: Vec<Vec<f64>> = (0..t).map(|_| (0..2).map(|_| drng.gen_range(-1.0..1.0)).collect()).collect();
        let rew: Vec<f64> = (0..t).map(|_| drng.gen_range(-1.0..1.0)).collect();
        let lp: Vec<f64> = (0..t).map(|_| drng.gen_range(-3.0..0.0)).collect();
        let ret: Vec<f64> = (0..t).map(|_| drng.gen_range(-2.0..2.0)).collect();
        demo.push_episode(ep, &obs_s, &obs_t, &act, &rew, &lp, &ret).unwrap();
    }
    demo.freeze();
    let demo_hash = demo.content_hash();
    let mut smodel =
        ActorCritic::new(ModelConfig::new(sdim, 2), &mut stream(14, "student", 0)).unwrap();
    let tcfg = TadpoConfig {
        teacher_prob: 0.75,
        ppo: PpoConfig { n_steps: 128, epochs: 2, minibatch_size: 64, ..Default::default() },
        ..Default::default()
    };
    train_tadpo(&mut env, &mut smodel, &demo, &tcfg, 2, &mut TrainStreams::new(15), |_, _| {})
        .unwrap();
    let demo_same = demo.content_hash() == demo_hash;

    let pass = frozen_all && actor_moved && buffer_same && demo_same;
    gate(
        3,
        "critic bits frozen across distillation; demonstration store immutable",
        pass,
        format!(
            "100 isolated steps: critic {}, actor {}; buffer hashes {}",
            if frozen_all { "frozen" } else { "MOVED" },
            if actor_moved { "moved" } else { "STUCK" },
            if buffer_same && demo_same { "stable" } else { "CHANGED" }
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. The three hand-written loss gradients against central differences,
//    32 random draws each.

#[test]
fn gate4_loss_gradients_match_finite_differences() {
    let mut worst = [0.0f64; 3];
    for draw in 0..32u64 {
        let mcfg = ModelConfig { hidden: vec![8, 8], ..ModelConfig::new(5, 2) };
        let model =
            ActorCritic::new(mcfg.clone(), &mut stream(100 + draw, "model", 0)).unwrap();
        let mut rng = stream(200 + draw, "batch", 0);
        let n = 8 + (draw as usize % 3) * 4;

        // Shared state batch. Behavior log-probs sit a safe margin away from
        // the surrogate's clip corners.
        let mut obs = Vec::new();
        let mut actions = Vec::new();
        let mut old_logprobs = Vec::new();
        let mut advantages = Vec::new();
        let mut returns = Vec::new();
        let mut teacher_actions = Vec::new();
        for _ in 0..n {
            let o: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (lp, _) = model.logprob_entropy(&o, &a);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            old_logprobs.push(lp + sign * rng.gen_range(0.05..0.15));
            advantages.push(rng.gen_range(0.2..2.0) * sign);
            returns.push(model.value_of(&o) + rng.gen_range(-1.0..1.0));
            teacher_actions.push((0..2).map(|_| rng.gen_range(-0.8..0.8)).collect::<Vec<f64>>());
            obs.push(o);
            actions.push(a);
        }
        let mb = Minibatch {
            obs: obs.clone(),
            obs_alt: Some(teacher_actions),
            actions: actions.clone(),
            old_logprobs,
            advantages,
            returns: returns.clone(),
        };

        let pcfg = PpoConfig::default();
        let (_, g) = ppo_loss_grad(&model, &mb, &pcfg);
        let mut scratch = model.clone();
        let fd = finite_diff_grad(&model.params, 1e-5, |p| {
            scratch.params = p.clone();
            ppo_loss(&scratch, &mb, &pcfg).objective
        });
        worst[0] = worst[0].max(max_abs_rel_err(g.values(), &fd, 1e-2));

        // Distillation loss over demonstration pairs with mixed gating.
        let snapshot =
            ActorCritic::new(mcfg.clone(), &mut stream(300 + draw, "snapshot", 0)).unwrap();
        let mut t_logprobs = Vec::new();
        let mut t_returns = Vec::new();
        for k in 0..n {
            let (lp, _) = model.logprob_entropy(&obs[k], &actions[k]);
            let target = [-0.3, 0.2, 0.92, 35.0, 0.1, -0.15][k % 6];
            t_logprobs.push(lp - target);
            let sign = if k % 5 == 0 { -1.0 } else { 1.0 };
            t_returns.push(snapshot.value_of(&obs[k]) + sign * rng.gen_range(0.4..2.0));
        }
        let tmb = TeacherMinibatch {
            obs_student: obs.clone(),
            actions: actions.clone(),
            teacher_logprobs: t_logprobs,
            returns: t_returns,
        };
        let tcfg = TadpoConfig::default(); // entropy bonus active
        let (_, tg) = tad_loss_grad(&model, &snapshot, &tmb, &tcfg);
        let mut scratch = model.clone();
        let tfd = finite_diff_grad(&model.params, 1e-5, |p| {
            scratch.params = p.clone();
            tad_loss(&scratch, &snapshot, &tmb, &tcfg).objective
        });
        worst[1] = worst[1].max(max_abs_rel_err(tg.values(), &tfd, 1e-2));

        // KL-regularized surrogate toward the teacher's narrow Gaussian.
        let bcfg = PpoBcConfig { beta_kl: 0.7, ..Default::default() };
        let (_, bg) = ppo_bc_loss_grad(&model, &mb, &bcfg).unwrap();
        let mut scratch = model.clone();
        let bfd = finite_diff_grad(&model.params, 1e-5, |p| {
            scratch.params = p.clone();
            ppo_bc_loss(&scratch, &mb, &bcfg).unwrap().objective
        });
        worst[2] = worst[2].max(max_abs_rel_err(bg.values(), &bfd, 1e-2));
    }
    let pass = worst.iter().all(|w| *w < 1e-4);
    gate(
        4,
        "loss gradients match central differences",
        pass,
        format!(
            "32 draws each, worst rel err: surrogate {:.2e}, distillation {:.2e}, kl-regularized {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Return and advantage recursions against brute-force summation.

#[test]
fn gate5_return_and_advantage_oracles() {
    let mut rng = stream(31, "sequences", 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=64usize);
        let rewards: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.15)).collect();
        let bootstrap = rng.gen_range(-2.0..2.0);
        let gamma = rng.gen_range(0.9..0.999);
        let lambda = rng.gen_range(0.9..0.99);

        let got_r = discounted_returns(&rewards, &dones, bootstrap, gamma);
        let want_r: Vec<f64> = (0..n)
            .map(|t| {
                let mut acc = 0.0;
                let mut g = 1.0;
                let mut j = t;
                loop {
                    acc += g * rewards[j];
                    if dones[j] {
                        break;
                    }
                    g *= gamma;
                    if j + 1 == n {
                        acc += g * bootstrap;
                        break;
                    }
                    j += 1;
                }
                acc
            })
            .collect();
        worst = worst.max(max_abs_err(&got_r, &want_r));

        let got_a = gae_advantages(&rewards, &values, &dones, bootstrap, gamma, lambda);
        let want_a: Vec<f64> = (0..n)
            .map(|t| {
                let mut acc = 0.0;
                let mut w = 1.0;
                for j in t..n {
                    let next_v = if dones[j] {
                        0.0
                    } else if j + 1 == n {
                        bootstrap
                    } else {
                        values[j + 1]
                    };
                    acc += w * (rewards[j] + gamma * next_v - values[j]);
                    if dones[j] {
                        break;
                    }
                    w *= gamma * lambda;
                }
                acc
            })
            .collect();
        worst = worst.max(max_abs_err(&got_a, &want_a));
    }
    gate(
        5,
        "return and advantage recursions match brute force",
        worst <= 1e-10,
        format!("1000 sequences (len <= 64), worst abs err {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 6. The scaled comparison on the obstacle family: the distilled student
//    clears the bar, pure on-policy training does not, imitation lands
//    below the distilled student on success and speed, and both experts
//    stay near-perfect.

#[test]
fn gate6_obstacle_comparison_ordering() {
    let t0 = Instant::now();
    let spec = suite_spec(Suite::Trend);
    let (family, difficulty) = spec.families[0];
    assert_eq!(family, WorldFamily::Obstacles);
    let tmp = tempfile::tempdir().unwrap();
    let master = 0u64;

    let eval_sel = WorldSelection {
        family,
        difficulty,
        seeds: role_seeds(WorldRole::Eval, 0, spec.eval_worlds),
    };
    let eval_sparse = build_worlds(&eval_sel).unwrap();

    // Demonstrations from the plan tracker.
    let mut dcfg = ExperimentConfig::new(
        Method::Tadpo,
        family,
        role_seeds(WorldRole::Demo, 0, spec.demo_worlds),
        tmp.path().join("demos"),
    );
    dcfg.worlds.difficulty = difficulty;
    dcfg.seed = derive_seed(master, "suite_demo", 0);
    dcfg.demos = Some(spec.demos.clone());
    dcfg.mppi = Some(spec.mppi);
    let demos = collect_demos(&dcfg, &TeacherChoice::PurePursuit).unwrap();

    // Three students, three seeds each.
    let methods = [Method::Tadpo, Method::Ppo, Method::Dagger];
    let mut sr = std::collections::HashMap::new();
    let mut ms = std::collections::HashMap::new();
    for method in methods {
        let mut srs = Vec::new();
        let mut mss = Vec::new();
        for si in 0..3u64 {
            let mut cfg = ExperimentConfig::new(
                method,
                family,
                role_seeds(WorldRole::Train, 0, spec.train_worlds),
                tmp.path().join(format!("{}_{si}", method.label())),
            );
            cfg.worlds.difficulty = difficulty;
            cfg.seed = derive_seed(master, method.label(), si);
            cfg.budget = if method == Method::Dagger { spec.dagger_rounds } else { spec.trained_budget };
            cfg.mppi = Some(spec.mppi);
            match method {
                Method::Tadpo => cfg.tadpo = Some(TadpoConfig { ppo: spec.ppo.clone(), ..Default::default() }),
                Method::Ppo => cfg.ppo = Some(spec.ppo.clone()),
                Method::Dagger => {
                    cfg.dagger = Some(tadpo::baselines::dagger::DaggerConfig {
                        steps_per_round: spec.ppo.n_steps,
                        ..tadpo::baselines::dagger::DaggerConfig::with_rounds(spec.dagger_rounds)
                    })
                }
                _ => unreachable!(),
            }
            let demo_arg = (method == Method::Tadpo).then_some(demos.demo_path.as_path());
            let out = train_student(&cfg, demo_arg).unwrap();
            let (model, view) = load_policy_checkpoint(&out.checkpoint).unwrap();
            let ev = evaluate(&EvalController::PolicyMean { model: &model, view }, &eval_sparse, 1).unwrap();
            srs.push(ev.aggregate.success_rate);
            mss.push(ev.aggregate.mean_speed);
        }
        sr.insert(method.label(), srs.iter().sum::<f64>() / 3.0);
        ms.insert(method.label(), mss.iter().sum::<f64>() / 3.0);
    }

    // Experts: the dense-plan tracker and the full-budget sampling planner.
    let eval_dense = build_dense_worlds(&eval_sel, &spec.mppi).unwrap();
    let tracker = evaluate(&EvalController::Teacher(&TeacherPolicy::default()), &eval_dense, 1).unwrap();
    let planner = evaluate(
        &EvalController::Mppi { cfg: spec.mppi, seed: derive_seed(master, "suite_mppi", 0) },
        &eval_sparse,
        1,
    )
    .unwrap();

    let checks = [
        ("distilled student success >= 0.70", sr["tadpo"] >= 0.70),
        ("pure on-policy success <= 0.20", sr["ppo"] <= 0.20),
        ("imitation success below distilled", sr["dagger"] < sr["tadpo"]),
        ("imitation speed below distilled", ms["dagger"] < ms["tadpo"]),
        ("plan tracker success >= 0.90", tracker.aggregate.success_rate >= 0.90),
        ("sampling planner success >= 0.90", planner.aggregate.success_rate >= 0.90),
    ];
    let pass = checks.iter().all(|(_, ok)| *ok);
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    gate(
        6,
        "obstacle-family comparison ordering",
        pass,
        format!(
            "sr distilled {:.2} / on-policy {:.2} / imitation {:.2}, speed distilled {:.2} vs imitation {:.2}, tracker {:.2}, planner {:.2}; {} in {:.0}s",
            sr["tadpo"], sr["ppo"], sr["dagger"], ms["tadpo"], ms["dagger"],
            tracker.aggregate.success_rate, planner.aggregate.success_rate,
            if failed.is_empty() { "all thresholds".into() } else { format!("FAILED: {}", failed.join("; ")) },
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Planner budget sensitivity: a sixteenth of the sampling budget must
//    cost at least 0.3 absolute success rate on the obstacle family.

#[test]
fn gate7_sixteenth_budget_degrades_planner() {
    let t0 = Instant::now();
    let spec = suite_spec(Suite::Trend);
    let sel = WorldSelection {
        family: WorldFamily::Obstacles,
        difficulty: BUDGET_CONTRAST_DIFFICULTY,
        seeds: role_seeds(WorldRole::Eval, 0, spec.eval_worlds),
    };
    let worlds = build_worlds(&sel).unwrap();
    let seed = derive_seed(0, "budget_contrast", 0);
    let full = evaluate(&EvalController::Mppi { cfg: spec.mppi, seed }, &worlds, 1).unwrap();
    let capped = evaluate(
        &EvalController::Mppi { cfg: spec.mppi.scaled_down(4), seed },
        &worlds,
        1,
    )
    .unwrap();
    let drop = full.aggregate.success_rate - capped.aggregate.success_rate;
    gate(
        7,
        "sixteenth planning budget loses >= 0.3 success",
        drop >= 0.3,
        format!(
            "uncapped sr {:.2}, capped sr {:.2}, drop {drop:.2} ({:.0}s)",
            full.aggregate.success_rate,
            capped.aggregate.success_rate,
            t0.elapsed().as_secs_f64()
        ),
    );
}

/// Difficulty of the budget-contrast evaluation worlds. The comparison suite
/// runs the same family at its own difficulty; the contrast uses the tighter
/// end of the generator's range, where planning quality is compute-bound.
const BUDGET_CONTRAST_DIFFICULTY: f64 = 1.0;

// ---------------------------------------------------------------------------
// 8. Rerunning the smoke suite with the same master seed must reproduce
//    every artifact bit for bit.

#[test]
fn gate8_smoke_suite_reruns_identically() {
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let a = run_suite(Suite::Smoke, 9, &tmp.path().join("a")).unwrap();
    let b = run_suite(Suite::Smoke, 9, &tmp.path().join("b")).unwrap();
    gate(
        8,
        "smoke suite reruns hash-identically",
        a.combined_hash == b.combined_hash,
        format!(
            "combined {} vs {} ({:.0}s total)",
            &a.combined_hash[..16],
            &b.combined_hash[..16],
            t0.elapsed().as_secs_f64()
        ),
    );
}
