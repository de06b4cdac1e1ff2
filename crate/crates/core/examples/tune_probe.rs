// Scratch diagnostics for desk-preset calibration. Not part of the build.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use staruav::baselines::ActionOverride;
use staruav::channel::{realize_slot, PhaseConfig};
use staruav::env::{Architecture, UplinkEnv};
use staruav::experiment::{evaluate, Algorithm, ConstraintCase, ExperimentSpec};
use staruav::exec::ExecMode;
use staruav::scenario::{associate, build_scenario, Position3D, ScenarioConfig};
use staruav::trainer::{RewardMode, TrainConfig, Trainer};

fn channel_scales(m: usize) {
    let mut cfg = ScenarioConfig::desk();
    if let Some(v) = env_f64("TUNE_ALPHA3") {
        cfg.alpha_ue_ubs = v;
    }
    if let Some(v) = env_f64("TUNE_NOISE") {
        cfg.noise_power = v;
    }
    cfg.elements_per_ris = m;
    let sc = build_scenario(&cfg, 1).unwrap();
    let assoc = associate(&sc);
    let uav = Position3D::new(120.0, 120.0, cfg.uav_height);
    let phases = PhaseConfig::zeros(cfg.num_ris, m);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut direct = 0.0;
    let mut zero_phase = 0.0;
    let mut aligned = 0.0;
    let mut random_phase = 0.0;
    let trials = 200;
    for _ in 0..trials {
        let real = realize_slot(&sc, &assoc, uav, &phases, &mut rng).unwrap();
        for k in 0..cfg.num_ues {
            let i = assoc.serving_ris[k];
            direct += real.h_ue_ubs[k].norm_sqr() / cfg.noise_power;
            let aided_zero = real.composite[k] - real.h_ue_ubs[k];
            zero_phase += aided_zero.norm_sqr() / cfg.noise_power;
            // Perfect per-element alignment: sum of term magnitudes.
            let best: f64 = real.h_ris_ubs[i]
                .iter()
                .zip(real.h_ue_ris[k].iter())
                .map(|(a, b)| a.norm() * b.norm())
                .sum();
            aligned += best * best / cfg.noise_power;
            // Expected incoherent power = sum |term|^2.
            let inc: f64 = real.h_ris_ubs[i]
                .iter()
                .zip(real.h_ue_ris[k].iter())
                .map(|(a, b)| (a.norm() * b.norm()).powi(2))
                .sum();
            random_phase += inc / cfg.noise_power;
        }
    }
    let n = (trials * cfg.num_ues) as f64;
    println!(
        "M={m:2}  direct={:9.3}  zero-phase-aided={:9.3}  random-aided={:9.3}  aligned={:9.3}",
        direct / n,
        zero_phase / n,
        random_phase / n,
        aligned / n
    );
    if m == 8 {
        // Direct-link SNR vs distance from the hover point.
        for d in [130.0_f64, 170.0, 210.0, 260.0] {
            let xi = cfg.ref_gain / d.powf(cfg.alpha_ue_ubs);
            print!("    direct@{d:.0}m={:.3}", xi / cfg.noise_power);
        }
        println!();
    }
}

fn env_f64(name: &str) -> Option<f64> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

fn train_probe(label: &str, case: ConstraintCase, m: usize, seed: u64, episodes: usize) {
    let mut scenario = ScenarioConfig::desk();
    if let Some(v) = env_f64("TUNE_ALPHA3") {
        scenario.alpha_ue_ubs = v;
    }
    if let Some(v) = env_f64("TUNE_NOISE") {
        scenario.noise_power = v;
    }
    scenario.elements_per_ris = m;
    let case = match (case, env_f64("TUNE_RMIN"), env_f64("TUNE_EMAX")) {
        (ConstraintCase::Custom { r_min_bps, e_max_j }, r, e) => ConstraintCase::Custom {
            r_min_bps: r.unwrap_or(r_min_bps),
            e_max_j: e.unwrap_or(e_max_j),
        },
        (c, _, _) => c,
    };
    let mut spec = ExperimentSpec::new(
        scenario,
        case,
        Algorithm::LagrangianPpo,
        Architecture::StarNoma,
        vec![seed],
        None,
    );
    spec.train = TrainConfig::desk(&spec.scenario);
    spec.train.episodes = episodes;
    if let Some(v) = env_f64("TUNE_ETA_LE") {
        let scale = spec.scenario.e_max / (spec.scenario.num_slots as f64 * spec.scenario.r_min);
        spec.train.eta_lambda_energy = v;
        spec.train.eta_lambda_rate = v * scale * scale;
    }
    if let Some(v) = env_f64("TUNE_ETA_LR_MULT") {
        spec.train.eta_lambda_rate *= v;
    }
    if let Some(v) = env_f64("TUNE_SMOOTH") {
        spec.train.lambda_smoothing = v;
    }
    if let Some(v) = env_f64("TUNE_DECAY") {
        spec.train.eta_lambda_decay = v;
    }
    let sc = build_scenario(&spec.scenario, seed).unwrap();
    let env = UplinkEnv::new(sc, Architecture::StarNoma);
    let t0 = std::time::Instant::now();
    let mut trainer = Trainer::new(
        env,
        spec.train.clone(),
        spec.reward_mode(),
        ActionOverride::None,
        seed,
    )
    .unwrap();
    let trace_every: usize = env_f64("TUNE_TRACE").map(|v| v as usize).unwrap_or(0);
    let mut log = Vec::new();
    for ep in 0..episodes {
        log.push(trainer.run_episode().unwrap());
        let every = if trace_every > 0 {
            trace_every
        } else {
            (episodes / 10).max(1)
        };
        if (ep + 1) % every == 0 {
            let e = log.last().unwrap();
            let jr_max = e.j_rate.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let je_max = e.j_energy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "  {label} ep {:4}: tp={:7.4} minrate={:9.0} maxE={:6.2} lam_r={:10.3e} lam_e={:8.4} Jr_max={:10.0} Je_max={:7.2} closs={:8.3}",
                ep + 1,
                e.throughput_bpshz,
                e.min_avg_rate_bps,
                e.max_energy_j,
                e.mean_lambda_rate,
                e.mean_lambda_energy,
                jr_max,
                je_max,
                e.critic_loss
            );
        }
    }
    let eval = evaluate(
        trainer.policy(),
        &trainer.env,
        ActionOverride::None,
        10,
        0xE0 + seed,
        ExecMode::auto(),
    )
    .unwrap();
    let n = trainer.env.num_slots() as f64;
    let r_min = trainer.env.scenario.config.r_min;
    let e_max = trainer.env.scenario.config.e_max;
    let max_rv = eval
        .rate_violations
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let max_ev = eval
        .energy_violations
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    println!(
        "  {label} DONE in {:.1}s  eval tp={:.4}  rate_viol={:.3}%  energy_viol={:.3}%  rates={:?} E={:?} lam_e={:?} std={:.2}",
        t0.elapsed().as_secs_f64(),
        eval.mean_throughput_bpshz,
        100.0 * max_rv / (n * r_min.max(1.0)),
        100.0 * max_ev / e_max,
        eval.avg_rates_bps.iter().map(|r| (r / 1000.0).round()).collect::<Vec<_>>(),
        eval.total_energies_j.iter().map(|e| e.round()).collect::<Vec<_>>(),
        trainer
            .state
            .multipliers
            .energy
            .iter()
            .map(|l| (l * 100.0).round() / 100.0)
            .collect::<Vec<_>>(),
        trainer.policy().stddev().iter().sum::<f64>() / trainer.policy().stddev().len() as f64
    );
    if std::env::var("TUNE_DIAG").is_ok() {
        let assoc = &trainer.env.association;
        println!("    clusters: {:?}", assoc.clusters());
        println!(
            "    ue pos: {:?}",
            trainer
                .env
                .scenario
                .ue_positions
                .iter()
                .map(|p| (p.x.round(), p.y.round()))
                .collect::<Vec<_>>()
        );
        // Final deterministic action at a mid-area state.
        let state = staruav::env::State {
            uav_xy: (120.0, 120.0),
            slot: 0,
        };
        let a = trainer.policy().act_deterministic(&state);
        println!(
            "    mid-state action: powers={:?} splits={:?}",
            a.powers.iter().map(|p| (p * 100.0).round() / 100.0).collect::<Vec<_>>(),
            a.splits.iter().map(|f| (f * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        // Trajectory endpoint.
        let mut rng2 = ChaCha8Rng::seed_from_u64(1234);
        let mut pol = |s: &staruav::env::State, _: &mut ChaCha8Rng| {
            trainer.policy().act_deterministic(s)
        };
        let tr = trainer.env.rollout(&mut pol, &mut rng2).unwrap();
        let last = tr.steps.last().unwrap().next_state.uav_xy;
        println!("    uav end: ({:.0},{:.0})", last.0, last.1);
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(String::as_str).unwrap_or("scales");
    match what {
        "scales" => {
            println!("channel power / noise at UAV hover point (desk preset):");
            for m in [8, 16, 32] {
                channel_scales(m);
            }
        }
        "train" => {
            let episodes: usize = args
                .get(2)
                .and_then(|s| s.parse().ok())
                .unwrap_or(400);
            for seed in [1u64, 2, 3, 4, 5] {
                train_probe("case2 M=8 ", ConstraintCase::desk_case2(), 8, seed, episodes);
            }
        }
        "cases" => {
            let episodes: usize = args
                .get(2)
                .and_then(|s| s.parse().ok())
                .unwrap_or(400);
            train_probe("case1 M=8", ConstraintCase::Case1, 8, 1, episodes);
            train_probe("case2 M=8", ConstraintCase::desk_case2(), 8, 1, episodes);
            train_probe("case3 M=8", ConstraintCase::desk_case3(), 8, 1, episodes);
        }
        "sweep" => {
            let episodes: usize = args
                .get(2)
                .and_then(|s| s.parse().ok())
                .unwrap_or(400);
            for m in [8, 16, 32] {
                train_probe(&format!("case2 M={m}"), ConstraintCase::desk_case2(), m, 1, episodes);
            }
        }
        other => eprintln!("unknown probe {other}"),
    }
}
