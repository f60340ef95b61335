//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so every verdict is printed even when it
//! passes. A name fragment on the command line restricts the run:
//! `cargo test --test acceptance -- knapsack`.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use rmab_comm::analysis::{sparse_dense_suite, value_bound_suite};
use rmab_comm::comm::{comm_reward, ArmLearner, CommAction, CommTransition, EvalSpec, Fingerprint, TrainParams};
use rmab_comm::commq::{CommQNetwork, CommQParams};
use rmab_comm::envs::{chain_not_visited_prob, chain_unvisited_frequency, ChainProtocol, NotVisited, NotVisitedVariant, SyntheticArmParams};
use rmab_comm::harness::{iqm, sign_test_greater, simulate, RunConfig, Strategy};
use rmab_comm::planner::solve_mckp;
use rmab_comm::qfunc::{td_grad, td_loss, QFunction, Transition};
use rmab_comm::rmab::{make_features, ArmMdp, Dynamics, NoiseConfig, NoiseModel, RmabInstance, StateSpace};
use rmab_comm::rng::stream;

type Verdict = Result<(bool, String), String>;

const DESK_CONFIG: &str = include_str!("../../../configs/desk_synthetic.json");
const DESK_SEEDS: u64 = 20;

fn chain_closed_form() -> Verdict {
    let protocol = ChainProtocol::default();
    let trials = 10_000;
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    let mut noisy_out = Vec::new();
    for n in [4usize, 6] {
        for k in [1usize, 5, 10] {
            let seed = 1000 + 10 * n as u64 + k as u64;
            let est = chain_unvisited_frequency(n, k, false, &protocol, trials, seed).map_err(|e| e.to_string())?;
            let Ok(NotVisited::Exact(p)) = chain_not_visited_prob(n, k, protocol.epsilon, NotVisitedVariant::NoiseFree) else {
                return Err("closed form unavailable".into());
            };
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            let z = (est.probability - p).abs() / se;
            worst_z = worst_z.max(z);
            ok &= z <= 3.0;
            let noisy = chain_unvisited_frequency(n, k, true, &protocol, trials, seed + 1).map_err(|e| e.to_string())?;
            let Ok(NotVisited::Bounds { lower, upper }) = chain_not_visited_prob(n, k, protocol.epsilon, NotVisitedVariant::NoisyBounds) else {
                return Err("interval bound unavailable".into());
            };
            let slack = 3.0 * noisy.std_err;
            if noisy.probability < lower - slack || noisy.probability > upper + slack {
                ok = false;
                noisy_out.push(format!("n={n} K={k}: {} not in [{lower:.4}, {upper:.4}]", noisy.probability));
            }
        }
    }
    Ok((ok, format!("max |z| {worst_z:.2} over 6 noise-free cases; noisy outside interval: {noisy_out:?}")))
}

fn brute_force_mckp(values: &[Vec<f64>], costs: &[u32], budget: u32) -> f64 {
    let n = values.len();
    let a = costs.len();
    let mut best = f64::NEG_INFINITY;
    let total = a.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut cost = 0;
        let mut val = 0.0;
        for row in values {
            let act = c % a;
            c /= a;
            cost += costs[act];
            val += row[act];
        }
        if cost <= budget {
            best = best.max(val);
        }
    }
    best
}

fn knapsack_exactness() -> Verdict {
    let mut r = stream(2024, &[]);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = r.random_range(1..=8);
        let a = r.random_range(2..=3);
        let mut costs: Vec<u32> = (1..a).map(|_| r.random_range(1..=3)).collect();
        costs.insert(0, 0);
        let budget = r.random_range(0..=n as u32 * 2);
        let values: Vec<Vec<f64>> = (0..n).map(|_| (0..a).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
        let pick = solve_mckp(&values, &costs, budget).map_err(|e| e.to_string())?;
        let cost: u32 = pick.iter().map(|&j| costs[j]).sum();
        let dp: f64 = values.iter().zip(&pick).map(|(row, &j)| row[j]).sum();
        if cost > budget || dp != brute_force_mckp(&values, &costs, budget) {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} of 1000 instances differ from exhaustive search")))
}

fn random_comm_net(n: usize, r: &mut rmab_comm::rng::Stream) -> Result<(CommQNetwork, usize), String> {
    let per_arm = 4;
    let senders: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let mut net = CommQNetwork::new(per_arm, senders, features, CommQParams::default(), r.random()).map_err(|e| e.to_string())?;
    for i in 0..n {
        let k = net.head_params(i).len();
        net.set_head_params(i, (0..k).map(|_| r.random_range(-1.0..1.0)).collect()).map_err(|e| e.to_string())?;
    }
    Ok((net, per_arm))
}

fn random_fingerprint(n: usize, per_arm: usize, r: &mut rmab_comm::rng::Stream) -> Fingerprint {
    Fingerprint {
        per_arm,
        values: (0..n * per_arm).map(|_| r.random_range(-3.0..3.0)).collect(),
    }
}

fn decomposition_argmax() -> Verdict {
    let mut r = stream(77, &[]);
    let mut misses = 0;
    for trial in 0..500 {
        let n = 2 + trial % 9;
        let (net, per_arm) = random_comm_net(n, &mut r)?;
        let fp = random_fingerprint(n, per_arm, &mut r);
        let greedy = net.select_comm_action(&fp, 0.0, &mut r).map_err(|e| e.to_string())?;
        let mut best = f64::NEG_INFINITY;
        for code in 0..1usize << n {
            let a = CommAction {
                bits: (0..n).map(|i| code >> i & 1 == 1).collect(),
            };
            best = best.max(net.joint_q(&fp, &a).map_err(|e| e.to_string())?);
        }
        if net.joint_q(&fp, &greedy).map_err(|e| e.to_string())? != best {
            misses += 1;
        }
    }
    Ok((misses == 0, format!("greedy vector below the brute-force maximum in {misses} of 500 networks (N up to 10)")))
}

fn max_rel_err(analytic: &[f64], fd: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn gradient_fidelity() -> Verdict {
    let h = 1e-5;
    let costs = [0u32, 1, 2];
    let mut arm_worst: f64 = 0.0;
    for case in 0..20u64 {
        let mut r = stream(500 + case, &[]);
        let space = if case % 2 == 0 { StateSpace::Continuous } else { StateSpace::Discrete(6) };
        let mut q = QFunction::mlp(space, 3, &mut r);
        let target: Vec<f64> = q.params().iter().map(|p| p + r.random_range(-0.3..0.3)).collect();
        q.set_params(target).map_err(|e| e.to_string())?;
        q.copy_target();
        let live: Vec<f64> = q.params().iter().map(|p| p + r.random_range(-0.3..0.3)).collect();
        q.set_params(live).map_err(|e| e.to_string())?;
        let batch: Vec<Transition> = (0..16)
            .map(|_| Transition {
                state: space.sample_uniform(&mut r),
                action: r.random_range(0..3),
                reward: r.random_range(-1.0..1.0),
                next_state: space.sample_uniform(&mut r),
            })
            .collect();
        let g = td_grad(&q, &batch, &costs, 0.1, 0.9).map_err(|e| e.to_string())?;
        let fd: Vec<f64> = (0..q.params().len())
            .map(|k| {
                let mut up = q.params().to_vec();
                up[k] += h;
                let mut dn = q.params().to_vec();
                dn[k] -= h;
                (td_loss(&q, &up, &batch, &costs, 0.1, 0.9) - td_loss(&q, &dn, &batch, &costs, 0.1, 0.9)) / (2.0 * h)
            })
            .collect();
        arm_worst = arm_worst.max(max_rel_err(&g, &fd));
    }
    let mut comm_worst: f64 = 0.0;
    for case in 0..20u64 {
        let mut r = stream(900 + case, &[]);
        let n = 2 + case as usize % 4;
        let (net, per_arm) = random_comm_net(n, &mut r)?;
        let batch: Vec<CommTransition> = (0..6)
            .map(|_| CommTransition {
                state: random_fingerprint(n, per_arm, &mut r),
                action: CommAction {
                    bits: (0..n).map(|_| r.random()).collect(),
                },
                reward: r.random_range(-1.0..1.0),
                next_state: random_fingerprint(n, per_arm, &mut r),
            })
            .collect();
        let g = net.decomposed_grad(&batch, 0.9).map_err(|e| e.to_string())?;
        let heads: Vec<Vec<f64>> = (0..n).map(|i| net.head_params(i).to_vec()).collect();
        for i in 0..n {
            let fd: Vec<f64> = (0..heads[i].len())
                .map(|k| {
                    let mut up = heads.clone();
                    up[i][k] += h;
                    let mut dn = heads.clone();
                    dn[i][k] -= h;
                    (net.decomposed_loss(&up, &batch, 0.9) - net.decomposed_loss(&dn, &batch, 0.9)) / (2.0 * h)
                })
                .collect();
            comm_worst = comm_worst.max(max_rel_err(&g[i], &fd));
        }
    }
    Ok((
        arm_worst <= 1e-4 && comm_worst <= 1e-4,
        format!("max relative error: arm TD loss {arm_worst:.2e}, decomposed loss {comm_worst:.2e} (20 cases each)"),
    ))
}

fn sparse_dense() -> Verdict {
    let suite = sparse_dense_suite(10, 3, 10_000, 31).map_err(|e| e.to_string())?;
    let worst = suite.max_z.iter().copied().fold(0.0, f64::max);
    Ok((
        suite.passed == suite.configs,
        format!("{}/{} configurations within 3 SE (10^4 sparse draws, 3 senders), max |z| {worst:.2}", suite.passed, suite.configs),
    ))
}

fn small_instance(seed: u64) -> Result<RmabInstance, String> {
    let mut r = stream(seed, &[1]);
    let n = r.random_range(2..=5);
    let mut arms: Vec<ArmMdp> = (0..n)
        .map(|_| ArmMdp::new(Dynamics::Synthetic(SyntheticArmParams::sample(&mut r)), vec![0, 1], 0.9))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let params: Vec<Vec<f64>> = arms.iter().map(ArmMdp::transition_params).collect();
    for (a, z) in arms.iter_mut().zip(make_features(&params, seed).map_err(|e| e.to_string())?) {
        a.features = z;
    }
    let noise = NoiseModel::sample(&NoiseConfig::default(), &vec![20; n], seed).map_err(|e| e.to_string())?;
    RmabInstance::new(arms, 1, 5, noise, 0.1).map_err(|e| e.to_string())
}

fn counterfactual_identities() -> Verdict {
    let params = TrainParams {
        env_steps: 5,
        grad_steps: 3,
        ..TrainParams::default()
    };
    let mut nonzero = 0;
    let mut disturbed = 0;
    for seed in 0..100u64 {
        let inst = small_instance(seed)?;
        let n = inst.n_arms();
        let mut r = stream(seed, &[2]);
        let mut learners: Vec<ArmLearner> = (0..n)
            .map(|i| ArmLearner::new(i, QFunction::mlp(StateSpace::Continuous, 2, &mut r), &params, seed))
            .collect();
        for l in &mut learners {
            for _ in 0..r.random_range(0..4) {
                l.train_epoch(&inst, rmab_comm::comm::Behavior::SelfExplore, &params).map_err(|e| e.to_string())?;
            }
        }
        let senders: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let eval = EvalSpec {
            episodes: 2,
            horizon: 5,
            seed,
        };
        let before = learners.clone();
        let silent = comm_reward(&learners, &inst, &senders, &CommAction::zeros(n), 2, &params, eval).map_err(|e| e.to_string())?;
        if silent.reward.to_bits() != 0.0f64.to_bits() {
            nonzero += 1;
        }
        let active = CommAction {
            bits: (0..n).map(|_| r.random()).collect(),
        };
        comm_reward(&learners, &inst, &senders, &active, 2, &params, eval).map_err(|e| e.to_string())?;
        if learners != before {
            disturbed += 1;
        }
    }
    Ok((
        nonzero == 0 && disturbed == 0,
        format!("silent reward nonzero in {nonzero}/100 snapshots; live state changed in {disturbed}/100"),
    ))
}

fn value_bound() -> Verdict {
    let suite = value_bound_suite(200, 5, 2, 0.9, 17).map_err(|e| e.to_string())?;
    Ok((
        suite.violations == 0,
        format!("{} violations over {} pairs, min slack {:.3e}", suite.violations, suite.pairs, suite.min_slack),
    ))
}

/// Final-epoch returns per seed for one strategy of the desk experiment.
fn desk_finals(cfg: &RunConfig, strategy: Strategy) -> Result<Vec<f64>, String> {
    (0..DESK_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let mut c = cfg.clone();
            c.strategy = strategy;
            let out = simulate(&c, seed).map_err(|e| e.to_string())?;
            Ok(out.records.last().expect("at least one record").eval_return)
        })
        .collect()
}

struct Desk {
    comm: Vec<f64>,
    no_comm: Vec<f64>,
    no_noise: Vec<f64>,
    fixed: Vec<f64>,
    random: Vec<f64>,
}

fn desk() -> Result<Desk, String> {
    let cfg = RunConfig::from_json(DESK_CONFIG).map_err(|e| e.to_string())?;
    Ok(Desk {
        comm: desk_finals(&cfg, Strategy::LearnedComm)?,
        no_comm: desk_finals(&cfg, Strategy::NoComm)?,
        no_noise: desk_finals(&cfg, Strategy::NoNoise)?,
        fixed: desk_finals(&cfg, Strategy::FixedOracleComm)?,
        random: desk_finals(&cfg, Strategy::RandomComm)?,
    })
}

fn directional(d: &Desk) -> Verdict {
    let (c, nc, nn) = (iqm(&d.comm).unwrap(), iqm(&d.no_comm).unwrap(), iqm(&d.no_noise).unwrap());
    let (wins, pairs, p) = sign_test_greater(&d.comm, &d.no_comm);
    Ok((
        nn > c && c > nc && p < 0.05,
        format!(
            "final IQM: no_noise {nn:.3}, comm {c:.3}, no_comm {nc:.3} ({:.1}% / {:.1}% of no_noise); comm > no_comm in {wins}/{pairs} untied seeds, sign-test p = {p:.4}",
            100.0 * c / nn,
            100.0 * nc / nn
        ),
    ))
}

fn fragility(d: &Desk) -> Verdict {
    let n = d.comm.len();
    let fixed_worse = d.fixed.iter().zip(&d.comm).filter(|(f, c)| f < c).count();
    let random_worse = d.random.iter().zip(&d.no_comm).filter(|(r, c)| r < c).count();
    let need = (0.7 * n as f64).ceil() as usize;
    Ok((
        fixed_worse >= need && random_worse >= need,
        format!("fixed < comm in {fixed_worse}/{n} seeds, random < no_comm in {random_worse}/{n} (need {need})"),
    ))
}

fn determinism() -> Verdict {
    let cfg = RunConfig::from_json(
        r#"{"n_arms": 5, "budget": 2, "horizon": 8, "epochs": 60, "comm_start_epoch": 20, "comm_interval": 10,
            "eval_interval": 10, "eval_episodes": 4, "comm_eval_episodes": 4}"#,
    )
    .map_err(|e| e.to_string())?;
    let jobs: Vec<(Strategy, u64)> = Strategy::ALL.iter().flat_map(|&s| (0..3).map(move |k| (s, k))).collect();
    let run_all = |threads: usize| -> Result<Vec<Vec<u8>>, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| {
            jobs.par_iter()
                .map(|&(s, k)| {
                    let mut c = cfg.clone();
                    c.strategy = s;
                    simulate(&c, k).and_then(|o| o.to_csv()).map_err(|e| e.to_string())
                })
                .collect()
        })
    };
    let a = run_all(1)?;
    let b = run_all(4)?;
    let c = run_all(1)?;
    let same = a.iter().zip(&b).zip(&c).filter(|((x, y), z)| x == y && x == z).count();
    Ok((same == jobs.len(), format!("{same}/{} CSVs bit-identical across three runs (1, 4, 1 threads)", jobs.len())))
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str()));
    let mut failed = 0;
    let mut report = |name: &str, secs: f64, v: Verdict| {
        let line = match v {
            Ok((true, detail)) => format!("PASS  {name} ({secs:.1} s): {detail}"),
            Ok((false, detail)) => {
                failed += 1;
                format!("FAIL  {name} ({secs:.1} s): {detail}")
            }
            Err(e) => {
                failed += 1;
                format!("FAIL  {name} ({secs:.1} s): error: {e}")
            }
        };
        println!("{line}");
    };
    let simple: [(&str, fn() -> Verdict); 8] = [
        ("chain_closed_form", chain_closed_form),
        ("knapsack_exactness", knapsack_exactness),
        ("decomposition_argmax", decomposition_argmax),
        ("gradient_fidelity", gradient_fidelity),
        ("sparse_dense_gradients", sparse_dense),
        ("counterfactual_identities", counterfactual_identities),
        ("value_difference_bound", value_bound),
        ("determinism", determinism),
    ];
    for (name, f) in simple {
        if wanted(name) {
            let t = Instant::now();
            let v = f();
            report(name, t.elapsed().as_secs_f64(), v);
        }
    }
    if wanted("directional_experiment") || wanted("baseline_fragility") {
        let t = Instant::now();
        match desk() {
            Ok(d) => {
                let secs = t.elapsed().as_secs_f64();
                println!("      desk experiment: 5 strategies x {DESK_SEEDS} seeds in {secs:.0} s");
                if wanted("directional_experiment") {
                    report("directional_experiment", secs, directional(&d));
                }
                if wanted("baseline_fragility") {
                    report("baseline_fragility", secs, fragility(&d));
                }
            }
            Err(e) => {
                report("directional_experiment", 0.0, Err(e.clone()));
                report("baseline_fragility", 0.0, Err(e));
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
