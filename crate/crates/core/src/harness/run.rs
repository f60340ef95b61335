//! The training loop: arm Q-learning throughout, communication rounds after
//! warm-up, periodic evaluation with true rewards.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{build_instance, QReprKind, RunConfig};
use super::Strategy;
use crate::comm::{comm_reward, comm_round_update, planner_return, ArmLearner, CommAction, CommTransition, EvalSpec, ProbeSet};
use crate::commq::CommQNetwork;
use crate::error::{Error, Result};
use crate::planner::{episode_return_traced, PlannerPolicy};
use crate::qfunc::QFunction;
use crate::rmab::{nearest_arm, RmabInstance};
use crate::rng::{self, tag, Stream};

pub const CSV_HEADER: &str =
    "seed,epoch,strategy,eval_return,comm_active_count,noise_free_sender_frac,noise_free_receiver_frac,wall_ms";

/// One row of a metrics CSV. Channel counts and fractions cover the
/// communication rounds since the previous record; fractions are empty when
/// no channel was active.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub epoch: usize,
    pub strategy: Strategy,
    pub eval_return: f64,
    pub comm_active_count: usize,
    pub noise_free_sender_frac: Option<f64>,
    pub noise_free_receiver_frac: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub instance: RmabInstance,
    pub learners: Vec<ArmLearner>,
    pub comm_q: Option<CommQNetwork>,
    /// Planner decisions of the first evaluation episode at every record,
    /// as JSON lines, when tracing is on.
    pub trace: Option<Vec<u8>>,
}

impl RunOutput {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        metrics_csv(&self.records)
    }
}

pub fn metrics_csv(records: &[MetricsRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut out = Vec::with_capacity(body.len() + CSV_HEADER.len() + 1);
    out.extend_from_slice(CSV_HEADER.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(&body);
    Ok(out)
}

/// Channel decision for one round: bit `i` set means arm `i` receives from
/// `senders[i]`.
struct RoundPlan {
    senders: Vec<usize>,
    action: CommAction,
}

/// Noise-free tallies over activated channels.
#[derive(Default)]
struct Window {
    active: usize,
    clean_senders: usize,
    clean_receivers: usize,
}

impl Window {
    fn add(&mut self, plan: &RoundPlan, noisy: &[bool]) {
        for (i, (&bit, &j)) in plan.action.bits.iter().zip(&plan.senders).enumerate() {
            if bit {
                self.active += 1;
                self.clean_senders += !noisy[j] as usize;
                self.clean_receivers += !noisy[i] as usize;
            }
        }
    }

    fn fractions(&self) -> (Option<f64>, Option<f64>) {
        if self.active == 0 {
            return (None, None);
        }
        let a = self.active as f64;
        (Some(self.clean_senders as f64 / a), Some(self.clean_receivers as f64 / a))
    }
}

fn nearest_senders(features: &[Vec<f64>]) -> Result<Vec<usize>> {
    (0..features.len()).map(|i| nearest_arm(features, i)).collect()
}

/// Each noisy arm listens to its nearest noise-free arm; the rest stay
/// silent. Nothing else in the loop reads the noisy-arm labels for
/// decisions.
fn fixed_oracle_plan(instance: &RmabInstance, features: &[Vec<f64>], fallback: &[usize]) -> RoundPlan {
    let noisy = instance.noise.noisy_arms();
    let n = noisy.len();
    let mut senders = fallback.to_vec();
    let mut bits = vec![false; n];
    for i in (0..n).filter(|&i| noisy[i]) {
        let best = (0..n)
            .filter(|&j| j != i && !noisy[j])
            .map(|j| {
                let d: f64 = features[i].iter().zip(&features[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, j)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, j)) = best {
            senders[i] = j;
            bits[i] = true;
        }
    }
    RoundPlan {
        senders,
        action: CommAction { bits },
    }
}

fn random_plan(n: usize, rng: &mut Stream) -> RoundPlan {
    let senders = (0..n)
        .map(|i| {
            let j = rng.random_range(0..n - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        })
        .collect();
    RoundPlan {
        senders,
        action: CommAction::ones(n),
    }
}

fn init_learners(cfg: &RunConfig, instance: &RmabInstance, seed: u64) -> Vec<ArmLearner> {
    let space = instance.state_space();
    let actions = instance.num_actions();
    (0..instance.n_arms())
        .map(|i| {
            let q = match cfg.q_repr {
                QReprKind::Mlp => QFunction::mlp(space, actions, &mut rng::stream(seed, &[tag::Q_INIT, i as u64])),
                QReprKind::Tabular => QFunction::tabular(space, actions),
            };
            ArmLearner::new(i, q, &cfg.train, seed)
        })
        .collect()
}

/// Build the instance for `(cfg, seed)` and run it.
pub fn simulate(cfg: &RunConfig, seed: u64) -> Result<RunOutput> {
    cfg.validate()?;
    let instance = build_instance(cfg, seed, cfg.strategy)?;
    simulate_on(cfg, seed, instance)
}

/// Run the full loop on a given instance. Deterministic in
/// `(cfg, seed, instance)`.
pub fn simulate_on(cfg: &RunConfig, seed: u64, instance: RmabInstance) -> Result<RunOutput> {
    cfg.validate()?;
    instance.validate()?;
    let started = Instant::now();
    let n = instance.n_arms();
    let strategy = cfg.strategy;
    let features = instance.features();
    let nearest = nearest_senders(&features)?;
    let mut learners = init_learners(cfg, &instance, seed);
    let probes = ProbeSet::sample(instance.state_space(), cfg.probe_states, seed);
    let mut comm_q = match strategy {
        Strategy::LearnedComm => {
            let per_arm = cfg.probe_states * instance.num_actions();
            Some(CommQNetwork::new(
                per_arm,
                nearest.clone(),
                features.clone(),
                cfg.comm_q,
                rng::derive(seed, &[tag::COMMQ_INIT]),
            )?)
        }
        _ => None,
    };
    let mut policy_rng = rng::stream(seed, &[tag::COMM_POLICY]);
    let mut sender_rng = rng::stream(seed, &[tag::RANDOM_SENDERS]);
    let mut trace = cfg.trace_planner.then(Vec::new);
    let mut records = Vec::new();
    let mut window = Window::default();
    let mut epoch = 0;
    let mut round = 0u64;
    let silent = CommAction::zeros(n);
    while epoch < cfg.epochs {
        let k = if epoch < cfg.comm_start_epoch {
            1.min(cfg.epochs - epoch)
        } else {
            cfg.comm_interval.min(cfg.epochs - epoch)
        };
        if epoch < cfg.comm_start_epoch {
            comm_round_update(&mut learners, &instance, &nearest, &silent, k, &cfg.train)?;
        } else {
            let plan = match strategy {
                Strategy::NoComm | Strategy::NoNoise => RoundPlan {
                    senders: nearest.clone(),
                    action: silent.clone(),
                },
                Strategy::NearestNeighborComm => RoundPlan {
                    senders: nearest.clone(),
                    action: CommAction::ones(n),
                },
                Strategy::RandomComm => random_plan(n, &mut sender_rng),
                Strategy::FixedOracleComm => fixed_oracle_plan(&instance, &features, &nearest),
                Strategy::LearnedComm => {
                    let net = comm_q.as_mut().expect("learned strategy owns a comm network");
                    let qs: Vec<&QFunction> = learners.iter().map(|l| &l.q).collect();
                    let fp = probes.fingerprint(&qs);
                    let action = net.select_comm_action(&fp, net.epsilon, &mut policy_rng)?;
                    let eval = EvalSpec {
                        episodes: cfg.comm_eval_episodes,
                        horizon: cfg.horizon,
                        seed: rng::derive(seed, &[tag::COMM_EVAL, round]),
                    };
                    let cf = comm_reward(&learners, &instance, &nearest, &action, k, &cfg.train, eval)?;
                    learners = cf.with_comm;
                    let qs: Vec<&QFunction> = learners.iter().map(|l| &l.q).collect();
                    let next = probes.fingerprint(&qs);
                    net.observe(
                        CommTransition {
                            state: fp,
                            action: action.clone(),
                            reward: cf.reward,
                            next_state: next,
                        },
                        cfg.discount,
                        &mut policy_rng,
                    )?;
                    RoundPlan {
                        senders: nearest.clone(),
                        action,
                    }
                }
            };
            if strategy != Strategy::LearnedComm {
                comm_round_update(&mut learners, &instance, &plan.senders, &plan.action, k, &cfg.train)?;
            }
            window.add(&plan, instance.noise.noisy_arms());
            round += 1;
        }
        epoch += k;
        if epoch % cfg.eval_interval == 0 || epoch == cfg.epochs {
            let eval_seed = rng::derive(seed, &[tag::EVAL, epoch as u64]);
            let eval_return = planner_return(
                &learners,
                &instance,
                EvalSpec {
                    episodes: cfg.eval_episodes,
                    horizon: cfg.horizon,
                    seed: eval_seed,
                },
            )?;
            if let Some(buf) = trace.as_mut() {
                let policy = PlannerPolicy::new(learners.iter().map(|l| &l.q).collect(), instance.budget, instance.costs().to_vec());
                episode_return_traced(&policy, &instance, cfg.horizon, eval_seed, 0, epoch, buf)?;
            }
            let (s_frac, r_frac) = window.fractions();
            records.push(MetricsRecord {
                seed,
                epoch,
                strategy,
                eval_return,
                comm_active_count: window.active,
                noise_free_sender_frac: s_frac,
                noise_free_receiver_frac: r_frac,
                wall_ms: if cfg.record_wall_time {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                },
            });
            window = Window::default();
        }
    }
    Ok(RunOutput {
        records,
        instance,
        learners,
        comm_q,
        trace,
    })
}

pub fn csv_path(out: &Path, strategy: Strategy, seed: u64) -> PathBuf {
    out.join(format!("{}_s{seed}.csv", strategy.name()))
}

/// Run `cfg` with `seed`, writing `{strategy}_s{seed}.csv` (plus
/// checkpoints and the optional trace) under `out`. Returns the CSV path.
pub fn run_experiment(cfg: &RunConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    let output = simulate(cfg, seed)?;
    fs::create_dir_all(out)?;
    let path = csv_path(out, cfg.strategy, seed);
    fs::write(&path, output.to_csv()?)?;
    let stem = format!("{}_s{seed}", cfg.strategy.name());
    if let Some(t) = &output.trace {
        fs::write(out.join(format!("{stem}.trace.jsonl")), t)?;
    }
    if cfg.checkpoints {
        let dir = out.join("checkpoints").join(&stem);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("instance.bin"), output.instance.to_blob()?)?;
        for l in &output.learners {
            fs::write(dir.join(format!("arm{}.qf", l.arm)), l.q.to_blob())?;
        }
        if let Some(net) = &output.comm_q {
            fs::write(dir.join("commq.qf"), net.to_blob())?;
        }
    }
    Ok(path)
}
