//! Communication actions and their effect: a receiving arm collects data
//! with a softmax policy built from its sender's Q-function, a round of
//! arm training conditioned on the channel bits, and the counterfactual
//! communication reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{evaluate_return, PlannerPolicy};
use crate::qfunc::{epsilon_greedy, sample_index, softmax_policy, td_grad, QFunction, ReplayBuffer, Transition};
use crate::rmab::{observed_reward, RmabInstance, State, StateSpace};
use crate::rng::{self, tag, Stream};

/// Bit `i` set: arm `i` receives its sender's parameters this round.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommAction {
    pub bits: Vec<bool>,
}

impl CommAction {
    pub fn zeros(n: usize) -> Self {
        CommAction { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        CommAction { bits: vec![true; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_silent(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }
}

/// Fixed probe states at which Q-values are read to summarize parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub states: Vec<State>,
}

/// Default number of probe states.
pub const PROBE_STATES: usize = 8;

impl ProbeSet {
    /// Drawn once from the run seed.
    pub fn sample(space: StateSpace, count: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[tag::PROBES]);
        ProbeSet {
            states: (0..count).map(|_| space.sample_uniform(&mut r)).collect(),
        }
    }

    pub fn fingerprint(&self, qfns: &[&QFunction]) -> Fingerprint {
        let per_arm = self.states.len() * qfns.first().map_or(0, |q| q.num_actions());
        let mut values = Vec::with_capacity(per_arm * qfns.len());
        for q in qfns {
            for s in &self.states {
                values.extend(q.values(s));
            }
        }
        Fingerprint { per_arm, values }
    }
}

/// Q-values of every arm at the probe states, arm-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub per_arm: usize,
    pub values: Vec<f64>,
}

impl Fingerprint {
    pub fn n_arms(&self) -> usize {
        self.values.len().checked_div(self.per_arm).unwrap_or(0)
    }

    pub fn slice(&self, arm: usize) -> &[f64] {
        &self.values[arm * self.per_arm..(arm + 1) * self.per_arm]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommTransition {
    pub state: Fingerprint,
    pub action: CommAction,
    pub reward: f64,
    pub next_state: Fingerprint,
}

/// Arm-level learning hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub env_steps: usize,
    pub grad_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub target_every: usize,
    pub buffer_capacity: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            env_steps: 20,
            grad_steps: 20,
            batch_size: 32,
            lr: 5e-4,
            epsilon_start: 0.3,
            epsilon_decay: 0.999,
            target_every: 10,
            buffer_capacity: 12_000,
        }
    }
}

/// How an arm picks actions while collecting data.
#[derive(Clone, Copy, Debug)]
pub enum Behavior<'a> {
    /// Epsilon-greedy on the arm's own Q.
    SelfExplore,
    /// Softmax over the received Q-function.
    Softmax(&'a QFunction),
}

/// One arm's Q-function together with its replay data, exploration rate and
/// private random streams. Cloning snapshots all of it.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmLearner {
    pub arm: usize,
    pub q: QFunction,
    pub buffer: ReplayBuffer<Transition>,
    pub epsilon: f64,
    pub epochs: usize,
    rng: Stream,
    ties: Stream,
}

impl ArmLearner {
    pub fn new(arm: usize, q: QFunction, params: &TrainParams, seed: u64) -> Self {
        ArmLearner {
            arm,
            q,
            buffer: ReplayBuffer::new(params.buffer_capacity),
            epsilon: params.epsilon_start,
            epochs: 0,
            rng: rng::stream(seed, &[tag::TRAIN, arm as u64]),
            ties: rng::stream(seed, &[tag::TIE_BREAK, arm as u64]),
        }
    }

    /// One learning epoch: reset to a uniform state, collect
    /// `env_steps` transitions, take `grad_steps` TD steps, decay epsilon and
    /// refresh the target every `target_every` epochs.
    pub fn train_epoch(&mut self, instance: &RmabInstance, behavior: Behavior, params: &TrainParams) -> Result<()> {
        let mut s = instance.state_space().sample_uniform(&mut self.rng);
        collect_with_behavior(self, instance, behavior, &mut s, params.env_steps)?;
        self.gradient_steps(instance, params)?;
        self.epsilon *= params.epsilon_decay;
        self.epochs += 1;
        if params.target_every > 0 && self.epochs % params.target_every == 0 {
            self.q.copy_target();
        }
        Ok(())
    }

    fn gradient_steps(&mut self, instance: &RmabInstance, params: &TrainParams) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let mut batch = Vec::with_capacity(params.batch_size);
        for _ in 0..params.grad_steps {
            self.buffer.sample_into(params.batch_size, &mut self.rng, &mut batch);
            let g = td_grad(&self.q, &batch, instance.costs(), instance.lambda, instance.discount())?;
            self.q.sgd_step(&g, params.lr)?;
        }
        Ok(())
    }
}

/// Step arm `learner.arm` for `n_steps` from `state` under `behavior`,
/// appending transitions with the arm's observed rewards.
pub fn collect_with_behavior(
    learner: &mut ArmLearner,
    instance: &RmabInstance,
    behavior: Behavior,
    state: &mut State,
    n_steps: usize,
) -> Result<()> {
    let arm = learner.arm;
    let mdp = instance
        .arms
        .get(arm)
        .ok_or_else(|| Error::arg(format!("arm {arm} out of range")))?;
    for _ in 0..n_steps {
        let a = match behavior {
            Behavior::SelfExplore => epsilon_greedy(&learner.q, state, learner.epsilon, &mut learner.rng, &mut learner.ties),
            Behavior::Softmax(sender) => sample_index(&softmax_policy(sender, state), &mut learner.rng),
        };
        let next = mdp.step(state, a, &mut learner.rng);
        learner.buffer.push(Transition {
            state: *state,
            action: a,
            reward: observed_reward(instance, arm, state)?,
            next_state: next,
        });
        *state = next;
    }
    Ok(())
}

fn check_round(learners: &[ArmLearner], instance: &RmabInstance, senders: &[usize], a_c: &CommAction) -> Result<()> {
    let n = instance.n_arms();
    if learners.len() != n || learners.iter().enumerate().any(|(i, l)| l.arm != i) {
        return Err(Error::State("learner set does not match the instance arms".into()));
    }
    if a_c.len() != n {
        return Err(Error::arg(format!("communication action has {} bits for {n} arms", a_c.len())));
    }
    if senders.len() != n || senders.iter().enumerate().any(|(i, &j)| j >= n || j == i) {
        return Err(Error::arg("sender map must name another arm for every arm"));
    }
    Ok(())
}

/// `k_epochs` of training for every arm. Arm `i` explores with the softmax
/// of its sender's Q-function (as of the start of the round) when its bit
/// is set and by itself otherwise. The message travels as a parameter blob.
pub fn comm_round_update(
    learners: &mut [ArmLearner],
    instance: &RmabInstance,
    senders: &[usize],
    a_c: &CommAction,
    k_epochs: usize,
    params: &TrainParams,
) -> Result<()> {
    check_round(learners, instance, senders, a_c)?;
    let space = instance.state_space();
    let messages: Vec<Option<QFunction>> = a_c
        .bits
        .iter()
        .zip(senders)
        .map(|(&bit, &j)| bit.then(|| QFunction::from_blob(&learners[j].q.to_blob(), space)).transpose())
        .collect::<Result<_>>()?;
    for (learner, msg) in learners.iter_mut().zip(&messages) {
        let behavior = msg.as_ref().map_or(Behavior::SelfExplore, Behavior::Softmax);
        for _ in 0..k_epochs {
            learner.train_epoch(instance, behavior, params)?;
        }
    }
    Ok(())
}

/// Both branches of the communication reward.
#[derive(Clone, Debug)]
pub struct Counterfactual {
    /// `G_T(with) - G_T(without)`.
    pub reward: f64,
    pub return_with: f64,
    pub return_without: f64,
    pub with_comm: Vec<ArmLearner>,
    pub without_comm: Vec<ArmLearner>,
}

/// Evaluation settings for the planner return.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSpec {
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
}

pub fn planner_return(learners: &[ArmLearner], instance: &RmabInstance, eval: EvalSpec) -> Result<f64> {
    let policy = PlannerPolicy::new(learners.iter().map(|l| &l.q).collect(), instance.budget, instance.costs().to_vec());
    evaluate_return(&policy, instance, eval.episodes, eval.horizon, eval.seed)
}

/// Train two copies of `learners` for one round, with `a_c` and with no
/// communication, from the same snapshot and random streams; both are
/// evaluated with the same evaluation seed. `learners` is not touched.
pub fn comm_reward(
    learners: &[ArmLearner],
    instance: &RmabInstance,
    senders: &[usize],
    a_c: &CommAction,
    k_epochs: usize,
    params: &TrainParams,
    eval: EvalSpec,
) -> Result<Counterfactual> {
    check_round(learners, instance, senders, a_c)?;
    let mut without = learners.to_vec();
    comm_round_update(&mut without, instance, senders, &CommAction::zeros(a_c.len()), k_epochs, params)?;
    let return_without = planner_return(&without, instance, eval)?;
    if a_c.is_silent() {
        return Ok(Counterfactual {
            reward: 0.0,
            return_with: return_without,
            return_without,
            with_comm: without.clone(),
            without_comm: without,
        });
    }
    let mut with = learners.to_vec();
    comm_round_update(&mut with, instance, senders, a_c, k_epochs, params)?;
    let return_with = planner_return(&with, instance, eval)?;
    let reward = return_with - return_without;
    if !reward.is_finite() {
        return Err(Error::numeric("non-finite communication reward"));
    }
    Ok(Counterfactual {
        reward,
        return_with,
        return_without,
        with_comm: with,
        without_comm: without,
    })
}
