//! Problem-instance data model: arm MDPs, systematic reward noise, arm
//! features and nearest-arm lookup.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envs::{ArmmanParams, SisParams, SyntheticArmParams, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::{self, tag, Stream};

/// Number of equal-width bins partitioning a continuous state interval.
/// Shared by the noise tables, the tabular learner and the MLP encoding.
pub const STATE_BINS: usize = 20;

/// Width of the MLP state encoding: normalized position plus a bin one-hot.
pub const ENCODING_DIM: usize = STATE_BINS + 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum State {
    Discrete(usize),
    Continuous(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateSpace {
    /// States `0..n`.
    Discrete(usize),
    /// The unit interval `[0, 1]`.
    Continuous,
}

impl StateSpace {
    pub fn contains(&self, s: &State) -> bool {
        match (self, s) {
            (StateSpace::Discrete(n), State::Discrete(k)) => k < n,
            (StateSpace::Continuous, State::Continuous(x)) => (0.0..=1.0).contains(x),
            _ => false,
        }
    }

    /// Number of noise/tabular slots: one per discrete state, one per bin.
    pub fn slots(&self) -> usize {
        match self {
            StateSpace::Discrete(n) => *n,
            StateSpace::Continuous => STATE_BINS,
        }
    }

    pub fn slot(&self, s: &State) -> usize {
        match s {
            State::Discrete(k) => *k,
            State::Continuous(x) => bin_of(*x),
        }
    }

    /// Position in `[0, 1]`.
    pub fn normalized(&self, s: &State) -> f64 {
        match (self, s) {
            (StateSpace::Discrete(n), State::Discrete(k)) if *n > 1 => *k as f64 / (*n - 1) as f64,
            (_, State::Continuous(x)) => *x,
            _ => 0.0,
        }
    }

    pub fn encode_into(&self, s: &State, out: &mut [f64]) {
        debug_assert_eq!(out.len(), ENCODING_DIM);
        let x = self.normalized(s);
        out.fill(0.0);
        out[0] = x;
        out[1 + bin_of(x)] = 1.0;
    }

    pub fn sample_uniform(&self, rng: &mut Stream) -> State {
        match self {
            StateSpace::Discrete(n) => State::Discrete(rng.random_range(0..*n)),
            StateSpace::Continuous => State::Continuous(rng.random::<f64>()),
        }
    }
}

fn bin_of(x: f64) -> usize {
    ((x * STATE_BINS as f64) as usize).min(STATE_BINS - 1)
}

/// Arm dynamics families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dynamics {
    Synthetic(SyntheticArmParams),
    Sis(SisParams),
    Armman(ArmmanParams),
    Tabular(TabularMdp),
}

/// One arm `(S, A, C, T, R, beta, z)`. `reward` is the true reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmMdp {
    pub dynamics: Dynamics,
    pub costs: Vec<u32>,
    pub discount: f64,
    pub features: Vec<f64>,
}

impl ArmMdp {
    pub fn new(dynamics: Dynamics, costs: Vec<u32>, discount: f64) -> Result<Self> {
        let arm = ArmMdp {
            dynamics,
            costs,
            discount,
            features: Vec::new(),
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.len() != self.num_actions() {
            return Err(Error::config(format!(
                "cost vector has {} entries for {} actions",
                self.costs.len(),
                self.num_actions()
            )));
        }
        if self.costs.first() != Some(&0) {
            return Err(Error::config("the passive action must be free (costs[0] = 0)"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config(format!("discount {} outside [0, 1)", self.discount)));
        }
        if let Dynamics::Tabular(t) = &self.dynamics {
            t.validate()?;
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        match &self.dynamics {
            Dynamics::Synthetic(_) | Dynamics::Armman(_) => 2,
            Dynamics::Sis(_) => 3,
            Dynamics::Tabular(t) => t.n_actions,
        }
    }

    pub fn state_space(&self) -> StateSpace {
        match &self.dynamics {
            Dynamics::Synthetic(_) | Dynamics::Armman(_) => StateSpace::Continuous,
            Dynamics::Sis(p) => StateSpace::Discrete(p.population as usize + 1),
            Dynamics::Tabular(t) => StateSpace::Discrete(t.n_states),
        }
    }

    pub fn reward(&self, s: &State) -> f64 {
        match (&self.dynamics, s) {
            (Dynamics::Synthetic(_), State::Continuous(x)) => *x,
            (Dynamics::Armman(_), State::Continuous(x)) => *x,
            (Dynamics::Sis(p), State::Discrete(k)) => p.reward(*k as u32),
            (Dynamics::Tabular(t), State::Discrete(k)) => t.rewards[*k],
            _ => panic!("state {s:?} does not belong to this arm"),
        }
    }

    pub fn step(&self, s: &State, a: usize, rng: &mut Stream) -> State {
        match (&self.dynamics, s) {
            (Dynamics::Synthetic(p), State::Continuous(x)) => {
                State::Continuous(crate::envs::synthetic_step(*x, a, p, rng))
            }
            (Dynamics::Armman(p), State::Continuous(x)) => {
                State::Continuous(crate::envs::armman_step(*x, a, p, rng))
            }
            (Dynamics::Sis(p), State::Discrete(k)) => {
                State::Discrete(crate::envs::sis_step(*k as u32, a, p, rng) as usize)
            }
            (Dynamics::Tabular(t), State::Discrete(k)) => State::Discrete(t.sample_next(*k, a, rng)),
            _ => panic!("state {s:?} does not belong to this arm"),
        }
    }

    /// Ground-truth parameters the feature vector is projected from.
    pub fn transition_params(&self) -> Vec<f64> {
        match &self.dynamics {
            Dynamics::Synthetic(p) => vec![p.mu[1], p.sigma[1]],
            Dynamics::Armman(p) => vec![p.decay, p.uplift],
            Dynamics::Sis(p) => vec![p.infection_rate, p.recovery_rate],
            Dynamics::Tabular(t) => t.transitions.iter().flatten().copied().collect(),
        }
    }
}

/// Distribution the per-state systematic offsets are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDist {
    Gaussian { sigma: f64 },
    Uniform { low: f64, high: f64 },
    /// Fair coin between `Gaussian(0, sigma)` and `Uniform(-width, width)`.
    Mixture { sigma: f64, width: f64 },
}

impl NoiseDist {
    fn sample(&self, rng: &mut Stream) -> f64 {
        match *self {
            NoiseDist::Gaussian { sigma } => sigma * Distribution::<f64>::sample(&StandardNormal, rng),
            NoiseDist::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            NoiseDist::Mixture { sigma, width } => {
                if rng.random::<bool>() {
                    sigma * Distribution::<f64>::sample(&StandardNormal, rng)
                } else {
                    width * (2.0 * rng.random::<f64>() - 1.0)
                }
            }
        }
    }
}

/// Which arms are noisy, how many of their states are affected, and the
/// offset distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub fraction: f64,
    pub dist: NoiseDist,
    pub state_fraction: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            fraction: 0.8,
            dist: NoiseDist::Gaussian { sigma: 1.0 },
            state_fraction: 1.0,
        }
    }
}

fn ceil_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Systematic reward noise. The offset table is drawn once at construction
/// and never changes afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub dist: NoiseDist,
    pub seed: u64,
    noisy: Vec<bool>,
    /// `table[arm][slot]`; `None` where the slot is unaffected.
    table: Vec<Vec<Option<f64>>>,
}

impl NoiseModel {
    /// No noisy arms.
    pub fn none(slots_per_arm: &[usize]) -> Self {
        NoiseModel {
            dist: NoiseDist::Gaussian { sigma: 0.0 },
            seed: 0,
            noisy: vec![false; slots_per_arm.len()],
            table: slots_per_arm.iter().map(|&n| vec![None; n]).collect(),
        }
    }

    /// Pick `ceil(fraction * N)` noisy arms and `ceil(state_fraction * slots)`
    /// affected slots per noisy arm, then draw their offsets.
    pub fn sample(cfg: &NoiseConfig, slots_per_arm: &[usize], seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.fraction) || !(0.0..=1.0).contains(&cfg.state_fraction) {
            return Err(Error::config("noise fractions must lie in [0, 1]"));
        }
        let n = slots_per_arm.len();
        let k = ceil_count(cfg.fraction, n);
        let mut pick = rng::stream(seed, &[tag::NOISE_ARMS]);
        let mut chosen: Vec<usize> = index::sample(&mut pick, n, k).into_vec();
        chosen.sort_unstable();
        let affected = chosen
            .into_iter()
            .map(|arm| {
                let slots = slots_per_arm[arm];
                let m = ceil_count(cfg.state_fraction, slots);
                let mut r = rng::stream(seed, &[tag::NOISE_ARMS, arm as u64]);
                let mut s = index::sample(&mut r, slots, m).into_vec();
                s.sort_unstable();
                (arm, s)
            })
            .collect();
        Ok(Self::with_affected(cfg.dist, slots_per_arm, affected, seed))
    }

    /// Explicit noisy arms and affected slots; offsets are drawn from `dist`.
    pub fn with_affected(
        dist: NoiseDist,
        slots_per_arm: &[usize],
        affected: Vec<(usize, Vec<usize>)>,
        seed: u64,
    ) -> Self {
        let mut model = Self::none(slots_per_arm);
        model.dist = dist;
        model.seed = seed;
        for (arm, slots) in affected {
            model.noisy[arm] = true;
            let mut r = rng::stream(seed, &[tag::NOISE_TABLE, arm as u64]);
            for slot in slots {
                model.table[arm][slot] = Some(dist.sample(&mut r));
            }
        }
        model
    }

    pub fn offset(&self, arm: usize, slot: usize) -> f64 {
        self.table[arm][slot].unwrap_or(0.0)
    }

    pub fn num_arms(&self) -> usize {
        self.noisy.len()
    }

    /// Noisy-arm identities. Learners must not consult this; only the
    /// oracle baseline and reporting do.
    pub fn noisy_arms(&self) -> &[bool] {
        &self.noisy
    }

    /// Test hook: overwrite the identity list without touching the offsets.
    #[doc(hidden)]
    pub fn relabel_noisy_arms(&mut self, labels: Vec<bool>) {
        assert_eq!(labels.len(), self.noisy.len());
        self.noisy = labels;
    }
}

/// `N` arms under a shared budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmabInstance {
    pub arms: Vec<ArmMdp>,
    pub budget: u32,
    pub horizon: usize,
    pub noise: NoiseModel,
    pub lambda: f64,
}

const BLOB_MAGIC: &[u8; 4] = b"RMAB";
const BLOB_VERSION: u32 = 1;

impl RmabInstance {
    pub fn new(arms: Vec<ArmMdp>, budget: u32, horizon: usize, noise: NoiseModel, lambda: f64) -> Result<Self> {
        let inst = RmabInstance {
            arms,
            budget,
            horizon,
            noise,
            lambda,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.arms.first().ok_or_else(|| Error::config("instance has no arms"))?;
        for (i, arm) in self.arms.iter().enumerate() {
            arm.validate()?;
            if arm.costs != first.costs || arm.state_space() != first.state_space() {
                return Err(Error::config(format!(
                    "arm {i} differs from arm 0 in actions, costs or state space"
                )));
            }
            if arm.discount != first.discount {
                return Err(Error::config(format!("arm {i} has a different discount")));
            }
        }
        if self.noise.num_arms() != self.arms.len() {
            return Err(Error::config("noise model arm count does not match instance"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda must be non-negative"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        Ok(())
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn costs(&self) -> &[u32] {
        &self.arms[0].costs
    }

    pub fn num_actions(&self) -> usize {
        self.arms[0].num_actions()
    }

    pub fn discount(&self) -> f64 {
        self.arms[0].discount
    }

    pub fn state_space(&self) -> StateSpace {
        self.arms[0].state_space()
    }

    /// Budget at or above `N * max cost` never binds. Flagged, not rejected.
    pub fn budget_is_vacuous(&self) -> bool {
        let max_cost = self.costs().iter().copied().max().unwrap_or(0);
        self.budget as u64 >= self.arms.len() as u64 * max_cost as u64
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.arms.iter().map(|a| a.features.clone()).collect()
    }

    pub fn to_blob(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).map_err(|e| Error::Blob(e.to_string()))?;
        Ok(out)
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != BLOB_MAGIC {
            return Err(Error::Blob("not an instance blob".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != BLOB_VERSION {
            return Err(Error::Blob(format!("unsupported instance blob version {version}")));
        }
        let inst: RmabInstance = bincode::deserialize(&bytes[8..]).map_err(|e| Error::Blob(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }
}

/// Reward the learner sees: the true reward plus the arm's fixed offset for
/// the state's slot.
pub fn observed_reward(instance: &RmabInstance, arm: usize, s: &State) -> Result<f64> {
    let mdp = instance
        .arms
        .get(arm)
        .ok_or_else(|| Error::arg(format!("arm {arm} out of range for {} arms", instance.arms.len())))?;
    let space = mdp.state_space();
    if !space.contains(s) {
        return Err(Error::arg(format!("state {s:?} outside the state space of arm {arm}")));
    }
    Ok(mdp.reward(s) + instance.noise.offset(arm, space.slot(s)))
}

/// Index `j != i` with the smallest Euclidean feature distance to arm `i`;
/// ties go to the smallest index.
pub fn nearest_arm(features: &[Vec<f64>], i: usize) -> Result<usize> {
    if features.len() < 2 {
        return Err(Error::config("nearest-arm lookup needs at least two arms"));
    }
    if i >= features.len() {
        return Err(Error::arg(format!("arm {i} out of range")));
    }
    let zi = &features[i];
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (j, zj) in features.iter().enumerate() {
        if j == i {
            continue;
        }
        let d: f64 = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.is_none() || d < best_d {
            best = Some(j);
            best_d = d;
        }
    }
    Ok(best.unwrap())
}

/// Random `m x m` projection with orthonormal columns (Gram-Schmidt on a
/// Gaussian matrix), drawn once from `seed`.
pub fn random_projection(m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, &[tag::FEATURES]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    while cols.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| normal.sample(&mut r)).collect();
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    // rows[r][c] = cols[c][r]
    (0..m).map(|row| cols.iter().map(|c| c[row]).collect()).collect()
}

/// Project per-arm transition parameters through a shared random matrix.
pub fn make_features(params: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<f64>>> {
    let m = params.first().map_or(0, Vec::len);
    make_features_with(params, &random_projection(m, seed))
}

/// Same as [`make_features`] with an explicit `m x m` projection.
pub fn make_features_with(params: &[Vec<f64>], projection: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = projection.len();
    if params.iter().any(|p| p.len() != m) || projection.iter().any(|row| row.len() != m) {
        return Err(Error::config("all parameter vectors must share the projection dimension"));
    }
    Ok(params
        .iter()
        .map(|p| (0..m).map(|c| (0..m).map(|r| p[r] * projection[r][c]).sum()).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::SyntheticArmParams;
    use std::collections::HashMap;

    fn synthetic_instance(noise: NoiseConfig, seed: u64) -> RmabInstance {
        let arms: Vec<ArmMdp> = (0..5)
            .map(|i| {
                let mut r = rng::stream(seed, &[tag::ARM_PARAMS, i]);
                ArmMdp::new(Dynamics::Synthetic(SyntheticArmParams::sample(&mut r)), vec![0, 1], 0.9).unwrap()
            })
            .collect();
        let slots: Vec<usize> = arms.iter().map(|a| a.state_space().slots()).collect();
        let noise = NoiseModel::sample(&noise, &slots, seed).unwrap();
        RmabInstance::new(arms, 2, 20, noise, 0.1).unwrap()
    }

    #[test]
    fn noise_free_arm_reports_true_reward() {
        let cfg = NoiseConfig {
            fraction: 0.0,
            ..NoiseConfig::default()
        };
        let inst = synthetic_instance(cfg, 3);
        for arm in 0..5 {
            let s = State::Continuous(0.37);
            assert_eq!(observed_reward(&inst, arm, &s).unwrap(), 0.37);
        }
    }

    #[test]
    fn noisy_arm_adds_table_entry() {
        let inst = synthetic_instance(NoiseConfig::default(), 3);
        let noisy: Vec<usize> = (0..5).filter(|&i| inst.noise.noisy_arms()[i]).collect();
        assert_eq!(noisy.len(), 4);
        let arm = noisy[0];
        let s = State::Continuous(0.52);
        let e = inst.noise.offset(arm, 10);
        assert_ne!(e, 0.0);
        assert_eq!(observed_reward(&inst, arm, &s).unwrap(), 0.52 + e);
    }

    #[test]
    fn repeated_queries_are_identical() {
        let inst = synthetic_instance(NoiseConfig::default(), 11);
        let s = State::Continuous(0.9);
        let first = observed_reward(&inst, 1, &s).unwrap();
        for _ in 0..1000 {
            assert_eq!(observed_reward(&inst, 1, &s).unwrap().to_bits(), first.to_bits());
        }
    }

    #[test]
    fn noise_is_immutable_over_many_calls() {
        let inst = synthetic_instance(NoiseConfig::default(), 5);
        let mut seen: HashMap<(usize, u64), u64> = HashMap::new();
        let mut r = rng::stream(99, &[]);
        for _ in 0..100_000 {
            let arm = r.random_range(0..5);
            let x = (r.random_range(0..200) as f64) / 199.0;
            let v = observed_reward(&inst, arm, &State::Continuous(x)).unwrap().to_bits();
            let prev = *seen.entry((arm, x.to_bits())).or_insert(v);
            assert_eq!(prev, v);
        }
    }

    #[test]
    fn out_of_range_queries_fail() {
        let inst = synthetic_instance(NoiseConfig::default(), 1);
        assert!(matches!(
            observed_reward(&inst, 9, &State::Continuous(0.1)),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            observed_reward(&inst, 0, &State::Continuous(1.5)),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            observed_reward(&inst, 0, &State::Discrete(1)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn same_seed_same_tables() {
        let a = synthetic_instance(NoiseConfig::default(), 21);
        let b = synthetic_instance(NoiseConfig::default(), 21);
        assert_eq!(a.noise, b.noise);
    }

    #[test]
    fn blob_round_trip_is_exact() {
        let mut inst = synthetic_instance(NoiseConfig::default(), 8);
        let f = make_features(&inst.arms.iter().map(|a| a.transition_params()).collect::<Vec<_>>(), 8).unwrap();
        for (arm, z) in inst.arms.iter_mut().zip(f) {
            arm.features = z;
        }
        let back = RmabInstance::from_blob(&inst.to_blob().unwrap()).unwrap();
        assert_eq!(back, inst);
        assert!(RmabInstance::from_blob(b"nope").is_err());
    }

    #[test]
    fn nearest_arm_examples() {
        let z = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0]];
        assert_eq!(nearest_arm(&z, 0).unwrap(), 1);
        assert_eq!(nearest_arm(&z[..2], 0).unwrap(), 1);
        let dup = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(nearest_arm(&dup, 0).unwrap(), 1);
        assert!(matches!(nearest_arm(&z[..1], 0), Err(Error::Config(_))));
    }

    #[test]
    fn identity_projection_keeps_params() {
        let p = vec![vec![0.1, -0.2], vec![0.3, 0.15]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(make_features_with(&p, &id).unwrap(), p);
        assert!(make_features(&[vec![1.0], vec![1.0, 2.0]], 0).is_err());
    }

    #[test]
    fn projection_is_deterministic_and_orthonormal() {
        let a = random_projection(4, 77);
        assert_eq!(a, random_projection(4, 77));
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..4).map(|r| a[r][i] * a[r][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn near_identical_params_stay_closest() {
        let params = vec![vec![0.1, 0.12], vec![-0.15, 0.19], vec![0.1001, 0.1201], vec![0.02, 0.11]];
        let feats = make_features(&params, 4).unwrap();
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..4 {
            for j in (i + 1)..4 {
                let d: f64 = feats[i].iter().zip(&feats[j]).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        assert_eq!((best.1, best.2), (0, 2));
    }

    #[test]
    fn vacuous_budget_is_flagged() {
        let mut inst = synthetic_instance(NoiseConfig::default(), 2);
        assert!(!inst.budget_is_vacuous());
        inst.budget = 5;
        assert!(inst.budget_is_vacuous());
    }
}
