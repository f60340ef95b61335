//! Chain MDP family with a hard-to-reach terminal state, plus the closed
//! forms for the probability that it is never reached under epsilon-greedy
//! exploration and a Monte-Carlo replica of that exploration protocol.

use serde::{Deserialize, Serialize};

use crate::envs::TabularMdp;
use crate::error::{Error, Result};
use crate::qfunc::greedy_with_ties;
use crate::rmab::{ArmMdp, Dynamics, NoiseDist, NoiseModel};
use crate::rng::{self, tag, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainVariant {
    /// Only the terminal state pays: `R(s_n) = C`.
    Lemma1,
    /// Odd states pay 1, the terminal state pays 0.
    Lemma2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainFamilyConfig {
    pub n: usize,
    #[serde(rename = "C")]
    pub reward_c: f64,
    pub variant: ChainVariant,
    pub noisy: bool,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

fn default_discount() -> f64 {
    0.9
}

impl ChainFamilyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::config(format!("chain length n = {} must be even and >= 4", self.n)));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::config("chain discount must lie in (0, 1)"));
        }
        if self.variant == ChainVariant::Lemma1 {
            let threshold = (1.0 / self.discount).powi(self.n as i32 / 2 - 2);
            if self.reward_c <= threshold {
                return Err(Error::config(format!(
                    "terminal reward C = {} must exceed (1/beta)^(n/2-2) = {threshold}",
                    self.reward_c
                )));
            }
        }
        Ok(())
    }
}

/// States `s_0..=s_n`. From an even `s_k`, `a0` jumps to `s_{k+2}` (capped
/// at `s_n`) and `a1` drops into `s_{k+1}`; odd states and `s_n` absorb.
pub fn chain_build(config: &ChainFamilyConfig) -> Result<ArmMdp> {
    config.validate()?;
    let n = config.n;
    let rewards = (0..=n)
        .map(|k| match config.variant {
            ChainVariant::Lemma1 if k == n => config.reward_c,
            ChainVariant::Lemma1 => 0.0,
            ChainVariant::Lemma2 if k % 2 == 1 => 1.0,
            ChainVariant::Lemma2 => 0.0,
        })
        .collect();
    let mdp = TabularMdp::deterministic(n + 1, 2, rewards, |k, a| {
        if k == n || k % 2 == 1 {
            k
        } else if a == 0 {
            (k + 2).min(n)
        } else {
            k + 1
        }
    });
    ArmMdp::new(Dynamics::Tabular(mdp), vec![0, 1], config.discount)
}

/// Noise for a one-arm chain instance: `U(0, 1)` offsets at odd states when
/// the config is noisy, nothing otherwise.
pub fn chain_noise(config: &ChainFamilyConfig, seed: u64) -> NoiseModel {
    let slots = [config.n + 1];
    if !config.noisy {
        return NoiseModel::none(&slots);
    }
    let odd = (1..config.n).step_by(2).collect();
    NoiseModel::with_affected(NoiseDist::Uniform { low: 0.0, high: 1.0 }, &slots, vec![(0, odd)], seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotVisitedVariant {
    NoiseFree,
    NoisyBounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NotVisited {
    Exact(f64),
    Bounds { lower: f64, upper: f64 },
}

/// Probability that `s_n` is still unvisited after `k` exploration epochs.
pub fn chain_not_visited_prob(n: usize, k: usize, epsilon: f64, variant: NotVisitedVariant) -> Result<NotVisited> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::arg(format!("n = {n} must be even")));
    }
    if k == 0 {
        return Err(Error::arg("K must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let half = (n / 2) as i32;
    let reach = 0.5f64.powi(half);
    let first = 1.0 - reach;
    Ok(match variant {
        NotVisitedVariant::NoiseFree => NotVisited::Exact(first.powi(k as i32)),
        NotVisitedVariant::NoisyBounds => {
            let rest = k as i32 - 1;
            NotVisited::Bounds {
                lower: first * (1.0 - epsilon * reach).powi(rest),
                upper: first * (1.0 - (epsilon / 2.0).powi(half)).powi(rest),
            }
        }
    })
}

/// Exploration protocol replayed by [`chain_unvisited_frequency`]: online
/// tabular Q-learning from zero-initialized values, epsilon-greedy with
/// uniform tie-breaking on a separate stream, one trajectory of
/// `n + 2` steps per epoch starting at `s_0`. The update credits the
/// observed reward of the state entered.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainProtocol {
    pub epsilon: f64,
    pub alpha: f64,
    pub discount: f64,
    pub reward_c: f64,
}

impl Default for ChainProtocol {
    fn default() -> Self {
        ChainProtocol {
            epsilon: 0.3,
            alpha: 0.5,
            discount: 0.9,
            reward_c: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnvisitedEstimate {
    pub probability: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Monte-Carlo frequency of `s_n` never being visited within `k` epochs.
/// Every trial draws a fresh noise table when `noisy` is set.
pub fn chain_unvisited_frequency(
    n: usize,
    k: usize,
    noisy: bool,
    protocol: &ChainProtocol,
    trials: usize,
    seed: u64,
) -> Result<UnvisitedEstimate> {
    let config = ChainFamilyConfig {
        n,
        reward_c: protocol.reward_c,
        variant: ChainVariant::Lemma1,
        noisy,
        discount: protocol.discount,
    };
    let arm = chain_build(&config)?;
    let Dynamics::Tabular(mdp) = &arm.dynamics else {
        unreachable!()
    };
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    let mut unvisited = 0usize;
    for trial in 0..trials {
        let mut rng = rng::stream(seed, &[tag::ANALYSIS, trial as u64]);
        let mut ties = rng::stream(seed, &[tag::TIE_BREAK, trial as u64]);
        let noise = chain_noise(&config, rng::derive(seed, &[tag::NOISE_TABLE, trial as u64]));
        if !reaches_terminal(mdp, &noise, k, protocol, &mut rng, &mut ties) {
            unvisited += 1;
        }
    }
    let p = unvisited as f64 / trials as f64;
    Ok(UnvisitedEstimate {
        probability: p,
        std_err: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}

fn reaches_terminal(
    mdp: &TabularMdp,
    noise: &NoiseModel,
    epochs: usize,
    protocol: &ChainProtocol,
    rng: &mut Stream,
    ties: &mut Stream,
) -> bool {
    let n = mdp.n_states - 1;
    let mut q = vec![[0.0f64; 2]; mdp.n_states];
    for _ in 0..epochs {
        let mut s = 0;
        for _ in 0..n + 2 {
            let a = greedy_with_ties(&q[s], protocol.epsilon, rng, ties);
            let next = mdp.sample_next(s, a, rng);
            if next == n {
                return true;
            }
            let r = mdp.rewards[next] + noise.offset(0, next);
            let target = r + protocol.discount * q[next][0].max(q[next][1]);
            q[s][a] += protocol.alpha * (target - q[s][a]);
            s = next;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmab::{observed_reward, RmabInstance, State};

    fn cfg(n: usize, noisy: bool) -> ChainFamilyConfig {
        ChainFamilyConfig {
            n,
            reward_c: 10.0,
            variant: ChainVariant::Lemma1,
            noisy,
            discount: 0.9,
        }
    }

    fn tabular(arm: &ArmMdp) -> &TabularMdp {
        match &arm.dynamics {
            Dynamics::Tabular(t) => t,
            _ => panic!(),
        }
    }

    #[test]
    fn a0_from_s0_jumps_two() {
        let arm = chain_build(&cfg(4, false)).unwrap();
        let t = tabular(&arm);
        assert_eq!(t.row(0, 0)[2], 1.0);
        assert_eq!(t.row(0, 1)[1], 1.0);
        assert_eq!(t.row(2, 0)[4], 1.0);
        assert_eq!(t.row(1, 0)[1], 1.0);
        assert_eq!(t.row(3, 1)[3], 1.0);
        assert_eq!(t.row(4, 0)[4], 1.0);
    }

    #[test]
    fn lemma1_rewards_only_at_terminal() {
        let arm = chain_build(&cfg(4, false)).unwrap();
        assert_eq!(tabular(&arm).rewards, vec![0.0, 0.0, 0.0, 0.0, 10.0]);
    }

    #[test]
    fn lemma2_rewards_odd_states() {
        let c = ChainFamilyConfig {
            variant: ChainVariant::Lemma2,
            ..cfg(6, false)
        };
        let arm = chain_build(&c).unwrap();
        assert_eq!(tabular(&arm).rewards, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn odd_n_rejected() {
        assert!(matches!(chain_build(&cfg(5, false)), Err(Error::Config(_))));
        let weak = ChainFamilyConfig {
            reward_c: 0.5,
            ..cfg(4, false)
        };
        assert!(chain_build(&weak).is_err());
    }

    #[test]
    fn noisy_odd_state_reward_is_fixed() {
        let c = cfg(4, true);
        let arm = chain_build(&c).unwrap();
        let inst = RmabInstance::new(vec![arm], 1, 10, chain_noise(&c, 3), 0.0).unwrap();
        let first = observed_reward(&inst, 0, &State::Discrete(1)).unwrap();
        assert!(first > 0.0 && first < 1.0);
        for _ in 0..100 {
            assert_eq!(observed_reward(&inst, 0, &State::Discrete(1)).unwrap(), first);
        }
        assert_eq!(observed_reward(&inst, 0, &State::Discrete(2)).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_examples() {
        let NotVisited::Exact(p) = chain_not_visited_prob(4, 1, 0.3, NotVisitedVariant::NoiseFree).unwrap() else {
            panic!()
        };
        assert_eq!(p, 0.75);
        let NotVisited::Bounds { lower, upper } =
            chain_not_visited_prob(4, 1, 0.3, NotVisitedVariant::NoisyBounds).unwrap()
        else {
            panic!()
        };
        assert_eq!((lower, upper), (0.75, 0.75));
        let NotVisited::Exact(p) = chain_not_visited_prob(4, 10, 0.3, NotVisitedVariant::NoiseFree).unwrap() else {
            panic!()
        };
        assert!((p - 0.75f64.powi(10)).abs() < 1e-15);
        assert!((p - 0.0563).abs() < 1e-4);
    }

    #[test]
    fn closed_form_domain_errors() {
        assert!(chain_not_visited_prob(5, 1, 0.3, NotVisitedVariant::NoiseFree).is_err());
        assert!(chain_not_visited_prob(4, 0, 0.3, NotVisitedVariant::NoiseFree).is_err());
        assert!(chain_not_visited_prob(4, 1, 1.0, NotVisitedVariant::NoisyBounds).is_err());
    }

    #[test]
    fn single_epoch_frequency_matches() {
        let est = chain_unvisited_frequency(4, 1, false, &ChainProtocol::default(), 4000, 1).unwrap();
        assert!((est.probability - 0.75).abs() < 3.0 * est.std_err + 1e-9);
    }
}
