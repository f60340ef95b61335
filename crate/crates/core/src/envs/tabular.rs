use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Finite MDP with state rewards. `transitions[s * n_actions + a]` is the
/// next-state distribution for `(s, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl TabularMdp {
    /// Deterministic transitions `next(s, a)`.
    pub fn deterministic(
        n_states: usize,
        n_actions: usize,
        rewards: Vec<f64>,
        next: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let transitions = (0..n_states * n_actions)
            .map(|i| {
                let mut row = vec![0.0; n_states];
                row[next(i / n_actions, i % n_actions)] = 1.0;
                row
            })
            .collect();
        TabularMdp {
            n_states,
            n_actions,
            transitions,
            rewards,
        }
    }

    /// Dense random transitions and `U[0, 1)` rewards.
    pub fn random(n_states: usize, n_actions: usize, rng: &mut Stream) -> Self {
        let transitions = (0..n_states * n_actions)
            .map(|_| {
                let raw: Vec<f64> = (0..n_states).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            })
            .collect();
        let rewards = (0..n_states).map(|_| rng.random::<f64>()).collect();
        TabularMdp {
            n_states,
            n_actions,
            transitions,
            rewards,
        }
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != self.n_states * self.n_actions || self.rewards.len() != self.n_states {
            return Err(Error::config("tabular MDP dimensions are inconsistent"));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.len() != self.n_states || row.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "transition row for (s={}, a={}) is not a distribution",
                    i / self.n_actions,
                    i % self.n_actions
                )));
            }
        }
        Ok(())
    }

    pub fn sample_next(&self, s: usize, a: usize, rng: &mut Stream) -> usize {
        let row = self.row(s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // rounding left a sliver above the cumulative sum
        row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}
