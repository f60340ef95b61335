//! Value difference of one policy on two MDPs sharing states and actions:
//! `|V_i - V_j| <= eps_R / (1 - b) + b eps_P R_max / (1 - b)^2`.

use rand::Rng;
use serde::Serialize;

use super::linalg;
use crate::envs::TabularMdp;
use crate::error::{Error, Result};
use crate::qfunc::softmax;
use crate::rng::{self, tag};

/// Rounding allowance on the bound for the `holds` flag. The exact slack is
/// reported separately.
const ROUNDING: f64 = 1e-12;

/// Exact `V = R + beta P_pi V`, rewards credited on the current state.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &[Vec<f64>], beta: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config("discount must lie in [0, 1)"));
    }
    let n = mdp.n_states;
    if policy.len() != n || policy.iter().any(|p| p.len() != mdp.n_actions) {
        return Err(Error::arg("policy shape does not match the MDP"));
    }
    let mut a = linalg::identity(n);
    for s in 0..n {
        for (act, pi) in policy[s].iter().enumerate() {
            for (s2, t) in mdp.row(s, act).iter().enumerate() {
                a[s * n + s2] -= beta * pi * t;
            }
        }
    }
    linalg::solve(a, mdp.rewards.clone(), n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueBoundReport {
    pub eps_r: f64,
    pub eps_p: f64,
    pub r_max: f64,
    /// `max_s |V_i(s) - V_j(s)|`.
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub holds: bool,
}

pub fn value_diff_bound_check(mi: &TabularMdp, mj: &TabularMdp, policy: &[Vec<f64>], beta: f64) -> Result<ValueBoundReport> {
    if mi.n_states != mj.n_states || mi.n_actions != mj.n_actions {
        return Err(Error::arg("MDPs must share states and actions"));
    }
    mi.validate()?;
    mj.validate()?;
    let vi = policy_evaluation(mi, policy, beta)?;
    let vj = policy_evaluation(mj, policy, beta)?;
    let eps_r = mi.rewards.iter().zip(&mj.rewards).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let eps_p = mi
        .transitions
        .iter()
        .zip(&mj.transitions)
        .map(|(ri, rj)| ri.iter().zip(rj).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let r_max = mi.rewards.iter().chain(&mj.rewards).map(|r| r.abs()).fold(0.0, f64::max);
    let lhs = vi.iter().zip(&vj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let rhs = eps_r / (1.0 - beta) + beta * eps_p * r_max / (1.0 - beta).powi(2);
    Ok(ValueBoundReport {
        eps_r,
        eps_p,
        r_max,
        lhs,
        rhs,
        slack: rhs - lhs,
        holds: lhs <= rhs + ROUNDING * rhs.max(1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueBoundSuite {
    pub pairs: usize,
    pub violations: usize,
    pub min_slack: f64,
}

/// Random MDP pairs: half independent, half small perturbations of each
/// other, with a random softmax policy each.
pub fn value_bound_suite(pairs: usize, n_states: usize, n_actions: usize, beta: f64, seed: u64) -> Result<ValueBoundSuite> {
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for k in 0..pairs {
        let mut r = rng::stream(seed, &[tag::ANALYSIS, 3, k as u64]);
        let mi = TabularMdp::random(n_states, n_actions, &mut r);
        let mj = if k % 2 == 0 {
            TabularMdp::random(n_states, n_actions, &mut r)
        } else {
            let mut m = mi.clone();
            let w: f64 = r.random_range(0.0..0.2);
            let other = TabularMdp::random(n_states, n_actions, &mut r);
            for (row, o) in m.transitions.iter_mut().zip(&other.transitions) {
                for (x, y) in row.iter_mut().zip(o) {
                    *x = (1.0 - w) * *x + w * y;
                }
            }
            for x in &mut m.rewards {
                *x += r.random_range(-0.1..0.1);
            }
            m
        };
        let policy: Vec<Vec<f64>> = (0..n_states)
            .map(|_| softmax(&(0..n_actions).map(|_| r.random_range(-2.0..2.0)).collect::<Vec<_>>()))
            .collect();
        let rep = value_diff_bound_check(&mi, &mj, &policy, beta)?;
        if rep.lhs > rep.rhs {
            violations += 1;
        }
        min_slack = min_slack.min(rep.slack);
    }
    Ok(ValueBoundSuite {
        pairs,
        violations,
        min_slack,
    })
}
