//! Central planner: budget-feasible joint actions from per-arm Q-values via
//! an exact multiple-choice knapsack, the Lagrangian value and the empirical
//! discounted return.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qfunc::QFunction;
use crate::rmab::{RmabInstance, State};
use crate::rng::{self, tag};

/// Exact multiple-choice knapsack: one action per arm, maximizing the summed
/// value under `sum costs[a_i] <= budget`.
///
/// Sums are accumulated in arm order, so the reported optimum equals the
/// best left-to-right sum over all feasible vectors bit for bit. Among
/// optimal vectors the lowest total cost wins, then the lexicographically
/// smallest one.
pub fn solve_mckp(values: &[Vec<f64>], costs: &[u32], budget: u32) -> Result<Vec<usize>> {
    if costs.first() != Some(&0) {
        return Err(Error::arg("action 0 must be free"));
    }
    if values.iter().any(|row| row.len() != costs.len()) {
        return Err(Error::arg("Q row length differs from the number of actions"));
    }
    if values.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::numeric("NaN Q-value in planner"));
    }
    let cap = budget as usize;
    // best[c]: optimum over the arms processed so far at exact cost c,
    // with the lexicographically smallest prefix reaching it.
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; cap + 1];
    best[0] = Some((0.0, Vec::new()));
    for row in values {
        let mut next: Vec<Option<(f64, Vec<usize>)>> = vec![None; cap + 1];
        for (c, cell) in next.iter_mut().enumerate() {
            for (a, (&q, &cost)) in row.iter().zip(costs).enumerate() {
                let cost = cost as usize;
                if cost > c {
                    continue;
                }
                let Some((v, prefix)) = &best[c - cost] else { continue };
                let total = v + q;
                let better = match cell {
                    None => true,
                    Some((bv, bp)) => total > *bv || (total == *bv && lex_less(prefix, a, bp)),
                };
                if better {
                    let mut p = Vec::with_capacity(prefix.len() + 1);
                    p.extend_from_slice(prefix);
                    p.push(a);
                    *cell = Some((total, p));
                }
            }
        }
        best = next;
    }
    let mut winner: Option<(f64, Vec<usize>)> = None;
    for (v, p) in best.into_iter().flatten() {
        // Increasing cost order, so only a strictly larger value replaces.
        if winner.as_ref().is_none_or(|(wv, _)| v > *wv) {
            winner = Some((v, p));
        }
    }
    Ok(winner.map(|(_, p)| p).unwrap_or_default())
}

/// `prefix ++ [a] < other` lexicographically, both of equal length.
fn lex_less(prefix: &[usize], a: usize, other: &[usize]) -> bool {
    match prefix.cmp(&other[..prefix.len()]) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a < other[prefix.len()],
    }
}

/// Joint policy induced by all arms' Q-functions under a shared budget.
#[derive(Clone, Debug)]
pub struct PlannerPolicy<'a> {
    pub qfns: Vec<&'a QFunction>,
    pub budget: u32,
    pub costs: Vec<u32>,
}

/// One line of the optional planner trace.
#[derive(Debug, Serialize)]
pub struct PlannerTraceRecord<'a> {
    pub epoch: usize,
    pub state: &'a [State],
    pub actions: &'a [usize],
    pub total_q: f64,
    pub total_cost: u32,
}

impl<'a> PlannerPolicy<'a> {
    pub fn new(qfns: Vec<&'a QFunction>, budget: u32, costs: Vec<u32>) -> Self {
        PlannerPolicy { qfns, budget, costs }
    }

    pub fn select_actions(&self, states: &[State]) -> Result<Vec<usize>> {
        Ok(self.select_with_values(states)?.0)
    }

    fn select_with_values(&self, states: &[State]) -> Result<(Vec<usize>, f64)> {
        if states.len() != self.qfns.len() {
            return Err(Error::arg("joint state length differs from the number of arms"));
        }
        let rows: Vec<Vec<f64>> = self.qfns.iter().zip(states).map(|(q, s)| q.values(s)).collect();
        let actions = solve_mckp(&rows, &self.costs, self.budget)?;
        let spent: u32 = actions.iter().map(|&a| self.costs[a]).sum();
        assert!(spent <= self.budget, "planner exceeded the budget");
        let total = rows.iter().zip(&actions).map(|(r, &a)| r[a]).sum();
        Ok((actions, total))
    }

    /// [`Self::select_actions`], also writing one JSON line to `trace`.
    pub fn select_actions_traced(&self, states: &[State], epoch: usize, trace: &mut dyn Write) -> Result<Vec<usize>> {
        let (actions, total_q) = self.select_with_values(states)?;
        let rec = PlannerTraceRecord {
            epoch,
            state: states,
            actions: &actions,
            total_q,
            total_cost: actions.iter().map(|&a| self.costs[a]).sum(),
        };
        serde_json::to_writer(&mut *trace, &rec)?;
        trace.write_all(b"\n")?;
        Ok(actions)
    }
}

/// `lambda B / (1 - beta) + sum_i max_j Q_i(s_i, j)`.
pub fn lagrangian_value(qfns: &[&QFunction], states: &[State], lambda: f64, beta: f64, budget: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config(format!("discount must lie in [0, 1), got {beta}")));
    }
    if states.len() != qfns.len() {
        return Err(Error::arg("joint state length differs from the number of arms"));
    }
    let total: f64 = qfns
        .iter()
        .zip(states)
        .map(|(q, s)| q.values(s).into_iter().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    Ok(lambda * budget as f64 / (1.0 - beta) + total)
}

/// Discounted true return of one episode; arm `i` draws from
/// `stream(base_seed, [EPISODE, episode, i])`, including its initial state.
pub fn episode_return(policy: &PlannerPolicy, instance: &RmabInstance, horizon: usize, base_seed: u64, episode: u64) -> Result<f64> {
    run_episode(policy, instance, horizon, base_seed, episode, None)
}

/// [`episode_return`] with every planner decision traced, tagged `epoch`.
pub fn episode_return_traced(
    policy: &PlannerPolicy,
    instance: &RmabInstance,
    horizon: usize,
    base_seed: u64,
    episode: u64,
    epoch: usize,
    trace: &mut dyn Write,
) -> Result<f64> {
    run_episode(policy, instance, horizon, base_seed, episode, Some((epoch, trace)))
}

fn run_episode(
    policy: &PlannerPolicy,
    instance: &RmabInstance,
    horizon: usize,
    base_seed: u64,
    episode: u64,
    mut trace: Option<(usize, &mut dyn Write)>,
) -> Result<f64> {
    let n = instance.n_arms();
    let space = instance.state_space();
    let beta = instance.discount();
    let mut rngs: Vec<_> = (0..n)
        .map(|i| rng::stream(base_seed, &[tag::EPISODE, episode, i as u64]))
        .collect();
    let mut states: Vec<State> = rngs.iter_mut().map(|r| space.sample_uniform(r)).collect();
    let mut total = 0.0;
    let mut disc = 1.0;
    for _ in 0..horizon {
        let actions = match trace.as_mut() {
            Some((epoch, w)) => policy.select_actions_traced(&states, *epoch, &mut **w)?,
            None => policy.select_actions(&states)?,
        };
        disc *= beta;
        let mut step_reward = 0.0;
        for i in 0..n {
            states[i] = instance.arms[i].step(&states[i], actions[i], &mut rngs[i]);
            step_reward += instance.arms[i].reward(&states[i]);
        }
        total += disc * step_reward;
    }
    Ok(total)
}

/// `G_T`: mean discounted true return over `episodes` episodes of `horizon`
/// steps. Same inputs and base seed give the same value.
pub fn evaluate_return(policy: &PlannerPolicy, instance: &RmabInstance, episodes: usize, horizon: usize, base_seed: u64) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::arg("need at least one evaluation episode"));
    }
    let mut sum = 0.0;
    for k in 0..episodes {
        sum += episode_return(policy, instance, horizon, base_seed, k as u64)?;
    }
    let g = sum / episodes as f64;
    if !g.is_finite() {
        return Err(Error::numeric("non-finite evaluation return"));
    }
    Ok(g)
}
