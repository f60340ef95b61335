//! Browser demo: chain non-visit curves, the budgeted knapsack planner and
//! mixing of a two-state chain.
//!
//! Each export wraps a plain function returning JSON so the logic can be
//! tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use rmab_comm::analysis::{deviation_at, mixing_time_capped, stationary_distribution, TabularChain};
use rmab_comm::envs::{chain_not_visited_prob, NotVisited, NotVisitedVariant};
use rmab_comm::planner::solve_mckp;

#[derive(Serialize)]
struct CurvePoint {
    k: usize,
    noise_free: f64,
    noisy_lower: f64,
    noisy_upper: f64,
}

/// Probability that the rewarding end of a length-`n` chain is still
/// unvisited after `k` epochs, for `k = 1..=k_max`.
pub fn chain_curves_json(n: usize, epsilon: f64, k_max: usize) -> Result<String, String> {
    if k_max == 0 || k_max > 500 {
        return Err("k_max must lie in 1..=500".into());
    }
    let mut pts = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let clean = chain_not_visited_prob(n, k, epsilon, NotVisitedVariant::NoiseFree).map_err(|e| e.to_string())?;
        let noisy = chain_not_visited_prob(n, k, epsilon, NotVisitedVariant::NoisyBounds).map_err(|e| e.to_string())?;
        let (NotVisited::Exact(p), NotVisited::Bounds { lower, upper }) = (clean, noisy) else {
            return Err("unexpected closed-form variant".into());
        };
        pts.push(CurvePoint {
            k,
            noise_free: p,
            noisy_lower: lower,
            noisy_upper: upper,
        });
    }
    serde_json::to_string(&pts).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Plan {
    actions: Vec<usize>,
    total_value: f64,
    total_cost: u32,
}

/// `values` is a JSON array of per-arm action-value rows; `costs` a JSON
/// array of action costs with `costs[0] = 0`.
pub fn knapsack_json(values: &str, costs: &str, budget: u32) -> Result<String, String> {
    let values: Vec<Vec<f64>> = serde_json::from_str(values).map_err(|e| format!("values: {e}"))?;
    let costs: Vec<u32> = serde_json::from_str(costs).map_err(|e| format!("costs: {e}"))?;
    if values.len() > 64 || costs.len() > 8 {
        return Err("demo limit: at most 64 arms and 8 actions".into());
    }
    let actions = solve_mckp(&values, &costs, budget).map_err(|e| e.to_string())?;
    let plan = Plan {
        total_value: values.iter().zip(&actions).map(|(row, &a)| row[a]).sum(),
        total_cost: actions.iter().map(|&a| costs[a]).sum(),
        actions,
    };
    serde_json::to_string(&plan).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Mixing {
    stationary: Vec<f64>,
    t_mix: usize,
    deviation: Vec<f64>,
}

/// Two-state chain leaving state 0 with probability `p` and state 1 with
/// probability `q`; deviation from stationarity for `t = 1..=horizon`.
pub fn two_state_mixing_json(p: f64, q: f64, horizon: usize) -> Result<String, String> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err("p and q must lie in [0, 1]".into());
    }
    let chain = TabularChain::from_matrix(2, 1, vec![1.0 - p, p, q, 1.0 - q]).map_err(|e| e.to_string())?;
    let mu = stationary_distribution(&chain).map_err(|e| e.to_string())?;
    let t_mix = mixing_time_capped(&chain, 100_000).map_err(|e| e.to_string())?;
    let deviation = (1..=horizon.min(200)).map(|t| deviation_at(&chain, &mu, t)).collect();
    serde_json::to_string(&Mixing {
        stationary: mu,
        t_mix,
        deviation,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn chain_curves(n: usize, epsilon: f64, k_max: usize) -> Result<String, JsError> {
    chain_curves_json(n, epsilon, k_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn knapsack(values: &str, costs: &str, budget: u32) -> Result<String, JsError> {
    knapsack_json(values, costs, budget).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn two_state_mixing(p: f64, q: f64, horizon: usize) -> Result<String, JsError> {
    two_state_mixing_json(p, q, horizon).map_err(|e| JsError::new(&e))
}
