//! Theory checks on tabular arms: the state-action chain a behavior policy
//! induces, its stationary distribution, minimum occupancy and mixing time,
//! the useful-communication conditions, the sparse/dense gradient identity
//! and the value-difference bound.

mod linalg;
mod sparse;
mod vbound;

pub use sparse::{sparse_dense_gradient_test, sparse_dense_suite, SparseDenseReport, SparseDenseSuite};
pub use vbound::{policy_evaluation, value_bound_suite, value_diff_bound_check, ValueBoundReport, ValueBoundSuite};

use serde::Serialize;

use crate::envs::TabularMdp;
use crate::error::{Error, Result};

/// Default step cap for [`mixing_time`].
pub const MIXING_CAP: usize = 1_000_000;

const ROW_TOLERANCE: f64 = 1e-9;
const STATIONARY_RESIDUAL: f64 = 1e-10;

/// Markov chain over state-action pairs `(s, a)` (index `s * A + a`).
#[derive(Clone, Debug, PartialEq)]
pub struct TabularChain {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `(SA) x (SA)` transition matrix.
    pub p: Vec<f64>,
}

impl TabularChain {
    /// `P[(s, a), (s', a')] = T(s' | s, a) pi(a' | s')`.
    pub fn from_policy(mdp: &TabularMdp, policy: &[Vec<f64>]) -> Result<Self> {
        mdp.validate()?;
        let (ns, na) = (mdp.n_states, mdp.n_actions);
        if policy.len() != ns || policy.iter().any(|row| row.len() != na) {
            return Err(Error::arg("policy must give one distribution over actions per state"));
        }
        for row in policy {
            if row.iter().any(|p| *p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::arg("policy rows must be probability vectors"));
            }
        }
        let n = ns * na;
        let mut p = vec![0.0; n * n];
        for s in 0..ns {
            for a in 0..na {
                let row = mdp.row(s, a);
                for (s2, t) in row.iter().enumerate() {
                    for (a2, pi) in policy[s2].iter().enumerate() {
                        p[(s * na + a) * n + s2 * na + a2] = t * pi;
                    }
                }
            }
        }
        TabularChain::from_matrix(ns, na, p)
    }

    pub fn from_matrix(n_states: usize, n_actions: usize, p: Vec<f64>) -> Result<Self> {
        let n = n_states * n_actions;
        if n == 0 || p.len() != n * n {
            return Err(Error::arg("transition matrix has the wrong size"));
        }
        for r in 0..n {
            let row = &p[r * n..(r + 1) * n];
            if row.iter().any(|x| *x < 0.0 || !x.is_finite()) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::arg(format!("row {r} is not a probability vector")));
            }
        }
        Ok(TabularChain { n_states, n_actions, p })
    }

    pub fn size(&self) -> usize {
        self.n_states * self.n_actions
    }

    fn reach(&self, forward: bool) -> Vec<bool> {
        let n = self.size();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if forward { self.p[u * n + v] } else { self.p[v * n + u] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    pub fn is_irreducible(&self) -> bool {
        self.reach(true).into_iter().all(|x| x) && self.reach(false).into_iter().all(|x| x)
    }

    /// Period of an irreducible chain: gcd of `level(u) + 1 - level(v)` over
    /// all edges, with BFS levels from state 0.
    pub fn period(&self) -> usize {
        let n = self.size();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.p[u * n + v] > 0.0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g = 0usize;
        for u in 0..n {
            for v in 0..n {
                if self.p[u * n + v] > 0.0 && level[u] != usize::MAX && level[v] != usize::MAX {
                    g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                }
            }
        }
        g
    }

    fn check_ergodic(&self) -> Result<()> {
        if !self.is_irreducible() {
            return Err(Error::Structure("chain is not irreducible".into()));
        }
        let d = self.period();
        if d != 1 {
            return Err(Error::Structure(format!("chain is periodic with period {d}")));
        }
        Ok(())
    }

    fn left_mul(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n];
        for (i, m) in mu.iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(&self.p[i * n..(i + 1) * n]) {
                *o += m * p;
            }
        }
        out
    }

    fn residual(&self, mu: &[f64]) -> f64 {
        self.left_mul(mu).iter().zip(mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution by power iteration, falling back to a direct
/// solve of `mu (P - I) = 0, sum mu = 1` when iteration stalls.
pub fn stationary_distribution(chain: &TabularChain) -> Result<Vec<f64>> {
    chain.check_ergodic()?;
    let n = chain.size();
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..20_000 {
        let next = chain.left_mul(&mu);
        let delta = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        mu = next;
        if delta <= 1e-14 {
            break;
        }
    }
    if chain.residual(&mu) > STATIONARY_RESIDUAL {
        mu = direct_stationary(chain)?;
    }
    let total: f64 = mu.iter().sum();
    for m in &mut mu {
        *m = (*m / total).max(0.0);
    }
    let r = chain.residual(&mu);
    if r > STATIONARY_RESIDUAL {
        return Err(Error::numeric(format!("stationary residual {r:e} above tolerance")));
    }
    Ok(mu)
}

fn direct_stationary(chain: &TabularChain) -> Result<Vec<f64>> {
    let n = chain.size();
    // Transposed system (P^T - I) mu = 0 with the last equation replaced by
    // the normalization.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = chain.p[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    linalg::solve(a, b, n)
}

pub fn mu_min(chain: &TabularChain) -> Result<f64> {
    Ok(stationary_distribution(chain)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// `max_{x} max_{y} |P^t(x, y) - mu(y)|`.
fn deviation(pt: &[f64], mu: &[f64]) -> f64 {
    let n = mu.len();
    pt.chunks(n)
        .flat_map(|row| row.iter().zip(mu).map(|(p, m)| (p - m).abs()))
        .fold(0.0, f64::max)
}

/// Deviation of `P^t` from stationarity, for any `t >= 0`.
pub fn deviation_at(chain: &TabularChain, mu: &[f64], t: usize) -> f64 {
    let n = chain.size();
    let mut acc = linalg::identity(n);
    let mut base = chain.p.clone();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            acc = linalg::matmul(&acc, &base, n);
        }
        e >>= 1;
        if e > 0 {
            base = linalg::matmul(&base, &base, n);
        }
    }
    deviation(&acc, mu)
}

/// Smallest `t >= 1` with deviation at most 1/4, under the default cap.
pub fn mixing_time(chain: &TabularChain) -> Result<usize> {
    mixing_time_capped(chain, MIXING_CAP)
}

/// The deviation is non-increasing in `t` (each row of `P^{t+1} - mu` is a
/// convex combination of rows of `P^t - mu`), so doubling brackets the
/// answer and bisection finds it.
pub fn mixing_time_capped(chain: &TabularChain, cap: usize) -> Result<usize> {
    let mu = stationary_distribution(chain)?;
    let n = chain.size();
    let ok = |t: usize| deviation_at(chain, &mu, t) <= 0.25;
    if deviation(&chain.p, &mu) <= 0.25 {
        return Ok(1);
    }
    // Doubling: powers[k] = P^(2^k).
    let mut hi = 1usize;
    let mut pk = chain.p.clone();
    loop {
        if hi >= cap {
            if ok(cap) {
                hi = cap;
                break;
            }
            return Err(Error::NonMixing { cap });
        }
        pk = linalg::matmul(&pk, &pk, n);
        hi *= 2;
        if deviation(&pk, &mu) <= 0.25 {
            break;
        }
    }
    let mut lo = hi / 2; // fails
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The two sufficient conditions for communication to help.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop1Report {
    pub mu_min: f64,
    /// `2 (1 - beta)^2 / (|S| |A|)`.
    pub mu_threshold: f64,
    pub t_mix: usize,
    /// `1 / (eps_e^2 (1 - beta)^4)`.
    pub t_mix_bound: f64,
    pub occupancy_ok: bool,
    pub mixing_ok: bool,
    pub holds: bool,
}

pub fn check_prop1_condition(chain: &TabularChain, beta: f64, epsilon_e: f64) -> Result<Prop1Report> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config("discount must lie in [0, 1)"));
    }
    if epsilon_e <= 0.0 {
        return Err(Error::arg("accuracy must be positive"));
    }
    let mu_min = mu_min(chain)?;
    let mu_threshold = prop1_occupancy_threshold(beta, chain.n_states, chain.n_actions);
    let t_mix = mixing_time(chain)?;
    let t_mix_bound = prop1_mixing_bound(beta, epsilon_e);
    let occupancy_ok = mu_min > mu_threshold;
    let mixing_ok = t_mix as f64 <= t_mix_bound;
    Ok(Prop1Report {
        mu_min,
        mu_threshold,
        t_mix,
        t_mix_bound,
        occupancy_ok,
        mixing_ok,
        holds: occupancy_ok && mixing_ok,
    })
}

pub fn prop1_occupancy_threshold(beta: f64, n_states: usize, n_actions: usize) -> f64 {
    2.0 * (1.0 - beta).powi(2) / (n_states * n_actions) as f64
}

pub fn prop1_mixing_bound(beta: f64, epsilon_e: f64) -> f64 {
    1.0 / (epsilon_e.powi(2) * (1.0 - beta).powi(4))
}
