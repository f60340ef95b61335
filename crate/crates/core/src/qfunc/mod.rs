//! Per-arm action-value functions: tabular and tiny-MLP representations, the
//! Lagrangian TD loss and its gradient, exploration policies and replay.

mod blob;
mod mlp;
mod replay;

pub use blob::{ParamBlob, ReprTag};
pub use mlp::{Mlp, MlpCache};
pub use replay::ReplayBuffer;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rmab::{State, StateSpace, ENCODING_DIM};
use crate::rng::Stream;

/// Hidden width of the per-arm network.
pub const HIDDEN_UNITS: usize = 16;

/// One experience tuple; `reward` is the observed (possibly noisy) reward of
/// `state`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: usize,
    pub reward: f64,
    pub next_state: State,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QRepr {
    /// One entry per (slot, action); continuous states use their bin.
    Tabular { states: usize, actions: usize },
    Mlp(Mlp),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QFunction {
    repr: QRepr,
    space: StateSpace,
    params: Vec<f64>,
    target: Vec<f64>,
}

impl QFunction {
    /// Zero-initialized table.
    pub fn tabular(space: StateSpace, actions: usize) -> Self {
        let states = space.slots();
        QFunction {
            repr: QRepr::Tabular { states, actions },
            space,
            params: vec![0.0; states * actions],
            target: vec![0.0; states * actions],
        }
    }

    pub fn mlp(space: StateSpace, actions: usize, rng: &mut Stream) -> Self {
        let net = Mlp::new(ENCODING_DIM, HIDDEN_UNITS, actions);
        let params = net.init(rng, false);
        QFunction {
            repr: QRepr::Mlp(net),
            space,
            target: params.clone(),
            params,
        }
    }

    pub fn repr(&self) -> QRepr {
        self.repr
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn num_actions(&self) -> usize {
        match self.repr {
            QRepr::Tabular { actions, .. } => actions,
            QRepr::Mlp(m) => m.outputs,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn target_params(&self) -> &[f64] {
        &self.target
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::arg("parameter length mismatch"));
        }
        self.params = params;
        Ok(())
    }

    /// The only way the target parameters change.
    pub fn copy_target(&mut self) {
        self.target.clone_from(&self.params);
    }

    /// `Q(s, .)` under `params`, written to `out`.
    pub fn values_with(&self, params: &[f64], s: &State, out: &mut Vec<f64>) {
        out.clear();
        match self.repr {
            QRepr::Tabular { actions, .. } => {
                let base = self.space.slot(s) * actions;
                out.extend_from_slice(&params[base..base + actions]);
            }
            QRepr::Mlp(net) => {
                let mut x = [0.0; ENCODING_DIM];
                self.space.encode_into(s, &mut x);
                out.extend(net.forward(params, &x));
            }
        }
    }

    pub fn values(&self, s: &State) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_actions());
        self.values_with(&self.params, s, &mut out);
        out
    }

    pub fn target_values(&self, s: &State) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_actions());
        self.values_with(&self.target, s, &mut out);
        out
    }

    /// In-place `theta <- theta - alpha * grad`.
    pub fn sgd_step(&mut self, grad: &[f64], alpha: f64) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(Error::arg(format!(
                "gradient has {} entries, parameters have {}",
                grad.len(),
                self.params.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("non-finite gradient"));
        }
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= alpha * g;
        }
        Ok(())
    }

    pub fn to_blob(&self) -> Vec<u8> {
        let (tag, shape) = match self.repr {
            QRepr::Tabular { states, actions } => (ReprTag::Tabular, vec![states as u32, actions as u32]),
            QRepr::Mlp(m) => (ReprTag::Mlp, vec![m.inputs as u32, m.hidden as u32, m.outputs as u32]),
        };
        ParamBlob {
            tag,
            shape,
            params: self.params.clone(),
            target: self.target.clone(),
        }
        .encode()
    }

    /// Rebuild from a parameter blob; the state space is not part of the
    /// blob and must be supplied.
    pub fn from_blob(bytes: &[u8], space: StateSpace) -> Result<Self> {
        let blob = ParamBlob::decode(bytes)?;
        let repr = match (blob.tag, blob.shape.as_slice()) {
            (ReprTag::Tabular, [s, a]) => QRepr::Tabular {
                states: *s as usize,
                actions: *a as usize,
            },
            (ReprTag::Mlp, [i, h, o]) => QRepr::Mlp(Mlp::new(*i as usize, *h as usize, *o as usize)),
            _ => return Err(Error::Blob("blob is not an arm Q-function".into())),
        };
        let expected = match repr {
            QRepr::Tabular { states, actions } => states * actions,
            QRepr::Mlp(m) => m.num_params(),
        };
        if blob.params.len() != expected || blob.target.len() != expected {
            return Err(Error::Blob("parameter count does not match shape".into()));
        }
        Ok(QFunction {
            repr,
            space,
            params: blob.params,
            target: blob.target,
        })
    }

    fn check_finite(&self) -> Result<()> {
        if self.params.iter().chain(&self.target).any(|p| !p.is_finite()) {
            return Err(Error::numeric("non-finite Q parameters"));
        }
        Ok(())
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Bootstrapped target `r - lambda C(a) + beta max_a' Q(s', a'; target)`.
fn td_target(q: &QFunction, t: &Transition, costs: &[u32], lambda: f64, beta: f64, buf: &mut Vec<f64>) -> f64 {
    q.values_with(&q.target, &t.next_state, buf);
    t.reward - lambda * costs[t.action] as f64 + beta * max_of(buf)
}

/// Mean squared TD error of `batch` with live parameters `params`; the
/// bootstrap term is evaluated with the target parameters.
pub fn td_loss(q: &QFunction, params: &[f64], batch: &[Transition], costs: &[u32], lambda: f64, beta: f64) -> f64 {
    let mut buf = Vec::new();
    let mut pred = Vec::new();
    let total: f64 = batch
        .iter()
        .map(|t| {
            let y = td_target(q, t, costs, lambda, beta, &mut buf);
            q.values_with(params, &t.state, &mut pred);
            (y - pred[t.action]).powi(2)
        })
        .sum();
    total / batch.len() as f64
}

/// Gradient of [`td_loss`] with respect to the live parameters.
pub fn td_grad(q: &QFunction, batch: &[Transition], costs: &[u32], lambda: f64, beta: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::arg("empty TD batch"));
    }
    q.check_finite()?;
    let mut grad = vec![0.0; q.params.len()];
    let scale = 2.0 / batch.len() as f64;
    let mut buf = Vec::with_capacity(q.num_actions());
    match q.repr {
        QRepr::Tabular { actions, .. } => {
            for t in batch {
                let y = td_target(q, t, costs, lambda, beta, &mut buf);
                let idx = q.space.slot(&t.state) * actions + t.action;
                grad[idx] += scale * (q.params[idx] - y);
            }
        }
        QRepr::Mlp(net) => {
            let mut cache = MlpCache::default();
            let mut x = [0.0; ENCODING_DIM];
            let mut dout = vec![0.0; net.outputs];
            for t in batch {
                let y = td_target(q, t, costs, lambda, beta, &mut buf);
                q.space.encode_into(&t.state, &mut x);
                net.forward_cached(&q.params, &x, &mut cache);
                dout.fill(0.0);
                dout[t.action] = scale * (cache.out[t.action] - y);
                net.backward(&q.params, &cache, &dout, &mut grad);
            }
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("non-finite TD gradient"));
    }
    Ok(grad)
}

/// Free-function form of [`QFunction::sgd_step`].
pub fn sgd_step(q: &mut QFunction, grad: &[f64], alpha: f64) -> Result<()> {
    q.sgd_step(grad, alpha)
}

/// With probability `epsilon` a uniform action from `rng`, otherwise the
/// argmax of `values` with exact ties split uniformly using `ties`.
pub fn greedy_with_ties(values: &[f64], epsilon: f64, rng: &mut Stream, ties: &mut Stream) -> usize {
    if rng.random::<f64>() < epsilon {
        return rng.random_range(0..values.len());
    }
    let best = max_of(values);
    let n_best = values.iter().filter(|v| **v == best).count();
    if n_best == 1 {
        return values.iter().position(|v| *v == best).unwrap();
    }
    let pick = ties.random_range(0..n_best);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == best)
        .nth(pick)
        .map(|(i, _)| i)
        .unwrap()
}

pub fn epsilon_greedy(q: &QFunction, s: &State, epsilon: f64, rng: &mut Stream, ties: &mut Stream) -> usize {
    greedy_with_ties(&q.values(s), epsilon, rng, ties)
}

/// Max-shifted softmax.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let m = max_of(values);
    let exps: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Behavior policy built from a received Q-function.
pub fn softmax_policy(q_sender: &QFunction, s: &State) -> Vec<f64> {
    softmax(&q_sender.values(s))
}

pub fn sample_index(probs: &[f64], rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
