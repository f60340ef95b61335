//! Sparse versus dense communication: learning from one uniformly drawn
//! sender per step is stochastic gradient descent on the loss over the
//! equal mixture of all senders' data.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qfunc::{sample_index, softmax_policy, td_grad, QFunction, Transition};
use crate::rmab::{ArmMdp, StateSpace};
use crate::rng::{self, tag, Stream};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparseDenseReport {
    pub senders: usize,
    pub trials: usize,
    pub dense: Vec<f64>,
    pub sparse_mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub max_abs_dev: f64,
    /// Largest `|g_j - dense|` over senders `j` and components.
    pub per_sender_max_dev: f64,
    /// Largest `|dev| / se` over components with nonzero standard error.
    pub max_z: f64,
    pub within_3se: bool,
    /// Fewer than two trials: no standard error can be formed.
    pub insufficient: bool,
}

/// One buffer per sender, collected by the softmax of that sender's Q.
/// Every buffer starts from the same stream state, so identical senders
/// yield identical buffers.
fn sender_buffers(mdp: &ArmMdp, senders: &[QFunction], batch_size: usize, seed: u64) -> Vec<Vec<Transition>> {
    let space = mdp.state_space();
    let base = rng::stream(seed, &[tag::ANALYSIS, 0]);
    senders
        .iter()
        .map(|q| {
            let mut r = base.clone();
            let mut s = space.sample_uniform(&mut r);
            (0..batch_size)
                .map(|_| {
                    let a = sample_index(&softmax_policy(q, &s), &mut r);
                    let next = mdp.step(&s, a, &mut r);
                    let t = Transition {
                        state: s,
                        action: a,
                        reward: mdp.reward(&s),
                        next_state: next,
                    };
                    s = next;
                    t
                })
                .collect()
        })
        .collect()
}

/// Dense gradient (mean over senders of each sender's buffer gradient)
/// against the mean of `trials` sparse gradients, each from one sender
/// drawn uniformly.
pub fn sparse_dense_gradient_test(
    mdp: &ArmMdp,
    q: &QFunction,
    senders: &[QFunction],
    batch_size: usize,
    trials: usize,
    lambda: f64,
    seed: u64,
) -> Result<SparseDenseReport> {
    let d = senders.len();
    if d < 2 {
        return Err(Error::arg("need at least two senders"));
    }
    if batch_size == 0 || trials == 0 {
        return Err(Error::arg("batch size and trial count must be positive"));
    }
    let buffers = sender_buffers(mdp, senders, batch_size, seed);
    let grads: Vec<Vec<f64>> = buffers
        .iter()
        .map(|b| td_grad(q, b, &mdp.costs, lambda, mdp.discount))
        .collect::<Result<_>>()?;
    let k = grads[0].len();
    let mut dense = vec![0.0; k];
    for g in &grads {
        for (x, y) in dense.iter_mut().zip(g) {
            *x += y;
        }
    }
    for x in &mut dense {
        *x /= d as f64;
    }
    let mut pick = rng::stream(seed, &[tag::ANALYSIS, 1]);
    let mut sum = vec![0.0; k];
    let mut sumsq = vec![0.0; k];
    for _ in 0..trials {
        let j = pick.random_range(0..d);
        for ((s, s2), g) in sum.iter_mut().zip(&mut sumsq).zip(&grads[j]) {
            *s += g;
            *s2 += g * g;
        }
    }
    let t = trials as f64;
    let sparse_mean: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let std_err: Vec<f64> = if trials < 2 {
        vec![f64::NAN; k]
    } else {
        sum.iter()
            .zip(&sumsq)
            .map(|(s, s2)| {
                let var = ((s2 - s * s / t) / (t - 1.0)).max(0.0);
                (var / t).sqrt()
            })
            .collect()
    };
    let mut max_abs_dev: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut within = trials >= 2;
    for ((m, dn), se) in sparse_mean.iter().zip(&dense).zip(&std_err) {
        let dev = (m - dn).abs();
        max_abs_dev = max_abs_dev.max(dev);
        if trials < 2 {
            continue;
        }
        // Components constant across senders have zero spread; the mean
        // must then match up to rounding.
        let tol = 1e-12 * dn.abs().max(1.0);
        if *se > tol {
            max_z = max_z.max(dev / se);
            within &= dev <= 3.0 * se;
        } else {
            within &= dev <= tol;
        }
    }
    let per_sender_max_dev = grads
        .iter()
        .flat_map(|g| g.iter().zip(&dense).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(SparseDenseReport {
        per_sender_max_dev,
        senders: d,
        trials,
        dense,
        sparse_mean,
        std_err,
        max_abs_dev,
        max_z,
        within_3se: within,
        insufficient: trials < 2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparseDenseSuite {
    pub configs: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// Per configuration, the largest `|dev| / se`.
    pub max_z: Vec<f64>,
}

/// Random tabular arms, random receiver and sender tables; fraction of
/// configurations passing the 3-standard-error check.
pub fn sparse_dense_suite(configs: usize, senders: usize, trials: usize, seed: u64) -> Result<SparseDenseSuite> {
    use crate::envs::TabularMdp;
    use crate::rmab::Dynamics;
    let mut passed = 0;
    let mut max_z = Vec::with_capacity(configs);
    for c in 0..configs {
        let mut r: Stream = rng::stream(seed, &[tag::ANALYSIS, 2, c as u64]);
        let mdp = ArmMdp::new(Dynamics::Tabular(TabularMdp::random(4, 2, &mut r)), vec![0, 1], 0.9)?;
        let space = StateSpace::Discrete(4);
        let table = |r: &mut Stream| {
            let mut q = QFunction::tabular(space, 2);
            q.set_params((0..8).map(|_| r.random_range(-1.0..1.0)).collect())?;
            q.copy_target();
            Ok::<_, Error>(q)
        };
        let q = table(&mut r)?;
        let ss: Vec<QFunction> = (0..senders).map(|_| table(&mut r)).collect::<Result<_>>()?;
        let rep = sparse_dense_gradient_test(&mdp, &q, &ss, 32, trials, 0.1, rng::derive(seed, &[c as u64]))?;
        passed += rep.within_3se as usize;
        max_z.push(rep.max_z);
    }
    Ok(SparseDenseSuite {
        configs,
        passed,
        pass_rate: passed as f64 / configs.max(1) as f64,
        max_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::TabularMdp;
    use crate::rmab::Dynamics;
    use crate::rng::stream;

    fn setup(seed: u64, d: usize) -> (ArmMdp, QFunction, Vec<QFunction>) {
        let mut r = stream(seed, &[]);
        let mdp = ArmMdp::new(Dynamics::Tabular(TabularMdp::random(4, 2, &mut r)), vec![0, 1], 0.9).unwrap();
        let mk = |r: &mut Stream| {
            let mut q = QFunction::tabular(StateSpace::Discrete(4), 2);
            q.set_params((0..8).map(|_| r.random_range(-2.0..2.0)).collect()).unwrap();
            q
        };
        let q = mk(&mut r);
        let senders = (0..d).map(|_| mk(&mut r)).collect();
        (mdp, q, senders)
    }

    #[test]
    fn identical_senders_agree_exactly() {
        let (mdp, q, s) = setup(1, 1);
        let two = vec![s[0].clone(), s[0].clone()];
        let rep = sparse_dense_gradient_test(&mdp, &q, &two, 32, 5, 0.1, 3).unwrap();
        assert_eq!(rep.per_sender_max_dev, 0.0);
        assert!(rep.max_abs_dev <= 1e-15);
        assert!(rep.within_3se);
    }

    #[test]
    fn three_senders_mean_matches_dense() {
        let (mdp, q, s) = setup(2, 3);
        let rep = sparse_dense_gradient_test(&mdp, &q, &s, 64, 10_000, 0.1, 4).unwrap();
        assert!(rep.within_3se, "max z {}", rep.max_z);
        assert!(rep.max_abs_dev > 0.0);
    }

    #[test]
    fn dense_equals_mixture_buffer_gradient() {
        let (mdp, q, s) = setup(3, 2);
        let rep = sparse_dense_gradient_test(&mdp, &q, &s, 16, 2, 0.1, 5).unwrap();
        let mix: Vec<Transition> = sender_buffers(&mdp, &s, 16, 5).concat();
        let g = td_grad(&q, &mix, &mdp.costs, 0.1, mdp.discount).unwrap();
        for (a, b) in g.iter().zip(&rep.dense) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn single_trial_is_flagged() {
        let (mdp, q, s) = setup(4, 2);
        let rep = sparse_dense_gradient_test(&mdp, &q, &s, 8, 1, 0.1, 6).unwrap();
        assert!(rep.insufficient && !rep.within_3se);
        assert!(sparse_dense_gradient_test(&mdp, &q, &s[..1], 8, 10, 0.1, 6).is_err());
        assert!(sparse_dense_gradient_test(&mdp, &q, &s, 0, 10, 0.1, 6).is_err());
    }

    #[test]
    fn suite_pass_rate() {
        let suite = sparse_dense_suite(100, 3, 2000, 11).unwrap();
        assert!(suite.pass_rate >= 0.95, "{suite:?}");
    }
}
