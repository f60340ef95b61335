//! Decomposed communication Q-network: one small head per channel, joint
//! value as the plain sum of head values, greedy channels chosen locally.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comm::{CommAction, CommTransition, Fingerprint};
use crate::error::{Error, Result};
use crate::qfunc::{Mlp, MlpCache, ParamBlob, ReplayBuffer, ReprTag, HIDDEN_UNITS};
use crate::rng::{self, tag, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommQParams {
    pub lr: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub grad_steps: usize,
    /// Communication rounds between target refreshes.
    pub target_every: usize,
}

impl Default for CommQParams {
    fn default() -> Self {
        CommQParams {
            lr: 5e-3,
            epsilon_start: 0.5,
            epsilon_decay: 0.99,
            buffer_capacity: 512,
            batch_size: 16,
            grad_steps: 20,
            target_every: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommQNetwork {
    net: Mlp,
    per_arm: usize,
    senders: Vec<usize>,
    features: Vec<Vec<f64>>,
    heads: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    pub buffer: ReplayBuffer<CommTransition>,
    pub epsilon: f64,
    pub rounds: usize,
    pub params: CommQParams,
}

impl CommQNetwork {
    /// Channel `i` carries `senders[i] -> i`. `per_arm` is the fingerprint
    /// slice length. Output layers start at zero, so every channel begins
    /// indifferent and therefore silent.
    pub fn new(per_arm: usize, senders: Vec<usize>, features: Vec<Vec<f64>>, params: CommQParams, seed: u64) -> Result<Self> {
        let n = senders.len();
        if features.len() != n {
            return Err(Error::arg("one feature vector per arm required"));
        }
        if senders.iter().enumerate().any(|(i, &j)| j >= n || j == i) {
            return Err(Error::arg("sender map must name another arm for every arm"));
        }
        let m = features.first().map_or(0, Vec::len);
        if features.iter().any(|z| z.len() != m) {
            return Err(Error::arg("feature vectors differ in length"));
        }
        let net = Mlp::new(2 * per_arm + 2 * m, HIDDEN_UNITS, 2);
        let heads: Vec<Vec<f64>> = (0..n)
            .map(|i| net.init(&mut rng::stream(seed, &[tag::COMMQ_INIT, i as u64]), true))
            .collect();
        Ok(CommQNetwork {
            net,
            per_arm,
            senders,
            features,
            targets: heads.clone(),
            heads,
            buffer: ReplayBuffer::new(params.buffer_capacity),
            epsilon: params.epsilon_start,
            rounds: 0,
            params,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.senders.len()
    }

    pub fn senders(&self) -> &[usize] {
        &self.senders
    }

    pub fn head_params(&self, i: usize) -> &[f64] {
        &self.heads[i]
    }

    pub fn set_head_params(&mut self, i: usize, params: Vec<f64>) -> Result<()> {
        if params.len() != self.net.num_params() {
            return Err(Error::arg("head parameter length mismatch"));
        }
        self.heads[i] = params;
        Ok(())
    }

    pub fn target_params(&self, i: usize) -> &[f64] {
        &self.targets[i]
    }

    pub fn copy_targets(&mut self) {
        self.targets.clone_from(&self.heads);
    }

    fn check(&self, fp: &Fingerprint) -> Result<()> {
        if fp.per_arm != self.per_arm || fp.values.len() != self.per_arm * self.n_channels() {
            return Err(Error::arg(format!(
                "fingerprint has {} values, expected {}",
                fp.values.len(),
                self.per_arm * self.n_channels()
            )));
        }
        Ok(())
    }

    fn input(&self, fp: &Fingerprint, i: usize) -> Vec<f64> {
        let j = self.senders[i];
        let mut x = Vec::with_capacity(self.net.inputs);
        x.extend_from_slice(fp.slice(i));
        x.extend_from_slice(fp.slice(j));
        x.extend_from_slice(&self.features[i]);
        x.extend_from_slice(&self.features[j]);
        x
    }

    /// `[Q_i(fp, 0), Q_i(fp, 1)]` for every channel under `heads`.
    fn channel_values_with(&self, heads: &[Vec<f64>], fp: &Fingerprint) -> Vec<[f64; 2]> {
        (0..self.n_channels())
            .map(|i| {
                let out = self.net.forward(&heads[i], &self.input(fp, i));
                [out[0], out[1]]
            })
            .collect()
    }

    pub fn channel_values(&self, fp: &Fingerprint) -> Result<Vec<[f64; 2]>> {
        self.check(fp)?;
        Ok(self.channel_values_with(&self.heads, fp))
    }

    /// Sum of the channel values picked by `a_c`.
    pub fn joint_q(&self, fp: &Fingerprint, a_c: &CommAction) -> Result<f64> {
        if a_c.len() != self.n_channels() {
            return Err(Error::arg("communication action length mismatch"));
        }
        let vals = self.channel_values(fp)?;
        Ok(vals.iter().zip(&a_c.bits).map(|(v, &b)| v[b as usize]).sum())
    }

    /// Per channel: a fair coin with probability `epsilon_c`, otherwise the
    /// larger head value with ties going to silence.
    pub fn select_comm_action(&self, fp: &Fingerprint, epsilon_c: f64, rng: &mut Stream) -> Result<CommAction> {
        let vals = self.channel_values(fp)?;
        let bits = vals
            .iter()
            .map(|v| {
                if rng.random::<f64>() < epsilon_c {
                    rng.random::<bool>()
                } else {
                    v[1] > v[0]
                }
            })
            .collect();
        Ok(CommAction { bits })
    }

    fn residual(&self, heads: &[Vec<f64>], t: &CommTransition, beta: f64) -> f64 {
        let pred: f64 = self
            .channel_values_with(heads, &t.state)
            .iter()
            .zip(&t.action.bits)
            .map(|(v, &b)| v[b as usize])
            .sum();
        let next: f64 = self
            .channel_values_with(&self.targets, &t.next_state)
            .iter()
            .map(|v| v[0].max(v[1]))
            .sum();
        pred - (t.reward + beta * next)
    }

    /// Mean squared decomposed TD error with heads `heads`.
    pub fn decomposed_loss(&self, heads: &[Vec<f64>], batch: &[CommTransition], beta: f64) -> f64 {
        batch.iter().map(|t| self.residual(heads, t, beta).powi(2)).sum::<f64>() / batch.len() as f64
    }

    /// Gradient of [`Self::decomposed_loss`] for every head. The shared
    /// residual reaches each head with unit weight.
    pub fn decomposed_grad(&self, batch: &[CommTransition], beta: f64) -> Result<Vec<Vec<f64>>> {
        if batch.is_empty() {
            return Err(Error::arg("empty communication batch"));
        }
        for t in batch {
            self.check(&t.state)?;
            self.check(&t.next_state)?;
            if !t.reward.is_finite() {
                return Err(Error::numeric("non-finite communication reward"));
            }
        }
        let mut grads = vec![vec![0.0; self.net.num_params()]; self.n_channels()];
        let scale = 2.0 / batch.len() as f64;
        let mut cache = MlpCache::default();
        for t in batch {
            let delta = scale * self.residual(&self.heads, t, beta);
            for (i, g) in grads.iter_mut().enumerate() {
                self.net.forward_cached(&self.heads[i], &self.input(&t.state, i), &mut cache);
                let mut dout = [0.0; 2];
                dout[t.action.bits[i] as usize] = delta;
                self.net.backward(&self.heads[i], &cache, &dout, g);
            }
        }
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::numeric("non-finite communication gradient"));
        }
        Ok(grads)
    }

    /// One SGD step on the decomposed TD loss; targets are left alone.
    pub fn train_comm_q(&mut self, batch: &[CommTransition], beta: f64, lr: f64) -> Result<()> {
        let grads = self.decomposed_grad(batch, beta)?;
        for (head, g) in self.heads.iter_mut().zip(&grads) {
            for (p, d) in head.iter_mut().zip(g) {
                *p -= lr * d;
            }
        }
        Ok(())
    }

    /// Store a transition and run the configured number of replayed updates;
    /// then decay exploration and refresh targets on schedule.
    pub fn observe(&mut self, t: CommTransition, beta: f64, rng: &mut Stream) -> Result<()> {
        self.buffer.push(t);
        let mut batch = Vec::with_capacity(self.params.batch_size);
        for _ in 0..self.params.grad_steps {
            self.buffer.sample_into(self.params.batch_size, rng, &mut batch);
            self.train_comm_q(&batch, beta, self.params.lr)?;
        }
        self.epsilon *= self.params.epsilon_decay;
        self.rounds += 1;
        if self.params.target_every > 0 && self.rounds % self.params.target_every == 0 {
            self.copy_targets();
        }
        Ok(())
    }

    /// Heads in the shared parameter-blob format under the comm-head tag.
    pub fn to_blob(&self) -> Vec<u8> {
        ParamBlob {
            tag: ReprTag::CommHead,
            shape: vec![
                self.n_channels() as u32,
                self.net.inputs as u32,
                self.net.hidden as u32,
                self.net.outputs as u32,
            ],
            params: self.heads.concat(),
            target: self.targets.concat(),
        }
        .encode()
    }

    /// Load head parameters into a network built for the same run.
    pub fn load_blob(&mut self, bytes: &[u8]) -> Result<()> {
        let blob = ParamBlob::decode(bytes)?;
        let want = [
            self.n_channels() as u32,
            self.net.inputs as u32,
            self.net.hidden as u32,
            self.net.outputs as u32,
        ];
        if blob.tag != ReprTag::CommHead || blob.shape != want {
            return Err(Error::Blob("blob does not match this communication network".into()));
        }
        let k = self.net.num_params();
        if blob.params.len() != k * want[0] as usize || blob.target.len() != blob.params.len() {
            return Err(Error::Blob("comm-head parameter count mismatch".into()));
        }
        self.heads = blob.params.chunks(k).map(<[f64]>::to_vec).collect();
        self.targets = blob.target.chunks(k).map(<[f64]>::to_vec).collect();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    const PER_ARM: usize = 4;

    fn net(n: usize, seed: u64) -> CommQNetwork {
        let mut r = stream(seed, &[99]);
        let features = (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let senders = (0..n).map(|i| (i + 1) % n.max(2)).map(|j| if n == 1 { 0 } else { j }).collect();
        CommQNetwork::new(PER_ARM, senders, features, CommQParams::default(), seed).unwrap()
    }

    fn randomized(n: usize, seed: u64) -> CommQNetwork {
        let mut q = net(n, seed);
        let mut r = stream(seed, &[7]);
        for i in 0..n {
            let p: Vec<f64> = q.heads[i].iter().map(|_| r.random_range(-0.8..0.8)).collect();
            q.set_head_params(i, p).unwrap();
            q.targets[i] = q.heads[i].iter().map(|x| x + r.random_range(-0.2..0.2)).collect();
        }
        q
    }

    fn fingerprint(n: usize, r: &mut Stream) -> Fingerprint {
        Fingerprint {
            per_arm: PER_ARM,
            values: (0..n * PER_ARM).map(|_| r.random_range(-2.0..2.0)).collect(),
        }
    }

    fn transition(n: usize, r: &mut Stream) -> CommTransition {
        CommTransition {
            state: fingerprint(n, r),
            action: CommAction {
                bits: (0..n).map(|_| r.random::<bool>()).collect(),
            },
            reward: r.random_range(-1.0..1.0),
            next_state: fingerprint(n, r),
        }
    }

    fn decode(n: usize, code: usize) -> CommAction {
        CommAction {
            bits: (0..n).map(|i| code >> i & 1 == 1).collect(),
        }
    }

    #[test]
    fn zero_output_heads_are_silent() {
        let q = net(4, 1);
        let mut r = stream(2, &[]);
        let fp = fingerprint(4, &mut r);
        for code in 0..16 {
            assert_eq!(q.joint_q(&fp, &decode(4, code)).unwrap(), 0.0);
        }
        assert_eq!(q.select_comm_action(&fp, 0.0, &mut r).unwrap(), CommAction::zeros(4));
    }

    #[test]
    fn single_channel_joint_is_the_head() {
        let mut q = net(2, 3);
        q.senders = vec![0];
        q.features.truncate(1);
        q.heads.truncate(1);
        q.targets.truncate(1);
        q.senders[0] = 0;
        let mut r = stream(4, &[]);
        let fp = fingerprint(1, &mut r);
        let v = q.channel_values(&fp).unwrap()[0];
        assert_eq!(q.joint_q(&fp, &CommAction::ones(1)).unwrap(), v[1]);
    }

    #[test]
    fn greedy_all_ones_when_active_is_better() {
        let mut q = net(3, 5);
        let k = q.net.num_params();
        for i in 0..3 {
            let mut p = q.heads[i].clone();
            p[k - 1] = 1.0; // output bias of action 1
            q.set_head_params(i, p).unwrap();
        }
        let mut r = stream(6, &[]);
        let fp = fingerprint(3, &mut r);
        assert_eq!(q.select_comm_action(&fp, 0.0, &mut r).unwrap(), CommAction::ones(3));
    }

    #[test]
    fn full_exploration_is_a_fair_coin() {
        let q = randomized(3, 7);
        let mut r = stream(8, &[]);
        let fp = fingerprint(3, &mut r);
        let draws = 10_000;
        let mut ones = [0usize; 3];
        for _ in 0..draws {
            for (c, b) in ones.iter_mut().zip(q.select_comm_action(&fp, 1.0, &mut r).unwrap().bits) {
                *c += b as usize;
            }
        }
        for c in ones {
            assert!((c as f64 - 5000.0).abs() < 150.0, "{ones:?}");
        }
    }

    #[test]
    fn local_argmax_attains_joint_maximum() {
        let mut r = stream(9, &[]);
        for trial in 0..500 {
            let n = 2 + trial % 9;
            let q = randomized(n, trial as u64);
            let fp = fingerprint(n, &mut r);
            let greedy = q.select_comm_action(&fp, 0.0, &mut r).unwrap();
            let best = (0..1usize << n)
                .map(|c| q.joint_q(&fp, &decode(n, c)).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let local: f64 = q.channel_values(&fp).unwrap().iter().map(|v| v[0].max(v[1])).sum();
            assert_eq!(q.joint_q(&fp, &greedy).unwrap(), local);
            assert!((best - local).abs() <= 1e-12 * local.abs().max(1.0), "{best} vs {local}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..10 {
            let q = randomized(3, 20 + seed);
            let mut r = stream(seed, &[1]);
            let batch: Vec<CommTransition> = (0..6).map(|_| transition(3, &mut r)).collect();
            let g = q.decomposed_grad(&batch, 0.9).unwrap();
            let h = 1e-4;
            for i in 0..3 {
                for k in 0..q.net.num_params() {
                    let mut up = q.heads.clone();
                    up[i][k] += h;
                    let mut dn = q.heads.clone();
                    dn[i][k] -= h;
                    let fd = (q.decomposed_loss(&up, &batch, 0.9) - q.decomposed_loss(&dn, &batch, 0.9)) / (2.0 * h);
                    let err = (fd - g[i][k]).abs() / fd.abs().max(g[i][k].abs()).max(1e-6);
                    assert!(err <= 1e-4, "head {i} param {k}: {} vs {fd}", g[i][k]);
                }
            }
        }
    }

    #[test]
    fn shared_residual_reaches_every_channel() {
        let q = randomized(4, 30);
        let mut r = stream(31, &[]);
        let t = transition(4, &mut r);
        let g = q.decomposed_grad(&[t], 0.9).unwrap();
        assert!(g.iter().all(|gi| gi.iter().any(|x| *x != 0.0)));
    }

    /// Two channels whose heads reduce to their output biases.
    #[test]
    fn two_channel_step_by_hand() {
        let mut q = net(2, 40);
        let k = q.net.num_params();
        let bias = |v0: f64, v1: f64| {
            let mut p = vec![0.0; k];
            p[k - 2] = v0;
            p[k - 1] = v1;
            p
        };
        q.set_head_params(0, bias(0.1, 0.5)).unwrap();
        q.set_head_params(1, bias(0.3, -0.2)).unwrap();
        q.targets = vec![bias(1.0, 2.0), bias(0.0, -1.0)];
        let mut r = stream(41, &[]);
        let t = CommTransition {
            state: fingerprint(2, &mut r),
            action: CommAction { bits: vec![true, false] },
            reward: 0.4,
            next_state: fingerprint(2, &mut r),
        };
        // pred = 0.5 + 0.3; target = 0.4 + 0.9 * (2 + 0); residual = -1.4
        q.train_comm_q(&[t], 0.9, 0.1).unwrap();
        let step = 0.1 * 2.0 * -1.4;
        assert!((q.heads[0][k - 1] - (0.5 - step)).abs() < 1e-12);
        assert!((q.heads[1][k - 2] - (0.3 - step)).abs() < 1e-12);
        assert_eq!(q.heads[0][k - 2], 0.1);
        assert_eq!(q.heads[1][k - 1], -0.2);
        assert_eq!(q.targets[0], bias(1.0, 2.0));
    }

    #[test]
    fn fitted_batch_does_not_move() {
        let mut q = randomized(2, 50);
        let mut r = stream(51, &[]);
        let mut t = transition(2, &mut r);
        let resid = q.residual(&q.heads, &t, 0.9);
        t.reward += resid;
        let before = q.heads.clone();
        q.train_comm_q(&[t], 0.9, 0.1).unwrap();
        for (a, b) in q.heads.iter().flatten().zip(before.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn errors_and_blob() {
        let q = randomized(3, 60);
        let mut r = stream(61, &[]);
        let bad = Fingerprint {
            per_arm: PER_ARM,
            values: vec![0.0; 5],
        };
        assert!(matches!(q.joint_q(&bad, &CommAction::zeros(3)), Err(Error::Argument(_))));
        assert!(q.decomposed_grad(&[], 0.9).is_err());
        let mut other = net(3, 60);
        other.load_blob(&q.to_blob()).unwrap();
        assert_eq!(other.heads, q.heads);
        assert_eq!(other.targets, q.targets);
        let fp = fingerprint(3, &mut r);
        assert_eq!(other.channel_values(&fp).unwrap(), q.channel_values(&fp).unwrap());
        assert!(net(4, 1).load_blob(&q.to_blob()).is_err());
    }
}
