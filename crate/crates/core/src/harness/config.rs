//! Run configuration and instance construction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comm::{TrainParams, PROBE_STATES};
use crate::commq::CommQParams;
use crate::envs::{chain_build, ArmmanParams, ChainFamilyConfig, EnvKind, SisParams, SyntheticArmParams};
use crate::error::{Error, Result};
use crate::rmab::{make_features, ArmMdp, Dynamics, NoiseConfig, NoiseDist, NoiseModel, RmabInstance};
use crate::rng::{self, tag};

use super::Strategy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    Gaussian,
    Uniform,
    Mixture,
}

/// Flat noise block of a run config.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Share of noisy arms; `ceil(fraction * N)` arms are picked.
    pub fraction: f64,
    pub dist: NoiseShape,
    /// Gaussian standard deviation (also the Gaussian half of a mixture).
    pub sigma: f64,
    /// Uniform offsets lie in `[-width, width]`.
    pub width: f64,
    /// Share of each noisy arm's states (or bins) carrying an offset.
    pub state_fraction: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            fraction: 0.8,
            dist: NoiseShape::Gaussian,
            sigma: 1.0,
            width: 0.5,
            state_fraction: 1.0,
        }
    }
}

impl NoiseSpec {
    pub fn to_config(&self) -> NoiseConfig {
        let dist = match self.dist {
            NoiseShape::Gaussian => NoiseDist::Gaussian { sigma: self.sigma },
            NoiseShape::Uniform => NoiseDist::Uniform {
                low: -self.width,
                high: self.width,
            },
            NoiseShape::Mixture => NoiseDist::Mixture {
                sigma: self.sigma,
                width: self.width,
            },
        };
        NoiseConfig {
            fraction: self.fraction,
            dist,
            state_fraction: self.state_fraction,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QReprKind {
    Mlp,
    Tabular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvKind,
    pub n_arms: usize,
    pub budget: u32,
    pub horizon: usize,
    pub discount: f64,
    pub lambda: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub strategy: Strategy,
    pub epochs: usize,
    pub comm_start_epoch: usize,
    /// Epochs per communication round.
    pub comm_interval: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Episodes per branch when scoring a communication action.
    pub comm_eval_episodes: usize,
    pub q_repr: QReprKind,
    pub probe_states: usize,
    pub train: TrainParams,
    pub comm_q: CommQParams,
    pub sis_population: u32,
    pub chain: Option<ChainFamilyConfig>,
    /// Write elapsed milliseconds into `wall_ms`; off keeps CSVs
    /// reproducible byte for byte.
    pub record_wall_time: bool,
    pub trace_planner: bool,
    pub checkpoints: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvKind::Synthetic,
            n_arms: 9,
            budget: 3,
            horizon: 20,
            discount: 0.9,
            lambda: 0.1,
            noise: NoiseSpec::default(),
            seed: 0,
            strategy: Strategy::LearnedComm,
            epochs: 600,
            comm_start_epoch: 200,
            comm_interval: 10,
            eval_interval: 10,
            eval_episodes: 16,
            comm_eval_episodes: 16,
            q_repr: QReprKind::Mlp,
            probe_states: PROBE_STATES,
            train: TrainParams::default(),
            comm_q: CommQParams::default(),
            sis_population: 20,
            chain: None,
            record_wall_time: false,
            trace_planner: false,
            checkpoints: true,
        }
    }
}

impl RunConfig {
    /// Parse JSON; syntax and unknown-key errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::config(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.n_arms < 2 {
            return bad(format!("n_arms = {} (need at least 2)", self.n_arms));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount = {} outside [0, 1)", self.discount));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be finite and >= 0", self.lambda));
        }
        if self.horizon == 0 || self.epochs == 0 || self.eval_episodes == 0 || self.comm_eval_episodes == 0 {
            return bad("horizon, epochs, eval_episodes and comm_eval_episodes must be positive".into());
        }
        if self.comm_interval == 0 || self.eval_interval == 0 {
            return bad("comm_interval and eval_interval must be positive".into());
        }
        if self.eval_interval % self.comm_interval != 0 || self.comm_start_epoch % self.comm_interval != 0 {
            return bad(format!(
                "eval_interval ({}) and comm_start_epoch ({}) must be multiples of comm_interval ({})",
                self.eval_interval, self.comm_start_epoch, self.comm_interval
            ));
        }
        if self.probe_states == 0 {
            return bad("probe_states must be positive".into());
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.fraction) || !(0.0..=1.0).contains(&n.state_fraction) {
            return bad("noise.fraction and noise.state_fraction must lie in [0, 1]".into());
        }
        if !(n.sigma >= 0.0 && n.width >= 0.0 && n.sigma.is_finite() && n.width.is_finite()) {
            return bad("noise.sigma and noise.width must be finite and >= 0".into());
        }
        let t = &self.train;
        if t.batch_size == 0 || t.buffer_capacity == 0 || !(t.lr >= 0.0 && t.lr.is_finite()) {
            return bad("train.batch_size, train.buffer_capacity must be positive and train.lr finite".into());
        }
        if !(0.0..=1.0).contains(&t.epsilon_start) || !(0.0..=1.0).contains(&t.epsilon_decay) {
            return bad("train.epsilon_start and train.epsilon_decay must lie in [0, 1]".into());
        }
        let c = &self.comm_q;
        if c.batch_size == 0 || c.buffer_capacity == 0 || !(c.lr >= 0.0 && c.lr.is_finite()) {
            return bad("comm_q.batch_size, comm_q.buffer_capacity must be positive and comm_q.lr finite".into());
        }
        if !(0.0..=1.0).contains(&c.epsilon_start) || !(0.0..=1.0).contains(&c.epsilon_decay) {
            return bad("comm_q.epsilon_start and comm_q.epsilon_decay must lie in [0, 1]".into());
        }
        if self.env == EnvKind::Chain {
            match &self.chain {
                Some(ch) => ch.validate()?,
                None => return bad("env = chain needs a \"chain\" block".into()),
            }
        }
        if self.env == EnvKind::Sis && self.sis_population == 0 {
            return bad("sis_population must be positive".into());
        }
        Ok(())
    }
}

/// Arms, features and noise for `seed`. The no-noise strategy gets the
/// same arms with every offset removed.
pub fn build_instance(cfg: &RunConfig, seed: u64, strategy: Strategy) -> Result<RmabInstance> {
    let mut arms = Vec::with_capacity(cfg.n_arms);
    for i in 0..cfg.n_arms {
        let mut r = rng::stream(seed, &[tag::ARM_PARAMS, i as u64]);
        let arm = match cfg.env {
            EnvKind::Synthetic => ArmMdp::new(Dynamics::Synthetic(SyntheticArmParams::sample(&mut r)), vec![0, 1], cfg.discount)?,
            EnvKind::Armman => ArmMdp::new(Dynamics::Armman(ArmmanParams::sample(&mut r)), vec![0, 1], cfg.discount)?,
            EnvKind::Sis => ArmMdp::new(Dynamics::Sis(SisParams::sample(cfg.sis_population, &mut r)), vec![0, 1, 2], cfg.discount)?,
            EnvKind::Chain => {
                let mut ch = cfg.chain.ok_or_else(|| Error::config("env = chain needs a \"chain\" block"))?;
                ch.discount = cfg.discount;
                chain_build(&ch)?
            }
        };
        arms.push(arm);
    }
    let params: Vec<Vec<f64>> = arms.iter().map(ArmMdp::transition_params).collect();
    let features = make_features(&params, rng::derive(seed, &[tag::FEATURES]))?;
    for (arm, z) in arms.iter_mut().zip(features) {
        arm.features = z;
    }
    let slots: Vec<usize> = arms.iter().map(|a| a.state_space().slots()).collect();
    let noise = if strategy == Strategy::NoNoise {
        NoiseModel::none(&slots)
    } else {
        NoiseModel::sample(&cfg.noise.to_config(), &slots, seed)?
    };
    RmabInstance::new(arms, cfg.budget, cfg.horizon, noise, cfg.lambda)
}
