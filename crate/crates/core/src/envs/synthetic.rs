use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Clipped Gaussian drift: `s' = clip(s + N(mu[a], sigma[a]), 0, 1)` with
/// `mu[1] = -mu[0]` and `sigma[1] = sigma[0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticArmParams {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
}

impl SyntheticArmParams {
    pub fn new(mu_active: f64, sigma: f64) -> Self {
        SyntheticArmParams {
            mu: [-mu_active, mu_active],
            sigma: [sigma, sigma],
        }
    }

    /// `mu[1] ~ U[-0.2, 0.2]`, `sigma ~ U[0.1, 0.2]`.
    pub fn sample(rng: &mut Stream) -> Self {
        let mu = rng.random_range(-0.2..=0.2);
        let sigma = rng.random_range(0.1..=0.2);
        Self::new(mu, sigma)
    }
}

pub fn synthetic_step(s: f64, a: usize, p: &SyntheticArmParams, rng: &mut Stream) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (s + p.mu[a] + p.sigma[a] * z).clamp(0.0, 1.0)
}
