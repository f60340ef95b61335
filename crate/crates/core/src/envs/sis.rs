use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Chain-binomial SIS subpopulation. The state is the uninfected count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SisParams {
    pub population: u32,
    pub infection_rate: f64,
    pub recovery_rate: f64,
    /// Transmission multiplier per action: none, weekly testing, masks.
    pub multipliers: Vec<f64>,
}

pub const DEFAULT_SIS_MULTIPLIERS: [f64; 3] = [1.0, 0.6, 0.75];

impl SisParams {
    pub fn sample(population: u32, rng: &mut Stream) -> Self {
        SisParams {
            population,
            infection_rate: rng.random_range(0.2..=0.8),
            recovery_rate: rng.random_range(0.05..=0.3),
            multipliers: DEFAULT_SIS_MULTIPLIERS.to_vec(),
        }
    }

    pub fn reward(&self, uninfected: u32) -> f64 {
        uninfected as f64 / self.population as f64
    }
}

fn binomial(n: u32, p: f64, rng: &mut Stream) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n as u64, p.min(1.0)).unwrap().sample(rng) as u32
}

pub fn sis_step(s: u32, a: usize, p: &SisParams, rng: &mut Stream) -> u32 {
    let pop = p.population;
    let infected = pop - s;
    let pressure = p.infection_rate * infected as f64 / pop as f64 * p.multipliers[a];
    let infections = binomial(s, pressure, rng);
    let recoveries = binomial(infected, p.recovery_rate, rng);
    (s as i64 - infections as i64 + recoveries as i64).clamp(0, pop as i64) as u32
}
