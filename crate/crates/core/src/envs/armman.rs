use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Engagement-style arm: passive engagement decays by `decay`, an active
/// visit lifts it by `uplift`, both with Gaussian jitter, clipped to [0, 1].
/// A stand-in generator; the real beneficiary data is not public.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmmanParams {
    pub decay: f64,
    pub uplift: f64,
    pub sigma: f64,
}

impl ArmmanParams {
    pub fn sample(rng: &mut Stream) -> Self {
        ArmmanParams {
            decay: rng.random_range(0.0..=0.1),
            uplift: rng.random_range(0.02..=0.2),
            sigma: rng.random_range(0.05..=0.1),
        }
    }
}

pub fn armman_step(s: f64, a: usize, p: &ArmmanParams, rng: &mut Stream) -> f64 {
    let drift = if a == 0 { -p.decay } else { p.uplift };
    let z: f64 = StandardNormal.sample(rng);
    (s + drift + p.sigma * z).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn lower_clip() {
        let p = ArmmanParams {
            decay: 0.1,
            uplift: 0.1,
            sigma: 0.3,
        };
        let mut r = stream(0, &[]);
        for _ in 0..1000 {
            assert!(armman_step(0.0, 0, &p, &mut r) >= 0.0);
        }
    }

    #[test]
    fn deterministic_uplift() {
        let p = ArmmanParams {
            decay: 0.05,
            uplift: 0.1,
            sigma: 0.0,
        };
        let mut r = stream(0, &[]);
        assert!((armman_step(0.5, 1, &p, &mut r) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn acting_raises_long_run_engagement() {
        let mut r = stream(5, &[]);
        let p = ArmmanParams::sample(&mut r);
        let long_run = |a: usize, r: &mut Stream| {
            let mut s = 0.5;
            let mut total = 0.0;
            for _ in 0..10_000 {
                s = armman_step(s, a, &p, r);
                total += s;
            }
            total / 10_000.0
        };
        let act = long_run(1, &mut r);
        let idle = long_run(0, &mut r);
        assert!(act > idle, "act {act} idle {idle}");
    }
}
