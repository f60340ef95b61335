//! Arm-MDP families.

mod armman;
mod chain;
mod sis;
mod synthetic;
mod tabular;

pub use armman::{armman_step, ArmmanParams};
pub use chain::{
    chain_build, chain_noise, chain_not_visited_prob, chain_unvisited_frequency, ChainFamilyConfig,
    ChainProtocol, ChainVariant, NotVisited, NotVisitedVariant, UnvisitedEstimate,
};
pub use sis::{sis_step, SisParams};
pub use synthetic::{synthetic_step, SyntheticArmParams};
pub use tabular::TabularMdp;

use serde::{Deserialize, Serialize};

/// Environment selector used in run configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Synthetic,
    Chain,
    Sis,
    Armman,
}

impl std::str::FromStr for EnvKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "synthetic" => Ok(EnvKind::Synthetic),
            "chain" => Ok(EnvKind::Chain),
            "sis" => Ok(EnvKind::Sis),
            "armman" => Ok(EnvKind::Armman),
            other => Err(crate::Error::config(format!("unknown env '{other}'"))),
        }
    }
}
