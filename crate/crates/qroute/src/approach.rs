//! Named routing approaches: the learned router and the baselines.

use std::fmt;
use std::str::FromStr;

use qroute_core::baselines::BaselineKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Learned,
    RandomWalk,
    GreedyMaxFidelity,
    HopShortestPath,
    GlobalStale,
}

impl Approach {
    pub fn all() -> Vec<Approach> {
        let mut v = vec![Approach::Learned];
        v.extend(BaselineKind::ALL.iter().map(|&k| Approach::from(k)));
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Approach::Learned => "learned",
            Approach::RandomWalk => "random_walk",
            Approach::GreedyMaxFidelity => "greedy_max_fidelity",
            Approach::HopShortestPath => "hop_shortest_path",
            Approach::GlobalStale => "global_stale",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Approach::Learned => None,
            Approach::RandomWalk => Some(BaselineKind::RandomWalk),
            Approach::GreedyMaxFidelity => Some(BaselineKind::GreedyMaxFidelity),
            Approach::HopShortestPath => Some(BaselineKind::HopShortestPath),
            Approach::GlobalStale => Some(BaselineKind::GlobalStale),
        }
    }
}

impl From<BaselineKind> for Approach {
    fn from(k: BaselineKind) -> Self {
        match k {
            BaselineKind::RandomWalk => Approach::RandomWalk,
            BaselineKind::GreedyMaxFidelity => Approach::GreedyMaxFidelity,
            BaselineKind::HopShortestPath => Approach::HopShortestPath,
            BaselineKind::GlobalStale => Approach::GlobalStale,
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Approach::all()
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown approach `{s}` (expected one of learned, random_walk, greedy_max_fidelity, hop_shortest_path, global_stale)"))
    }
}
