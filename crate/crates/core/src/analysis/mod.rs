//! Analysis products computed from result tables: cumulative rank curves,
//! CRPS heatmaps, accuracy/runtime Pareto frontiers and rank-based
//! performance clustering, plus CSV and SVG rendering.

mod cluster;
mod heatmap;
mod pareto;
mod rank;
mod render;
mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ResultTable;
use crate::metrics::ScoreConfig;

pub use cluster::{
    classical_mds, cluster_performance, cluster_performance_with, dbscan, spearman_distance, ClusterAxis,
    ClusterConfig, Clustering,
};
pub use heatmap::{heatmap_matrix, Heatmap, HEATMAP_CEIL, HEATMAP_FLOOR};
pub use pareto::{dominated_flags, pareto_frontier, ParetoPoint};
pub use rank::{competition_ranks, cumulative_ranks, RankCurve};
pub use render::render;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Rank,
    Heatmap,
    Pareto,
    Cluster,
}

impl Analysis {
    pub const ALL: [Analysis; 4] = [Analysis::Rank, Analysis::Heatmap, Analysis::Pareto, Analysis::Cluster];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Rank => "rank",
            Analysis::Heatmap => "heatmap",
            Analysis::Pareto => "pareto",
            Analysis::Cluster => "cluster",
        }
    }

    /// Basename of the emitted `.csv` and `.svg` files.
    pub fn basename(self) -> &'static str {
        match self {
            Analysis::Cluster => "clusters",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.as_str() == s || a.basename() == s)
            .ok_or_else(|| Error::Config(format!("unknown analysis `{s}` (expected rank, heatmap, pareto or cluster)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub score: ScoreConfig,
    pub heatmap_floor: f64,
    pub heatmap_ceil: f64,
    pub cluster: ClusterConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            score: ScoreConfig::default(),
            heatmap_floor: HEATMAP_FLOOR,
            heatmap_ceil: HEATMAP_CEIL,
            cluster: ClusterConfig::default(),
        }
    }
}

/// Rows grouped by scenario (canonical string order), each mapping method to
/// the mean of `value` over that method's rows in the scenario.
pub(crate) fn by_scenario(
    t: &ResultTable,
    value: impl Fn(&crate::harness::ResultRow) -> f64,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in t.rows() {
        let e = acc
            .entry(r.scenario_key())
            .or_default()
            .entry(r.method.clone())
            .or_insert((0.0, 0));
        e.0 += value(r);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(s, m)| (s, m.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect()))
        .collect()
}
