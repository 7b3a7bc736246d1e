use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::by_scenario;
use crate::error::{Error, Result};
use crate::harness::ResultTable;

/// Share of scenarios in which a method places within the top `r`, for
/// `r = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCurve {
    pub method: String,
    /// `proportions[r - 1]`.
    pub proportions: Vec<f64>,
    pub auc: f64,
}

/// Competition ("min") ranks: ties share the smallest rank and the next
/// distinct value skips ahead. `1` is best (smallest score).
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|s| 1 + scores.iter().filter(|o| o.total_cmp(s).is_lt()).count())
        .collect()
}

/// Rank curves over all scenarios, sorted by area under the curve
/// (descending, then by name).
pub fn cumulative_ranks(t: &ResultTable) -> Result<Vec<RankCurve>> {
    if t.is_empty() {
        return Err(Error::Domain("cannot rank an empty table".into()));
    }
    let groups = by_scenario(t, |r| r.crps);
    let methods: BTreeSet<&String> = groups.values().flat_map(|g| g.keys()).collect();
    let k = methods.len();
    let mut counts: BTreeMap<&String, Vec<usize>> = methods.iter().map(|m| (*m, vec![0; k])).collect();
    for (scenario, g) in &groups {
        if g.len() < 2 {
            return Err(Error::Domain(format!(
                "scenario `{scenario}` has a single method; ranking needs at least two"
            )));
        }
        let scores: Vec<f64> = g.values().copied().collect();
        for ((m, _), rank) in g.iter().zip(competition_ranks(&scores)) {
            counts.get_mut(m).expect("method collected above")[rank - 1] += 1;
        }
    }
    let n = groups.len() as f64;
    let mut curves: Vec<RankCurve> = counts
        .into_iter()
        .map(|(m, c)| {
            let proportions: Vec<f64> = c
                .iter()
                .scan(0usize, |acc, v| {
                    *acc += v;
                    Some(*acc as f64 / n)
                })
                .collect();
            let auc = proportions.iter().sum::<f64>() / k as f64;
            RankCurve {
                method: m.clone(),
                proportions,
                auc,
            }
        })
        .collect();
    curves.sort_by(|a, b| b.auc.total_cmp(&a.auc).then_with(|| a.method.cmp(&b.method)));
    Ok(curves)
}
