use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::by_scenario;
use crate::error::{Error, Result};
use crate::harness::ResultTable;
use crate::metrics::{relative_scores, ScoreConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub method: String,
    pub avg_rel_crps: f64,
    pub avg_rel_runtime: f64,
    pub dominated: bool,
}

/// For each point, whether some other point is no worse in both coordinates
/// and strictly better in one. Sweeps the points in coordinate order.
pub fn dominated_flags(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let mut out = vec![false; points.len()];
    let mut best_before = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let x = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].0 == x {
            j += 1;
        }
        let group_min = points[order[i]].1;
        for &idx in &order[i..j] {
            let y = points[idx].1;
            out[idx] = best_before <= y || group_min < y;
        }
        best_before = best_before.min(group_min);
        i = j;
    }
    out
}

/// Average relative CRPS (capped) and relative total runtime (uncapped) per
/// method, with dominance marked. Sorted by relative CRPS, then name.
pub fn pareto_frontier(t: &ResultTable, cfg: &ScoreConfig) -> Result<Vec<ParetoPoint>> {
    if t.is_empty() {
        return Err(Error::Domain("cannot build a Pareto frontier from an empty table".into()));
    }
    cfg.validate()?;
    let crps = by_scenario(t, |r| r.crps);
    let time = by_scenario(t, |r| r.t_tot);
    let mut acc: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for (scenario, scores) in &crps {
        let rel = relative_scores(scores, cfg)?;
        let times = &time[scenario];
        let fastest = times.values().copied().fold(f64::INFINITY, f64::min);
        for (m, r) in rel {
            let rt = (times[&m] + cfg.epsilon) / (fastest + cfg.epsilon);
            let e = acc.entry(m).or_insert((0.0, 0.0, 0));
            e.0 += r;
            e.1 += rt;
            e.2 += 1;
        }
    }
    let mut points: Vec<ParetoPoint> = acc
        .into_iter()
        .map(|(method, (c, r, n))| ParetoPoint {
            method,
            avg_rel_crps: c / n as f64,
            avg_rel_runtime: r / n as f64,
            dominated: false,
        })
        .collect();
    let flags = dominated_flags(&points.iter().map(|p| (p.avg_rel_crps, p.avg_rel_runtime)).collect::<Vec<_>>());
    for (p, d) in points.iter_mut().zip(flags) {
        p.dominated = d;
    }
    points.sort_by(|a, b| a.avg_rel_crps.total_cmp(&b.avg_rel_crps).then_with(|| a.method.cmp(&b.method)));
    Ok(points)
}
