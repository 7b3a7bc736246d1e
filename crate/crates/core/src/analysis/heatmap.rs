use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ResultTable;

pub const HEATMAP_FLOOR: f64 = 0.001;
pub const HEATMAP_CEIL: f64 = 1.0;

/// Function x method grid of median CRPS averaged over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    /// Row labels, sorted by name.
    pub problems: Vec<String>,
    /// Column labels, best average first.
    pub methods: Vec<String>,
    /// `raw[i][j]` for problem `i`, method `j`; `None` where the pair was not run.
    pub raw: Vec<Vec<Option<f64>>>,
    /// `raw` clamped to `[floor, ceil]`.
    pub display: Vec<Vec<Option<f64>>>,
    pub floor: f64,
    pub ceil: f64,
}

/// Builds the heatmap from the `CRPS_median` column, falling back to `CRPS`
/// when the table does not carry medians. Columns are ordered by the
/// average of their present raw cells.
pub fn heatmap_matrix(t: &ResultTable, floor: f64, ceil: f64) -> Result<Heatmap> {
    if t.is_empty() {
        return Err(Error::Domain("cannot build a heatmap from an empty table".into()));
    }
    if !(floor > 0.0 && floor < ceil) {
        return Err(Error::Config(format!("heatmap needs 0 < floor < ceil, got [{floor}, {ceil}]")));
    }
    let use_median = t.has_column("CRPS_median");
    if !use_median {
        log::warn!("results carry no CRPS_median column; the heatmap uses mean CRPS");
    }
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in t.rows() {
        let v = if use_median { r.extra("CRPS_median").unwrap_or(f64::NAN) } else { r.crps };
        let e = acc.entry((r.problem().to_string(), r.method.clone())).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let cells: BTreeMap<(String, String), f64> = acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let problems: Vec<String> = cells.keys().map(|(p, _)| p.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut col_avg: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for ((_, m), v) in &cells {
        let e = col_avg.entry(m).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let mut methods: Vec<(String, f64)> = col_avg
        .into_iter()
        .map(|(m, (s, n))| (m.to_string(), s / n as f64))
        .collect();
    methods.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let methods: Vec<String> = methods.into_iter().map(|(m, _)| m).collect();
    let raw: Vec<Vec<Option<f64>>> = problems
        .iter()
        .map(|p| methods.iter().map(|m| cells.get(&(p.clone(), m.clone())).copied()).collect())
        .collect();
    let display = raw
        .iter()
        .map(|row| row.iter().map(|c| c.map(|v| v.clamp(floor, ceil))).collect())
        .collect();
    Ok(Heatmap {
        problems,
        methods,
        raw,
        display,
        floor,
        ceil,
    })
}
