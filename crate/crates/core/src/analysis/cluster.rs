use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::by_scenario;
use super::rank::competition_ranks;
use crate::error::{Error, Result};
use crate::harness::ResultTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterAxis {
    /// One item per method, described by its rank in every scenario.
    #[default]
    Methods,
    /// One item per function or dataset, described by the rank of every method.
    Problems,
}

impl fmt::Display for ClusterAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterAxis::Methods => "methods",
            ClusterAxis::Problems => "problems",
        })
    }
}

impl FromStr for ClusterAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "methods" => Ok(ClusterAxis::Methods),
            "problems" => Ok(ClusterAxis::Problems),
            other => Err(Error::Config(format!("cluster axis must be methods or problems, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub axis: ClusterAxis,
    /// Neighborhood radius; `None` uses the median distance to the
    /// `neighbor_rank`-th nearest neighbor.
    pub eps: Option<f64>,
    pub neighbor_rank: usize,
    /// Minimum neighborhood size of a core point, the point itself included.
    pub min_pts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            axis: ClusterAxis::Methods,
            eps: None,
            neighbor_rank: 4,
            min_pts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub axis: ClusterAxis,
    pub items: Vec<String>,
    /// 2-D classical MDS embedding, one row per item.
    pub coords: Vec<[f64; 2]>,
    /// DBSCAN cluster ids; `-1` marks noise.
    pub labels: Vec<i32>,
    pub eps: f64,
    /// `1 - Spearman` distances the embedding was built from.
    pub distances: Vec<Vec<f64>>,
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `1 - rho` with `rho` the Spearman correlation over entries present in both
/// vectors. Fewer than two shared entries give 1. If either side is constant
/// over the shared entries the correlation is undefined; identical vectors
/// are then at distance 0 and others at 1.
pub fn spearman_distance(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(u, v)| Some(((*u)?, (*v)?)))
        .unzip();
    if x.len() < 2 {
        return 1.0;
    }
    let (rx, ry) = (average_ranks(&x), average_ranks(&y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (u, v) in rx.iter().zip(&ry) {
        sxy += (u - mx) * (v - my);
        sxx += (u - mx).powi(2);
        syy += (v - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return if x == y { 0.0 } else { 1.0 };
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    1.0 - rho
}

/// Classical (Torgerson) scaling: double-centre the squared distances and
/// keep the leading `dims` eigenpairs. Negative eigenvalues are treated as
/// zero. Each axis is signed so its largest-magnitude entry is positive.
pub fn classical_mds(d: &DMatrix<f64>, dims: usize) -> DMatrix<f64> {
    let n = d.nrows();
    let sq = d.map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = DMatrix::zeros(n, dims);
    for (k, &e) in order.iter().take(dims).enumerate() {
        let scale = eig.eigenvalues[e].max(0.0).sqrt();
        let v = eig.eigenvectors.column(e);
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[(i, k)] = sign * v[i] * scale;
        }
    }
    out
}

/// DBSCAN over a distance matrix. Neighborhoods use `d <= eps` and include the
/// point itself. Clusters are numbered from 0 in order of their first core
/// point; border points join the first cluster that reaches them.
pub fn dbscan(d: &DMatrix<f64>, eps: f64, min_pts: usize) -> Vec<i32> {
    let n = d.nrows();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| d[(i, j)] <= eps).collect()).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![-1i32; n];
    let mut next = 0;
    for start in 0..n {
        if labels[start] != -1 || !core[start] {
            continue;
        }
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q] == -1 {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

fn kth_neighbor_median(d: &DMatrix<f64>, k: usize) -> f64 {
    let n = d.nrows();
    let mut kth: Vec<f64> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).collect();
            row.sort_by(f64::total_cmp);
            row[k.min(row.len()) - 1]
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    let m = kth.len();
    if m % 2 == 1 {
        kth[m / 2]
    } else {
        0.5 * (kth[m / 2 - 1] + kth[m / 2])
    }
}

/// Rank vectors of the items on `axis`, aligned over a shared index.
fn rank_vectors(t: &ResultTable, axis: ClusterAxis) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    match axis {
        ClusterAxis::Methods => {
            let groups = by_scenario(t, |r| r.crps);
            let methods: Vec<String> = groups
                .values()
                .flat_map(|g| g.keys().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut vectors = vec![vec![None; groups.len()]; methods.len()];
            for (s, g) in groups.values().enumerate() {
                let scores: Vec<f64> = g.values().copied().collect();
                for ((m, _), r) in g.iter().zip(competition_ranks(&scores)) {
                    let i = methods.binary_search(m).expect("collected above");
                    vectors[i][s] = Some(r as f64);
                }
            }
            (methods, vectors)
        }
        ClusterAxis::Problems => {
            let mut acc: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
            for r in t.rows() {
                let e = acc
                    .entry(r.problem().to_string())
                    .or_default()
                    .entry(r.method.clone())
                    .or_insert((0.0, 0));
                e.0 += r.crps;
                e.1 += 1;
            }
            let methods: Vec<String> = acc
                .values()
                .flat_map(|g| g.keys().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let problems: Vec<String> = acc.keys().cloned().collect();
            let vectors = acc
                .values()
                .map(|g| {
                    let scores: Vec<f64> = g.values().map(|(s, n)| s / *n as f64).collect();
                    let ranks = competition_ranks(&scores);
                    let mut v = vec![None; methods.len()];
                    for ((m, _), r) in g.iter().zip(ranks) {
                        v[methods.binary_search(m).expect("collected above")] = Some(r as f64);
                    }
                    v
                })
                .collect();
            (problems, vectors)
        }
    }
}

pub fn cluster_performance(t: &ResultTable, axis: ClusterAxis) -> Result<Clustering> {
    cluster_performance_with(
        t,
        &ClusterConfig {
            axis,
            ..ClusterConfig::default()
        },
    )
}

/// Spearman distances between rank vectors, a 2-D classical MDS embedding
/// and DBSCAN labels on the embedding.
pub fn cluster_performance_with(t: &ResultTable, cfg: &ClusterConfig) -> Result<Clustering> {
    if cfg.min_pts == 0 || cfg.neighbor_rank == 0 {
        return Err(Error::Config("min_pts and neighbor_rank must be at least 1".into()));
    }
    let (items, vectors) = rank_vectors(t, cfg.axis);
    if items.len() < 3 {
        return Err(Error::Domain(format!(
            "clustering needs at least 3 {}, got {}",
            cfg.axis,
            items.len()
        )));
    }
    let n = items.len();
    let dist = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { spearman_distance(&vectors[i], &vectors[j]) });
    let emb = classical_mds(&dist, 2);
    let coords: Vec<[f64; 2]> = (0..n).map(|i| [emb[(i, 0)], emb[(i, 1)]]).collect();
    let edist = DMatrix::from_fn(n, n, |i, j| {
        ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt()
    });
    let eps = match cfg.eps {
        Some(e) if e >= 0.0 => e,
        Some(e) => return Err(Error::Config(format!("eps must be >= 0, got {e}"))),
        None => kth_neighbor_median(&edist, cfg.neighbor_rank),
    };
    let labels = if dist.iter().all(|v| *v == 0.0) {
        vec![0; n]
    } else {
        dbscan(&edist, eps, cfg.min_pts)
    };
    Ok(Clustering {
        axis: cfg.axis,
        items,
        coords,
        labels,
        eps,
        distances: (0..n).map(|i| dist.row(i).iter().copied().collect()).collect(),
    })
}
