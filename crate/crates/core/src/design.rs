//! Space-filling and random designs on the unit hypercube.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DesignType {
    #[serde(rename = "LHS")]
    Lhs,
    #[serde(rename = "maximin_LHS")]
    MaximinLhs,
    #[serde(rename = "uniform")]
    Uniform,
}

impl DesignType {
    pub const ALL: [DesignType; 3] = [DesignType::Lhs, DesignType::MaximinLhs, DesignType::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignType::Lhs => "LHS",
            DesignType::MaximinLhs => "maximin_LHS",
            DesignType::Uniform => "uniform",
        }
    }

    /// Draws a design of this type with default settings.
    pub fn generate(self, n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
        match self {
            DesignType::Lhs => lhs(n, p, seed),
            DesignType::MaximinLhs => maximin_lhs(n, p, seed, default_maximin_iters(n)),
            DesignType::Uniform => uniform(n, p, seed),
        }
    }
}

impl fmt::Display for DesignType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LHS" | "lhs" => Ok(DesignType::Lhs),
            "maximin_LHS" | "maximin_lhs" => Ok(DesignType::MaximinLhs),
            "uniform" => Ok(DesignType::Uniform),
            other => Err(Error::Config(format!("unknown design_type `{other}`"))),
        }
    }
}

/// An `n x p` design on `[0, 1]^p` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub points: DMatrix<f64>,
    pub design_type: DesignType,
    pub seed: u64,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn p(&self) -> usize {
        self.points.ncols()
    }

    /// Writes the design as CSV with header `x1..xp`, one row per point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.p()).map(|j| format!("x{j}")))?;
        for i in 0..self.n() {
            w.write_record(self.points.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<design csv>", e))?;
        Ok(())
    }
}

pub fn default_maximin_iters(n: usize) -> usize {
    50 * n
}

fn check_dims(n: usize, p: usize) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::Domain(format!("design needs n >= 1 and p >= 1, got n={n}, p={p}")));
    }
    Ok(())
}

/// Latin hypercube: column `j` places one point in each stratum `[k/n, (k+1)/n)`,
/// jittered uniformly inside the stratum, with the stratum order a random
/// permutation.
pub fn lhs(n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    check_dims(n, p)?;
    let mut rng = SplitMix64::new(seed);
    let mut points = DMatrix::zeros(n, p);
    let width = 1.0 / n as f64;
    for j in 0..p {
        let perm = rng.permutation(n);
        for (i, &stratum) in perm.iter().enumerate() {
            let upper = (stratum + 1) as f64 * width;
            let v = (stratum as f64 + rng.uniform()) * width;
            // rounding can land exactly on the next stratum's edge
            points[(i, j)] = if v >= upper { upper.next_down() } else { v };
        }
    }
    Ok(DesignMatrix {
        points,
        design_type: DesignType::Lhs,
        seed,
    })
}

/// Latin hypercube improved by random within-column swaps.
///
/// Starts from `lhs(n, p, seed)`, then for `iters` rounds picks a column and two
/// rows and swaps their entries, keeping the swap iff the minimum pairwise
/// distance does not decrease. The random stream continues from the one that
/// built the initial design.
pub fn maximin_lhs(n: usize, p: usize, seed: u64, iters: usize) -> Result<DesignMatrix> {
    check_dims(n, p)?;
    let base = lhs(n, p, seed)?;
    let mut points = base.points;
    if n >= 3 && iters > 0 {
        let mut rng = SplitMix64::new(seed ^ 0x6d61_7869_6d69_6e00); // "maximin\0"
        let mut state = MinDistState::new(&points);
        for _ in 0..iters {
            let col = rng.below(p as u64) as usize;
            let a = rng.below(n as u64) as usize;
            let mut b = rng.below(n as u64 - 1) as usize;
            if b >= a {
                b += 1;
            }
            state.try_swap(&mut points, col, a, b);
        }
    }
    Ok(DesignMatrix {
        points,
        design_type: DesignType::MaximinLhs,
        seed,
    })
}

/// I.i.d. uniform points.
pub fn uniform(n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    check_dims(n, p)?;
    let mut rng = SplitMix64::new(seed);
    let mut points = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            points[(i, j)] = rng.uniform();
        }
    }
    Ok(DesignMatrix {
        points,
        design_type: DesignType::Uniform,
        seed,
    })
}

/// Smallest Euclidean distance between any two rows. `inf` for fewer than two rows.
pub fn min_pairwise_distance(points: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for k in (i + 1)..n {
            best = best.min(sq_dist(points, i, k));
        }
    }
    best.sqrt()
}

fn sq_dist(points: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    (0..points.ncols())
        .map(|j| (points[(a, j)] - points[(b, j)]).powi(2))
        .sum()
}

/// Pairwise squared distances plus each row's nearest-neighbour distance, so a
/// swap can be judged in `O(n p)`.
struct MinDistState {
    d2: Vec<f64>,
    row_min: Vec<f64>,
    n: usize,
}

impl MinDistState {
    fn new(points: &DMatrix<f64>) -> Self {
        let n = points.nrows();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let d = sq_dist(points, i, k);
                d2[i * n + k] = d;
                d2[k * n + i] = d;
            }
        }
        let mut s = Self {
            d2,
            row_min: vec![f64::INFINITY; n],
            n,
        };
        for i in 0..n {
            s.recompute_row_min(i);
        }
        s
    }

    fn global_min(&self) -> f64 {
        self.row_min.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn recompute_row_min(&mut self, i: usize) {
        let n = self.n;
        self.row_min[i] = (0..n)
            .filter(|&k| k != i)
            .map(|k| self.d2[i * n + k])
            .fold(f64::INFINITY, f64::min);
    }

    fn try_swap(&mut self, points: &mut DMatrix<f64>, col: usize, a: usize, b: usize) -> bool {
        let n = self.n;
        let current = self.global_min();
        let (va, vb) = (points[(a, col)], points[(b, col)]);
        let delta = |other: f64, old: f64, new: f64| (new - other).powi(2) - (old - other).powi(2);

        // Distances not touching a or b are unchanged and already >= current,
        // so the swap is acceptable iff every new distance touching a or b is.
        let mut new_a = vec![0.0; n];
        let mut new_b = vec![0.0; n];
        for k in 0..n {
            if k == a || k == b {
                continue;
            }
            let xk = points[(k, col)];
            new_a[k] = self.d2[a * n + k] + delta(xk, va, vb);
            new_b[k] = self.d2[b * n + k] + delta(xk, vb, va);
            if new_a[k] < current || new_b[k] < current {
                return false;
            }
        }
        // The a-b distance is symmetric in the swapped coordinate.
        points[(a, col)] = vb;
        points[(b, col)] = va;
        for k in 0..n {
            if k == a || k == b {
                continue;
            }
            let (old_a, old_b) = (self.d2[a * n + k], self.d2[b * n + k]);
            // Recompute exactly from the points to avoid drift.
            let da = sq_dist(points, a, k);
            let db = sq_dist(points, b, k);
            debug_assert!((da - new_a[k]).abs() <= 1e-9 * (1.0 + da));
            debug_assert!((db - new_b[k]).abs() <= 1e-9 * (1.0 + db));
            self.d2[a * n + k] = da;
            self.d2[k * n + a] = da;
            self.d2[b * n + k] = db;
            self.d2[k * n + b] = db;
            let lost_min = (old_a == self.row_min[k] && da > old_a) || (old_b == self.row_min[k] && db > old_b);
            if lost_min {
                self.recompute_row_min(k);
            } else {
                self.row_min[k] = self.row_min[k].min(da).min(db);
            }
        }
        self.recompute_row_min(a);
        self.recompute_row_min(b);
        true
    }
}
