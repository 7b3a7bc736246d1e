//! Local GP: each test point is predicted by a GP on its nearest training
//! neighbours, with hyperparameters shared across test points.

use nalgebra::DMatrix;

use super::gp::{search_from_spec, SEARCH_PARAMS};
use super::gp_core::{fit_hyper, GpPosterior, Hyper, HyperSearch, Points};
use super::{
    count_param, gaussian_draws, reject_unknown_params, sizes, ConstantPredictor, Emulator, EmulatorError,
    EmulatorSpec, Predictor, Standardized,
};
use crate::error::Result;
use crate::rng::SplitMix64;

/// Size of the random subset the shared hyperparameters are fitted on.
pub const HYPER_SUBSET: usize = 300;

#[derive(Debug, Clone, Default)]
pub struct LocalNnGp {
    pub search: HyperSearch,
    /// Overrides the neighbourhood size rule.
    pub neighbors: Option<usize>,
}

impl LocalNnGp {
    pub fn from_spec(spec: &EmulatorSpec) -> Result<Self> {
        let mut allowed = SEARCH_PARAMS.to_vec();
        allowed.push("neighbors");
        reject_unknown_params(spec, &allowed)?;
        Ok(Self {
            search: search_from_spec(spec)?,
            neighbors: count_param(spec, "neighbors")?,
        })
    }
}

struct LocalState {
    points: Points,
    y: Vec<f64>,
    hyper: Hyper,
    k: usize,
    scale: Standardized,
}

impl LocalState {
    /// Indices of the `k` nearest training points in lengthscale-scaled space,
    /// ties broken by index.
    fn neighbors(&self, t: &[f64], inv_sq: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.points.n())
            .map(|i| {
                let r = self.points.row(i);
                let s: f64 = r.iter().zip(t).zip(inv_sq).map(|((a, b), w)| (a - b) * (a - b) * w).sum();
                (s, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

impl Predictor for LocalState {
    fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        let tests = Points::from_matrix(x);
        let inv_sq = self.hyper.inv_sq_lengthscales();
        let mut means = Vec::with_capacity(tests.n());
        let mut vars = Vec::with_capacity(tests.n());
        for j in 0..tests.n() {
            let t = tests.row(j);
            let idx = self.neighbors(t, &inv_sq);
            let ys: Vec<f64> = idx.iter().map(|&i| self.y[i]).collect();
            let post = GpPosterior::new(self.points.subset(&idx), &ys, &self.hyper)
                .map_err(|e| EmulatorError::pred(e.msg))?;
            let (mu, v) = post.predict(&Points::from_rows(&[t], tests.p()));
            means.push(mu[0]);
            vars.push(v[0]);
        }
        Ok(gaussian_draws(&means, &vars, &self.scale, m, seed))
    }
}

impl Emulator for LocalNnGp {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>, EmulatorError> {
        let scale = Standardized::new(y);
        if scale.is_constant() {
            return Ok(Box::new(ConstantPredictor(scale.mean)));
        }
        let n = y.len();
        let points = Points::from_matrix(x);
        let mut rng = SplitMix64::new(seed);
        let mut idx = rng.permutation(n);
        idx.truncate(HYPER_SUBSET.min(n));
        idx.sort_unstable();
        let sub = points.subset(&idx);
        let ys: Vec<f64> = idx.iter().map(|&i| scale.values[i]).collect();
        let hyper = fit_hyper(&[(sub, ys)], x.ncols(), rng.next_u64(), &self.search)?;
        let k = self.neighbors.unwrap_or_else(|| sizes::local_neighbors(n)).min(n);
        Ok(Box::new(LocalState {
            points,
            y: scale.values.clone(),
            hyper,
            k,
            scale,
        }))
    }
}
