//! Subset-of-data GP on a maximin-coverage subset of the training inputs.

use nalgebra::DMatrix;

use super::gp::{search_from_spec, GpState, SEARCH_PARAMS};
use super::gp_core::{fit_hyper, GpPosterior, HyperSearch, Points};
use super::{count_param, reject_unknown_params, sizes, ConstantPredictor, Emulator, EmulatorError, EmulatorSpec, Predictor, Standardized};
use crate::error::Result;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Default)]
pub struct SodGp {
    pub search: HyperSearch,
    /// Overrides the size rule.
    pub subset: Option<usize>,
}

impl SodGp {
    pub fn from_spec(spec: &EmulatorSpec) -> Result<Self> {
        let mut allowed = SEARCH_PARAMS.to_vec();
        allowed.push("subset");
        reject_unknown_params(spec, &allowed)?;
        Ok(Self {
            search: search_from_spec(spec)?,
            subset: count_param(spec, "subset")?,
        })
    }
}

/// Greedy farthest-point traversal: starts at a seed-chosen point, then
/// repeatedly adds the point farthest from the current subset (lowest index on
/// ties).
pub fn farthest_point_subset(points: &Points, size: usize, seed: u64) -> Vec<usize> {
    let n = points.n();
    let size = size.min(n);
    if size == 0 {
        return Vec::new();
    }
    let mut rng = SplitMix64::new(seed);
    let first = rng.below(n as u64) as usize;
    let mut chosen = vec![first];
    let mut dist = vec![f64::INFINITY; n];
    let mut last = first;
    while chosen.len() < size {
        let lr = points.row(last);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, d) in dist.iter_mut().enumerate() {
            let di: f64 = points.row(i).iter().zip(lr).map(|(a, b)| (a - b) * (a - b)).sum();
            if di < *d {
                *d = di;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        last = best.1;
        chosen.push(last);
    }
    chosen
}

impl Emulator for SodGp {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>, EmulatorError> {
        let scale = Standardized::new(y);
        if scale.is_constant() {
            return Ok(Box::new(ConstantPredictor(scale.mean)));
        }
        let n = y.len();
        let size = self.subset.unwrap_or_else(|| sizes::sod_subset(n)).clamp(1, n);
        let all = Points::from_matrix(x);
        let idx = farthest_point_subset(&all, size, seed);
        let pts = all.subset(&idx);
        let ys: Vec<f64> = idx.iter().map(|&i| scale.values[i]).collect();
        let hyper = fit_hyper(&[(pts.clone(), ys.clone())], x.ncols(), seed.wrapping_add(1), &self.search)?;
        let post = GpPosterior::new(pts, &ys, &hyper)?;
        Ok(Box::new(GpState { post, scale }))
    }
}
