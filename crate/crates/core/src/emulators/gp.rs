//! Full Gaussian process with hyperparameters maximising the marginal
//! likelihood.

use nalgebra::DMatrix;

use super::gp_core::{fit_hyper, GpPosterior, HyperSearch, Points};
use super::{
    count_param, gaussian_draws, reject_unknown_params, ConstantPredictor, Emulator, EmulatorError, EmulatorSpec,
    Predictor, Standardized,
};
use crate::error::Result;

pub(super) const SEARCH_PARAMS: [&str; 3] = ["multistarts", "start_iters", "max_iters"];

pub(super) fn search_from_spec(spec: &EmulatorSpec) -> Result<HyperSearch> {
    let mut s = HyperSearch::default();
    if let Some(v) = count_param(spec, "multistarts")? {
        s.multistarts = v;
    }
    if let Some(v) = count_param(spec, "start_iters")? {
        s.start_iters = v;
    }
    if let Some(v) = count_param(spec, "max_iters")? {
        s.max_iters = v;
    }
    Ok(s)
}

#[derive(Debug, Clone, Default)]
pub struct Gp {
    pub search: HyperSearch,
}

impl Gp {
    pub fn from_spec(spec: &EmulatorSpec) -> Result<Self> {
        reject_unknown_params(spec, &SEARCH_PARAMS)?;
        Ok(Self {
            search: search_from_spec(spec)?,
        })
    }
}

/// A conditioned GP on the standardised response scale.
pub(super) struct GpState {
    pub post: GpPosterior,
    pub scale: Standardized,
}

impl Predictor for GpState {
    fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        let (means, vars) = self.post.predict(&Points::from_matrix(x));
        Ok(gaussian_draws(&means, &vars, &self.scale, m, seed))
    }
}

impl Emulator for Gp {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>, EmulatorError> {
        let scale = Standardized::new(y);
        if scale.is_constant() {
            return Ok(Box::new(ConstantPredictor(scale.mean)));
        }
        let pts = Points::from_matrix(x);
        let hyper = fit_hyper(&[(pts.clone(), scale.values.clone())], x.ncols(), seed, &self.search)?;
        let post = GpPosterior::new(pts, &scale.values, &hyper)?;
        Ok(Box::new(GpState { post, scale }))
    }
}
