//! Random Fourier feature approximation of a squared-exponential GP with a
//! conjugate normal-inverse-gamma posterior on the feature weights.
//!
//! Features are `sqrt(2/D) cos(w_k . x / l + b_k)` with `w_k ~ N(0, I)` and
//! `b_k ~ U[0, 2 pi)`, plus an intercept. The shared lengthscale `l` and the
//! weight prior precision are chosen from fixed grids by maximum evidence.

use nalgebra::DMatrix;

use super::blm::{NigPosterior, PRIOR_PRECISION, PRIOR_SCALE, PRIOR_SHAPE};
use super::{count_param, reject_unknown_params, sizes, ConstantPredictor, Emulator, EmulatorError, EmulatorSpec, Predictor, Standardized};
use crate::error::Result;
use crate::rng::SplitMix64;

pub const LENGTHSCALE_GRID: [f64; 10] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.5, 4.0];
pub const WEIGHT_PRECISION_GRID: [f64; 6] = [1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, Default)]
pub struct RffGp {
    /// Overrides the feature-count rule.
    pub features: Option<usize>,
}

impl RffGp {
    pub fn from_spec(spec: &EmulatorSpec) -> Result<Self> {
        reject_unknown_params(spec, &["features"])?;
        Ok(Self {
            features: count_param(spec, "features")?,
        })
    }
}

struct FeatureMap {
    omega: DMatrix<f64>,
    phase: Vec<f64>,
    lengthscale: f64,
}

impl FeatureMap {
    fn draw(d: usize, p: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let omega = DMatrix::from_fn(d, p, |_, _| rng.normal());
        let phase = (0..d).map(|_| std::f64::consts::TAU * rng.uniform()).collect();
        Self {
            omega,
            phase,
            lengthscale: 1.0,
        }
    }

    /// `n x (D + 1)` design: intercept then the cosine features.
    fn features(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.phase.len();
        let amp = (2.0 / d as f64).sqrt();
        let proj = x * self.omega.transpose() / self.lengthscale;
        DMatrix::from_fn(x.nrows(), d + 1, |i, k| {
            if k == 0 {
                1.0
            } else {
                amp * (proj[(i, k - 1)] + self.phase[k - 1]).cos()
            }
        })
    }
}

struct RffState {
    map: FeatureMap,
    post: NigPosterior,
    scale: Standardized,
}

impl Predictor for RffState {
    fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        let z = self.post.predictive_draws(&self.map.features(x), m, seed)?;
        Ok(z.map(|v| self.scale.mean + self.scale.sd * v))
    }
}

impl Emulator for RffGp {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>, EmulatorError> {
        let scale = Standardized::new(y);
        if scale.is_constant() {
            return Ok(Box::new(ConstantPredictor(scale.mean)));
        }
        let d = self.features.unwrap_or_else(|| sizes::rff_features(y.len())).max(1);
        let mut map = FeatureMap::draw(d, x.ncols(), seed);
        let mut best: Option<(f64, f64, NigPosterior)> = None;
        for &l in &LENGTHSCALE_GRID {
            map.lengthscale = l;
            let phi = map.features(x);
            for &lam in &WEIGHT_PRECISION_GRID {
                let mut prec = vec![lam; d + 1];
                prec[0] = PRIOR_PRECISION;
                if let Some(post) = NigPosterior::fit(&phi, &scale.values, &prec, PRIOR_SHAPE, PRIOR_SCALE) {
                    if best.as_ref().is_none_or(|b| post.log_evidence > b.2.log_evidence) {
                        best = Some((l, lam, post));
                    }
                }
            }
        }
        let (l, _, post) = best.ok_or_else(|| EmulatorError::fit("no grid point gave a valid posterior"))?;
        map.lengthscale = l;
        Ok(Box::new(RffState { map, post, scale }))
    }
}
