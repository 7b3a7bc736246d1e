//! Input-independent location-scale Student-t fitted to the marginal training
//! responses. Also the harness fallback.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StudentT};
use statrs::function::gamma::ln_gamma;

use super::{reject_unknown_params, Emulator, EmulatorError, EmulatorSpec, Predictor};
use crate::error::Result;
use crate::rng::SplitMix64;

/// Candidate degrees of freedom; `None` is the normal limit.
pub const DF_GRID: [Option<f64>; 5] = [Some(3.0), Some(5.0), Some(10.0), Some(30.0), None];

#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineT;

impl BaselineT {
    pub fn from_spec(spec: &EmulatorSpec) -> Result<Self> {
        reject_unknown_params(spec, &[])?;
        Ok(Self)
    }
}

/// Fitted marginal: location, scale and degrees of freedom (`None` = normal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TFit {
    pub location: f64,
    pub scale: f64,
    pub df: Option<f64>,
}

fn t_log_lik(y: &[f64], mu: f64, sigma: f64, df: Option<f64>) -> f64 {
    let n = y.len() as f64;
    match df {
        None => {
            let ss: f64 = y.iter().map(|v| (v - mu).powi(2)).sum();
            -0.5 * n * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - ss / (2.0 * sigma * sigma)
        }
        Some(nu) => {
            let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln() - sigma.ln();
            y.iter()
                .map(|v| c - (nu + 1.0) / 2.0 * (1.0 + ((v - mu) / sigma).powi(2) / nu).ln())
                .sum()
        }
    }
}

/// Maximum-likelihood location and scale for fixed `nu` by EM.
fn fit_fixed_df(y: &[f64], nu: f64, mu0: f64, sigma0: f64) -> (f64, f64) {
    let n = y.len() as f64;
    let (mut mu, mut s2) = (mu0, sigma0 * sigma0);
    for _ in 0..500 {
        let w: Vec<f64> = y.iter().map(|v| (nu + 1.0) / (nu + (v - mu).powi(2) / s2)).collect();
        let sw: f64 = w.iter().sum();
        let new_mu = w.iter().zip(y).map(|(w, v)| w * v).sum::<f64>() / sw;
        let new_s2 = w.iter().zip(y).map(|(w, v)| w * (v - new_mu).powi(2)).sum::<f64>() / n;
        let done = (new_mu - mu).abs() <= 1e-12 * (1.0 + mu.abs()) && (new_s2 - s2).abs() <= 1e-12 * s2;
        mu = new_mu;
        s2 = new_s2;
        if done || !(s2 > 0.0) {
            break;
        }
    }
    (mu, s2.max(0.0).sqrt())
}

/// Maximum-likelihood fit over [`DF_GRID`]. A constant sample gives scale 0.
pub fn fit_t(y: &[f64]) -> TFit {
    let mu0 = crate::metrics::mean(y);
    let sd0 = crate::metrics::population_sd(y);
    if !(sd0 > 1e-12 * mu0.abs().max(1.0)) {
        return TFit {
            location: mu0,
            scale: 0.0,
            df: None,
        };
    }
    let mut best = TFit {
        location: mu0,
        scale: sd0,
        df: None,
    };
    let mut best_ll = t_log_lik(y, mu0, sd0, None);
    for nu in DF_GRID.iter().flatten() {
        let (mu, sigma) = fit_fixed_df(y, *nu, mu0, sd0);
        if !(sigma > 0.0) {
            continue;
        }
        let ll = t_log_lik(y, mu, sigma, Some(*nu));
        if ll > best_ll {
            best_ll = ll;
            best = TFit {
                location: mu,
                scale: sigma,
                df: Some(*nu),
            };
        }
    }
    best
}

impl Emulator for BaselineT {
    fn fit(&self, _x: &DMatrix<f64>, y: &[f64], _seed: u64) -> Result<Box<dyn Predictor>, EmulatorError> {
        Ok(Box::new(fit_t(y)))
    }
}

impl Predictor for TFit {
    fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        let mut rng = SplitMix64::new(seed);
        let draws: Vec<f64> = match self.df {
            _ if self.scale == 0.0 => vec![self.location; m],
            None => (0..m).map(|_| self.location + self.scale * rng.normal()).collect(),
            Some(nu) => {
                let t = StudentT::new(nu).map_err(|e| EmulatorError::pred(e.to_string()))?;
                (0..m).map(|_| self.location + self.scale * t.sample(&mut rng)).collect()
            }
        };
        Ok(DMatrix::from_fn(m, x.nrows(), |j, _| draws[j]))
    }
}
