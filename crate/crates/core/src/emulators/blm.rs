//! Conjugate Bayesian linear regression on features `[1, x]` with a vague
//! normal-inverse-gamma prior, and the conjugate machinery shared with
//! `rffgp`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::{reject_unknown_params, Emulator, EmulatorError, EmulatorSpec, Predictor};
use crate::error::Result;
use crate::rng::SplitMix64;

pub const PRIOR_PRECISION: f64 = 1e-6;
pub const PRIOR_SHAPE: f64 = 1e-3;
pub const PRIOR_SCALE: f64 = 1e-3;

/// Posterior of `y = Phi w + e`, `w | s2 ~ N(0, s2 diag(prec)^-1)`,
/// `e ~ N(0, s2 I)`, `s2 ~ IG(a0, b0)`.
#[derive(Debug, Clone)]
pub(super) struct NigPosterior {
    pub mean: DVector<f64>,
    /// Cholesky factor of the posterior precision `Phi^T Phi + diag(prec)`.
    chol: Cholesky<f64, Dyn>,
    pub shape: f64,
    pub scale: f64,
    pub log_evidence: f64,
}

impl NigPosterior {
    pub fn fit(phi: &DMatrix<f64>, y: &[f64], prec: &[f64], a0: f64, b0: f64) -> Option<Self> {
        let n = y.len();
        let yv = DVector::from_column_slice(y);
        let mut a = phi.transpose() * phi;
        for (i, p) in prec.iter().enumerate() {
            a[(i, i)] += p;
        }
        let chol = a.clone().cholesky()?;
        let mean = chol.solve(&phi.tr_mul(&yv));
        let quad = yv.norm_squared() - mean.dot(&(&a * &mean));
        let shape = a0 + n as f64 / 2.0;
        let scale = b0 + 0.5 * quad.max(0.0);
        let log_det_a = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_det_prior: f64 = prec.iter().map(|p| p.ln()).sum();
        let log_evidence = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * log_det_prior
            - 0.5 * log_det_a
            + a0 * b0.ln()
            - shape * scale.ln()
            + ln_gamma(shape)
            - ln_gamma(a0);
        log_evidence.is_finite().then_some(Self {
            mean,
            chol,
            shape,
            scale,
            log_evidence,
        })
    }

    /// One joint posterior draw `(sigma, w)`.
    pub fn draw(&self, gamma: &Gamma<f64>, rng: &mut SplitMix64) -> (f64, DVector<f64>) {
        let sigma = (self.scale / gamma.sample(rng)).sqrt();
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.normal());
        let u = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .expect("cholesky factor has a nonzero diagonal");
        (sigma, &self.mean + u * sigma)
    }

    pub fn shape_sampler(&self) -> Result<Gamma<f64>, EmulatorError> {
        Gamma::new(self.shape, 1.0).map_err(|e| EmulatorError::pred(e.to_string()))
    }

    /// `M x m` posterior-predictive draws `Phi* w + sigma e` for test features `phi_star`.
    pub fn predictive_draws(&self, phi_star: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        let gamma = self.shape_sampler()?;
        let mut rng = SplitMix64::new(seed);
        let mut out = DMatrix::zeros(m, phi_star.nrows());
        for j in 0..m {
            let (sigma, w) = self.draw(&gamma, &mut rng);
            let f = phi_star * w;
            for i in 0..phi_star.nrows() {
                out[(j, i)] = f[i] + sigma * rng.normal();
            }
        }
        Ok(out)
    }
}

fn linear_features(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Blm;

impl Blm {
    pub fn from_spec(spec: &EmulatorSpec) -> Result<Self> {
        reject_unknown_params(spec, &[])?;
        Ok(Self)
    }
}

struct BlmState(NigPosterior);

impl Emulator for Blm {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], _seed: u64) -> Result<Box<dyn Predictor>, EmulatorError> {
        let phi = linear_features(x);
        let prec = vec![PRIOR_PRECISION; phi.ncols()];
        NigPosterior::fit(&phi, y, &prec, PRIOR_SHAPE, PRIOR_SCALE)
            .map(|post| Box::new(BlmState(post)) as Box<dyn Predictor>)
            .ok_or_else(|| EmulatorError::fit("posterior precision is not positive definite"))
    }
}

impl Predictor for BlmState {
    fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        self.0.predictive_draws(&linear_features(x), m, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data(n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = SplitMix64::new(21);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.uniform());
        let y = (0..n)
            .map(|i| 1.5 - 2.0 * x[(i, 0)] + 0.25 * x[(i, 1)] + 4.0 * x[(i, 2)])
            .collect();
        (x, y)
    }

    #[test]
    fn posterior_mean_matches_normal_equations() {
        let (x, y) = linear_data(100);
        let phi = linear_features(&x);
        let post = NigPosterior::fit(&phi, &y, &[PRIOR_PRECISION; 4], PRIOR_SHAPE, PRIOR_SCALE).unwrap();
        // least squares through QR, independent of the Cholesky path
        let qr = phi.clone().qr();
        let qty = qr.q().transpose() * DVector::from_column_slice(&y);
        let ols = qr.r().solve_upper_triangular(&qty).unwrap();
        for k in 0..4 {
            assert!((post.mean[k] - ols[k]).abs() < 1e-6, "{k}: {} vs {}", post.mean[k], ols[k]);
        }
        let truth = [1.5, -2.0, 0.25, 4.0];
        for k in 0..4 {
            assert!((post.mean[k] - truth[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn evidence_matches_direct_multivariate_t() {
        // marginal of y is multivariate t with 2 a0 dof, scale (b0/a0)(I + Phi P^-1 Phi^T)
        let (x, mut y) = linear_data(6);
        y.iter_mut().enumerate().for_each(|(i, v)| *v += 0.1 * (i as f64).sin());
        let phi = linear_features(&x);
        let prec = [0.5, 2.0, 1.0, 3.0];
        let (a0, b0) = (2.0, 1.5);
        let post = NigPosterior::fit(&phi, &y, &prec, a0, b0).unwrap();
        let n = y.len() as f64;
        let pinv = DMatrix::from_diagonal(&DVector::from_iterator(4, prec.iter().map(|p| 1.0 / p)));
        let sigma = (DMatrix::identity(6, 6) + &phi * pinv * phi.transpose()) * (b0 / a0);
        let yv = DVector::from_column_slice(&y);
        let q = yv.dot(&(sigma.clone().try_inverse().unwrap() * &yv));
        let nu = 2.0 * a0;
        let direct = ln_gamma((nu + n) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * n * (nu * std::f64::consts::PI).ln()
            - 0.5 * sigma.determinant().ln()
            - (nu + n) / 2.0 * (1.0 + q / nu).ln();
        assert!((post.log_evidence - direct).abs() < 1e-9, "{} vs {direct}", post.log_evidence);
    }

    #[test]
    fn predictive_is_deterministic_and_centred() {
        let (x, y) = linear_data(50);
        let model = Blm.fit(&x, &y, 0).unwrap();
        let xt = DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.5]);
        let a = model.predict(&xt, 400, 3).unwrap();
        assert_eq!(a, model.predict(&xt, 400, 3).unwrap());
        let truth = 1.5 - 1.0 + 0.125 + 2.0;
        assert!((a.column(0).mean() - truth).abs() < 1e-3);
    }
}
