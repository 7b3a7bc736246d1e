//! Shared Gaussian-process machinery: anisotropic squared-exponential kernel
//! with a constant mean profiled out by generalised least squares, the
//! marginal likelihood with its analytic gradient, multistart
//! hyperparameter search and latent predictions.
//!
//! Kernel on unit-cube inputs:
//! `k(x, x') = s * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2) + tau * [x == x']`.
//! Optimised coordinates are `(ln l_1..ln l_p, ln s, ln tau)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::EmulatorError;
use crate::optimize::{minimize, Bounds, LbfgsOptions};
use crate::rng::SplitMix64;

pub const LOG_LENGTHSCALE_MIN: f64 = -4.605_170_185_988_091; // ln 0.01
pub const LOG_LENGTHSCALE_MAX: f64 = std::f64::consts::LN_10;
const LOG_VARIANCE_LIMIT: f64 = 30.0;
const LOG_NUGGET_MAX: f64 = std::f64::consts::LN_10;

/// Initial nugget on the standardised response scale; grows tenfold per
/// factorisation failure up to [`NUGGET_FLOOR_MAX`].
pub const NUGGET_FLOOR_START: f64 = 1e-6;
pub const NUGGET_FLOOR_MAX: f64 = 1e-2;
/// The search may lower the nugget this far below the current ladder level.
pub const NUGGET_SEARCH_DEPTH: f64 = 1e-2;

/// Row-major point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn from_matrix(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            data.extend(x.row(i).iter());
        }
        Self { n, p, data }
    }

    pub fn from_rows(rows: &[&[f64]], p: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            data.extend_from_slice(r);
        }
        Self {
            n: rows.len(),
            p,
            data,
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: idx.len(),
            p: self.p,
            data,
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    pub log_lengthscales: Vec<f64>,
    pub log_variance: f64,
    pub log_nugget: f64,
}

impl Hyper {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.log_lengthscales.clone();
        v.push(self.log_variance);
        v.push(self.log_nugget);
        v
    }

    pub fn from_vec(v: &[f64]) -> Self {
        let p = v.len() - 2;
        Self {
            log_lengthscales: v[..p].to_vec(),
            log_variance: v[p],
            log_nugget: v[p + 1],
        }
    }

    pub fn variance(&self) -> f64 {
        self.log_variance.exp()
    }

    pub fn nugget(&self) -> f64 {
        self.log_nugget.exp()
    }

    /// `1 / l_d^2` per dimension.
    pub fn inv_sq_lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales.iter().map(|l| (-2.0 * l).exp()).collect()
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales.iter().map(|l| l.exp()).collect()
    }
}

#[inline]
fn scaled_sq_dist(a: &[f64], b: &[f64], inv_sq: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_sq)
        .map(|((x, y), w)| (x - y) * (x - y) * w)
        .sum()
}

/// `s * R` (no nugget) between all pairs of `points`.
pub fn signal_covariance(points: &Points, hyper: &Hyper) -> DMatrix<f64> {
    let n = points.n();
    let inv_sq = hyper.inv_sq_lengthscales();
    let s = hyper.variance();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = s;
        let rj = points.row(j);
        for i in (j + 1)..n {
            let v = s * (-0.5 * scaled_sq_dist(points.row(i), rj, &inv_sq)).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `s * R` between `a` (rows) and `b` (columns).
pub fn cross_covariance(a: &Points, b: &Points, hyper: &Hyper) -> DMatrix<f64> {
    let inv_sq = hyper.inv_sq_lengthscales();
    let s = hyper.variance();
    DMatrix::from_fn(a.n(), b.n(), |i, j| {
        s * (-0.5 * scaled_sq_dist(a.row(i), b.row(j), &inv_sq)).exp()
    })
}

fn with_nugget(mut k: DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    for i in 0..k.nrows() {
        k[(i, i)] += tau;
    }
    k
}

/// GLS estimate of the constant mean and the weights `alpha = K^-1 (y - mu)`.
fn gls(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = y.len();
    let ones = DVector::from_element(n, 1.0);
    let kinv_1 = chol.solve(&ones);
    let kinv_y = chol.solve(y);
    let mu = kinv_y.sum() / kinv_1.sum();
    let alpha = kinv_y - kinv_1 * mu;
    (mu, alpha)
}

/// Negative log marginal likelihood (constant mean profiled out) and its
/// gradient with respect to `(ln l, ln s, ln tau)`. `None` if the covariance
/// is not numerically positive definite.
pub fn neg_log_likelihood(points: &Points, y: &[f64], params: &[f64]) -> Option<(f64, Vec<f64>)> {
    let hyper = Hyper::from_vec(params);
    let n = points.n();
    let p = points.p();
    let sr = signal_covariance(points, &hyper);
    let tau = hyper.nugget();
    let (l, linv) = cholesky_with_inverse(&with_nugget(sr.clone(), tau))?;
    let yv = DVector::from_column_slice(y);
    let solve = |v: &DVector<f64>| linv.transpose() * (&linv * v);
    let kinv_1 = solve(&DVector::from_element(n, 1.0));
    let kinv_y = solve(&yv);
    let mu = kinv_y.sum() / kinv_1.sum();
    let alpha = kinv_y - kinv_1 * mu;
    let r = &yv - DVector::from_element(n, mu);
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let nll = 0.5 * r.dot(&alpha) + 0.5 * log_det + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !nll.is_finite() {
        return None;
    }

    // d nll / d theta = 0.5 * tr(W dK), W = K^-1 - alpha alpha^T
    let kinv = linv.transpose() * &linv;
    let inv_sq = hyper.inv_sq_lengthscales();
    let mut grad = vec![0.0; p + 2];
    let mut trace_w = 0.0;
    let mut w_sr_sum = 0.0;
    let mut diff_sums = vec![0.0; p];
    for j in 0..n {
        let wjj = kinv[(j, j)] - alpha[j] * alpha[j];
        trace_w += wjj;
        w_sr_sum += wjj * sr[(j, j)];
        let xj = points.row(j);
        for i in (j + 1)..n {
            let w = kinv[(i, j)] - alpha[i] * alpha[j];
            let c = 2.0 * w * sr[(i, j)];
            w_sr_sum += c;
            let xi = points.row(i);
            for d in 0..p {
                let diff = xi[d] - xj[d];
                diff_sums[d] += c * diff * diff;
            }
        }
    }
    for d in 0..p {
        grad[d] = 0.5 * diff_sums[d] * inv_sq[d];
    }
    grad[p] = 0.5 * w_sr_sum;
    grad[p + 1] = 0.5 * tau * trace_w;
    Some((nll, grad))
}

const BLOCK: usize = 48;

/// Cholesky factor `L` of a symmetric positive definite matrix together with
/// `L^-1`, by recursive 2x2 blocking so the bulk of the work is matrix
/// products. Only the lower triangle of `k` is read. `None` if `k` is not
/// numerically positive definite.
pub fn cholesky_with_inverse(k: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    if n <= BLOCK {
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = k[(j, j)];
            for c in 0..j {
                d -= l[(j, c)] * l[(j, c)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = k[(i, j)];
                for c in 0..j {
                    s -= l[(i, c)] * l[(j, c)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        let inv = lower_triangular_inverse(&l);
        return Some((l, inv));
    }
    let h = n / 2;
    let m = n - h;
    let (l11, i11) = cholesky_with_inverse(&k.view((0, 0), (h, h)).into_owned())?;
    let l21 = k.view((h, 0), (m, h)) * i11.transpose();
    let schur = k.view((h, h), (m, m)) - &l21 * l21.transpose();
    let (l22, i22) = cholesky_with_inverse(&schur)?;
    let i21 = -(&i22 * (&l21 * &i11));
    let mut l = DMatrix::zeros(n, n);
    l.view_mut((0, 0), (h, h)).copy_from(&l11);
    l.view_mut((h, 0), (m, h)).copy_from(&l21);
    l.view_mut((h, h), (m, m)).copy_from(&l22);
    let mut inv = DMatrix::zeros(n, n);
    inv.view_mut((0, 0), (h, h)).copy_from(&i11);
    inv.view_mut((h, 0), (m, h)).copy_from(&i21);
    inv.view_mut((h, h), (m, m)).copy_from(&i22);
    Some((l, inv))
}

/// Inverse of a lower-triangular matrix by forward substitution. Only the
/// lower triangle of `l` is read.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Summed likelihood over independent blocks sharing hyperparameters.
pub fn neg_log_likelihood_blocks(blocks: &[(Points, Vec<f64>)], params: &[f64]) -> Option<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (pts, y) in blocks {
        let (v, g) = neg_log_likelihood(pts, y, params)?;
        total += v;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Some((total, grad))
}

/// Each start runs `start_iters` quasi-Newton iterations; the best is then
/// refined for up to `max_iters` more.
#[derive(Debug, Clone)]
pub struct HyperSearch {
    pub multistarts: usize,
    pub start_iters: usize,
    pub max_iters: usize,
}

impl Default for HyperSearch {
    fn default() -> Self {
        Self {
            multistarts: 5,
            start_iters: 20,
            max_iters: 80,
        }
    }
}

fn bounds(p: usize, nugget_floor: f64) -> Vec<Bounds> {
    let mut b = vec![Bounds::new(LOG_LENGTHSCALE_MIN, LOG_LENGTHSCALE_MAX); p];
    b.push(Bounds::new(-LOG_VARIANCE_LIMIT, LOG_VARIANCE_LIMIT));
    b.push(Bounds::new((nugget_floor * NUGGET_SEARCH_DEPTH).ln(), LOG_NUGGET_MAX));
    b
}

/// Maximises the (summed) marginal likelihood from `search.multistarts`
/// seed-derived random starts. On numerical failure the nugget floor grows
/// tenfold, up to [`NUGGET_FLOOR_MAX`].
pub fn fit_hyper(
    blocks: &[(Points, Vec<f64>)],
    p: usize,
    seed: u64,
    search: &HyperSearch,
) -> Result<Hyper, EmulatorError> {
    let mut floor = NUGGET_FLOOR_START;
    loop {
        let mut rng = SplitMix64::new(seed);
        let b = bounds(p, floor);
        let opts = LbfgsOptions {
            max_iters: search.start_iters.max(1),
            ftol: 1e-9,
            gtol: 1e-5,
            ..Default::default()
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in 0..search.multistarts.max(1) {
            let mut x0: Vec<f64> = (0..p)
                .map(|_| (0.05f64).ln() + rng.uniform() * ((2.0f64).ln() - (0.05f64).ln()))
                .collect();
            x0.push(rng.uniform() - 0.5);
            let u = rng.uniform();
            x0.push(if start == 0 { floor.ln() } else { floor.ln() + u * ((0.1f64).ln() - floor.ln()).max(0.0) });
            let found = minimize(|x| neg_log_likelihood_blocks(blocks, x), &x0, &b, &opts);
            if let Some(m) = found {
                if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                    best = Some((m.value, m.x));
                }
            }
        }
        if let Some((value, x)) = best {
            let polish = LbfgsOptions {
                max_iters: search.max_iters,
                ..opts
            };
            let x = match minimize(|x| neg_log_likelihood_blocks(blocks, x), &x, &b, &polish) {
                Some(m) if m.value <= value => m.x,
                _ => x,
            };
            return Ok(Hyper::from_vec(&x));
        }
        if floor >= NUGGET_FLOOR_MAX {
            return Err(EmulatorError::fit(
                "covariance matrix not positive definite at any nugget up to 1e-2",
            ));
        }
        floor = (floor * 10.0).min(NUGGET_FLOOR_MAX);
    }
}

/// A GP conditioned on data with fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    points: Points,
    hyper: Hyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    mean: f64,
}

impl GpPosterior {
    /// Conditions on `(points, y)`. If the covariance fails to factor, the
    /// nugget is raised tenfold until it reaches [`NUGGET_FLOOR_MAX`].
    pub fn new(points: Points, y: &[f64], hyper: &Hyper) -> Result<Self, EmulatorError> {
        let mut hyper = hyper.clone();
        let sr = signal_covariance(&points, &hyper);
        loop {
            if let Some(chol) = with_nugget(sr.clone(), hyper.nugget()).cholesky() {
                let (mean, alpha) = gls(&chol, &DVector::from_column_slice(y));
                return Ok(Self {
                    points,
                    hyper,
                    chol,
                    alpha,
                    mean,
                });
            }
            if hyper.nugget() >= NUGGET_FLOOR_MAX {
                return Err(EmulatorError::fit("covariance matrix not positive definite"));
            }
            hyper.log_nugget = (hyper.nugget() * 10.0).min(NUGGET_FLOOR_MAX).ln();
        }
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn mean_constant(&self) -> f64 {
        self.mean
    }

    /// Latent (noise-free) predictive mean and variance at each row of `xs`.
    pub fn predict(&self, xs: &Points) -> (Vec<f64>, Vec<f64>) {
        let kstar = cross_covariance(&self.points, xs, &self.hyper);
        let means: Vec<f64> = (0..xs.n())
            .map(|j| self.mean + kstar.column(j).dot(&self.alpha))
            .collect();
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("cholesky factor has a nonzero diagonal");
        let s = self.hyper.variance();
        let vars = (0..xs.n())
            .map(|j| (s - v.column(j).norm_squared()).max(0.0))
            .collect();
        (means, vars)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, p: usize, seed: u64) -> (Points, Vec<f64>) {
        let mut rng = SplitMix64::new(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.uniform());
        let pts = Points::from_matrix(&x);
        let y = (0..n)
            .map(|i| {
                let r = pts.row(i);
                (3.0 * r[0]).sin() + r.iter().skip(1).map(|v| v * v).sum::<f64>()
            })
            .collect();
        (pts, y)
    }

    #[test]
    fn blocked_cholesky_matches_reference() {
        let mut rng = SplitMix64::new(17);
        for n in [1, 5, 48, 49, 130] {
            let a = DMatrix::from_fn(n, n, |_, _| rng.uniform() - 0.5);
            let mut k = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
            // the strict upper triangle must not be read
            for j in 1..n {
                for i in 0..j {
                    k[(i, j)] = f64::NAN;
                }
            }
            let (l, inv) = cholesky_with_inverse(&k).unwrap();
            let full = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
            let reference = full.clone().cholesky().unwrap().l();
            assert!((&l - &reference).abs().max() < 1e-10, "n = {n}");
            assert!((&l * &inv - DMatrix::identity(n, n)).abs().max() < 1e-10, "n = {n}");
        }
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_with_inverse(&not_pd).is_none());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (pts, y) = toy(25, 3, 1);
        let mut rng = SplitMix64::new(2);
        for _ in 0..10 {
            let params: Vec<f64> = vec![
                -2.0 + 2.5 * rng.uniform(),
                -2.0 + 2.5 * rng.uniform(),
                -2.0 + 2.5 * rng.uniform(),
                -1.0 + 2.0 * rng.uniform(),
                -8.0 + 6.0 * rng.uniform(),
            ];
            let (_, g) = neg_log_likelihood(&pts, &y, &params).unwrap();
            for k in 0..params.len() {
                let h = 1e-5;
                let mut up = params.clone();
                let mut dn = params.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (neg_log_likelihood(&pts, &y, &up).unwrap().0
                    - neg_log_likelihood(&pts, &y, &dn).unwrap().0)
                    / (2.0 * h);
                let rel = (fd - g[k]).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-4, "param {k}: analytic {} vs fd {fd}", g[k]);
            }
        }
    }

    #[test]
    fn posterior_interpolates_training_points() {
        let x = DMatrix::from_fn(20, 1, |i, _| i as f64 / 19.0);
        let pts = Points::from_matrix(&x);
        let y: Vec<f64> = x.iter().map(|t| (3.0 * t).sin()).collect();
        let hyper = fit_hyper(&[(pts.clone(), y.clone())], 1, 4, &HyperSearch::default()).unwrap();
        let post = GpPosterior::new(pts.clone(), &y, &hyper).unwrap();
        let (m, v) = post.predict(&pts);
        for i in 0..20 {
            assert!((m[i] - y[i]).abs() < 1e-4, "{} vs {}", m[i], y[i]);
            assert!(v[i] < 1e-4);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let (pts, y) = toy(30, 2, 5);
        let a = fit_hyper(&[(pts.clone(), y.clone())], 2, 9, &HyperSearch::default()).unwrap();
        let b = fit_hyper(&[(pts, y)], 2, 9, &HyperSearch::default()).unwrap();
        assert_eq!(a, b);
    }
}
