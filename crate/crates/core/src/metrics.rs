//! Proper scoring of ensemble predictions and the benchmark's score conventions.
//!
//! The ensemble CRPS for one test point with draws `d_1..d_M` is
//!
//! ```text
//! (1/M) sum_j |d_j - y|  -  c(M) sum_{j<k} |d_j - d_k|
//! ```
//!
//! with `c(M) = 1 / (2 M (M-1))` for [`CrpsVariant::Printed`] and
//! `c(M) = 1 / (M (M-1))` for the unbiased [`CrpsVariant::Fair`] estimator.
//! The pairwise sum is evaluated in `O(M log M)` from the sorted draws:
//! `sum_{j<k} |d_j - d_k| = sum_i (2i - M + 1) d_(i)` for zero-based order
//! statistics `d_(i)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores below this standard deviation are left unscaled.
pub const REF_SD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrpsVariant {
    /// Pairwise constant `1 / (2M(M-1))`.
    Printed,
    /// Pairwise constant `1 / (M(M-1))`; unbiased for the continuous CRPS.
    #[default]
    Fair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub epsilon: f64,
    pub cap: f64,
    pub interval_alpha: f64,
    pub crps_quantiles: Vec<f64>,
    pub crps_variant: CrpsVariant,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.001,
            cap: 100.0,
            interval_alpha: 0.05,
            crps_quantiles: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            crps_variant: CrpsVariant::Fair,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.cap > 1.0) {
            return Err(Error::Config(format!("cap must be > 1, got {}", self.cap)));
        }
        if !(self.interval_alpha > 0.0 && self.interval_alpha < 1.0) {
            return Err(Error::Config(format!(
                "interval_alpha must lie in (0, 1), got {}",
                self.interval_alpha
            )));
        }
        if let Some(q) = self.crps_quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::Config(format!("CRPS quantile {q} outside [0, 1]")));
        }
        Ok(())
    }
}

/// `M x n_test` predictive draws: row `j` is the `j`-th draw at every test point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEnsemble {
    draws: DMatrix<f64>,
}

impl PredictiveEnsemble {
    pub fn new(draws: DMatrix<f64>) -> Result<Self> {
        if draws.nrows() < 2 {
            return Err(Error::Domain(format!(
                "an ensemble needs at least 2 draws, got {}",
                draws.nrows()
            )));
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("ensemble contains non-finite draws".into()));
        }
        Ok(Self { draws })
    }

    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn into_draws(self) -> DMatrix<f64> {
        self.draws
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.draws.ncols()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.draws.column(i).iter().copied().collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.n_points())
            .map(|i| self.draws.column(i).mean())
            .collect()
    }
}

fn check_draws(y: f64, draws: &[f64]) -> Result<()> {
    if draws.len() < 2 {
        return Err(Error::Domain(format!("CRPS needs M >= 2 draws, got {}", draws.len())));
    }
    if !y.is_finite() || draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("CRPS inputs must be finite".into()));
    }
    Ok(())
}

/// `(mean |d_j - y|, sum_{j<k} |d_j - d_k|)`.
fn crps_parts(y: f64, draws: &[f64]) -> (f64, f64) {
    let m = draws.len();
    let mean_abs = draws.iter().map(|d| (d - y).abs()).sum::<f64>() / m as f64;
    let mut sorted = draws.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let pair_sum = sorted
        .iter()
        .enumerate()
        .map(|(i, d)| (2.0 * i as f64 - m as f64 + 1.0) * d)
        .sum::<f64>();
    (mean_abs, pair_sum)
}

/// Ensemble CRPS with the pairwise constant `1 / (2M(M-1))`.
pub fn crps_ensemble(y: f64, draws: &[f64]) -> Result<f64> {
    crps(CrpsVariant::Printed, y, draws)
}

/// Fair ensemble CRPS, pairwise constant `1 / (M(M-1))`.
pub fn crps_fair(y: f64, draws: &[f64]) -> Result<f64> {
    crps(CrpsVariant::Fair, y, draws)
}

pub fn crps(variant: CrpsVariant, y: f64, draws: &[f64]) -> Result<f64> {
    check_draws(y, draws)?;
    let m = draws.len() as f64;
    let (mean_abs, pair_sum) = crps_parts(y, draws);
    let c = match variant {
        CrpsVariant::Printed => 1.0 / (2.0 * m * (m - 1.0)),
        CrpsVariant::Fair => 1.0 / (m * (m - 1.0)),
    };
    Ok((mean_abs - c * pair_sum).max(0.0))
}

/// Sample quantile with linear interpolation between order statistics
/// (position `(n-1) p`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by `n`).
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

pub fn population_sd(values: &[f64]) -> f64 {
    population_variance(values).sqrt()
}

/// One interval-score term for a central `(1 - alpha)` interval `[lower, upper]`.
pub fn interval_score(y: f64, lower: f64, upper: f64, alpha: f64) -> f64 {
    let mut s = upper - lower;
    if y < lower {
        s += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        s += 2.0 / alpha * (y - upper);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub rmse: f64,
    /// `NaN` when the test responses have zero variance.
    pub fvu: f64,
    pub crps_mean: f64,
    pub crps_median: f64,
    /// Aligned with [`ScoreConfig::crps_quantiles`].
    pub crps_quantiles: Vec<f64>,
    pub coverage: f64,
    pub interval_score: f64,
}

impl MetricBundle {
    pub fn fvu_defined(&self) -> bool {
        !self.fvu.is_nan()
    }

    /// Divides the scale-carrying metrics by `ref_sd` (see [`rescale_to_unit_variance`]).
    /// Returns the bundle and whether the constant-response guard engaged.
    pub fn rescaled(&self, ref_sd: f64) -> (MetricBundle, bool) {
        let (div, guarded) = rescale_divisor(ref_sd);
        let out = MetricBundle {
            rmse: self.rmse / div,
            fvu: self.fvu,
            crps_mean: self.crps_mean / div,
            crps_median: self.crps_median / div,
            crps_quantiles: self.crps_quantiles.iter().map(|q| q / div).collect(),
            coverage: self.coverage,
            interval_score: self.interval_score / div,
        };
        (out, guarded)
    }
}

pub fn summary_metrics(
    y_test: &[f64],
    ensemble: &PredictiveEnsemble,
    cfg: &ScoreConfig,
) -> Result<MetricBundle> {
    let n = y_test.len();
    if n == 0 {
        return Err(Error::Domain("empty test set".into()));
    }
    if ensemble.n_points() != n {
        return Err(Error::Domain(format!(
            "ensemble has {} columns but there are {n} test responses",
            ensemble.n_points()
        )));
    }
    if y_test.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("test responses must be finite".into()));
    }
    let alpha = cfg.interval_alpha;
    let mut sq_err = 0.0;
    let mut crps_values = Vec::with_capacity(n);
    let mut covered = 0usize;
    let mut is_total = 0.0;
    let mut column = vec![0.0; ensemble.n_draws()];
    for (i, &y) in y_test.iter().enumerate() {
        column
            .iter_mut()
            .zip(ensemble.draws.column(i).iter())
            .for_each(|(c, d)| *c = *d);
        let pred_mean = mean(&column);
        sq_err += (pred_mean - y).powi(2);
        crps_values.push(crps(cfg.crps_variant, y, &column)?);
        column.sort_unstable_by(f64::total_cmp);
        let lower = quantile_sorted(&column, alpha / 2.0);
        let upper = quantile_sorted(&column, 1.0 - alpha / 2.0);
        if (lower..=upper).contains(&y) {
            covered += 1;
        }
        is_total += interval_score(y, lower, upper, alpha);
    }
    let mse = sq_err / n as f64;
    let var = population_variance(y_test);
    let fvu = if var > 0.0 { mse / var } else { f64::NAN };
    let mut sorted = crps_values.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(MetricBundle {
        rmse: mse.sqrt(),
        fvu,
        crps_mean: mean(&crps_values),
        crps_median: quantile_sorted(&sorted, 0.5),
        crps_quantiles: cfg
            .crps_quantiles
            .iter()
            .map(|&p| quantile_sorted(&sorted, p))
            .collect(),
        coverage: covered as f64 / n as f64,
        interval_score: is_total / n as f64,
    })
}

fn rescale_divisor(ref_sd: f64) -> (f64, bool) {
    if ref_sd.is_finite() && ref_sd >= REF_SD_FLOOR {
        (ref_sd, false)
    } else {
        (1.0, true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub values: Vec<f64>,
    /// Set when `ref_sd` was below [`REF_SD_FLOOR`] and the scores were left unscaled.
    pub guarded: bool,
}

/// Expresses scores as if the reference response had unit variance.
pub fn rescale_to_unit_variance(scores: &[f64], ref_sd: f64) -> Rescaled {
    let (div, guarded) = rescale_divisor(ref_sd);
    Rescaled {
        values: scores.iter().map(|s| s / div).collect(),
        guarded,
    }
}

/// `min(cap, (s_m + eps) / (s* + eps))` with `s*` the smallest score.
pub fn relative_scores(
    scores_by_method: &BTreeMap<String, f64>,
    cfg: &ScoreConfig,
) -> Result<BTreeMap<String, f64>> {
    if scores_by_method.is_empty() {
        return Err(Error::Domain("relative scores need at least one method".into()));
    }
    if let Some((m, s)) = scores_by_method.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::Domain(format!("score for `{m}` is not finite: {s}")));
    }
    let best = scores_by_method
        .values()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(scores_by_method
        .iter()
        .map(|(m, &s)| (m.clone(), relative_score(s, best, cfg)))
        .collect())
}

pub fn relative_score(score: f64, best: f64, cfg: &ScoreConfig) -> f64 {
    ((score + cfg.epsilon) / (best + cfg.epsilon)).min(cfg.cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    /// Literal double loop over all pairs.
    fn crps_reference(variant: CrpsVariant, y: f64, d: &[f64]) -> f64 {
        let m = d.len() as f64;
        let first: f64 = d.iter().map(|x| (x - y).abs()).sum::<f64>() / m;
        let mut pairs = 0.0;
        for j in 0..d.len() {
            for k in (j + 1)..d.len() {
                pairs += (d[j] - d[k]).abs();
            }
        }
        let c = match variant {
            CrpsVariant::Printed => 1.0 / (2.0 * m * (m - 1.0)),
            CrpsVariant::Fair => 1.0 / (m * (m - 1.0)),
        };
        first - c * pairs
    }

    #[test]
    fn hand_values() {
        assert_eq!(crps_ensemble(0.0, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((crps_ensemble(0.0, &[0.0, 1.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((crps_ensemble(0.0, &[-1.0, 0.0, 1.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // fair: 0.5 - 1/2 * 1
        assert!((crps_fair(0.0, &[0.0, 1.0]).unwrap() - 0.0).abs() < 1e-15);
        // fair: 2/3 - (1/6) * 4
        assert!((crps_fair(0.0, &[-1.0, 0.0, 1.0]).unwrap() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn crps_rejects_bad_input() {
        assert!(matches!(crps_ensemble(0.0, &[1.0]), Err(Error::Domain(_))));
        assert!(matches!(crps_ensemble(0.0, &[1.0, f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(crps_ensemble(f64::INFINITY, &[1.0, 2.0]), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn sorted_form_matches_pairwise_loop(
            y in -10.0f64..10.0,
            d in prop::collection::vec(-10.0f64..10.0, 2..60),
        ) {
            for v in [CrpsVariant::Printed, CrpsVariant::Fair] {
                let fast = crps(v, y, &d).unwrap();
                let slow = crps_reference(v, y, &d);
                prop_assert!(slow >= -1e-12);
                prop_assert!((fast - slow.max(0.0)).abs() < 1e-12);
            }
        }

        #[test]
        fn translation_invariant(
            y in -5.0f64..5.0,
            d in prop::collection::vec(-5.0f64..5.0, 2..40),
            c in -100.0f64..100.0,
        ) {
            let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
            let a = crps_ensemble(y, &d).unwrap();
            let b = crps_ensemble(y + c, &shifted).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + c.abs()));
        }

        #[test]
        fn positively_homogeneous(
            y in -5.0f64..5.0,
            d in prop::collection::vec(-5.0f64..5.0, 2..40),
            a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        ) {
            let scaled: Vec<f64> = d.iter().map(|x| a * x).collect();
            let base = crps_fair(y, &d).unwrap();
            let got = crps_fair(a * y, &scaled).unwrap();
            prop_assert!((got - a.abs() * base).abs() <= 1e-12 * (1.0 + a.abs() * base));
        }

        #[test]
        fn relative_min_is_one_and_capped(
            scores in prop::collection::btree_map("[a-f]{1,3}", 0.0f64..50.0, 1..8),
        ) {
            let cfg = ScoreConfig::default();
            let rel = relative_scores(&scores, &cfg).unwrap();
            let min = rel.values().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min, 1.0);
            prop_assert!(rel.values().all(|&r| (1.0..=cfg.cap).contains(&r)));
        }
    }

    #[test]
    fn fair_crps_baseline_expectation() {
        let mut rng = SplitMix64::new(1);
        let n = 2000;
        let total: f64 = (0..n)
            .map(|_| {
                let y = rng.normal();
                let d: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
                crps_fair(y, &d).unwrap()
            })
            .sum();
        let m = total / n as f64;
        assert!((m - std::f64::consts::FRAC_2_SQRT_PI / 2.0).abs() < 0.03, "{m}");
    }

    #[test]
    fn perfect_prediction() {
        let y = vec![1.0, 2.0, 3.0];
        let draws = DMatrix::from_fn(4, 3, |_, i| y[i]);
        let ens = PredictiveEnsemble::new(draws).unwrap();
        let b = summary_metrics(&y, &ens, &ScoreConfig::default()).unwrap();
        assert_eq!((b.rmse, b.fvu, b.crps_mean), (0.0, 0.0, 0.0));
        assert_eq!(b.coverage, 1.0);
    }

    #[test]
    fn fvu_hand_value() {
        let y = vec![0.0, 2.0];
        let draws = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.5, 1.5]);
        let ens = PredictiveEnsemble::new(draws).unwrap();
        let b = summary_metrics(&y, &ens, &ScoreConfig::default()).unwrap();
        assert!((b.fvu - 1.0).abs() < 1e-15);
        assert!((b.rmse - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fvu_undefined_for_constant_truth() {
        let y = vec![3.0, 3.0];
        let draws = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 4.0, 4.0]);
        let b = summary_metrics(&y, &PredictiveEnsemble::new(draws).unwrap(), &ScoreConfig::default())
            .unwrap();
        assert!(!b.fvu_defined());
    }

    #[test]
    fn interval_score_inside_is_width() {
        assert_eq!(interval_score(0.5, 0.0, 1.0, 0.05), 1.0);
        assert!((interval_score(-0.1, 0.0, 1.0, 0.05) - (1.0 + 40.0 * 0.1)).abs() < 1e-12);
        assert!((interval_score(1.5, 0.0, 1.0, 0.5) - (1.0 + 4.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert!((quantile_sorted(&s, 0.025) - 1.075).abs() < 1e-15);
    }

    #[test]
    fn coverage_and_mismatch() {
        let y = vec![0.0, 10.0];
        let draws = DMatrix::from_fn(21, 2, |j, _| j as f64 / 20.0);
        let ens = PredictiveEnsemble::new(draws).unwrap();
        let b = summary_metrics(&y, &ens, &ScoreConfig::default()).unwrap();
        // y=0 sits below the 2.5% quantile (0.025), y=10 above the 97.5% one.
        assert_eq!(b.coverage, 0.0);
        assert!(summary_metrics(&[1.0], &ens, &ScoreConfig::default()).is_err());
    }

    #[test]
    fn rescaling() {
        assert_eq!(rescale_to_unit_variance(&[0.5, 2.0], 1.0).values, vec![0.5, 2.0]);
        assert_eq!(rescale_to_unit_variance(&[0.5], 2.0).values, vec![0.25]);
        let g = rescale_to_unit_variance(&[0.5], 0.0);
        assert_eq!(g.values, vec![0.5]);
        assert!(g.guarded);
        assert!(!rescale_to_unit_variance(&[0.5], 2.0).guarded);
    }

    #[test]
    fn relative_score_examples() {
        let cfg = ScoreConfig::default();
        let m: BTreeMap<String, f64> = [("a".to_string(), 10.0), ("b".to_string(), 0.0)].into();
        let r = relative_scores(&m, &cfg).unwrap();
        assert_eq!(r["b"], 1.0);
        assert_eq!(r["a"], 100.0);
        let m: BTreeMap<String, f64> = [("a".to_string(), 0.002), ("b".to_string(), 0.001)].into();
        let r = relative_scores(&m, &cfg).unwrap();
        assert!((r["a"] - 1.5).abs() < 1e-12);
        assert!(relative_scores(&BTreeMap::new(), &cfg).is_err());
    }

    #[test]
    fn score_config_validation() {
        assert!(ScoreConfig::default().validate().is_ok());
        let bad = ScoreConfig {
            cap: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScoreConfig {
            interval_alpha: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
