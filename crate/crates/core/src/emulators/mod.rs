//! The probabilistic-emulator interface, the built-in reference emulators and
//! the subprocess bridge for third-party methods.
//!
//! An emulator is fitted on unit-cube inputs and returns, for any set of test
//! inputs, an `M x m` matrix of predictive draws. All randomness inside `fit`
//! and `predict` comes from the seed passed in.

mod baseline;
mod blm;
mod external;
mod gp;
pub mod gp_core;
mod local;
mod rbcm;
mod rffgp;
pub mod sizes;
mod sod;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::metrics::PredictiveEnsemble;

pub use baseline::BaselineT;
pub use blm::Blm;
pub use external::External;
pub use gp::Gp;
pub use local::LocalNnGp;
pub use rbcm::{k_medoids, medoid_cost, Rbcm};
pub use rffgp::RffGp;
pub use sod::{farthest_point_subset, SodGp};

/// Names of the built-in emulators, in listing order.
pub const BUILTIN_METHODS: [&str; 7] = [
    "baseline_t",
    "blm",
    "gp",
    "local_nn_gp",
    "rbcm",
    "rffgp",
    "sod_gp",
];

/// Method name of the subprocess bridge.
pub const EXTERNAL_METHOD: &str = "external";

/// Method substituted when another emulator fails.
pub const FALLBACK_METHOD: &str = "baseline_t";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Fit,
    Pred,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Fit => "fit",
            Stage::Pred => "pred",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Failure signal consumed by the harness fallback.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{stage} failure{}: {msg}", if *.timed_out { " (timeout)" } else { "" })]
pub struct EmulatorError {
    pub stage: Stage,
    pub msg: String,
    pub timed_out: bool,
}

impl EmulatorError {
    pub fn fit(msg: impl Into<String>) -> Self {
        Self {
            stage: Stage::Fit,
            msg: msg.into(),
            timed_out: false,
        }
    }

    pub fn pred(msg: impl Into<String>) -> Self {
        Self {
            stage: Stage::Pred,
            msg: msg.into(),
            timed_out: false,
        }
    }

    pub fn timeout(stage: Stage, seconds: f64) -> Self {
        Self {
            stage,
            msg: format!("exceeded the {seconds} s timeout"),
            timed_out: true,
        }
    }
}

/// One emulator configuration in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulatorSpec {
    pub method: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hyperparameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_label: Option<String>,
    /// Program and arguments; only used by the `external` method.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
}

impl EmulatorSpec {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            hyperparameters: BTreeMap::new(),
            variant_label: None,
            command: Vec::new(),
        }
    }

    pub fn external(command: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            command: command.into_iter().map(Into::into).collect(),
            ..Self::new(EXTERNAL_METHOD)
        }
    }

    pub fn with_hyper(mut self, key: impl Into<String>, value: f64) -> Self {
        self.hyperparameters.insert(key.into(), value);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.variant_label = Some(label.into());
        self
    }

    /// The `method` column value: `method` or `method_label`.
    pub fn label(&self) -> String {
        match &self.variant_label {
            Some(l) => format!("{}_{l}", self.method),
            None => self.method.clone(),
        }
    }
}

/// Fitted state able to produce predictive draws.
pub trait Predictor: Send + Sync {
    /// `M x m` draws at the rows of `x`.
    fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError>;
}

/// A method that can be fitted to unit-cube data.
pub trait Emulator: Send + Sync {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>, EmulatorError>;
}

pub struct FittedModel {
    pub method: String,
    pub fit_seed: u64,
    pub fit_seconds: f64,
    p: usize,
    state: Box<dyn Predictor>,
}

impl fmt::Debug for FittedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedModel")
            .field("method", &self.method)
            .field("fit_seed", &self.fit_seed)
            .field("fit_seconds", &self.fit_seconds)
            .finish_non_exhaustive()
    }
}

impl FittedModel {
    pub fn input_dim(&self) -> usize {
        self.p
    }

    /// Draws `m` samples from the predictive distribution at each row of `x`.
    pub fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<PredictiveEnsemble, EmulatorError> {
        if x.ncols() != self.p {
            return Err(EmulatorError::pred(format!(
                "test inputs have {} columns, model was fitted on {}",
                x.ncols(),
                self.p
            )));
        }
        if m < 2 {
            return Err(EmulatorError::pred(format!("need at least 2 draws, got {m}")));
        }
        let draws = self.state.predict(x, m, seed)?;
        if draws.shape() != (m, x.nrows()) {
            return Err(EmulatorError::pred(format!(
                "expected {m}x{} draws, got {}x{}",
                x.nrows(),
                draws.nrows(),
                draws.ncols()
            )));
        }
        PredictiveEnsemble::new(draws).map_err(|e| EmulatorError::pred(e.to_string()))
    }
}

fn check_training(x: &DMatrix<f64>, y: &[f64]) -> Result<(), EmulatorError> {
    if x.nrows() != y.len() {
        return Err(EmulatorError::fit(format!(
            "{} input rows but {} responses",
            x.nrows(),
            y.len()
        )));
    }
    if y.is_empty() || x.ncols() == 0 {
        return Err(EmulatorError::fit("empty training data"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EmulatorError::fit("training data must be finite"));
    }
    Ok(())
}

type Factory = Arc<dyn Fn(&EmulatorSpec) -> Result<Arc<dyn Emulator>> + Send + Sync>;

/// Maps method names to constructors. Holds the built-ins and the external
/// bridge; user emulators can be added with [`EmulatorRegistry::register`].
#[derive(Clone)]
pub struct EmulatorRegistry {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for EmulatorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.factories.keys()).finish()
    }
}

impl Default for EmulatorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn factory<E, F>(make: F) -> Factory
where
    E: Emulator + 'static,
    F: Fn(&EmulatorSpec) -> Result<E> + Send + Sync + 'static,
{
    Arc::new(move |spec| Ok(Arc::new(make(spec)?) as Arc<dyn Emulator>))
}

impl EmulatorRegistry {
    pub fn builtin() -> Self {
        let mut factories = BTreeMap::new();
        factories.insert("baseline_t".to_string(), factory(BaselineT::from_spec));
        factories.insert("blm".to_string(), factory(Blm::from_spec));
        factories.insert("gp".to_string(), factory(Gp::from_spec));
        factories.insert("local_nn_gp".to_string(), factory(LocalNnGp::from_spec));
        factories.insert("rbcm".to_string(), factory(Rbcm::from_spec));
        factories.insert("rffgp".to_string(), factory(RffGp::from_spec));
        factories.insert("sod_gp".to_string(), factory(SodGp::from_spec));
        factories.insert(EXTERNAL_METHOD.to_string(), factory(External::from_spec));
        Self { factories }
    }

    /// Adds a user emulator. Its specs carry `method = name`.
    pub fn register(
        &mut self,
        name: impl Into<String>,
        make: impl Fn(&EmulatorSpec) -> Result<Arc<dyn Emulator>> + Send + Sync + 'static,
    ) -> Result<()> {
        let name = name.into();
        if self.factories.contains_key(&name) {
            return Err(Error::Conflict(format!("emulator `{name}` is already registered")));
        }
        self.factories.insert(name, Arc::new(make));
        Ok(())
    }

    pub fn methods(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn contains(&self, method: &str) -> bool {
        self.factories.contains_key(method)
    }

    /// Validates `spec` and constructs its emulator.
    pub fn build(&self, spec: &EmulatorSpec) -> Result<Arc<dyn Emulator>> {
        let make = self
            .factories
            .get(&spec.method)
            .ok_or_else(|| Error::NotFound(format!("unknown emulator `{}`", spec.method)))?;
        make(spec)
    }
}

/// Fits `emulator` and records the fit time.
pub fn fit(
    emulator: &dyn Emulator,
    method: &str,
    x: &DMatrix<f64>,
    y: &[f64],
    seed: u64,
) -> Result<FittedModel, EmulatorError> {
    check_training(x, y)?;
    let start = Instant::now();
    let state = emulator.fit(x, y, seed)?;
    Ok(FittedModel {
        method: method.to_string(),
        fit_seed: seed,
        fit_seconds: start.elapsed().as_secs_f64(),
        p: x.ncols(),
        state,
    })
}

/// Reads a hyperparameter that must be a positive integer.
fn count_param(spec: &EmulatorSpec, key: &str) -> Result<Option<usize>> {
    match spec.hyperparameters.get(key) {
        None => Ok(None),
        Some(&v) if v >= 1.0 && v.fract() == 0.0 && v < 1e9 => Ok(Some(v as usize)),
        Some(&v) => Err(Error::Config(format!(
            "{}: hyperparameter `{key}` must be a positive integer, got {v}",
            spec.method
        ))),
    }
}

fn reject_unknown_params(spec: &EmulatorSpec, allowed: &[&str]) -> Result<()> {
    match spec.hyperparameters.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!(
            "{}: unknown hyperparameter `{k}` (allowed: {})",
            spec.method,
            if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
        ))),
        None => Ok(()),
    }
}

/// Responses shifted and scaled to zero mean and unit population variance.
#[derive(Debug, Clone)]
struct Standardized {
    mean: f64,
    sd: f64,
    values: Vec<f64>,
}

impl Standardized {
    fn new(y: &[f64]) -> Self {
        let mean = crate::metrics::mean(y);
        let sd = crate::metrics::population_sd(y);
        let values = if sd > 0.0 {
            y.iter().map(|v| (v - mean) / sd).collect()
        } else {
            vec![0.0; y.len()]
        };
        Self { mean, sd, values }
    }

    fn is_constant(&self) -> bool {
        !(self.sd > 1e-12 * self.mean.abs().max(1.0))
    }
}

/// Predicts a known constant. Used when the training responses do not vary.
struct ConstantPredictor(f64);

impl Predictor for ConstantPredictor {
    fn predict(&self, x: &DMatrix<f64>, m: usize, _seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        Ok(DMatrix::from_element(m, x.nrows(), self.0))
    }
}

/// Independent Gaussian draws per test point, on the original response scale.
fn gaussian_draws(means: &[f64], vars: &[f64], scale: &Standardized, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = crate::rng::SplitMix64::new(seed);
    let mut out = DMatrix::zeros(m, means.len());
    for (i, (mu, v)) in means.iter().zip(vars).enumerate() {
        let sd = v.max(0.0).sqrt();
        for j in 0..m {
            out[(j, i)] = scale.mean + scale.sd * (mu + sd * rng.normal());
        }
    }
    out
}
