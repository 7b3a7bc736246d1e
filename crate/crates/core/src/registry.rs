//! Named test functions with native domains and automatic unit-cube scaling.
//!
//! Callers always pass points in `[0, 1]^p`; each row is mapped affinely to
//! the native box, `lo + u * (hi - lo)`, before the evaluator runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions as f;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    Stationary,
    Nonstationary,
    Smooth,
    Discontinuous,
    HasInertInputs,
    Constant,
    LowEffectiveDim,
}

impl fmt::Display for Tag {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::Stationary => "stationary",
            Tag::Nonstationary => "nonstationary",
            Tag::Smooth => "smooth",
            Tag::Discontinuous => "discontinuous",
            Tag::HasInertInputs => "has-inert-inputs",
            Tag::Constant => "constant",
            Tag::LowEffectiveDim => "low-effective-dim",
        };
        fm.write_str(s)
    }
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub domain: Vec<(f64, f64)>,
    pub tags: BTreeSet<Tag>,
    /// Zero-based coordinates the output does not depend on.
    pub inert_inputs: Vec<usize>,
    /// `None` marks a name reserved without a closed form.
    pub evaluator: Option<Evaluator>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("tags", &self.tags)
            .field("inert_inputs", &self.inert_inputs)
            .field("implemented", &self.evaluator.is_some())
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        domain: Vec<(f64, f64)>,
        tags: impl IntoIterator<Item = Tag>,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            tags: tags.into_iter().collect(),
            inert_inputs: Vec::new(),
            evaluator: Some(Arc::new(evaluator)),
        }
    }

    pub fn unit_cube(
        name: impl Into<String>,
        p: usize,
        tags: impl IntoIterator<Item = Tag>,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, vec![(0.0, 1.0); p], tags, evaluator)
    }

    pub fn stub(name: impl Into<String>, p: usize) -> Self {
        Self {
            name: name.into(),
            domain: vec![(0.0, 1.0); p],
            tags: BTreeSet::new(),
            inert_inputs: Vec::new(),
            evaluator: None,
        }
    }

    pub fn with_inert(mut self, inert: impl IntoIterator<Item = usize>) -> Self {
        self.inert_inputs = inert.into_iter().collect();
        self.tags.insert(Tag::HasInertInputs);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.domain.len()
    }

    pub fn is_implemented(&self) -> bool {
        self.evaluator.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains('|') {
            return Err(Error::Domain(format!("invalid function name {:?}", self.name)));
        }
        if self.domain.is_empty() {
            return Err(Error::Domain(format!("{}: input_dim must be positive", self.name)));
        }
        for (j, &(lo, hi)) in self.domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Domain(format!(
                    "{}: bound {j} must be finite with lo < hi, got ({lo}, {hi})",
                    self.name
                )));
            }
        }
        if let Some(&j) = self.inert_inputs.iter().find(|&&j| j >= self.input_dim()) {
            return Err(Error::Domain(format!("{}: inert input {j} out of range", self.name)));
        }
        Ok(())
    }

    /// Maps a unit-cube point to the native box.
    pub fn to_native(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.domain)
            .map(|(&ui, &(lo, hi))| lo + ui * (hi - lo))
            .collect()
    }

    pub fn eval_native(&self, x: &[f64]) -> Result<f64> {
        match &self.evaluator {
            Some(ev) => Ok(ev(x)),
            None => Err(Error::NotImplemented(format!(
                "`{}` has no published closed form; register an evaluator for it",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub input_dim: usize,
    pub domain: Vec<(f64, f64)>,
    pub tags: BTreeSet<Tag>,
    pub implemented: bool,
}

/// Conjunctive filter for [`FunctionRegistry::list`].
#[derive(Debug, Clone, Default)]
pub struct FunctionFilter {
    pub input_dim: Option<usize>,
    pub tags: BTreeSet<Tag>,
    pub implemented_only: bool,
}

impl FunctionFilter {
    pub fn dim(p: usize) -> Self {
        Self {
            input_dim: Some(p),
            ..Self::default()
        }
    }

    pub fn tagged(tags: impl IntoIterator<Item = Tag>) -> Self {
        Self {
            tags: tags.into_iter().collect(),
            ..Self::default()
        }
    }

    fn accepts(&self, f: &TestFunction) -> bool {
        self.input_dim.is_none_or(|p| f.input_dim() == p)
            && self.tags.is_subset(&f.tags)
            && (!self.implemented_only || f.is_implemented())
    }
}

#[derive(Debug, Clone, Default)]
pub struct FunctionRegistry {
    functions: BTreeMap<String, TestFunction>,
}

impl FunctionRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry preloaded with the shipped functions.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        for func in builtin_functions() {
            reg.register(func).expect("builtin functions are valid and distinct");
        }
        reg
    }

    pub fn register(&mut self, func: TestFunction) -> Result<()> {
        func.validate()?;
        if self.functions.contains_key(&func.name) {
            return Err(Error::Conflict(format!("function `{}` already registered", func.name)));
        }
        self.functions.insert(func.name.clone(), func);
        Ok(())
    }

    /// Attaches an evaluator to a reserved stub name.
    pub fn supply_evaluator(
        &mut self,
        name: &str,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<()> {
        let func = self
            .functions
            .get_mut(name)
            .ok_or_else(|| Error::NotFound(format!("function `{name}`")))?;
        if func.is_implemented() {
            return Err(Error::Conflict(format!("function `{name}` already has an evaluator")));
        }
        func.evaluator = Some(Arc::new(evaluator));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&TestFunction> {
        self.functions
            .get(name)
            .ok_or_else(|| Error::NotFound(format!("function `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    /// Names in lexicographic order, filtered conjunctively.
    pub fn list(&self, filter: &FunctionFilter) -> Vec<String> {
        self.functions
            .values()
            .filter(|f| filter.accepts(f))
            .map(|f| f.name.clone())
            .collect()
    }

    pub fn list_all(&self) -> Vec<String> {
        self.list(&FunctionFilter::default())
    }

    /// Evaluates `name` at every row of `x`, a matrix of unit-cube points.
    pub fn evaluate(&self, name: &str, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let func = self.get(name)?;
        if x.ncols() != func.input_dim() {
            return Err(Error::Domain(format!(
                "`{name}` takes {} inputs, got a matrix with {} columns",
                func.input_dim(),
                x.ncols()
            )));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!(
                "inputs must lie in [0, 1]; found {bad}"
            )));
        }
        let mut row = vec![0.0; x.ncols()];
        (0..x.nrows())
            .map(|i| {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = x[(i, j)];
                }
                func.eval_native(&func.to_native(&row))
            })
            .collect()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.functions
            .values()
            .map(|f| ManifestEntry {
                name: f.name.clone(),
                input_dim: f.input_dim(),
                domain: f.domain.clone(),
                tags: f.tags.clone(),
                implemented: f.is_implemented(),
            })
            .collect()
    }

    pub fn manifest_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.manifest())?)
    }
}

fn builtin_functions() -> Vec<TestFunction> {
    use std::f64::consts::PI;
    use Tag::*;

    vec![
        TestFunction::new(
            "borehole",
            vec![
                (0.05, 0.15),
                (100.0, 50_000.0),
                (63_070.0, 115_600.0),
                (990.0, 1110.0),
                (63.1, 116.0),
                (700.0, 820.0),
                (1120.0, 1680.0),
                (9855.0, 12_045.0),
            ],
            [Smooth, Stationary, LowEffectiveDim],
            f::borehole,
        ),
        TestFunction::new("ishigami", vec![(-PI, PI); 3], [Smooth, Nonstationary], f::ishigami),
        TestFunction::unit_cube("friedman", 5, [Smooth, Stationary], f::friedman),
        TestFunction::unit_cube("friedman10", 10, [Smooth, Stationary, LowEffectiveDim], f::friedman)
            .with_inert(5..10),
        TestFunction::unit_cube("friedman20", 20, [Smooth, Stationary, LowEffectiveDim], f::friedman)
            .with_inert(5..20),
        TestFunction::new(
            "piston",
            vec![
                (30.0, 60.0),
                (0.005, 0.020),
                (0.002, 0.010),
                (1000.0, 5000.0),
                (90_000.0, 110_000.0),
                (290.0, 296.0),
                (340.0, 360.0),
            ],
            [Smooth, Nonstationary],
            f::piston,
        ),
        TestFunction::new(
            "otl_circuit",
            vec![
                (50.0, 150.0),
                (25.0, 70.0),
                (0.5, 3.0),
                (1.2, 2.5),
                (0.25, 1.2),
                (50.0, 300.0),
            ],
            [Smooth, Stationary],
            f::otl_circuit,
        ),
        TestFunction::new(
            "wingweight",
            vec![
                (150.0, 200.0),
                (220.0, 300.0),
                (6.0, 10.0),
                (-10.0, 10.0),
                (16.0, 45.0),
                (0.5, 1.0),
                (0.08, 0.18),
                (2.5, 6.0),
                (1700.0, 2500.0),
                (0.025, 0.08),
            ],
            [Smooth, Stationary, LowEffectiveDim],
            f::wing_weight,
        ),
        TestFunction::new(
            "robot_arm",
            [vec![(0.0, 2.0 * PI); 4], vec![(0.0, 1.0); 4]].concat(),
            [Smooth, Nonstationary],
            f::robot_arm,
        ),
        TestFunction::new("grlee12", vec![(0.5, 2.5)], [Smooth, Nonstationary], f::gramacy_lee),
        TestFunction::unit_cube("dette_pepelyshev", 3, [Smooth, Nonstationary], f::dette_pepelyshev),
        TestFunction::new("michalewicz", vec![(0.0, PI); 2], [Smooth, Nonstationary], f::michalewicz),
        TestFunction::unit_cube("damped_cosine", 1, [Smooth, Stationary], f::damped_cosine),
        TestFunction::new("welch", vec![(-0.5, 0.5); 20], [Smooth, Nonstationary, LowEffectiveDim], f::welch)
            .with_inert([7, 15]),
        TestFunction::unit_cube("lim_polynomial", 2, [Smooth, Stationary], f::lim_polynomial),
        TestFunction::new("oakley_ohagan_1d", vec![(-4.0, 4.0)], [Smooth, Stationary], f::oakley_ohagan_1d),
        TestFunction::unit_cube("step_2d", 2, [Discontinuous], f::step_2d),
        TestFunction::unit_cube("const_fn", 2, [Constant, Smooth, Stationary], f::constant_one)
            .with_inert([0, 1]),
        TestFunction::unit_cube("noise_only", 1, [Constant, Smooth, Stationary], f::constant_zero)
            .with_inert([0]),
        TestFunction::stub("foursquare", 2),
        TestFunction::stub("squiggle", 2),
        TestFunction::stub("star2", 2),
        TestFunction::stub("ignition", 10),
    ]
}
