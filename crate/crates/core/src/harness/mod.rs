//! Simulation and dataset studies: scenario grids, fallback handling, timing
//! and result tables.

mod data;
mod table;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignType;
use crate::emulators::{self, Emulator, EmulatorError, EmulatorRegistry, EmulatorSpec, BaselineT, EXTERNAL_METHOD};
use crate::error::{Error, Result};
use crate::metrics::{population_sd, population_variance, summary_metrics, PredictiveEnsemble, ScoreConfig};
use crate::registry::FunctionRegistry;
use crate::rng::SplitMix64;
use crate::seeding::{data_seed, format_real, test_design_seed, CvType, Scenario, StageSeeds};

pub use data::{fold_splits, load_dataset_csv, read_dataset_csv, Dataset, MinMaxScaler, Split};
pub use table::{
    filter_sim_study, join_sim_study, FailureType, Filter, ResultRow, ResultTable, TableKind, DATASET_KEYS,
    FAILURE_COLUMN, METRIC_COLUMNS, MISSING, SYNTHETIC_KEYS, TIMING_COLUMNS,
};

pub const DEFAULT_DRAWS: usize = 1000;
pub const DEFAULT_N_TEST: usize = 1000;

/// Extra column names written for a score configuration, in order.
pub fn extra_columns(score: &ScoreConfig) -> Vec<String> {
    let mut cols = vec!["CRPS_median".to_string()];
    cols.extend(score.crps_quantiles.iter().map(|q| format!("CRPS_q{}", format_real(*q))));
    cols.push("coverage".into());
    cols.push("interval_score".into());
    cols
}

/// A synthetic study: every spec on every point of the scenario grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudy {
    pub specs: Vec<EmulatorSpec>,
    pub fnames: Vec<String>,
    pub n_train: Vec<usize>,
    pub nsr: Vec<f64>,
    pub design_type: DesignType,
    pub replications: Vec<u32>,
    pub m: usize,
    pub n_test: usize,
    pub workers: usize,
    /// Seconds allowed per fit or predict call.
    pub timeout: Option<f64>,
    pub score: ScoreConfig,
}

impl Default for SimStudy {
    fn default() -> Self {
        Self {
            specs: Vec::new(),
            fnames: Vec::new(),
            n_train: Vec::new(),
            nsr: vec![0.0],
            design_type: DesignType::Lhs,
            replications: vec![1],
            m: DEFAULT_DRAWS,
            n_test: DEFAULT_N_TEST,
            workers: 1,
            timeout: None,
            score: ScoreConfig::default(),
        }
    }
}

impl SimStudy {
    /// Scenarios in table order: function, then training size, then NSR, then replication.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for f in &self.fnames {
            for &n in &self.n_train {
                for &nsr in &self.nsr {
                    for &r in &self.replications {
                        out.push(Scenario::synthetic(f.clone(), n, nsr, self.design_type, r));
                    }
                }
            }
        }
        out
    }
}

/// A dataset study: every spec on every fold of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStudy {
    pub specs: Vec<EmulatorSpec>,
    pub cv_type: CvType,
    pub folds: usize,
    pub m: usize,
    pub workers: usize,
    pub timeout: Option<f64>,
    pub score: ScoreConfig,
}

impl Default for DataStudy {
    fn default() -> Self {
        Self {
            specs: Vec::new(),
            cv_type: CvType::CrossValidation,
            folds: 10,
            m: DEFAULT_DRAWS,
            workers: 1,
            timeout: None,
            score: ScoreConfig::default(),
        }
    }
}

/// Canonical string and seed of one scenario, for run manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub scenario: String,
    pub seed: u64,
}

pub fn seeds_audit(scenarios: &[Scenario]) -> Result<Vec<SeedRecord>> {
    scenarios
        .iter()
        .map(|s| {
            Ok(SeedRecord {
                scenario: s.canonical_string(),
                seed: s.seed()?,
            })
        })
        .collect()
}

/// Runs `study` with the built-in functions and emulators.
pub fn run_sim_study(study: &SimStudy) -> Result<ResultTable> {
    Harness::default().run_sim_study(study)
}

pub fn run_sim_study_data(dataset: &Dataset, study: &DataStudy) -> Result<ResultTable> {
    Harness::default().run_sim_study_data(dataset, study)
}

/// Study runner bound to a function and an emulator registry.
#[derive(Debug, Clone)]
pub struct Harness {
    pub functions: FunctionRegistry,
    pub emulators: EmulatorRegistry,
}

struct Prepared {
    label: String,
    emulator: Arc<dyn Emulator>,
}

struct Settings<'a> {
    m: usize,
    timeout: Option<f64>,
    score: &'a ScoreConfig,
    extras: &'a [String],
}

struct Data {
    scenario: Scenario,
    seeds: StageSeeds,
    x: DMatrix<f64>,
    y: Vec<f64>,
    x_test: Arc<DMatrix<f64>>,
    y_test: Arc<Vec<f64>>,
    ref_sd: f64,
}

impl Default for Harness {
    fn default() -> Self {
        Self::new(FunctionRegistry::builtin(), EmulatorRegistry::builtin())
    }
}

impl Harness {
    pub fn new(functions: FunctionRegistry, emulators: EmulatorRegistry) -> Self {
        Self { functions, emulators }
    }

    fn prepare_specs(&self, specs: &[EmulatorSpec], timeout: Option<f64>) -> Result<Vec<Prepared>> {
        if specs.is_empty() {
            return Err(Error::Config("a study needs at least one emulator spec".into()));
        }
        if let Some(t) = timeout {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("timeout must be > 0 seconds, got {t}")));
            }
        }
        let mut labels = HashSet::new();
        specs
            .iter()
            .map(|spec| {
                let label = spec.label();
                if !labels.insert(label.clone()) {
                    return Err(Error::Config(format!("emulator label `{label}` appears twice")));
                }
                let mut spec = spec.clone();
                if let (Some(t), true) = (timeout, spec.method == EXTERNAL_METHOD) {
                    spec.hyperparameters.entry("timeout".into()).or_insert(t);
                }
                Ok(Prepared {
                    label,
                    emulator: self.emulators.build(&spec)?,
                })
            })
            .collect()
    }

    fn check_functions(&self, fnames: &[String]) -> Result<()> {
        for f in fnames {
            let func = self.functions.get(f)?;
            if !func.is_implemented() {
                return Err(Error::NotImplemented(format!(
                    "test function `{f}` is listed but has no evaluator"
                )));
            }
        }
        Ok(())
    }

    pub fn validate_sim_study(&self, study: &SimStudy) -> Result<()> {
        let nonempty = [
            ("fnames", study.fnames.is_empty()),
            ("n_train", study.n_train.is_empty()),
            ("NSR", study.nsr.is_empty()),
            ("replications", study.replications.is_empty()),
        ];
        if let Some((name, _)) = nonempty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("`{name}` must not be empty")));
        }
        self.check_functions(&study.fnames)?;
        self.prepare_specs(&study.specs, study.timeout)?;
        check_common(study.m, study.workers, &study.score)?;
        if study.n_test == 0 {
            return Err(Error::Config("n_test must be at least 1".into()));
        }
        for s in study.scenarios() {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// One row per (spec, scenario), ordered by scenario and then by spec.
    pub fn run_sim_study(&self, study: &SimStudy) -> Result<ResultTable> {
        self.validate_sim_study(study)?;
        let prepared = self.prepare_specs(&study.specs, study.timeout)?;
        let pool = worker_pool(study.workers)?;
        let extras = extra_columns(&study.score);
        let settings = Settings {
            m: study.m,
            timeout: study.timeout,
            score: &study.score,
            extras: &extras,
        };
        pool.install(|| {
            let tests: Vec<(String, Arc<DMatrix<f64>>, Arc<Vec<f64>>)> = study
                .fnames
                .par_iter()
                .map(|f| {
                    let (x, y) = self.test_set(f, study.n_test)?;
                    Ok((f.clone(), Arc::new(x), Arc::new(y)))
                })
                .collect::<Result<_>>()?;
            let tests: HashMap<String, (Arc<DMatrix<f64>>, Arc<Vec<f64>>)> =
                tests.into_iter().map(|(f, x, y)| (f, (x, y))).collect();
            let data: Vec<Data> = study
                .scenarios()
                .into_par_iter()
                .map(|s| {
                    let (x_test, y_test) = tests[scenario_fname(&s)].clone();
                    self.training_data(s, x_test, y_test)
                })
                .collect::<Result<_>>()?;
            run_cells(&data, &prepared, &settings, TableKind::Synthetic)
        })
    }

    /// The shared maximin test design of `fname` and its noise-free responses.
    pub fn test_set(&self, fname: &str, n_test: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let p = self.functions.get(fname)?.input_dim();
        let design = DesignType::MaximinLhs.generate(n_test, p, test_design_seed(fname, n_test))?;
        let y = self.functions.evaluate(fname, &design.points)?;
        Ok((design.points, y))
    }

    /// Training inputs and responses of a synthetic scenario.
    pub fn training_set(&self, scenario: &Scenario) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let Scenario::Synthetic {
            fname,
            n_train,
            nsr,
            design_type,
            ..
        } = scenario
        else {
            return Err(Error::Domain("training_set needs a synthetic scenario".into()));
        };
        let seeds = StageSeeds::from_scenario_seed(scenario.seed()?);
        let p = self.functions.get(fname)?.input_dim();
        let design = design_type.generate(*n_train, p, seeds.design)?;
        let mut y = self.functions.evaluate(fname, &design.points)?;
        if *nsr > 0.0 {
            let sigma = (nsr * population_variance(&y)).sqrt();
            let mut rng = SplitMix64::new(seeds.noise);
            for v in &mut y {
                *v += sigma * rng.normal();
            }
        }
        Ok((design.points, y))
    }

    fn training_data(&self, scenario: Scenario, x_test: Arc<DMatrix<f64>>, y_test: Arc<Vec<f64>>) -> Result<Data> {
        let (x, y) = self.training_set(&scenario)?;
        let ref_sd = population_sd(&y_test);
        Ok(Data {
            seeds: StageSeeds::from_scenario_seed(scenario.seed()?),
            scenario,
            x,
            y,
            x_test,
            y_test,
            ref_sd,
        })
    }

    /// One row per (spec, fold), ordered by fold and then by spec. Predictors
    /// are min/max scaled on each training fold; scores are rescaled by the
    /// training-fold response sd.
    pub fn run_sim_study_data(&self, dataset: &Dataset, study: &DataStudy) -> Result<ResultTable> {
        let prepared = self.prepare_specs(&study.specs, study.timeout)?;
        check_common(study.m, study.workers, &study.score)?;
        if dataset.name.is_empty() || dataset.name.contains('|') {
            return Err(Error::Config(format!("invalid dataset name {:?}", dataset.name)));
        }
        if dataset.x.nrows() != dataset.y.len() {
            return Err(Error::Ingest("predictor and response row counts differ".into()));
        }
        let splits = fold_splits(
            dataset.n(),
            study.cv_type,
            study.folds,
            data_seed(&dataset.name, study.cv_type, study.folds),
        )?;
        let pool = worker_pool(study.workers)?;
        let extras = extra_columns(&study.score);
        let settings = Settings {
            m: study.m,
            timeout: study.timeout,
            score: &study.score,
            extras: &extras,
        };
        pool.install(|| {
            let data: Vec<Data> = splits
                .par_iter()
                .map(|s| fold_data(dataset, study.cv_type, s))
                .collect::<Result<_>>()?;
            run_cells(&data, &prepared, &settings, TableKind::Dataset)
        })
    }
}

fn fold_data(dataset: &Dataset, cv_type: CvType, split: &Split) -> Result<Data> {
    let scenario = Scenario::Dataset {
        dname: dataset.name.clone(),
        cv_type,
        fold_size: split.test.len(),
        fold: split.fold,
    };
    let x_raw = data::select_rows(&dataset.x, &split.train);
    let scaler = MinMaxScaler::fit(&x_raw);
    let y: Vec<f64> = split.train.iter().map(|&i| dataset.y[i]).collect();
    let y_test: Vec<f64> = split.test.iter().map(|&i| dataset.y[i]).collect();
    Ok(Data {
        seeds: StageSeeds::from_scenario_seed(scenario.seed()?),
        scenario,
        x: scaler.transform(&x_raw),
        ref_sd: population_sd(&y),
        y,
        x_test: Arc::new(scaler.transform(&data::select_rows(&dataset.x, &split.test))),
        y_test: Arc::new(y_test),
    })
}

fn scenario_fname(s: &Scenario) -> &str {
    match s {
        Scenario::Synthetic { fname, .. } => fname,
        Scenario::Dataset { dname, .. } => dname,
    }
}

fn check_common(m: usize, workers: usize, score: &ScoreConfig) -> Result<()> {
    if m < 2 {
        return Err(Error::Config(format!("M must be at least 2, got {m}")));
    }
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    score.validate()
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

fn run_cells(data: &[Data], specs: &[Prepared], settings: &Settings, kind: TableKind) -> Result<ResultTable> {
    let cells: Vec<(usize, usize)> = (0..data.len())
        .flat_map(|d| (0..specs.len()).map(move |s| (d, s)))
        .collect();
    let rows: Vec<ResultRow> = cells
        .into_par_iter()
        .map(|(d, s)| run_cell(&data[d], &specs[s], settings))
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(kind, settings.extras.to_vec());
    for r in rows {
        table.push(r)?;
    }
    Ok(table)
}

fn within(timeout: Option<f64>, secs: f64, stage: emulators::Stage) -> Result<(), EmulatorError> {
    match timeout {
        Some(t) if secs > t => Err(EmulatorError::timeout(stage, t)),
        _ => Ok(()),
    }
}

fn run_cell(d: &Data, spec: &Prepared, settings: &Settings) -> Result<ResultRow> {
    let start = Instant::now();
    let fitted = emulators::fit(spec.emulator.as_ref(), &spec.label, &d.x, &d.y, d.seeds.fit);
    let t_fit = start.elapsed().as_secs_f64();
    let mut t_pred = 0.0;
    let outcome = fitted
        .and_then(|model| {
            within(settings.timeout, t_fit, emulators::Stage::Fit)?;
            let t0 = Instant::now();
            let ens = model.predict(&d.x_test, settings.m, d.seeds.predict);
            t_pred = t0.elapsed().as_secs_f64();
            let ens = ens?;
            within(settings.timeout, t_pred, emulators::Stage::Pred)?;
            Ok(ens)
        });
    let (ensemble, failure_type) = match outcome {
        Ok(e) => (e, FailureType::None),
        Err(err) => {
            log::warn!(
                "{} failed at {} on {}: {}; substituting {}",
                spec.label,
                err.stage,
                d.scenario.canonical_string(),
                err.msg,
                emulators::FALLBACK_METHOD
            );
            (fallback(d, settings.m)?, err.stage.into())
        }
    };
    let bundle = summary_metrics(&d.y_test, &ensemble, settings.score)?;
    let (scaled, guarded) = bundle.rescaled(d.ref_sd);
    if guarded {
        log::warn!(
            "reference sd of {} is below the floor; scores left unscaled",
            d.scenario.canonical_string()
        );
    }
    let t_tot = start.elapsed().as_secs_f64();
    let mut extras = BTreeMap::new();
    let mut values = vec![scaled.crps_median];
    values.extend(&scaled.crps_quantiles);
    values.push(scaled.coverage);
    values.push(scaled.interval_score);
    for (c, v) in settings.extras.iter().zip(values) {
        extras.insert(c.clone(), v);
    }
    log::info!("{} {} done in {t_tot:.3} s", spec.label, d.scenario.canonical_string());
    Ok(ResultRow {
        method: spec.label.clone(),
        scenario: d.scenario.clone(),
        rmse: scaled.rmse,
        fvu: scaled.fvu,
        crps: scaled.crps_mean,
        t_fit,
        t_pred,
        t_tot,
        failure_type,
        extras,
    })
}

fn fallback(d: &Data, m: usize) -> Result<PredictiveEnsemble> {
    let model = emulators::fit(&BaselineT, emulators::FALLBACK_METHOD, &d.x, &d.y, d.seeds.fit)?;
    Ok(model.predict(&d.x_test, m, d.seeds.predict)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::crps_fair;

    fn small(specs: Vec<EmulatorSpec>) -> SimStudy {
        SimStudy {
            specs,
            fnames: vec!["ishigami".into(), "friedman".into()],
            n_train: vec![20],
            nsr: vec![0.0, 0.1],
            replications: vec![1, 2, 3],
            m: 50,
            n_test: 40,
            ..SimStudy::default()
        }
    }

    fn four_specs() -> Vec<EmulatorSpec> {
        vec![
            EmulatorSpec::new("baseline_t"),
            EmulatorSpec::new("blm"),
            EmulatorSpec::new("rffgp"),
            EmulatorSpec::new("baseline_t").with_label("copy"),
        ]
    }

    #[test]
    fn grid_row_count_and_order() {
        let t = run_sim_study(&small(four_specs())).unwrap();
        assert_eq!(t.len(), 48);
        let first: Vec<&str> = t.rows()[..4].iter().map(|r| r.method.as_str()).collect();
        assert_eq!(first, ["baseline_t", "blm", "rffgp", "baseline_t_copy"]);
        assert_eq!(t.rows()[0].scenario, Scenario::synthetic("ishigami", 20, 0.0, DesignType::Lhs, 1));
        assert_eq!(t.rows()[47].scenario, Scenario::synthetic("friedman", 20, 0.1, DesignType::Lhs, 3));
        for r in t.rows() {
            assert!(r.t_tot >= r.t_fit + r.t_pred - 1e-6);
            assert_eq!(r.failure_type, FailureType::None);
            assert!(r.crps.is_finite() && r.rmse.is_finite());
        }
    }

    #[test]
    fn scheduling_independence() {
        let mut s = small(four_specs());
        let a = run_sim_study(&s).unwrap().without_timing();
        s.workers = 3;
        let b = run_sim_study(&s).unwrap().without_timing();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_free_training_matches_direct_evaluation() {
        let h = Harness::default();
        let s = Scenario::synthetic("borehole", 30, 0.0, DesignType::Lhs, 4);
        let (x, y) = h.training_set(&s).unwrap();
        let seeds = StageSeeds::from_scenario_seed(s.seed().unwrap());
        let d = DesignType::Lhs.generate(30, 8, seeds.design).unwrap();
        assert_eq!(x, d.points);
        assert_eq!(y, h.functions.evaluate("borehole", &d.points).unwrap());
        let noisy = Scenario::synthetic("borehole", 30, 0.5, DesignType::Lhs, 4);
        let (xn, yn) = h.training_set(&noisy).unwrap();
        assert_ne!(yn, h.functions.evaluate("borehole", &xn).unwrap());
    }

    #[test]
    fn baseline_row_matches_manual_pipeline() {
        let study = SimStudy {
            specs: vec![EmulatorSpec::new("baseline_t")],
            fnames: vec!["friedman".into()],
            n_train: vec![25],
            replications: vec![2],
            m: 30,
            n_test: 20,
            ..SimStudy::default()
        };
        let t = run_sim_study(&study).unwrap();
        let row = &t.rows()[0];
        let h = Harness::default();
        let (x, y) = h.training_set(&row.scenario).unwrap();
        let (xt, yt) = h.test_set("friedman", 20).unwrap();
        let seeds = StageSeeds::from_scenario_seed(row.scenario.seed().unwrap());
        let model = emulators::fit(&BaselineT, "baseline_t", &x, &y, seeds.fit).unwrap();
        let ens = model.predict(&xt, 30, seeds.predict).unwrap();
        let sd = population_sd(&yt);
        let mean_crps = (0..20).map(|i| crps_fair(yt[i], &ens.column(i)).unwrap()).sum::<f64>() / 20.0;
        assert!((row.crps - mean_crps / sd).abs() < 1e-12);
    }

    #[test]
    fn unknown_names_fail_before_running() {
        let mut s = small(vec![EmulatorSpec::new("baseline_t")]);
        s.fnames.push("no_such_function".into());
        assert!(matches!(run_sim_study(&s), Err(Error::NotFound(m)) if m.contains("no_such_function")));
        let s = small(vec![EmulatorSpec::new("nope")]);
        assert!(matches!(run_sim_study(&s), Err(Error::NotFound(_))));
        let s = small(vec![EmulatorSpec::new("blm"), EmulatorSpec::new("blm")]);
        assert!(matches!(run_sim_study(&s), Err(Error::Config(_))));
    }

    struct Failing(emulators::Stage);

    struct FailingModel;

    impl emulators::Predictor for FailingModel {
        fn predict(&self, _: &DMatrix<f64>, _: usize, _: u64) -> Result<DMatrix<f64>, EmulatorError> {
            Err(EmulatorError::pred("boom"))
        }
    }

    impl Emulator for Failing {
        fn fit(&self, _: &DMatrix<f64>, _: &[f64], _: u64) -> Result<Box<dyn emulators::Predictor>, EmulatorError> {
            match self.0 {
                emulators::Stage::Fit => Err(EmulatorError::fit("boom")),
                emulators::Stage::Pred => Ok(Box::new(FailingModel)),
            }
        }
    }

    #[test]
    fn failures_fall_back_to_baseline() {
        let mut reg = EmulatorRegistry::builtin();
        reg.register("fails_fit", |_| Ok(Arc::new(Failing(emulators::Stage::Fit)) as Arc<dyn Emulator>))
            .unwrap();
        reg.register("fails_pred", |_| Ok(Arc::new(Failing(emulators::Stage::Pred)) as Arc<dyn Emulator>))
            .unwrap();
        let h = Harness::new(FunctionRegistry::builtin(), reg);
        let mut s = small(vec![
            EmulatorSpec::new("baseline_t"),
            EmulatorSpec::new("fails_fit"),
            EmulatorSpec::new("fails_pred"),
        ]);
        s.fnames.truncate(1);
        let t = h.run_sim_study(&s).unwrap();
        for chunk in t.rows().chunks(3) {
            assert_eq!(chunk[0].failure_type, FailureType::None);
            assert_eq!(chunk[1].failure_type, FailureType::Fit);
            assert_eq!(chunk[2].failure_type, FailureType::Pred);
            assert_eq!(chunk[1].crps, chunk[0].crps);
            assert_eq!(chunk[2].crps, chunk[0].crps);
        }
    }

    #[test]
    fn dataset_study_rows() {
        let n = 60;
        let mut rng = SplitMix64::new(3);
        let x = DMatrix::from_fn(n, 2, |_, _| 10.0 * rng.uniform());
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] + 0.5 * x[(i, 1)]).collect();
        let ds = Dataset {
            name: "toy".into(),
            predictors: vec!["a".into(), "b".into()],
            response: "y".into(),
            x,
            y,
        };
        let study = DataStudy {
            specs: vec![EmulatorSpec::new("baseline_t"), EmulatorSpec::new("blm")],
            folds: 7,
            m: 40,
            ..DataStudy::default()
        };
        let t = run_sim_study_data(&ds, &study).unwrap();
        assert_eq!(t.len(), 14);
        assert_eq!(t.kind(), TableKind::Dataset);
        let sizes: usize = t.rows().iter().step_by(2).map(|r| match r.scenario {
            Scenario::Dataset { fold_size, .. } => fold_size,
            _ => unreachable!(),
        }).sum();
        assert_eq!(sizes, n);
        assert!(t.rows()[1].crps < t.rows()[0].crps);
        assert_eq!(t.without_timing(), run_sim_study_data(&ds, &study).unwrap().without_timing());
    }
}
