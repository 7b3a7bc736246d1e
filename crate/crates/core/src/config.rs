//! TOML study configuration.
//!
//! ```toml
//! out = "results"
//! M = 1000
//! n_test = 1000
//! workers = 4
//! timeout = 600.0
//!
//! [[emulators]]
//! method = "local_nn_gp"
//! variant_label = "nn100"
//! hyperparameters = { neighbors = 100 }
//!
//! [synthetic]
//! functions = ["borehole", "ishigami"]
//! n_train = [500]
//! NSR = [0.0, 0.1]
//! design_type = "LHS"
//! replications = [1, 2, 3]
//!
//! [dataset]
//! name = "concrete"
//! path = "concrete.csv"
//! response = "strength"
//! cv_type = "cross_validation"
//! folds = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::design::DesignType;
use crate::emulators::EmulatorSpec;
use crate::error::{Error, Result};
use crate::harness::{DataStudy, Harness, SimStudy, DEFAULT_DRAWS, DEFAULT_N_TEST};
use crate::metrics::ScoreConfig;
use crate::seeding::CvType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticGrid {
    pub functions: Vec<String>,
    pub n_train: Vec<usize>,
    #[serde(rename = "NSR", default = "default_nsr")]
    pub nsr: Vec<f64>,
    #[serde(default = "default_design")]
    pub design_type: DesignType,
    #[serde(default = "default_reps")]
    pub replications: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub response: String,
    #[serde(default = "default_cv")]
    pub cv_type: CvType,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(rename = "M", default = "default_draws")]
    pub m: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,
    pub emulators: Vec<EmulatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub score: ScoreConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_nsr() -> Vec<f64> {
    vec![0.0]
}

fn default_design() -> DesignType {
    DesignType::Lhs
}

fn default_reps() -> Vec<u32> {
    vec![1]
}

fn default_cv() -> CvType {
    CvType::CrossValidation
}

fn default_folds() -> usize {
    10
}

fn default_draws() -> usize {
    DEFAULT_DRAWS
}

fn default_n_test() -> usize {
    DEFAULT_N_TEST
}

impl StudyConfig {
    pub fn new(emulators: Vec<EmulatorSpec>) -> Self {
        Self {
            out: None,
            m: DEFAULT_DRAWS,
            n_test: DEFAULT_N_TEST,
            workers: None,
            timeout: None,
            emulators,
            synthetic: None,
            dataset: None,
            score: ScoreConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves a relative dataset path against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let (Some(d), Some(dir)) = (cfg.dataset.as_mut(), path.parent()) {
            if d.path.is_relative() {
                d.path = dir.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    /// The synthetic study described by this config, with `workers`
    /// defaulting to 1.
    pub fn sim_study(&self) -> Result<SimStudy> {
        let g = self
            .synthetic
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [synthetic] section".into()))?;
        Ok(SimStudy {
            specs: self.emulators.clone(),
            fnames: g.functions.clone(),
            n_train: g.n_train.clone(),
            nsr: g.nsr.clone(),
            design_type: g.design_type,
            replications: g.replications.clone(),
            m: self.m,
            n_test: self.n_test,
            workers: self.workers.unwrap_or(1),
            timeout: self.timeout,
            score: self.score.clone(),
        })
    }

    pub fn data_study(&self) -> Result<DataStudy> {
        let d = self
            .dataset
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [dataset] section".into()))?;
        Ok(DataStudy {
            specs: self.emulators.clone(),
            cv_type: d.cv_type,
            folds: d.folds,
            m: self.m,
            workers: self.workers.unwrap_or(1),
            timeout: self.timeout,
            score: self.score.clone(),
        })
    }

    /// Checks names against the registries and the grid for validity
    /// without running anything.
    pub fn validate(&self, harness: &Harness) -> Result<()> {
        if self.synthetic.is_none() && self.dataset.is_none() {
            return Err(Error::Config("config needs a [synthetic] or [dataset] section".into()));
        }
        if self.synthetic.is_some() {
            harness.validate_sim_study(&self.sim_study()?)?;
        }
        if let Some(d) = &self.dataset {
            if d.cv_type == CvType::CrossValidation && d.folds < 2 {
                return Err(Error::Config("cross validation needs folds >= 2".into()));
            }
            for spec in &self.emulators {
                harness.emulators.build(spec)?;
            }
        }
        self.score.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
out = "results"
M = 200
workers = 2
timeout = 30.5

[[emulators]]
method = "baseline_t"

[[emulators]]
method = "local_nn_gp"
variant_label = "nn100"
hyperparameters = { neighbors = 100 }

[synthetic]
functions = ["borehole", "ishigami"]
n_train = [500]
NSR = [0.0, 0.1]
replications = [1, 7]

[score]
epsilon = 0.01
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = StudyConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.m, 200);
        assert_eq!(cfg.n_test, DEFAULT_N_TEST);
        assert_eq!(cfg.emulators[1].label(), "local_nn_gp_nn100");
        assert_eq!(cfg.score.epsilon, 0.01);
        assert_eq!(cfg.score.cap, 100.0);
        let g = cfg.synthetic.as_ref().unwrap();
        assert_eq!(g.design_type, DesignType::Lhs);
        let back = StudyConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate(&Harness::default()).unwrap();
        let s = cfg.sim_study().unwrap();
        assert_eq!(s.scenarios().len(), 8);
        assert_eq!(s.workers, 2);
    }

    #[test]
    fn rejects_unknown_keys_and_names() {
        assert!(StudyConfig::from_toml_str("emulators = []\nbogus = 1\n").is_err());
        let mut cfg = StudyConfig::from_toml_str(EXAMPLE).unwrap();
        cfg.synthetic.as_mut().unwrap().functions.push("nonesuch".into());
        let err = cfg.validate(&Harness::default()).unwrap_err();
        assert!(err.is_user_error() && err.to_string().contains("nonesuch"));
        let mut cfg = StudyConfig::from_toml_str(EXAMPLE).unwrap();
        cfg.emulators[0].hyperparameters.insert("nope".into(), 1.0);
        assert!(cfg.validate(&Harness::default()).is_err());
    }

    #[test]
    fn relative_dataset_paths_follow_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.toml");
        std::fs::write(
            &path,
            "emulators = [{ method = \"blm\" }]\n[dataset]\nname = \"d\"\npath = \"d.csv\"\nresponse = \"y\"\n",
        )
        .unwrap();
        let cfg = StudyConfig::load(&path).unwrap();
        assert_eq!(cfg.dataset.unwrap().path, dir.path().join("d.csv"));
    }
}
