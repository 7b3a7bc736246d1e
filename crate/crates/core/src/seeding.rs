//! Scenario identity and the polynomial hash that turns it into a seed.
//!
//! Canonical strings:
//!
//! ```text
//! synthetic: <fname>|<n_train>|<NSR>|<design_type>|rep=<replication>
//! dataset:   <dname>|<cv_type>|<fold_size>|fold=<fold>
//! ```
//!
//! `NSR` is printed as the shortest decimal that round-trips to the same
//! `f64` (`0.1`, not `0.100000`; zero prints as `0`). The seed is the
//! polynomial hash of the UTF-8 bytes, `sum(b_i * 31^(L-1-i)) mod (2^61 - 1)`,
//! evaluated with Horner's rule.
//!
//! Stages inside one scenario draw from offset streams: design `seed + 1`,
//! noise `seed + 2`, emulator fit `seed + 3`, emulator predict `seed + 4`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::DesignType;
use crate::error::{Error, Result};

pub const HASH_BASE: u64 = 31;
pub const HASH_MODULUS: u64 = (1 << 61) - 1;

/// Polynomial hash of `bytes` with base 31 modulo the Mersenne prime 2^61 - 1.
pub fn poly_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |h, &b| {
        ((h as u128 * HASH_BASE as u128 + b as u128) % HASH_MODULUS as u128) as u64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CvType {
    #[serde(rename = "cross_validation")]
    CrossValidation,
    #[serde(rename = "bootstrap")]
    Bootstrap,
}

impl CvType {
    pub fn as_str(self) -> &'static str {
        match self {
            CvType::CrossValidation => "cross_validation",
            CvType::Bootstrap => "bootstrap",
        }
    }
}

impl fmt::Display for CvType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CvType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_validation" | "cv" => Ok(CvType::CrossValidation),
            "bootstrap" => Ok(CvType::Bootstrap),
            other => Err(Error::Config(format!("unknown cv_type `{other}`"))),
        }
    }
}

/// The full identity of one benchmark cell, minus the emulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Synthetic {
        fname: String,
        n_train: usize,
        nsr: f64,
        design_type: DesignType,
        replication: u32,
    },
    Dataset {
        dname: String,
        cv_type: CvType,
        fold_size: usize,
        fold: u32,
    },
}

impl Scenario {
    pub fn synthetic(
        fname: impl Into<String>,
        n_train: usize,
        nsr: f64,
        design_type: DesignType,
        replication: u32,
    ) -> Self {
        Scenario::Synthetic {
            fname: fname.into(),
            n_train,
            nsr,
            design_type,
            replication,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Synthetic {
                fname,
                n_train,
                nsr,
                replication,
                ..
            } => {
                check_name(fname)?;
                if *n_train == 0 {
                    return Err(Error::Domain("n_train must be at least 1".into()));
                }
                if !nsr.is_finite() || *nsr < 0.0 {
                    return Err(Error::Domain(format!("NSR must be finite and >= 0, got {nsr}")));
                }
                if *replication == 0 {
                    return Err(Error::Domain("replication must be positive".into()));
                }
            }
            Scenario::Dataset {
                dname,
                fold_size,
                fold,
                ..
            } => {
                check_name(dname)?;
                if *fold == 0 {
                    return Err(Error::Domain("fold must be positive".into()));
                }
                if *fold_size == 0 {
                    return Err(Error::Domain("fold_size must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn canonical_string(&self) -> String {
        match self {
            Scenario::Synthetic {
                fname,
                n_train,
                nsr,
                design_type,
                replication,
            } => format!(
                "{fname}|{n_train}|{}|{design_type}|rep={replication}",
                format_real(*nsr)
            ),
            Scenario::Dataset {
                dname,
                cv_type,
                fold_size,
                fold,
            } => format!("{dname}|{cv_type}|{fold_size}|fold={fold}"),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.validate()?;
        Ok(poly_hash(self.canonical_string().as_bytes()))
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Parses a canonical string back into a scenario.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('|').collect();
        let bad = |what: &str| Error::Config(format!("cannot parse scenario `{s}`: {what}"));
        let int = |v: &str, what: &str| v.parse::<u64>().map_err(|_| bad(what));
        let scenario = match parts.as_slice() {
            [fname, n, nsr, design, rep] => Scenario::Synthetic {
                fname: fname.to_string(),
                n_train: int(n, "n_train is not an integer")? as usize,
                nsr: nsr.parse().map_err(|_| bad("NSR is not a number"))?,
                design_type: design.parse()?,
                replication: int(rep.strip_prefix("rep=").ok_or_else(|| bad("expected rep=<k>"))?, "bad replication")?
                    .try_into()
                    .map_err(|_| bad("replication out of range"))?,
            },
            [dname, cv, size, fold] => Scenario::Dataset {
                dname: dname.to_string(),
                cv_type: cv.parse()?,
                fold_size: int(size, "fold_size is not an integer")? as usize,
                fold: int(fold.strip_prefix("fold=").ok_or_else(|| bad("expected fold=<k>"))?, "bad fold")?
                    .try_into()
                    .map_err(|_| bad("fold out of range"))?,
            },
            _ => return Err(bad("expected 5 fields (synthetic) or 4 fields (dataset)")),
        };
        scenario.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(scenario)
    }
}

/// Shortest round-trip decimal, with negative zero folded to `0`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains('|') {
        return Err(Error::Domain(format!(
            "scenario names must be nonempty and free of `|`: {name:?}"
        )));
    }
    Ok(())
}

pub fn canonical_string(s: &Scenario) -> String {
    s.canonical_string()
}

pub fn scenario_seed(s: &Scenario) -> Result<u64> {
    s.seed()
}

/// Offsets of the per-stage substreams derived from a scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub design: u64,
    pub noise: u64,
    pub fit: u64,
    pub predict: u64,
}

impl StageSeeds {
    pub fn from_scenario_seed(seed: u64) -> Self {
        Self {
            design: seed.wrapping_add(1),
            noise: seed.wrapping_add(2),
            fit: seed.wrapping_add(3),
            predict: seed.wrapping_add(4),
        }
    }
}

/// Seed of the shared test design for one function: independent of the
/// training configuration so every method and replication scores against the
/// same points.
pub fn test_design_seed(fname: &str, n_test: usize) -> u64 {
    poly_hash(format!("{fname}|test|n_test={n_test}").as_bytes())
}

/// Seed of the fold assignment for a dataset study; shared by all folds.
pub fn data_seed(dname: &str, cv_type: CvType, folds: usize) -> u64 {
    poly_hash(format!("{dname}|{cv_type}|folds={folds}").as_bytes())
}
