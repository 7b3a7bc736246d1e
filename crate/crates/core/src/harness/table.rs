//! Result rows and tables, their CSV form, and the join/filter operations.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::DesignType;
use crate::error::{Error, Result};
use crate::seeding::{format_real, CvType, Scenario};

pub const SYNTHETIC_KEYS: [&str; 6] = ["method", "fname", "n_train", "NSR", "design_type", "replication"];
pub const DATASET_KEYS: [&str; 5] = ["method", "dname", "cv_type", "fold", "fold_size"];
pub const METRIC_COLUMNS: [&str; 3] = ["RMSE", "FVU", "CRPS"];
pub const TIMING_COLUMNS: [&str; 3] = ["t_fit", "t_pred", "t_tot"];
pub const FAILURE_COLUMN: &str = "failure_type";

/// Written for undefined values such as FVU on a constant test response.
pub const MISSING: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureType {
    None,
    Fit,
    Pred,
}

impl FailureType {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureType::None => "none",
            FailureType::Fit => "fit",
            FailureType::Pred => "pred",
        }
    }
}

impl fmt::Display for FailureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FailureType::None),
            "fit" => Ok(FailureType::Fit),
            "pred" => Ok(FailureType::Pred),
            other => Err(Error::Schema(format!("failure_type must be none, fit or pred, got `{other}`"))),
        }
    }
}

impl From<crate::emulators::Stage> for FailureType {
    fn from(s: crate::emulators::Stage) -> Self {
        match s {
            crate::emulators::Stage::Fit => FailureType::Fit,
            crate::emulators::Stage::Pred => FailureType::Pred,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Synthetic,
    Dataset,
}

impl TableKind {
    pub fn key_columns(self) -> &'static [&'static str] {
        match self {
            TableKind::Synthetic => &SYNTHETIC_KEYS,
            TableKind::Dataset => &DATASET_KEYS,
        }
    }

    fn of(s: &Scenario) -> Self {
        match s {
            Scenario::Synthetic { .. } => TableKind::Synthetic,
            Scenario::Dataset { .. } => TableKind::Dataset,
        }
    }
}

/// One emulator x scenario record. Scale-carrying metrics are already
/// rescaled to unit response variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub scenario: Scenario,
    pub rmse: f64,
    /// `NaN` when undefined.
    pub fvu: f64,
    pub crps: f64,
    pub t_fit: f64,
    pub t_pred: f64,
    pub t_tot: f64,
    pub failure_type: FailureType,
    /// Optional columns such as `CRPS_median`, keyed by column name.
    pub extras: BTreeMap<String, f64>,
}

impl ResultRow {
    /// `(method, canonical scenario string)`; unique within a table.
    pub fn key(&self) -> (String, String) {
        (self.method.clone(), self.scenario.canonical_string())
    }

    pub fn extra(&self, column: &str) -> Option<f64> {
        self.extras.get(column).copied()
    }

    /// Scenario identity without the emulator, for grouping rows.
    pub fn scenario_key(&self) -> String {
        self.scenario.canonical_string()
    }

    /// Function or dataset name.
    pub fn problem(&self) -> &str {
        match &self.scenario {
            Scenario::Synthetic { fname, .. } => fname,
            Scenario::Dataset { dname, .. } => dname,
        }
    }

    fn cell(&self, column: &str) -> Option<String> {
        let s = &self.scenario;
        let v = match (column, s) {
            ("method", _) => self.method.clone(),
            ("fname", Scenario::Synthetic { fname, .. }) => fname.clone(),
            ("n_train", Scenario::Synthetic { n_train, .. }) => n_train.to_string(),
            ("NSR", Scenario::Synthetic { nsr, .. }) => format_real(*nsr),
            ("design_type", Scenario::Synthetic { design_type, .. }) => design_type.to_string(),
            ("replication", Scenario::Synthetic { replication, .. }) => replication.to_string(),
            ("dname", Scenario::Dataset { dname, .. }) => dname.clone(),
            ("cv_type", Scenario::Dataset { cv_type, .. }) => cv_type.to_string(),
            ("fold", Scenario::Dataset { fold, .. }) => fold.to_string(),
            ("fold_size", Scenario::Dataset { fold_size, .. }) => fold_size.to_string(),
            ("RMSE", _) => format_value(self.rmse),
            ("FVU", _) => format_value(self.fvu),
            ("CRPS", _) => format_value(self.crps),
            ("t_fit", _) => format_value(self.t_fit),
            ("t_pred", _) => format_value(self.t_pred),
            ("t_tot", _) => format_value(self.t_tot),
            (FAILURE_COLUMN, _) => self.failure_type.to_string(),
            (other, _) => return self.extras.get(other).map(|v| format_value(*v)),
        };
        Some(v)
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        MISSING.to_string()
    } else {
        format_real(v)
    }
}

fn parse_value(s: &str, column: &str, line: usize) -> Result<f64> {
    if s == MISSING || s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse()
        .map_err(|_| Error::Schema(format!("row {line}: column `{column}` is not a number: `{s}`")))
}

fn parse_int<T: FromStr>(s: &str, column: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Schema(format!("row {line}: column `{column}` is not an integer: `{s}`")))
}

/// One equality condition `column = value`. Numbers compare numerically, so
/// `NSR=0` matches a stored `0.0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    pub value: String,
}

impl Filter {
    pub fn new(column: impl Into<String>, value: impl ToString) -> Self {
        Self {
            column: column.into(),
            value: value.to_string(),
        }
    }

    fn matches(&self, cell: &str) -> bool {
        match (cell.parse::<f64>(), self.value.parse::<f64>()) {
            (Ok(a), Ok(b)) => a == b,
            _ => cell == self.value,
        }
    }
}

impl FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((c, v)) if !c.trim().is_empty() => Ok(Filter::new(c.trim(), v.trim())),
            _ => Err(Error::Config(format!("filter must look like column=value, got `{s}`"))),
        }
    }
}

/// Rows of one kind (synthetic or dataset) sharing a column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    kind: TableKind,
    extra_columns: Vec<String>,
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(kind: TableKind, extra_columns: Vec<String>) -> Self {
        Self {
            kind,
            extra_columns,
            rows: Vec::new(),
        }
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn extra_columns(&self) -> &[String] {
        &self.extra_columns
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<ResultRow> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_column(&self, column: &str) -> bool {
        self.columns().iter().any(|c| c == column)
    }

    /// Full CSV header in order.
    pub fn columns(&self) -> Vec<String> {
        self.kind
            .key_columns()
            .iter()
            .chain(METRIC_COLUMNS.iter())
            .chain(TIMING_COLUMNS.iter())
            .chain(std::iter::once(&FAILURE_COLUMN))
            .map(|s| s.to_string())
            .chain(self.extra_columns.iter().cloned())
            .collect()
    }

    pub fn push(&mut self, row: ResultRow) -> Result<()> {
        if TableKind::of(&row.scenario) != self.kind {
            return Err(Error::Schema(format!(
                "cannot add a {:?} row to a {:?} table",
                TableKind::of(&row.scenario),
                self.kind
            )));
        }
        if let Some(c) = self.extra_columns.iter().find(|c| !row.extras.contains_key(*c)) {
            return Err(Error::Schema(format!("row lacks column `{c}`")));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Sorted distinct method names.
    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = self.rows.iter().map(|r| r.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Copy with the timing columns zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.rows {
            r.t_fit = 0.0;
            r.t_pred = 0.0;
            r.t_tot = 0.0;
        }
        t
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let cols = self.columns();
        w.write_record(&cols)?;
        for r in &self.rows {
            w.write_record(cols.iter().map(|c| r.cell(c).unwrap_or_else(|| MISSING.to_string())))?;
        }
        w.flush().map_err(|e| Error::io("<results csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    /// Parses a results CSV. The key columns decide the table kind; columns
    /// beyond the fixed schema become extras.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let has = |c: &str| header.iter().any(|h| h == c);
        let kind = if has("fname") {
            TableKind::Synthetic
        } else if has("dname") {
            TableKind::Dataset
        } else {
            return Err(Error::Schema("results need an `fname` or `dname` column".into()));
        };
        let required: Vec<&str> = kind
            .key_columns()
            .iter()
            .chain(METRIC_COLUMNS.iter())
            .chain(TIMING_COLUMNS.iter())
            .chain(std::iter::once(&FAILURE_COLUMN))
            .copied()
            .collect();
        let missing: Vec<&str> = required.iter().copied().filter(|c| !has(c)).collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))));
        }
        let other_keys = match kind {
            TableKind::Synthetic => &DATASET_KEYS[1..],
            TableKind::Dataset => &SYNTHETIC_KEYS[1..],
        };
        if let Some(c) = header.iter().find(|h| other_keys.contains(&h.as_str())) {
            return Err(Error::Schema(format!("column `{c}` does not belong in a {kind:?} table")));
        }
        let extra_columns: Vec<String> = header
            .iter()
            .filter(|h| !required.contains(&h.as_str()))
            .cloned()
            .collect();
        let idx: BTreeMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
        let mut table = ResultTable::new(kind, extra_columns.clone());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = line + 2;
            let get = |c: &str| rec.get(idx[c]).unwrap_or("");
            let scenario = match kind {
                TableKind::Synthetic => Scenario::Synthetic {
                    fname: get("fname").to_string(),
                    n_train: parse_int(get("n_train"), "n_train", line)?,
                    nsr: parse_value(get("NSR"), "NSR", line)?,
                    design_type: get("design_type")
                        .parse::<DesignType>()
                        .map_err(|e| Error::Schema(format!("row {line}: {e}")))?,
                    replication: parse_int(get("replication"), "replication", line)?,
                },
                TableKind::Dataset => Scenario::Dataset {
                    dname: get("dname").to_string(),
                    cv_type: get("cv_type")
                        .parse::<CvType>()
                        .map_err(|e| Error::Schema(format!("row {line}: {e}")))?,
                    fold: parse_int(get("fold"), "fold", line)?,
                    fold_size: parse_int(get("fold_size"), "fold_size", line)?,
                },
            };
            let mut extras = BTreeMap::new();
            for c in &extra_columns {
                extras.insert(c.clone(), parse_value(get(c), c, line)?);
            }
            table.rows.push(ResultRow {
                method: get("method").to_string(),
                scenario,
                rmse: parse_value(get("RMSE"), "RMSE", line)?,
                fvu: parse_value(get("FVU"), "FVU", line)?,
                crps: parse_value(get("CRPS"), "CRPS", line)?,
                t_fit: parse_value(get("t_fit"), "t_fit", line)?,
                t_pred: parse_value(get("t_pred"), "t_pred", line)?,
                t_tot: parse_value(get("t_tot"), "t_tot", line)?,
                failure_type: get(FAILURE_COLUMN)
                    .parse()
                    .map_err(|e: Error| Error::Schema(format!("row {line}: {e}")))?,
                extras,
            });
        }
        Ok(table)
    }
}

fn check_compatible(a: &ResultTable, b: &ResultTable) -> Result<()> {
    let (ca, cb) = (a.columns(), b.columns());
    if ca == cb {
        return Ok(());
    }
    let only_a: Vec<&String> = ca.iter().filter(|c| !cb.contains(c)).collect();
    let only_b: Vec<&String> = cb.iter().filter(|c| !ca.contains(c)).collect();
    if only_a.is_empty() && only_b.is_empty() {
        return Err(Error::Schema(format!(
            "column order differs: [{}] vs [{}]",
            ca.join(", "),
            cb.join(", ")
        )));
    }
    let names = |v: Vec<&String>| if v.is_empty() { "-".to_string() } else { v.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ") };
    Err(Error::Schema(format!(
        "incompatible result schemas; only in first: {}; only in second: {}",
        names(only_a),
        names(only_b)
    )))
}

/// Row union of `a` and `b`. A `(method, scenario)` present in both keeps the
/// row from `a` and logs a warning.
pub fn join_sim_study(a: &ResultTable, b: &ResultTable) -> Result<ResultTable> {
    check_compatible(a, b)?;
    let mut out = a.clone();
    let mut seen: HashSet<(String, String)> = a.rows.iter().map(ResultRow::key).collect();
    let mut dups = 0usize;
    for r in &b.rows {
        if seen.insert(r.key()) {
            out.rows.push(r.clone());
        } else {
            dups += 1;
            log::warn!(
                "duplicate result for method `{}` in scenario `{}`; keeping the first table's row",
                r.method,
                r.scenario.canonical_string()
            );
        }
    }
    if dups > 0 {
        log::warn!("join dropped {dups} duplicate rows");
    }
    Ok(out)
}

/// Rows satisfying every filter.
pub fn filter_sim_study(t: &ResultTable, filters: &[Filter]) -> Result<ResultTable> {
    let cols = t.columns();
    if let Some(f) = filters.iter().find(|f| !cols.contains(&f.column)) {
        return Err(Error::Schema(format!(
            "unknown filter column `{}` (available: {})",
            f.column,
            cols.join(", ")
        )));
    }
    let mut out = ResultTable::new(t.kind, t.extra_columns.clone());
    out.rows = t
        .rows
        .iter()
        .filter(|r| {
            filters
                .iter()
                .all(|f| r.cell(&f.column).is_some_and(|c| f.matches(&c)))
        })
        .cloned()
        .collect();
    Ok(out)
}
