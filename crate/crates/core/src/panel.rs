//! Balanced panels with block treatment, estimator output records, and their
//! file formats.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A balanced N x T panel. Rows are units, columns are periods.
///
/// Treatment is a rank-one block: unit `i` is treated in period `t` exactly
/// when `i` is in the treated set and `t >= cutoff` (0-based), so the first
/// `cutoff` periods are pre-treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    outcomes: DMatrix<f64>,
    treated: Vec<bool>,
    cutoff: usize,
    covariates: Vec<DMatrix<f64>>,
    unit_labels: Vec<String>,
    period_labels: Vec<String>,
}

impl PanelData {
    /// `treated_units` are 0-based row indices; `cutoff` is the number of
    /// pre-treatment periods.
    pub fn new(outcomes: DMatrix<f64>, treated_units: &[usize], cutoff: usize) -> Result<Self> {
        let (n, t) = outcomes.shape();
        let mut treated = vec![false; n];
        for &i in treated_units {
            if i >= n {
                return Err(Error::InvalidPanel(format!("treated unit {i} out of range 0..{n}")));
            }
            treated[i] = true;
        }
        let panel = Self {
            outcomes,
            treated,
            cutoff,
            covariates: Vec::new(),
            unit_labels: (1..=n).map(|i| i.to_string()).collect(),
            period_labels: (1..=t).map(|s| s.to_string()).collect(),
        };
        panel.validate()?;
        Ok(panel)
    }

    pub fn with_covariates(mut self, covariates: Vec<DMatrix<f64>>) -> Result<Self> {
        self.covariates = covariates;
        self.validate()?;
        Ok(self)
    }

    pub fn with_labels(mut self, units: Vec<String>, periods: Vec<String>) -> Result<Self> {
        if units.len() != self.n() || periods.len() != self.t() {
            return Err(Error::DimensionMismatch("label lengths do not match panel".into()));
        }
        self.unit_labels = units;
        self.period_labels = periods;
        Ok(self)
    }

    /// Same outcomes and covariates, different treated set.
    pub fn with_treated(&self, treated_units: &[usize]) -> Result<Self> {
        let mut treated = vec![false; self.n()];
        for &i in treated_units {
            if i >= self.n() {
                return Err(Error::InvalidPanel(format!("treated unit {i} out of range")));
            }
            treated[i] = true;
        }
        let panel = Self {
            treated,
            ..self.clone()
        };
        panel.validate()?;
        Ok(panel)
    }

    /// Same design, replaced outcome matrix.
    pub fn with_outcomes(&self, outcomes: DMatrix<f64>) -> Result<Self> {
        let panel = Self {
            outcomes,
            ..self.clone()
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        let (n, t) = self.outcomes.shape();
        let n1 = self.n1();
        if n1 == 0 {
            return Err(Error::InvalidPanel("no treated units".into()));
        }
        if n1 >= n {
            return Err(Error::InvalidPanel("no control units".into()));
        }
        if self.cutoff == 0 || self.cutoff >= t {
            return Err(Error::InvalidPanel(format!(
                "cutoff {} must satisfy 1 <= T0 < T = {t}",
                self.cutoff
            )));
        }
        if self.outcomes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (j, z) in self.covariates.iter().enumerate() {
            if z.shape() != (n, t) {
                return Err(Error::DimensionMismatch(format!(
                    "covariate {} is {:?}, expected ({n}, {t})",
                    j + 1,
                    z.shape()
                )));
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    pub fn outcomes(&self) -> &DMatrix<f64> {
        &self.outcomes
    }

    pub fn covariates(&self) -> &[DMatrix<f64>] {
        &self.covariates
    }

    pub fn unit_labels(&self) -> &[String] {
        &self.unit_labels
    }

    pub fn period_labels(&self) -> &[String] {
        &self.period_labels
    }

    pub fn n(&self) -> usize {
        self.outcomes.nrows()
    }

    pub fn t(&self) -> usize {
        self.outcomes.ncols()
    }

    /// Number of pre-treatment periods.
    pub fn t0(&self) -> usize {
        self.cutoff
    }

    pub fn t1(&self) -> usize {
        self.t() - self.cutoff
    }

    pub fn n1(&self) -> usize {
        self.treated.iter().filter(|&&d| d).count()
    }

    pub fn n0(&self) -> usize {
        self.n() - self.n1()
    }

    pub fn is_treated(&self, unit: usize) -> bool {
        self.treated[unit]
    }

    pub fn treated_units(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.treated[i]).collect()
    }

    pub fn control_units(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.treated[i]).collect()
    }

    /// d_i as a 0/1 vector of length N.
    pub fn unit_indicator(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.treated.iter().map(|&d| if d { 1.0 } else { 0.0 }))
    }

    /// d_t as a 0/1 vector of length T.
    pub fn period_indicator(&self) -> DVector<f64> {
        DVector::from_fn(self.t(), |s, _| if s >= self.cutoff { 1.0 } else { 0.0 })
    }

    pub fn is_treated_cell(&self, unit: usize, period: usize) -> bool {
        self.treated[unit] && period >= self.cutoff
    }
}

/// The N x T 0/1 treatment matrix, the outer product of the unit and period
/// indicators.
pub fn treatment_mask(panel: &PanelData) -> DMatrix<f64> {
    panel.unit_indicator() * panel.period_indicator().transpose()
}

/// Output of any ATT estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AttEstimate {
    pub att: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_period: Option<Vec<f64>>,
    /// N1 x T1 imputed untreated outcomes for treated cells.
    #[serde(default, with = "matrix_rows", skip_serializing_if = "Option::is_none")]
    pub counterfactuals: Option<DMatrix<f64>>,
    #[serde(default, with = "lossless_map")]
    pub diagnostics: BTreeMap<String, f64>,
}

impl AttEstimate {
    pub fn new(att: f64) -> Self {
        Self {
            att,
            ..Self::default()
        }
    }

    /// Estimate whose scalar ATT is the mean of the per-period effects.
    pub fn from_per_period(per_period: Vec<f64>) -> Self {
        let att = per_period.iter().sum::<f64>() / per_period.len() as f64;
        Self {
            att,
            per_period: Some(per_period),
            ..Self::default()
        }
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}

/// One serialized run: an estimate plus the provenance needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub estimator: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten)]
    pub estimate: AttEstimate,
}

pub fn save_result(doc: &ResultDocument, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_result(path: &Path) -> Result<ResultDocument> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

/// Column names of the long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSchema {
    pub unit: String,
    pub period: String,
    pub outcome: String,
    pub treatment: String,
    /// Covariate columns. `None` picks up `z1`, `z2`, ... as present.
    pub covariates: Option<Vec<String>>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            unit: "unit".into(),
            period: "period".into(),
            outcome: "y".into(),
            treatment: "d".into(),
            covariates: None,
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_number(raw: &str, column: &str, row: usize) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::NonNumeric {
        column: column.to_string(),
        row,
        value: raw.to_string(),
    })
}

fn parse_flag(raw: &str, column: &str, row: usize) -> Result<bool> {
    match raw.trim() {
        "1" | "1.0" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "0.0" | "false" | "FALSE" | "False" => Ok(false),
        _ => Err(Error::NonNumeric {
            column: column.to_string(),
            row,
            value: raw.to_string(),
        }),
    }
}

/// Reads a long-format CSV into a [`PanelData`].
///
/// Units and periods are indexed in order of first appearance. The treatment
/// column must describe a single adoption date shared by all treated units.
pub fn load_panel(path: &Path, schema: &ColumnSchema) -> Result<PanelData> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let unit_col = column_index(&headers, &schema.unit)?;
    let period_col = column_index(&headers, &schema.period)?;
    let y_col = column_index(&headers, &schema.outcome)?;
    let d_col = column_index(&headers, &schema.treatment)?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(names) => names.clone(),
        None => (1..)
            .map(|j| format!("z{j}"))
            .take_while(|name| headers.iter().any(|h| h.trim() == name))
            .collect(),
    };
    let cov_cols = cov_names
        .iter()
        .map(|name| column_index(&headers, name))
        .collect::<Result<Vec<_>>>()?;

    let mut unit_index: HashMap<String, usize> = HashMap::new();
    let mut period_index: HashMap<String, usize> = HashMap::new();
    let mut unit_labels = Vec::new();
    let mut period_labels = Vec::new();
    // (unit, period) -> (y, d, z...)
    let mut cells: HashMap<(usize, usize), (Option<f64>, bool, Vec<f64>)> = HashMap::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let row = row + 2; // header is line 1
        let unit = record.get(unit_col).unwrap_or("").to_string();
        let period = record.get(period_col).unwrap_or("").to_string();
        let ui = *unit_index.entry(unit.clone()).or_insert_with(|| {
            unit_labels.push(unit.clone());
            unit_labels.len() - 1
        });
        let pi = *period_index.entry(period.clone()).or_insert_with(|| {
            period_labels.push(period.clone());
            period_labels.len() - 1
        });
        let y_raw = record.get(y_col).unwrap_or("");
        let y = if y_raw.trim().is_empty() || y_raw.trim().eq_ignore_ascii_case("na") {
            None
        } else {
            Some(parse_number(y_raw, &schema.outcome, row)?)
        };
        let d = parse_flag(record.get(d_col).unwrap_or(""), &schema.treatment, row)?;
        let z = cov_cols
            .iter()
            .zip(&cov_names)
            .map(|(&c, name)| parse_number(record.get(c).unwrap_or(""), name, row))
            .collect::<Result<Vec<_>>>()?;
        if cells.insert((ui, pi), (y, d, z)).is_some() {
            return Err(Error::UnbalancedPanel(format!(
                "duplicate row for unit `{unit}` period `{period}`"
            )));
        }
    }

    let (n, t) = (unit_labels.len(), period_labels.len());
    if n == 0 || t == 0 {
        return Err(Error::InvalidPanel("empty file".into()));
    }
    let mut outcomes = DMatrix::zeros(n, t);
    let mut flags = vec![vec![false; t]; n];
    let mut covariates = vec![DMatrix::zeros(n, t); cov_cols.len()];
    for i in 0..n {
        for s in 0..t {
            let Some((y, d, z)) = cells.get(&(i, s)) else {
                return Err(Error::UnbalancedPanel(format!(
                    "unit `{}` has no row for period `{}`",
                    unit_labels[i], period_labels[s]
                )));
            };
            let Some(y) = y else {
                return Err(Error::MissingCell {
                    unit: unit_labels[i].clone(),
                    period: period_labels[s].clone(),
                });
            };
            outcomes[(i, s)] = *y;
            flags[i][s] = *d;
            for (j, zj) in z.iter().enumerate() {
                covariates[j][(i, s)] = *zj;
            }
        }
    }

    let (treated, cutoff) = block_structure(&flags, &unit_labels, &period_labels)?;
    PanelData::new(outcomes, &treated, cutoff)?
        .with_covariates(covariates)?
        .with_labels(unit_labels, period_labels)
}

/// Recovers (treated units, cutoff) from a 0/1 flag matrix, rejecting
/// anything that is not a rank-one block with a common adoption period.
fn block_structure(
    flags: &[Vec<bool>],
    units: &[String],
    periods: &[String],
) -> Result<(Vec<usize>, usize)> {
    let mut treated = Vec::new();
    let mut cutoff: Option<usize> = None;
    for (i, row) in flags.iter().enumerate() {
        let Some(first) = row.iter().position(|&d| d) else {
            continue;
        };
        if row[first..].iter().any(|&d| !d) {
            return Err(Error::NonBlockTreatment(format!(
                "unit `{}` leaves treatment after period `{}`",
                units[i], periods[first]
            )));
        }
        match cutoff {
            None => cutoff = Some(first),
            Some(c) if c != first => {
                return Err(Error::NonBlockTreatment(format!(
                    "unit `{}` adopts in period `{}`, others in `{}`",
                    units[i], periods[first], periods[c]
                )));
            }
            _ => {}
        }
        treated.push(i);
    }
    let cutoff = cutoff.ok_or_else(|| Error::InvalidPanel("no treated cells".into()))?;
    if cutoff == 0 {
        return Err(Error::NonBlockTreatment(
            "treatment starts in the first period; no pre-treatment data".into(),
        ));
    }
    Ok((treated, cutoff))
}

/// Writes a panel as long-format CSV using `schema`'s column names.
pub fn save_panel(panel: &PanelData, path: &Path, schema: &ColumnSchema) -> Result<()> {
    let cov_names: Vec<String> = match &schema.covariates {
        Some(names) if names.len() == panel.covariates().len() => names.clone(),
        Some(_) => {
            return Err(Error::DimensionMismatch(
                "schema covariate names do not match panel".into(),
            ))
        }
        None => (1..=panel.covariates().len()).map(|j| format!("z{j}")).collect(),
    };
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        schema.unit.clone(),
        schema.period.clone(),
        schema.outcome.clone(),
        schema.treatment.clone(),
    ];
    header.extend(cov_names);
    w.write_record(&header)?;
    for i in 0..panel.n() {
        for s in 0..panel.t() {
            let mut rec = vec![
                panel.unit_labels[i].clone(),
                panel.period_labels[s].clone(),
                panel.outcomes[(i, s)].to_string(),
                if panel.is_treated_cell(i, s) { "1" } else { "0" }.to_string(),
            ];
            rec.extend(panel.covariates.iter().map(|z| z[(i, s)].to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serializes an optional matrix as a list of rows.
mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref()
            .map(|m| {
                (0..m.nrows())
                    .map(|i| m.row(i).iter().copied().collect::<Vec<f64>>())
                    .collect::<Vec<_>>()
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        let rows: Option<Vec<Vec<f64>>> = Option::deserialize(d)?;
        rows.map(|rows| {
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(serde::de::Error::custom("ragged matrix"));
            }
            Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
        })
        .transpose()
    }
}

/// JSON has no infinities; non-finite diagnostics are written as strings.
mod lossless_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Value {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(k, &v)| {
                let v = if v.is_finite() {
                    Value::Number(v)
                } else if v.is_nan() {
                    Value::Text("nan".into())
                } else if v > 0.0 {
                    Value::Text("inf".into())
                } else {
                    Value::Text("-inf".into())
                };
                (k.clone(), v)
            })
            .collect::<BTreeMap<_, _>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw: BTreeMap<String, Value> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                let v = match v {
                    Value::Number(x) => x,
                    Value::Text(t) => match t.as_str() {
                        "nan" => f64::NAN,
                        "inf" => f64::INFINITY,
                        "-inf" => f64::NEG_INFINITY,
                        other => {
                            return Err(serde::de::Error::custom(format!("bad diagnostic `{other}`")))
                        }
                    },
                };
                Ok((k, v))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn minimal_block_panel() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "unit,period,y,d\n1,1,0.5,0\n1,2,0.7,0\n2,1,1.0,0\n2,2,3.0,1\n");
        let panel = load_panel(&p, &ColumnSchema::default()).unwrap();
        assert_eq!((panel.n(), panel.t(), panel.t0()), (2, 2, 1));
        assert_eq!(panel.treated_units(), vec![1]);
        assert_eq!(panel.unit_labels()[1], "2");
        assert_eq!(panel.outcomes()[(1, 1)], 3.0);
    }

    #[test]
    fn reversal_is_non_block() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "unit,period,y,d\n1,1,0,1\n1,2,0,0\n2,1,1,0\n2,2,3,0\n");
        let err = load_panel(&p, &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, Error::NonBlockTreatment(_)), "{err}");
    }

    #[test]
    fn staggered_adoption_is_non_block() {
        let dir = tempfile::tempdir().unwrap();
        let body = "unit,period,y,d\n\
                    a,1,0,0\na,2,0,1\na,3,0,1\n\
                    b,1,0,0\nb,2,0,0\nb,3,0,1\n\
                    c,1,0,0\nc,2,0,0\nc,3,0,0\n";
        let err = load_panel(&write(&dir, "s.csv", body), &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, Error::NonBlockTreatment(_)));
    }

    #[test]
    fn ingestion_errors() {
        let dir = tempfile::tempdir().unwrap();
        let schema = ColumnSchema::default();
        let unbalanced = write(&dir, "u.csv", "unit,period,y,d\n1,1,0,0\n1,2,0,0\n2,1,1,0\n");
        assert!(matches!(load_panel(&unbalanced, &schema), Err(Error::UnbalancedPanel(_))));
        let missing = write(&dir, "m.csv", "unit,period,y,d\n1,1,0,0\n1,2,,0\n2,1,1,0\n2,2,1,1\n");
        assert!(matches!(load_panel(&missing, &schema), Err(Error::MissingCell { .. })));
        let text = write(&dir, "t.csv", "unit,period,y,d\n1,1,0,0\n1,2,abc,0\n2,1,1,0\n2,2,1,1\n");
        assert!(matches!(load_panel(&text, &schema), Err(Error::NonNumeric { row: 3, .. })));
        let dup = write(&dir, "d.csv", "unit,period,y,d\n1,1,0,0\n1,1,0,0\n");
        assert!(matches!(load_panel(&dup, &schema), Err(Error::UnbalancedPanel(_))));
        let nocol = write(&dir, "n.csv", "id,period,y,d\n1,1,0,0\n");
        assert!(matches!(load_panel(&nocol, &schema), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn custom_schema_and_covariates() {
        let dir = tempfile::tempdir().unwrap();
        let body = "id,time,out,treat,age\nx,1,1,0,3\nx,2,2,0,4\ny,1,3,0,5\ny,2,4,1,6\n";
        let schema = ColumnSchema {
            unit: "id".into(),
            period: "time".into(),
            outcome: "out".into(),
            treatment: "treat".into(),
            covariates: Some(vec!["age".into()]),
        };
        let panel = load_panel(&write(&dir, "c.csv", body), &schema).unwrap();
        assert_eq!(panel.covariates().len(), 1);
        assert_eq!(panel.covariates()[0][(1, 1)], 6.0);
    }

    #[test]
    fn mask_example() {
        let panel = PanelData::new(DMatrix::zeros(4, 4), &[0, 1], 2).unwrap();
        let mask = treatment_mask(&panel);
        for i in 0..2 {
            assert_eq!(mask.row(i).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 1.0]);
        }
        assert!(mask.rows(2, 2).iter().all(|&v| v == 0.0));
        assert_eq!(mask.rank(1e-12), 1);
    }

    #[test]
    fn table_one_design_has_625_treated_cells() {
        let treated: Vec<usize> = (0..25).collect();
        let panel = PanelData::new(DMatrix::zeros(50, 50), &treated, 25).unwrap();
        assert_eq!(treatment_mask(&panel).sum(), 625.0);
    }

    #[test]
    fn constructor_rejects_bad_designs() {
        assert!(PanelData::new(DMatrix::zeros(3, 3), &[], 1).is_err());
        assert!(PanelData::new(DMatrix::zeros(3, 3), &[0, 1, 2], 1).is_err());
        assert!(PanelData::new(DMatrix::zeros(3, 3), &[0], 0).is_err());
        assert!(PanelData::new(DMatrix::zeros(3, 3), &[0], 3).is_err());
        let mut y = DMatrix::zeros(3, 3);
        y[(0, 0)] = f64::NAN;
        assert!(matches!(PanelData::new(y, &[0], 1), Err(Error::NonFinite)));
        let p = PanelData::new(DMatrix::zeros(3, 3), &[0], 1).unwrap();
        assert!(p.clone().with_covariates(vec![DMatrix::zeros(2, 3)]).is_err());
    }

    #[test]
    fn result_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut estimate = AttEstimate::from_per_period(vec![0.1, 0.2, std::f64::consts::PI]);
        estimate.counterfactuals = Some(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 1e-300]));
        estimate.diagnostics.insert("d_of_F".into(), 0.123456789012345);
        estimate.diagnostics.insert("iterations".into(), 17.0);
        estimate.diagnostics.insert("mspe_ratio".into(), f64::INFINITY);
        let doc = ResultDocument {
            estimator: "ife".into(),
            config_hash: "abc".into(),
            seed: 42,
            estimate,
        };
        let path = dir.path().join("r.json");
        save_result(&doc, &path).unwrap();
        let back = load_result(&path).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.estimate.diagnostics.len(), 3);

        let simple = ResultDocument {
            estimator: "sc".into(),
            config_hash: String::new(),
            seed: 0,
            estimate: AttEstimate::new(2.0),
        };
        save_result(&simple, &path).unwrap();
        assert_eq!(load_result(&path).unwrap().estimate.att, 2.0);
    }
}
