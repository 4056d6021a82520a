//! Datasets, validation, and CSV ingestion.
//!
//! Input files use the header `pi_information,I,P`: an experiment identifier,
//! irradiance, and photosynthetic rate. Additional columns are kept as
//! per-row metadata. `I_unit` / `P_unit` columns, when present, label the
//! dataset units.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

pub const ID_COLUMN: &str = "pi_information";
pub const IRRADIANCE_COLUMN: &str = "I";
pub const RATE_COLUMN: &str = "P";

pub const MIN_POINTS: usize = 5;
pub const MIN_DISTINCT_IRRADIANCES: usize = 4;

const DEFAULT_IRRADIANCE_UNIT: &str = "umol photons m-2 s-1";

/// One incubation: paired irradiance/rate observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub id: String,
    pub irradiance: Vec<f64>,
    pub rate: Vec<f64>,
    pub irradiance_unit: String,
    pub rate_unit: String,
}

impl Dataset {
    pub fn new(id: impl Into<String>, irradiance: Vec<f64>, rate: Vec<f64>) -> Self {
        Dataset {
            id: id.into(),
            irradiance,
            rate,
            irradiance_unit: DEFAULT_IRRADIANCE_UNIT.to_string(),
            rate_unit: String::new(),
        }
    }

    /// Like [`Dataset::new`] but returns the violations as an error.
    pub fn checked(id: impl Into<String>, irradiance: Vec<f64>, rate: Vec<f64>) -> Result<Self> {
        let d = Dataset::new(id, irradiance, rate);
        d.ensure_valid()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.irradiance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.irradiance.is_empty()
    }

    pub fn max_irradiance(&self) -> f64 {
        self.irradiance.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_rate(&self) -> f64 {
        self.rate.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn distinct_irradiances(&self) -> usize {
        self.irradiance
            .iter()
            .map(|x| x.to_bits())
            .collect::<HashSet<_>>()
            .len()
    }

    /// All invariant violations; empty when the dataset is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let exp = || self.id.clone();
        if self.irradiance.len() != self.rate.len() {
            out.push(Violation::new(
                exp(),
                None,
                ViolationKind::LengthMismatch {
                    irradiance: self.irradiance.len(),
                    rate: self.rate.len(),
                },
            ));
            return out;
        }
        for (k, (&i, &p)) in self.irradiance.iter().zip(&self.rate).enumerate() {
            let row = Some(k + 1);
            if !i.is_finite() {
                out.push(Violation::new(exp(), row, ViolationKind::NonFinite(IRRADIANCE_COLUMN)));
            } else if i < 0.0 {
                out.push(Violation::new(exp(), row, ViolationKind::NegativeIrradiance(i)));
            }
            if !p.is_finite() {
                out.push(Violation::new(exp(), row, ViolationKind::NonFinite(RATE_COLUMN)));
            }
        }
        self.check_counts(&mut out);
        out
    }

    fn check_counts(&self, out: &mut Vec<Violation>) {
        if self.len() < MIN_POINTS {
            out.push(Violation::new(
                self.id.clone(),
                None,
                ViolationKind::TooFewPoints(self.len()),
            ));
        }
        let distinct = self.distinct_irradiances();
        if distinct < MIN_DISTINCT_IRRADIANCES {
            out.push(Violation::new(
                self.id.clone(),
                None,
                ViolationKind::TooFewDistinct(distinct),
            ));
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDataset(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub experiment: String,
    /// 1-based data row (header excluded) within the source table.
    pub row: Option<usize>,
    pub kind: ViolationKind,
}

impl Violation {
    fn new(experiment: String, row: Option<usize>, kind: ViolationKind) -> Self {
        Violation {
            experiment,
            row,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ViolationKind {
    NotNumeric { column: &'static str, text: String },
    NonFinite(&'static str),
    NegativeIrradiance(f64),
    EmptyId,
    LengthMismatch { irradiance: usize, rate: usize },
    TooFewPoints(usize),
    TooFewDistinct(usize),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::NotNumeric { column, text } => {
                write!(f, "non-numeric {column} value `{text}`")
            }
            ViolationKind::NonFinite(column) => write!(f, "non-finite {column} value"),
            ViolationKind::NegativeIrradiance(_) => f.write_str("negative irradiance"),
            ViolationKind::EmptyId => f.write_str("empty experiment id"),
            ViolationKind::LengthMismatch { irradiance, rate } => {
                write!(f, "length mismatch ({irradiance} irradiances, {rate} rates)")
            }
            ViolationKind::TooFewPoints(n) => {
                write!(f, "n < {MIN_POINTS} (n = {n})")
            }
            ViolationKind::TooFewDistinct(d) => write!(
                f,
                "fewer than {MIN_DISTINCT_IRRADIANCES} distinct irradiances ({d})"
            ),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "experiment `{}`: {}", self.experiment, self.kind)?;
        if let Some(r) = self.row {
            write!(f, ", row {r}")?;
        }
        Ok(())
    }
}

/// Unvalidated rows as read from a CSV source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTable {
    pub source: String,
    /// Names of the non-required columns, in file order.
    pub extra_columns: Vec<String>,
    pub rows: Vec<RawRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub experiment: String,
    pub irradiance: String,
    pub rate: String,
    pub extra: Vec<String>,
}

impl RawTable {
    pub fn experiment_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .map(|r| r.experiment.as_str())
            .filter(|id| seen.insert(*id))
            .collect()
    }

    fn extra(&self, row: &RawRow, name: &str) -> Option<String> {
        let idx = self.extra_columns.iter().position(|c| c == name)?;
        row.extra.get(idx).filter(|s| !s.is_empty()).cloned()
    }

    /// Builds a table from validated datasets, e.g. for serialization.
    pub fn from_datasets(datasets: &[Dataset]) -> Self {
        let rows = datasets
            .iter()
            .flat_map(|d| {
                d.irradiance.iter().zip(&d.rate).map(move |(i, p)| RawRow {
                    experiment: d.id.clone(),
                    irradiance: format_number(*i),
                    rate: format_number(*p),
                    extra: Vec::new(),
                })
            })
            .collect();
        RawTable {
            source: String::new(),
            extra_columns: Vec::new(),
            rows,
        }
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

pub fn load_csv_path(path: &std::path::Path) -> Result<RawTable> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut t = load_csv(file)?;
    t.source = path.display().to_string();
    Ok(t)
}

/// Parses a `pi_information,I,P` table. CRLF line endings and a UTF-8 BOM
/// are accepted; the decimal separator must be a point.
pub fn load_csv<R: Read>(mut reader: R) -> Result<RawTable> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&bytes);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(body);
    let headers = rdr.headers()?.clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(Error::MissingColumn(name))
    };
    let id_col = find(ID_COLUMN)?;
    let i_col = find(IRRADIANCE_COLUMN)?;
    let p_col = find(RATE_COLUMN)?;
    let extra_idx: Vec<usize> = (0..headers.len())
        .filter(|k| ![id_col, i_col, p_col].contains(k))
        .collect();
    let mut table = RawTable {
        source: String::new(),
        extra_columns: extra_idx.iter().map(|&k| headers[k].to_string()).collect(),
        rows: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec?;
        table.rows.push(RawRow {
            experiment: rec[id_col].to_string(),
            irradiance: rec[i_col].to_string(),
            rate: rec[p_col].to_string(),
            extra: extra_idx.iter().map(|&k| rec[k].to_string()).collect(),
        });
    }
    Ok(table)
}

/// Writes datasets back out as `pi_information,I,P`.
pub fn write_csv<W: Write>(datasets: &[Dataset], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([ID_COLUMN, IRRADIANCE_COLUMN, RATE_COLUMN])?;
    for row in RawTable::from_datasets(datasets).rows {
        w.write_record([&row.experiment, &row.irradiance, &row.rate])?;
    }
    w.flush()?;
    Ok(())
}

/// Result of [`format_check`]: the datasets that passed and every violation
/// found in the ones that did not.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FormatReport {
    pub datasets: Vec<Dataset>,
    pub violations: Vec<Violation>,
}

impl FormatReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Groups rows by experiment id (first-appearance order) and checks every
/// dataset invariant. Row numbers refer to data rows of the whole table.
pub fn format_check(raw: &RawTable) -> FormatReport {
    let mut report = FormatReport::default();
    for id in raw.experiment_ids() {
        let mut violations = Vec::new();
        let mut irradiance = Vec::new();
        let mut rate = Vec::new();
        let mut first_row = None;
        for (k, row) in raw.rows.iter().enumerate().filter(|(_, r)| r.experiment == id) {
            let row_no = Some(k + 1);
            first_row.get_or_insert(row);
            if id.is_empty() {
                violations.push(Violation::new(id.to_string(), row_no, ViolationKind::EmptyId));
            }
            let i = parse_cell(&row.irradiance, IRRADIANCE_COLUMN, id, row_no, &mut violations);
            let p = parse_cell(&row.rate, RATE_COLUMN, id, row_no, &mut violations);
            if let Some(i) = i {
                if i < 0.0 {
                    violations.push(Violation::new(
                        id.to_string(),
                        row_no,
                        ViolationKind::NegativeIrradiance(i),
                    ));
                }
            }
            irradiance.push(i.unwrap_or(f64::NAN));
            rate.push(p.unwrap_or(f64::NAN));
        }
        let mut d = Dataset::new(id, irradiance, rate);
        if let Some(r) = first_row {
            if let Some(u) = raw.extra(r, "I_unit") {
                d.irradiance_unit = u;
            }
            if let Some(u) = raw.extra(r, "P_unit") {
                d.rate_unit = u;
            }
        }
        d.check_counts(&mut violations);
        if violations.is_empty() {
            report.datasets.push(d);
        } else {
            report.violations.extend(violations);
        }
    }
    report
}

fn parse_cell(
    text: &str,
    column: &'static str,
    id: &str,
    row: Option<usize>,
    violations: &mut Vec<Violation>,
) -> Option<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        Ok(_) => {
            violations.push(Violation::new(id.to_string(), row, ViolationKind::NonFinite(column)));
            None
        }
        Err(_) => {
            violations.push(Violation::new(
                id.to_string(),
                row,
                ViolationKind::NotNumeric {
                    column,
                    text: text.to_string(),
                },
            ));
            None
        }
    }
}

/// `m` equally spaced irradiances from 0 to `max(I)` inclusive.
pub fn high_res_grid(dataset: &Dataset, m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::GridTooSmall(m));
    }
    let hi = dataset.max_irradiance();
    if !(hi.is_finite() && hi > 0.0) {
        return Err(Error::InvalidGrid);
    }
    let last = (m - 1) as f64;
    Ok((0..m)
        .map(|k| if k == m - 1 { hi } else { hi * k as f64 / last })
        .collect())
}
