//! Column contracts of the CSV artifacts, shared by the writers and by
//! external readers such as the figure scripts.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvSchema {
    pub file: &'static str,
    pub columns: &'static [&'static str],
}

pub const SOLUTION: CsvSchema = CsvSchema { file: "solution.csv", columns: &["t", "x", "u"] };
pub const CONVERGENCE: CsvSchema =
    CsvSchema { file: "convergence.csv", columns: &["nx", "nt", "dx", "dt", "max_error", "order"] };
pub const TRANSFORM: CsvSchema = CsvSchema { file: "transform.csv", columns: &["nt", "residual_norm", "ratio"] };
pub const CARLEMAN: CsvSchema =
    CsvSchema { file: "carleman.csv", columns: &["lemma", "lambda", "s", "lhs", "rhs", "ratio"] };
pub const ESTIMATE: CsvSchema = CsvSchema { file: "estimate.csv", columns: &["x", "estimate", "truth"] };
pub const STABILITY: CsvSchema = CsvSchema {
    file: "stability.csv",
    columns: &["member", "unknown_norm", "snapshot_norm", "aggregate", "ratio", "degenerate"],
};

pub const ALL: [CsvSchema; 6] = [SOLUTION, CONVERGENCE, TRANSFORM, CARLEMAN, ESTIMATE, STABILITY];

/// Figure kinds of the plotting scripts and the artifact each one reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureKind {
    Convergence,
    Carleman,
    Stability,
    Reconstruction,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] =
        [FigureKind::Convergence, FigureKind::Carleman, FigureKind::Stability, FigureKind::Reconstruction];

    pub fn schema(self) -> CsvSchema {
        match self {
            FigureKind::Convergence => CONVERGENCE,
            FigureKind::Carleman => CARLEMAN,
            FigureKind::Stability => STABILITY,
            FigureKind::Reconstruction => ESTIMATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ColumnError {
    #[error("{file}: no header row")]
    Empty { file: String },
    #[error("{file}: missing columns {missing:?}, unexpected columns {unexpected:?}")]
    Mismatch { file: String, missing: Vec<String>, unexpected: Vec<String> },
    #[error("{file}: columns out of order, expected {expected:?}")]
    Order { file: String, expected: Vec<String> },
    #[error("{file}: {detail}")]
    Read { file: String, detail: String },
}

impl CsvSchema {
    /// Checks an already split header row.
    pub fn check_header(&self, header: &[&str]) -> Result<(), ColumnError> {
        let file = self.file.to_string();
        if header.is_empty() || header == [""] {
            return Err(ColumnError::Empty { file });
        }
        let missing: Vec<String> =
            self.columns.iter().filter(|c| !header.contains(c)).map(|c| c.to_string()).collect();
        let unexpected: Vec<String> =
            header.iter().filter(|c| !self.columns.contains(c)).map(|c| c.to_string()).collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            return Err(ColumnError::Mismatch { file, missing, unexpected });
        }
        if header != self.columns {
            return Err(ColumnError::Order { file, expected: self.columns.iter().map(|c| c.to_string()).collect() });
        }
        Ok(())
    }

    /// Reads the header of a CSV file and checks it; returns the number of
    /// data rows.
    pub fn check_file(&self, path: &Path) -> Result<usize, ColumnError> {
        let read = |e: csv::Error| ColumnError::Read { file: path.display().to_string(), detail: e.to_string() };
        let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path).map_err(read)?;
        let mut records = r.records();
        let header = match records.next() {
            None => return Err(ColumnError::Empty { file: self.file.to_string() }),
            Some(h) => h.map_err(read)?,
        };
        self.check_header(&header.iter().collect::<Vec<_>>())?;
        let mut rows = 0;
        for rec in records {
            let rec = rec.map_err(read)?;
            if rec.len() != self.columns.len() {
                return Err(ColumnError::Read {
                    file: path.display().to_string(),
                    detail: format!("row {} has {} fields, expected {}", rows + 1, rec.len(), self.columns.len()),
                });
            }
            rows += 1;
        }
        Ok(rows)
    }
}
