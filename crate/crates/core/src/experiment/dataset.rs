//! SIDER-style CSV ingestion: one SMILES column followed by 27 binary
//! side-effect labels.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::smiles::parse_smiles;

pub const SIDER_COLUMNS: usize = 28;

/// A data row rejected at load time. `row` counts data rows from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIssue {
    pub row: usize,
    pub smiles: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    pub skip_invalid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetTable {
    /// Header names, SMILES column first.
    pub columns: Vec<String>,
    pub smiles: Vec<String>,
    /// `labels[row][task]`, each 0 or 1.
    pub labels: Vec<Vec<u8>>,
    /// Rows dropped because their SMILES did not parse.
    pub rejected: Vec<RowIssue>,
}

fn parse_label(text: &str) -> Option<u8> {
    match text.trim() {
        "0" | "0.0" => Some(0),
        "1" | "1.0" => Some(1),
        _ => None,
    }
}

impl DatasetTable {
    pub fn len(&self) -> usize {
        self.smiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smiles.is_empty()
    }

    pub fn task_names(&self) -> &[String] {
        &self.columns[1..]
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.task_names().iter().position(|t| t == name)
    }

    pub fn task_labels(&self, task: usize) -> Vec<u8> {
        self.labels.iter().map(|r| r[task]).collect()
    }

    /// A seeded random subset of at most `max_rows` rows, in original order.
    pub fn subsample(&self, max_rows: usize, seed: u64) -> DatasetTable {
        let mut keep: Vec<usize> = (0..self.len()).collect();
        if keep.len() > max_rows {
            keep.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            keep.truncate(max_rows);
            keep.sort_unstable();
        }
        DatasetTable {
            columns: self.columns.clone(),
            smiles: keep.iter().map(|&i| self.smiles[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i].clone()).collect(),
            rejected: self.rejected.clone(),
        }
    }

    pub fn from_reader<R: std::io::Read>(
        reader: R,
        opts: LoadOptions,
    ) -> Result<DatasetTable, ExperimentError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(ExperimentError::EmptyFile),
            Some(h) => h.map_err(|e| ExperimentError::Csv(e.to_string()))?,
        };
        if header.len() != SIDER_COLUMNS {
            return Err(ExperimentError::ColumnCount {
                row: 0,
                got: header.len(),
            });
        }
        let columns: Vec<String> = header.iter().map(|c| c.trim().to_string()).collect();

        let mut table = DatasetTable {
            columns,
            smiles: Vec::new(),
            labels: Vec::new(),
            rejected: Vec::new(),
        };
        let mut seen_rows = 0;
        for (k, rec) in records.enumerate() {
            let row = k + 1;
            let rec = rec.map_err(|e| ExperimentError::Csv(e.to_string()))?;
            if rec.len() == 1 && rec[0].trim().is_empty() {
                continue;
            }
            seen_rows += 1;
            if rec.len() != SIDER_COLUMNS {
                return Err(ExperimentError::ColumnCount {
                    row,
                    got: rec.len(),
                });
            }
            let labels = (1..SIDER_COLUMNS)
                .map(|c| {
                    parse_label(&rec[c]).ok_or_else(|| ExperimentError::Label {
                        row,
                        column: table.columns[c].clone(),
                        value: rec[c].to_string(),
                    })
                })
                .collect::<Result<Vec<u8>, _>>()?;
            let smiles = rec[0].trim().to_string();
            if let Err(e) = parse_smiles(&smiles) {
                table.rejected.push(RowIssue {
                    row,
                    smiles,
                    reason: e.to_string(),
                });
                continue;
            }
            table.smiles.push(smiles);
            table.labels.push(labels);
        }
        if seen_rows == 0 {
            return Err(ExperimentError::EmptyFile);
        }
        if !table.rejected.is_empty() {
            if !opts.skip_invalid {
                return Err(ExperimentError::InvalidRows(table.rejected));
            }
            log::warn!(
                "skipped {} rows with unparseable SMILES",
                table.rejected.len()
            );
        }
        Ok(table)
    }
}

pub fn load_sider_csv(path: &Path, opts: LoadOptions) -> Result<DatasetTable, ExperimentError> {
    let file = std::fs::File::open(path)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    DatasetTable::from_reader(std::io::BufReader::new(file), opts)
}
