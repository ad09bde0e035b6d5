//! Result tables: CSV with a header row, numbers in 17-significant-digit scientific form.

use std::fmt::Write as _;

use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Debug, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Columns allowed to hold NaN or ±Inf.
    pub flagged: Vec<String>,
    /// Extra metadata merged into the sidecar.
    pub extra: serde_json::Map<String, Value>,
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable { columns: columns.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn check_finite(&self) -> Result<(), CliError> {
        for (i, row) in self.rows.iter().enumerate() {
            for (x, col) in row.iter().zip(&self.columns) {
                if !x.is_finite() && !self.flagged.contains(col) {
                    return Err(CliError::NonFinite { column: col.clone(), row: i });
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}
