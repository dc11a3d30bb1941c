//! The joint collection of observed and replicate test vectors.
//!
//! Row 0 holds the observed vector, rows 1..=s the permutation replicates.
//! Coordinate j*d + k is coefficient j at the k-th quantile of the grid, so
//! each coefficient's curve occupies a contiguous block of d coordinates.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveSetError {
    #[error("curve set needs an observed row plus at least one replicate, got {0} rows")]
    TooFewRows(usize),
    #[error("row {row} has {got} coordinates, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("curve set rows must be non-empty")]
    EmptyRows,
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone)]
pub struct CurveSet {
    rows: Vec<Vec<f64>>,
}

impl CurveSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, CurveSetError> {
        if rows.len() < 2 {
            return Err(CurveSetError::TooFewRows(rows.len()));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(CurveSetError::EmptyRows);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(CurveSetError::RaggedRows {
                    row: i,
                    got: row.len(),
                    expected: k,
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(CurveSetError::NonFinite(i));
            }
        }
        Ok(CurveSet { rows })
    }

    /// Total number of curves, s + 1.
    pub fn n_curves(&self) -> usize {
        self.rows.len()
    }

    /// Number of replicates s.
    pub fn s(&self) -> usize {
        self.rows.len() - 1
    }

    /// Coordinates per curve (p * d).
    pub fn n_coords(&self) -> usize {
        self.rows[0].len()
    }

    pub fn observed(&self) -> &[f64] {
        &self.rows[0]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}
