//! Design-matrix construction and test-vector layout.
//!
//! Continuous covariates pass through unchanged; a categorical covariate
//! with L levels becomes L-1 reference-coded dummy columns, the reference
//! being the lexicographically first level. The interesting covariates form
//! X, the nuisance covariates form Z, and Z always starts with an all-ones
//! intercept column.

use crate::dataset::{ColumnData, Dataset};
use nalgebra::DMatrix;
use thiserror::Error;

/// Relative singular-value cutoff for declaring Z rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("no interesting covariates to test")]
    EmptyInteresting,
    #[error("nuisance design is rank deficient (relative smallest singular value {0:.3e})")]
    RankDeficientNuisance(f64),
    #[error("test vector of length {got} does not factor as p={p} coefficients times d={d} quantiles")]
    DimensionMismatch { got: usize, p: usize, d: usize },
}

/// Numeric design blocks for one dataset.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    /// n x p block of interesting covariates (dummy-coded).
    pub x: DMatrix<f64>,
    /// n x q block of nuisance covariates; column 0 is the intercept.
    pub z: DMatrix<f64>,
    /// Labels for the p columns of `x` ("name" or "name=level").
    pub x_labels: Vec<String>,
    /// Labels for the q columns of `z`; first entry is "(intercept)".
    pub z_labels: Vec<String>,
}

impl DesignMatrices {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    /// Full-model design [X | Z] with X columns first.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, self.p() + self.q());
        m.view_mut((0, 0), (n, self.p())).copy_from(&self.x);
        m.view_mut((0, self.p()), (n, self.q())).copy_from(&self.z);
        m
    }

    /// Residual-stage design [1 | X] used by the strategies that regress
    /// filtered residuals on the interesting covariates.
    pub fn intercept_x(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, 1 + self.p());
        m.column_mut(0).fill(1.0);
        m.view_mut((0, 1), (n, self.p())).copy_from(&self.x);
        m
    }
}

fn expand_column(data: &ColumnData, name: &str, out_cols: &mut Vec<Vec<f64>>, labels: &mut Vec<String>) {
    match data {
        ColumnData::Continuous(v) => {
            out_cols.push(v.clone());
            labels.push(name.to_string());
        }
        ColumnData::Categorical(v) => {
            let levels = data.levels();
            // Reference level = first in lexicographic order; it gets no column.
            for level in levels.iter().skip(1) {
                out_cols.push(
                    v.iter()
                        .map(|s| if s == level { 1.0 } else { 0.0 })
                        .collect(),
                );
                labels.push(format!("{name}={level}"));
            }
        }
    }
}

fn to_matrix(n: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Build the X and Z blocks for `dataset`, checking that Z has full column
/// rank.
pub fn build_design(dataset: &Dataset) -> Result<DesignMatrices, DesignError> {
    let n = dataset.n();

    let mut x_cols: Vec<Vec<f64>> = Vec::new();
    let mut x_labels = Vec::new();
    for col in dataset.interesting() {
        expand_column(&col.data, &col.name, &mut x_cols, &mut x_labels);
    }
    if x_cols.is_empty() {
        return Err(DesignError::EmptyInteresting);
    }

    let mut z_cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut z_labels = vec!["(intercept)".to_string()];
    for col in dataset.nuisance() {
        expand_column(&col.data, &col.name, &mut z_cols, &mut z_labels);
    }

    let x = to_matrix(n, &x_cols);
    let z = to_matrix(n, &z_cols);

    let sv = z.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let rel = if smax > 0.0 { smin / smax } else { 0.0 };
    if rel <= RANK_TOL {
        return Err(DesignError::RankDeficientNuisance(rel));
    }

    Ok(DesignMatrices {
        x,
        z,
        x_labels,
        z_labels,
    })
}

/// Flatten a p x d coefficient matrix (rows = coefficients, columns =
/// quantiles) into the test vector: all d values of coefficient 1, then all
/// d values of coefficient 2, and so on.
pub fn assemble_test_vector(beta_by_tau: &DMatrix<f64>) -> Vec<f64> {
    let (p, d) = beta_by_tau.shape();
    let mut out = Vec::with_capacity(p * d);
    for j in 0..p {
        for k in 0..d {
            out.push(beta_by_tau[(j, k)]);
        }
    }
    out
}

/// Inverse of [`assemble_test_vector`] for known p and d.
pub fn disassemble_test_vector(v: &[f64], p: usize, d: usize) -> Result<DMatrix<f64>, DesignError> {
    if v.len() != p * d {
        return Err(DesignError::DimensionMismatch { got: v.len(), p, d });
    }
    Ok(DMatrix::from_fn(p, d, |j, k| v[j * d + k]))
}
