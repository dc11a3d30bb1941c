//! Observed data: a response vector plus named covariate columns, each
//! tagged with a type (continuous or categorical) and a role (interesting,
//! i.e. under test, or nuisance).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("column '{name}' has length {got}, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("missing or non-finite value in column '{0}'")]
    MissingValue(String),
    #[error("categorical column '{0}' has fewer than 2 observed levels")]
    DegenerateFactor(String),
    #[error("duplicate column name '{0}'")]
    DuplicateName(String),
}

/// Covariate values, typed.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<f64>),
    /// Level labels per row; the set of observed labels defines the levels.
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnData::Categorical(_))
    }

    /// Observed levels in lexicographic order (categorical only).
    pub fn levels(&self) -> Vec<String> {
        match self {
            ColumnData::Continuous(_) => Vec::new(),
            ColumnData::Categorical(v) => {
                let mut levels: Vec<String> = v.clone();
                levels.sort();
                levels.dedup();
                levels
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Covariate whose effect is under test (goes into X).
    Interesting,
    /// Covariate accounted for but not tested (goes into Z).
    Nuisance,
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub role: Role,
    pub data: ColumnData,
}

impl Column {
    pub fn continuous(name: &str, role: Role, values: Vec<f64>) -> Self {
        Column {
            name: name.to_string(),
            role,
            data: ColumnData::Continuous(values),
        }
    }

    pub fn categorical(name: &str, role: Role, labels: Vec<String>) -> Self {
        Column {
            name: name.to_string(),
            role,
            data: ColumnData::Categorical(labels),
        }
    }
}

/// Validated dataset. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    columns: Vec<Column>,
}

impl Dataset {
    /// Validates lengths, missing values and factor levels at ingestion.
    pub fn new(y: Vec<f64>, columns: Vec<Column>) -> Result<Self, DataError> {
        let n = y.len();
        if n < 2 {
            return Err(DataError::TooFewRows(n));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DataError::MissingValue("y".to_string()));
        }
        let mut seen = std::collections::HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.clone()) {
                return Err(DataError::DuplicateName(col.name.clone()));
            }
            if col.data.len() != n {
                return Err(DataError::LengthMismatch {
                    name: col.name.clone(),
                    got: col.data.len(),
                    expected: n,
                });
            }
            match &col.data {
                ColumnData::Continuous(v) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(DataError::MissingValue(col.name.clone()));
                    }
                }
                ColumnData::Categorical(v) => {
                    if v.iter().any(|s| s.is_empty()) {
                        return Err(DataError::MissingValue(col.name.clone()));
                    }
                    if col.data.levels().len() < 2 {
                        return Err(DataError::DegenerateFactor(col.name.clone()));
                    }
                }
            }
        }
        Ok(Dataset { y, columns })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn interesting(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.role == Role::Interesting)
    }

    pub fn nuisance(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.role == Role::Nuisance)
    }

    /// Dataset with rows reordered as `perm` (row i of the result is row
    /// `perm[i]` of the input).
    pub fn permute_rows(&self, perm: &[usize]) -> Dataset {
        let y = perm.iter().map(|&i| self.y[i]).collect();
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                role: c.role,
                data: match &c.data {
                    ColumnData::Continuous(v) => {
                        ColumnData::Continuous(perm.iter().map(|&i| v[i]).collect())
                    }
                    ColumnData::Categorical(v) => {
                        ColumnData::Categorical(perm.iter().map(|&i| v[i].clone()).collect())
                    }
                },
            })
            .collect();
        Dataset { y, columns }
    }

    /// CSV export: header `y,<col>,...`, one row per observation.
    ///
    /// Continuous values print with full round-trip precision; categorical
    /// values print their labels. Matches the dialect the CLI ingests
    /// (comma separated, header row, '.' decimal).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(&format!("{}", self.y[i]));
            for c in &self.columns {
                out.push(',');
                match &c.data {
                    ColumnData::Continuous(v) => out.push_str(&format!("{}", v[i])),
                    ColumnData::Categorical(v) => out.push_str(&v[i]),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xcol(vals: Vec<f64>) -> Column {
        Column::continuous("x", Role::Interesting, vals)
    }

    #[test]
    fn rejects_too_few_rows() {
        let err = Dataset::new(vec![1.0], vec![xcol(vec![1.0])]).unwrap_err();
        assert!(matches!(err, DataError::TooFewRows(1)));
    }

    #[test]
    fn rejects_missing_values() {
        let err = Dataset::new(vec![1.0, f64::NAN], vec![xcol(vec![1.0, 2.0])]).unwrap_err();
        assert!(matches!(err, DataError::MissingValue(_)));
        let err = Dataset::new(vec![1.0, 2.0], vec![xcol(vec![1.0, f64::INFINITY])]).unwrap_err();
        assert!(matches!(err, DataError::MissingValue(_)));
    }

    #[test]
    fn rejects_single_level_factor() {
        let col = Column::categorical(
            "g",
            Role::Nuisance,
            vec!["a".into(), "a".into(), "a".into()],
        );
        let err = Dataset::new(vec![1.0, 2.0, 3.0], vec![col]).unwrap_err();
        assert!(matches!(err, DataError::DegenerateFactor(_)));
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = Dataset::new(vec![1.0, 2.0, 3.0], vec![xcol(vec![1.0, 2.0])]).unwrap_err();
        assert!(matches!(err, DataError::LengthMismatch { .. }));
    }

    #[test]
    fn levels_are_sorted_and_deduped() {
        let data = ColumnData::Categorical(vec!["b".into(), "a".into(), "b".into(), "c".into()]);
        assert_eq!(data.levels(), vec!["a", "b", "c"]);
    }
}
