//! Quantile grids: the ordered set of quantile levels the model is fit at.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("quantile grid must be non-empty")]
    Empty,
    #[error("quantile {0} outside the open interval (0,1)")]
    OutOfRange(f64),
    #[error("quantile grid must be strictly increasing")]
    NotIncreasing,
    #[error("cannot parse quantile spec '{0}'")]
    BadSpec(String),
}

/// Strictly increasing quantile levels in (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    taus: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(taus: Vec<f64>) -> Result<Self, GridError> {
        if taus.is_empty() {
            return Err(GridError::Empty);
        }
        for &t in &taus {
            if !(t > 0.0 && t < 1.0) {
                return Err(GridError::OutOfRange(t));
            }
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GridError::NotIncreasing);
        }
        Ok(QuantileGrid { taus })
    }

    /// `d` equally spaced levels on `[lo, hi]`, endpoints included.
    pub fn equally_spaced(d: usize, lo: f64, hi: f64) -> Result<Self, GridError> {
        if d == 0 {
            return Err(GridError::Empty);
        }
        if d == 1 {
            return QuantileGrid::new(vec![(lo + hi) / 2.0]);
        }
        let taus = (0..d)
            .map(|k| lo + (hi - lo) * k as f64 / (d - 1) as f64)
            .collect();
        QuantileGrid::new(taus)
    }

    /// Parse either an explicit comma list ("0.1,0.5,0.9") or the spacing
    /// form "d@lo:hi" meaning d equally spaced levels on [lo, hi].
    pub fn parse_spec(spec: &str) -> Result<Self, GridError> {
        let bad = || GridError::BadSpec(spec.to_string());
        if let Some((d_str, range)) = spec.split_once('@') {
            let d: usize = d_str.trim().parse().map_err(|_| bad())?;
            let (lo_str, hi_str) = range.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo_str.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi_str.trim().parse().map_err(|_| bad())?;
            QuantileGrid::equally_spaced(d, lo, hi)
        } else {
            let taus: Result<Vec<f64>, _> =
                spec.split(',').map(|t| t.trim().parse::<f64>()).collect();
            QuantileGrid::new(taus.map_err(|_| bad())?)
        }
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}
