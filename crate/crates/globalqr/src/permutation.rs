//! Null-model generation strategies.
//!
//! Each strategy freezes a state from the observed data once (reduced-model
//! fits, filtered residuals, or a group partition) and then serves permuted
//! replicates by index. Replicate i is a pure function of (seed, i), so
//! replicates can be drawn concurrently and out of order.
//!
//! Strategies:
//! - FL: permute rows of the reduced-model residual matrix jointly across
//!   quantiles and add them back to the reduced fit.
//! - FL+: as FL, but at each quantile the q-1 entries carrying the zero
//!   residuals of the reduced fit are dropped from the permuted response.
//! - WN: permute the response within each level combination of categorical
//!   nuisance covariates.
//! - RL: permute the residuals of a least-squares fit on the nuisance block.
//! - RLS: as RL with the residuals rescaled by a fitted scale model first.
//! - RQ: permute per-quantile quantile-regression residuals, using the same
//!   permutation for every quantile within one replicate.

use crate::dataset::Dataset;
use crate::design::DesignMatrices;
use crate::grid::QuantileGrid;
use crate::rng::{random_permutation, stream_rng};
use crate::solver::{ols_fit, qr_fit_grid, SolverError};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

/// Stream salt separating permutation draws from other consumers of the
/// same master seed.
const PERMUTATION_STREAM: u64 = 0x7065_726d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyId {
    Fl,
    FlPlus,
    Wn,
    Rl,
    Rls,
    Rq,
}

impl StrategyId {
    pub const ALL: [StrategyId; 6] = [
        StrategyId::Fl,
        StrategyId::FlPlus,
        StrategyId::Wn,
        StrategyId::Rl,
        StrategyId::Rls,
        StrategyId::Rq,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fl" => Some(StrategyId::Fl),
            "flplus" | "fl+" => Some(StrategyId::FlPlus),
            "wn" => Some(StrategyId::Wn),
            "rl" => Some(StrategyId::Rl),
            "rls" => Some(StrategyId::Rls),
            "rq" => Some(StrategyId::Rq),
            _ => None,
        }
    }
}

impl std::fmt::Display for StrategyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            StrategyId::Fl => "fl",
            StrategyId::FlPlus => "flplus",
            StrategyId::Wn => "wn",
            StrategyId::Rl => "rl",
            StrategyId::Rls => "rls",
            StrategyId::Rq => "rq",
        };
        write!(f, "{tag}")
    }
}

#[derive(Debug, Error)]
pub enum PermutationError {
    #[error("strategy wn requires categorical nuisance covariates, but '{0}' is continuous")]
    WnNeedsCategorical(String),
    #[error("replicate index 0 denotes the observed data and cannot be drawn")]
    IndexZeroReserved,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Counters accumulated while freezing a null model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PrepDiagnostics {
    /// RLS rows whose fitted scale fell at or below the floor (including
    /// non-positive fitted scales) and was clamped.
    pub clamped_scales: usize,
    /// FL+ quantiles where the reduced fit produced fewer exact zero
    /// residuals than the q-1 rows that must be dropped.
    pub inexact_zero_taus: usize,
}

#[derive(Debug, Clone)]
enum FrozenState {
    /// FL and FL+: reduced-model fits per quantile.
    Residualized {
        /// q x d reduced-model coefficients, one column per quantile.
        gamma: DMatrix<f64>,
        /// n x d fitted values Z*gamma(tau_k).
        fitted: DMatrix<f64>,
        /// n x d residual matrix.
        residuals: DMatrix<f64>,
        /// FL+ only: per quantile, the sorted residual indices to drop.
        drop: Option<Vec<Vec<usize>>>,
    },
    /// WN: partition of row indices by nuisance level combination.
    Groups { groups: Vec<Vec<usize>>, y: Vec<f64> },
    /// RL and RLS: one filtered residual vector.
    Filtered { eps: DVector<f64> },
    /// RQ: per-quantile residual columns.
    PerTau { eps: DMatrix<f64> },
}

/// Frozen, immutable null model; replicates are drawn from it by index.
#[derive(Debug, Clone)]
pub struct NullModel {
    strategy: StrategyId,
    seed: u64,
    n: usize,
    d: usize,
    q: usize,
    state: FrozenState,
    pub diagnostics: PrepDiagnostics,
}

/// Responses to refit for one replicate.
#[derive(Debug, Clone)]
pub enum ReplicateData {
    /// One response shared by every quantile (WN, RL, RLS).
    Shared(DVector<f64>),
    /// Per-quantile responses (FL, RQ); FL+ additionally records which rows
    /// survive at each quantile.
    PerTau {
        responses: Vec<DVector<f64>>,
        kept_rows: Option<Vec<Vec<usize>>>,
    },
}

impl ReplicateData {
    /// Response vector for quantile k and, when rows were dropped, the
    /// surviving row indices into the original design.
    pub fn response(&self, k: usize) -> (&DVector<f64>, Option<&[usize]>) {
        match self {
            ReplicateData::Shared(v) => (v, None),
            ReplicateData::PerTau {
                responses,
                kept_rows,
            } => (&responses[k], kept_rows.as_ref().map(|kr| kr[k].as_slice())),
        }
    }
}

/// OLS residuals of y on the nuisance block (RL filtering).
pub fn location_filtered_residuals(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, SolverError> {
    Ok(ols_fit(z, y)?.residuals)
}

/// Location-and-scale filtered residuals (RLS): fit y = Z*gamma + e, then
/// |e| = Z*omega + e'', and return e / (Z*omega) with the fitted scale
/// clamped below at 1e-6 * mean|e|. Returns the number of clamped rows.
pub fn location_scale_filtered_residuals(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, usize), SolverError> {
    let loc = ols_fit(z, y)?;
    let abs_eps = loc.residuals.map(f64::abs);
    let mean_abs = abs_eps.mean();
    if mean_abs == 0.0 {
        // Perfect location fit; nothing left to rescale.
        return Ok((loc.residuals, 0));
    }
    let scale_fit = ols_fit(z, &abs_eps)?;
    let floor = 1e-6 * mean_abs;
    let mut clamped = 0usize;
    let eps = DVector::from_fn(y.len(), |i, _| {
        let mut s = scale_fit.fitted[i];
        if s <= floor {
            s = floor;
            clamped += 1;
        }
        loc.residuals[i] / s
    });
    Ok((eps, clamped))
}

/// Per-quantile quantile-regression residuals of y on the nuisance block
/// (RQ filtering); column k belongs to grid level k.
pub fn quantile_filtered_residuals(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &QuantileGrid,
) -> Result<DMatrix<f64>, SolverError> {
    let fits = qr_fit_grid(z, y, grid)?;
    let n = y.len();
    Ok(DMatrix::from_fn(n, grid.len(), |i, k| {
        fits[k].residuals[i]
    }))
}

/// Partition row indices by the level combination of the (categorical)
/// nuisance covariates. With no nuisance covariates there is one group
/// holding every row.
fn nuisance_groups(dataset: &Dataset) -> Result<Vec<Vec<usize>>, PermutationError> {
    use crate::dataset::ColumnData;
    let n = dataset.n();
    let mut keys: Vec<Vec<&str>> = vec![Vec::new(); n];
    for col in dataset.nuisance() {
        match &col.data {
            ColumnData::Categorical(labels) => {
                for (i, label) in labels.iter().enumerate() {
                    keys[i].push(label.as_str());
                }
            }
            ColumnData::Continuous(_) => {
                return Err(PermutationError::WnNeedsCategorical(col.name.clone()))
            }
        }
    }
    let mut map: std::collections::BTreeMap<Vec<&str>, Vec<usize>> = Default::default();
    for (i, key) in keys.into_iter().enumerate() {
        map.entry(key).or_default().push(i);
    }
    Ok(map.into_values().collect())
}

/// Freeze the strategy-specific state for drawing null replicates.
pub fn prepare_null_model(
    dataset: &Dataset,
    design: &DesignMatrices,
    grid: &QuantileGrid,
    strategy: StrategyId,
    seed: u64,
) -> Result<NullModel, PermutationError> {
    let n = dataset.n();
    let d = grid.len();
    let q = design.q();
    let y = DVector::from_column_slice(dataset.y());
    let mut diagnostics = PrepDiagnostics::default();

    let state = match strategy {
        StrategyId::Fl | StrategyId::FlPlus => {
            let fits = qr_fit_grid(&design.z, &y, grid)?;
            let gamma = DMatrix::from_fn(q, d, |j, k| fits[k].beta[j]);
            let residuals = DMatrix::from_fn(n, d, |i, k| fits[k].residuals[i]);
            let fitted = DMatrix::from_fn(n, d, |i, k| y[i] - residuals[(i, k)]);
            let drop = if strategy == StrategyId::FlPlus {
                let mut per_tau = Vec::with_capacity(d);
                for (k, fit) in fits.iter().enumerate() {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.sort_by(|&a, &b| {
                        residuals[(a, k)]
                            .abs()
                            .total_cmp(&residuals[(b, k)].abs())
                            .then(a.cmp(&b))
                    });
                    let n_drop = q.saturating_sub(1).min(n);
                    let exact_zeros = order
                        .iter()
                        .filter(|&&i| residuals[(i, k)].abs() <= fit.zero_tol)
                        .count();
                    if exact_zeros < n_drop {
                        diagnostics.inexact_zero_taus += 1;
                    }
                    let mut chosen: Vec<usize> = order[..n_drop].to_vec();
                    chosen.sort_unstable();
                    per_tau.push(chosen);
                }
                Some(per_tau)
            } else {
                None
            };
            FrozenState::Residualized {
                gamma,
                fitted,
                residuals,
                drop,
            }
        }
        StrategyId::Wn => FrozenState::Groups {
            groups: nuisance_groups(dataset)?,
            y: dataset.y().to_vec(),
        },
        StrategyId::Rl => FrozenState::Filtered {
            eps: location_filtered_residuals(&design.z, &y)?,
        },
        StrategyId::Rls => {
            let (eps, clamped) = location_scale_filtered_residuals(&design.z, &y)?;
            diagnostics.clamped_scales = clamped;
            FrozenState::Filtered { eps }
        }
        StrategyId::Rq => FrozenState::PerTau {
            eps: quantile_filtered_residuals(&design.z, &y, grid)?,
        },
    };

    Ok(NullModel {
        strategy,
        seed,
        n,
        d,
        q,
        state,
        diagnostics,
    })
}

impl NullModel {
    pub fn strategy(&self) -> StrategyId {
        self.strategy
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Reduced-model coefficients (FL and FL+ only), q x d.
    pub fn reduced_coefficients(&self) -> Option<&DMatrix<f64>> {
        match &self.state {
            FrozenState::Residualized { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    /// Filtered residual vector (RL and RLS only).
    pub fn filtered_residuals(&self) -> Option<&DVector<f64>> {
        match &self.state {
            FrozenState::Filtered { eps } => Some(eps),
            _ => None,
        }
    }

    /// Per-quantile residual matrix (RQ only), n x d.
    pub fn per_tau_residuals(&self) -> Option<&DMatrix<f64>> {
        match &self.state {
            FrozenState::PerTau { eps } => Some(eps),
            _ => None,
        }
    }

    /// WN group partition.
    pub fn groups(&self) -> Option<&[Vec<usize>]> {
        match &self.state {
            FrozenState::Groups { groups, .. } => Some(groups),
            _ => None,
        }
    }

    /// The permutation used by replicate `index`; position j of the result
    /// is the source row whose value moves to row j.
    pub fn permutation(&self, index: u64) -> Vec<usize> {
        let mut rng = stream_rng(self.seed, &[PERMUTATION_STREAM, index]);
        match &self.state {
            FrozenState::Groups { groups, .. } => {
                let mut perm: Vec<usize> = (0..self.n).collect();
                for group in groups {
                    let local = random_permutation(&mut rng, group.len());
                    for (slot, &pick) in group.iter().zip(local.iter()) {
                        perm[*slot] = group[pick];
                    }
                }
                perm
            }
            _ => random_permutation(&mut rng, self.n),
        }
    }

    /// Draw replicate `index` (index 0 is reserved for the observed data).
    pub fn draw_replicate(&self, index: u64) -> Result<ReplicateData, PermutationError> {
        if index == 0 {
            return Err(PermutationError::IndexZeroReserved);
        }
        let perm = self.permutation(index);
        Ok(self.replicate_from_permutation(&perm))
    }

    /// Apply an explicit permutation; the test hook behind
    /// [`NullModel::draw_replicate`]. For WN the caller must supply a
    /// group-preserving permutation.
    pub fn replicate_from_permutation(&self, perm: &[usize]) -> ReplicateData {
        let n = self.n;
        match &self.state {
            FrozenState::Residualized {
                fitted,
                residuals,
                drop,
                ..
            } => {
                let mut responses = Vec::with_capacity(self.d);
                for k in 0..self.d {
                    responses.push(DVector::from_fn(n, |j, _| {
                        fitted[(j, k)] + residuals[(perm[j], k)]
                    }));
                }
                match drop {
                    None => ReplicateData::PerTau {
                        responses,
                        kept_rows: None,
                    },
                    Some(drop_sets) => {
                        let mut kept_rows = Vec::with_capacity(self.d);
                        let mut trimmed = Vec::with_capacity(self.d);
                        for (k, response) in responses.iter().enumerate() {
                            let kept: Vec<usize> = (0..n)
                                .filter(|&j| drop_sets[k].binary_search(&perm[j]).is_err())
                                .collect();
                            trimmed
                                .push(DVector::from_fn(kept.len(), |j, _| response[kept[j]]));
                            kept_rows.push(kept);
                        }
                        ReplicateData::PerTau {
                            responses: trimmed,
                            kept_rows: Some(kept_rows),
                        }
                    }
                }
            }
            FrozenState::Groups { y, .. } => {
                ReplicateData::Shared(DVector::from_fn(n, |j, _| y[perm[j]]))
            }
            FrozenState::Filtered { eps } => {
                ReplicateData::Shared(DVector::from_fn(n, |j, _| eps[perm[j]]))
            }
            FrozenState::PerTau { eps } => {
                let responses = (0..self.d)
                    .map(|k| DVector::from_fn(n, |j, _| eps[(perm[j], k)]))
                    .collect();
                ReplicateData::PerTau {
                    responses,
                    kept_rows: None,
                }
            }
        }
    }
}
