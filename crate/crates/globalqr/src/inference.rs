//! The end-to-end global test.
//!
//! The observed test vector stacks the fitted coefficient curves of the
//! interesting covariates over the quantile grid. Replicate vectors refit
//! the same statistic on permuted data from the chosen null-model strategy,
//! a rank envelope is built from all of them, and the outcome reports the
//! global p-value together with the coordinates (coefficient, quantile)
//! where the observed curve leaves the band.
//!
//! Statistic recipes per strategy:
//! - FL, FL+, WN: fit the full model [X | Z] and keep the X coefficients.
//!   Replicates refit the same model on the permuted response.
//! - RL, RLS: filter the nuisance effect out of y (location, or location
//!   and scale), then fit [1 | X] to the filtered residuals, dropping the
//!   intercept from the test vector. Replicates permute the residuals.
//! - RQ: per-quantile nuisance filtering, then per-quantile [1 | X] fits
//!   with the same permutation across quantiles in one replicate.

use crate::curves::{CurveSet, CurveSetError};
use crate::dataset::Dataset;
use crate::design::{build_design, DesignError, DesignMatrices};
use crate::envelope::{build_envelope, holm_adjust, EnvelopeError, GlobalEnvelope, MeasureId};
use crate::exec::indexed_try_map;
use crate::grid::QuantileGrid;
use crate::permutation::{
    location_filtered_residuals, location_scale_filtered_residuals, prepare_null_model,
    quantile_filtered_residuals, PermutationError, ReplicateData, StrategyId,
};
use crate::solver::{qr_fit, qr_fit_warm, SolverError};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Permutation(#[from] PermutationError),
    #[error("observed statistic: {0}")]
    Observed(#[source] SolverError),
    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Curves(#[from] CurveSetError),
}

/// Everything a single test run needs besides the data.
#[derive(Debug, Clone)]
pub struct TestConfig {
    pub grid: QuantileGrid,
    pub strategy: StrategyId,
    /// Number of permutation replicates.
    pub s: usize,
    pub alpha: f64,
    pub measure: MeasureId,
    pub seed: u64,
    /// Concurrency hint: 1 = serial, 0 = default pool, k = dedicated pool.
    pub workers: usize,
}

/// One coordinate of the test vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateLabel {
    /// Covariate name, or "name=level" for a categorical level contrast.
    pub coefficient: String,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// RLS rows whose fitted scale was clamped at the floor.
    pub clamped_scales: usize,
    /// FL+ quantiles that lacked the expected exact zero residuals.
    pub inexact_zero_taus: usize,
    /// Some grid level is so extreme that n*min(tau,1-tau) < 1.
    pub extreme_tau: bool,
    /// alpha*(s+1) < 1: the band degenerates to the full hull.
    pub envelope_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub envelope: GlobalEnvelope,
    pub observed: Vec<f64>,
    /// Label of every test-vector coordinate, in vector order.
    pub coefficient_labels: Vec<CoordinateLabel>,
    /// Coordinates where the observed vector leaves the band; nonempty
    /// exactly when `envelope.p_value <= alpha`.
    pub significant_coordinates: Vec<CoordinateLabel>,
    /// Smallest Holm-adjusted pointwise permutation p-value.
    pub ph_p_value: f64,
    /// Smallest unadjusted pointwise permutation p-value.
    pub nc_p_value: f64,
    pub diagnostics: Diagnostics,
}

/// Fit the statistic for one set of responses on a fixed design,
/// warm-starting across the grid when the rows stay the same.
fn fit_statistic(
    design: &DMatrix<f64>,
    skip_cols: usize,
    p: usize,
    grid: &QuantileGrid,
    responses: &ReplicateData,
) -> Result<Vec<f64>, SolverError> {
    let d = grid.len();
    let mut out = vec![0.0; p * d];
    let mut warm: Option<Vec<usize>> = None;
    for (k, &tau) in grid.taus().iter().enumerate() {
        let (response, kept) = responses.response(k);
        let beta = match kept {
            None => {
                let fit = qr_fit_warm(design, response, tau, warm.as_deref())?;
                warm = Some(fit.basis.clone());
                fit.beta
            }
            Some(rows) => {
                // Row subsets differ per quantile; no warm start.
                let sub =
                    DMatrix::from_fn(rows.len(), design.ncols(), |i, j| design[(rows[i], j)]);
                qr_fit(&sub, response, tau)?.beta
            }
        };
        for j in 0..p {
            out[j * d + k] = beta[skip_cols + j];
        }
    }
    Ok(out)
}

fn shared(y: &DVector<f64>) -> ReplicateData {
    ReplicateData::Shared(y.clone())
}

/// The observed test vector for `strategy`.
pub fn observed_statistic(
    dataset: &Dataset,
    design: &DesignMatrices,
    grid: &QuantileGrid,
    strategy: StrategyId,
) -> Result<Vec<f64>, InferenceError> {
    let y = DVector::from_column_slice(dataset.y());
    let p = design.p();
    let stat = |dm: &DMatrix<f64>, skip: usize, responses: &ReplicateData| {
        fit_statistic(dm, skip, p, grid, responses).map_err(InferenceError::Observed)
    };
    match strategy {
        StrategyId::Fl | StrategyId::FlPlus | StrategyId::Wn => {
            stat(&design.full(), 0, &shared(&y))
        }
        StrategyId::Rl => {
            let eps = location_filtered_residuals(&design.z, &y).map_err(InferenceError::Observed)?;
            stat(&design.intercept_x(), 1, &shared(&eps))
        }
        StrategyId::Rls => {
            let (eps, _) =
                location_scale_filtered_residuals(&design.z, &y).map_err(InferenceError::Observed)?;
            stat(&design.intercept_x(), 1, &shared(&eps))
        }
        StrategyId::Rq => {
            let eps = quantile_filtered_residuals(&design.z, &y, grid)
                .map_err(InferenceError::Observed)?;
            let responses = ReplicateData::PerTau {
                responses: (0..grid.len()).map(|k| eps.column(k).into_owned()).collect(),
                kept_rows: None,
            };
            stat(&design.intercept_x(), 1, &responses)
        }
    }
}

/// Two-sided pointwise permutation p-values, one per coordinate: the share
/// of curves at least as far from the replicate median as the observed one.
pub fn pointwise_perm_pvalues(curves: &CurveSet) -> Vec<f64> {
    let r = curves.n_curves();
    let k = curves.n_coords();
    let mut pvals = vec![0.0; k];
    let mut buf = vec![0.0; r - 1];
    for col in 0..k {
        for (bi, row) in (1..r).enumerate() {
            buf[bi] = curves.row(row)[col];
        }
        buf.sort_by(|a, b| a.total_cmp(b));
        let med = if (r - 1) % 2 == 1 {
            buf[(r - 1) / 2]
        } else {
            (buf[(r - 1) / 2 - 1] + buf[(r - 1) / 2]) / 2.0
        };
        let observed_dev = (curves.observed()[col] - med).abs();
        let count = (0..r)
            .filter(|&i| (curves.row(i)[col] - med).abs() >= observed_dev)
            .count();
        pvals[col] = count as f64 / r as f64;
    }
    pvals
}

/// Global comparator p-values: the Holm-adjusted and unadjusted minima of
/// the pointwise permutation p-values.
pub fn comparators(curves: &CurveSet) -> (f64, f64) {
    let pvals = pointwise_perm_pvalues(curves);
    let nc = pvals.iter().cloned().fold(f64::INFINITY, f64::min);
    let ph = holm_adjust(&pvals)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    (ph, nc)
}

/// Run the full global test.
pub fn global_test(dataset: &Dataset, config: &TestConfig) -> Result<TestOutcome, InferenceError> {
    if config.s < 1 {
        return Err(InferenceError::BadConfig(
            "s must be at least 1".to_string(),
        ));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(InferenceError::BadConfig(format!(
            "alpha must lie in (0,1), got {}",
            config.alpha
        )));
    }

    let design = build_design(dataset)?;
    let model = prepare_null_model(
        dataset,
        &design,
        &config.grid,
        config.strategy,
        config.seed,
    )?;
    let observed = observed_statistic(dataset, &design, &config.grid, config.strategy)?;

    let (rep_design, skip_cols) = match config.strategy {
        StrategyId::Fl | StrategyId::FlPlus | StrategyId::Wn => (design.full(), 0),
        StrategyId::Rl | StrategyId::Rls | StrategyId::Rq => (design.intercept_x(), 1),
    };
    let p = design.p();

    let replicate_rows = indexed_try_map(config.workers, config.s, |i| {
        let index = i + 1;
        let rep = model.draw_replicate(index as u64)?;
        fit_statistic(&rep_design, skip_cols, p, &config.grid, &rep)
            .map_err(|source| InferenceError::Replicate { index, source })
    })?;

    let mut rows = Vec::with_capacity(config.s + 1);
    rows.push(observed.clone());
    rows.extend(replicate_rows);
    let curves = CurveSet::new(rows)?;

    let envelope = build_envelope(&curves, config.measure, config.alpha)?;
    let (ph_p_value, nc_p_value) = comparators(&curves);

    let d = config.grid.len();
    let coefficient_labels: Vec<CoordinateLabel> = (0..p)
        .flat_map(|j| {
            let name = design.x_labels[j].clone();
            config.grid.taus().iter().map(move |&tau| CoordinateLabel {
                coefficient: name.clone(),
                tau,
            })
        })
        .collect();
    debug_assert_eq!(coefficient_labels.len(), p * d);

    let significant_coordinates: Vec<CoordinateLabel> = envelope
        .outside_mask
        .iter()
        .zip(coefficient_labels.iter())
        .filter(|(&out, _)| out)
        .map(|(_, label)| label.clone())
        .collect();

    let n = dataset.n() as f64;
    let diagnostics = Diagnostics {
        clamped_scales: model.diagnostics.clamped_scales,
        inexact_zero_taus: model.diagnostics.inexact_zero_taus,
        extreme_tau: config
            .grid
            .taus()
            .iter()
            .any(|&t| n * t.min(1.0 - t) < 1.0),
        envelope_degenerate: envelope.degenerate,
    };

    Ok(TestOutcome {
        envelope,
        observed,
        coefficient_labels,
        significant_coordinates,
        ph_p_value,
        nc_p_value,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, Role};
    use rand::Rng;

    fn grid(taus: &[f64]) -> QuantileGrid {
        QuantileGrid::new(taus.to_vec()).unwrap()
    }

    fn config(strategy: StrategyId, taus: &[f64], s: usize, seed: u64) -> TestConfig {
        TestConfig {
            grid: grid(taus),
            strategy,
            s,
            alpha: 0.05,
            measure: MeasureId::Erl,
            seed,
            workers: 1,
        }
    }

    fn continuous_dataset(seed: u64, n: usize, slope: f64) -> Dataset {
        let mut rng = crate::rng::stream_rng(seed, &[1]);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.5)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| slope * x[i] + 0.8 * z[i] + rng.gen_range(-0.5..0.5))
            .collect();
        Dataset::new(
            y,
            vec![
                Column::continuous("x", Role::Interesting, x),
                Column::continuous("z", Role::Nuisance, z),
            ],
        )
        .unwrap()
    }

    #[test]
    fn fl_observed_statistic_is_the_full_model_slope_curve() {
        let mut rng = crate::rng::stream_rng(3, &[0]);
        let n = 30;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x[i] + rng.gen_range(-1.0..1.0)).collect();
        let ds = Dataset::new(
            y.clone(),
            vec![Column::continuous("x", Role::Interesting, x.clone())],
        )
        .unwrap();
        let design = build_design(&ds).unwrap();
        let g = grid(&[0.25, 0.5, 0.75]);
        let stat = observed_statistic(&ds, &design, &g, StrategyId::Fl).unwrap();
        assert_eq!(stat.len(), 3);
        // Independent route: fit [x | 1] directly per tau and read the slope.
        let full = design.full();
        let yv = DVector::from_column_slice(&y);
        for (k, &tau) in g.taus().iter().enumerate() {
            let fit = qr_fit(&full, &yv, tau).unwrap();
            assert!((stat[k] - fit.beta[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn rl_with_intercept_only_nuisance_centers_y() {
        let mut rng = crate::rng::stream_rng(4, &[0]);
        let n = 25;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + rng.gen_range(-1.0..1.0)).collect();
        let ds = Dataset::new(
            y.clone(),
            vec![Column::continuous("x", Role::Interesting, x.clone())],
        )
        .unwrap();
        let design = build_design(&ds).unwrap();
        let g = grid(&[0.3, 0.6]);
        let stat = observed_statistic(&ds, &design, &g, StrategyId::Rl).unwrap();

        let mean = y.iter().sum::<f64>() / n as f64;
        let centered = DVector::from_iterator(n, y.iter().map(|v| v - mean));
        let ix = design.intercept_x();
        for (k, &tau) in g.taus().iter().enumerate() {
            let fit = qr_fit(&ix, &centered, tau).unwrap();
            assert!((stat[k] - fit.beta[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn rq_uses_the_matching_residual_vector_per_tau() {
        // Hand-trace on n=6: residuals differ across taus, and each fit must
        // consume its own column.
        let y = vec![0.0, 1.0, 4.0, 9.0, 16.0, 25.0];
        let z = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let x = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let ds = Dataset::new(
            y.clone(),
            vec![
                Column::continuous("x", Role::Interesting, x),
                Column::continuous("z", Role::Nuisance, z),
            ],
        )
        .unwrap();
        let design = build_design(&ds).unwrap();
        let g = grid(&[0.25, 0.75]);

        let eps = quantile_filtered_residuals(
            &design.z,
            &DVector::from_column_slice(&y),
            &g,
        )
        .unwrap();
        let col0: Vec<f64> = eps.column(0).iter().cloned().collect();
        let col1: Vec<f64> = eps.column(1).iter().cloned().collect();
        assert!(
            col0.iter().zip(col1.iter()).any(|(a, b)| (a - b).abs() > 1e-9),
            "different taus must give different residuals on curved data"
        );

        let stat = observed_statistic(&ds, &design, &g, StrategyId::Rq).unwrap();
        let ix = design.intercept_x();
        for (k, &tau) in g.taus().iter().enumerate() {
            let fit = qr_fit(&ix, &eps.column(k).into_owned(), tau).unwrap();
            assert!((stat[k] - fit.beta[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn outcome_is_identical_across_worker_counts() {
        let ds = continuous_dataset(8, 40, 0.5);
        for strategy in [StrategyId::Fl, StrategyId::Rls, StrategyId::Rq] {
            let mut serial_cfg = config(strategy, &[0.2, 0.5, 0.8], 49, 1234);
            serial_cfg.workers = 1;
            let mut pooled_cfg = serial_cfg.clone();
            pooled_cfg.workers = 8;
            let a = global_test(&ds, &serial_cfg).unwrap();
            let b = global_test(&ds, &pooled_cfg).unwrap();
            assert_eq!(a, b, "strategy {strategy} must not depend on workers");
        }
    }

    #[test]
    fn significance_localizes_an_upper_tail_shift() {
        // Level "b" differs from the reference only in the upper tail.
        let mut rng = crate::rng::stream_rng(9, &[7]);
        let n = 300;
        let mut labels = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let is_b = i % 2 == 0;
            labels.push(if is_b { "b".to_string() } else { "a".to_string() });
            let noise: f64 = rng.gen_range(-1.0..1.0);
            let mut v = noise;
            if is_b && noise > 0.6 {
                v += 4.0; // upper-tail-only shift
            }
            y.push(v);
        }
        let ds = Dataset::new(
            y,
            vec![Column::categorical("group", Role::Interesting, labels)],
        )
        .unwrap();
        let cfg = config(StrategyId::Wn, &[0.1, 0.3, 0.5, 0.7, 0.9], 199, 77);
        let out = global_test(&ds, &cfg).unwrap();
        assert!(out.envelope.p_value <= 0.05, "p = {}", out.envelope.p_value);
        assert!(!out.significant_coordinates.is_empty());
        for label in &out.significant_coordinates {
            assert_eq!(label.coefficient, "group=b");
            assert!(
                label.tau >= 0.7,
                "shift lives in the upper tail, got tau = {}",
                label.tau
            );
        }
    }

    #[test]
    fn significant_iff_p_below_alpha() {
        for seed in 0..8u64 {
            let ds = continuous_dataset(20 + seed, 30, if seed % 2 == 0 { 0.0 } else { 2.0 });
            let cfg = config(StrategyId::Rl, &[0.25, 0.5, 0.75], 39, seed);
            let out = global_test(&ds, &cfg).unwrap();
            assert_eq!(
                out.envelope.p_value <= cfg.alpha,
                !out.significant_coordinates.is_empty()
            );
        }
    }

    #[test]
    fn pointwise_pvalues_examples_and_oracle() {
        // Row 0 equal to every replicate: p = 1.
        let rows = vec![vec![2.0]; 6];
        let cs = CurveSet::new(rows).unwrap();
        assert_eq!(pointwise_perm_pvalues(&cs), vec![1.0]);

        // Row 0 strictly most extreme among 20 rows: p = 1/20.
        let mut rows: Vec<Vec<f64>> = (1..20).map(|i| vec![(i as f64 * 0.731).sin()]).collect();
        rows.insert(0, vec![50.0]);
        let cs = CurveSet::new(rows).unwrap();
        assert!((pointwise_perm_pvalues(&cs)[0] - 0.05).abs() < 1e-12);

        // Random 6x3 set against a direct counting oracle.
        let mut rng = crate::rng::stream_rng(31, &[0]);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let cs = CurveSet::new(rows.clone()).unwrap();
        let pvals = pointwise_perm_pvalues(&cs);
        for col in 0..3 {
            let mut reps: Vec<f64> = (1..6).map(|i| rows[i][col]).collect();
            reps.sort_by(f64::total_cmp);
            let med = reps[2];
            let obs = (rows[0][col] - med).abs();
            let count = rows.iter().filter(|r| (r[col] - med).abs() >= obs).count();
            assert!((pvals[col] - count as f64 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn comparator_examples() {
        // All pointwise p-values 1: PH = NC = 1.
        let rows = vec![vec![3.0, 4.0]; 5];
        let cs = CurveSet::new(rows).unwrap();
        let (ph, nc) = comparators(&cs);
        assert_eq!((ph, nc), (1.0, 1.0));

        // Single coordinate: PH = NC.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let cs = CurveSet::new(rows).unwrap();
        let (ph, nc) = comparators(&cs);
        assert_eq!(ph, nc);
    }

    #[test]
    fn holm_scales_the_minimum_by_m() {
        // m = 10 coordinates, one clearly extreme: PH = min(1, 10 * p) while
        // it stays the step-down minimum.
        let mut rng = crate::rng::stream_rng(37, &[0]);
        let mut rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        rows[0][4] = 100.0;
        let cs = CurveSet::new(rows).unwrap();
        let pvals = pointwise_perm_pvalues(&cs);
        let (ph, nc) = comparators(&cs);
        assert!((nc - 1.0 / 40.0).abs() < 1e-12);
        assert!((ph - (10.0 * pvals[4]).min(1.0)).abs() < 1e-12);
        assert!(nc <= ph);
    }

    #[test]
    fn nc_never_exceeds_ph() {
        for seed in 0..10u64 {
            let mut rng = crate::rng::stream_rng(41, &[seed]);
            let rows: Vec<Vec<f64>> = (0..15)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let cs = CurveSet::new(rows).unwrap();
            let (ph, nc) = comparators(&cs);
            assert!(nc <= ph);
        }
    }

    #[test]
    fn scale_equivariance_of_fl_test_vector() {
        let ds = continuous_dataset(55, 30, 1.0);
        let scaled = Dataset::new(
            ds.y().iter().map(|v| v * 3.0).collect(),
            ds.columns().to_vec(),
        )
        .unwrap();
        let cfg = config(StrategyId::Fl, &[0.3, 0.7], 19, 5);
        let a = global_test(&ds, &cfg).unwrap();
        let b = global_test(&scaled, &cfg).unwrap();
        for (va, vb) in a.observed.iter().zip(b.observed.iter()) {
            assert!((vb - 3.0 * va).abs() < 1e-7 * (1.0 + va.abs()));
        }
        assert_eq!(a.envelope.p_value, b.envelope.p_value);
    }

    #[test]
    fn config_validation() {
        let ds = continuous_dataset(1, 10, 0.0);
        let mut cfg = config(StrategyId::Fl, &[0.5], 9, 1);
        cfg.s = 0;
        assert!(matches!(
            global_test(&ds, &cfg),
            Err(InferenceError::BadConfig(_))
        ));
        let mut cfg = config(StrategyId::Fl, &[0.5], 9, 1);
        cfg.alpha = 1.0;
        assert!(matches!(
            global_test(&ds, &cfg),
            Err(InferenceError::BadConfig(_))
        ));
    }
}
