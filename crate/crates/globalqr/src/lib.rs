//! Global significance testing for covariate effects in linear quantile
//! regression.
//!
//! The question answered here is whether a covariate affects *any* quantile
//! of the response distribution, not just its mean: the regression is fit
//! at a whole grid of quantile levels, the coefficient curves of the
//! covariates under test are stacked into one long vector, replicates of
//! that vector are simulated under the no-effect null by a permutation
//! strategy, and a rank envelope over observed and replicate vectors turns
//! the comparison into a single test with family-wise error control. The
//! envelope doubles as a graphical acceptance region: the coordinates where
//! the observed curve leaves the band are exactly the quantiles (and, for a
//! categorical covariate, the levels) responsible for a rejection.
//!
//! Six permutation strategies cover different nuisance structures: the
//! residual-based FL and FL+, within-group permutation for categorical
//! nuisance (WN), and filtering strategies that remove the nuisance
//! location (RL), location and scale (RLS), or full quantile effect (RQ)
//! before permuting.

pub mod curves;
pub mod dataset;
pub mod design;
pub mod envelope;
mod exec;
pub mod grid;
pub mod inference;
pub mod permutation;
pub mod rng;
pub mod simstudy;
pub mod solver;

pub use curves::CurveSet;
pub use dataset::{Column, ColumnData, DataError, Dataset, Role};
pub use design::{assemble_test_vector, build_design, disassemble_test_vector, DesignMatrices};
pub use envelope::{build_envelope, holm_adjust, GlobalEnvelope, MeasureId};
pub use grid::QuantileGrid;
pub use inference::{
    comparators, global_test, observed_statistic, pointwise_perm_pvalues, InferenceError,
    TestConfig, TestOutcome,
};
pub use permutation::{prepare_null_model, NullModel, ReplicateData, StrategyId};
pub use simstudy::{generate, run_study, ExperimentId, Method, Mode, StudyConfig, StudyResult};
pub use solver::{check_loss, ols_fit, qr_fit, qr_fit_grid, QrFit, SolverError};
