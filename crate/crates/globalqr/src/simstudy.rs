//! Synthetic experiments and the significance/power study runner.
//!
//! Eight data-generating families probe the test under tail, scale, shape
//! and correlation alternatives, each with a null variant that severs the
//! link between the interesting covariate and the response while keeping
//! the nuisance structure intact. The study runner generates independent
//! datasets per (experiment, N, mode) cell, runs the requested methods on
//! each, and tallies rejection rates.

use crate::dataset::{Column, DataError, Dataset, Role};
use crate::envelope::MeasureId;
use crate::exec::indexed_try_map;
use crate::grid::QuantileGrid;
use crate::inference::{global_test, InferenceError, TestConfig};
use crate::permutation::StrategyId;
use crate::rng::{stream_id, stream_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StudentT};
use thiserror::Error;

const STUDY_DATA_STREAM: u64 = 0x6461_7461;
const STUDY_TEST_STREAM: u64 = 0x7465_7374;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("unknown experiment tag '{0}'")]
    BadExperiment(String),
    #[error("unknown method '{0}' (expected fl|flplus|wn|rl|rls|rq|ph|nc)")]
    BadMethod(String),
    #[error("invalid experiment parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Generate(#[from] DataError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("experiment {tag} N={n} mode={mode} replicate {replicate}: {source}")]
    Cell {
        tag: String,
        n: usize,
        mode: String,
        replicate: usize,
        #[source]
        source: Box<StudyError>,
    },
}

/// Whether a dataset is drawn under the null (no interesting-covariate
/// effect) or under the experiment's alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Null,
    Alternative,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "null" => Some(Mode::Null),
            "power" | "alternative" => Some(Mode::Alternative),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Null => write!(f, "null"),
            Mode::Alternative => write!(f, "power"),
        }
    }
}

/// Nuisance sub-case for the tail and scale experiments (families I and
/// III): the distribution of Z and the multipliers (a, b) in
/// Y = (1 + aZ)Y' + bZ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocScaleCase {
    /// Continuous Z ~ Unif(0, 1.5), location only: a = 0, b = 1.
    A,
    /// Continuous Z ~ Unif(0, 1.5), location and scale: a = 1, b = 1.
    B,
    /// Categorical Z ~ Bernoulli(0.5), location only: a = 0, b = 0.1.
    C,
    /// Categorical Z ~ Bernoulli(0.5), location and scale: a = 0.1, b = 0.1.
    D,
}

impl LocScaleCase {
    pub fn multipliers(self) -> (f64, f64) {
        match self {
            LocScaleCase::A => (0.0, 1.0),
            LocScaleCase::B => (1.0, 1.0),
            LocScaleCase::C => (0.0, 0.1),
            LocScaleCase::D => (0.1, 0.1),
        }
    }

    pub fn z_categorical(self) -> bool {
        matches!(self, LocScaleCase::C | LocScaleCase::D)
    }

    fn draw_z(self, rng: &mut ChaCha8Rng) -> f64 {
        if self.z_categorical() {
            if rng.gen_bool(0.5) {
                1.0
            } else {
                0.0
            }
        } else {
            rng.gen_range(0.0..1.5)
        }
    }

    fn tag(self) -> &'static str {
        match self {
            LocScaleCase::A => "a",
            LocScaleCase::B => "b",
            LocScaleCase::C => "c",
            LocScaleCase::D => "d",
        }
    }
}

/// Nuisance sub-case for the noise experiments (families II and IV): the
/// distribution of Z (the branch threshold variable Z1 is always
/// Unif(0, 1.5)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCase {
    /// Continuous Z ~ Unif(0, 1).
    A,
    /// Categorical Z ~ Bernoulli(0.5).
    B,
}

impl NoiseCase {
    pub fn z_categorical(self) -> bool {
        matches!(self, NoiseCase::B)
    }

    fn draw_z(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseCase::A => rng.gen_range(0.0..1.0),
            NoiseCase::B => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn tag(self) -> &'static str {
        match self {
            NoiseCase::A => "a",
            NoiseCase::B => "b",
        }
    }
}

/// A fully parameterized experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExperimentId {
    /// Two-group X; groups differ in the tails (normal vs heavy-tailed);
    /// nuisance shifts location or location and scale.
    I(LocScaleCase),
    /// As I, with a "noise" nuisance that replaces part of the response.
    II(NoiseCase),
    /// X drawn as a truncated Poisson controls the tail df of the response.
    III(LocScaleCase),
    /// As III with the noise nuisance.
    IV(NoiseCase),
    /// X moves the shape of a Gamma response; Z scales it.
    V { categorical_x: bool },
    /// Continuous X and Z sharing a common component (correlation c);
    /// Gamma response with shape 4 + X and rate 1 + Z.
    VI { c: f64 },
    /// Two-group X correlated with Z through a shared component.
    VII { c: f64, a: f64, b: f64 },
    /// As VII with the noise nuisance; eps ~ N(1, sigma_eps^2).
    VIII { c: f64, sigma_eps: f64 },
}

impl ExperimentId {
    /// Parse a tag like "Ia", "IIb", "V-cat", "VI", "VIII"; the numeric
    /// parameters apply to the correlated families only.
    pub fn parse(tag: &str, c: f64, a: f64, b: f64, sigma_eps: f64) -> Result<Self, StudyError> {
        let check_c = |id: ExperimentId| {
            if (0.0..=1.0).contains(&c) {
                Ok(id)
            } else {
                Err(StudyError::InvalidParameters(format!(
                    "c must lie in [0,1], got {c}"
                )))
            }
        };
        let t = tag.trim();
        let upper = t.to_ascii_uppercase();
        let loc_scale = |rest: &str| match rest {
            "A" => Some(LocScaleCase::A),
            "B" => Some(LocScaleCase::B),
            "C" => Some(LocScaleCase::C),
            "D" => Some(LocScaleCase::D),
            _ => None,
        };
        let noise = |rest: &str| match rest {
            "A" => Some(NoiseCase::A),
            "B" => Some(NoiseCase::B),
            _ => None,
        };
        // Longest family prefix first.
        if upper == "VIII" {
            if sigma_eps <= 0.0 {
                return Err(StudyError::InvalidParameters(format!(
                    "sigma_eps must be positive, got {sigma_eps}"
                )));
            }
            return check_c(ExperimentId::VIII { c, sigma_eps });
        }
        if upper == "VII" {
            return check_c(ExperimentId::VII { c, a, b });
        }
        if upper == "VI" {
            return check_c(ExperimentId::VI { c });
        }
        if let Some(rest) = upper.strip_prefix("IV") {
            if let Some(case) = noise(rest) {
                return Ok(ExperimentId::IV(case));
            }
        }
        if let Some(rest) = upper.strip_prefix("III") {
            if let Some(case) = loc_scale(rest) {
                return Ok(ExperimentId::III(case));
            }
        }
        if let Some(rest) = upper.strip_prefix("II") {
            if let Some(case) = noise(rest) {
                return Ok(ExperimentId::II(case));
            }
        }
        if let Some(rest) = upper.strip_prefix("V") {
            match rest.trim_start_matches('-') {
                "CAT" => return Ok(ExperimentId::V { categorical_x: true }),
                "CONT" => return Ok(ExperimentId::V { categorical_x: false }),
                _ => {}
            }
        }
        if let Some(rest) = upper.strip_prefix("I") {
            if let Some(case) = loc_scale(rest) {
                return Ok(ExperimentId::I(case));
            }
        }
        Err(StudyError::BadExperiment(tag.to_string()))
    }

    pub fn family(&self) -> &'static str {
        match self {
            ExperimentId::I(_) => "I",
            ExperimentId::II(_) => "II",
            ExperimentId::III(_) => "III",
            ExperimentId::IV(_) => "IV",
            ExperimentId::V { .. } => "V",
            ExperimentId::VI { .. } => "VI",
            ExperimentId::VII { .. } => "VII",
            ExperimentId::VIII { .. } => "VIII",
        }
    }

    pub fn subcase(&self) -> String {
        match self {
            ExperimentId::I(case) | ExperimentId::III(case) => case.tag().to_string(),
            ExperimentId::II(case) | ExperimentId::IV(case) => case.tag().to_string(),
            ExperimentId::V { categorical_x } => {
                if *categorical_x { "cat" } else { "cont" }.to_string()
            }
            _ => String::new(),
        }
    }

    pub fn tag(&self) -> String {
        format!("{}{}", self.family(), self.subcase())
    }
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

fn student_t(rng: &mut ChaCha8Rng, df: f64) -> f64 {
    StudentT::new(df).unwrap().sample(rng)
}

/// Gamma draw in the shape/rate parameterization.
fn gamma_rate(rng: &mut ChaCha8Rng, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
}

/// Y' for the two-group tail families: N(0,1) for the reference group and
/// heavy-tailed t4 for the other; under the null both groups are N(0,1).
fn tail_response(rng: &mut ChaCha8Rng, x_is_one: bool, mode: Mode) -> f64 {
    if mode == Mode::Alternative && x_is_one {
        student_t(rng, 4.0)
    } else {
        std_normal(rng)
    }
}

/// Truncated Poisson degrees of freedom, max(Poisson(3), 1).
fn poisson_df(rng: &mut ChaCha8Rng) -> u64 {
    let v: f64 = Poisson::new(3.0).unwrap().sample(rng);
    (v as u64).max(1)
}

/// Generate one dataset for `experiment` with `n` rows.
///
/// Interesting covariates are named "x", nuisance covariates "z" (and "z1"
/// for the noise families). Deterministic given the RNG stream.
pub fn generate(
    experiment: ExperimentId,
    n: usize,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset, StudyError> {
    let mut y = Vec::with_capacity(n);
    let dataset = match experiment {
        ExperimentId::I(case) => {
            let (a, b) = case.multipliers();
            let mut x_labels = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let x1 = rng.gen_bool(0.5);
                let yp = tail_response(rng, x1, mode);
                let z = case.draw_z(rng);
                x_labels.push(if x1 { "1" } else { "0" }.to_string());
                z_vals.push(z);
                y.push((1.0 + a * z) * yp + b * z);
            }
            let z_col = if case.z_categorical() {
                Column::categorical(
                    "z",
                    Role::Nuisance,
                    z_vals.iter().map(|&v| format!("{}", v as i64)).collect(),
                )
            } else {
                Column::continuous("z", Role::Nuisance, z_vals)
            };
            Dataset::new(
                y,
                vec![Column::categorical("x", Role::Interesting, x_labels), z_col],
            )
        }
        ExperimentId::II(case) => {
            let mut x_labels = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            let mut z1_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let x1 = rng.gen_bool(0.5);
                let yp = tail_response(rng, x1, mode);
                let z = case.draw_z(rng);
                let z1 = rng.gen_range(0.0..1.5);
                let eps = Normal::new(1.0, 0.2).unwrap().sample(rng);
                x_labels.push(if x1 { "1" } else { "0" }.to_string());
                z_vals.push(z);
                z1_vals.push(z1);
                y.push(if z < z1 { eps } else { yp });
            }
            let z_col = if case.z_categorical() {
                Column::categorical(
                    "z",
                    Role::Nuisance,
                    z_vals.iter().map(|&v| format!("{}", v as i64)).collect(),
                )
            } else {
                Column::continuous("z", Role::Nuisance, z_vals)
            };
            Dataset::new(
                y,
                vec![
                    Column::categorical("x", Role::Interesting, x_labels),
                    z_col,
                    Column::continuous("z1", Role::Nuisance, z1_vals),
                ],
            )
        }
        ExperimentId::III(case) => {
            let (a, b) = case.multipliers();
            let mut x_labels = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let df = poisson_df(rng);
                let yp = match mode {
                    Mode::Alternative => student_t(rng, df as f64),
                    Mode::Null => student_t(rng, 4.0),
                };
                let z = case.draw_z(rng);
                x_labels.push(format!("{df:02}"));
                z_vals.push(z);
                y.push((1.0 + a * z) * yp + b * z);
            }
            let z_col = if case.z_categorical() {
                Column::categorical(
                    "z",
                    Role::Nuisance,
                    z_vals.iter().map(|&v| format!("{}", v as i64)).collect(),
                )
            } else {
                Column::continuous("z", Role::Nuisance, z_vals)
            };
            Dataset::new(
                y,
                vec![Column::categorical("x", Role::Interesting, x_labels), z_col],
            )
        }
        ExperimentId::IV(case) => {
            let mut x_labels = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            let mut z1_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let df = poisson_df(rng);
                let yp = match mode {
                    Mode::Alternative => student_t(rng, df as f64),
                    Mode::Null => student_t(rng, 4.0),
                };
                let z = case.draw_z(rng);
                let z1 = rng.gen_range(0.0..1.5);
                let eps = Normal::new(1.0, 0.2).unwrap().sample(rng);
                x_labels.push(format!("{df:02}"));
                z_vals.push(z);
                z1_vals.push(z1);
                y.push(if z < z1 { eps } else { yp });
            }
            let z_col = if case.z_categorical() {
                Column::categorical(
                    "z",
                    Role::Nuisance,
                    z_vals.iter().map(|&v| format!("{}", v as i64)).collect(),
                )
            } else {
                Column::continuous("z", Role::Nuisance, z_vals)
            };
            Dataset::new(
                y,
                vec![
                    Column::categorical("x", Role::Interesting, x_labels),
                    z_col,
                    Column::continuous("z1", Role::Nuisance, z1_vals),
                ],
            )
        }
        ExperimentId::V { categorical_x } => {
            let mut x_vals = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let x = if categorical_x {
                    if rng.gen_bool(0.5) {
                        5.0
                    } else {
                        4.7
                    }
                } else {
                    rng.gen_range(4.0..5.0)
                };
                let z = rng.gen_range(0.5..2.0);
                let shape = match mode {
                    Mode::Alternative => x,
                    Mode::Null => 4.5,
                };
                x_vals.push(x);
                z_vals.push(z);
                y.push(gamma_rate(rng, shape, z));
            }
            let x_col = if categorical_x {
                Column::categorical(
                    "x",
                    Role::Interesting,
                    x_vals.iter().map(|v| format!("{v}")).collect(),
                )
            } else {
                Column::continuous("x", Role::Interesting, x_vals)
            };
            Dataset::new(
                y,
                vec![x_col, Column::continuous("z", Role::Nuisance, z_vals)],
            )
        }
        ExperimentId::VI { c } => {
            validate_c(c)?;
            let mut x_vals = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let a: f64 = rng.gen_range(0.0..1.0);
                let b: f64 = rng.gen_range(0.0..1.0);
                let common: f64 = rng.gen_range(0.0..1.0);
                let x = (1.0 - c) * a + c * common;
                let z = (1.0 - c) * b + c * common;
                let shape = match mode {
                    Mode::Alternative => 4.0 + x,
                    Mode::Null => 4.5,
                };
                x_vals.push(x);
                z_vals.push(z);
                y.push(gamma_rate(rng, shape, 1.0 + z));
            }
            Dataset::new(
                y,
                vec![
                    Column::continuous("x", Role::Interesting, x_vals),
                    Column::continuous("z", Role::Nuisance, z_vals),
                ],
            )
        }
        ExperimentId::VII { c, a, b } => {
            validate_c(c)?;
            let mut x_labels = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let ua: f64 = rng.gen_range(0.0..1.0);
                let ub: f64 = rng.gen_range(0.0..1.0);
                let common: f64 = rng.gen_range(0.0..1.0);
                let x1 = ((1.0 - c) * ua + c * common).round() >= 1.0;
                let z = 1.5 * ((1.0 - c) * ub + c * common);
                let yp = tail_response(rng, x1, mode);
                x_labels.push(if x1 { "1" } else { "0" }.to_string());
                z_vals.push(z);
                y.push((1.0 + a * z) * yp + b * z);
            }
            Dataset::new(
                y,
                vec![
                    Column::categorical("x", Role::Interesting, x_labels),
                    Column::continuous("z", Role::Nuisance, z_vals),
                ],
            )
        }
        ExperimentId::VIII { c, sigma_eps } => {
            validate_c(c)?;
            if sigma_eps <= 0.0 {
                return Err(StudyError::InvalidParameters(format!(
                    "sigma_eps must be positive, got {sigma_eps}"
                )));
            }
            let mut x_labels = Vec::with_capacity(n);
            let mut z_vals = Vec::with_capacity(n);
            let mut z1_vals = Vec::with_capacity(n);
            for _ in 0..n {
                let ua: f64 = rng.gen_range(0.0..1.0);
                let ub: f64 = rng.gen_range(0.0..1.0);
                let common: f64 = rng.gen_range(0.0..1.0);
                let x1 = ((1.0 - c) * ua + c * common).round() >= 1.0;
                let z = 1.5 * ((1.0 - c) * ub + c * common);
                let yp = tail_response(rng, x1, mode);
                let z1 = rng.gen_range(0.0..1.5);
                let eps = Normal::new(1.0, sigma_eps).unwrap().sample(rng);
                x_labels.push(if x1 { "1" } else { "0" }.to_string());
                z_vals.push(z);
                z1_vals.push(z1);
                y.push(if z < z1 { eps } else { yp });
            }
            Dataset::new(
                y,
                vec![
                    Column::categorical("x", Role::Interesting, x_labels),
                    Column::continuous("z", Role::Nuisance, z_vals),
                    Column::continuous("z1", Role::Nuisance, z1_vals),
                ],
            )
        }
    };
    dataset.map_err(StudyError::Generate)
}

fn validate_c(c: f64) -> Result<(), StudyError> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(StudyError::InvalidParameters(format!(
            "c must lie in [0,1], got {c}"
        )))
    }
}

/// A method tallied by the study: a global permutation test, or one of the
/// pointwise comparators (computed on the FL curve set).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gqr(StrategyId),
    /// Minimum Holm-adjusted pointwise permutation p-value.
    PointwiseHolm,
    /// Minimum unadjusted pointwise permutation p-value.
    PointwiseMin,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ph" => Some(Method::PointwiseHolm),
            "nc" => Some(Method::PointwiseMin),
            other => StrategyId::parse(other).map(Method::Gqr),
        }
    }

    fn strategy(self) -> StrategyId {
        match self {
            Method::Gqr(s) => s,
            // The comparators read pointwise p-values off the FL curve set.
            Method::PointwiseHolm | Method::PointwiseMin => StrategyId::Fl,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Gqr(s) => write!(f, "{s}"),
            Method::PointwiseHolm => write!(f, "ph"),
            Method::PointwiseMin => write!(f, "nc"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub experiments: Vec<ExperimentId>,
    pub methods: Vec<Method>,
    pub sample_sizes: Vec<usize>,
    pub modes: Vec<Mode>,
    pub replicates: usize,
    /// Permutations per test.
    pub s: usize,
    pub grid: QuantileGrid,
    pub alpha: f64,
    pub measure: MeasureId,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub experiment: String,
    pub subcase: String,
    pub strategy: String,
    pub n: usize,
    pub mode: String,
    pub replicates: usize,
    pub s: usize,
    pub alpha: f64,
    pub rejections: usize,
    pub rate: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    /// Long-format CSV with one row per (experiment, N, mode, method) cell.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("experiment,subcase,strategy,N,mode,replicates,s,alpha,rejections,rate,mc_se\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.experiment,
                r.subcase,
                r.strategy,
                r.n,
                r.mode,
                r.replicates,
                r.s,
                r.alpha,
                r.rejections,
                r.rate,
                r.mc_se
            ));
        }
        out
    }
}

/// Run the study: for every (experiment, N, mode) cell, draw `replicates`
/// independent datasets, apply every requested method to each, and tally
/// rejections at `alpha`. Deterministic given the seed and schedule-free.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult, StudyError> {
    if cfg.replicates == 0 {
        return Ok(StudyResult::default());
    }

    let cells: Vec<(ExperimentId, usize, Mode)> = cfg
        .experiments
        .iter()
        .flat_map(|&e| {
            cfg.sample_sizes.iter().flat_map(move |&n| {
                cfg.modes.iter().map(move |&m| (e, n, m))
            })
        })
        .collect();

    let mut strategies: Vec<StrategyId> = Vec::new();
    for m in &cfg.methods {
        let s = m.strategy();
        if !strategies.contains(&s) {
            strategies.push(s);
        }
    }

    let tasks = cells.len() * cfg.replicates;
    let flags: Vec<Vec<bool>> = indexed_try_map(cfg.workers, tasks, |task| -> Result<Vec<bool>, StudyError> {
        let cell = task / cfg.replicates;
        let replicate = task % cfg.replicates;
        let (experiment, n, mode) = cells[cell];
        let wrap = |source: StudyError| StudyError::Cell {
            tag: experiment.tag(),
            n,
            mode: mode.to_string(),
            replicate,
            source: Box::new(source),
        };

        let mut data_rng = stream_rng(cfg.seed, &[STUDY_DATA_STREAM, cell as u64, replicate as u64]);
        let dataset = generate(experiment, n, mode, &mut data_rng).map_err(wrap)?;
        let test_seed = stream_id(&[cfg.seed, STUDY_TEST_STREAM, cell as u64, replicate as u64]);

        let mut outcomes = Vec::with_capacity(strategies.len());
        for &strategy in &strategies {
            let outcome = global_test(
                &dataset,
                &TestConfig {
                    grid: cfg.grid.clone(),
                    strategy,
                    s: cfg.s,
                    alpha: cfg.alpha,
                    measure: cfg.measure,
                    seed: test_seed,
                    workers: 1,
                },
            )
            .map_err(|e| wrap(StudyError::Inference(e)))?;
            outcomes.push(outcome);
        }
        let outcome_for = |s: StrategyId| {
            let pos = strategies.iter().position(|&t| t == s).expect("requested");
            &outcomes[pos]
        };

        Ok(cfg
            .methods
            .iter()
            .map(|&method| match method {
                Method::Gqr(s) => outcome_for(s).envelope.p_value <= cfg.alpha,
                Method::PointwiseHolm => outcome_for(StrategyId::Fl).ph_p_value <= cfg.alpha,
                Method::PointwiseMin => outcome_for(StrategyId::Fl).nc_p_value <= cfg.alpha,
            })
            .collect())
    })?;

    let mut rows = Vec::with_capacity(cells.len() * cfg.methods.len());
    for (ci, &(experiment, n, mode)) in cells.iter().enumerate() {
        for (mi, method) in cfg.methods.iter().enumerate() {
            let rejections = (0..cfg.replicates)
                .filter(|&r| flags[ci * cfg.replicates + r][mi])
                .count();
            let rate = rejections as f64 / cfg.replicates as f64;
            let mc_se = (rate * (1.0 - rate) / cfg.replicates as f64).sqrt();
            rows.push(StudyRow {
                experiment: experiment.family().to_string(),
                subcase: experiment.subcase(),
                strategy: method.to_string(),
                n,
                mode: mode.to_string(),
                replicates: cfg.replicates,
                s: cfg.s,
                alpha: cfg.alpha,
                rejections,
                rate,
                mc_se,
            });
        }
    }
    Ok(StudyResult { rows })
}
