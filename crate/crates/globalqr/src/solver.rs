//! Check-loss minimization for linear quantile regression, plus the
//! ordinary least-squares helper used by the residual-filtering strategies.
//!
//! `qr_fit` solves min_beta sum_i rho_tau(y_i - x_i' beta) exactly by
//! walking vertices of the piecewise-linear objective. Every vertex
//! interpolates m observations (the basis); one step exchanges a basis row
//! for the row at which the steepest descent edge stops improving, found by
//! a weighted-median walk over the residual sign changes along the edge.
//! The walk terminates at a vertex where the subgradient condition
//! -tau <= c_t <= 1-tau holds for every basis coordinate, which certifies a
//! global minimum of the convex objective.

use crate::grid::QuantileGrid;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("tau must lie strictly inside (0,1), got {0}")]
    InvalidTau(f64),
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("design needs at least as many rows as columns, got n={n}, m={m}")]
    TooFewRows { n: usize, m: usize },
    #[error("no optimality certificate after {iterations} iterations at tau={tau}")]
    DidNotConverge { iterations: usize, tau: f64 },
}

/// The check loss rho_tau(u): u*tau for u >= 0 and -u*(1-tau) for u < 0.
pub fn check_loss(u: f64, tau: f64) -> Result<f64, SolverError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(SolverError::InvalidTau(tau));
    }
    Ok(rho(u, tau))
}

#[inline]
fn rho(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        u * tau
    } else {
        -u * (1.0 - tau)
    }
}

/// One quantile-regression fit.
#[derive(Debug, Clone)]
pub struct QrFit {
    pub tau: f64,
    /// Coefficients for the m design columns.
    pub beta: DVector<f64>,
    /// Achieved objective sum_i rho_tau(r_i).
    pub loss: f64,
    pub residuals: DVector<f64>,
    /// Count of residuals with |r| <= `zero_tol`.
    pub n_zero: usize,
    /// Scale-aware threshold used for `n_zero`: 1e-8 * (1 + max|y|).
    pub zero_tol: f64,
    /// Set when n * min(tau, 1-tau) < 1; the fit is still well posed but
    /// sits in the far tail of the sample.
    pub extreme_tau: bool,
    /// Rows interpolated at the optimum; useful as a warm start.
    pub basis: Vec<usize>,
}

/// Ordinary least-squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
}

/// Select m linearly independent rows by Gaussian elimination with
/// row pivoting; these form the starting vertex.
fn greedy_basis(a: &DMatrix<f64>) -> Result<Vec<usize>, SolverError> {
    let (n, m) = a.shape();
    let mut work = a.clone();
    let mut used = vec![false; n];
    let mut basis = Vec::with_capacity(m);
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for col in 0..m {
        let mut pivot = None;
        let mut best = 0.0;
        for i in 0..n {
            if !used[i] {
                let v = work[(i, col)].abs();
                if v > best {
                    best = v;
                    pivot = Some(i);
                }
            }
        }
        let pivot = match pivot {
            Some(p) if best > 1e-12 * scale => p,
            _ => return Err(SolverError::RankDeficientDesign),
        };
        used[pivot] = true;
        basis.push(pivot);
        for i in 0..n {
            if !used[i] && work[(i, col)] != 0.0 {
                let f = work[(i, col)] / work[(pivot, col)];
                for j in col..m {
                    work[(i, j)] -= f * work[(pivot, j)];
                }
            }
        }
    }
    Ok(basis)
}

fn gather_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Fit the quantile regression at level `tau`.
pub fn qr_fit(design: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Result<QrFit, SolverError> {
    qr_fit_warm(design, y, tau, None)
}

/// As [`qr_fit`], optionally starting from a previously optimal basis.
/// The warm start changes only the path taken, never the certified optimum.
pub fn qr_fit_warm(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    warm: Option<&[usize]>,
) -> Result<QrFit, SolverError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(SolverError::InvalidTau(tau));
    }
    let (n, m) = design.shape();
    if m == 0 || y.len() != n {
        return Err(SolverError::RankDeficientDesign);
    }
    if n < m {
        return Err(SolverError::TooFewRows { n, m });
    }

    let y_scale = 1.0 + y.amax();
    // Residuals below this are treated as sitting exactly on the fit when
    // classifying subgradient terms.
    let ztol = 1e-11 * y_scale;
    let opt_tol = 1e-10 * (1.0 + n as f64);

    let mut basis = match warm {
        Some(b) if b.len() == m && b.iter().all(|&i| i < n) => b.to_vec(),
        _ => greedy_basis(design)?,
    };
    let mut warm_untrusted = warm.is_some();

    let max_iter = 50 * n.max(2);
    let mut beta;
    let mut resid = DVector::zeros(n);

    let mut iter = 0usize;
    loop {
        iter += 1;
        if iter > max_iter {
            return Err(SolverError::DidNotConverge {
                iterations: max_iter,
                tau,
            });
        }

        let xh = gather_rows(design, &basis);
        let yh = DVector::from_fn(m, |i, _| y[basis[i]]);
        let lu = xh.lu();
        let solved = lu.solve(&yh);
        // Columns of X_h^(-1) are the edge directions: moving along column t
        // keeps every basis row but the t-th interpolated.
        let vmat = lu.solve(&DMatrix::identity(m, m));
        let (b, vmat) = match (solved, vmat) {
            (Some(b), Some(v)) => (b, v),
            _ => {
                if warm_untrusted {
                    // Stale warm basis can be singular for this design; restart.
                    warm_untrusted = false;
                    basis = greedy_basis(design)?;
                    continue;
                }
                return Err(SolverError::DidNotConverge {
                    iterations: iter,
                    tau,
                });
            }
        };
        warm_untrusted = false;
        beta = b;

        // Residuals; basis rows are zero by construction.
        for i in 0..n {
            let mut fit = 0.0;
            for j in 0..m {
                fit += design[(i, j)] * beta[j];
            }
            resid[i] = y[i] - fit;
        }
        for &i in &basis {
            resid[i] = 0.0;
        }

        // gamma = sum over rows with nonzero residual of s_i x_i,
        // s_i = tau - 1(r_i < 0).
        let mut in_basis = vec![false; n];
        for &i in &basis {
            in_basis[i] = true;
        }
        let mut gamma = DVector::zeros(m);
        let mut degenerate_zeros: Vec<usize> = Vec::new();
        for i in 0..n {
            if in_basis[i] {
                continue;
            }
            if resid[i].abs() <= ztol {
                degenerate_zeros.push(i);
                continue;
            }
            let s = if resid[i] < 0.0 { tau - 1.0 } else { tau };
            for j in 0..m {
                gamma[j] += s * design[(i, j)];
            }
        }

        // Directional derivative of the objective along the edge that frees
        // basis coordinate t with sign sigma:
        //   g(t, +) = (1 - tau) - c_t + (zero-residual terms)
        //   g(t, -) = tau + c_t + (zero-residual terms)
        // where c_t = v_t' gamma and v_t solves X_h' v = e_t.
        let mut best_g = f64::INFINITY;
        let mut best_dir: Option<(usize, f64)> = None;
        for t in 0..m {
            let vt = vmat.column(t);
            let c_t = vt.dot(&gamma);
            for sigma in [1.0f64, -1.0] {
                let mut g = if sigma > 0.0 {
                    (1.0 - tau) - c_t
                } else {
                    tau + c_t
                };
                for &i in &degenerate_zeros {
                    let mut w = 0.0;
                    for j in 0..m {
                        w += design[(i, j)] * vt[j];
                    }
                    let sw = sigma * w;
                    g += if sw >= 0.0 { (1.0 - tau) * sw } else { -tau * sw };
                }
                if g < best_g {
                    best_g = g;
                    best_dir = Some((t, sigma));
                }
            }
        }

        if best_g >= -opt_tol {
            break;
        }
        let (t, sigma) = best_dir.expect("a descent direction exists when best_g < 0");

        // Weighted-median walk: residual i hits zero at theta_i = r_i / (sigma w_i);
        // each crossing raises the edge slope by |w_i|.
        let vt = vmat.column(t);
        let mut crossings: Vec<(f64, f64, usize)> = Vec::new();
        for i in 0..n {
            if in_basis[i] || resid[i].abs() <= ztol {
                continue;
            }
            let mut w = 0.0;
            for j in 0..m {
                w += design[(i, j)] * vt[j];
            }
            let denom = sigma * w;
            if denom != 0.0 {
                let theta = resid[i] / denom;
                if theta > 0.0 {
                    crossings.push((theta, w.abs(), i));
                }
            }
        }
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

        let mut slope = best_g;
        let mut entering = None;
        for &(_, jump, i) in &crossings {
            slope += jump;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let entering = match entering {
            Some(i) => i,
            // Descent never flattens out: numerically impossible for a
            // full-rank design, so give up with a diagnostic.
            None => {
                return Err(SolverError::DidNotConverge {
                    iterations: iter,
                    tau,
                })
            }
        };
        basis[t] = entering;
    }

    let loss: f64 = resid.iter().map(|&r| rho(r, tau)).sum();
    let zero_tol = 1e-8 * y_scale;
    let n_zero = resid.iter().filter(|r| r.abs() <= zero_tol).count();
    let extreme_tau = (n as f64) * tau.min(1.0 - tau) < 1.0;

    Ok(QrFit {
        tau,
        beta,
        loss,
        residuals: resid,
        n_zero,
        zero_tol,
        extreme_tau,
        basis,
    })
}

/// Fit the model at every level of `grid`, warm-starting each fit from the
/// previous optimum. Results follow grid order.
pub fn qr_fit_grid(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &QuantileGrid,
) -> Result<Vec<QrFit>, SolverError> {
    let mut fits = Vec::with_capacity(grid.len());
    let mut warm: Option<Vec<usize>> = None;
    for &tau in grid.taus() {
        let fit = qr_fit_warm(design, y, tau, warm.as_deref())?;
        warm = Some(fit.basis.clone());
        fits.push(fit);
    }
    Ok(fits)
}

/// Least-squares fit by singular value decomposition, with a rank check.
pub fn ols_fit(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, SolverError> {
    let (n, m) = design.shape();
    if n < m {
        return Err(SolverError::TooFewRows { n, m });
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin / smax <= 1e-10 {
        return Err(SolverError::RankDeficientDesign);
    }
    let beta = svd
        .solve(y, 0.0)
        .map_err(|_| SolverError::RankDeficientDesign)?;
    let fitted = design * &beta;
    let residuals = y - &fitted;
    Ok(OlsFit {
        beta,
        fitted,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Brute-force oracle: enumerate every size-m row subset, fit exactly
    /// through those rows, and keep the subset with the smallest loss.
    fn vertex_oracle(design: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> (f64, DVector<f64>) {
        let (n, m) = design.shape();
        let mut best_loss = f64::INFINITY;
        let mut best_beta = DVector::zeros(m);
        let mut subset = vec![0usize; m];

        fn recurse(
            start: usize,
            depth: usize,
            n: usize,
            m: usize,
            subset: &mut Vec<usize>,
            design: &DMatrix<f64>,
            y: &DVector<f64>,
            tau: f64,
            best_loss: &mut f64,
            best_beta: &mut DVector<f64>,
        ) {
            if depth == m {
                let xh = DMatrix::from_fn(m, m, |i, j| design[(subset[i], j)]);
                let yh = DVector::from_fn(m, |i, _| y[subset[i]]);
                if let Some(beta) = xh.lu().solve(&yh) {
                    let mut loss = 0.0;
                    for i in 0..n {
                        let mut fit = 0.0;
                        for j in 0..m {
                            fit += design[(i, j)] * beta[j];
                        }
                        loss += rho(y[i] - fit, tau);
                    }
                    if loss < *best_loss {
                        *best_loss = loss;
                        *best_beta = beta;
                    }
                }
                return;
            }
            for i in start..n {
                subset[depth] = i;
                recurse(
                    i + 1,
                    depth + 1,
                    n,
                    m,
                    subset,
                    design,
                    y,
                    tau,
                    best_loss,
                    best_beta,
                );
            }
        }
        recurse(
            0,
            0,
            n,
            m,
            &mut subset,
            design,
            y,
            tau,
            &mut best_loss,
            &mut best_beta,
        );
        (best_loss, best_beta)
    }

    fn random_instance(rng: &mut impl Rng, n: usize, m: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut design = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-2.0..2.0));
        for i in 0..n {
            design[(i, 0)] = 1.0; // intercept keeps instances in general position
        }
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
        (design, y)
    }

    #[test]
    fn check_loss_examples() {
        assert_eq!(check_loss(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(check_loss(-4.0, 0.25).unwrap(), 3.0);
        for tau in [0.01, 0.3, 0.5, 0.9] {
            assert_eq!(check_loss(0.0, tau).unwrap(), 0.0);
        }
        assert!(matches!(check_loss(1.0, 0.0), Err(SolverError::InvalidTau(_))));
        assert!(matches!(check_loss(1.0, 1.0), Err(SolverError::InvalidTau(_))));
    }

    #[test]
    fn intercept_only_median() {
        let design = DMatrix::from_element(5, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let fit = qr_fit(&design, &y, 0.5).unwrap();
        assert!((fit.beta[0] - 3.0).abs() < 1e-12);
        // rho_.5(-2) + rho_.5(-1) + 0 + rho_.5(1) + rho_.5(2) = 3
        assert!((fit.loss - 3.0).abs() < 1e-12);
        assert_eq!(fit.n_zero, 1);
    }

    #[test]
    fn exact_interpolation_when_n_equals_m() {
        let design = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![0.0, 1.0]);
        for tau in [0.1, 0.5, 0.9] {
            let fit = qr_fit(&design, &y, tau).unwrap();
            assert!((fit.beta[0] - 0.0).abs() < 1e-12);
            assert!((fit.beta[1] - 1.0).abs() < 1e-12);
            assert_eq!(fit.loss, 0.0);
        }
    }

    #[test]
    fn matches_vertex_oracle_on_fixed_instance() {
        let mut rng = crate::rng::stream_rng(2024, &[8, 2]);
        let (design, y) = random_instance(&mut rng, 8, 2);
        let fit = qr_fit(&design, &y, 0.3).unwrap();
        let (oracle_loss, oracle_beta) = vertex_oracle(&design, &y, 0.3);
        assert!(
            (fit.loss - oracle_loss).abs() < 1e-9,
            "solver {} vs oracle {}",
            fit.loss,
            oracle_loss
        );
        // Unique optimum on this instance, so coefficients match too.
        assert!((fit.beta.clone() - oracle_beta).amax() < 1e-8);
    }

    #[test]
    fn matches_vertex_oracle_on_many_random_instances() {
        let taus = [0.05, 0.3, 0.5, 0.7, 0.95];
        for case in 0..60u64 {
            let mut rng = crate::rng::stream_rng(99, &[case]);
            let n = rng.gen_range(3..=9);
            let m = rng.gen_range(1..=3.min(n));
            let (design, y) = random_instance(&mut rng, n, m);
            let tau = taus[(case % 5) as usize];
            let fit = qr_fit(&design, &y, tau).unwrap();
            let (oracle_loss, _) = vertex_oracle(&design, &y, tau);
            assert!(
                (fit.loss - oracle_loss).abs() < 1e-9,
                "case {case}: solver {} vs oracle {} (n={n}, m={m}, tau={tau})",
                fit.loss,
                oracle_loss
            );
        }
    }

    #[test]
    fn grid_fit_gives_sample_quantiles_for_intercept_only() {
        let design = DMatrix::from_element(5, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
        let fits = qr_fit_grid(&design, &y, &grid).unwrap();
        // Vertex solutions land on data points; verified against the oracle.
        for (fit, expect) in fits.iter().zip([2.0, 3.0, 4.0]) {
            let (oracle_loss, _) = vertex_oracle(&design, &y, fit.tau);
            assert!((fit.loss - oracle_loss).abs() < 1e-12);
            assert!((fit.beta[0] - expect).abs() < 1e-12);
        }
        let taus: Vec<f64> = fits.iter().map(|f| f.tau).collect();
        assert_eq!(taus, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn single_point_grid_matches_plain_fit() {
        let mut rng = crate::rng::stream_rng(5, &[1]);
        let (design, y) = random_instance(&mut rng, 7, 2);
        let grid = QuantileGrid::new(vec![0.4]).unwrap();
        let from_grid = &qr_fit_grid(&design, &y, &grid).unwrap()[0];
        let plain = qr_fit(&design, &y, 0.4).unwrap();
        assert_eq!(from_grid.beta, plain.beta);
        assert_eq!(from_grid.loss, plain.loss);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let design = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            qr_fit(&design, &y, 0.5),
            Err(SolverError::RankDeficientDesign)
        ));
        assert!(matches!(
            ols_fit(&design, &y),
            Err(SolverError::RankDeficientDesign)
        ));
    }

    #[test]
    fn extreme_tau_is_flagged() {
        let design = DMatrix::from_element(10, 1, 1.0);
        let y = DVector::from_fn(10, |i, _| i as f64);
        assert!(qr_fit(&design, &y, 0.01).unwrap().extreme_tau);
        assert!(!qr_fit(&design, &y, 0.5).unwrap().extreme_tau);
    }

    #[test]
    fn ols_intercept_only_is_the_mean() {
        let design = DMatrix::from_element(3, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let fit = ols_fit(&design, &y).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        let expect = [-1.0, 0.0, 1.0];
        for (r, e) in fit.residuals.iter().zip(expect) {
            assert!((r - e).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_exact_fit() {
        let design = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![0.0, 2.0]);
        let fit = ols_fit(&design, &y).unwrap();
        assert!((fit.beta[0] - 0.0).abs() < 1e-12);
        assert!((fit.beta[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        let mut rng = crate::rng::stream_rng(17, &[6, 2]);
        let (design, y) = random_instance(&mut rng, 6, 2);
        let fit = ols_fit(&design, &y).unwrap();
        // Independent route: solve X'X beta = X'y by hand (2x2).
        let xtx = design.transpose() * &design;
        let xty = design.transpose() * &y;
        let det = xtx[(0, 0)] * xtx[(1, 1)] - xtx[(0, 1)] * xtx[(1, 0)];
        let b0 = (xty[0] * xtx[(1, 1)] - xtx[(0, 1)] * xty[1]) / det;
        let b1 = (xtx[(0, 0)] * xty[1] - xty[0] * xtx[(1, 0)]) / det;
        assert!((fit.beta[0] - b0).abs() < 1e-9);
        assert!((fit.beta[1] - b1).abs() < 1e-9);
        // fitted + residuals reproduces y.
        let back = &fit.fitted + &fit.residuals;
        assert!((back - y).amax() < 1e-12);
    }

    /// Exact one-sided directional derivative of the objective at beta.
    fn directional_derivative(
        design: &DMatrix<f64>,
        y: &DVector<f64>,
        tau: f64,
        beta: &DVector<f64>,
        dir: &DVector<f64>,
        ztol: f64,
    ) -> f64 {
        let (n, m) = design.shape();
        let mut g = 0.0;
        for i in 0..n {
            let mut fit = 0.0;
            let mut a = 0.0;
            for j in 0..m {
                fit += design[(i, j)] * beta[j];
                a += design[(i, j)] * dir[j];
            }
            let r = y[i] - fit;
            if r.abs() <= ztol {
                g += if a >= 0.0 { (1.0 - tau) * a } else { -tau * a };
            } else if r > 0.0 {
                g += -tau * a;
            } else {
                g += (1.0 - tau) * a;
            }
        }
        g
    }

    #[test]
    fn optimality_along_coordinate_directions() {
        for case in 0..40u64 {
            let mut rng = crate::rng::stream_rng(7, &[case]);
            let n = rng.gen_range(4..=12);
            let m = rng.gen_range(1..=3.min(n));
            let (design, y) = random_instance(&mut rng, n, m);
            let tau = rng.gen_range(0.05..0.95);
            let fit = qr_fit(&design, &y, tau).unwrap();
            let scale = 1.0 + design.amax();
            let ztol = 1e-9 * (1.0 + y.amax());
            for j in 0..m {
                for sign in [1.0, -1.0] {
                    let mut dir = DVector::zeros(m);
                    dir[j] = sign;
                    let g = directional_derivative(&design, &y, tau, &fit.beta, &dir, ztol);
                    assert!(
                        g >= -1e-8 * scale,
                        "case {case}: descent direction remains at optimum (g={g})"
                    );
                }
            }
        }
    }

    #[test]
    fn regression_and_scale_equivariance() {
        for case in 0..30u64 {
            let mut rng = crate::rng::stream_rng(13, &[case]);
            let n = rng.gen_range(5..=12);
            let m = rng.gen_range(1..=3.min(n));
            let (design, y) = random_instance(&mut rng, n, m);
            let tau = rng.gen_range(0.1..0.9);
            let shift = DVector::from_fn(m, |_, _| rng.gen_range(-3.0..3.0));
            let scale: f64 = rng.gen_range(0.5..4.0);

            let base = qr_fit(&design, &y, tau).unwrap();

            let shifted_y = &y + &design * &shift;
            let shifted = qr_fit(&design, &shifted_y, tau).unwrap();
            let diff = (&shifted.beta - &base.beta - &shift).amax();
            assert!(diff < 1e-8 * (1.0 + base.beta.amax()), "case {case}: {diff}");

            let scaled = qr_fit(&design, &(y.clone() * scale), tau).unwrap();
            let diff = (&scaled.beta - &(base.beta.clone() * scale)).amax();
            assert!(diff < 1e-8 * (1.0 + scale * base.beta.amax()));
            assert!((scaled.loss - scale * base.loss).abs() < 1e-8 * (1.0 + base.loss));
        }
    }

    #[test]
    fn quantile_symmetry_on_unique_minimizers() {
        for case in 0..30u64 {
            let mut rng = crate::rng::stream_rng(23, &[case]);
            let n = rng.gen_range(5..=10);
            let m = rng.gen_range(1..=2.min(n));
            let (design, y) = random_instance(&mut rng, n, m);
            let tau = rng.gen_range(0.15..0.85);
            let a = qr_fit(&design, &y, tau).unwrap();
            let b = qr_fit(&design, &(-y.clone()), 1.0 - tau).unwrap();
            // Losses always agree; coefficients agree when the optimum is
            // unique, which holds for continuous data in general position.
            assert!((a.loss - b.loss).abs() < 1e-9);
            assert!((a.beta.clone() + b.beta.clone()).amax() < 1e-8);
        }
    }

    #[test]
    fn zero_residual_count_matches_column_count() {
        for case in 0..20u64 {
            let mut rng = crate::rng::stream_rng(31, &[case]);
            let n = rng.gen_range(6..=14);
            let m = rng.gen_range(1..=3);
            let (design, y) = random_instance(&mut rng, n, m);
            let fit = qr_fit(&design, &y, 0.35).unwrap();
            assert_eq!(fit.n_zero, m, "general-position fit interpolates m rows");
        }
    }

    #[test]
    fn stored_loss_matches_recomputation() {
        let mut rng = crate::rng::stream_rng(41, &[0]);
        let (design, y) = random_instance(&mut rng, 12, 3);
        let fit = qr_fit(&design, &y, 0.2).unwrap();
        let recomputed: f64 = (0..12)
            .map(|i| {
                let mut f = 0.0;
                for j in 0..3 {
                    f += design[(i, j)] * fit.beta[j];
                }
                rho(y[i] - f, 0.2)
            })
            .sum();
        assert!((fit.loss - recomputed).abs() <= 1e-9 * (1.0 + fit.loss));
    }
}
