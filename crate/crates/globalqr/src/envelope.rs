//! Rank-based global envelopes.
//!
//! Curves are ranked pointwise from both tails; a ranking measure (extreme
//! rank length, or its area refinement) orders whole curves from most to
//! least extreme. Cutting the alpha*(s+1) most extreme curves and taking
//! the columnwise min/max hull of the rest yields a band that the observed
//! curve leaves somewhere if and only if the global test rejects, which is
//! what makes the band readable as a simultaneous acceptance region.

use crate::curves::CurveSet;
use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("alpha must lie strictly inside (0,1), got {0}")]
    InvalidAlpha(f64),
}

/// Curve-ranking measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureId {
    /// Extreme rank length: lexicographic order of each curve's sorted
    /// pointwise ranks.
    Erl,
    /// ERL with ties broken by the area by which tied curves stick out of
    /// the hull of less extreme curves.
    Area,
}

impl MeasureId {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "erl" => Some(MeasureId::Erl),
            "area" => Some(MeasureId::Area),
            _ => None,
        }
    }
}

impl std::fmt::Display for MeasureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasureId::Erl => write!(f, "erl"),
            MeasureId::Area => write!(f, "area"),
        }
    }
}

/// A global envelope with its measure values and p-value.
///
/// `measures[i]` is the rank measure of curve i; smaller means more
/// extreme. `p_value` counts curves at least as extreme as the observed one
/// (ties counted as extreme). `outside_mask[k]` marks the coordinates where
/// the observed curve leaves the band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalEnvelope {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Pointwise median of the replicate rows (display aid only).
    pub central: Vec<f64>,
    pub measures: Vec<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub measure: MeasureId,
    pub outside_mask: Vec<bool>,
    /// Set when alpha*(s+1) < 1: no curve can be excluded and the band is
    /// the full hull; a larger s is needed for the requested alpha.
    pub degenerate: bool,
}

/// Two-sided pointwise ranks with mid-rank tie handling.
///
/// For each coordinate, ascending mid-ranks r among the s+1 values are
/// folded as min(r, s+2-r); small ranks are extreme from either tail.
pub fn pointwise_ranks(curves: &CurveSet) -> Vec<Vec<f64>> {
    let r = curves.n_curves();
    let k = curves.n_coords();
    let mut ranks = vec![vec![0.0; k]; r];
    let mut order: Vec<usize> = Vec::with_capacity(r);
    for col in 0..k {
        order.clear();
        order.extend(0..r);
        order.sort_by(|&a, &b| curves.row(a)[col].total_cmp(&curves.row(b)[col]));
        let mut i = 0;
        while i < r {
            let v = curves.row(order[i])[col];
            let mut j = i;
            while j + 1 < r && curves.row(order[j + 1])[col] == v {
                j += 1;
            }
            // 1-based mid-rank over the tie block [i, j].
            let mid = (i + j) as f64 / 2.0 + 1.0;
            let two_sided = mid.min((r + 1) as f64 - mid);
            for &row in &order[i..=j] {
                ranks[row][col] = two_sided;
            }
            i = j + 1;
        }
    }
    ranks
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Extreme rank length measure, normalized to (0, 1].
///
/// Each curve's pointwise ranks are sorted ascending; curves are ordered
/// lexicographically on those sorted vectors (smaller = more extreme), and
/// E_i = (1 + number of strictly smaller curves) / (s+1). Exactly tied
/// curves share a value.
pub fn erl_measure(ranks: &[Vec<f64>]) -> Vec<f64> {
    let r = ranks.len();
    let sorted_rows: Vec<Vec<f64>> = ranks
        .iter()
        .map(|row| {
            let mut v = row.clone();
            v.sort_by(|a, b| a.total_cmp(b));
            v
        })
        .collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| lex_cmp(&sorted_rows[a], &sorted_rows[b]).then(a.cmp(&b)));

    let mut e = vec![0.0; r];
    let mut i = 0;
    while i < r {
        let mut j = i;
        while j + 1 < r
            && lex_cmp(&sorted_rows[order[j + 1]], &sorted_rows[order[i]]) == Ordering::Equal
        {
            j += 1;
        }
        let value = (i + 1) as f64 / r as f64;
        for &row in &order[i..=j] {
            e[row] = value;
        }
        i = j + 1;
    }
    e
}

/// Area refinement of the ERL measure.
///
/// Curves not tied under ERL keep their ERL value. Within an ERL tie group,
/// each curve is compared against the columnwise hull of all strictly less
/// extreme curves; the mean exceedance beyond that hull breaks the tie, a
/// larger exceedance meaning more extreme. The refinement offset stays below
/// 1/(s+1), so the order between distinct ERL values is preserved.
pub fn area_measure(curves: &CurveSet, ranks: &[Vec<f64>]) -> Vec<f64> {
    let erl = erl_measure(ranks);
    let r = curves.n_curves();
    let k = curves.n_coords();
    let mut refined = erl.clone();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| erl[a].total_cmp(&erl[b]).then(a.cmp(&b)));

    let mut i = 0;
    while i < r {
        let mut j = i;
        while j + 1 < r && erl[order[j + 1]] == erl[order[i]] {
            j += 1;
        }
        if j > i {
            let group = &order[i..=j];
            let outer: Vec<usize> = (0..r).filter(|&row| erl[row] > erl[group[0]]).collect();
            if !outer.is_empty() {
                let mut lo = vec![f64::INFINITY; k];
                let mut up = vec![f64::NEG_INFINITY; k];
                for &row in &outer {
                    for (col, &v) in curves.row(row).iter().enumerate() {
                        lo[col] = lo[col].min(v);
                        up[col] = up[col].max(v);
                    }
                }
                let exceed: Vec<f64> = group
                    .iter()
                    .map(|&row| {
                        curves
                            .row(row)
                            .iter()
                            .enumerate()
                            .map(|(col, &v)| (lo[col] - v).max(0.0) + (v - up[col]).max(0.0))
                            .sum::<f64>()
                            / k as f64
                    })
                    .collect();
                let max_exceed = exceed.iter().fold(0.0f64, |a, &b| a.max(b));
                if max_exceed > 0.0 {
                    for (&row, &a) in group.iter().zip(exceed.iter()) {
                        refined[row] = erl[row] - (a / max_exceed) * 0.5 / r as f64;
                    }
                }
            }
        }
        i = j + 1;
    }
    refined
}

fn column_median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Build the global envelope at level `alpha` under `measure`.
pub fn build_envelope(
    curves: &CurveSet,
    measure: MeasureId,
    alpha: f64,
) -> Result<GlobalEnvelope, EnvelopeError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EnvelopeError::InvalidAlpha(alpha));
    }
    let r = curves.n_curves();
    let k = curves.n_coords();

    let ranks = pointwise_ranks(curves);
    let measures = match measure {
        MeasureId::Erl => erl_measure(&ranks),
        MeasureId::Area => area_measure(curves, &ranks),
    };

    let e0 = measures[0];
    let p_value = measures.iter().filter(|&&e| e <= e0).count() as f64 / r as f64;

    // Cut: the largest measure value whose strictly-smaller count stays
    // within the alpha*(s+1) budget; rows below the cut are excluded.
    // The small slack keeps exact integer budgets from rounding down.
    let budget = alpha * r as f64 + 1e-9;
    let degenerate = budget < 1.0;
    let mut sorted = measures.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut e_cut = sorted[0];
    let mut i = 0;
    while i < r {
        if (i as f64) <= budget {
            e_cut = sorted[i];
        } else {
            break;
        }
        let mut j = i;
        while j + 1 < r && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        i = j + 1;
    }

    let kept: Vec<usize> = (0..r).filter(|&row| measures[row] >= e_cut).collect();
    let mut lower = vec![f64::INFINITY; k];
    let mut upper = vec![f64::NEG_INFINITY; k];
    for &row in &kept {
        for (col, &v) in curves.row(row).iter().enumerate() {
            lower[col] = lower[col].min(v);
            upper[col] = upper[col].max(v);
        }
    }

    let mut central = vec![0.0; k];
    let mut buf = vec![0.0; r - 1];
    for col in 0..k {
        for (bi, row) in (1..r).enumerate() {
            buf[bi] = curves.row(row)[col];
        }
        central[col] = column_median(&mut buf);
    }

    let observed = curves.observed();
    let outside_mask: Vec<bool> = (0..k)
        .map(|col| observed[col] < lower[col] || observed[col] > upper[col])
        .collect();

    Ok(GlobalEnvelope {
        lower,
        upper,
        central,
        measures,
        p_value,
        alpha,
        measure,
        outside_mask,
        degenerate,
    })
}

/// Holm step-down adjustment of a p-value vector.
pub fn holm_adjust(pvalues: &[f64]) -> Vec<f64> {
    let m = pvalues.len();
    if m == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * pvalues[idx]).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    adjusted
}
