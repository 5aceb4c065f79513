//! Noise-free criteria on exact grids: single states, the Hermite-Gauss scan
//! and the variance threshold of the engineered family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{self, entropic_bound, CriterionReport, Inference, VARIANCE_BOUND};
use crate::states::{GridOptions, StateError, StateSpec};

/// Every report of [`criteria::full_report`] for one state on exact grids.
pub fn theory_reports(
    spec: &StateSpec,
    opts: &GridOptions,
) -> Result<Vec<CriterionReport>, StateError> {
    let (x, p) = spec.exact_distributions(opts)?;
    Ok(criteria::full_report(&x, &p))
}

/// One row of the Hermite-Gauss scan (A inferred from B; the family is
/// symmetric under exchange of the parties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: u32,
    pub variance_product: f64,
    pub entropic_sum: f64,
    pub variance_bound: f64,
    pub entropic_bound: f64,
    pub variance_violated: bool,
    pub entropic_violated: bool,
}

fn scan_row(n: u32, opts: &GridOptions) -> Result<ScanRow, StateError> {
    let (x, p) = StateSpec::hermite_gauss(n).exact_distributions(opts)?;
    let v = criteria::variance_epr(&x, &p, Inference::AGivenB);
    let e = criteria::entropic_epr(&x, &p, Inference::AGivenB);
    Ok(ScanRow {
        n,
        variance_product: v.value,
        entropic_sum: e.value,
        variance_bound: VARIANCE_BOUND,
        entropic_bound: entropic_bound(),
        variance_violated: v.violated,
        entropic_violated: e.violated,
    })
}

/// Rows for `n = 0..=n_max`, in order of `n`.
pub fn scan_hermite_gauss(n_max: u32, opts: &GridOptions) -> Result<Vec<ScanRow>, StateError> {
    (0..=n_max)
        .into_par_iter()
        .map(|n| scan_row(n, opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("bracket [{lo}, {hi}] is invalid: need 0 < lo < hi")]
    BadBracket { lo: f64, hi: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(
        "variance product does not cross 1/4 in the bracket: {value_lo} at {lo}, {value_hi} at {hi}"
    )]
    NoSignChange {
        lo: f64,
        hi: f64,
        value_lo: f64,
        value_hi: f64,
    },
    #[error("variance product is not monotone in the bracket (near {at})")]
    NotMonotone { at: f64 },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Variance product of the engineered state with `sigma_plus = 1` and
/// `sigma_minus^2 / sigma_plus^2 = ratio`.
pub fn engineered_variance_product(ratio: f64, opts: &GridOptions) -> Result<f64, StateError> {
    let spec = StateSpec::engineered(1.0, ratio.sqrt())?;
    let (x, p) = spec.exact_distributions(opts)?;
    Ok(criteria::variance_epr(&x, &p, Inference::AGivenB).value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    /// Bracket on `sigma_minus^2 / sigma_plus^2`.
    pub bracket: (f64, f64),
    /// Bisection stops when the bracket is narrower than this (absolute).
    pub tolerance: f64,
    /// Evenly spaced points checked for monotonicity before bisecting.
    pub monotonicity_points: usize,
    pub grid: GridOptions,
}

impl Default for ThresholdSearch {
    fn default() -> Self {
        Self {
            bracket: (1.0, 20.0),
            tolerance: 1e-3,
            monotonicity_points: 9,
            grid: GridOptions::new(2048, 6.0).expect("valid grid"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// `sigma_minus^2 / sigma_plus^2` at which the variance product equals 1/4.
    pub ratio: f64,
    /// Variance product at [`Self::ratio`].
    pub variance_product: f64,
    pub evaluations: usize,
}

/// Bisection for the width ratio at which the engineered state starts to
/// violate the variance criterion.
pub fn variance_threshold(search: &ThresholdSearch) -> Result<Threshold, ThresholdError> {
    let (lo, hi) = search.bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(ThresholdError::BadBracket { lo, hi });
    }
    if search.tolerance.is_nan() || search.tolerance <= 0.0 {
        return Err(ThresholdError::BadTolerance(search.tolerance));
    }
    let f = |r: f64| engineered_variance_product(r, &search.grid).map(|v| v - VARIANCE_BOUND);
    let k = search.monotonicity_points.max(2);
    let probes: Vec<f64> = (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect();
    let values = probes
        .iter()
        .map(|&r| f(r))
        .collect::<Result<Vec<_>, _>>()?;
    let (f_lo, f_hi) = (values[0], values[k - 1]);
    if f_lo.signum() == f_hi.signum() {
        return Err(ThresholdError::NoSignChange {
            lo,
            hi,
            value_lo: f_lo + VARIANCE_BOUND,
            value_hi: f_hi + VARIANCE_BOUND,
        });
    }
    let rising = f_hi > f_lo;
    for (w, r) in values.windows(2).zip(&probes[1..]) {
        if (w[1] > w[0]) != rising {
            return Err(ThresholdError::NotMonotone { at: *r });
        }
    }
    // Narrow to the probe interval holding the crossing, then bisect.
    let i = values
        .windows(2)
        .position(|w| w[0].signum() != w[1].signum())
        .expect("endpoints differ in sign");
    let (mut a, mut b) = (probes[i], probes[i + 1]);
    let mut fa = values[i];
    let mut evaluations = k;
    while b - a > search.tolerance {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        evaluations += 1;
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let ratio = 0.5 * (a + b);
    Ok(Threshold {
        ratio,
        variance_product: f(ratio)? + VARIANCE_BOUND,
        evaluations: evaluations + 1,
    })
}
