//! Shannon entropies of binned distributions and the estimators built on them.
//!
//! All values are in nats. Differential entropies are recovered from the
//! discrete ones by adding `ln(step)` per dimension, a first-order
//! approximation that is accurate while the bin width is small compared to the
//! structure of the density; [`discretization_warning`] flags tables where that
//! assumption looks doubtful.
//!
//! The conditional entropy is the usual `h(A|B) = -∫ P(b) ∫ P(a|b) ln P(a|b)`,
//! and the joint entropy carries the usual leading minus sign.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{weighted_moments, JointDistribution, Marginal, Party};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error("bin step must be positive and finite, got {0}")]
    NonPositiveStep(f64),
    #[error("scale factor must be positive and finite, got {0}")]
    NonPositiveGamma(f64),
}

/// An entropy in nats with an optional one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub value: f64,
    pub uncertainty: Option<f64>,
}

impl EntropyValue {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            uncertainty: None,
        }
    }

    pub fn with_uncertainty(value: f64, uncertainty: f64) -> Self {
        debug_assert!(uncertainty >= 0.0);
        Self {
            value,
            uncertainty: Some(uncertainty),
        }
    }
}

/// Number of dimensions an entropy refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arity {
    One,
    Two,
}

impl Arity {
    fn factor(self) -> f64 {
        match self {
            Arity::One => 1.0,
            Arity::Two => 2.0,
        }
    }
}

/// `-sum p ln p` with `0 ln 0 = 0`.
pub(crate) fn shannon<'a>(masses: impl IntoIterator<Item = &'a f64>) -> f64 {
    masses
        .into_iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

pub fn discrete_entropy(m: &Marginal) -> f64 {
    shannon(m.mass().iter())
}

pub fn discrete_joint_entropy(dist: &JointDistribution) -> f64 {
    shannon(dist.mass().iter())
}

/// `h ≈ H + ln(step)` for one dimension.
pub fn differential_from_discrete(h_discrete: f64, step: f64) -> Result<f64, EntropyError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(EntropyError::NonPositiveStep(step));
    }
    Ok(h_discrete + step.ln())
}

/// `h ≈ H + ln(step_a * step_b)` for a joint table.
pub fn joint_differential_from_discrete(
    h_discrete: f64,
    step_a: f64,
    step_b: f64,
) -> Result<f64, EntropyError> {
    let h = differential_from_discrete(h_discrete, step_a)?;
    differential_from_discrete(h, step_b)
}

/// Entropy of the variable `gamma * Z` given the entropy of `Z`.
pub fn scale_entropy(h: f64, gamma: f64, arity: Arity) -> Result<f64, EntropyError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(EntropyError::NonPositiveGamma(gamma));
    }
    Ok(h + arity.factor() * gamma.ln())
}

/// Differential entropy of a marginal on its own axis units.
pub fn differential_entropy(m: &Marginal) -> f64 {
    discrete_entropy(m) + m.axis().step().ln()
}

pub fn joint_differential_entropy(dist: &JointDistribution) -> f64 {
    discrete_joint_entropy(dist) + dist.axis_a().step().ln() + dist.axis_b().step().ln()
}

/// `h(other | given) = h(A, B) - h(given)`.
pub fn conditional_entropy_chain(dist: &JointDistribution, given: Party) -> f64 {
    joint_differential_entropy(dist) - differential_entropy(&dist.marginal(given))
}

/// `h(other | given) = sum_j P(given = j) h(other | given = j)`; empty
/// conditioning bins carry zero weight and are skipped.
pub fn conditional_entropy_direct(dist: &JointDistribution, given: Party) -> f64 {
    let step = dist.axis(given.other()).step().ln();
    (0..dist.axis(given).count())
        .filter_map(|j| {
            let slice = dist.raw_slice(given, j);
            let w: f64 = slice.sum();
            (w > 0.0).then(|| w * (slice_entropy(slice, w) + step))
        })
        .sum()
}

/// Discrete entropy of an unnormalized slice with total `w`.
pub(crate) fn slice_entropy(slice: ArrayView1<'_, f64>, w: f64) -> f64 {
    slice
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / w;
            -q * q.ln()
        })
        .sum()
}

/// `I(A; B) = H(A) + H(B) - H(A, B)`, in nats.
pub fn mutual_information(dist: &JointDistribution) -> f64 {
    discrete_entropy(&dist.marginal(Party::A)) + discrete_entropy(&dist.marginal(Party::B))
        - discrete_joint_entropy(dist)
}

/// Average conditional variance of `infer` given the other party:
/// `sum_j P(b_j) Var(a | b_j)`, in the squared units of the inferred axis.
pub fn inferred_variance(dist: &JointDistribution, infer: Party) -> f64 {
    let given = infer.other();
    let axis = dist.axis(infer);
    (0..dist.axis(given).count())
        .filter_map(|j| {
            let slice = dist.raw_slice(given, j);
            let w: f64 = slice.sum();
            (w > 0.0).then(|| w * weighted_moments(axis, slice).1)
        })
        .sum()
}

/// Conditional slices lighter than this fraction of the heaviest one are
/// ignored by the discretization check.
const WELL_POPULATED: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationWarning {
    pub step: f64,
    pub narrowest_sigma: f64,
}

/// Flags a table whose bin width exceeds a third of the standard deviation of
/// its narrowest well-populated conditional slice.
pub fn discretization_warning(
    dist: &JointDistribution,
    given: Party,
) -> Option<DiscretizationWarning> {
    let axis = dist.axis(given.other());
    let weights: Vec<f64> = (0..dist.axis(given).count())
        .map(|j| dist.raw_slice(given, j).sum())
        .collect();
    let heaviest = weights.iter().cloned().fold(0.0, f64::max);
    let narrowest = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0 && w >= WELL_POPULATED * heaviest)
        .map(|(j, _)| weighted_moments(axis, dist.raw_slice(given, j)).1.sqrt())
        // A single occupied bin has no measurable width.
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if narrowest.is_finite() && axis.step() > narrowest / 3.0 {
        let w = DiscretizationWarning {
            step: axis.step(),
            narrowest_sigma: narrowest,
        };
        log::warn!(
            "bin step {:.4} exceeds a third of the narrowest conditional width {:.4}; \
             differential entropies may be biased",
            w.step,
            w.narrowest_sigma
        );
        Some(w)
    } else {
        None
    }
}
