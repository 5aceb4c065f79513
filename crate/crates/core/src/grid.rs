//! Uniform sampling grids and the probability tables built on them.
//!
//! Every other module consumes these types. A [`JointDistribution`] is a
//! normalized 2D mass table over a pair of [`Axis`] values; marginals and
//! conditional slices are derived from it on demand.

use ndarray::{Array1, Array2, ArrayView1, Axis as NdAxis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on total probability mass.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("axis step must be positive and finite, got {0}")]
    NonPositiveStep(f64),
    #[error("axis needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("axis offset must be finite, got {0}")]
    NonFiniteOffset(f64),
    #[error("total mass is zero")]
    AllZero,
    #[error("matrix shape {got:?} does not match axes {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("entry {value} at {index:?} is negative or not finite")]
    InvalidMass { index: (usize, usize), value: f64 },
    #[error("mass sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("index {index} out of range for axis of {count} points")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("scale factor must be positive and finite, got {0}")]
    NonPositiveGamma(f64),
}

/// Physical unit carried by an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Length,
    InverseLength,
    Dimensionless,
}

/// Which of the two subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

/// Uniform 1D grid: `position(i) = offset + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    offset: f64,
    step: f64,
    count: usize,
    unit: Unit,
}

impl Axis {
    pub fn new(offset: f64, step: f64, count: usize, unit: Unit) -> Result<Self, GridError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(GridError::NonPositiveStep(step));
        }
        if count < 2 {
            return Err(GridError::TooFewPoints(count));
        }
        if !offset.is_finite() {
            return Err(GridError::NonFiniteOffset(offset));
        }
        Ok(Self {
            offset,
            step,
            count,
            unit,
        })
    }

    /// `count` points starting at `-half_extent` with step `2 * half_extent / count`.
    ///
    /// For even `count` the grid contains the origin, which is also the layout
    /// the discrete Fourier transform expects.
    pub fn centered(count: usize, half_extent: f64, unit: Unit) -> Result<Self, GridError> {
        let step = 2.0 * half_extent / count as f64;
        Self::new(-half_extent, step, count, unit)
    }

    /// Symmetric grid `-k*step ..= k*step` with `2k + 1` points.
    pub fn symmetric(half_points: usize, step: f64, unit: Unit) -> Result<Self, GridError> {
        Self::new(
            -(half_points as f64) * step,
            step,
            2 * half_points + 1,
            unit,
        )
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn position(&self, i: usize) -> f64 {
        self.offset + i as f64 * self.step
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.position(i))
    }

    pub fn first(&self) -> f64 {
        self.offset
    }

    pub fn last(&self) -> f64 {
        self.position(self.count - 1)
    }

    /// Largest `c` with `[-c, c]` inside the sampled range (0 if the origin is not covered).
    pub fn symmetric_coverage(&self) -> f64 {
        (-self.first()).min(self.last()).max(0.0)
    }

    pub fn rescaled(&self, gamma: f64, unit: Unit) -> Result<Self, GridError> {
        check_gamma(gamma)?;
        Self::new(self.offset * gamma, self.step * gamma, self.count, unit)
    }
}

fn check_gamma(gamma: f64) -> Result<(), GridError> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(GridError::NonPositiveGamma(gamma))
    }
}

/// Normalized 1D probability mass over an axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    axis: Axis,
    mass: Array1<f64>,
}

impl Marginal {
    /// Validates non-negativity and unit mass.
    pub fn from_mass(axis: Axis, mass: Array1<f64>) -> Result<Self, GridError> {
        if mass.len() != axis.count() {
            return Err(GridError::ShapeMismatch {
                expected: (axis.count(), 1),
                got: (mass.len(), 1),
            });
        }
        let mut total = 0.0;
        for (i, &m) in mass.iter().enumerate() {
            if !(m.is_finite() && m >= 0.0) {
                return Err(GridError::InvalidMass {
                    index: (i, 0),
                    value: m,
                });
            }
            total += m;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(GridError::NotNormalized(total));
        }
        Ok(Self { axis, mass })
    }

    /// Divides nonnegative weights by their sum.
    pub fn normalize(axis: Axis, weights: Array1<f64>) -> Result<Self, GridError> {
        if weights.len() != axis.count() {
            return Err(GridError::ShapeMismatch {
                expected: (axis.count(), 1),
                got: (weights.len(), 1),
            });
        }
        let total = checked_total(
            weights
                .iter()
                .copied()
                .enumerate()
                .map(|(i, w)| ((i, 0), w)),
        )?;
        Ok(Self {
            axis,
            mass: weights / total,
        })
    }

    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn mass(&self) -> ArrayView1<'_, f64> {
        self.mass.view()
    }

    pub fn mean(&self) -> f64 {
        weighted_moments(&self.axis, self.mass.view()).0
    }

    /// Central second moment, computed about the mean so the axis offset
    /// cannot introduce cancellation.
    pub fn variance(&self) -> f64 {
        weighted_moments(&self.axis, self.mass.view()).1
    }

    pub fn rescale(&self, gamma: f64, unit: Unit) -> Result<Self, GridError> {
        Ok(Self {
            axis: self.axis.rescaled(gamma, unit)?,
            mass: self.mass.clone(),
        })
    }
}

/// Mean and variance of a nonnegative weight vector with the given total.
pub(crate) fn weighted_moments(axis: &Axis, weights: ArrayView1<'_, f64>) -> (f64, f64) {
    let total: f64 = weights.sum();
    let mean = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| w * axis.position(i))
        .sum::<f64>()
        / total;
    let var = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let d = axis.position(i) - mean;
            w * d * d
        })
        .sum::<f64>()
        / total;
    (mean, var.max(0.0))
}

fn checked_total(entries: impl Iterator<Item = ((usize, usize), f64)>) -> Result<f64, GridError> {
    let mut total = 0.0;
    for (index, value) in entries {
        if !(value.is_finite() && value >= 0.0) {
            return Err(GridError::InvalidMass { index, value });
        }
        total += value;
    }
    if total > 0.0 {
        Ok(total)
    } else {
        Err(GridError::AllZero)
    }
}

/// Normalized 2D probability table. Row index runs over `axis_a`, column index over `axis_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    axis_a: Axis,
    axis_b: Axis,
    mass: Array2<f64>,
}

impl JointDistribution {
    pub fn from_mass(axis_a: Axis, axis_b: Axis, mass: Array2<f64>) -> Result<Self, GridError> {
        check_shape(&axis_a, &axis_b, &mass)?;
        let total = checked_total(mass.indexed_iter().map(|(ix, &v)| (ix, v)))?;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(GridError::NotNormalized(total));
        }
        Ok(Self {
            axis_a,
            axis_b,
            mass,
        })
    }

    pub fn axis_a(&self) -> &Axis {
        &self.axis_a
    }

    pub fn axis_b(&self) -> &Axis {
        &self.axis_b
    }

    pub fn axis(&self, party: Party) -> &Axis {
        match party {
            Party::A => &self.axis_a,
            Party::B => &self.axis_b,
        }
    }

    pub fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    pub fn marginal(&self, party: Party) -> Marginal {
        let summed = match party {
            Party::A => self.mass.sum_axis(NdAxis(1)),
            Party::B => self.mass.sum_axis(NdAxis(0)),
        };
        // Re-divide so rounding in the partial sums does not leak out.
        let total = summed.sum();
        Marginal {
            axis: *self.axis(party),
            mass: summed / total,
        }
    }

    /// Unnormalized slice of the table along the party that is *not* `given`,
    /// at `index` of the `given` axis.
    pub(crate) fn raw_slice(&self, given: Party, index: usize) -> ArrayView1<'_, f64> {
        match given {
            Party::B => self.mass.column(index),
            Party::A => self.mass.row(index),
        }
    }

    /// Distribution of the other party conditioned on `given` sitting at `index`.
    ///
    /// Returns `Ok(None)` when the conditioning bin carries no mass.
    pub fn conditional_slice(
        &self,
        given: Party,
        index: usize,
    ) -> Result<Option<Marginal>, GridError> {
        let count = self.axis(given).count();
        if index >= count {
            return Err(GridError::IndexOutOfRange { index, count });
        }
        let slice = self.raw_slice(given, index);
        let weight = slice.sum();
        if weight <= 0.0 {
            return Ok(None);
        }
        Ok(Some(Marginal {
            axis: *self.axis(given.other()),
            mass: slice.to_owned() / weight,
        }))
    }

    /// Same distribution with the party labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            axis_a: self.axis_b,
            axis_b: self.axis_a,
            mass: self.mass.t().to_owned(),
        }
    }

    /// Scales both axes by `gamma`; bin masses are unchanged.
    pub fn rescale(&self, gamma: f64, unit: Unit) -> Result<Self, GridError> {
        Ok(Self {
            axis_a: self.axis_a.rescaled(gamma, unit)?,
            axis_b: self.axis_b.rescaled(gamma, unit)?,
            mass: self.mass.clone(),
        })
    }
}

fn check_shape(axis_a: &Axis, axis_b: &Axis, m: &Array2<f64>) -> Result<(), GridError> {
    let expected = (axis_a.count(), axis_b.count());
    if m.dim() != expected {
        return Err(GridError::ShapeMismatch {
            expected,
            got: m.dim(),
        });
    }
    Ok(())
}

/// Divides a nonnegative weight table by its total.
pub fn normalize(
    counts: &Array2<f64>,
    axis_a: Axis,
    axis_b: Axis,
) -> Result<JointDistribution, GridError> {
    check_shape(&axis_a, &axis_b, counts)?;
    let total = checked_total(counts.indexed_iter().map(|(ix, &v)| (ix, v)))?;
    Ok(JointDistribution {
        axis_a,
        axis_b,
        mass: counts / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_axis(n: usize) -> Axis {
        Axis::new(0.0, 1.0, n, Unit::Dimensionless).unwrap()
    }

    #[test]
    fn axis_rejects_bad_parameters() {
        assert!(matches!(
            Axis::new(0.0, 0.0, 4, Unit::Length),
            Err(GridError::NonPositiveStep(_))
        ));
        assert!(matches!(
            Axis::new(0.0, 1.0, 1, Unit::Length),
            Err(GridError::TooFewPoints(1))
        ));
        let ax = Axis::new(-1.0, 0.5, 5, Unit::Length).unwrap();
        assert_eq!(ax.position(4), 1.0);
        assert_eq!(ax.symmetric_coverage(), 1.0);
    }

    #[test]
    fn normalize_examples() {
        let d = normalize(&array![[1.0, 1.0], [1.0, 1.0]], unit_axis(2), unit_axis(2)).unwrap();
        assert_eq!(d.mass(), &array![[0.25, 0.25], [0.25, 0.25]]);

        let d = normalize(&array![[3.0, 1.0], [0.0, 0.0]], unit_axis(2), unit_axis(2)).unwrap();
        assert_eq!(d.mass(), &array![[0.75, 0.25], [0.0, 0.0]]);

        assert_eq!(
            normalize(&Array2::zeros((2, 2)), unit_axis(2), unit_axis(2)),
            Err(GridError::AllZero)
        );
        assert!(matches!(
            normalize(&Array2::ones((2, 3)), unit_axis(2), unit_axis(2)),
            Err(GridError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn from_mass_enforces_unit_total() {
        let bad = JointDistribution::from_mass(
            unit_axis(2),
            unit_axis(2),
            array![[0.5, 0.5], [0.5, 0.0]],
        );
        assert!(matches!(bad, Err(GridError::NotNormalized(_))));
        let neg = JointDistribution::from_mass(
            unit_axis(2),
            unit_axis(2),
            array![[1.5, -0.5], [0.0, 0.0]],
        );
        assert!(matches!(neg, Err(GridError::InvalidMass { .. })));
    }

    #[test]
    fn marginals() {
        let d = normalize(&array![[1.0, 1.0], [1.0, 1.0]], unit_axis(2), unit_axis(2)).unwrap();
        assert_eq!(d.marginal(Party::A).mass(), array![0.5, 0.5]);

        let d = normalize(&array![[3.0, 1.0], [0.0, 0.0]], unit_axis(2), unit_axis(2)).unwrap();
        assert_eq!(d.marginal(Party::A).mass(), array![1.0, 0.0]);
        assert_eq!(
            d.marginal(Party::B).mass(),
            d.swapped().marginal(Party::A).mass()
        );
    }

    #[test]
    fn conditional_slices() {
        let d = normalize(&array![[3.0, 1.0], [0.0, 0.0]], unit_axis(2), unit_axis(2)).unwrap();
        let s = d.conditional_slice(Party::A, 0).unwrap().unwrap();
        assert_eq!(s.mass(), array![0.75, 0.25]);
        assert_eq!(d.conditional_slice(Party::A, 1).unwrap(), None);
        assert_eq!(
            d.conditional_slice(Party::A, 2),
            Err(GridError::IndexOutOfRange { index: 2, count: 2 })
        );
    }

    #[test]
    fn product_slices_equal_marginal() {
        let pa = array![0.2, 0.5, 0.3];
        let pb = array![0.1, 0.6, 0.3];
        let table = Array2::from_shape_fn((3, 3), |(i, j)| pa[i] * pb[j]);
        let d = normalize(&table, unit_axis(3), unit_axis(3)).unwrap();
        for j in 0..3 {
            let s = d.conditional_slice(Party::B, j).unwrap().unwrap();
            for (x, y) in s.mass().iter().zip(pa.iter()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn variance_examples() {
        let ax = Axis::new(3.0, 1.0, 3, Unit::Length).unwrap();
        let point = Marginal::from_mass(ax, array![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(point.variance(), 0.0);

        let two = Marginal::from_mass(unit_axis(2), array![0.5, 0.5]).unwrap();
        assert!((two.variance() - 0.25).abs() < 1e-15);

        // Binned unit Gaussian against its closed-form variance.
        let ax = Axis::new(-8.0, 0.01, 1601, Unit::Length).unwrap();
        let w = Array1::from_iter(ax.positions().map(|x| (-0.5 * x * x).exp()));
        let g = Marginal::normalize(ax, w).unwrap();
        assert!((g.variance() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn variance_is_translation_invariant() {
        let m = array![0.1, 0.2, 0.4, 0.3];
        let a =
            Marginal::from_mass(Axis::new(0.0, 0.3, 4, Unit::Length).unwrap(), m.clone()).unwrap();
        let b = Marginal::from_mass(Axis::new(1e6, 0.3, 4, Unit::Length).unwrap(), m).unwrap();
        assert!((a.variance() - b.variance()).abs() < 1e-9);
    }

    #[test]
    fn rescale_identity_and_scaling() {
        let m = Marginal::from_mass(unit_axis(3), array![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(m.rescale(1.0, Unit::Dimensionless).unwrap(), m);
        let r = m.rescale(2.5, Unit::Length).unwrap();
        assert!((r.variance() - 6.25 * m.variance()).abs() < 1e-12 * m.variance() * 6.25);
        assert_eq!(r.axis().unit(), Unit::Length);
        assert!(matches!(
            m.rescale(0.0, Unit::Length),
            Err(GridError::NonPositiveGamma(_))
        ));
    }
}
