//! Coincidence-count tables: parsing, conversion to physical units, and
//! criteria with Poissonian uncertainties.
//!
//! A table is indexed by detector positions `z` in mm. The physical variable is
//! `gamma * z`: millimetres for `x` tables (`gamma` is a magnification) and
//! inverse millimetres for `p` tables (`gamma` in mm⁻²).

mod format;
mod uncertainty;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{self, CriterionReport, Inference};
use crate::entropy::{
    differential_from_discrete, joint_differential_from_discrete, scale_entropy, shannon, Arity,
    EntropyError,
};
use crate::grid::{Axis, GridError, JointDistribution, Party, Unit};

pub use format::{parse_count_table, write_count_table, ParseError, ParseErrorKind, MAGIC};
pub use uncertainty::{
    analytic_uncertainties, bootstrap_uncertainties, UncertaintyConfig, UncertaintyMethod,
    DEFAULT_BOOTSTRAP_SAMPLES, MIN_BOOTSTRAP_SAMPLES,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("count table has no counts")]
    ZeroTotalCounts,
    #[error("total count exceeds {}", u64::MAX)]
    CountOverflow,
    #[error("count table must be at least 2x2, got {0}x{1}")]
    TooSmall(usize, usize),
    #[error("detector step must be positive and finite, got {0}")]
    NonPositiveStep(f64),
    #[error("gamma must be positive and finite, got {0}")]
    NonPositiveGamma(f64),
    #[error("offsets must be finite")]
    NonFiniteOffset,
    #[error("expected the {expected} table, got the {got} table")]
    WrongVariable { expected: Variable, got: Variable },
    #[error("at least {MIN_BOOTSTRAP_SAMPLES} bootstrap samples are required, got {0}")]
    TooFewBootstrapSamples(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Which quadrature a table records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    X,
    P,
}

impl Variable {
    pub fn unit(self) -> Unit {
        match self {
            Variable::X => Unit::Length,
            Variable::P => Unit::InverseLength,
        }
    }
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variable::X => "x",
            Variable::P => "p",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub variable: Variable,
    /// Detector step in mm.
    pub step_mm: f64,
    pub gamma: f64,
    /// Detector position of the first row (mm).
    pub offset_a: f64,
    /// Detector position of the first column (mm).
    pub offset_b: f64,
}

impl TableMeta {
    pub fn new(variable: Variable, step_mm: f64, gamma: f64) -> Self {
        Self {
            variable,
            step_mm,
            gamma,
            offset_a: 0.0,
            offset_b: 0.0,
        }
    }

    fn validate(&self) -> Result<(), IngestError> {
        if !(self.step_mm.is_finite() && self.step_mm > 0.0) {
            return Err(IngestError::NonPositiveStep(self.step_mm));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(IngestError::NonPositiveGamma(self.gamma));
        }
        if !(self.offset_a.is_finite() && self.offset_b.is_finite()) {
            return Err(IngestError::NonFiniteOffset);
        }
        Ok(())
    }

    /// Physical bin width, `gamma * step_mm`.
    pub fn physical_step(&self) -> f64 {
        self.gamma * self.step_mm
    }

    /// Detector axes (mm) for a table of the given shape.
    pub fn detector_axes(&self, rows: usize, cols: usize) -> Result<(Axis, Axis), IngestError> {
        Ok((
            Axis::new(self.offset_a, self.step_mm, rows, Unit::Length)?,
            Axis::new(self.offset_b, self.step_mm, cols, Unit::Length)?,
        ))
    }

    /// Axes in physical units for a table of the given shape.
    pub fn physical_axes(&self, rows: usize, cols: usize) -> Result<(Axis, Axis), IngestError> {
        let (a, b) = self.detector_axes(rows, cols)?;
        let unit = self.variable.unit();
        Ok((a.rescaled(self.gamma, unit)?, b.rescaled(self.gamma, unit)?))
    }
}

/// Joint coincidence counts; rows run over `z_A`, columns over `z_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub meta: TableMeta,
    pub counts: Array2<u64>,
}

impl CountTable {
    /// Validated constructor. All-zero matrices are accepted here and rejected
    /// when converted to a distribution. The total must fit in a `u64`.
    pub fn new(meta: TableMeta, counts: Array2<u64>) -> Result<Self, IngestError> {
        meta.validate()?;
        let (r, c) = counts.dim();
        if r < 2 || c < 2 {
            return Err(IngestError::TooSmall(r, c));
        }
        counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or(IngestError::CountOverflow)?;
        Ok(Self { meta, counts })
    }

    /// Saturates at `u64::MAX` for tables assembled by hand past the limit.
    pub fn total(&self) -> u64 {
        self.counts
            .iter()
            .fold(0u64, |acc, &c| acc.saturating_add(c))
    }

    pub fn physical_axes(&self) -> Result<(Axis, Axis), IngestError> {
        let (r, c) = self.counts.dim();
        self.meta.physical_axes(r, c)
    }

    /// Normalized distribution on the physical axes.
    pub fn to_physical_distribution(&self) -> Result<JointDistribution, IngestError> {
        if self.total() == 0 {
            return Err(IngestError::ZeroTotalCounts);
        }
        physical_distribution(&self.meta, &self.counts.mapv(|c| c as f64))
    }
}

/// Normalizes nonnegative weights (counts or expected rates) onto the physical
/// axes described by `meta`.
pub fn physical_distribution(
    meta: &TableMeta,
    weights: &Array2<f64>,
) -> Result<JointDistribution, IngestError> {
    meta.validate()?;
    let (r, c) = weights.dim();
    let (a, b) = meta.physical_axes(r, c)?;
    match crate::grid::normalize(weights, a, b) {
        Err(GridError::AllZero) => Err(IngestError::ZeroTotalCounts),
        other => Ok(other?),
    }
}

/// Reads and validates one table from raw bytes.
pub fn read_count_table(bytes: &[u8]) -> Result<CountTable, IngestError> {
    let t = parse_count_table(bytes)?;
    CountTable::new(t.meta, t.counts)
}

/// The differential entropies of one table, built in two steps from the raw
/// counts: discrete entropy plus `ln(step_mm)` per dimension, then `ln(gamma)`
/// per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntropies {
    pub variable: Variable,
    pub h_a: f64,
    pub h_b: f64,
    pub h_joint: f64,
    /// `h(A | B)`
    pub h_a_given_b: f64,
    /// `h(B | A)`
    pub h_b_given_a: f64,
}

impl TableEntropies {
    pub fn from_table(t: &CountTable) -> Result<Self, IngestError> {
        let total = t.total();
        if total == 0 {
            return Err(IngestError::ZeroTotalCounts);
        }
        let n = total as f64;
        let p = t.counts.mapv(|c| c as f64 / n);
        let pa = p.sum_axis(ndarray::Axis(1));
        let pb = p.sum_axis(ndarray::Axis(0));
        let step = t.meta.step_mm;
        let g = t.meta.gamma;
        let one = |h: f64| -> Result<f64, IngestError> {
            Ok(scale_entropy(
                differential_from_discrete(h, step)?,
                g,
                Arity::One,
            )?)
        };
        let h_a = one(shannon(pa.iter()))?;
        let h_b = one(shannon(pb.iter()))?;
        let h_joint = scale_entropy(
            joint_differential_from_discrete(shannon(p.iter()), step, step)?,
            g,
            Arity::Two,
        )?;
        Ok(Self {
            variable: t.meta.variable,
            h_a,
            h_b,
            h_joint,
            h_a_given_b: h_joint - h_b,
            h_b_given_a: h_joint - h_a,
        })
    }
}

/// Entropy summary of a measurement pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBreakdown {
    pub x: TableEntropies,
    pub p: TableEntropies,
}

/// Everything `analyze` derives from a pair of tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Same layout as [`criteria::full_report`], with uncertainties attached.
    pub reports: Vec<CriterionReport>,
    pub breakdown: EntropyBreakdown,
    pub method: UncertaintyMethod,
    pub total_x: u64,
    pub total_p: u64,
}

/// The two EPR criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EprCriterion {
    Variance,
    Entropic,
}

fn check_variables(tx: &CountTable, tp: &CountTable) -> Result<(), IngestError> {
    for (t, want) in [(tx, Variable::X), (tp, Variable::P)] {
        if t.meta.variable != want {
            return Err(IngestError::WrongVariable {
                expected: want,
                got: t.meta.variable,
            });
        }
    }
    Ok(())
}

/// Full analysis of an `x` table and a `p` table.
pub fn analyze(
    table_x: &CountTable,
    table_p: &CountTable,
    cfg: &UncertaintyConfig,
) -> Result<Analysis, IngestError> {
    check_variables(table_x, table_p)?;
    let dx = table_x.to_physical_distribution()?;
    let dp = table_p.to_physical_distribution()?;
    for given in [Party::A, Party::B] {
        crate::entropy::discretization_warning(&dx, given);
        crate::entropy::discretization_warning(&dp, given);
    }
    let reports = criteria::full_report(&dx, &dp);
    let sigmas = match cfg.method {
        UncertaintyMethod::Analytic => analytic_uncertainties(table_x, table_p)?,
        UncertaintyMethod::Bootstrap => bootstrap_uncertainties(table_x, table_p, cfg)?,
    };
    let reports = reports
        .into_iter()
        .zip(sigmas)
        .map(|(r, s)| r.with_uncertainty(s))
        .collect();
    Ok(Analysis {
        reports,
        breakdown: EntropyBreakdown {
            x: TableEntropies::from_table(table_x)?,
            p: TableEntropies::from_table(table_p)?,
        },
        method: cfg.method,
        total_x: table_x.total(),
        total_p: table_p.total(),
    })
}

/// One EPR criterion in one direction, with its uncertainty.
pub fn criterion_with_uncertainty(
    table_x: &CountTable,
    table_p: &CountTable,
    criterion: EprCriterion,
    inference: Inference,
    cfg: &UncertaintyConfig,
) -> Result<CriterionReport, IngestError> {
    let idx = match (criterion, inference) {
        (EprCriterion::Variance, Inference::AGivenB) => 0,
        (EprCriterion::Variance, Inference::BGivenA) => 1,
        (EprCriterion::Entropic, Inference::AGivenB) => 2,
        (EprCriterion::Entropic, Inference::BGivenA) => 3,
    };
    Ok(analyze(table_x, table_p, cfg)?.reports[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn unit_scale_keeps_normalized_counts() {
        let t = CountTable::new(
            TableMeta::new(Variable::X, 1.0, 1.0),
            array![[1, 3], [0, 4]],
        )
        .unwrap();
        let d = t.to_physical_distribution().unwrap();
        assert_eq!(d.mass(), &array![[0.125, 0.375], [0.0, 0.5]]);
        assert_eq!(d.axis_a().step(), 1.0);
    }

    #[test]
    fn physical_steps_follow_gamma() {
        let gx = 50.0 / 150.0;
        let gp = 2.0 * std::f64::consts::PI / (250.0 * 884e-6);
        assert!((gp - 28.4307).abs() < 1e-4);
        let x = TableMeta::new(Variable::X, 0.02, gx);
        let p = TableMeta::new(Variable::P, 0.05, gp);
        assert!((x.physical_step() - 0.02 / 3.0).abs() < 1e-15);
        assert!((p.physical_step() - 0.05 * gp).abs() < 1e-12);
        let (a, _) = p.physical_axes(4, 4).unwrap();
        assert_eq!(a.unit(), Unit::InverseLength);
    }

    #[test]
    fn two_step_entropies_match_rescaled_grid() {
        let t = CountTable::new(
            TableMeta {
                offset_a: -0.3,
                ..TableMeta::new(Variable::P, 0.05, 28.43)
            },
            array![[5, 1, 0], [2, 9, 3], [0, 4, 8]],
        )
        .unwrap();
        let e = TableEntropies::from_table(&t).unwrap();
        let d = t.to_physical_distribution().unwrap();
        use crate::entropy::*;
        assert!((e.h_joint - joint_differential_entropy(&d)).abs() < 1e-12);
        assert!((e.h_a_given_b - conditional_entropy_direct(&d, Party::B)).abs() < 1e-12);
        assert!((e.h_b_given_a - conditional_entropy_chain(&d, Party::A)).abs() < 1e-12);
        assert!((e.h_a - differential_entropy(&d.marginal(Party::A))).abs() < 1e-12);
    }

    #[test]
    fn rejects_swapped_tables() {
        let x = CountTable::new(
            TableMeta::new(Variable::X, 1.0, 1.0),
            array![[1, 0], [0, 1]],
        )
        .unwrap();
        let err = analyze(&x, &x, &UncertaintyConfig::default()).unwrap_err();
        assert!(matches!(err, IngestError::WrongVariable { .. }));
    }

    #[test]
    fn zero_tables_are_unusable() {
        let z =
            CountTable::new(TableMeta::new(Variable::X, 1.0, 1.0), Array2::zeros((3, 3))).unwrap();
        assert!(matches!(
            z.to_physical_distribution(),
            Err(IngestError::ZeroTotalCounts)
        ));
        assert!(matches!(
            TableEntropies::from_table(&z),
            Err(IngestError::ZeroTotalCounts)
        ));
    }
}
