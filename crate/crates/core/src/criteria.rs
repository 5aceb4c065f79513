//! EPR inequalities, single-party uncertainty relations and the key-rate bound.
//!
//! Every check is packaged as a [`CriterionReport`]. A report is *violated*
//! when its value falls below its bound by more than [`ROUNDING_MARGIN`];
//! saturation counts as satisfied.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::entropy::{
    conditional_entropy_chain, differential_entropy, inferred_variance, slice_entropy,
};
use crate::grid::{weighted_moments, JointDistribution, Marginal, Party};

/// Lower bound of the variance-product relations, `1/4`.
pub const VARIANCE_BOUND: f64 = 0.25;

/// Margin a value must clear before it counts as a violation, so that states
/// sitting on a bound (the vacuum, for one) are not flagged by rounding.
pub const ROUNDING_MARGIN: f64 = 1e-9;

/// `ln(pi e) = 1 + ln(pi)`, the entropic bound.
pub fn entropic_bound() -> f64 {
    1.0 + PI.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    VarianceEpr,
    EntropicEpr,
    Heisenberg,
    EntropicUr,
    #[serde(rename = "keyrate")]
    KeyRate,
}

impl CriterionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::VarianceEpr => "variance_epr",
            CriterionKind::EntropicEpr => "entropic_epr",
            CriterionKind::Heisenberg => "heisenberg",
            CriterionKind::EntropicUr => "entropic_ur",
            CriterionKind::KeyRate => "keyrate",
        }
    }
}

/// Which way an EPR inference runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Inference {
    /// Infer party A's outcome from party B's.
    AGivenB,
    /// Infer party B's outcome from party A's.
    BGivenA,
}

impl Inference {
    pub const BOTH: [Inference; 2] = [Inference::AGivenB, Inference::BGivenA];

    pub fn inferred(self) -> Party {
        match self {
            Inference::AGivenB => Party::A,
            Inference::BGivenA => Party::B,
        }
    }

    pub fn given(self) -> Party {
        self.inferred().other()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "A_given_B")]
    AGivenB,
    #[serde(rename = "B_given_A")]
    BGivenA,
    #[serde(rename = "single_party")]
    SingleParty,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::AGivenB => "A_given_B",
            Direction::BGivenA => "B_given_A",
            Direction::SingleParty => "single_party",
        }
    }
}

impl From<Inference> for Direction {
    fn from(i: Inference) -> Self {
        match i {
            Inference::AGivenB => Direction::AGivenB,
            Inference::BGivenA => Direction::BGivenA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub direction: Direction,
    pub value: f64,
    pub bound: f64,
    /// For [`CriterionKind::KeyRate`] this marks a guaranteed positive key rate.
    pub violated: bool,
    pub uncertainty: Option<f64>,
    /// `(bound - value) / uncertainty` (reversed sign for the key rate, so
    /// that positive always means "towards violation").
    pub significance_sigmas: Option<f64>,
    /// Which party a single-party report describes, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party: Option<Party>,
}

impl CriterionReport {
    pub fn new(kind: CriterionKind, direction: Direction, value: f64) -> Self {
        let (bound, violated) = match kind {
            CriterionKind::VarianceEpr | CriterionKind::Heisenberg => {
                (VARIANCE_BOUND, value < VARIANCE_BOUND - ROUNDING_MARGIN)
            }
            CriterionKind::EntropicEpr | CriterionKind::EntropicUr => {
                let b = entropic_bound();
                (b, value < b - ROUNDING_MARGIN)
            }
            CriterionKind::KeyRate => (0.0, value > ROUNDING_MARGIN),
        };
        Self {
            kind,
            direction,
            value,
            bound,
            violated,
            uncertainty: None,
            significance_sigmas: None,
            party: None,
        }
    }

    pub fn with_uncertainty(mut self, uncertainty: f64) -> Self {
        self.uncertainty = Some(uncertainty);
        self.significance_sigmas = (uncertainty > 0.0).then(|| {
            let margin = match self.kind {
                CriterionKind::KeyRate => self.value - self.bound,
                _ => self.bound - self.value,
            };
            margin / uncertainty
        });
        self
    }

    pub fn for_party(mut self, party: Party) -> Self {
        self.party = Some(party);
        self
    }
}

/// `Δ²_min(X) Δ²_min(P)` against 1/4. Both tables must be in physical units.
pub fn variance_epr(
    dist_x: &JointDistribution,
    dist_p: &JointDistribution,
    inference: Inference,
) -> CriterionReport {
    let who = inference.inferred();
    let value = inferred_variance(dist_x, who) * inferred_variance(dist_p, who);
    CriterionReport::new(CriterionKind::VarianceEpr, inference.into(), value)
}

/// Sum of conditional entropies `h(X_i|X_j) + h(P_i|P_j)` against `ln(pi e)`.
pub fn entropic_epr(
    dist_x: &JointDistribution,
    dist_p: &JointDistribution,
    inference: Inference,
) -> CriterionReport {
    let given = inference.given();
    let value = conditional_entropy_chain(dist_x, given) + conditional_entropy_chain(dist_p, given);
    CriterionReport::new(CriterionKind::EntropicEpr, inference.into(), value)
}

/// `Δ²(X) Δ²(P)` of one party against 1/4.
pub fn heisenberg_check(marg_x: &Marginal, marg_p: &Marginal) -> CriterionReport {
    CriterionReport::new(
        CriterionKind::Heisenberg,
        Direction::SingleParty,
        marg_x.variance() * marg_p.variance(),
    )
}

/// `h(X) + h(P)` of one party against `ln(pi e)`.
pub fn entropic_ur_check(marg_x: &Marginal, marg_p: &Marginal) -> CriterionReport {
    CriterionReport::new(
        CriterionKind::EntropicUr,
        Direction::SingleParty,
        differential_entropy(marg_x) + differential_entropy(marg_p),
    )
}

/// Secret-key-rate lower bound `ln(pi e) - [h(X_B|X_A) + h(P_B|P_A)]`, in nats.
pub fn keyrate_lower_bound(entropic_sum_b_given_a: f64) -> f64 {
    entropic_bound() - entropic_sum_b_given_a
}

/// Key-rate report derived from a `B_given_A` entropic EPR report.
pub fn keyrate_report(entropic_b_given_a: &CriterionReport) -> CriterionReport {
    let r = CriterionReport::new(
        CriterionKind::KeyRate,
        entropic_b_given_a.direction,
        keyrate_lower_bound(entropic_b_given_a.value),
    );
    match entropic_b_given_a.uncertainty {
        Some(u) => r.with_uncertainty(u),
        None => r,
    }
}

/// Outcome of the Gaussian-maximality check linking the two EPR criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConsistency {
    pub holds: bool,
    /// Conditional-entropy sum.
    pub entropic_sum: f64,
    /// `ln(2 pi e sqrt(Δ²_min(X) Δ²_min(P)))`, the entropic image of the variance product.
    pub variance_image: f64,
    /// Smallest `½ ln(2 pi e (σ_j² + step²/12)) - h_j` over all populated slices.
    pub worst_slice_margin: f64,
}

/// Slack allowed between the aggregate entropic sum and the variance image.
pub const BOUND_SLACK: f64 = 0.02;

/// Checks that every populated conditional slice is bounded by the Gaussian of
/// equal variance and that, in aggregate, the entropic sum does not exceed the
/// entropic image of the variance product by more than [`BOUND_SLACK`].
///
/// Slices are bounded with the lattice form of the maximum-entropy inequality,
/// `H + ln(step) <= ½ ln(2 pi e (σ² + step²/12))`, which holds exactly for
/// binned data.
pub fn bound_consistency(
    dist_x: &JointDistribution,
    dist_p: &JointDistribution,
    inference: Inference,
) -> BoundConsistency {
    let who = inference.inferred();
    let worst = slice_margin(dist_x, who).min(slice_margin(dist_p, who));
    let vx = inferred_variance(dist_x, who);
    let vp = inferred_variance(dist_p, who);
    let entropic_sum = entropic_epr(dist_x, dist_p, inference).value;
    let variance_image = (2.0 * PI * E).ln() + 0.5 * (vx * vp).ln();
    let holds = worst >= -1e-12 && entropic_sum <= variance_image + BOUND_SLACK;
    BoundConsistency {
        holds,
        entropic_sum,
        variance_image,
        worst_slice_margin: worst,
    }
}

fn slice_margin(dist: &JointDistribution, infer: Party) -> f64 {
    let given = infer.other();
    let axis = dist.axis(infer);
    let step = axis.step();
    (0..dist.axis(given).count())
        .filter_map(|j| {
            let slice = dist.raw_slice(given, j);
            let w = slice.sum();
            (w > 0.0).then(|| {
                let var = weighted_moments(axis, slice).1;
                let h = slice_entropy(slice, w) + step.ln();
                0.5 * (2.0 * PI * E * (var + step * step / 12.0)).ln() - h
            })
        })
        .fold(f64::INFINITY, f64::min)
}

/// Every report for one state: both EPR criteria in both directions, the
/// single-party relations for each party, and the key-rate bound.
pub fn full_report(dist_x: &JointDistribution, dist_p: &JointDistribution) -> Vec<CriterionReport> {
    let mut out = Vec::with_capacity(9);
    for inf in Inference::BOTH {
        out.push(variance_epr(dist_x, dist_p, inf));
    }
    for inf in Inference::BOTH {
        out.push(entropic_epr(dist_x, dist_p, inf));
    }
    for party in [Party::A, Party::B] {
        let (mx, mp) = (dist_x.marginal(party), dist_p.marginal(party));
        out.push(heisenberg_check(&mx, &mp).for_party(party));
        out.push(entropic_ur_check(&mx, &mp).for_party(party));
    }
    out.push(keyrate_report(&entropic_epr(
        dist_x,
        dist_p,
        Inference::BGivenA,
    )));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Unit};
    use crate::states::{GridOptions, StateSpec};
    use ndarray::Array1;

    fn gaussian(var: f64) -> Marginal {
        let sd = var.sqrt();
        let axis = Axis::symmetric(1200, 12.0 * sd / 1200.0, Unit::Length).unwrap();
        let w = Array1::from_iter(axis.positions().map(|x| (-0.5 * x * x / var).exp()));
        Marginal::normalize(axis, w).unwrap()
    }

    #[test]
    fn bound_constant() {
        assert!((entropic_bound() - (PI * E).ln()).abs() < 1e-15);
        assert!((entropic_bound() - 2.1447298858494).abs() < 1e-12);
    }

    #[test]
    fn verdicts_use_strict_inequality() {
        let r = CriterionReport::new(CriterionKind::VarianceEpr, Direction::AGivenB, 0.25);
        assert!(!r.violated);
        let r = CriterionReport::new(CriterionKind::EntropicEpr, Direction::AGivenB, 1.94)
            .with_uncertainty(0.04);
        assert!(r.violated);
        assert!((r.significance_sigmas.unwrap() - (entropic_bound() - 1.94) / 0.04).abs() < 1e-12);
    }

    #[test]
    fn single_party_gaussians_saturate() {
        let unit = heisenberg_check(&gaussian(1.0), &gaussian(0.25));
        assert!((unit.value - 0.25).abs() < 1e-9);
        assert!(!unit.violated);
        let squeezed = heisenberg_check(&gaussian(0.1), &gaussian(2.5));
        assert!((squeezed.value - 0.25).abs() < 1e-9);
        let ent = entropic_ur_check(&gaussian(0.1), &gaussian(2.5));
        assert!((ent.value - entropic_bound()).abs() < 2e-3);
    }

    #[test]
    fn first_hermite_marginals_exceed_heisenberg() {
        let (x, p) = StateSpec::hermite_gauss(1)
            .exact_distributions(&GridOptions::new(256, 6.0).unwrap())
            .unwrap();
        let r = heisenberg_check(&x.marginal(Party::A), &p.marginal(Party::A));
        assert!(r.value > 0.25);
    }

    #[test]
    fn keyrate_examples() {
        assert_eq!(keyrate_lower_bound(entropic_bound()), 0.0);
        // 1 + ln(pi) - 1.99, by hand: 2.144729886 - 1.99.
        assert!((keyrate_lower_bound(1.99) - 0.154729886).abs() < 1e-9);
        assert!(keyrate_lower_bound(2.5) < 0.0);
        let e = CriterionReport::new(CriterionKind::EntropicEpr, Direction::BGivenA, 1.99)
            .with_uncertainty(0.04);
        let k = keyrate_report(&e);
        assert!(k.violated && e.violated);
        assert!((k.significance_sigmas.unwrap() - e.significance_sigmas.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ground_state_saturates_both_criteria() {
        let (x, p) = StateSpec::hermite_gauss(0)
            .exact_distributions(&GridOptions::default())
            .unwrap();
        for inf in Inference::BOTH {
            let v = variance_epr(&x, &p, inf);
            assert!((v.value - 0.25).abs() < 1e-4);
            let e = entropic_epr(&x, &p, inf);
            assert!((e.value - entropic_bound()).abs() < 2e-3);
            let c = bound_consistency(&x, &p, inf);
            assert!(c.holds);
            assert!((c.variance_image - c.entropic_sum).abs() < BOUND_SLACK);
        }
    }

    #[test]
    fn non_gaussian_state_is_strictly_below_variance_image() {
        let (x, p) = StateSpec::hermite_gauss(1)
            .exact_distributions(&GridOptions::new(512, 6.0).unwrap())
            .unwrap();
        let c = bound_consistency(&x, &p, Inference::AGivenB);
        assert!(c.holds);
        assert!(c.entropic_sum < c.variance_image - 0.05);
        assert!(c.worst_slice_margin >= 0.0);
    }

    #[test]
    fn strongly_squeezed_engineered_state_violates_variance_criterion() {
        // sigma_minus / sigma_plus = 10.
        let (x, p) = StateSpec::engineered(0.3, 3.0)
            .unwrap()
            .exact_distributions(&GridOptions::new(1024, 6.0).unwrap())
            .unwrap();
        let v = variance_epr(&x, &p, Inference::AGivenB);
        assert!(v.violated, "{}", v.value);
        assert!(entropic_epr(&x, &p, Inference::AGivenB).violated);
    }

    #[test]
    fn full_report_layout() {
        let (x, p) = StateSpec::hermite_gauss(2)
            .exact_distributions(&GridOptions::new(128, 6.0).unwrap())
            .unwrap();
        let reports = full_report(&x, &p);
        assert_eq!(reports.len(), 9);
        assert_eq!(reports[8].kind, CriterionKind::KeyRate);
        assert_eq!(reports[8].violated, reports[3].violated);
    }
}
