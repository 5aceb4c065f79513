//! Virtual coincidence-counting experiments.
//!
//! Detector positions `z` (mm) map to the physical variable through
//! `gamma * z`. Expected rates are the joint density at bin centres
//! (midpoint rule), normalized to sum 1; counts are independent Poisson draws
//! per cell. Row `i` of a table draws from ChaCha8 stream `i` keyed by the
//! table seed, so the output is fixed by the seed whatever the thread count.

use std::f64::consts::PI;

use ndarray::{Array2, Axis as NdAxis};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Axis, GridError, Unit};
use crate::ingest::{CountTable, IngestError, TableMeta, Variable};
use crate::states::{GridOptions, Space, StateError, StateSpec, MAX_TAIL_MASS};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("rates must be finite and nonnegative with a positive sum")]
    InvalidRates,
}

/// Detector steps (mm) and detector-to-physical scale factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optics {
    pub step_x: f64,
    pub step_p: f64,
    /// Magnification `f2 / f1`.
    pub gamma_x: f64,
    /// Fourier-plane conversion `2 pi / (f3 lambda)`, in mm⁻².
    pub gamma_p: f64,
}

impl Optics {
    /// Imaging lenses of 150 mm and 50 mm, a 250 mm Fourier lens and 884 nm
    /// light, scanned in 0.02 mm (x) and 0.05 mm (p) steps.
    pub fn reference() -> Self {
        let (f1, f2, f3, lambda) = (150.0, 50.0, 250.0, 884e-6);
        Self {
            step_x: 0.02,
            step_p: 0.05,
            gamma_x: f2 / f1,
            gamma_p: 2.0 * PI / (f3 * lambda),
        }
    }

    pub fn step(&self, v: Variable) -> f64 {
        match v {
            Variable::X => self.step_x,
            Variable::P => self.step_p,
        }
    }

    pub fn gamma(&self, v: Variable) -> f64 {
        match v {
            Variable::X => self.gamma_x,
            Variable::P => self.gamma_p,
        }
    }
}

impl Default for Optics {
    fn default() -> Self {
        Self::reference()
    }
}

/// Expected total counts for each table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBudget {
    pub x: u64,
    pub p: u64,
}

impl CountBudget {
    pub fn uniform(total: u64) -> Self {
        Self { x: total, p: total }
    }

    fn get(&self, v: Variable) -> u64 {
        match v {
            Variable::X => self.x,
            Variable::P => self.p,
        }
    }
}

fn space_of(v: Variable) -> Space {
    match v {
        Variable::X => Space::Position,
        Variable::P => Space::Momentum,
    }
}

/// `|psi|^2` on a grid, for spaces without a closed-form amplitude.
struct SampledDensity {
    a: Axis,
    b: Axis,
    rho: Array2<f64>,
}

impl SampledDensity {
    fn new(spec: &StateSpec, space: Space) -> Result<Self, StateError> {
        let wf = match space {
            Space::Position => spec.position_wavefunction(&GridOptions::default())?,
            Space::Momentum => spec.momentum_wavefunction(&GridOptions::default())?,
        };
        Ok(Self {
            a: *wf.axis_a(),
            b: *wf.axis_b(),
            rho: wf.amplitude().mapv(|c| c.norm_sqr()),
        })
    }

    /// Bilinear interpolation; zero outside the grid.
    fn at(&self, x: f64, y: f64) -> f64 {
        let locate = |ax: &Axis, t: f64| -> Option<(usize, f64)> {
            let s = (t - ax.offset()) / ax.step();
            if s < 0.0 || s > (ax.count() - 1) as f64 {
                return None;
            }
            let i = (s.floor() as usize).min(ax.count() - 2);
            Some((i, s - i as f64))
        };
        let (Some((i, fx)), Some((j, fy))) = (locate(&self.a, x), locate(&self.b, y)) else {
            return 0.0;
        };
        let r = &self.rho;
        (1.0 - fx) * (1.0 - fy) * r[(i, j)]
            + fx * (1.0 - fy) * r[(i + 1, j)]
            + (1.0 - fx) * fy * r[(i, j + 1)]
            + fx * fy * r[(i + 1, j + 1)]
    }

    /// Probability outside `[-c, c]^2`.
    fn outside(&self, c: f64) -> f64 {
        let area = self.a.step() * self.b.step();
        let mut out = 0.0;
        for ((i, j), &r) in self.rho.indexed_iter() {
            if self.a.position(i).abs() > c || self.b.position(j).abs() > c {
                out += r * area;
            }
        }
        out
    }

    fn half_width_for_tail(&self, tol: f64) -> f64 {
        let (mut lo, mut hi) = (
            0.0,
            self.a.symmetric_coverage().max(self.b.symmetric_coverage()),
        );
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if self.outside(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Symmetric detector axis (mm) holding all but [`MAX_TAIL_MASS`] of the
/// state's probability in the given variable.
pub fn default_detector_axis(
    spec: &StateSpec,
    variable: Variable,
    optics: &Optics,
) -> Result<Axis, SimulateError> {
    spec.validate()?;
    let space = space_of(variable);
    let c = match spec.tail_half_width(space, MAX_TAIL_MASS) {
        Some(c) => c,
        None => SampledDensity::new(spec, space)?.half_width_for_tail(MAX_TAIL_MASS),
    };
    let step = optics.step(variable);
    let half_points = (c / optics.gamma(variable) / step).ceil() as usize;
    Ok(Axis::symmetric(half_points.max(1), step, Unit::Length)?)
}

/// Midpoint-rule bin probabilities of `variable` for detectors at
/// `(gamma z_i, gamma z_j)`, normalized to sum 1.
pub fn expected_rates(
    spec: &StateSpec,
    detector_a: &Axis,
    detector_b: &Axis,
    variable: Variable,
    gamma: f64,
) -> Result<Array2<f64>, SimulateError> {
    spec.validate()?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(GridError::NonPositiveGamma(gamma).into());
    }
    let space = space_of(variable);
    let unit = variable.unit();
    let a = detector_a.rescaled(gamma, unit)?;
    let b = detector_b.rescaled(gamma, unit)?;
    let c = a.symmetric_coverage().min(b.symmetric_coverage());
    let pa: Vec<f64> = a.positions().collect();
    let pb: Vec<f64> = b.positions().collect();
    let mut rates = Array2::zeros((pa.len(), pb.len()));
    if let Some(tail) = spec.tail_mass(space, c) {
        if tail > MAX_TAIL_MASS {
            return Err(StateError::GridTooNarrow { tail_mass: tail }.into());
        }
        rates
            .axis_iter_mut(NdAxis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut row)| {
                for (r, &y) in row.iter_mut().zip(&pb) {
                    *r = spec
                        .amplitude(space, pa[i], y)
                        .expect("closed form exists")
                        .norm_sqr();
                }
            });
    } else {
        let dens = SampledDensity::new(spec, space)?;
        let tail = dens.outside(c);
        if tail > MAX_TAIL_MASS {
            return Err(StateError::GridTooNarrow { tail_mass: tail }.into());
        }
        for ((i, j), r) in rates.indexed_iter_mut() {
            *r = dens.at(pa[i], pb[j]);
        }
    }
    let total: f64 = rates.sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(SimulateError::InvalidRates);
    }
    rates /= total;
    Ok(rates)
}

/// Independent Poisson counts with means `total_counts * rates`.
pub fn sample_counts(
    rates: &Array2<f64>,
    total_counts: u64,
    seed: u64,
    meta: TableMeta,
) -> Result<CountTable, SimulateError> {
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(SimulateError::InvalidRates);
    }
    let n = total_counts as f64;
    let mut counts = Array2::<u64>::zeros(rates.dim());
    counts
        .axis_iter_mut(NdAxis(0))
        .into_par_iter()
        .zip(rates.axis_iter(NdAxis(0)).into_par_iter())
        .enumerate()
        .for_each(|(i, (mut out, row))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            for (c, &r) in out.iter_mut().zip(row.iter()) {
                let mean = n * r;
                *c = if mean > 0.0 {
                    Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64
                } else {
                    0
                };
            }
        });
    Ok(CountTable::new(meta, counts)?)
}

/// Detector axes for both measurement configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorLayout {
    pub x: (Axis, Axis),
    pub p: (Axis, Axis),
}

impl DetectorLayout {
    pub fn default_for(spec: &StateSpec, optics: &Optics) -> Result<Self, SimulateError> {
        let x = default_detector_axis(spec, Variable::X, optics)?;
        let p = default_detector_axis(spec, Variable::P, optics)?;
        Ok(Self {
            x: (x, x),
            p: (p, p),
        })
    }

    fn axes(&self, v: Variable) -> (Axis, Axis) {
        match v {
            Variable::X => self.x,
            Variable::P => self.p,
        }
    }
}

/// Noise-free rates and table metadata for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedTable {
    pub meta: TableMeta,
    pub rates: Array2<f64>,
}

pub fn expected_table(
    spec: &StateSpec,
    optics: &Optics,
    layout: &DetectorLayout,
    variable: Variable,
) -> Result<ExpectedTable, SimulateError> {
    let (a, b) = layout.axes(variable);
    if a.step() != optics.step(variable) || b.step() != optics.step(variable) {
        return Err(GridError::NonPositiveStep(a.step()).into());
    }
    let gamma = optics.gamma(variable);
    let rates = expected_rates(spec, &a, &b, variable, gamma)?;
    let meta = TableMeta {
        variable,
        step_mm: optics.step(variable),
        gamma,
        offset_a: a.offset(),
        offset_b: b.offset(),
    };
    Ok(ExpectedTable { meta, rates })
}

/// Both tables of a virtual experiment on the given detector layout.
pub fn run_virtual_experiment_on(
    spec: &StateSpec,
    optics: &Optics,
    layout: &DetectorLayout,
    budget: CountBudget,
    seed: u64,
) -> Result<(CountTable, CountTable), SimulateError> {
    // Independent per-table seeds derived from the run seed.
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds = [master.next_u64(), master.next_u64()];
    let mut out = Vec::with_capacity(2);
    for (v, s) in [Variable::X, Variable::P].into_iter().zip(seeds) {
        let t = expected_table(spec, optics, layout, v)?;
        out.push(sample_counts(&t.rates, budget.get(v), s, t.meta)?);
    }
    let p = out.pop().expect("two tables");
    let x = out.pop().expect("two tables");
    Ok((x, p))
}

/// Both tables of a virtual experiment, with default detector scan ranges.
pub fn run_virtual_experiment(
    spec: &StateSpec,
    optics: &Optics,
    budget: CountBudget,
    seed: u64,
) -> Result<(CountTable, CountTable), SimulateError> {
    let layout = DetectorLayout::default_for(spec, optics)?;
    run_virtual_experiment_on(spec, optics, &layout, budget, seed)
}
