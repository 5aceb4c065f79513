//! Bipartite wavefunction families sampled on grids.
//!
//! Three families are provided, all written in the rotated coordinates
//! `u = a + b` and `v = a - b`:
//!
//! * [`StateSpec::HermiteGauss`]: `C_n H_n(u) exp(-u^2/2) exp(-v^2/2)`.
//! * [`StateSpec::Engineered`]: `u exp(-u^2/(4 s+^2)) exp(-v^2/(4 s-^2)) / sqrt(pi s- s+^3)`.
//! * [`StateSpec::SincSpdc`]: defined in momentum space as
//!   `exp(-w^2 p+^2 / 4) sinc(L p-^2 / (4 K))` with `sinc(x) = sin(x)/x`.
//!
//! Momentum amplitudes use `psi(pa, pb) = (2 pi)^-1 ∬ psi(xa, xb) exp(-i (pa xa + pb xb))`,
//! which fixes `[X, P] = i`. The first two families have closed-form momentum
//! amplitudes; [`fourier`] provides the grid transform used for the sinc
//! family's position side and for cross-checking the closed forms.

pub mod fourier;
mod profile;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Axis, GridError, JointDistribution, Unit};
use profile::Profile;

/// Largest tail mass allowed outside a sampling grid.
pub const MAX_TAIL_MASS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("invalid state parameter: {0}")]
    InvalidParameter(String),
    #[error("grid too narrow: estimated {tail_mass:.3e} of the probability lies outside it")]
    GridTooNarrow { tail_mass: f64 },
    #[error("axes are not a discrete Fourier pair")]
    IncompatibleAxes,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Physicists' Hermite polynomial by the three-term recurrence.
pub fn hermite(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Position,
    Momentum,
}

impl Space {
    pub fn unit(self) -> Unit {
        match self {
            Space::Position => Unit::Length,
            Space::Momentum => Unit::InverseLength,
        }
    }
}

/// Parameters of one bipartite wavefunction. Lengths in mm, wavenumbers in mm^-1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StateSpec {
    HermiteGauss {
        n: u32,
    },
    Engineered {
        sigma_plus: f64,
        sigma_minus: f64,
    },
    SincSpdc {
        crystal_length: f64,
        pump_wavenumber: f64,
        pump_width: f64,
    },
}

/// Measured widths of the engineered state, as variances in mm^2.
pub const MEASURED_SIGMA_PLUS_SQ: f64 = 0.566;
pub const MEASURED_SIGMA_MINUS_SQ: f64 = 0.240;

fn positive(name: &str, v: f64) -> Result<(), StateError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(StateError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl StateSpec {
    pub fn hermite_gauss(n: u32) -> Self {
        StateSpec::HermiteGauss { n }
    }

    pub fn engineered(sigma_plus: f64, sigma_minus: f64) -> Result<Self, StateError> {
        let s = StateSpec::Engineered {
            sigma_plus,
            sigma_minus,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sinc_spdc(
        crystal_length: f64,
        pump_wavenumber: f64,
        pump_width: f64,
    ) -> Result<Self, StateError> {
        let s = StateSpec::SincSpdc {
            crystal_length,
            pump_wavenumber,
            pump_width,
        };
        s.validate()?;
        Ok(s)
    }

    /// The engineered state at the measured output-plane widths.
    pub fn measured_engineered() -> Self {
        StateSpec::Engineered {
            sigma_plus: MEASURED_SIGMA_PLUS_SQ.sqrt(),
            sigma_minus: MEASURED_SIGMA_MINUS_SQ.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<(), StateError> {
        match *self {
            StateSpec::HermiteGauss { n } => {
                if n > 150 {
                    return Err(StateError::InvalidParameter(format!(
                        "Hermite order {n} is too large to sample in double precision"
                    )));
                }
                Ok(())
            }
            StateSpec::Engineered {
                sigma_plus,
                sigma_minus,
            } => {
                positive("sigma_plus", sigma_plus)?;
                positive("sigma_minus", sigma_minus)
            }
            StateSpec::SincSpdc {
                crystal_length,
                pump_wavenumber,
                pump_width,
            } => {
                positive("crystal_length", crystal_length)?;
                positive("pump_wavenumber", pump_wavenumber)?;
                positive("pump_width", pump_width)
            }
        }
    }

    /// Factors `(f, g)` of the `|amplitude|` in `(a + b, a - b)`.
    ///
    /// `None` for the sinc family in position space, which has no closed form.
    fn profiles(&self, space: Space) -> Option<(Profile, Profile)> {
        use Profile::*;
        let hg = |order, scale| HermiteGauss { order, scale };
        match (*self, space) {
            (StateSpec::HermiteGauss { n }, Space::Position) => Some((hg(n, 1.0), hg(0, 1.0))),
            (StateSpec::HermiteGauss { n }, Space::Momentum) => Some((hg(n, 2.0), hg(0, 2.0))),
            (
                StateSpec::Engineered {
                    sigma_plus,
                    sigma_minus,
                },
                Space::Position,
            ) => Some((
                hg(1, 2f64.sqrt() * sigma_plus),
                hg(0, 2f64.sqrt() * sigma_minus),
            )),
            (
                StateSpec::Engineered {
                    sigma_plus,
                    sigma_minus,
                },
                Space::Momentum,
            ) => Some((
                hg(1, 2f64.sqrt() / sigma_plus),
                hg(0, 2f64.sqrt() / sigma_minus),
            )),
            (
                StateSpec::SincSpdc {
                    crystal_length,
                    pump_wavenumber,
                    pump_width,
                },
                Space::Momentum,
            ) => Some((
                hg(0, 2f64.sqrt() / pump_width),
                Sinc {
                    a: crystal_length / (4.0 * pump_wavenumber),
                },
            )),
            (StateSpec::SincSpdc { .. }, Space::Position) => None,
        }
    }

    /// Closed-form amplitude at `(a, b)` in the requested space.
    ///
    /// Normalized to unit integral for the first two families; the sinc family
    /// is left unnormalized. Returns `None` for the sinc family in position
    /// space.
    pub fn amplitude(&self, space: Space, a: f64, b: f64) -> Option<Complex64> {
        let (u, v) = (a + b, a - b);
        match (*self, space) {
            (StateSpec::HermiteGauss { n }, Space::Position) => {
                let c = (2f64.ln() - PI.ln() - n as f64 * 2f64.ln() - ln_factorial(n)) * 0.5;
                let r = c.exp() * hermite(n, u) * (-0.5 * (u * u + v * v)).exp();
                Some(Complex64::new(r, 0.0))
            }
            (StateSpec::HermiteGauss { n }, Space::Momentum) => {
                let c = (2f64.ln() - PI.ln() - n as f64 * 2f64.ln() - ln_factorial(n)) * 0.5;
                let r = 0.5 * c.exp() * hermite(n, 0.5 * u) * (-(u * u + v * v) / 8.0).exp();
                Some(Complex64::new(r, 0.0) * Complex64::new(0.0, -1.0).powu(n))
            }
            (
                StateSpec::Engineered {
                    sigma_plus: sp,
                    sigma_minus: sm,
                },
                Space::Position,
            ) => {
                let r = u / (PI * sm * sp.powi(3)).sqrt()
                    * (-u * u / (4.0 * sp * sp) - v * v / (4.0 * sm * sm)).exp();
                Some(Complex64::new(r, 0.0))
            }
            (
                StateSpec::Engineered {
                    sigma_plus: sp,
                    sigma_minus: sm,
                },
                Space::Momentum,
            ) => {
                let r = u
                    * (sp.powi(3) * sm / PI).sqrt()
                    * (-(sp * sp * u * u + sm * sm * v * v) / 4.0).exp();
                Some(Complex64::new(0.0, -r))
            }
            (
                StateSpec::SincSpdc {
                    crystal_length,
                    pump_wavenumber,
                    pump_width,
                },
                Space::Momentum,
            ) => {
                let r = (-pump_width * pump_width * u * u / 4.0).exp()
                    * sinc(crystal_length * v * v / (4.0 * pump_wavenumber));
                Some(Complex64::new(r, 0.0))
            }
            (StateSpec::SincSpdc { .. }, Space::Position) => None,
        }
    }

    /// Estimated probability outside a square grid covering `[-c, c]^2`.
    ///
    /// `|u| <= c` and `|v| <= c` imply both coordinates lie in `[-c, c]`, so the
    /// sum of the two one-dimensional tails bounds the missing mass.
    pub fn tail_mass(&self, space: Space, c: f64) -> Option<f64> {
        let (f, g) = self.profiles(space)?;
        Some(f.tail_mass(c) + g.tail_mass(c))
    }

    /// Smallest half-width `c` (to bisection accuracy) whose square `[-c, c]^2`
    /// leaves at most `tol` outside, by the same bound as [`Self::tail_mass`].
    pub fn tail_half_width(&self, space: Space, tol: f64) -> Option<f64> {
        let (f, g) = self.profiles(space)?;
        Some(
            f.half_width_for_tail(0.5 * tol)
                .max(g.half_width_for_tail(0.5 * tol)),
        )
    }

    /// Default square sampling axes for one space.
    pub fn axes(&self, space: Space, opts: &GridOptions) -> Result<(Axis, Axis), StateError> {
        self.validate()?;
        opts.validate()?;
        match (self, space) {
            (StateSpec::SincSpdc { .. }, Space::Position) => {
                let (p, _) = self.axes(Space::Momentum, opts)?;
                let x = fourier::dual_axis(&p, Unit::Length);
                Ok((x, x))
            }
            _ => {
                let (f, g) = self.profiles(space).expect("closed-form profiles exist");
                let spread = opts.extent * f.width().max(g.width());
                let tail_limited = f
                    .half_width_for_tail(0.5 * MAX_TAIL_MASS)
                    .max(g.half_width_for_tail(0.5 * MAX_TAIL_MASS));
                let mut half = spread.max(tail_limited);
                // Centered axes stop one step short of +half.
                half *= opts.points as f64 / (opts.points as f64 - 2.0);
                let ax = Axis::centered(opts.points, half, space.unit())?;
                if let StateSpec::SincSpdc { pump_width, .. } = *self {
                    // The dual position grid must still hold the pump envelope.
                    let x = fourier::dual_axis(&ax, Unit::Length);
                    let tail_mass = Profile::HermiteGauss {
                        order: 0,
                        scale: 2f64.sqrt() * pump_width,
                    }
                    .tail_mass(x.symmetric_coverage());
                    if tail_mass > MAX_TAIL_MASS {
                        return Err(StateError::GridTooNarrow { tail_mass });
                    }
                }
                Ok((ax, ax))
            }
        }
    }

    pub fn position_wavefunction(
        &self,
        opts: &GridOptions,
    ) -> Result<WavefunctionGrid, StateError> {
        let (a, b) = self.axes(Space::Position, opts)?;
        build_position_wavefunction(self, a, b)
    }

    pub fn momentum_wavefunction(
        &self,
        opts: &GridOptions,
    ) -> Result<WavefunctionGrid, StateError> {
        let (a, b) = self.axes(Space::Momentum, opts)?;
        build_momentum_wavefunction(self, a, b)
    }

    /// Noise-free position and momentum distributions on default grids.
    pub fn exact_distributions(
        &self,
        opts: &GridOptions,
    ) -> Result<(JointDistribution, JointDistribution), StateError> {
        let x = joint_distribution(&self.position_wavefunction(opts)?);
        let p = joint_distribution(&self.momentum_wavefunction(opts)?);
        Ok((x, p))
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StateSpec::HermiteGauss { n } => write!(f, "hg:{n}"),
            StateSpec::Engineered {
                sigma_plus,
                sigma_minus,
            } => write!(f, "engineered:{sigma_plus},{sigma_minus}"),
            StateSpec::SincSpdc {
                crystal_length,
                pump_wavenumber,
                pump_width,
            } => write!(f, "sinc:{crystal_length},{pump_wavenumber},{pump_width}"),
        }
    }
}

/// Parses `hg:<n>`, `engineered:<sigma_plus>,<sigma_minus>` or
/// `sinc:<crystal_length>,<pump_wavenumber>,<pump_width>`.
impl FromStr for StateSpec {
    type Err = StateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| StateError::InvalidParameter(format!("{msg} in state spec {s:?}"));
        let (family, args) = s.split_once(':').ok_or_else(|| bad("missing ':'"))?;
        let reals = |want: usize| -> Result<Vec<f64>, StateError> {
            let vals = args
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad("bad number")))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != want {
                return Err(bad(&format!("expected {want} parameters")));
            }
            Ok(vals)
        };
        let spec = match family.trim() {
            "hg" | "hermite" => StateSpec::HermiteGauss {
                n: args.trim().parse().map_err(|_| bad("bad order"))?,
            },
            "engineered" | "eng" => {
                let v = reals(2)?;
                StateSpec::Engineered {
                    sigma_plus: v[0],
                    sigma_minus: v[1],
                }
            }
            "sinc" => {
                let v = reals(3)?;
                StateSpec::SincSpdc {
                    crystal_length: v[0],
                    pump_wavenumber: v[1],
                    pump_width: v[2],
                }
            }
            _ => return Err(bad("unknown family")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Sampling density for theory grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Points per axis.
    pub points: usize,
    /// Half-extent in units of the widest one-dimensional factor's spread.
    /// Grids are widened further when needed to keep the tail mass below
    /// [`MAX_TAIL_MASS`].
    pub extent: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points: 1024,
            extent: 6.0,
        }
    }
}

impl GridOptions {
    pub fn new(points: usize, extent: f64) -> Result<Self, StateError> {
        let o = Self { points, extent };
        o.validate()?;
        Ok(o)
    }

    fn validate(&self) -> Result<(), StateError> {
        if self.points < 8 || !self.points.is_multiple_of(2) {
            return Err(StateError::InvalidParameter(format!(
                "grid points must be even and at least 8, got {}",
                self.points
            )));
        }
        positive("grid extent", self.extent)
    }
}

/// Complex amplitudes on a grid, normalized so `sum |amp|^2 da db = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionGrid {
    axis_a: Axis,
    axis_b: Axis,
    amplitude: Array2<Complex64>,
}

impl WavefunctionGrid {
    /// Normalizes `amplitude` on the grid.
    pub fn new(
        axis_a: Axis,
        axis_b: Axis,
        amplitude: Array2<Complex64>,
    ) -> Result<Self, StateError> {
        if amplitude.dim() != (axis_a.count(), axis_b.count()) {
            return Err(GridError::ShapeMismatch {
                expected: (axis_a.count(), axis_b.count()),
                got: amplitude.dim(),
            }
            .into());
        }
        let mut wf = Self {
            axis_a,
            axis_b,
            amplitude,
        };
        let norm = wf.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(GridError::AllZero.into());
        }
        let scale = 1.0 / norm.sqrt();
        wf.amplitude.mapv_inplace(|c| c * scale);
        Ok(wf)
    }

    pub fn axis_a(&self) -> &Axis {
        &self.axis_a
    }

    pub fn axis_b(&self) -> &Axis {
        &self.axis_b
    }

    pub fn amplitude(&self) -> &Array2<Complex64> {
        &self.amplitude
    }

    /// `sum |amp|^2 * step_a * step_b`.
    pub fn norm(&self) -> f64 {
        self.amplitude.iter().map(|c| c.norm_sqr()).sum::<f64>()
            * self.axis_a.step()
            * self.axis_b.step()
    }

    /// Grid approximation of the momentum amplitude on the dual axes.
    pub fn momentum_transform(&self) -> WavefunctionGrid {
        let pa = fourier::dual_axis(&self.axis_a, Unit::InverseLength);
        let pb = fourier::dual_axis(&self.axis_b, Unit::InverseLength);
        let amp = fourier::transform_2d(
            &self.amplitude,
            (&self.axis_a, &self.axis_b),
            (&pa, &pb),
            fourier::Direction::Forward,
        )
        .expect("dual axes are compatible");
        WavefunctionGrid {
            axis_a: pa,
            axis_b: pb,
            amplitude: amp,
        }
    }

    /// Inverse of [`Self::momentum_transform`] onto the given position axes.
    pub fn inverse_transform(
        &self,
        axis_a: Axis,
        axis_b: Axis,
    ) -> Result<WavefunctionGrid, StateError> {
        let amp = fourier::transform_2d(
            &self.amplitude,
            (&self.axis_a, &self.axis_b),
            (&axis_a, &axis_b),
            fourier::Direction::Inverse,
        )?;
        Ok(WavefunctionGrid {
            axis_a,
            axis_b,
            amplitude: amp,
        })
    }
}

fn check_tail(spec: &StateSpec, space: Space, a: &Axis, b: &Axis) -> Result<(), StateError> {
    let c = a.symmetric_coverage().min(b.symmetric_coverage());
    if let Some(tail) = spec.tail_mass(space, c) {
        if tail > MAX_TAIL_MASS {
            return Err(StateError::GridTooNarrow { tail_mass: tail });
        }
    }
    Ok(())
}

fn sample(spec: &StateSpec, space: Space, a: &Axis, b: &Axis) -> Array2<Complex64> {
    let pa: Vec<f64> = a.positions().collect();
    let pb: Vec<f64> = b.positions().collect();
    Array2::from_shape_fn((pa.len(), pb.len()), |(i, j)| {
        spec.amplitude(space, pa[i], pb[j])
            .expect("closed form exists for this space")
    })
}

/// Samples the position amplitude on `(axis_a, axis_b)` and normalizes it.
///
/// The sinc family is built in momentum space on the dual axes and brought
/// back with the inverse grid transform.
pub fn build_position_wavefunction(
    spec: &StateSpec,
    axis_a: Axis,
    axis_b: Axis,
) -> Result<WavefunctionGrid, StateError> {
    spec.validate()?;
    if let StateSpec::SincSpdc { .. } = spec {
        let pa = fourier::dual_axis(&axis_a, Unit::InverseLength);
        let pb = fourier::dual_axis(&axis_b, Unit::InverseLength);
        let mom = build_momentum_wavefunction(spec, pa, pb)?;
        let pos = mom.inverse_transform(axis_a, axis_b)?;
        let amp = pos.amplitude;
        return WavefunctionGrid::new(axis_a, axis_b, amp);
    }
    check_tail(spec, Space::Position, &axis_a, &axis_b)?;
    let amp = sample(spec, Space::Position, &axis_a, &axis_b);
    WavefunctionGrid::new(axis_a, axis_b, amp)
}

/// Samples the closed-form momentum amplitude on `(axis_a, axis_b)`.
pub fn build_momentum_wavefunction(
    spec: &StateSpec,
    axis_a: Axis,
    axis_b: Axis,
) -> Result<WavefunctionGrid, StateError> {
    spec.validate()?;
    check_tail(spec, Space::Momentum, &axis_a, &axis_b)?;
    let amp = sample(spec, Space::Momentum, &axis_a, &axis_b);
    WavefunctionGrid::new(axis_a, axis_b, amp)
}

/// Born-rule bin masses `|amp|^2 * step_a * step_b`, renormalized.
pub fn joint_distribution(wf: &WavefunctionGrid) -> JointDistribution {
    let w = wf.amplitude.mapv(|c| c.norm_sqr());
    crate::grid::normalize(&w, wf.axis_a, wf.axis_b).expect("normalized wavefunction has mass")
}
