//! Continuous Fourier transforms approximated by the FFT on uniform grids.
//!
//! Convention (`[X, P] = i`): `F(p) = (2 pi)^(-1/2) ∫ f(x) exp(-i p x) dx` per
//! dimension. A position axis with `n` points and step `dx` pairs with a
//! momentum axis of step `2 pi / (n dx)`; the sum of `|f|^2 * step` is
//! preserved exactly.

use std::f64::consts::PI;

use ndarray::{Array2, Axis as NdAxis};
use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::grid::{Axis, Unit};

use super::StateError;

/// Momentum axis dual to `x`: same point count, step `2 pi / (n dx)`, offset `-(n/2) dp`.
pub fn dual_axis(x: &Axis, unit: Unit) -> Axis {
    let n = x.count();
    let dp = 2.0 * PI / (n as f64 * x.step());
    Axis::new(-((n / 2) as f64) * dp, dp, n, unit).expect("dual of a valid axis is valid")
}

fn check_dual(from: &Axis, to: &Axis) -> Result<(), StateError> {
    let product = from.step() * to.step() * from.count() as f64;
    if from.count() != to.count() || ((product - 2.0 * PI) / (2.0 * PI)).abs() > 1e-9 {
        return Err(StateError::IncompatibleAxes);
    }
    Ok(())
}

/// Sign of the exponent: `Forward` is `exp(-i p x)`, `Inverse` is `exp(+i p x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

struct Kernel {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
}

impl Kernel {
    fn new(from: &Axis, to: &Axis, direction: Direction, planner: &mut FftPlanner<f64>) -> Self {
        let n = from.count();
        let (sign, fft_dir) = match direction {
            Direction::Forward => (-1.0, FftDirection::Forward),
            Direction::Inverse => (1.0, FftDirection::Inverse),
        };
        let (x0, dx) = (from.offset(), from.step());
        let (y0, dy) = (to.offset(), to.step());
        // y_k x_j = y0 x0 + y0 j dx + k dy x0 + 2 pi j k / n
        let pre = (0..n)
            .map(|j| Complex64::from_polar(1.0, sign * y0 * j as f64 * dx))
            .collect();
        let scale = dx / (2.0 * PI).sqrt();
        let post = (0..n)
            .map(|k| Complex64::from_polar(scale, sign * (y0 * x0 + k as f64 * dy * x0)))
            .collect();
        Self {
            fft: planner.plan_fft(n, fft_dir),
            pre,
            post,
        }
    }

    fn apply(&self, buf: &mut [Complex64]) {
        for (v, w) in buf.iter_mut().zip(&self.pre) {
            *v *= w;
        }
        self.fft.process(buf);
        for (v, w) in buf.iter_mut().zip(&self.post) {
            *v *= w;
        }
    }
}

/// Transforms samples on `from` into samples on the dual axis `to`.
pub fn transform_1d(
    data: &[Complex64],
    from: &Axis,
    to: &Axis,
    direction: Direction,
) -> Result<Vec<Complex64>, StateError> {
    check_dual(from, to)?;
    if data.len() != from.count() {
        return Err(StateError::IncompatibleAxes);
    }
    let mut planner = FftPlanner::new();
    let kernel = Kernel::new(from, to, direction, &mut planner);
    let mut buf = data.to_vec();
    kernel.apply(&mut buf);
    Ok(buf)
}

/// Separable 2D transform: rows run over `from_a`, columns over `from_b`.
pub fn transform_2d(
    data: &Array2<Complex64>,
    from: (&Axis, &Axis),
    to: (&Axis, &Axis),
    direction: Direction,
) -> Result<Array2<Complex64>, StateError> {
    check_dual(from.0, to.0)?;
    check_dual(from.1, to.1)?;
    if data.dim() != (from.0.count(), from.1.count()) {
        return Err(StateError::IncompatibleAxes);
    }
    let mut planner = FftPlanner::new();
    let ka = Kernel::new(from.0, to.0, direction, &mut planner);
    let kb = Kernel::new(from.1, to.1, direction, &mut planner);
    let mut out = data.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); from.0.count().max(from.1.count())];
    for (lane_axis, kernel) in [(NdAxis(1), &kb), (NdAxis(0), &ka)] {
        for mut lane in out.lanes_mut(lane_axis) {
            let buf = &mut buf[..lane.len()];
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            kernel.apply(buf);
            for (v, b) in lane.iter_mut().zip(buf.iter()) {
                *v = *b;
            }
        }
    }
    Ok(out)
}
