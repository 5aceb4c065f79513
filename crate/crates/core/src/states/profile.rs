//! One-dimensional factors of the separable two-photon amplitudes.
//!
//! Every family factorizes as `f(a + b) * g(a - b)` in both position and
//! momentum space (the momentum side of the sinc family included). The
//! profiles here are only used for grid sizing and tail-mass estimates;
//! amplitudes themselves are evaluated from the closed forms in the parent
//! module.

use std::sync::OnceLock;

use super::hermite;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Profile {
    /// `H_order(t / scale) * exp(-(t / scale)^2 / 2)`.
    HermiteGauss { order: u32, scale: f64 },
    /// `sinc(a t^2)` with `sinc(x) = sin(x) / x`.
    Sinc { a: f64 },
}

impl Profile {
    /// Spread of `|f|^2` used for grid sizing: the standard deviation for
    /// Hermite-Gauss factors, the first zero of the sinc for the sinc factor.
    pub(crate) fn width(&self) -> f64 {
        match *self {
            Profile::HermiteGauss { order, scale } => scale * (order as f64 + 0.5).sqrt(),
            Profile::Sinc { a } => (std::f64::consts::PI / a).sqrt(),
        }
    }

    /// Fraction of `|f|^2` mass outside `[-c, c]`.
    pub(crate) fn tail_mass(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 1.0;
        }
        match *self {
            Profile::HermiteGauss { order, scale } => hermite_tail(order, c / scale),
            Profile::Sinc { a } => sinc_tail(c * a.sqrt()),
        }
    }

    /// Smallest half-width whose tail mass is at most `tol` (to bisection precision).
    pub(crate) fn half_width_for_tail(&self, tol: f64) -> f64 {
        let mut hi = self.width().max(f64::MIN_POSITIVE);
        while self.tail_mass(hi) > tol {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn hermite_tail(order: u32, y0: f64) -> f64 {
    let density = |y: f64| {
        let h = hermite(order, y);
        h * h * (-y * y).exp()
    };
    // Beyond this the integrand is below e^-100 relative to its peak.
    let upper = (2.0 * order as f64 + 1.0).sqrt() + 12.0;
    if y0 >= upper {
        return 0.0;
    }
    let total = simpson(density, 0.0, upper, 8000);
    let tail = simpson(density, y0, upper, 8000);
    (tail / total).clamp(0.0, 1.0)
}

fn sinc_sq_chirp(t: f64) -> f64 {
    let x = t * t;
    if x < 1e-6 {
        let s = 1.0 - x * x / 6.0;
        s * s
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// Numerical range of the sinc integral; beyond it `sin^2` averages to 1/2.
const SINC_CUTOFF: f64 = 40.0;

fn sinc_asymptotic_tail(t: f64) -> f64 {
    // Two-sided integral of (1/2) t^-4 beyond t.
    1.0 / (3.0 * t * t * t)
}

fn sinc_total() -> f64 {
    static TOTAL: OnceLock<f64> = OnceLock::new();
    *TOTAL.get_or_init(|| {
        2.0 * simpson(sinc_sq_chirp, 0.0, SINC_CUTOFF, 400_000) + sinc_asymptotic_tail(SINC_CUTOFF)
    })
}

fn sinc_tail(t0: f64) -> f64 {
    let tail = if t0 >= SINC_CUTOFF {
        sinc_asymptotic_tail(t0)
    } else {
        let steps = ((SINC_CUTOFF - t0) * 10_000.0) as usize + 2;
        2.0 * simpson(sinc_sq_chirp, t0, SINC_CUTOFF, steps) + sinc_asymptotic_tail(SINC_CUTOFF)
    };
    (tail / sinc_total()).clamp(0.0, 1.0)
}
