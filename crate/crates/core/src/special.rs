//! Bessel functions of the first kind and the sinc-type kernels that the
//! shape functions are built from.
//!
//! `J0`, `J1` and `J2` use the power series for `|x| < 12` and the Hankel
//! asymptotic expansion beyond. At the crossover the series loses about
//! three digits to cancellation and the asymptotic remainder is ~1e-11, so
//! both branches stay well inside 1e-10 absolute.

use crate::error::{Error, Result};

/// Largest accepted argument for the checked Bessel functions.
pub const BESSEL_MAX_ARG: f64 = 1e4;

const SERIES_LIMIT: f64 = 12.0;

/// `J_n(x)` by its power series. Accurate for `|x| < 12`.
fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half.powi(n as i32);
    for j in 1..=n {
        term /= j as f64;
    }
    let mut sum = term;
    for j in 1..80 {
        term *= q / (j as f64 * (j + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel expansion for `J_0` and `J_1`, `x >= 12`.
fn asymptotic(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60u32 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() > last || a.abs() < 1e-17 {
            break;
        }
        last = a.abs();
        // P collects even orders, Q odd ones, each with alternating sign.
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
    }
    let phase = (0.5 * nu as f64 + 0.25) * std::f64::consts::PI;
    let (s, c) = x.sin_cos();
    let (sp, cp) = phase.sin_cos();
    let cos_chi = c * cp + s * sp;
    let sin_chi = s * cp - c * sp;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

pub(crate) fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < SERIES_LIMIT {
        series(0, ax)
    } else {
        asymptotic(0, ax)
    }
}

pub(crate) fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        series(1, ax)
    } else {
        asymptotic(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn check(x: f64) -> Result<()> {
    if x.is_finite() && x.abs() <= BESSEL_MAX_ARG {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            x,
            limit: BESSEL_MAX_ARG,
        })
    }
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> Result<f64> {
    check(x)?;
    Ok(j0(x))
}

/// Bessel function of the first kind, order one. Odd in `x`.
pub fn bessel_j1(x: f64) -> Result<f64> {
    check(x)?;
    Ok(j1(x))
}

/// `sin(x)/x` with the removable singularity filled in.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() / x
    }
}

/// Derivative of [`sinc`].
#[inline]
pub fn sinc_prime(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        -x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)))
    } else {
        (x.cos() - x.sin() / x) / x
    }
}

/// `sinc` and its derivative from a precomputed `(sin x, cos x)`.
#[inline]
pub(crate) fn sinc_pair(x: f64, sin: f64, cos: f64) -> (f64, f64) {
    if x.abs() < 0.1 {
        (sinc(x), sinc_prime(x))
    } else {
        let s = sin / x;
        (s, (cos - s) / x)
    }
}

/// `J1(2y)/y`, the disk shape kernel. Equals 1 at `y = 0`.
pub fn jinc(y: f64) -> f64 {
    let ay = y.abs();
    if 2.0 * ay < SERIES_LIMIT {
        // Σ (-1)^j y^{2j} / (j! (j+1)!)
        let q = -ay * ay;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..80 {
            term *= q / (j as f64 * (j + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        j1(2.0 * ay) / ay
    }
}

/// `2 J2(2y) / y²`, so that `d jinc/dy = -y · jinc_slope(y)`. Equals 1 at 0.
pub fn jinc_slope(y: f64) -> f64 {
    let ay = y.abs();
    if 2.0 * ay < SERIES_LIMIT {
        // 2 Σ (-1)^j y^{2j} / (j! (j+2)!)
        let q = -ay * ay;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..80 {
            term *= q / (j as f64 * (j + 2) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        let x = 2.0 * ay;
        let j2 = 2.0 * j1(x) / x - j0(x);
        2.0 * j2 / (ay * ay)
    }
}
