//! Dormand–Prince 5(4) with PI step-size control and 4th-order dense output,
//! following the classic `DOPRI5` code of Hairer and Wanner.

use std::ops::ControlFlow;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    /// Largest step in the solver's time unit.
    pub max_step: f64,
    pub max_steps: usize,
}

/// Interpolant over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        std::array::from_fn(|i| r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i]))))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Failure {
    NonFinite { t: f64 },
    StepUnderflow { t: f64, h: f64 },
    TooManySteps { t: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// After each accepted step `project` may adjust the new state in place and
/// `observe` sees the dense interpolant and the projected state; returning
/// `Break` ends the integration early. Returns the final time and state.
#[allow(clippy::too_many_arguments)]
pub fn integrate<const N: usize, F, P, O>(
    mut f: F,
    mut project: P,
    mut observe: O,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    stats: &mut Stats,
) -> Result<(f64, [f64; N]), Failure>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    P: FnMut(&mut [f64; N]),
    O: FnMut(&DenseStep<N>, &[f64; N]) -> ControlFlow<()>,
{
    let span = t_end - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    if !all_finite(&k1) {
        return Err(Failure::NonFinite { t });
    }
    let mut h = initial_step(&mut f, t, &y, &k1, tol, span, stats).min(tol.max_step);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let combine = |y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64| -> [f64; N] {
        std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
    };

    while t < t_end {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Failure::TooManySteps { t });
        }
        if 0.1 * h.abs() <= t.abs() * f64::EPSILON {
            return Err(Failure::StepUnderflow { t, h });
        }
        if t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        let k2 = f(t + C2 * h, &combine(&y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &combine(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &combine(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(
            t + C5 * h,
            &combine(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let y6 = combine(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h);
        let k6 = f(t + h, &y6);
        let y1 = combine(&y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let k7 = f(t + h, &y1);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = tol.abs + tol.rel * y[i].abs().max(y1[i].abs());
            err += (e / sk) * (e / sk);
        }
        err = (err / N as f64).sqrt();
        if !err.is_finite() {
            if !all_finite(&y1) || !all_finite(&k7) {
                // shrink hard; a genuinely singular field is reported by underflow
                h *= 0.1;
                stats.rejected += 1;
                last_rejected = true;
                if h.abs() < 1e-300 {
                    return Err(Failure::NonFinite { t });
                }
                continue;
            }
            err = f64::MAX;
        }

        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err.max(1e-4);
            stats.accepted += 1;

            let rcont5: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
            let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - r2[i]);
            let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
            let dense = DenseStep {
                t0: t,
                h,
                rcont: [y, r2, r3, r4, rcont5],
            };

            let mut y_next = y1;
            project(&mut y_next);
            t += h;
            y = y_next;
            k1 = k7;
            if observe(&dense, &y).is_break() {
                return Ok((t, y));
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(tol.max_step);
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            stats.rejected += 1;
            last_rejected = true;
        }
    }
    Ok((t, y))
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Starting step from Hairer's `hinit`.
fn initial_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    tol: &Tolerances,
    span: f64,
    stats: &mut Stats,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let scale = |i: usize| tol.abs + tol.rel * y[i].abs();
    let norm = |v: &[f64; N]| -> f64 {
        ((0..N).map(|i| (v[i] / scale(i)).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let dnf = norm(k1);
    let dny = norm(y);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(tol.max_step).min(span.abs());
    let y1: [f64; N] = std::array::from_fn(|i| y[i] + h * k1[i]);
    let k2 = f(t + h, &y1);
    stats.evaluations += 1;
    let diff: [f64; N] = std::array::from_fn(|i| k2[i] - k1[i]);
    let der2 = norm(&diff) / h;
    let der12 = dnf.max(der2);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(tol.max_step).min(span.abs())
}
