//! Adaptive Dormand–Prince 5(4) integration of linear and nonlinear ODEs.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element type of an integrated state vector.
pub trait OdeScalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn abs(self) -> f64;
}

impl OdeScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl OdeScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-8,
            atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (error weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = f(t, y)` and hands the state to `observe` at every
/// requested output time (which must be nondecreasing and start at or
/// after `t0`). Steps are clamped to land exactly on output times.
pub fn integrate<T, F, O>(
    mut f: F,
    t0: f64,
    y0: &[T],
    outputs: &[f64],
    tol: Tolerances,
    mut observe: O,
) -> Result<OdeStats>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(usize, f64, &[T]) -> Result<()>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut stats = OdeStats::default();
    let z = T::zero();
    let (mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![z; n],
        vec![z; n],
        vec![z; n],
        vec![z; n],
        vec![z; n],
        vec![z; n],
        vec![z; n],
    );
    let mut tmp = vec![z; n];
    let mut ynew = vec![z; n];

    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let span = outputs.last().map(|&te| te - t0).unwrap_or(0.0).abs();
    let mut h = initial_step(&y, &k1, tol, span);

    for (idx, &t_out) in outputs.iter().enumerate() {
        if t_out < t {
            return Err(Error::param("outputs", "output times must be nondecreasing"));
        }
        while t < t_out {
            let remaining = t_out - t;
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            if h_try <= 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepUnderflow { t, h: h_try });
            }

            for i in 0..n {
                tmp[i] = y[i] + k1[i] * (h_try * A21);
            }
            f(t + h_try / 5.0, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h_try;
            }
            f(t + 3.0 * h_try / 10.0, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h_try;
            }
            f(t + 4.0 * h_try / 5.0, &tmp, &mut k4);
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h_try;
            }
            f(t + 8.0 * h_try / 9.0, &tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h_try;
            }
            f(t + h_try, &tmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i]
                    + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h_try;
            }
            f(t + h_try, &ynew, &mut k7);
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                    * h_try;
                let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
                let r = e.abs() / sc;
                err += r * r;
            }
            let err = (err / n.max(1) as f64).sqrt();

            if !err.is_finite() {
                stats.rejected += 1;
                h = h_try * 0.1;
                continue;
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { t_out } else { t + h_try };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // a clamped final step says nothing about the natural step
                if !last || fac < 1.0 {
                    h = h_try * fac;
                }
            } else {
                stats.rejected += 1;
                h = h_try * (0.9 * err.powf(-0.2)).max(0.2);
            }
        }
        observe(idx, t, &y)?;
    }
    Ok(stats)
}

fn initial_step<T: OdeScalar>(y: &[T], dy: &[T], tol: Tolerances, span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(dy) {
        let sc = tol.atol + tol.rtol * yi.abs();
        d0 += (yi.abs() / sc).powi(2);
        d1 += (fi.abs() / sc).powi(2);
    }
    let n = y.len().max(1) as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    if span > 0.0 {
        h.min(span)
    } else {
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let outs: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let mut got = Vec::new();
        integrate(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = -1.3 * y[0],
            0.0,
            &[2.0],
            &outs,
            Tolerances {
                rtol: 1e-10,
                atol: 1e-14,
            },
            |_, t, y| {
                got.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        for (t, v) in got {
            assert!((v - 2.0 * (-1.3 * t).exp()).abs() < 1e-9 * 2.0);
        }
    }

    #[test]
    fn complex_rotation() {
        let w = 40.0;
        let outs = [0.0, 0.3, 1.0, 2.5];
        let mut got = Vec::new();
        integrate(
            |_, y: &[Complex64], dy: &mut [Complex64]| dy[0] = Complex64::new(-0.1, w) * y[0],
            0.0,
            &[Complex64::new(1.0, 0.0)],
            &outs,
            Tolerances::default(),
            |_, t, y| {
                got.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        for (t, v) in got {
            let exact = (Complex64::new(-0.1, w) * t).exp();
            assert!((v - exact).norm() < 1e-6, "t={t} err={}", (v - exact).norm());
        }
    }
}
