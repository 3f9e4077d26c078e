//! Output power spectrum P(ω) = κμ ∫ g¹(t) e^{−iωt} dt.
//!
//! The integral runs over the whole real line, with g¹(−t) = g¹(t)*, so
//! that P(ω̄) = 4κμτ_coh and ∫P dω/2π = κμ.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::coherence::{self, CentralFrequency, CoherenceTrace};
use crate::error::{Error, Result};
use crate::liouvillian::{LaserParams, Model};

/// Sampled spectrum with its normalization record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Angular frequencies in units of κ, ascending.
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    /// ∫P dω/2π by the rectangle rule on the grid.
    pub total_flux: f64,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// κμ, the flux the spectrum must integrate to.
    pub expected_flux: f64,
    /// |total_flux − κμ| / κμ.
    pub flux_residual: f64,
    pub resolution: f64,
    pub nyquist: f64,
    pub omega_bar: f64,
    /// Spectral mass within five bins of the Nyquist edges, as a fraction.
    pub aliasing_fraction: f64,
    /// Most negative value relative to the maximum (0 if none).
    pub min_relative: f64,
    pub sample_step: f64,
}

impl Spectrum {
    /// Value at the bin nearest `omega`.
    pub fn value_at(&self, omega: f64) -> f64 {
        let k = self
            .frequencies
            .partition_point(|&w| w < omega)
            .min(self.frequencies.len() - 1);
        let k = if k > 0 && (omega - self.frequencies[k - 1]).abs() < (self.frequencies[k] - omega).abs() {
            k - 1
        } else {
            k
        };
        self.values[k]
    }

    pub fn peak(&self) -> (f64, f64) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        (self.frequencies[k], v)
    }

    /// Σ ω P / Σ P.
    pub fn centroid(&self) -> f64 {
        let s: f64 = self.values.iter().sum();
        self.values
            .iter()
            .zip(&self.frequencies)
            .map(|(p, w)| p * w)
            .sum::<f64>()
            / s
    }

    /// Restricts to `lo ≤ ω ≤ hi`.
    pub fn restricted(&self, lo: f64, hi: f64) -> Spectrum {
        let (f, v): (Vec<f64>, Vec<f64>) = self
            .frequencies
            .iter()
            .zip(&self.values)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(w, p)| (*w, *p))
            .unzip();
        Spectrum {
            frequencies: f,
            values: v,
            ..self.clone()
        }
    }
}

/// Peak spectral intensity 4κμτ_coh.
pub fn peak_intensity(tau_coh: f64, p: &LaserParams) -> f64 {
    4.0 * p.kappa * p.mu * tau_coh
}

/// Natural cubic spline through complex samples on an increasing grid.
struct Spline {
    x: Vec<f64>,
    y: Vec<Complex64>,
    m: Vec<Complex64>,
}

impl Spline {
    fn new(x: &[f64], y: &[Complex64]) -> Spline {
        let n = x.len();
        let mut m = vec![Complex64::new(0.0, 0.0); n];
        if n > 2 {
            // tridiagonal system for second derivatives, natural ends
            let mut c = vec![0.0; n];
            let mut d = vec![Complex64::new(0.0, 0.0); n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (r - d[i - 1] * a) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - m[i + 1] * c[i];
            }
        }
        Spline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn eval(&self, t: f64) -> Complex64 {
        let n = self.x.len();
        let k = self.x.partition_point(|&v| v <= t).clamp(1, n - 1);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        self.y[k - 1] * a
            + self.y[k] * b
            + (self.m[k - 1] * (a * a * a - a) + self.m[k] * (b * b * b - b)) * (h * h / 6.0)
    }
}

fn is_uniform(t: &[f64]) -> bool {
    let n = t.len();
    if n < 3 {
        return false;
    }
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    t.iter()
        .enumerate()
        .all(|(k, &v)| (v - t[0] - k as f64 * dt).abs() <= 1e-9 * dt.max(v.abs()))
}

fn fft(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Transforms a coherence trace into the output spectrum.
///
/// The trace is demodulated by its central frequency (zero if absent),
/// resampled onto a uniform grid by cubic interpolation unless already
/// uniform, extended by Hermitian symmetry, zero padded until the bin
/// width is at most ℓ/20, and transformed without windowing.
pub fn power_spectrum(trace: &CoherenceTrace, p: &LaserParams) -> Result<Spectrum> {
    let n = trace.times.len();
    if n < 3 || trace.times[0] != 0.0 {
        return Err(Error::Coverage("trace must start at t = 0 with at least three samples".into()));
    }
    let tau = coherence::coherence_time_quadrature(trace)?;
    let ell = 1.0 / tau;
    let omega_bar = trace.omega_bar.unwrap_or(0.0);
    let t_end = trace.times[n - 1];
    let demod: Vec<Complex64> = trace
        .times
        .iter()
        .zip(&trace.values)
        .map(|(&t, &g)| g * Complex64::new(0.0, -omega_bar * t).exp())
        .collect();

    let (dt, samples): (f64, Vec<Complex64>) = if is_uniform(&trace.times) {
        ((t_end) / (n - 1) as f64, demod)
    } else {
        let dt = 0.02 / ell;
        let m = (t_end / dt).floor() as usize + 1;
        let spline = Spline::new(&trace.times, &demod);
        (dt, (0..m).map(|k| spline.eval(k as f64 * dt)).collect())
    };

    let m = samples.len();
    let min_len = (2.0 * std::f64::consts::PI / (dt * ell / 20.0)).ceil() as usize;
    let size = (2 * m).max(min_len).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    buf[0] = samples[0];
    for j in 1..m.min(size / 2) {
        buf[j] = samples[j];
        buf[size - j] = samples[j].conj();
    }
    fft(size).process(&mut buf);

    let dw = 2.0 * std::f64::consts::PI / (size as f64 * dt);
    let scale = p.kappa * p.mu * dt;
    let half = size / 2;
    let mut frequencies = Vec::with_capacity(size);
    let mut values = Vec::with_capacity(size);
    // fftshift: bins −N/2 .. N/2−1
    for i in 0..size {
        let k = (i + half) % size;
        let signed = i as f64 - half as f64;
        frequencies.push(omega_bar + signed * dw);
        values.push(buf[k].re * scale);
    }

    let abs_total: f64 = values.iter().map(|v| v.abs()).sum();
    let edge: f64 = values[..5].iter().chain(&values[size - 5..]).map(|v| v.abs()).sum();
    let aliasing_fraction = edge / abs_total;
    if aliasing_fraction > 1e-4 {
        return Err(Error::Aliasing {
            fraction: aliasing_fraction,
        });
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let total_flux = values.iter().sum::<f64>() * dw / (2.0 * std::f64::consts::PI);
    let expected = p.kappa * p.mu;
    Ok(Spectrum {
        frequencies,
        values,
        total_flux,
        normalization: Normalization {
            expected_flux: expected,
            flux_residual: (total_flux - expected).abs() / expected,
            resolution: dw,
            nyquist: std::f64::consts::PI / dt,
            omega_bar,
            aliasing_fraction,
            min_relative: if min < 0.0 { min / max } else { 0.0 },
            sample_step: dt,
        },
    })
}

/// Spectrum of a model together with the trace and central frequency used.
pub fn model_spectrum(model: &Model) -> Result<(Spectrum, CoherenceTrace, CentralFrequency)> {
    let cf = coherence::central_frequency(
        &model.generator,
        &model.rho_ss,
        coherence::DEFAULT_MAX_ITERS,
        model.revival_regime(),
    )?;
    let mut trace = coherence::model_g1_trace(model)?;
    trace.check_invariants()?;
    trace.omega_bar = Some(cf.omega_bar);
    let s = power_spectrum(&trace, &model.params)?;
    Ok((s, trace, cf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineShape {
    Lorentzian,
    Gaussian,
}

impl LineShape {
    fn eval(&self, q: &Vector3<f64>, w: f64) -> f64 {
        let (a, c, s) = (q[0], q[1], q[2]);
        let x = (w - c) / s;
        match self {
            LineShape::Lorentzian => a / (1.0 + x * x),
            LineShape::Gaussian => a * (-0.5 * x * x).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub shape: LineShape,
    pub height: f64,
    pub center: f64,
    /// Half width at half maximum for a Lorentzian, standard deviation for
    /// a Gaussian.
    pub width: f64,
    /// max |P − fit| / peak over the fit window.
    pub residual: f64,
}

/// Least-squares fit of a line shape over `|ω − peak| ≤ half_window`
/// by Levenberg–Marquardt.
pub fn fit_line(s: &Spectrum, shape: LineShape, half_window: f64) -> Result<LineFit> {
    let (w0, peak) = s.peak();
    let pts: Vec<(f64, f64)> = s
        .frequencies
        .iter()
        .zip(&s.values)
        .filter(|(w, _)| (**w - w0).abs() <= half_window)
        .map(|(w, v)| (*w, *v))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Coverage("fit window holds fewer than five bins".into()));
    }
    // half width at half maximum from the data
    let hwhm = pts
        .iter()
        .filter(|(_, v)| *v >= 0.5 * peak)
        .map(|(w, _)| (w - w0).abs())
        .fold(0.0, f64::max)
        .max(s.normalization.resolution);
    let width0 = match shape {
        LineShape::Lorentzian => hwhm,
        LineShape::Gaussian => hwhm / (2.0 * 2f64.ln()).sqrt(),
    };
    let mut q = Vector3::new(peak, w0, width0);
    let cost = |q: &Vector3<f64>| -> f64 {
        pts.iter()
            .map(|(w, v)| (shape.eval(q, *w) - v).powi(2))
            .sum()
    };
    let mut lambda = 1e-3;
    let mut c = cost(&q);
    for _ in 0..200 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (w, v) in &pts {
            let f = shape.eval(&q, *w);
            let mut j = Vector3::zeros();
            for i in 0..3 {
                let h = 1e-7 * q[i].abs().max(1e-12);
                let mut qp = q;
                qp[i] += h;
                j[i] = (shape.eval(&qp, *w) - f) / h;
            }
            jtj += j * j.transpose();
            jtr += j * (v - f);
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] *= 1.0 + lambda;
            }
            let step = match a.lu().solve(&jtr) {
                Some(s) => s,
                None => break,
            };
            let trial = q + step;
            let ct = cost(&trial);
            if ct < c && trial[2] > 0.0 {
                let rel = (c - ct) / c.max(1e-300);
                q = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let residual = pts
        .iter()
        .map(|(w, v)| (shape.eval(&q, *w) - v).abs())
        .fold(0.0, f64::max)
        / peak;
    Ok(LineFit {
        shape,
        height: q[0],
        center: q[1],
        width: q[2].abs(),
        residual,
    })
}
