//! Closed-form phase-diffusion results used as oracles for the numerics.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::{effective_chi, FeedbackParams, LaserParams};
use crate::ode::{self, Tolerances};
use crate::quadrature::{self, QuadOptions};

/// Phase statistics of the linearized Q-function dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMoments {
    pub t: f64,
    pub mean_phase: f64,
    pub phase_variance: f64,
    pub number_phase_covariance: f64,
}

fn residual_c(p: &LaserParams, f: &FeedbackParams) -> f64 {
    p.c - f.applied_f()
}

/// Closed-form phase moments (valid for μ ≫ 1).
pub fn ou_phase_moments(p: &LaserParams, f: &FeedbackParams, t: f64) -> PhaseMoments {
    let k = p.kappa;
    let d = residual_c(p, f);
    let x = (-k * t).exp_m1() + k * t; // e^{−κt} + κt − 1 without cancellation
    PhaseMoments {
        t,
        mean_phase: -2.0 * p.mu * d * t,
        phase_variance: 8.0 * p.mu * d * d / (k * k) * x
            + (k / (2.0 * p.mu) + f.dephasing_rate()) * t,
        number_phase_covariance: 2.0 * p.mu * d / k * (-k * t).exp_m1(),
    }
}

/// Where the number-dependent coefficients of the Fokker–Planck equation
/// are frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linearization {
    /// n → μ + 1, the Q-function mean.
    Exact,
    /// Large-μ simplification n → μ in the phase drift and phase diffusion,
    /// matching the closed forms term by term.
    LargeMu,
}

/// First and second moments of the linearized process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuMoments {
    pub phase: PhaseMoments,
    pub number_mean: f64,
    pub number_variance: f64,
}

/// Integrates the moment equations of the Ornstein–Uhlenbeck process with
/// drift A = (κ(μ+1−n), (3−2n)(C−F)) and constant diffusion B.
pub fn ou_moment_integrator(
    p: &LaserParams,
    f: &FeedbackParams,
    t_grid: &[f64],
    lin: Linearization,
) -> Result<Vec<OuMoments>> {
    let k = p.kappa;
    let mu = p.mu;
    let d = residual_c(p, f);
    let n0 = mu + 1.0;
    let b11 = 2.0 * k * (mu + n0);
    let b12 = 2.0 * n0 * d;
    let (b22, phase_offset) = match lin {
        Linearization::Exact => (k / (2.0 * n0) + f.dephasing_rate(), 3.0),
        // (3 − 2n) at n = μ + 1 is 1 − 2μ; the large-μ form keeps −2μ
        Linearization::LargeMu => (k / (2.0 * mu) + f.dephasing_rate(), 2.0),
    };
    // y = (n̄, φ̄, V_n, V_φ, C_nφ)
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = k * (mu + 1.0 - y[0]);
        dy[1] = (phase_offset - 2.0 * y[0]) * d;
        dy[2] = -2.0 * k * y[2] + b11;
        dy[3] = -4.0 * d * y[4] + b22;
        dy[4] = -k * y[4] - 2.0 * d * y[2] + b12;
    };
    let y0 = [n0, 0.0, 2.0 * mu + 1.0, 0.0, 0.0];
    let mut out = Vec::with_capacity(t_grid.len());
    ode::integrate(
        rhs,
        0.0,
        &y0,
        t_grid,
        Tolerances {
            rtol: 1e-12,
            atol: 1e-16,
        },
        |_, t, y| {
            out.push(OuMoments {
                phase: PhaseMoments {
                    t,
                    mean_phase: y[1],
                    phase_variance: y[3],
                    number_phase_covariance: y[4],
                },
                number_mean: y[0],
                number_variance: y[2],
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// |g¹(t)| = exp(−V_φ/2) with the closed-form phase variance. Without
/// feedback this is exp[−χ²(e^{−κt}+κt−1)/4μ]·exp[−κt/4μ].
pub fn g1_magnitude(p: &LaserParams, f: &FeedbackParams, t: f64) -> f64 {
    (-0.5 * ou_phase_moments(p, f, t).phase_variance).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Standard,
    Quadratic,
    Linear,
    Revival,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Standard => "standard",
            Regime::Quadratic => "quadratic",
            Regime::Linear => "linear",
            Regime::Revival => "revival",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub chi: f64,
    pub regime: Regime,
    pub linewidth: f64,
    /// χ where the Lorentzian and Gaussian branches meet, √(8μ/π).
    pub gaussian_crossover: f64,
    /// χ where revivals become significant, 4πμ².
    pub revival_onset: f64,
}

/// κ(1+χ²)/2μ.
pub fn linewidth_lorentzian(p: &LaserParams) -> f64 {
    p.kappa * (1.0 + p.chi * p.chi) / (2.0 * p.mu)
}

/// 2κχ/√(2πμ).
pub fn linewidth_gaussian(p: &LaserParams) -> f64 {
    2.0 * p.kappa * p.chi / (2.0 * PI * p.mu).sqrt()
}

/// Linewidth without feedback across the four regimes.
pub fn linewidth_regimes(p: &LaserParams) -> RegimeReport {
    let cross = (8.0 * p.mu / PI).sqrt();
    let onset = 4.0 * PI * p.mu * p.mu;
    let (regime, linewidth) = if p.chi >= onset {
        (Regime::Revival, linewidth_revival(p).linewidth)
    } else if p.chi >= cross {
        (Regime::Linear, linewidth_gaussian(p))
    } else if p.chi >= 1.0 {
        (Regime::Quadratic, linewidth_lorentzian(p))
    } else {
        (Regime::Standard, linewidth_lorentzian(p))
    };
    RegimeReport {
        chi: p.chi,
        regime,
        linewidth,
        gaussian_crossover: cross,
        revival_onset: onset,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalLinewidth {
    /// 4κ√(2π)μ^{3/2}.
    pub linewidth: f64,
    /// Linewidth from the finite geometric series over revival peaks.
    pub series_linewidth: f64,
    /// Expected number of significant revivals, t_Q/t_r = C/(πκμ).
    pub revival_count: f64,
}

/// Plateau linewidth in the revival regime with its derivation path.
pub fn linewidth_revival(p: &LaserParams) -> RevivalLinewidth {
    let t_q = 1.0 / (p.kappa * p.mu);
    let t_r = PI / p.c;
    let r = (-2.0 * t_r / t_q).exp();
    let peak = (2.0 * PI * p.mu).sqrt() / (p.kappa * p.chi);
    let two_tau = 2.0 * peak * (1.0 / (1.0 - r) - 0.5);
    RevivalLinewidth {
        linewidth: 4.0 * p.kappa * (2.0 * PI).sqrt() * p.mu.powf(1.5),
        series_linewidth: 2.0 / two_tau,
        revival_count: t_q / t_r,
    }
}

/// (κ/2μ)(1 + χ/√η) under optimal feedback.
pub fn linewidth_feedback(p: &LaserParams, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::param("eta", format!("must lie in (0, 1], got {eta}")));
    }
    Ok(p.kappa / (2.0 * p.mu) * (1.0 + p.chi / eta.sqrt()))
}

/// Analytic linewidth for any setting: the no-feedback regimes evaluated at
/// the residual nonlinearity χ_eff = 4μ|C−F|/κ, plus the number-dephasing
/// rate M + F²/ηM. Reduces to the feedback formula when F = √η·M = C.
pub fn linewidth_analytic(p: &LaserParams, f: &FeedbackParams) -> f64 {
    let q = LaserParams {
        chi: effective_chi(p, f),
        c: (p.c - f.applied_f()).abs(),
        ..*p
    };
    linewidth_regimes(&q).linewidth + f.dephasing_rate()
}

/// Estimate used to size time grids.
pub fn linewidth_estimate(p: &LaserParams, f: &FeedbackParams) -> f64 {
    linewidth_analytic(p, f)
}

/// Rotation frequency of g¹, 2μ(C − F).
pub fn mean_rotation(p: &LaserParams, f: &FeedbackParams) -> f64 {
    2.0 * p.mu * residual_c(p, f)
}

/// Collisions-only coherence exp[−μ(1 − e^{2iCt})].
pub fn g1_collisions_only(mu: f64, c: f64, t: f64) -> Complex64 {
    let e = Complex64::new(0.0, 2.0 * c * t).exp();
    (-(Complex64::new(1.0, 0.0) - e) * mu).exp()
}

/// Strong-interaction coherence including gain and loss, returning the
/// complex value and the separately stated magnitude.
pub fn g1_revival_full(p: &LaserParams, t: f64) -> (Complex64, f64) {
    let k = p.kappa;
    let c = p.c;
    let mu = p.mu;
    let ratio = k / c;
    let denom = 1.0 + ratio * ratio;
    let slow = (-k * t / (4.0 * mu)).exp();
    let e = Complex64::new(-2.0 * k * t, 2.0 * c * t).exp();
    let pref = Complex64::new(mu, -mu * ratio) / denom;
    let g = Complex64::new(0.0, c * t).exp() * slow * (-pref * (Complex64::new(1.0, 0.0) - e)).exp();
    let decay = (-2.0 * k * t).exp();
    let arg = 1.0 - decay * (2.0 * c * t).cos() - ratio * decay * (2.0 * c * t).sin();
    let mag = slow * (-mu / denom * arg).exp();
    (g, mag)
}

/// Revival envelope e^{−2t/t_Q}, t_Q = 1/κμ.
pub fn revival_envelope(p: &LaserParams, t: f64) -> f64 {
    (-2.0 * p.kappa * p.mu * t).exp()
}

/// Collisions-only coherence time integrals over one collapse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseErrorModel {
    pub tau_exact: f64,
    pub tau_approx: Complex64,
    /// Re(τ_approx − τ_exact)/τ_exact.
    pub relative_error: f64,
    pub omega: f64,
}

fn collapse_opts() -> QuadOptions {
    QuadOptions {
        atol: 1e-12,
        rtol: 1e-9,
        max_evals: 200_000,
    }
}

/// ½∫ g(t) e^{−iωt} dt over the first collapse t ∈ [0, π/2C] for the
/// collisions-only coherence.
pub fn collapse_tau(mu: f64, c: f64, omega: f64) -> Result<Complex64> {
    if !(c > 0.0) || !(mu > 0.0) {
        return Err(Error::param("c", "collision strength and μ must be positive"));
    }
    let (v, _) = quadrature::integrate(
        |t| g1_collisions_only(mu, c, t) * Complex64::new(0.0, -omega * t).exp(),
        0.0,
        PI / (2.0 * c),
        collapse_opts(),
    )?;
    Ok(0.5 * v)
}

/// Compares the exact collapse coherence time with the single complex
/// exponential approximation at ω₁ = 2μC − 2C/3.
pub fn collapse_error_model(mu: f64, c: f64) -> Result<CollapseErrorModel> {
    if !(c > 0.0) || !(mu > 0.0) {
        return Err(Error::param("c", "collision strength and μ must be positive"));
    }
    let (exact, _) = quadrature::integrate(
        |t| Complex64::new((-mu * (1.0 - (2.0 * c * t).cos())).exp(), 0.0),
        0.0,
        PI / (2.0 * c),
        collapse_opts(),
    )?;
    let tau_exact = 0.5 * exact.re;
    let omega = 2.0 * mu * c - 2.0 * c / 3.0;
    let tau_approx = collapse_tau(mu, c, omega)?;
    Ok(CollapseErrorModel {
        tau_exact,
        tau_approx,
        relative_error: (tau_approx.re - tau_exact) / tau_exact,
        omega,
    })
}

/// The collapse-integral version of the central-frequency iteration,
/// starting from ω₀ = 2μC. Returns (first correction ω₁, converged ω̄).
pub fn collapse_central_frequency(mu: f64, c: f64, max_iters: usize) -> Result<(f64, f64)> {
    let mut omega = 2.0 * mu * c;
    let mut first = None;
    for _ in 0..max_iters {
        let tau = collapse_tau(mu, c, omega)?;
        if tau.im.abs() < 1e-10 * tau.re {
            return Ok((first.unwrap_or(omega), omega));
        }
        omega -= (1.0 / (2.0 * tau)).im;
        first.get_or_insert(omega);
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual: {
            let tau = collapse_tau(mu, c, omega)?;
            tau.im.abs() / tau.re
        },
    })
}
