//! Experimental design for the QND number measurement and feedback: probe
//! phase shift, measurement strength, optimal feedback and the spontaneous
//! emission loss ratio. All quantities are SI; rates are in s⁻¹.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::LaserParams;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Far-detuned probe and atomic transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Probe wavelength λ (m).
    pub wavelength: f64,
    /// Beam cross-section A (m²).
    pub beam_area: f64,
    /// Natural linewidth γ (s⁻¹).
    pub gamma: f64,
    /// Detuning Δ (s⁻¹).
    pub delta: f64,
    /// Saturation intensity I_sat (W/m²).
    pub saturation_intensity: f64,
    /// Probe intensity (W/m²); ignored when `power` is given.
    #[serde(default)]
    pub intensity: Option<f64>,
    /// Probe power P (W).
    #[serde(default)]
    pub power: Option<f64>,
}

impl ProbeParams {
    /// ⁸⁷Rb D2 order-of-magnitude inputs: λ = 780 nm, A = 1e−11 m²,
    /// γ = 5e6 s⁻¹, Δ = 2e9 s⁻¹, I_sat = 10 W/m².
    pub fn rubidium_example() -> Self {
        ProbeParams {
            wavelength: 780e-9,
            beam_area: 1e-11,
            gamma: 5e6,
            delta: 2e9,
            saturation_intensity: 10.0,
            intensity: None,
            power: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        pos("wavelength", self.wavelength)?;
        pos("beam_area", self.beam_area)?;
        pos("gamma", self.gamma)?;
        pos("delta", self.delta)?;
        pos("saturation_intensity", self.saturation_intensity)?;
        for (name, v) in [("intensity", self.intensity), ("power", self.power)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::param(name, format!("must be ≥ 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Probe photon energy ħω_p.
    pub fn photon_energy(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.wavelength
    }

    /// P, from `power` or `intensity × A`.
    pub fn probe_power(&self) -> Option<f64> {
        self.power
            .or_else(|| self.intensity.map(|i| i * self.beam_area))
    }

    /// 2πhcγ/λ³.
    pub fn saturation_intensity_from_constants(&self) -> f64 {
        2.0 * PI * PLANCK * SPEED_OF_LIGHT * self.gamma / self.wavelength.powi(3)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.delta < 100.0 * self.gamma {
            w.push(format!(
                "detuning Δ = {:.3e} is below 100γ = {:.3e}; far-detuned approximation is marginal",
                self.delta,
                100.0 * self.gamma
            ));
        }
        let ratio = self.saturation_intensity / self.saturation_intensity_from_constants();
        if !(1.0 / 3.0..=3.0).contains(&ratio) {
            w.push(format!(
                "supplied I_sat differs from 2πhcγ/λ³ by a factor {ratio:.3}"
            ));
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShift {
    pub theta: f64,
    /// √μ·θ, when μ was given.
    pub sqrt_mu_theta: Option<f64>,
    /// √μ·θ < 0.1.
    pub valid: Option<bool>,
}

/// θ = ħω_pγ²/(8AΔI_sat).
pub fn probe_phase_shift(pp: &ProbeParams, mu: Option<f64>) -> Result<PhaseShift> {
    pp.validate()?;
    let theta = pp.photon_energy() * pp.gamma * pp.gamma
        / (8.0 * pp.beam_area * pp.delta * pp.saturation_intensity);
    let smt = mu.map(|m| m.sqrt() * theta);
    Ok(PhaseShift {
        theta,
        sqrt_mu_theta: smt,
        valid: smt.map(|v| v < 0.1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStrength {
    /// M = Pθ²/ħω_p (s⁻¹), when a probe power or intensity is known.
    pub m: Option<f64>,
    /// M per unit intensity, Aθ²/ħω_p (s⁻¹ per W/m²).
    pub per_intensity: f64,
}

pub fn measurement_strength(pp: &ProbeParams, theta: f64) -> MeasurementStrength {
    let e = pp.photon_energy();
    MeasurementStrength {
        m: pp.probe_power().map(|p| p * theta * theta / e),
        per_intensity: pp.beam_area * theta * theta / e,
    }
}

/// Probe intensity (W/m²) that yields measurement strength `m`.
pub fn intensity_for_measurement(pp: &ProbeParams, theta: f64, m: f64) -> f64 {
    m / measurement_strength(pp, theta).per_intensity
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalFeedback {
    pub f: f64,
    pub m: f64,
}

/// F = C, M = C/√η.
pub fn optimal_feedback(c: f64, eta: f64) -> Result<OptimalFeedback> {
    if !(c > 0.0) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::param("eta", format!("must lie in (0, 1], got {eta}")));
    }
    Ok(OptimalFeedback {
        f: c,
        m: c / eta.sqrt(),
    })
}

/// Spontaneous emission loss rate over output rate,
/// (4μM/κ)·(2A·I_sat/(ħω_pγμ)).
pub fn spontaneous_loss_ratio(p: &LaserParams, pp: &ProbeParams, m: f64) -> Result<f64> {
    pp.validate()?;
    Ok(4.0 * p.mu * m / p.kappa * 2.0 * pp.beam_area * pp.saturation_intensity
        / (pp.photon_energy() * pp.gamma * p.mu))
}

/// Exponents of (kg, m, s) for a dimensional audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension(pub i32, pub i32, pub i32);

impl Dimension {
    pub const NONE: Dimension = Dimension(0, 0, 0);
    const JOULE: Dimension = Dimension(1, 2, -2);
    const RATE: Dimension = Dimension(0, 0, -1);
    const AREA: Dimension = Dimension(0, 2, 0);
    const INTENSITY: Dimension = Dimension(1, 0, -3);

    fn mul(self, o: Dimension) -> Dimension {
        Dimension(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }

    fn div(self, o: Dimension) -> Dimension {
        Dimension(self.0 - o.0, self.1 - o.1, self.2 - o.2)
    }
}

/// Dimensions of θ and M as implied by their defining formulas; θ must be
/// dimensionless and M a rate.
pub fn dimensional_audit() -> (Dimension, Dimension) {
    use Dimension as D;
    let theta = D::JOULE
        .mul(D::RATE)
        .mul(D::RATE)
        .div(D::AREA.mul(D::RATE).mul(D::INTENSITY));
    let power = D::INTENSITY.mul(D::AREA);
    let m = power.mul(theta).mul(theta).div(D::JOULE);
    (theta, m)
}

/// Inputs for a complete design report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignInput {
    pub probe: ProbeParams,
    /// Mean atom number μ.
    pub mu: f64,
    /// Output coupling κ (s⁻¹).
    pub kappa: f64,
    /// Dimensionless nonlinearity χ.
    pub chi: f64,
    #[serde(default = "one")]
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

impl DesignInput {
    /// Order-of-magnitude trap and probe values: μ = 1e6, χ = 1e3 and a
    /// collision rate C = 1e−2 s⁻¹, which fixes κ = 4μC/χ.
    pub fn typical_trap() -> Self {
        DesignInput {
            probe: ProbeParams::rubidium_example(),
            mu: 1e6,
            kappa: 4.0 * 1e6 * 1e-2 / 1e3,
            chi: 1e3,
            eta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub theta: f64,
    pub sqrt_mu_theta: f64,
    pub theta_valid: bool,
    pub m_per_intensity: f64,
    /// M at the supplied probe intensity or power, if any.
    pub m_supplied: Option<f64>,
    pub collision_rate: f64,
    pub feedback_f: f64,
    pub measurement_m: f64,
    /// Probe intensity that realizes the optimal M (W/m²).
    pub required_intensity: f64,
    pub saturation_intensity_computed: f64,
    pub loss_ratio: f64,
    pub theta_dimension: Dimension,
    pub m_dimension: Dimension,
    pub warnings: Vec<String>,
}

pub fn design_report(input: &DesignInput) -> Result<DesignReport> {
    let p = LaserParams::from_chi(input.kappa, input.mu, input.chi)?;
    let ps = probe_phase_shift(&input.probe, Some(input.mu))?;
    let ms = measurement_strength(&input.probe, ps.theta);
    let opt = optimal_feedback(p.c, input.eta)?;
    let mut warnings = input.probe.warnings();
    let sqrt_mu_theta = ps.sqrt_mu_theta.unwrap_or(f64::NAN);
    if !ps.valid.unwrap_or(false) {
        warnings.push(format!("√μ·θ = {sqrt_mu_theta:.3e} is not ≪ 1"));
    }
    let (td, md) = dimensional_audit();
    Ok(DesignReport {
        theta: ps.theta,
        sqrt_mu_theta,
        theta_valid: ps.valid.unwrap_or(false),
        m_per_intensity: ms.per_intensity,
        m_supplied: ms.m,
        collision_rate: p.c,
        feedback_f: opt.f,
        measurement_m: opt.m,
        required_intensity: intensity_for_measurement(&input.probe, ps.theta, opt.m),
        saturation_intensity_computed: input.probe.saturation_intensity_from_constants(),
        loss_ratio: spontaneous_loss_ratio(&p, &input.probe, opt.m)?,
        theta_dimension: td,
        m_dimension: md,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within_factor(x: f64, target: f64, f: f64) -> bool {
        x / target <= f && target / x <= f
    }

    #[test]
    fn rubidium_phase_shift() {
        let pp = ProbeParams::rubidium_example();
        let t = probe_phase_shift(&pp, Some(1e6)).unwrap();
        assert!(within_factor(t.theta, 3.3e-6, 2.0), "{}", t.theta);
        assert!(t.valid.unwrap());
        let doubled = ProbeParams {
            delta: 2.0 * pp.delta,
            ..pp
        };
        let t2 = probe_phase_shift(&doubled, None).unwrap();
        assert!((t2.theta / t.theta - 0.5).abs() < 1e-14);
        assert!(probe_phase_shift(&ProbeParams { beam_area: 0.0, ..pp }, None).is_err());
    }

    #[test]
    fn validity_threshold_arithmetic() {
        let v: f64 = 1e6f64.sqrt() * 3.3e-6;
        assert!((v - 3.3e-3).abs() < 1e-12);
        assert!(v < 0.1);
    }

    #[test]
    fn measurement_strength_scale() {
        let pp = ProbeParams::rubidium_example();
        let theta = probe_phase_shift(&pp, None).unwrap().theta;
        let ms = measurement_strength(&pp, theta);
        assert!(within_factor(ms.per_intensity, 4.2e-4, 2.0), "{}", ms.per_intensity);
        assert!(within_factor(intensity_for_measurement(&pp, theta, 1e-2), 30.0, 2.0));
        let zero = ProbeParams {
            power: Some(0.0),
            ..pp
        };
        assert_eq!(measurement_strength(&zero, theta).m, Some(0.0));
    }

    #[test]
    fn optimal_settings() {
        let o = optimal_feedback(1e-2, 1.0).unwrap();
        assert_eq!((o.f, o.m), (1e-2, 1e-2));
        let o = optimal_feedback(1e-2, 0.25).unwrap();
        assert!((o.m - 2e-2).abs() < 1e-15);
        assert!(optimal_feedback(1e-2, 0.0).is_err());
    }

    #[test]
    fn loss_ratio_scalings() {
        let d = DesignInput::typical_trap();
        let r = design_report(&d).unwrap();
        assert!(within_factor(r.loss_ratio, 0.1, 2.0), "{}", r.loss_ratio);
        let twice = design_report(&DesignInput {
            chi: 2.0 * d.chi,
            kappa: d.kappa,
            ..d
        })
        .unwrap();
        assert!((twice.loss_ratio / r.loss_ratio - 2.0).abs() < 1e-12);
        let p = LaserParams::from_chi(d.kappa, d.mu, d.chi).unwrap();
        let half_area = ProbeParams {
            beam_area: 0.5 * d.probe.beam_area,
            ..d.probe
        };
        let a = spontaneous_loss_ratio(&p, &d.probe, 1e-2).unwrap();
        let b = spontaneous_loss_ratio(&p, &half_area, 1e-2).unwrap();
        assert!((b / a - 0.5).abs() < 1e-14);
    }

    #[test]
    fn saturation_intensity_consistency() {
        let pp = ProbeParams::rubidium_example();
        let computed = pp.saturation_intensity_from_constants();
        assert!(within_factor(computed, 10.0, 3.0));
        assert!(pp.warnings().is_empty());
        let off = ProbeParams {
            saturation_intensity: 100.0,
            ..pp
        };
        assert_eq!(off.warnings().len(), 1);
    }

    #[test]
    fn dimensions() {
        let (t, m) = dimensional_audit();
        assert_eq!(t, Dimension::NONE);
        assert_eq!(m, Dimension(0, 0, -1));
    }
}
