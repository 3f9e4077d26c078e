//! Master-equation generators for the atom laser mode and its stationary
//! state.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    annihilation, dissipator, number, pair_number, saturated_gain, DensityMatrix, FockSpace,
    SuperOperator,
};

/// Physical rates of the laser model. `kappa` sets the time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    pub kappa: f64,
    pub mu: f64,
    /// Collision strength C.
    pub c: f64,
    /// Dimensionless nonlinearity χ = 4μC/κ.
    pub chi: f64,
}

impl LaserParams {
    pub fn from_chi(kappa: f64, mu: f64, chi: f64) -> Result<Self> {
        Self::validate(kappa, mu)?;
        if !(chi >= 0.0) || !chi.is_finite() {
            return Err(Error::param("chi", format!("must be finite and ≥ 0, got {chi}")));
        }
        Ok(LaserParams {
            kappa,
            mu,
            c: chi * kappa / (4.0 * mu),
            chi,
        })
    }

    pub fn from_collision(kappa: f64, mu: f64, c: f64) -> Result<Self> {
        Self::validate(kappa, mu)?;
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::param("c", format!("must be finite and ≥ 0, got {c}")));
        }
        Ok(LaserParams {
            kappa,
            mu,
            c,
            chi: 4.0 * mu * c / kappa,
        })
    }

    fn validate(kappa: f64, mu: f64) -> Result<()> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
        }
        if !(mu >= 1.0) || !mu.is_finite() {
            return Err(Error::param("mu", format!("must be ≥ 1, got {mu}")));
        }
        Ok(())
    }

    pub fn is_integer_mu(&self) -> bool {
        self.mu.fract() == 0.0
    }
}

/// Measurement and feedback settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackParams {
    /// Measurement strength M.
    pub m: f64,
    /// Feedback strength F; F = C cancels the collisional nonlinearity.
    pub f: f64,
    /// Detection efficiency η.
    pub eta: f64,
    pub enabled: bool,
}

impl FeedbackParams {
    pub fn disabled() -> Self {
        FeedbackParams {
            m: 0.0,
            f: 0.0,
            eta: 1.0,
            enabled: false,
        }
    }

    pub fn new(m: f64, f: f64, eta: f64) -> Result<Self> {
        let fb = FeedbackParams {
            m,
            f,
            eta,
            enabled: true,
        };
        fb.validate()?;
        Ok(fb)
    }

    /// The optimal setting F = √η·M = C.
    pub fn optimal(c: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1], got {eta}")));
        }
        Self::new(c / eta.sqrt(), c, eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !self.f.is_finite() {
            return Err(Error::param("f", "must be finite"));
        }
        if self.m == 0.0 && self.f != 0.0 {
            return Err(Error::param("m", "feedback noise F²/ηM diverges for M = 0 with F ≠ 0"));
        }
        if !(self.m >= 0.0) || !self.m.is_finite() {
            return Err(Error::param("m", format!("must be finite and ≥ 0, got {}", self.m)));
        }
        Ok(())
    }

    /// Rate of the number-dephasing term, M + F²/ηM.
    pub fn dephasing_rate(&self) -> f64 {
        if !self.enabled || self.m == 0.0 {
            return 0.0;
        }
        self.m + self.f * self.f / (self.eta * self.m)
    }

    /// Feedback strength actually applied (zero when disabled).
    pub fn applied_f(&self) -> f64 {
        if self.enabled {
            self.f
        } else {
            0.0
        }
    }
}

/// How many Fock levels to keep, and when a state counts as truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub pad_coefficient: f64,
    pub tail_tolerance: f64,
    pub tail_levels: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            pad_coefficient: 10.0,
            tail_tolerance: 1e-10,
            tail_levels: 5,
        }
    }
}

impl TruncationPolicy {
    /// `⌈μ + pad·√μ⌉ + 1`.
    pub fn dim(&self, mu: f64) -> usize {
        (mu + self.pad_coefficient * mu.sqrt()).ceil() as usize + 1
    }

    pub fn space(&self, mu: f64) -> Result<FockSpace> {
        FockSpace::new(self.dim(mu))
    }

    /// Population of the top `tail_levels` levels of `rho`.
    pub fn check(&self, rho: &DensityMatrix) -> Result<f64> {
        let tail = rho.tail_population(self.tail_levels);
        if tail > self.tail_tolerance {
            return Err(Error::Truncation {
                tail,
                tolerance: self.tail_tolerance,
            });
        }
        Ok(tail)
    }
}

/// κμ·(saturated gain) + κ𝓓[a] for arbitrary μ ≥ 0, including the pure
/// loss limit μ = 0.
pub fn gain_loss(kappa: f64, mu: f64, space: FockSpace) -> SuperOperator {
    let loss = dissipator(&annihilation(space)).expect("same space");
    saturated_gain(space)
        .scaled(kappa * mu)
        .add(&loss.scaled(kappa))
        .expect("same space")
}

/// The bare laser generator.
pub fn build_l0(p: &LaserParams, space: FockSpace) -> SuperOperator {
    gain_loss(p.kappa, p.mu, space)
}

/// ρ ↦ −iC[a†a†aa, ρ].
pub fn build_collision(p: &LaserParams, space: FockSpace) -> SuperOperator {
    SuperOperator::hamiltonian(&pair_number(space)).scaled(p.c)
}

/// M𝓓[a†a] + iF[a†a†aa, ·] + (F²/ηM)𝓓[a†a].
pub fn build_measurement_feedback(
    _p: &LaserParams,
    f: &FeedbackParams,
    space: FockSpace,
) -> Result<SuperOperator> {
    if !f.enabled {
        return Err(Error::param("feedback", "measurement/feedback term requested while disabled"));
    }
    f.validate()?;
    let dephase = dissipator(&number(space))?.scaled(f.dephasing_rate());
    // +iF[H, ρ] is the Hamiltonian map −i[H, ρ] scaled by −F
    let fb = SuperOperator::hamiltonian(&pair_number(space)).scaled(-f.f);
    dephase.add(&fb)
}

/// Full generator: bare laser plus collisions, plus measurement and
/// feedback when enabled.
pub fn build_total(p: &LaserParams, f: &FeedbackParams, space: FockSpace) -> Result<SuperOperator> {
    let mut l = build_l0(p, space);
    if p.c != 0.0 {
        l = l.add(&build_collision(p, space))?;
    }
    if f.enabled {
        l = l.add(&build_measurement_feedback(p, f, space)?)?;
    }
    Ok(l)
}

/// The reduced equation under optimal feedback, built directly:
/// bare laser plus (2C/√η)𝓓[a†a].
pub fn build_optimal_reduced(p: &LaserParams, eta: f64, space: FockSpace) -> Result<SuperOperator> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::param("eta", format!("must lie in (0, 1], got {eta}")));
    }
    let dephase = dissipator(&number(space))?.scaled(2.0 * p.c / eta.sqrt());
    build_l0(p, space).add(&dephase)
}

/// Poisson mixture of number states with mean μ, renormalized on the
/// truncated space.
pub fn steady_state(p: &LaserParams, space: FockSpace, policy: &TruncationPolicy) -> Result<DensityMatrix> {
    let d = space.dim();
    let mut logw = Vec::with_capacity(d);
    let mut log_fact = 0.0;
    for n in 0..d {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        logw.push(-p.mu + n as f64 * p.mu.ln() - log_fact);
    }
    let w: Vec<f64> = logw.iter().map(|l| l.exp()).collect();
    let total: f64 = w.iter().sum();
    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for n in 0..d {
        rho[(n, n)] = Complex64::new(w[n] / total, 0.0);
    }
    let state = DensityMatrix::new(space, rho)?;
    policy.check(&state)?;
    Ok(state)
}

/// Effective nonlinearity after feedback, χ_eff = 4μ|C − F|/κ.
pub fn effective_chi(p: &LaserParams, f: &FeedbackParams) -> f64 {
    4.0 * p.mu * (p.c - f.applied_f()).abs() / p.kappa
}

/// Whether the residual nonlinearity is strong enough for revivals,
/// χ_eff > 4πμ².
pub fn in_revival_regime(p: &LaserParams, f: &FeedbackParams) -> bool {
    effective_chi(p, f) > 4.0 * std::f64::consts::PI * p.mu * p.mu
}

/// A fully assembled model: parameters, space, generator and stationary
/// state.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: LaserParams,
    pub feedback: FeedbackParams,
    pub policy: TruncationPolicy,
    pub space: FockSpace,
    pub generator: SuperOperator,
    pub rho_ss: DensityMatrix,
}

impl Model {
    pub fn new(params: LaserParams, feedback: FeedbackParams, policy: TruncationPolicy) -> Result<Self> {
        feedback.validate()?;
        if in_revival_regime(&params, &feedback) && !params.is_integer_mu() {
            return Err(Error::Regime(format!(
                "revival regime (χ_eff = {:.4e} > 4πμ²) needs integer μ; got μ = {}",
                effective_chi(&params, &feedback),
                params.mu
            )));
        }
        let space = policy.space(params.mu)?;
        let generator = build_total(&params, &feedback, space)?;
        let rho_ss = steady_state(&params, space, &policy)?;
        Ok(Model {
            params,
            feedback,
            policy,
            space,
            generator,
            rho_ss,
        })
    }

    /// Collisions-only dynamics (no gain, loss or feedback) with the same
    /// stationary state.
    pub fn collisions_only(params: LaserParams, policy: TruncationPolicy) -> Result<Self> {
        let space = policy.space(params.mu)?;
        let generator = build_collision(&params, space);
        let rho_ss = steady_state(&params, space, &policy)?;
        Ok(Model {
            params,
            feedback: FeedbackParams::disabled(),
            policy,
            space,
            generator,
            rho_ss,
        })
    }

    pub fn revival_regime(&self) -> bool {
        in_revival_regime(&self.params, &self.feedback)
    }

    /// `‖L vec(ρ_ss)‖ / (‖L‖_F ‖ρ_ss‖_F)`.
    pub fn stationarity_residual(&self) -> f64 {
        let v = self.rho_ss.vectorized();
        let lv = self.generator.apply_vec(&v);
        let num = lv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        num / (self.generator.matrix().frobenius_norm() * vn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::creation;

    fn dyad(d: usize, n: usize, m: usize) -> DMatrix<Complex64> {
        let mut r = DMatrix::zeros(d, d);
        r[(n, m)] = Complex64::new(1.0, 0.0);
        r
    }

    #[test]
    fn chi_and_c_are_consistent() {
        let p = LaserParams::from_chi(1.0, 60.0, 100.0).unwrap();
        assert!((p.c - 100.0 / 240.0).abs() < 1e-15);
        let q = LaserParams::from_collision(2.0, 60.0, p.c).unwrap();
        assert!((q.chi - 50.0).abs() < 1e-12);
        assert!(LaserParams::from_chi(1.0, 0.5, 1.0).is_err());
        assert!(LaserParams::from_chi(0.0, 5.0, 1.0).is_err());
        assert!(LaserParams::from_chi(1.0, 5.0, -1.0).is_err());
    }

    #[test]
    fn truncation_dimensions() {
        let pol = TruncationPolicy::default();
        assert_eq!(pol.dim(15.0), 55);
        assert_eq!(pol.dim(30.0), 86);
        assert_eq!(pol.dim(60.0), 139);
    }

    #[test]
    fn steady_state_moments() {
        let p = LaserParams::from_chi(1.0, 15.0, 0.0).unwrap();
        let pol = TruncationPolicy::default();
        let s = pol.space(15.0).unwrap();
        let rho = steady_state(&p, s, &pol).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        assert!((rho.mean_number() - 15.0).abs() < 1e-8);
        let nn = rho.expectation(&pair_number(s)).unwrap().re;
        assert!((nn / 225.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn steady_state_flags_short_truncation() {
        let p = LaserParams::from_chi(1.0, 15.0, 0.0).unwrap();
        let pol = TruncationPolicy::default();
        let small = FockSpace::new(25).unwrap();
        assert!(matches!(steady_state(&p, small, &pol), Err(Error::Truncation { .. })));
    }

    #[test]
    fn l0_null_vector_and_trace() {
        let p = LaserParams::from_chi(1.0, 15.0, 0.0).unwrap();
        let m = Model::new(p, FeedbackParams::disabled(), TruncationPolicy::default()).unwrap();
        assert!(m.stationarity_residual() < 1e-8, "{}", m.stationarity_residual());
        assert!(m.generator.trace_residual() < 1e-10);
    }

    #[test]
    fn zero_mu_is_pure_loss() {
        let s = FockSpace::new(6).unwrap();
        let l = gain_loss(1.3, 0.0, s);
        let loss = dissipator(&annihilation(s)).unwrap().scaled(1.3);
        assert!((l.to_dense() - loss.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn collision_phases() {
        let p = LaserParams::from_collision(1.0, 2.0, 0.7).unwrap();
        let s = FockSpace::new(5).unwrap();
        let l = build_collision(&p, s);
        for n in 0..5 {
            assert!(l.apply(&dyad(5, n, n)).unwrap().norm() < 1e-15);
        }
        let out = l.apply(&dyad(5, 2, 1)).unwrap();
        let expected = dyad(5, 2, 1) * Complex64::new(0.0, -2.0 * 0.7);
        assert!((out - expected).norm() < 1e-14);
    }

    #[test]
    fn number_dephasing_eigenvalues() {
        let s = FockSpace::new(6).unwrap();
        let d = dissipator(&number(s)).unwrap();
        for (n, m) in [(0usize, 0usize), (3, 1), (1, 5), (4, 4)] {
            let out = d.apply(&dyad(6, n, m)).unwrap();
            let k = n as f64 - m as f64;
            let expected = dyad(6, n, m) * Complex64::new(-0.5 * k * k, 0.0);
            assert!((out - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn feedback_rejects_zero_measurement() {
        assert!(FeedbackParams::new(0.0, 0.1, 1.0).is_err());
        assert!(FeedbackParams::new(0.1, 0.1, 0.0).is_err());
        assert!(FeedbackParams::new(0.1, 0.1, 1.5).is_err());
        assert!(FeedbackParams::new(0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn pure_measurement_when_feedback_is_zero() {
        let p = LaserParams::from_chi(1.0, 5.0, 0.0).unwrap();
        let s = FockSpace::new(8).unwrap();
        let f = FeedbackParams::new(0.3, 0.0, 0.5).unwrap();
        let l = build_measurement_feedback(&p, &f, s).unwrap();
        let expected = dissipator(&number(s)).unwrap().scaled(0.3);
        assert!((l.to_dense() - expected.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn optimal_feedback_reduces_exactly() {
        for eta in [1.0, 0.25, 0.6] {
            let p = LaserParams::from_chi(1.0, 15.0, 40.0).unwrap();
            let s = TruncationPolicy::default().space(15.0).unwrap();
            let f = FeedbackParams::optimal(p.c, eta).unwrap();
            let full = build_total(&p, &f, s).unwrap().to_dense();
            let reduced = build_optimal_reduced(&p, eta, s).unwrap().to_dense();
            assert!((full - &reduced).norm() <= 1e-12 * reduced.norm());
        }
    }

    #[test]
    fn total_with_zero_chi_is_l0() {
        let p = LaserParams::from_chi(1.0, 10.0, 0.0).unwrap();
        let s = TruncationPolicy::default().space(10.0).unwrap();
        let a = build_total(&p, &FeedbackParams::disabled(), s).unwrap();
        assert!((a.to_dense() - build_l0(&p, s).to_dense()).norm() == 0.0);
    }

    #[test]
    fn stationary_under_every_generator() {
        let pol = TruncationPolicy::default();
        let p = LaserParams::from_chi(1.0, 15.0, 30.0).unwrap();
        for f in [
            FeedbackParams::disabled(),
            FeedbackParams::optimal(p.c, 1.0).unwrap(),
            FeedbackParams::new(0.2, 0.05, 0.7).unwrap(),
        ] {
            let m = Model::new(p, f, pol).unwrap();
            assert!(m.stationarity_residual() < 1e-8);
            assert!(m.generator.trace_residual() < 1e-10);
        }
    }

    #[test]
    fn imaginary_first_moment_of_collisions() {
        let pol = TruncationPolicy::default();
        let p = LaserParams::from_collision(1.0, 15.0, 0.3).unwrap();
        let m = Model::collisions_only(p, pol).unwrap();
        let a = annihilation(m.space);
        let ar = a.entries() * m.rho_ss.matrix();
        let lar = m.generator.apply(&ar).unwrap();
        let v = (creation(m.space).entries() * lar).trace();
        assert!((v.im / (2.0 * 15.0 * 15.0 * 0.3) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn revival_regime_requires_integer_mu() {
        let pol = TruncationPolicy::default();
        let chi = 4.0 * std::f64::consts::PI * 15.5 * 15.5 * 2.0;
        let p = LaserParams::from_chi(1.0, 15.5, chi).unwrap();
        assert!(matches!(
            Model::new(p, FeedbackParams::disabled(), pol),
            Err(Error::Regime(_))
        ));
    }
}
