//! First-order coherence, coherence time and linewidth.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::fock::{annihilation, pair_number, DensityMatrix, FockSpace, SuperOperator};
use crate::linalg;
use crate::liouvillian::{FeedbackParams, LaserParams, Model, TruncationPolicy};
use crate::ode::{self, OdeStats, Tolerances};
use crate::sparse::{support, CsrMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How `e^{Lt}` is applied to a vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Propagator {
    /// Adaptive Dormand–Prince 5(4) on the invariant sector of the
    /// initial condition.
    Adaptive { rtol: f64, atol: f64 },
    /// Exact exponential of the (small) invariant sector for one grid step,
    /// applied repeatedly. Needs a uniform grid. Intended for the strongly
    /// oscillatory revival regime where explicit stepping is impractical.
    SectorExponential,
}

impl Default for Propagator {
    fn default() -> Self {
        let t = Tolerances::default();
        Propagator::Adaptive {
            rtol: t.rtol,
            atol: t.atol,
        }
    }
}

/// Largest sector handled by [`Propagator::SectorExponential`].
pub const MAX_EXPONENTIAL_SECTOR: usize = 1200;

/// `n` samples on `[0, t_end]`, refined logarithmically toward `t = 0`.
pub fn log_refined_grid(t_end: f64, n: usize) -> Vec<f64> {
    let s: f64 = 4.0;
    let denom = s.exp_m1();
    (0..n)
        .map(|k| t_end * (s * k as f64 / (n - 1) as f64).exp_m1() / denom)
        .collect()
}

pub fn uniform_grid(dt: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PropagationStats {
    pub sector_size: usize,
    pub steps: usize,
    pub rejected: usize,
}

/// Propagates `x0` under `ẋ = Lx` and hands the state, restricted to the
/// invariant sector `idx`, to `observe` at each requested time.
pub(crate) fn propagate<O>(
    l: &CsrMatrix,
    x0: &[Complex64],
    times: &[f64],
    prop: Propagator,
    mut observe: O,
) -> Result<PropagationStats>
where
    O: FnMut(usize, &[usize], &[Complex64]) -> Result<()>,
{
    if times.is_empty() {
        return Ok(PropagationStats::default());
    }
    if times[0] < 0.0 {
        return Err(Error::param("times", "must start at t ≥ 0"));
    }
    let idx = l.reachable_from(&support(x0));
    let sector = l.restrict(&idx);
    let y0: Vec<Complex64> = idx.iter().map(|&i| x0[i]).collect();
    match prop {
        Propagator::Adaptive { rtol, atol } => {
            let stats: OdeStats = ode::integrate(
                |_, y: &[Complex64], dy: &mut [Complex64]| sector.mul_vec_into(y, dy),
                0.0,
                &y0,
                times,
                Tolerances { rtol, atol },
                |k, _, y| observe(k, &idx, y),
            )?;
            Ok(PropagationStats {
                sector_size: idx.len(),
                steps: stats.accepted,
                rejected: stats.rejected,
            })
        }
        Propagator::SectorExponential => {
            if idx.len() > MAX_EXPONENTIAL_SECTOR {
                return Err(Error::param(
                    "propagator",
                    format!("sector of size {} too large for dense exponentials", idx.len()),
                ));
            }
            let n = times.len();
            let dense = sector.to_dense();
            let mut y = DVector::from_vec(y0);
            let mut t_now = 0.0;
            if times[0] > 0.0 {
                y = linalg::expm(&(&dense * Complex64::new(times[0], 0.0))) * y;
                t_now = times[0];
            }
            observe(0, &idx, y.as_slice())?;
            if n == 1 {
                return Ok(PropagationStats {
                    sector_size: idx.len(),
                    steps: 0,
                    rejected: 0,
                });
            }
            let dt = (times[n - 1] - t_now) / (n - 1) as f64;
            for (k, &t) in times.iter().enumerate() {
                let nominal = t_now + k as f64 * dt;
                if (t - nominal).abs() > 1e-9 * dt.max(t.abs()) {
                    return Err(Error::param(
                        "times",
                        "sector exponential propagation needs a uniform grid",
                    ));
                }
            }
            let step = linalg::expm(&(&dense * Complex64::new(dt, 0.0)));
            for k in 1..n {
                y = &step * &y;
                observe(k, &idx, y.as_slice())?;
            }
            Ok(PropagationStats {
                sector_size: idx.len(),
                steps: n - 1,
                rejected: 0,
            })
        }
    }
}

/// Laser and feedback settings carried along with computed data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub laser: LaserParams,
    pub feedback: FeedbackParams,
    pub dim: usize,
}

impl RunParams {
    pub fn of(model: &Model) -> Self {
        RunParams {
            laser: model.params,
            feedback: model.feedback,
            dim: model.space.dim(),
        }
    }
}

/// Sampled g¹(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTrace {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub params: Option<RunParams>,
    pub omega_bar: Option<f64>,
    /// Revival period π/|C − F| for traces sampled through revivals.
    pub revival_period: Option<f64>,
    /// Top-level population of the stationary state used.
    pub tail_population: f64,
}

impl CoherenceTrace {
    /// Checks g¹(0) = 1 and |g¹| ≤ 1 to 1e−9.
    pub fn check_invariants(&self) -> Result<()> {
        if let (Some(&t0), Some(&g0)) = (self.times.first(), self.values.first()) {
            if t0 == 0.0 && (g0 - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
                return Err(Error::Invariant(format!("g1(0) = {g0} differs from 1")));
            }
        }
        if let Some((k, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| v.norm() > 1.0 + 1e-9)
        {
            return Err(Error::Invariant(format!(
                "|g1| = {} exceeds 1 at t = {}",
                v.norm(),
                self.times[k]
            )));
        }
        Ok(())
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

fn first_coherence_functional(space: FockSpace) -> Vec<(usize, f64)> {
    // Tr[a† X] = Σ_n √(n+1) X_{n, n+1}
    (0..space.dim() - 1)
        .map(|n| (space.index(n, n + 1), ((n + 1) as f64).sqrt()))
        .collect()
}

fn a_rho(rho: &DensityMatrix) -> Vec<Complex64> {
    let a = annihilation(rho.space());
    rho.space().vectorize(&(a.entries() * rho.matrix()))
}

/// g¹(t) = Tr[a† e^{Lt} a ρ_ss] / Tr[ρ_ss a†a] on the given grid.
pub fn g1_trace(
    l: &SuperOperator,
    rho_ss: &DensityMatrix,
    times: &[f64],
    prop: Propagator,
) -> Result<CoherenceTrace> {
    if times.first() != Some(&0.0) {
        return Err(Error::param("times", "grid must start at t = 0"));
    }
    if l.space() != rho_ss.space() {
        return Err(Error::DimensionMismatch {
            expected: l.space().dim(),
            found: rho_ss.space().dim(),
        });
    }
    let mean = rho_ss.mean_number();
    if mean <= 0.0 {
        return Err(Error::ZeroIntensity);
    }
    let space = rho_ss.space();
    let x0 = a_rho(rho_ss);
    let functional = first_coherence_functional(space);
    let mut values = vec![ZERO; times.len()];
    let mut weights: Option<Vec<(usize, f64)>> = None;
    propagate(l.matrix(), &x0, times, prop, |k, idx, y| {
        let w = weights.get_or_insert_with(|| {
            functional
                .iter()
                .filter_map(|&(i, c)| idx.binary_search(&i).ok().map(|p| (p, c)))
                .collect()
        });
        let v: Complex64 = w.iter().map(|&(p, c)| y[p] * c).sum();
        values[k] = v / mean;
        if !values[k].re.is_finite() || !values[k].im.is_finite() {
            return Err(Error::Solver(format!("non-finite g1 at t = {}", times[k])));
        }
        Ok(())
    })?;
    Ok(CoherenceTrace {
        times: times.to_vec(),
        values,
        params: None,
        omega_bar: None,
        revival_period: None,
        tail_population: rho_ss.tail_population(5),
    })
}

/// Time grid and propagator suited to a model: log-refined over ~36
/// estimated coherence times, or uniform with 64 samples per revival
/// period over 7.5 quantum dissipation times in the revival regime.
pub fn default_trace_grid(model: &Model) -> (Vec<f64>, Propagator, Option<f64>) {
    let p = &model.params;
    if model.revival_regime() {
        let c_eff = (p.c - model.feedback.applied_f()).abs();
        let period = std::f64::consts::PI / c_eff;
        let dt = period / 64.0;
        let t_end = 7.5 / (p.kappa * p.mu);
        let n = (t_end / dt).ceil() as usize + 1;
        (uniform_grid(dt, n), Propagator::SectorExponential, Some(period))
    } else {
        let ell = analytic::linewidth_estimate(p, &model.feedback);
        (log_refined_grid(36.0 / ell, 2048), Propagator::default(), None)
    }
}

/// g¹ trace of a model on its default grid. Non-revival traces that have
/// not decayed below 1e−6 are extended (up to four doublings).
pub fn model_g1_trace(model: &Model) -> Result<CoherenceTrace> {
    let (mut times, prop, period) = default_trace_grid(model);
    for _ in 0..5 {
        let mut tr = g1_trace(&model.generator, &model.rho_ss, &times, prop)?;
        tr.params = Some(RunParams::of(model));
        tr.revival_period = period;
        if period.is_some() || tr.values.last().map_or(true, |v| v.norm() < 1e-6) {
            return Ok(tr);
        }
        let t_end = 2.0 * times.last().copied().unwrap_or(1.0);
        times = log_refined_grid(t_end, times.len());
    }
    Err(Error::Coverage("g1 trace did not decay below 1e-6 after extending the grid".into()))
}

/// Coherence time from the resolvent at frequency ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventTau {
    pub tau: Complex64,
    pub residual: f64,
}

/// τ(ω) = −Tr[a†(L − iω)⁻¹ a ρ_ss] / (2⟨a†a⟩).
pub fn coherence_time_resolvent(l: &SuperOperator, rho_ss: &DensityMatrix, omega: f64) -> Result<ResolventTau> {
    let mean = rho_ss.mean_number();
    if mean <= 0.0 {
        return Err(Error::ZeroIntensity);
    }
    let shifted = l.matrix().shift_diagonal(Complex64::new(0.0, -omega));
    let b = a_rho(rho_ss);
    let (x, residual) = linalg::solve_sparse(&shifted, &b)?;
    if residual > 1e-10 {
        return Err(Error::Solver(format!(
            "resolvent residual {residual:.3e} above 1e-10 at ω = {omega}"
        )));
    }
    let tr: Complex64 = first_coherence_functional(rho_ss.space())
        .iter()
        .map(|&(i, c)| x[i] * c)
        .sum();
    let tau = -tr / (2.0 * mean);
    if !(tau.re > 0.0) {
        return Err(Error::Solver(format!(
            "resolvent coherence time has non-positive real part {tau} at ω = {omega}"
        )));
    }
    Ok(ResolventTau { tau, residual })
}

/// Initial guess ω₀ = Im Tr[a† L a ρ_ss] / ⟨a†a⟩.
pub fn omega0(l: &SuperOperator, rho_ss: &DensityMatrix) -> Result<f64> {
    let mean = rho_ss.mean_number();
    if mean <= 0.0 {
        return Err(Error::ZeroIntensity);
    }
    let la = l.apply_vec(&a_rho(rho_ss));
    let tr: Complex64 = first_coherence_functional(rho_ss.space())
        .iter()
        .map(|&(i, c)| la[i] * c)
        .sum();
    Ok(tr.im / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralFrequency {
    pub omega_bar: f64,
    pub omega0: f64,
    pub iterations: usize,
    /// `|Im τ| / Re τ` at the accepted frequency.
    pub residual: f64,
    /// True when the iteration was skipped because of revivals.
    pub revival_regime: bool,
    pub tau: Complex64,
}

/// Central frequency by the iteration ω_{k+1} = ω_k − Im(1/2τ_k), stopped
/// once |Im τ| < 1e−6 Re τ. In the revival regime ω₀ is returned unchanged.
pub fn central_frequency(
    l: &SuperOperator,
    rho_ss: &DensityMatrix,
    max_iters: usize,
    revival_regime: bool,
) -> Result<CentralFrequency> {
    if max_iters == 0 {
        return Err(Error::param("max_iters", "must be at least 1"));
    }
    let w0 = omega0(l, rho_ss)?;
    let mut omega = w0;
    let mut r = coherence_time_resolvent(l, rho_ss, omega)?;
    let ratio = |t: Complex64| t.im.abs() / t.re;
    if revival_regime {
        return Ok(CentralFrequency {
            omega_bar: w0,
            omega0: w0,
            iterations: 0,
            residual: ratio(r.tau),
            revival_regime: true,
            tau: r.tau,
        });
    }
    let mut iterations = 0;
    while ratio(r.tau) >= 1e-6 {
        if iterations == max_iters {
            return Err(Error::NonConvergence {
                iterations,
                residual: ratio(r.tau),
            });
        }
        omega -= (1.0 / (2.0 * r.tau)).im;
        r = coherence_time_resolvent(l, rho_ss, omega)?;
        iterations += 1;
    }
    Ok(CentralFrequency {
        omega_bar: omega,
        omega0: w0,
        iterations,
        residual: ratio(r.tau),
        revival_regime: false,
        tau: r.tau,
    })
}

/// τ = ½∫₀^∞ |g¹| dt by the trapezoid rule plus a geometric tail estimate.
///
/// Monotone traces must have decayed below 1e−6; revival traces must span
/// at least five quantum dissipation times 1/κμ.
pub fn coherence_time_quadrature(trace: &CoherenceTrace) -> Result<f64> {
    let t = &trace.times;
    let g = trace.magnitudes();
    let n = t.len();
    if n < 3 {
        return Err(Error::Coverage("trace needs at least three samples".into()));
    }
    let t_end = t[n - 1];
    match trace.revival_period {
        Some(_) => {
            let p = trace
                .params
                .ok_or_else(|| Error::Coverage("revival trace lacks parameters".into()))?;
            let needed = 5.0 / (p.laser.kappa * p.laser.mu);
            if t_end < needed * (1.0 - 1e-9) {
                return Err(Error::Coverage(format!(
                    "revival trace ends at {t_end:.4e}, needs ≥ {needed:.4e}"
                )));
            }
        }
        None => {
            if g[n - 1] >= 1e-6 {
                return Err(Error::Coverage(format!(
                    "|g1| = {:.3e} at the end of the trace, needs < 1e-6",
                    g[n - 1]
                )));
            }
        }
    }
    let cumulative = {
        let mut c = vec![0.0; n];
        for k in 1..n {
            c[k] = c[k - 1] + 0.5 * (g[k] + g[k - 1]) * (t[k] - t[k - 1]);
        }
        c
    };
    let total = cumulative[n - 1];
    let window = trace.revival_period.unwrap_or(0.1 * t_end);
    let integral_since = |t0: f64| -> f64 {
        let k = t.partition_point(|&x| x < t0).min(n - 1);
        total - cumulative[k]
    };
    let last = integral_since(t_end - window);
    let prev = integral_since(t_end - 2.0 * window) - last;
    let tail = if prev > 0.0 && last > 0.0 && last < prev {
        let q = last / prev;
        last * q / (1.0 - q)
    } else {
        0.0
    };
    Ok(0.5 * (total + tail))
}

/// Glauber g²(0) = ⟨a†a†aa⟩ / ⟨a†a⟩².
pub fn g2_zero(rho: &DensityMatrix) -> Result<f64> {
    let n = rho.mean_number();
    if n <= 0.0 {
        return Err(Error::ZeroIntensity);
    }
    Ok(rho.expectation(&pair_number(rho.space()))?.re / (n * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceClass {
    pub bose_degenerate: bool,
    /// ℓ / κμ.
    pub ratio: f64,
}

/// Bose degeneracy means ℓ < κμ.
pub fn classify_coherence(linewidth: f64, p: &LaserParams) -> Result<CoherenceClass> {
    if !(linewidth > 0.0) {
        return Err(Error::param("linewidth", format!("must be positive, got {linewidth}")));
    }
    let ratio = linewidth / (p.kappa * p.mu);
    Ok(CoherenceClass {
        bose_degenerate: ratio < 1.0,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Resolvent,
    Quadrature,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub tau_coh: f64,
    pub linewidth: f64,
    pub omega_bar: f64,
    pub method: Method,
    pub iterations: usize,
    pub revival_regime: bool,
}

impl CoherenceResult {
    fn new(tau: f64, omega_bar: f64, method: Method, iterations: usize, revival_regime: bool) -> Self {
        CoherenceResult {
            tau_coh: tau,
            linewidth: 1.0 / tau,
            omega_bar,
            method,
            iterations,
            revival_regime,
        }
    }
}

/// Default iteration cap for [`central_frequency`].
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Coherence time and linewidth of a model by the chosen method.
pub fn coherence(model: &Model, method: Method) -> Result<CoherenceResult> {
    let revival = model.revival_regime();
    match method {
        Method::Resolvent => {
            let cf = central_frequency(&model.generator, &model.rho_ss, DEFAULT_MAX_ITERS, revival)?;
            Ok(CoherenceResult::new(cf.tau.re, cf.omega_bar, method, cf.iterations, revival))
        }
        Method::Quadrature => {
            let trace = model_g1_trace(model)?;
            trace.check_invariants()?;
            let tau = coherence_time_quadrature(&trace)?;
            let w0 = omega0(&model.generator, &model.rho_ss)?;
            Ok(CoherenceResult::new(tau, w0, method, 0, revival))
        }
        Method::Analytic => {
            let ell = analytic::linewidth_analytic(&model.params, &model.feedback);
            let w = analytic::mean_rotation(&model.params, &model.feedback);
            Ok(CoherenceResult::new(1.0 / ell, w, method, 0, revival))
        }
    }
}

/// Builds a model with the default truncation and returns its coherence.
pub fn coherence_for(p: LaserParams, f: FeedbackParams, method: Method) -> Result<CoherenceResult> {
    coherence(&Model::new(p, f, TruncationPolicy::default())?, method)
}

/// Outcome of evolving a full density matrix.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: EvolutionDiagnostics,
}

/// Worst-case invariant deviations over an evolution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvolutionDiagnostics {
    pub max_trace_drift: f64,
    pub max_hermiticity_drift: f64,
    pub min_eigenvalue: f64,
    pub max_tail_population: f64,
}

impl EvolutionDiagnostics {
    /// Trace drift < 1e−9, Hermiticity drift < 1e−10, eigenvalues ≥ −1e−8
    /// and tail population below the policy tolerance.
    pub fn check(&self, policy: &TruncationPolicy) -> Result<()> {
        if self.max_trace_drift >= 1e-9 {
            return Err(Error::Invariant(format!("trace drift {:.3e}", self.max_trace_drift)));
        }
        if self.max_hermiticity_drift >= 1e-10 {
            return Err(Error::Invariant(format!(
                "Hermiticity drift {:.3e}",
                self.max_hermiticity_drift
            )));
        }
        if self.min_eigenvalue < -1e-8 {
            return Err(Error::Invariant(format!("eigenvalue {:.3e}", self.min_eigenvalue)));
        }
        if self.max_tail_population >= policy.tail_tolerance {
            return Err(Error::Truncation {
                tail: self.max_tail_population,
                tolerance: policy.tail_tolerance,
            });
        }
        Ok(())
    }
}

/// Evolves ρ under L, recording the state and invariant diagnostics at
/// each requested time.
pub fn evolve_density(
    l: &SuperOperator,
    rho0: &DensityMatrix,
    times: &[f64],
    prop: Propagator,
    policy: &TruncationPolicy,
) -> Result<Evolution> {
    let space = rho0.space();
    let x0 = rho0.vectorized();
    let n2 = space.liouville_dim();
    let mut states = Vec::with_capacity(times.len());
    let mut diag = EvolutionDiagnostics {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let h0 = rho0.hermiticity_error();
    let tr0 = rho0.trace();
    let mut full = vec![ZERO; n2];
    propagate(l.matrix(), &x0, times, prop, |_, idx, y| {
        for (&i, &v) in idx.iter().zip(y) {
            full[i] = v;
        }
        let m = space.unvectorize(&full);
        let rho = DensityMatrix::from_raw(space, m);
        diag.max_trace_drift = diag.max_trace_drift.max((rho.trace() - tr0).abs());
        diag.max_hermiticity_drift = diag
            .max_hermiticity_drift
            .max((rho.hermiticity_error() - h0).abs());
        diag.min_eigenvalue = diag.min_eigenvalue.min(rho.min_eigenvalue());
        diag.max_tail_population = diag
            .max_tail_population
            .max(rho.tail_population(policy.tail_levels));
        states.push(rho);
        Ok(())
    })?;
    Ok(Evolution {
        times: times.to_vec(),
        states,
        diagnostics: diag,
    })
}

/// Dense density-matrix helper used by oracles: |n⟩⟨m|.
pub fn dyad_matrix(space: FockSpace, n: usize, m: usize) -> DMatrix<Complex64> {
    let mut r = DMatrix::zeros(space.dim(), space.dim());
    r[(n, m)] = Complex64::new(1.0, 0.0);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::Model;

    fn model(mu: f64, chi: f64, fb: bool) -> Model {
        let p = LaserParams::from_chi(1.0, mu, chi).unwrap();
        let f = if fb {
            FeedbackParams::optimal(p.c, 1.0).unwrap()
        } else {
            FeedbackParams::disabled()
        };
        Model::new(p, f, TruncationPolicy::default()).unwrap()
    }

    #[test]
    fn grids() {
        let g = log_refined_grid(10.0, 2048);
        assert_eq!(g[0], 0.0);
        assert!((g[2047] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g[1] - g[0] < g[2047] - g[2046]);
    }

    #[test]
    fn g1_starts_at_one_and_decays_like_phase_diffusion() {
        let m = model(15.0, 0.0, false);
        let times: Vec<f64> = (0..=30).map(|k| k as f64 * 0.2).collect();
        let tr = g1_trace(&m.generator, &m.rho_ss, &times, Propagator::default()).unwrap();
        tr.check_invariants().unwrap();
        for (t, v) in tr.times.iter().zip(&tr.values) {
            let expected = (-t / 60.0).exp();
            assert!((v.norm() / expected - 1.0).abs() < 0.02, "t={t} {v}");
        }
    }

    #[test]
    fn collisions_only_matches_number_basis_closed_form() {
        let p = LaserParams::from_collision(1.0, 15.0, 0.05).unwrap();
        let m = Model::collisions_only(p, TruncationPolicy::default()).unwrap();
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.5).collect();
        let tr = g1_trace(&m.generator, &m.rho_ss, &times, Propagator::default()).unwrap();
        for (t, v) in tr.times.iter().zip(&tr.values) {
            let x = Complex64::new(0.0, 2.0 * p.c * t).exp();
            let exact = (-(Complex64::new(1.0, 0.0) - x) * 15.0).exp();
            assert!((v - exact).norm() < 1e-6, "t={t} {v} {exact}");
        }
    }

    #[test]
    fn sector_exponential_matches_adaptive() {
        let m = model(15.0, 20.0, false);
        let times = uniform_grid(0.01, 101);
        let a = g1_trace(&m.generator, &m.rho_ss, &times, Propagator::default()).unwrap();
        let b = g1_trace(&m.generator, &m.rho_ss, &times, Propagator::SectorExponential).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-6);
        }
        let bad = log_refined_grid(1.0, 50);
        assert!(g1_trace(&m.generator, &m.rho_ss, &bad, Propagator::SectorExponential).is_err());
    }

    #[test]
    fn resolvent_standard_linewidth() {
        let m = model(60.0, 0.0, false);
        let r = coherence(&m, Method::Resolvent).unwrap();
        assert!((r.tau_coh / 120.0 - 1.0).abs() < 0.02, "{r:?}");
        assert_eq!(r.iterations, 0);
        assert_eq!(r.linewidth, 1.0 / r.tau_coh);
    }

    #[test]
    fn omega0_of_collisions_is_two_mu_c() {
        let p = LaserParams::from_collision(1.0, 15.0, 0.4).unwrap();
        let m = Model::collisions_only(p, TruncationPolicy::default()).unwrap();
        let w = omega0(&m.generator, &m.rho_ss).unwrap();
        assert!((w / (2.0 * 15.0 * 0.4) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn optimal_feedback_has_no_rotation() {
        let m = model(30.0, 50.0, true);
        let cf = central_frequency(&m.generator, &m.rho_ss, 100, false).unwrap();
        assert!(cf.omega_bar.abs() < 1e-6);
    }

    #[test]
    fn quadrature_of_exact_exponential() {
        let times = log_refined_grid(4000.0, 4096);
        let tr = CoherenceTrace {
            values: times.iter().map(|t| Complex64::new((-t / 240.0).exp(), 0.0)).collect(),
            times,
            params: None,
            omega_bar: None,
            revival_period: None,
            tail_population: 0.0,
        };
        let tau = coherence_time_quadrature(&tr).unwrap();
        assert!((tau / 120.0 - 1.0).abs() < 1e-4, "{tau}");
    }

    #[test]
    fn quadrature_rejects_undecayed_trace() {
        let times = uniform_grid(0.1, 10);
        let tr = CoherenceTrace {
            values: vec![Complex64::new(1.0, 0.0); 10],
            times,
            params: None,
            omega_bar: None,
            revival_period: None,
            tail_population: 0.0,
        };
        assert!(matches!(coherence_time_quadrature(&tr), Err(Error::Coverage(_))));
    }

    #[test]
    fn g2_values() {
        let s = FockSpace::new(12).unwrap();
        let n4 = DensityMatrix::number_state(s, 4).unwrap();
        assert!((g2_zero(&n4).unwrap() - 0.75).abs() < 1e-14);
        let big = FockSpace::new(80).unwrap();
        let coh = DensityMatrix::coherent(big, Complex64::new(2.0, -1.0));
        assert!((g2_zero(&coh).unwrap() - 1.0).abs() < 1e-10);
        let vac = DensityMatrix::number_state(s, 0).unwrap();
        assert!(matches!(g2_zero(&vac), Err(Error::ZeroIntensity)));
    }

    #[test]
    fn classification() {
        let p = LaserParams::from_chi(1.0, 60.0, 0.0).unwrap();
        let c = classify_coherence(1.0 / 120.0, &p).unwrap();
        assert!(c.bose_degenerate);
        assert!((c.ratio - 1.0 / 7200.0).abs() < 1e-15);
        assert!(classify_coherence(0.0, &p).is_err());
    }

    #[test]
    fn density_evolution_keeps_invariants() {
        let m = model(10.0, 5.0, false);
        let rho0 = DensityMatrix::coherent(m.space, Complex64::new(10f64.sqrt(), 0.0));
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * 0.1).collect();
        let ev = evolve_density(&m.generator, &rho0, &times, Propagator::default(), &m.policy).unwrap();
        ev.diagnostics.check(&m.policy).unwrap();
        assert_eq!(ev.states.len(), 9);
    }
}
