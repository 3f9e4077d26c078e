//! A quick self-test suite over the library's invariants, run by the
//! command-line `check` subcommand.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{ou_moment_integrator, ou_phase_moments, Linearization};
use crate::coherence::{evolve_density, model_g1_trace, uniform_grid, Propagator};
use crate::error::Result;
use crate::fock::{
    anticommutator_super, creation, gain_anticommutator_inverse, gain_integral_identity_check,
    DensityMatrix, FockSpace,
};
use crate::liouvillian::{FeedbackParams, LaserParams, Model, TruncationPolicy};
use crate::phase_space::{q_function, QGrid};
use crate::qnd::{dimensional_audit, Dimension};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, r: Result<(bool, String)>) -> CheckOutcome {
    let (passed, detail) = r.unwrap_or_else(|e| (false, e.to_string()));
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn test_model() -> Result<Model> {
    let p = LaserParams::from_chi(1.0, 15.0, 10.0)?;
    let f = FeedbackParams::new(0.3, 0.2, 0.8)?;
    Model::new(p, f, TruncationPolicy::default())
}

/// Deterministic Hermitian, non-positive test matrix.
fn hermitian_probe(dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |n, m| {
        let (lo, hi) = (n.min(m) as f64, n.max(m) as f64);
        let re = ((lo + 1.0) * 0.37 + hi * 0.11).sin();
        let im = if n == m { 0.0 } else { ((lo + 2.0) * 0.23 - hi * 0.17).cos() };
        Complex64::new(re, if n < m { im } else { -im })
    })
}

pub fn run_invariant_suite() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let model = test_model();

    out.push(outcome(
        "generator annihilates the trace",
        model.as_ref().map_err(Clone::clone).map(|m| {
            let r = m.generator.trace_residual();
            (r < 1e-14, format!("relative residual {r:.3e}"))
        }),
    ));

    out.push(outcome(
        "generator preserves Hermiticity",
        model.as_ref().map_err(Clone::clone).and_then(|m| {
            let x = hermitian_probe(m.space.dim());
            let y = m.generator.apply(&x)?;
            let err = (&y - y.adjoint()).norm() / y.norm();
            Ok((err < 1e-13, format!("‖L(X) − L(X)†‖/‖L(X)‖ = {err:.3e}")))
        }),
    ));

    out.push(outcome(
        "stationary state is stationary",
        model.as_ref().map_err(Clone::clone).map(|m| {
            let r = m.stationarity_residual();
            (r < 1e-12, format!("relative residual {r:.3e}"))
        }),
    ));

    out.push(outcome("anticommutator inverse", (|| {
        let s = FockSpace::new(12)?;
        let x = hermitian_probe(12);
        let ax = anticommutator_super(&creation(s))?.apply(&x)?;
        let back = gain_anticommutator_inverse(&ax);
        // the top level is excluded: truncated aa† vanishes there
        let err = (0..11)
            .flat_map(|n| (0..11).map(move |m| (n, m)))
            .map(|(n, m)| (back[(n, m)] - x[(n, m)]).norm())
            .fold(0.0, f64::max);
        Ok((err < 1e-13, format!("max deviation {err:.3e}")))
    })()));

    out.push(outcome("saturated gain integral identity", (|| {
        let c = gain_integral_identity_check(FockSpace::new(10)?, 20_000)?;
        Ok((
            c.relative_error < 1e-6,
            format!("relative error {:.3e}", c.relative_error),
        ))
    })()));

    out.push(outcome(
        "density evolution invariants",
        model.as_ref().map_err(Clone::clone).and_then(|m| {
            let rho0 = DensityMatrix::coherent(m.space, Complex64::new(15f64.sqrt(), 0.0));
            let ev = evolve_density(
                &m.generator,
                &rho0,
                &uniform_grid(0.1, 11),
                Propagator::default(),
                &m.policy,
            )?;
            let d = ev.diagnostics;
            Ok(match d.check(&m.policy) {
                Ok(()) => (true, format!("{d:?}")),
                Err(e) => (false, e.to_string()),
            })
        }),
    ));

    out.push(outcome(
        "g1 normalization and bound",
        model.as_ref().map_err(Clone::clone).and_then(|m| {
            let tr = model_g1_trace(m)?;
            Ok(match tr.check_invariants() {
                Ok(()) => (true, format!("{} samples", tr.times.len())),
                Err(e) => (false, e.to_string()),
            })
        }),
    ));

    out.push(outcome("phase moments match closed forms", (|| {
        let p = LaserParams::from_chi(1.0, 60.0, 30.0)?;
        let f = FeedbackParams::disabled();
        let grid: Vec<f64> = (0..=40).map(|k| 0.01 * 2000f64.powf(k as f64 / 40.0)).collect();
        let num = ou_moment_integrator(&p, &f, &grid, Linearization::LargeMu)?;
        let err = num
            .iter()
            .zip(&grid)
            .map(|(m, &t)| {
                let c = ou_phase_moments(&p, &f, t);
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
                rel(m.phase.phase_variance, c.phase_variance)
                    .max(rel(m.phase.mean_phase, c.mean_phase))
                    .max(rel(m.phase.number_phase_covariance, c.number_phase_covariance))
            })
            .fold(0.0, f64::max);
        Ok((err < 1e-6, format!("max relative deviation {err:.3e}")))
    })()));

    out.push(outcome("Q function normalization", (|| {
        let pol = TruncationPolicy::default();
        let p = LaserParams::from_chi(1.0, 15.0, 0.0)?;
        let rho = crate::liouvillian::steady_state(&p, pol.space(15.0)?, &pol)?;
        let q = q_function(&rho, &QGrid::default_for(rho.space().dim()))?;
        Ok((
            (q.integral - 1.0).abs() < 0.01 && q.min_raw >= -1e-12,
            format!("∫Q = {:.6}, min {:.3e}", q.integral, q.min_raw),
        ))
    })()));

    let (td, md) = dimensional_audit();
    out.push(CheckOutcome {
        name: "probe formulas are dimensionally consistent".into(),
        passed: td == Dimension::NONE && md == Dimension(0, 0, -1),
        detail: format!("θ ~ {td:?}, M ~ {md:?}"),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_invariant_suite() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn probe_is_hermitian() {
        let x = hermitian_probe(7);
        assert!((&x - x.adjoint()).norm() == 0.0);
    }
}
