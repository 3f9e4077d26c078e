use std::f64::consts::PI;
use std::fs;

use atomlaser::analytic::{linewidth_analytic, linewidth_regimes, mean_rotation, Regime};
use atomlaser::checks::run_invariant_suite;
use atomlaser::coherence::{
    classify_coherence, coherence, evolve_density, model_g1_trace, CoherenceResult, Method,
    Propagator,
};
use atomlaser::fock::DensityMatrix;
use atomlaser::io::{self, format_float};
use atomlaser::liouvillian::{
    effective_chi, FeedbackParams, LaserParams, Model, TruncationPolicy,
};
use atomlaser::phase_space::{q_function, QGrid};
use atomlaser::qnd::{design_report, DesignInput};
use atomlaser::spectrum::{fit_line, model_spectrum, LineShape};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Config, MethodChoice};
use crate::{CliError, UsageError};

fn policy(cfg: &Config) -> Result<TruncationPolicy, UsageError> {
    let mut p = TruncationPolicy::default();
    if let Some(pad) = cfg.dim_pad {
        if !(pad > 0.0) {
            return Err(UsageError(format!("--dim-pad must be positive, got {pad}")));
        }
        p.pad_coefficient = pad;
    }
    Ok(p)
}

fn laser(mu: f64, chi: f64) -> Result<LaserParams, CliError> {
    LaserParams::from_chi(1.0, mu, chi).map_err(CliError::from)
}

fn feedback_for(p: &LaserParams, on: bool, eta: f64) -> Result<FeedbackParams, CliError> {
    if on {
        Ok(FeedbackParams::optimal(p.c, eta)?)
    } else {
        Ok(FeedbackParams::disabled())
    }
}

fn prepare_out(cfg: &Config) -> Result<std::path::PathBuf, CliError> {
    let out = cfg.out();
    fs::create_dir_all(&out).map_err(|e| CliError::Numerical(atomlaser::Error::from(e)))?;
    Ok(out)
}

fn tag(on: bool) -> &'static str {
    if on {
        "on"
    } else {
        "off"
    }
}

struct SweepRow {
    chi: f64,
    feedback: bool,
    regime: Regime,
    analytic: f64,
    numeric: Option<CoherenceResult>,
    quadrature: Option<CoherenceResult>,
    error: Option<String>,
}

fn sweep_point(
    mu: f64,
    chi: f64,
    on: bool,
    eta: f64,
    method: MethodChoice,
    pol: TruncationPolicy,
) -> SweepRow {
    let mut row = SweepRow {
        chi,
        feedback: on,
        regime: Regime::Standard,
        analytic: f64::NAN,
        numeric: None,
        quadrature: None,
        error: None,
    };
    let run = |row: &mut SweepRow| -> atomlaser::Result<()> {
        let p = LaserParams::from_chi(1.0, mu, chi)?;
        let f = if on {
            FeedbackParams::optimal(p.c, eta)?
        } else {
            FeedbackParams::disabled()
        };
        let eff = LaserParams {
            chi: effective_chi(&p, &f),
            ..p
        };
        row.regime = linewidth_regimes(&eff).regime;
        row.analytic = linewidth_analytic(&p, &f);
        if method == MethodChoice::Analytic {
            return Ok(());
        }
        let model = Model::new(p, f, pol)?;
        row.numeric = Some(coherence(&model, method.numeric())?);
        if method == MethodChoice::Both {
            row.quadrature = Some(coherence(&model, Method::Quadrature)?);
        }
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        row.error = Some(e.to_string());
    }
    row
}

pub fn sweep(cfg: &Config) -> Result<(), CliError> {
    let chis = match (&cfg.chi_grid, cfg.chi) {
        (Some(g), _) => g.values()?,
        (None, Some(c)) => vec![c],
        (None, None) => crate::config::parse_chi_grid("0.1:1e5:25")?,
    };
    let mu = cfg.mu();
    let eta = cfg.eta();
    let method = cfg.method.unwrap_or(MethodChoice::Resolvent);
    let pol = policy(cfg)?;
    let onset = 4.0 * PI * mu * mu;
    if mu.fract() != 0.0 && method != MethodChoice::Analytic && chis.iter().any(|&c| c > onset) {
        return Err(UsageError(format!(
            "χ grid reaches the revival regime (χ > 4πμ² = {onset:.4e}), which needs integer μ"
        ))
        .into());
    }
    let modes = cfg.feedback.unwrap_or(crate::config::FeedbackMode::Off).settings();
    let points: Vec<(f64, bool)> = chis
        .iter()
        .flat_map(|&c| modes.iter().map(move |&on| (c, on)))
        .collect();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(c, on)| sweep_point(mu, c, on, eta, method, pol))
        .collect();

    let out = prepare_out(cfg)?;
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
    let table = rows.iter().map(|r| {
        let numeric = r.numeric.map(|n| n.linewidth);
        let degenerate = numeric
            .or(Some(r.analytic).filter(|a| a.is_finite()))
            .and_then(|l| laser(mu, r.chi).ok().and_then(|p| classify_coherence(l, &p).ok()));
        vec![
            format_float(r.chi),
            tag(r.feedback).to_string(),
            r.regime.label().to_string(),
            format_float(r.analytic),
            opt(numeric),
            opt(r.quadrature.map(|q| q.linewidth)),
            opt(r.numeric.map(|n| n.omega_bar)),
            degenerate.map(|d| d.bose_degenerate.to_string()).unwrap_or_default(),
            r.numeric.map(|n| n.iterations.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ]
    });
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    io::write_table(
        &out.join("sweep.csv"),
        "linewidth_sweep",
        &[
            "chi",
            "feedback",
            "regime",
            "analytic_linewidth",
            "numeric_linewidth",
            "quadrature_linewidth",
            "omega_bar",
            "bose_degenerate",
            "iterations",
            "error",
        ],
        table,
        json!({
            "kappa": 1.0,
            "mu": mu,
            "eta": eta,
            "method": method,
            "feedback": cfg.feedback.unwrap_or(crate::config::FeedbackMode::Off),
            "chi_grid": chis,
            "truncation": pol,
        }),
        json!({ "points": rows.len(), "failed_points": failures }),
    )?;
    println!("{} points ({failures} failed) -> {}", rows.len(), out.join("sweep.csv").display());
    Ok(())
}

pub fn g1(cfg: &Config) -> Result<(), CliError> {
    let out = prepare_out(cfg)?;
    let pol = policy(cfg)?;
    for &on in cfg.feedback.unwrap_or(crate::config::FeedbackMode::Off).settings() {
        let p = laser(cfg.mu(), cfg.chi())?;
        let model = Model::new(p, feedback_for(&p, on, cfg.eta())?, pol)?;
        let mut tr = model_g1_trace(&model)?;
        tr.check_invariants()?;
        tr.omega_bar = Some(mean_rotation(&model.params, &model.feedback));
        let path = out.join(format!("g1_feedback_{}.csv", tag(on)));
        io::write_trace(&path, &tr)?;
        println!("{} samples -> {}", tr.times.len(), path.display());
    }
    Ok(())
}

pub fn spectrum(cfg: &Config) -> Result<(), CliError> {
    let out = prepare_out(cfg)?;
    let pol = policy(cfg)?;
    for &on in cfg.feedback.unwrap_or(crate::config::FeedbackMode::Off).settings() {
        let p = laser(cfg.mu(), cfg.chi())?;
        let model = Model::new(p, feedback_for(&p, on, cfg.eta())?, pol)?;
        let (mut sp, _, cf) = model_spectrum(&model)?;
        let peak = sp.value_at(cf.omega_bar);
        let hw = 2.0 / cf.tau.re;
        let fits: Vec<_> = [LineShape::Lorentzian, LineShape::Gaussian]
            .into_iter()
            .filter_map(|s| fit_line(&sp, s, hw).ok())
            .collect();
        if let Some((lo, hi)) = cfg.omega_range {
            sp = sp.restricted(lo * p.kappa, hi * p.kappa);
        }
        let path = out.join(format!("spectrum_feedback_{}.csv", tag(on)));
        io::write_spectrum(
            &path,
            &sp,
            &p,
            json!({
                "kappa": p.kappa,
                "mu": p.mu,
                "chi": p.chi,
                "feedback": model.feedback,
                "truncation": pol,
                "omega_range": cfg.omega_range,
            }),
        )?;
        io::write_json(
            &out.join(format!("spectrum_feedback_{}_summary.json", tag(on))),
            &json!({
                "schema_version": io::SCHEMA_VERSION,
                "code_version": io::CODE_VERSION,
                "kind": "spectrum_summary",
                "central_frequency": cf,
                "peak_intensity": peak,
                "fits": fits,
            }),
        )?;
        println!("P(ω̄) = {peak:.4} -> {}", path.display());
    }
    Ok(())
}

pub fn qfunc(cfg: &Config) -> Result<(), CliError> {
    let out = prepare_out(cfg)?;
    let pol = policy(cfg)?;
    let t = cfg.time.unwrap_or(0.8);
    if !(t >= 0.0) {
        return Err(UsageError(format!("--time must be ≥ 0, got {t}")).into());
    }
    for &on in cfg.feedback.unwrap_or(crate::config::FeedbackMode::Off).settings() {
        let p = laser(cfg.mu(), cfg.chi())?;
        let model = Model::new(p, feedback_for(&p, on, cfg.eta())?, pol)?;
        let rho0 = DensityMatrix::coherent(model.space, Complex64::new(p.mu.sqrt(), 0.0));
        let ev = evolve_density(&model.generator, &rho0, &[0.0, t], Propagator::default(), &pol)?;
        ev.diagnostics.check(&pol)?;
        let rho = &ev.states[1];
        let q = q_function(rho, &QGrid::default_for(model.space.dim()))?;
        let moments = q.number_phase_moments();
        let path = out.join(format!("qfunc_feedback_{}.csv", tag(on)));
        io::write_q_field(
            &path,
            &q,
            json!({
                "kappa": p.kappa,
                "mu": p.mu,
                "chi": p.chi,
                "feedback": model.feedback,
                "kappa_t": t,
                "initial_state": "coherent",
                "moments": moments,
                "evolution": ev.diagnostics,
            }),
        )?;
        println!("C(n,φ) = {:.4e} -> {}", moments.covariance, path.display());
    }
    Ok(())
}

pub fn design(cfg: &Config) -> Result<(), CliError> {
    let input = cfg.design.unwrap_or_else(DesignInput::typical_trap);
    let report = design_report(&input)?;
    let out = prepare_out(cfg)?;
    let path = out.join("design.json");
    io::write_json(
        &path,
        &json!({
            "schema_version": io::SCHEMA_VERSION,
            "code_version": io::CODE_VERSION,
            "kind": "design_report",
            "params": input,
            "report": report,
        }),
    )?;
    println!(
        "θ = {:.3e} rad, M = {:.3e} s⁻¹ at {:.3e} W/m², loss ratio {:.3e} -> {}",
        report.theta,
        report.measurement_m,
        report.required_intensity,
        report.loss_ratio,
        path.display()
    );
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

/// Runs the invariant suite; returns whether every check passed.
pub fn check(cfg: &Config) -> Result<bool, CliError> {
    let results = run_invariant_suite();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let all = results.iter().all(|r| r.passed);
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).map_err(|e| CliError::Numerical(e.into()))?;
        io::write_json(
            &dir.join("check.json"),
            &json!({
                "schema_version": io::SCHEMA_VERSION,
                "code_version": io::CODE_VERSION,
                "kind": "invariant_suite",
                "results": results,
            }),
        )?;
    }
    Ok(all)
}
