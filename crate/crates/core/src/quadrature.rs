//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued
//! complex integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Budget of integrand evaluations.
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            atol: 1e-12,
            rtol: 1e-9,
            max_evals: 15 * 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<Complex64>,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    error: f64,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn gk15<F>(f: &mut F, a: f64, b: f64, len: usize) -> Panel
where
    F: FnMut(f64) -> Vec<Complex64>,
{
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut kron = vec![Complex64::new(0.0, 0.0); len];
    let mut gauss = vec![Complex64::new(0.0, 0.0); len];
    let mut add = |x: f64, wk: f64, wg: f64, kron: &mut [Complex64], gauss: &mut [Complex64]| {
        let fx = f(x);
        assert_eq!(fx.len(), len, "integrand length changed between evaluations");
        for i in 0..len {
            kron[i] += fx[i] * wk;
            if wg != 0.0 {
                gauss[i] += fx[i] * wg;
            }
        }
    };
    add(c, WGK[7], WG[3], &mut kron, &mut gauss);
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        let dx = hw * XGK[j];
        add(c - dx, WGK[j], wg, &mut kron, &mut gauss);
        add(c + dx, WGK[j], wg, &mut kron, &mut gauss);
    }
    for i in 0..len {
        kron[i] *= hw;
        gauss[i] *= hw;
    }
    let diff: Vec<Complex64> = kron.iter().zip(&gauss).map(|(k, g)| k - g).collect();
    Panel {
        a,
        b,
        error: norm(&diff),
        value: kron,
    }
}

/// Integrates a vector-valued function over the finite interval `[a, b]`.
///
/// The error criterion is on the Euclidean norm of the vector:
/// `error ≤ max(atol, rtol · ‖value‖)`. Exhausting the evaluation budget
/// before meeting it is reported as [`Error::Quadrature`].
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Vec<Complex64>,
{
    let len = f(a).len();
    let mut evals = 1;
    let mut panels = vec![gk15(&mut f, a, b, len)];
    evals += 15;
    loop {
        let mut value = vec![Complex64::new(0.0, 0.0); len];
        let mut error = 0.0;
        for p in &panels {
            for i in 0..len {
                value[i] += p.value[i];
            }
            error += p.error;
        }
        let target = opts.atol.max(opts.rtol * norm(&value));
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                evaluations: evals,
            });
        }
        if evals + 30 > opts.max_evals {
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: target,
                evaluations: evals,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| {
                if p.error > acc.1 {
                    (i, p.error)
                } else {
                    acc
                }
            });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: target,
                evaluations: evals,
            });
        }
        panels.push(gk15(&mut f, p.a, mid, len));
        panels.push(gk15(&mut f, mid, p.b, len));
        evals += 30;
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<(Complex64, f64)>
where
    F: FnMut(f64) -> Complex64,
{
    let r = integrate_vec(|x| vec![f(x)], a, b, opts)?;
    Ok((r.value[0], r.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate(
            |x| Complex64::new(x.powi(5) - 2.0 * x, 0.0),
            0.0,
            2.0,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((v.re - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand() {
        let (v, _) = integrate(
            |x| Complex64::new((-400.0 * x * x).exp(), 0.0),
            -1.0,
            3.0,
            QuadOptions::default(),
        )
        .unwrap();
        let exact = (std::f64::consts::PI / 400.0).sqrt();
        assert!((v.re - exact).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let r = integrate(
            |x| Complex64::new((50.0 * x).sin() * (-x).exp(), 0.0),
            0.0,
            40.0,
            QuadOptions {
                atol: 1e-14,
                rtol: 1e-12,
                max_evals: 31,
            },
        );
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
