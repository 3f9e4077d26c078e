//! Husimi Q function on amplitude grids and the Q-function form of the
//! saturated gain.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, saturated_gain, DensityMatrix};

/// Rectangular grid in (Re α, Im α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl QGrid {
    /// `points × points` samples over `[−half_width, half_width]²`.
    pub fn square(half_width: f64, points: usize) -> Result<Self> {
        if points < 2 || !(half_width > 0.0) {
            return Err(Error::param("grid", "need ≥ 2 points and a positive half width"));
        }
        let axis: Vec<f64> = (0..points)
            .map(|k| -half_width + 2.0 * half_width * k as f64 / (points - 1) as f64)
            .collect();
        Ok(QGrid {
            re: axis.clone(),
            im: axis,
        })
    }

    /// 201 × 201 over the square of half width √dim.
    pub fn default_for(dim: usize) -> Self {
        Self::square((dim as f64).sqrt(), 201).expect("valid default grid")
    }

    /// Radius of the largest origin-centred disc inside the grid.
    pub fn inner_radius(&self) -> f64 {
        let r = |v: &[f64]| v.first().unwrap().abs().min(v.last().unwrap().abs());
        r(&self.re).min(r(&self.im))
    }

    fn cell_area(&self) -> f64 {
        let d = |v: &[f64]| (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
        d(&self.re) * d(&self.im)
    }
}

/// Sampled Q(α) = ⟨α|ρ|α⟩/π. `values[j * re.len() + i]` belongs to
/// `(re[i], im[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QField {
    pub grid: QGrid,
    pub values: Vec<f64>,
    /// ∫Q d²α on the grid.
    pub integral: f64,
    /// Samples below −1e−12 that were clipped to zero.
    pub clipped: usize,
    pub min_raw: f64,
    pub dim: usize,
}

fn overlap(rho: &DMatrix<Complex64>, alpha: Complex64) -> f64 {
    let c = coherent_amplitudes(rho.nrows(), alpha);
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..c.len() {
        if c[m].norm_sqr() < 1e-40 {
            continue;
        }
        let mut col = Complex64::new(0.0, 0.0);
        for n in 0..c.len() {
            col += c[n].conj() * rho[(n, m)];
        }
        acc += col * c[m];
    }
    acc.re / PI
}

/// Evaluates ⟨α|X|α⟩/π for an arbitrary matrix X (not clipped).
pub fn q_of_matrix(x: &DMatrix<Complex64>, alpha: Complex64) -> f64 {
    overlap(x, alpha)
}

/// Q function of `rho` on `grid`.
///
/// The grid must cover |α|² up to dim − 5√dim and the resulting field must
/// integrate to one within 1%.
pub fn q_function(rho: &DensityMatrix, grid: &QGrid) -> Result<QField> {
    let dim = rho.space().dim();
    let needed = dim as f64 - 5.0 * (dim as f64).sqrt();
    let r = grid.inner_radius();
    if r * r < needed {
        return Err(Error::Coverage(format!(
            "grid radius² {:.3} below dim − 5√dim = {needed:.3}",
            r * r
        )));
    }
    let m = rho.matrix();
    let nx = grid.re.len();
    let raw: Vec<f64> = grid
        .im
        .par_iter()
        .flat_map_iter(|&y| grid.re.iter().map(move |&x| overlap(m, Complex64::new(x, y))))
        .collect();
    debug_assert_eq!(raw.len(), nx * grid.im.len());
    let min_raw = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut clipped = 0;
    let values: Vec<f64> = raw
        .into_iter()
        .map(|v| {
            if v < -1e-12 {
                clipped += 1;
                0.0
            } else {
                v.max(0.0)
            }
        })
        .collect();
    let integral = values.iter().sum::<f64>() * grid.cell_area();
    if (integral - 1.0).abs() > 0.01 {
        return Err(Error::Coverage(format!(
            "Q integrates to {integral:.4} on the grid, not 1 within 1%"
        )));
    }
    Ok(QField {
        grid: grid.clone(),
        values,
        integral,
        clipped,
        min_raw,
        dim,
    })
}

/// Number-phase statistics of a Q distribution, with the phase measured
/// from its circular mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QMoments {
    pub mean_number: f64,
    pub mean_phase: f64,
    pub number_variance: f64,
    pub phase_variance: f64,
    pub covariance: f64,
}

impl QField {
    pub fn number_phase_moments(&self) -> QMoments {
        let nx = self.grid.re.len();
        let mut w = 0.0;
        let mut s = Complex64::new(0.0, 0.0);
        for (k, &q) in self.values.iter().enumerate() {
            let a = Complex64::new(self.grid.re[k % nx], self.grid.im[k / nx]);
            if a.norm() > 0.0 {
                s += a / a.norm() * q;
            }
            w += q;
        }
        let phi0 = s.arg();
        let (mut mn, mut mp) = (0.0, 0.0);
        let pts: Vec<(f64, f64, f64)> = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &q)| {
                let a = Complex64::new(self.grid.re[k % nx], self.grid.im[k / nx]);
                let mut d = a.arg() - phi0;
                d = (d + PI).rem_euclid(2.0 * PI) - PI;
                (a.norm_sqr(), d, q / w)
            })
            .collect();
        for &(n, p, q) in &pts {
            mn += n * q;
            mp += p * q;
        }
        let (mut vn, mut vp, mut c) = (0.0, 0.0, 0.0);
        for &(n, p, q) in &pts {
            vn += (n - mn).powi(2) * q;
            vp += (p - mp).powi(2) * q;
            c += (n - mn) * (p - mp) * q;
        }
        QMoments {
            mean_number: mn,
            mean_phase: phi0 + mp,
            number_variance: vn,
            phase_variance: vp,
            covariance: c,
        }
    }
}

/// Result of comparing the gain's Q-function action with its derivative
/// series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCorrespondence {
    /// Relative L² mismatch of the partial sum through order k, k = 1..=max_k.
    pub mismatch: Vec<f64>,
    pub direct_norm: f64,
    pub n_range: (f64, f64),
    pub n_step: f64,
    pub angles: usize,
}

// 4th-order central stencils over offsets −3..=3
const D1: [f64; 7] = [0.0, 1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0, 0.0];
const D2: [f64; 7] = [0.0, -1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0, 0.0];
const D3: [f64; 7] = [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0];
const D4: [f64; 7] = [
    -1.0 / 6.0,
    2.0,
    -39.0 / 6.0,
    56.0 / 6.0,
    -39.0 / 6.0,
    2.0,
    -1.0 / 6.0,
];

/// Checks 𝓓[a†]𝓐[a†]⁻¹ρ ↔ Σ_{k≥1} (−∂/∂n)^k Q(n, φ) on a polar grid in
/// n = |α|², truncating the series at k = 1..=max_k (max_k ≤ 4).
pub fn gain_correspondence_check(rho: &DensityMatrix, max_k: usize) -> Result<GainCorrespondence> {
    if !(1..=4).contains(&max_k) {
        return Err(Error::param("max_k", "supported orders are 1 through 4"));
    }
    let nbar = rho.mean_number();
    if nbar < 10.0 {
        return Err(Error::param("rho", format!("needs ⟨n⟩ ≥ 10 for a smooth Q, got {nbar:.3}")));
    }
    let dim = rho.space().dim();
    let gain = saturated_gain(rho.space()).apply(rho.matrix())?;
    let width = (nbar + 1.0).sqrt();
    // 16 points per √μ, comfortably above the 8 needed to resolve k = 2
    let h = width / 16.0;
    let n_lo = (nbar + 1.0 - 10.0 * width).max(1.0 + 3.0 * h);
    // the gain action is exact below the top level, so only the state's own
    // tail limits the window
    if rho.tail_population(5) > 1e-10 {
        return Err(Error::Coverage("state populates the top Fock levels".into()));
    }
    let n_hi = (nbar + 1.0 + 10.0 * width).min(dim as f64 - 2.0 * (dim as f64).sqrt());
    if n_hi <= n_lo + 10.0 * h {
        return Err(Error::Coverage("Fock space too small for the radial grid".into()));
    }
    let count = ((n_hi - n_lo) / h).floor() as usize + 1;
    let angles = 48;
    let m = rho.matrix();

    let rows: Vec<(f64, f64, f64)> = (0..angles)
        .into_par_iter()
        .flat_map_iter(|ja| {
            let phi = 2.0 * PI * ja as f64 / angles as f64;
            // padded line of Q samples for the stencils
            let q: Vec<f64> = (0..count + 6)
                .map(|i| {
                    let n = n_lo + (i as f64 - 3.0) * h;
                    overlap(m, Complex64::from_polar(n.sqrt(), phi))
                })
                .collect();
            let direct: Vec<f64> = (0..count)
                .map(|i| {
                    let n = n_lo + i as f64 * h;
                    overlap(&gain, Complex64::from_polar(n.sqrt(), phi))
                })
                .collect();
            let mut out = Vec::with_capacity(count * max_k);
            for i in 0..count {
                let window = &q[i..i + 7];
                let deriv = |st: &[f64; 7], p: i32| -> f64 {
                    st.iter().zip(window).map(|(c, v)| c * v).sum::<f64>() / h.powi(p)
                };
                let d = [deriv(&D1, 1), deriv(&D2, 2), deriv(&D3, 3), deriv(&D4, 4)];
                let mut partial = 0.0;
                for (k, dk) in d.iter().enumerate().take(max_k) {
                    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                    partial += sign * dk;
                    out.push((direct[i], partial, k as f64));
                }
            }
            out.into_iter()
        })
        .collect();

    let weight = h * (2.0 * PI / angles as f64) / 2.0;
    let mut err = vec![0.0; max_k];
    let mut norm = 0.0;
    for &(direct, partial, k) in &rows {
        let k = k as usize;
        err[k] += (direct - partial).powi(2) * weight;
        if k == 0 {
            norm += direct * direct * weight;
        }
    }
    let norm = norm.sqrt();
    Ok(GainCorrespondence {
        mismatch: err.iter().map(|e| e.sqrt() / norm).collect(),
        direct_norm: norm,
        n_range: (n_lo, n_lo + (count - 1) as f64 * h),
        n_step: h,
        angles,
    })
}

/// ∫⟨α|X|α⟩/π d²α on a grid (equals Tr X for an adequate grid).
pub fn q_integral_of_matrix(x: &DMatrix<Complex64>, grid: &QGrid) -> f64 {
    let vals: Vec<f64> = grid
        .im
        .par_iter()
        .flat_map_iter(|&y| grid.re.iter().map(move |&re| overlap(x, Complex64::new(re, y))))
        .collect();
    vals.iter().sum::<f64>() * grid.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::liouvillian::{steady_state, LaserParams, TruncationPolicy};

    #[test]
    fn coherent_state_q_is_gaussian() {
        let s = FockSpace::new(55).unwrap();
        let beta = Complex64::new(2.0, 1.5);
        let rho = DensityMatrix::coherent(s, beta);
        let grid = QGrid::default_for(55);
        let f = q_function(&rho, &grid).unwrap();
        assert!((f.integral - 1.0).abs() < 1e-3);
        for &(x, y) in &[(2.0, 1.5), (0.0, 0.0), (3.1, -0.4)] {
            let a = Complex64::new(x, y);
            let expected = (-(a - beta).norm_sqr()).exp() / PI;
            assert!((q_of_matrix(rho.matrix(), a) - expected).abs() < 1e-10);
        }
        assert_eq!(f.clipped, 0);
    }

    #[test]
    fn coverage_is_enforced() {
        let s = FockSpace::new(55).unwrap();
        let rho = DensityMatrix::coherent(s, Complex64::new(3.0, 0.0));
        let small = QGrid::square(3.0, 51).unwrap();
        assert!(matches!(q_function(&rho, &small), Err(Error::Coverage(_))));
    }

    #[test]
    fn steady_state_q_is_rotationally_symmetric() {
        let pol = TruncationPolicy::default();
        let p = LaserParams::from_chi(1.0, 15.0, 0.0).unwrap();
        let rho = steady_state(&p, pol.space(15.0).unwrap(), &pol).unwrap();
        for r in [2.0, 3.9, 5.0] {
            let vals: Vec<f64> = (0..36)
                .map(|k| q_of_matrix(rho.matrix(), Complex64::from_polar(r, k as f64 * 0.17)))
                .collect();
            let mx = vals.iter().cloned().fold(f64::MIN, f64::max);
            let mn = vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!((mx - mn) / mx < 1e-6);
        }
    }

    #[test]
    fn gain_series_converges_for_coherent_state() {
        let s = FockSpace::new(55).unwrap();
        let rho = DensityMatrix::coherent(s, Complex64::new(15f64.sqrt(), 0.0));
        let c = gain_correspondence_check(&rho, 3).unwrap();
        // values from integrating (1 + d/dn)w = Q along rays
        for (m, want) in c.mismatch.iter().zip([0.2363, 0.07514, 0.02940]) {
            assert!((m / want - 1.0).abs() < 0.02, "{:?}", c.mismatch);
        }
        assert!(c.mismatch[0] > c.mismatch[1] && c.mismatch[1] > c.mismatch[2]);
    }

    #[test]
    fn gain_action_is_traceless_on_grid() {
        let pol = TruncationPolicy::default();
        let p = LaserParams::from_chi(1.0, 15.0, 0.0).unwrap();
        let sp = pol.space(15.0).unwrap();
        let rho = steady_state(&p, sp, &pol).unwrap();
        let g = saturated_gain(sp).apply(rho.matrix()).unwrap();
        let grid = QGrid::default_for(55);
        assert!(q_integral_of_matrix(&g, &grid).abs() < 1e-6);
    }
}
