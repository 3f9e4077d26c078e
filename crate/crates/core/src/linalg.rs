//! Dense helpers on small invariant blocks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

/// Largest block handed to the dense LU factorization.
pub const MAX_DIRECT_BLOCK: usize = 6000;

/// Solves `A x = b` for sparse `A`, factoring only the block of `A`
/// reachable from the support of `b`. Returns the solution and the
/// relative residual `‖b − A x‖ / ‖b‖` measured with the sparse operator.
pub fn solve_sparse(a: &CsrMatrix, b: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); n], 0.0));
    }
    let idx = a.reachable_from(&crate::sparse::support(b));
    if idx.len() > MAX_DIRECT_BLOCK {
        return Err(Error::Solver(format!(
            "invariant block of size {} exceeds direct factorization limit {}",
            idx.len(),
            MAX_DIRECT_BLOCK
        )));
    }
    let block = a.restrict(&idx);
    let dense = block.to_dense();
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| b[i]));
    let lu = dense.clone().lu();
    let mut xb = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular system".into()))?;
    // one step of iterative refinement
    let r = &rhs - &dense * &xb;
    if let Some(dx) = lu.solve(&r) {
        xb += dx;
    }
    if xb.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Solver("non-finite solution".into()));
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (k, &i) in idx.iter().enumerate() {
        x[i] = xb[k];
    }
    let ax = a.mul_vec(&x);
    let res: f64 = ax
        .iter()
        .zip(b)
        .map(|(u, v)| (u - v).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok((x, res / bnorm))
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled until its 1-norm is below 1/2; 20 Taylor terms
/// then bound the truncation error far below double precision.
pub fn expm(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 2f64.powi(-squarings);
    let a = m * Complex64::new(scale, 0.0);
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &a * Complex64::new(1.0 / k as f64, 0.0);
        result += &term;
        if one_norm(&term) < 1e-18 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let w = 3.7;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(-w, 0.0),
                Complex64::new(w, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let e = expm(&m);
        assert!((e[(0, 0)].re - w.cos()).abs() < 1e-13);
        assert!((e[(1, 0)].re - w.sin()).abs() < 1e-13);
        assert!((e[(0, 1)].re + w.sin()).abs() < 1e-13);
    }

    #[test]
    fn expm_of_large_imaginary_diagonal() {
        let d = [Complex64::new(-0.3, 4.0e4), Complex64::new(-2.0, -1.2e3)];
        let m = DMatrix::from_diagonal(&DVector::from_vec(d.to_vec()));
        let e = expm(&m);
        for i in 0..2 {
            assert!((e[(i, i)] - d[i].exp()).norm() < 1e-10);
        }
    }

    #[test]
    fn sparse_solve_on_block() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, Complex64::new(2.0, 1.0)),
                (0, 1, Complex64::new(1.0, 0.0)),
                (1, 1, Complex64::new(0.0, 3.0)),
                (2, 2, Complex64::new(1.0, 0.0)),
            ],
        );
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)];
        let (x, res) = solve_sparse(&a, &b).unwrap();
        assert!(res < 1e-14);
        assert_eq!(x[2], Complex64::new(0.0, 0.0));
        assert!((x[1] - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(-0.25, 0.0),
        ]));
        assert!((min_hermitian_eigenvalue(&m) + 0.25).abs() < 1e-15);
    }
}
