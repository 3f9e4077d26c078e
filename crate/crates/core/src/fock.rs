//! Truncated Fock-space operator algebra and Lindblad superoperators.
//!
//! Density matrices are vectorized by column stacking: the dyad |n⟩⟨m|
//! sits at index `n + m·dim`. With this convention left multiplication by
//! `X` is `I ⊗ X` and right multiplication is `Xᵀ ⊗ I`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::{self, QuadOptions};
use crate::sparse::CsrMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Number of retained Fock levels, `0..dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", format!("need at least 2 levels, got {dim}")));
        }
        Ok(FockSpace { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the vectorized (Liouville) space.
    pub fn liouville_dim(&self) -> usize {
        self.dim * self.dim
    }

    /// Column-stacked index of the dyad |n⟩⟨m|.
    #[inline]
    pub fn index(&self, n: usize, m: usize) -> usize {
        n + m * self.dim
    }

    /// Inverse of [`FockSpace::index`].
    #[inline]
    pub fn dyad(&self, k: usize) -> (usize, usize) {
        (k % self.dim, k / self.dim)
    }

    pub fn vectorize(&self, m: &DMatrix<Complex64>) -> Vec<Complex64> {
        // nalgebra stores column-major, which is exactly column stacking
        m.as_slice().to_vec()
    }

    pub fn unvectorize(&self, v: &[Complex64]) -> DMatrix<Complex64> {
        DMatrix::from_column_slice(self.dim, self.dim, v)
    }

    fn check(&self, other: &FockSpace) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }
}

/// A linear operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: FockSpace,
    entries: DMatrix<Complex64>,
}

impl Operator {
    pub fn new(space: FockSpace, entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != space.dim || entries.ncols() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(Operator { space, entries })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            space: self.space,
            entries: self.entries.adjoint(),
        }
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.space.check(&other.space)?;
        Ok(Operator {
            space: self.space,
            entries: &self.entries * &other.entries,
        })
    }

    pub fn diagonal(space: FockSpace, f: impl Fn(usize) -> f64) -> Operator {
        let d = DVector::from_iterator(space.dim, (0..space.dim).map(|n| Complex64::new(f(n), 0.0)));
        Operator {
            space,
            entries: DMatrix::from_diagonal(&d),
        }
    }

    fn nonzeros(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::new();
        for c in 0..self.space.dim {
            for r in 0..self.space.dim {
                let v = self.entries[(r, c)];
                if v != ZERO {
                    out.push((r, c, v));
                }
            }
        }
        out
    }
}

/// Annihilation operator: `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(space: FockSpace) -> Operator {
    let mut m = DMatrix::zeros(space.dim, space.dim);
    for n in 1..space.dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Operator { space, entries: m }
}

pub fn creation(space: FockSpace) -> Operator {
    annihilation(space).dagger()
}

/// `a†a`.
pub fn number(space: FockSpace) -> Operator {
    Operator::diagonal(space, |n| n as f64)
}

/// `a†a†aa`, diagonal with entries `n(n−1)`.
pub fn pair_number(space: FockSpace) -> Operator {
    Operator::diagonal(space, |n| (n * n.saturating_sub(1)) as f64)
}

/// A sparse linear map on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    space: FockSpace,
    matrix: CsrMatrix,
}

impl SuperOperator {
    pub fn from_matrix(space: FockSpace, matrix: CsrMatrix) -> Result<Self> {
        let n = space.liouville_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(SuperOperator { space, matrix })
    }

    pub fn zero(space: FockSpace) -> Self {
        let n = space.liouville_dim();
        SuperOperator {
            space,
            matrix: CsrMatrix::zeros(n, n),
        }
    }

    pub fn identity(space: FockSpace) -> Self {
        SuperOperator {
            space,
            matrix: CsrMatrix::identity(space.liouville_dim()),
        }
    }

    /// ρ ↦ Xρ.
    pub fn left(x: &Operator) -> Self {
        let s = x.space;
        let d = s.dim;
        let mut t = Vec::new();
        for (i, j, v) in x.nonzeros() {
            for m in 0..d {
                t.push((s.index(i, m), s.index(j, m), v));
            }
        }
        SuperOperator {
            space: s,
            matrix: CsrMatrix::from_triplets(s.liouville_dim(), s.liouville_dim(), t),
        }
    }

    /// ρ ↦ ρX.
    pub fn right(x: &Operator) -> Self {
        let s = x.space;
        let d = s.dim;
        let mut t = Vec::new();
        for (k, m, v) in x.nonzeros() {
            for n in 0..d {
                t.push((s.index(n, m), s.index(n, k), v));
            }
        }
        SuperOperator {
            space: s,
            matrix: CsrMatrix::from_triplets(s.liouville_dim(), s.liouville_dim(), t),
        }
    }

    /// ρ ↦ AρB.
    pub fn sandwich(a: &Operator, b: &Operator) -> Result<Self> {
        a.space.check(&b.space)?;
        let s = a.space;
        let an = a.nonzeros();
        let bn = b.nonzeros();
        let mut t = Vec::with_capacity(an.len() * bn.len());
        for &(n, i, av) in &an {
            for &(k, m, bv) in &bn {
                t.push((s.index(n, m), s.index(i, k), av * bv));
            }
        }
        Ok(SuperOperator {
            space: s,
            matrix: CsrMatrix::from_triplets(s.liouville_dim(), s.liouville_dim(), t),
        })
    }

    /// ρ ↦ −i[H, ρ].
    pub fn hamiltonian(h: &Operator) -> Self {
        let l = Self::left(h).matrix;
        let r = Self::right(h).matrix;
        let m = l
            .add_scaled(&r, -ONE)
            .expect("same space")
            .scaled(Complex64::new(0.0, -1.0));
        SuperOperator {
            space: h.space,
            matrix: m,
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn scaled(&self, s: f64) -> SuperOperator {
        self.scaled_complex(Complex64::new(s, 0.0))
    }

    pub fn scaled_complex(&self, s: Complex64) -> SuperOperator {
        SuperOperator {
            space: self.space,
            matrix: self.matrix.scaled(s),
        }
    }

    pub fn add(&self, other: &SuperOperator) -> Result<SuperOperator> {
        self.space.check(&other.space)?;
        Ok(SuperOperator {
            space: self.space,
            matrix: self.matrix.add_scaled(&other.matrix, ONE)?,
        })
    }

    pub fn sub(&self, other: &SuperOperator) -> Result<SuperOperator> {
        self.space.check(&other.space)?;
        Ok(SuperOperator {
            space: self.space,
            matrix: self.matrix.add_scaled(&other.matrix, -ONE)?,
        })
    }

    /// Composition `self ∘ diag(scale)` where `scale` is indexed by dyad.
    fn then_after_scaling(&self, scale: impl Fn(usize, usize) -> f64) -> SuperOperator {
        let s = self.space;
        let t = self
            .matrix
            .iter()
            .map(|(r, c, v)| {
                let (n, m) = s.dyad(c);
                (r, c, v * scale(n, m))
            })
            .collect();
        SuperOperator {
            space: s,
            matrix: CsrMatrix::from_triplets(s.liouville_dim(), s.liouville_dim(), t),
        }
    }

    pub fn apply_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mul_vec(v)
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if rho.nrows() != self.space.dim || rho.ncols() != self.space.dim {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim,
                found: rho.nrows(),
            });
        }
        Ok(self
            .space
            .unvectorize(&self.matrix.mul_vec(&self.space.vectorize(rho))))
    }

    /// `‖trace ∘ L‖ / ‖L‖` (Euclidean norm of the row functional against
    /// the Frobenius norm of the matrix). Zero for trace-preserving
    /// generators.
    pub fn trace_residual(&self) -> f64 {
        let s = self.space;
        let mut tr = vec![ZERO; s.liouville_dim()];
        for n in 0..s.dim {
            tr[s.index(n, n)] = ONE;
        }
        let row = self.matrix.left_mul_vec(&tr);
        let num = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let den = self.matrix.frobenius_norm();
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Dense matrix copy, for oracles on small spaces.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }
}

/// 𝓓[r]ρ = rρr† − ½{r†r, ρ}.
pub fn dissipator(r: &Operator) -> Result<SuperOperator> {
    let rd = r.dagger();
    let jump = SuperOperator::sandwich(r, &rd)?;
    jump.sub(&anticommutator_super(r)?)
}

/// 𝓐[r]ρ = ½{r†r, ρ}.
pub fn anticommutator_super(r: &Operator) -> Result<SuperOperator> {
    let rdr = r.dagger().mul(r)?;
    Ok(SuperOperator::left(&rdr)
        .add(&SuperOperator::right(&rdr))?
        .scaled(0.5))
}

/// Eigenvalue of 𝓐[a†] on the dyad |n⟩⟨m| in the untruncated algebra,
/// `(n + m + 2) / 2`.
#[inline]
pub fn gain_anticommutator_eigenvalue(n: usize, m: usize) -> f64 {
    (n + m + 2) as f64 / 2.0
}

/// 𝓐[a†]⁻¹ as element-wise scaling in the dyad basis.
pub fn gain_anticommutator_inverse(rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(rho.nrows(), rho.ncols(), |n, m| {
        rho[(n, m)] / gain_anticommutator_eigenvalue(n, m)
    })
}

/// Saturated gain 𝓓[a†]𝓐[a†]⁻¹.
///
/// The inverse acts as the exact dyad scaling `2/(n+m+2)`. On the truncated
/// space the top level has no upward jump, which keeps the map trace
/// preserving and makes the truncated Poisson distribution an exact
/// stationary point of gain plus linear loss.
pub fn saturated_gain(space: FockSpace) -> SuperOperator {
    let gain = dissipator(&creation(space)).expect("same space");
    gain.then_after_scaling(|n, m| 1.0 / gain_anticommutator_eigenvalue(n, m))
}

/// Outcome of comparing [`saturated_gain`] with the quadrature of
/// ∫₀^∞ dq 𝓓[a† e^{−q aa†/2}].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `‖LHS − RHS‖_F / ‖LHS‖_F` on inputs below the top level.
    pub relative_error: f64,
    pub quadrature_error: f64,
    pub evaluations: usize,
    /// Upper integration limit where the integrand norm dropped below 1e−14.
    pub q_max: f64,
}

/// Verifies the Lindblad integral representation of the saturated gain.
///
/// Inputs touching the top retained level are excluded from the comparison:
/// there the truncated `aa†` vanishes while the dyad scaling keeps its
/// untruncated value, so the two sides differ by construction.
pub fn gain_integral_identity_check(space: FockSpace, quad_points: usize) -> Result<IdentityCheck> {
    if space.dim > 40 {
        return Err(Error::param("dim", "dense quadrature oracle limited to dim ≤ 40"));
    }
    if quad_points < 100 {
        return Err(Error::param("quad_points", format!("need at least 100, got {quad_points}")));
    }
    let lhs = saturated_gain(space);
    let pattern = lhs.matrix().clone();
    let positions: Vec<(usize, usize)> = pattern.iter().map(|(r, c, _)| (r, c)).collect();
    let ad = creation(space);
    let aad = annihilation(space).mul(&ad)?;
    let aad_diag: Vec<f64> = (0..space.dim).map(|n| aad.entries()[(n, n)].re).collect();

    // integrand values laid out on the LHS pattern plus a slot collecting
    // any weight outside that pattern
    let integrand = |q: f64| -> Vec<Complex64> {
        let decay = Operator::diagonal(space, |n| (-0.5 * q * aad_diag[n]).exp());
        let r = ad.mul(&decay).expect("same space");
        let d = dissipator(&r).expect("same space");
        let mut out = vec![ZERO; positions.len() + 1];
        let mut outside = 0.0;
        for (row, col, v) in d.matrix().iter() {
            match positions.binary_search(&(row, col)) {
                Ok(k) => out[k] += v,
                Err(_) => outside += v.norm_sqr(),
            }
        }
        out[positions.len()] = Complex64::new(outside.sqrt(), 0.0);
        out
    };

    let mut q_max = 1.0;
    loop {
        let v = integrand(q_max);
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm < 1e-14 {
            break;
        }
        q_max += 1.0;
        if q_max > 2000.0 {
            return Err(Error::Quadrature {
                estimate: nrm,
                tolerance: 1e-14,
                evaluations: 0,
            });
        }
    }

    let res = quadrature::integrate_vec(
        integrand,
        0.0,
        q_max,
        QuadOptions {
            atol: 1e-14,
            rtol: 1e-11,
            max_evals: quad_points,
        },
    )?;

    let top = space.dim - 1;
    let mut num = res.value[positions.len()].norm_sqr();
    let mut den = 0.0;
    for (k, &(_, col)) in positions.iter().enumerate() {
        let (n, m) = space.dyad(col);
        if n == top || m == top {
            continue;
        }
        let l = pattern.values()[k];
        num += (l - res.value[k]).norm_sqr();
        den += l.norm_sqr();
    }
    Ok(IdentityCheck {
        relative_error: num.sqrt() / den.sqrt(),
        quadrature_error: res.error,
        evaluations: res.evaluations,
        q_max,
    })
}

/// A density matrix on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e−12 relative) and unit trace (1e−10).
    pub fn new(space: FockSpace, rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != space.dim || rho.ncols() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: rho.nrows(),
            });
        }
        let dm = DensityMatrix { space, rho };
        let herm = dm.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::param("rho", format!("not Hermitian (relative error {herm:.2e})")));
        }
        let tr = dm.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::param("rho", format!("trace {tr} differs from 1")));
        }
        Ok(dm)
    }

    /// Wraps a matrix without validation (used for evolved states, whose
    /// invariants are monitored separately).
    pub fn from_raw(space: FockSpace, rho: DMatrix<Complex64>) -> Self {
        DensityMatrix { space, rho }
    }

    pub fn number_state(space: FockSpace, n: usize) -> Result<Self> {
        if n >= space.dim {
            return Err(Error::param("n", format!("level {n} outside space of dim {}", space.dim)));
        }
        let mut rho = DMatrix::zeros(space.dim, space.dim);
        rho[(n, n)] = ONE;
        Ok(DensityMatrix { space, rho })
    }

    /// Coherent state |α⟩⟨α| projected onto the space and renormalized.
    pub fn coherent(space: FockSpace, alpha: Complex64) -> Self {
        let c = coherent_amplitudes(space.dim, alpha);
        let norm: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        let v = DVector::from_iterator(space.dim, c.into_iter().map(|x| x / norm.sqrt()));
        let rho = &v * v.adjoint();
        DensityMatrix { space, rho }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn vectorized(&self) -> Vec<Complex64> {
        self.space.vectorize(&self.rho)
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn expectation(&self, op: &Operator) -> Result<Complex64> {
        self.space.check(&op.space)?;
        Ok((&op.entries * &self.rho).trace())
    }

    pub fn mean_number(&self) -> f64 {
        (0..self.space.dim)
            .map(|n| n as f64 * self.rho[(n, n)].re)
            .sum()
    }

    /// `‖ρ − ρ†‖_F / ‖ρ‖_F`.
    pub fn hermiticity_error(&self) -> f64 {
        let nrm = self.rho.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        (&self.rho - self.rho.adjoint()).norm() / nrm
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.rho)
    }

    /// Total population of the top `levels` Fock levels.
    pub fn tail_population(&self, levels: usize) -> f64 {
        let d = self.space.dim;
        (d.saturating_sub(levels)..d).map(|n| self.rho[(n, n)].re).sum()
    }
}

/// Fock amplitudes ⟨n|α⟩ for n < dim, computed in log space.
pub fn coherent_amplitudes(dim: usize, alpha: Complex64) -> Vec<Complex64> {
    let r = alpha.norm();
    let theta = alpha.arg();
    let mut out = Vec::with_capacity(dim);
    let mut log_fact = 0.0;
    for n in 0..dim {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        if r == 0.0 {
            out.push(if n == 0 { ONE } else { ZERO });
            continue;
        }
        let log_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * log_fact;
        out.push(Complex64::from_polar(log_mag.exp(), n as f64 * theta));
    }
    out
}
