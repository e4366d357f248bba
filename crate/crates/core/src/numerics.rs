//! Dense complex linear-algebra kernels.
//!
//! Everything here works on small (N ≤ ~10²) Hermitian matrices and is backed by
//! `nalgebra`. The helpers add the tolerance conventions the rest of the crate
//! relies on: ascending eigenvalues, a fixed eigenvector phase, PSD clipping and
//! a relative singular-value rank.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex matrix, column-major storage (row-major only on the wire).
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

/// Relative Hermitian symmetry tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues above `-PSD_CLIP_TOL·λ_max` are treated as rounding noise.
pub const PSD_CLIP_TOL: f64 = 1e-9;
/// Below `-NOT_PSD_TOL·λ_max` a matrix is rejected as indefinite.
pub const NOT_PSD_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not Hermitian (max asymmetry {deviation:.3e} exceeds {tolerance:.3e})")]
    NonHermitian { deviation: f64, tolerance: f64 },
    #[error(
        "matrix is not positive semidefinite (min eigenvalue {min_eig:.3e}, max {max_eig:.3e})"
    )]
    NotPsd { min_eig: f64, max_eig: f64 },
    #[error("matrix is singular or not positive definite")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    /// Real eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Unitary matrix; column `i` pairs with `values[i]`.
    pub vectors: CMatrix,
}

impl EigDecomposition {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Eigenvector paired with the largest eigenvalue.
    pub fn principal_vector(&self) -> CVector {
        self.vectors.column(self.vectors.ncols() - 1).into_owned()
    }

    /// `V·diag(f(λ))·Vᴴ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let s = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|l| l)
    }
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `max_ij |M_ij − conj(M_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix) -> bool {
    m.is_square() && hermitian_deviation(m) <= HERMITIAN_TOL * frobenius_norm(m).max(1.0)
}

/// `(M + Mᴴ)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn check_hermitian(m: &CMatrix) -> Result<(), NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let deviation = hermitian_deviation(m);
    let tolerance = HERMITIAN_TOL * frobenius_norm(m).max(1.0);
    if deviation > tolerance {
        return Err(NumericsError::NonHermitian {
            deviation,
            tolerance,
        });
    }
    Ok(())
}

/// Rotate the column so that its largest-magnitude entry is real and positive.
fn fix_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for (i, z) in v.iter().enumerate() {
        // strict comparison keeps the first index among exact ties
        if z.norm() > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = z.norm();
        }
    }
    if best_mag > 0.0 {
        let phase = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Hermitian eigen-decomposition with ascending eigenvalues.
pub fn herm_eig(m: &CMatrix) -> Result<EigDecomposition, NumericsError> {
    check_hermitian(m)?;
    Ok(herm_eig_unchecked(m))
}

/// Same as [`herm_eig`] but symmetrizes instead of validating. Used internally on
/// matrices that are Hermitian by construction up to accumulated rounding.
pub fn herm_eig_unchecked(m: &CMatrix) -> EigDecomposition {
    let n = m.nrows();
    if n == 0 {
        return EigDecomposition {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let sym = hermitian_part(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: equal eigenvalues keep their original index order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col: CVector = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    EigDecomposition { values, vectors }
}

/// PSD square root `B = V·√Λ·Vᴴ`, so that `B·Bᴴ = M`.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix, NumericsError> {
    check_hermitian(m)?;
    let eig = herm_eig_unchecked(m);
    let scale = eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if eig.min() < -NOT_PSD_TOL * scale {
        return Err(NumericsError::NotPsd {
            min_eig: eig.min(),
            max_eig: eig.max(),
        });
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Number of singular values above `rel_tol·σ_max`.
pub fn numeric_rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Ratio `λ₂/λ₁` of the two largest eigenvalues of a PSD matrix (0 for rank ≤ 1).
pub fn second_eigen_ratio(m: &CMatrix) -> f64 {
    let eig = herm_eig_unchecked(m);
    let n = eig.values.len();
    if n < 2 || eig.values[n - 1] <= 0.0 {
        return 0.0;
    }
    eig.values[n - 2].max(0.0) / eig.values[n - 1]
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn hpd_inverse(m: &CMatrix) -> Result<CMatrix, NumericsError> {
    let sym = hermitian_part(m);
    let chol = sym.cholesky().ok_or(NumericsError::Singular)?;
    Ok(chol.inverse())
}

/// `tr(A·B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `Re tr(A·B)`, the real inner product of two Hermitian matrices.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_product(a, b).re
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `u·vᴴ`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

/// `vᴴ·M·v`.
pub fn quad_form(m: &CMatrix, v: &CVector) -> Complex64 {
    (v.adjoint() * m * v)[(0, 0)]
}

/// `uᴴ·M·v`.
pub fn bilinear_form(u: &CVector, m: &CMatrix, v: &CVector) -> Complex64 {
    (u.adjoint() * m * v)[(0, 0)]
}

pub fn inner(u: &CVector, v: &CVector) -> Complex64 {
    u.dotc(v)
}

pub fn vector_norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Serde adapter for [`CMatrix`]: `{rows, cols, re, im}` with row-major entries.
pub mod serde_cmatrix {
    use super::CMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    pub struct Wire {
        pub rows: usize,
        pub cols: usize,
        pub re: Vec<f64>,
        pub im: Vec<f64>,
    }

    impl From<&CMatrix> for Wire {
        fn from(m: &CMatrix) -> Self {
            let mut re = Vec::with_capacity(m.len());
            let mut im = Vec::with_capacity(m.len());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    re.push(m[(i, j)].re);
                    im.push(m[(i, j)].im);
                }
            }
            Wire {
                rows: m.nrows(),
                cols: m.ncols(),
                re,
                im,
            }
        }
    }

    impl Wire {
        pub fn into_matrix(self) -> Result<CMatrix, String> {
            if self.re.len() != self.rows * self.cols || self.im.len() != self.rows * self.cols {
                return Err(format!(
                    "matrix payload has {}/{} entries, expected {}",
                    self.re.len(),
                    self.im.len(),
                    self.rows * self.cols
                ));
            }
            Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
                let k = i * self.cols + j;
                Complex64::new(self.re[k], self.im[k])
            }))
        }
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        Wire::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        Wire::deserialize(d)?
            .into_matrix()
            .map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::{CMatrix, Wire};
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &Option<CMatrix>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(Wire::from).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMatrix>, D::Error> {
            match Option::<Wire>::deserialize(d)? {
                Some(w) => w.into_matrix().map(Some).map_err(serde::de::Error::custom),
                None => Ok(None),
            }
        }
    }

    pub mod vec {
        use super::{CMatrix, Wire};
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
            m.iter().map(Wire::from).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
            Vec::<Wire>::deserialize(d)?
                .into_iter()
                .map(|w| w.into_matrix().map_err(serde::de::Error::custom))
                .collect()
        }
    }
}
