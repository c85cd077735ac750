//! Small dense complex linear-algebra helpers shared by all modules.
//!
//! Vectorization is column stacking: `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`, so the
//! element `ρ[(r, c)]` sits at position `r + c·D`.

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{EigValsh, Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn dagger(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn identity(d: usize) -> Array2<C64> {
    Array2::from_diag_elem(d, ONE)
}

pub fn commutator(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

/// (A + A†)/2.
pub fn hermitian_part(a: &ArrayView2<C64>) -> Array2<C64> {
    let d = a.nrows();
    Array2::from_shape_fn((d, d), |(i, j)| 0.5 * (a[(i, j)] + a[(j, i)].conj()))
}

pub fn max_abs(a: &ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermiticity_defect(a: &ArrayView2<C64>) -> f64 {
    let d = a.nrows();
    let mut m = 0.0_f64;
    for i in 0..d {
        for j in i..d {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn trace(a: &ArrayView2<C64>) -> C64 {
    a.diag().sum()
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn eigvalsh(a: &ArrayView2<C64>) -> Result<Array1<f64>> {
    Ok(hermitian_part(a).eigvalsh(UPLO::Lower)?)
}

/// Eigen-decomposition of the Hermitian part of `a`: ascending eigenvalues and
/// orthonormal eigenvectors as columns. Each eigenvector is phased so that its
/// largest-magnitude component is real and positive.
pub fn eigh(a: &ArrayView2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (w, mut v) = hermitian_part(a).eigh(UPLO::Lower)?;
    for mut col in v.columns_mut() {
        let pivot = col
            .iter()
            .copied()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap_or(ONE);
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            col.mapv_inplace(|z| z * phase);
        }
    }
    Ok((w, v))
}

/// U† A U.
pub fn transform(u: &ArrayView2<C64>, a: &ArrayView2<C64>) -> Array2<C64> {
    dagger(u).dot(a).dot(u)
}

pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Superoperator of ρ ↦ A ρ B.
pub fn sandwich_superop(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    kron(&b.t(), a)
}

pub fn vectorize(a: &ArrayView2<C64>) -> Array1<C64> {
    let d = a.nrows();
    Array1::from_shape_fn(d * a.ncols(), |k| a[(k % d, k / d)])
}

pub fn unvectorize(v: &[C64], d: usize) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |(r, c)| v[r + c * d])
}
