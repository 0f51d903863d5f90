//! Small dense complex matrices: exponentials, norms, Hermitian parts.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub fn to_complex(a: &RMatrix) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Largest entry of `|M - M^*|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `(M + M^*)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `(M - M^*)/(2i)`, Hermitian.
pub fn skew_part_hermitian(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * Complex64::new(0.0, -0.5)
}

/// Operator norm (largest singular value).
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `exp(c H)` for Hermitian `H` via its eigendecomposition.
pub fn exp_hermitian(c: Complex64, h: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let u = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| (c * l).exp()));
    u * d * u.adjoint()
}

/// `exp(M)` by scaling and squaring with a Padé approximant.
pub fn exp_pade(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

/// `exp(c M)`, choosing the eigen route for Hermitian `M`.
pub fn exp_scaled(c: Complex64, m: &CMatrix) -> CMatrix {
    if m.nrows() == 1 {
        return CMatrix::from_element(1, 1, (c * m[(0, 0)]).exp());
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if hermitian_defect(m) <= 1e-14 * scale {
        exp_hermitian(c, &hermitian_part(m))
    } else {
        exp_pade(&m.map(|z| z * c))
    }
}

/// Row-major copy of a square matrix.
pub fn to_flat(m: &CMatrix) -> Vec<Complex64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `v <- M v` for a row-major `n x n` matrix.
pub fn matvec_in_place(mat: &[Complex64], v: &mut [Complex64]) {
    let n = v.len();
    if n == 1 {
        v[0] *= mat[0];
        return;
    }
    let mut tmp = [Complex64::new(0.0, 0.0); crate::field::MAX_COMPONENTS];
    for i in 0..n {
        let row = &mat[i * n..(i + 1) * n];
        tmp[i] = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    }
    v.copy_from_slice(&tmp[..n]);
}
