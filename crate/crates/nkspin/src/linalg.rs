//! Small dense complex linear algebra shared by the physics modules.

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix};
use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Ordinary frequency in kHz to angular frequency in rad/μs.
pub fn ang(khz: f64) -> f64 {
    2.0 * PI * khz * 1e-3
}

/// Angular frequency in rad/μs back to kHz.
pub fn khz(rad_per_us: f64) -> f64 {
    rad_per_us * 1e3 / (2.0 * PI)
}

pub fn sigma_x() -> Matrix2<C64> {
    Matrix2::new(r(0.0), r(1.0), r(1.0), r(0.0))
}

pub fn sigma_y() -> Matrix2<C64> {
    Matrix2::new(r(0.0), -I, I, r(0.0))
}

pub fn sigma_z() -> Matrix2<C64> {
    Matrix2::new(r(1.0), r(0.0), r(0.0), r(-1.0))
}

/// Largest entry magnitude.
pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_dyn(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Distance of `u` from unitarity, max-entry norm of U†U − 1.
pub fn unitarity_defect<const N: usize>(u: &SMatrix<C64, N, N>) -> f64 {
    max_abs(&(u.adjoint() * u - SMatrix::<C64, N, N>::identity()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let sym = (m + m.adjoint()) * r(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Eigen-decomposition of a 4×4 Hermitian matrix, eigenvalues descending.
pub fn herm_eig4(m: &Matrix4<C64>) -> ([f64; 4], Matrix4<C64>) {
    let sym = (m + m.adjoint()) * r(0.5);
    let eig = sym.symmetric_eigen();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.map(|k| eig.eigenvalues[k]);
    let vecs = Matrix4::from_fn(|i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// exp(i·s·H) for Hermitian H.
pub fn expi_herm4(h: &Matrix4<C64>, s: f64) -> Matrix4<C64> {
    let (vals, vecs) = herm_eig4(h);
    let phases = Matrix4::from_diagonal(&nalgebra::Vector4::from_fn(|k, _| C64::from_polar(1.0, s * vals[k])));
    vecs * phases * vecs.adjoint()
}

/// exp(i·s·H) for a dense Hermitian H.
pub fn expi_herm(h: &DMatrix<C64>, s: f64) -> DMatrix<C64> {
    let (vals, vecs) = herm_eig(h);
    let n = vals.len();
    let phases = DMatrix::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, s * vals[i]) } else { r(0.0) });
    &vecs * phases * vecs.adjoint()
}

/// Kronecker product of two dense matrices.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn to_dyn2(m: &Matrix2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}
