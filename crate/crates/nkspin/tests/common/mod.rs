//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

pub mod beats;

use nalgebra::{DMatrix, Matrix4};
use nkspin::C64;

/// exp(M) by scaling and squaring of a Taylor series.
pub fn expm(m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows();
    let norm: f64 = m.iter().map(|z| z.norm()).sum();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale /= 2.0;
        squarings += 1;
    }
    let a = m * C64::from(scale);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a * C64::from(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn expm4(m: &Matrix4<C64>) -> Matrix4<C64> {
    let d = expm(&DMatrix::from_fn(4, 4, |i, j| m[(i, j)]));
    Matrix4::from_fn(|i, j| d[(i, j)])
}

/// Spin matrices from the ladder formula ⟨m+1|I+|m⟩ = √(I(I+1) − m(m+1)),
/// basis ordered m = I, I−1, …, −I.
pub fn ladder_spin(dim: usize) -> [DMatrix<C64>; 3] {
    let s = (dim as f64 - 1.0) / 2.0;
    let m = |i: usize| s - i as f64;
    let mut plus = DMatrix::<C64>::zeros(dim, dim);
    for j in 1..dim {
        let mj = m(j);
        plus[(j - 1, j)] = C64::from((s * (s + 1.0) - mj * (mj + 1.0)).sqrt());
    }
    let minus = plus.adjoint();
    let ix = (&plus + &minus) * C64::from(0.5);
    let iy = (&plus - &minus) * C64::new(0.0, -0.5);
    let iz = DMatrix::from_fn(dim, dim, |i, j| if i == j { C64::from(m(i)) } else { C64::from(0.0) });
    [ix, iy, iz]
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}
