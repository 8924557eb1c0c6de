//! Spin operators for half-integer spin I = n − 1/2 and the pairing
//! permutation that factorizes them into block-Pauli form.

use crate::linalg::{kron, max_abs_dyn, r, sigma_x, sigma_y, sigma_z, to_dyn2, C64, I};
use nalgebra::DMatrix;
use thiserror::Error;

/// Residual bound for exact-algebra identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("spin must have at least one doublet (n = {0})")]
    InvalidN(usize),
    #[error("block-Pauli factorization residual {residual:.3e} on axis {axis}")]
    DecompositionResidual { axis: char, residual: f64 },
    #[error("pairing permutation has size {perm}, spin operators have size {ops}")]
    SizeMismatch { perm: usize, ops: usize },
}

/// Half-integer spin I = n − 1/2 with n doublets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinQuantum {
    n: usize,
}

impl SpinQuantum {
    pub fn new(n: usize) -> Result<Self, SpinError> {
        if n == 0 {
            return Err(SpinError::InvalidN(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spin(&self) -> f64 {
        self.n as f64 - 0.5
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }
}

/// Ix, Iy, Iz in the basis m = I, I−1, …, −I.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub spin: SpinQuantum,
    pub ix: DMatrix<C64>,
    pub iy: DMatrix<C64>,
    pub iz: DMatrix<C64>,
}

impl SpinOperators {
    pub fn axis(&self, a: usize) -> &DMatrix<C64> {
        match a {
            0 => &self.ix,
            1 => &self.iy,
            _ => &self.iz,
        }
    }
}

/// Raising operator I+ with ⟨m+1|I+|m⟩ = √(I(I+1) − m(m+1)).
pub fn raising(spin: SpinQuantum) -> DMatrix<C64> {
    let d = spin.dim();
    let s = spin.spin();
    let mut p = DMatrix::zeros(d, d);
    for k in 1..d {
        let m = s - k as f64;
        p[(k - 1, k)] = r((s * (s + 1.0) - m * (m + 1.0)).sqrt());
    }
    p
}

pub fn spin_matrices(spin: SpinQuantum) -> SpinOperators {
    let d = spin.dim();
    let s = spin.spin();
    let up = raising(spin);
    let down = up.adjoint();
    let ix = (&up + &down) * r(0.5);
    let iy = (&up - &down) * (-I * 0.5);
    let iz = DMatrix::from_fn(d, d, |i, j| if i == j { r(s - i as f64) } else { r(0.0) });
    SpinOperators { spin, ix, iy, iz }
}

/// Index map of the pairing transform F. In 1-based indices odd states
/// stay put and the even index 2j is exchanged with 2n − 2j + 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingPermutation {
    map: Vec<usize>,
}

impl PairingPermutation {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Image of a 0-based index.
    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        let d = self.map.len();
        DMatrix::from_fn(d, d, |i, j| if self.map[j] == i { r(1.0) } else { r(0.0) })
    }

    /// F·M·F without materializing F.
    pub fn conjugate(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.map.len();
        DMatrix::from_fn(d, d, |i, j| m[(self.map[i], self.map[j])])
    }

    /// F·v for a column vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..v.len()).map(|i| v[self.map[i]]).collect()
    }
}

pub fn pairing_permutation(spin: SpinQuantum) -> PairingPermutation {
    let n = spin.n();
    let map = (0..2 * n)
        .map(|i| {
            let one = i + 1;
            if one % 2 == 1 {
                i
            } else {
                2 * n - one + 2 - 1
            }
        })
        .collect();
    PairingPermutation { map }
}

/// F·I_a·F = A_a ⊗ σ_a with real n×n blocks.
#[derive(Debug, Clone)]
pub struct BlockPauliDecomposition {
    pub ax: DMatrix<f64>,
    pub ay: DMatrix<f64>,
    pub az: DMatrix<f64>,
    /// a_k = √(k(2n−k)), k = 1..2n−1, read off the transformed Ix.
    pub a: Vec<f64>,
    /// |c_k| = |2(n−k)+1| for odd k = 1, 3, …, 2n−1, read off the diagonal
    /// of Az.
    pub c: Vec<f64>,
    pub residual: f64,
}

impl BlockPauliDecomposition {
    pub fn axis(&self, a: usize) -> &DMatrix<f64> {
        match a {
            0 => &self.ax,
            1 => &self.ay,
            _ => &self.az,
        }
    }
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(r)
}

pub fn block_decompose(ops: &SpinOperators, f: &PairingPermutation) -> Result<BlockPauliDecomposition, SpinError> {
    let d = ops.ix.nrows();
    if f.len() != d {
        return Err(SpinError::SizeMismatch { perm: f.len(), ops: d });
    }
    let n = d / 2;
    let fx = f.conjugate(&ops.ix);
    let fy = f.conjugate(&ops.iy);
    let fz = f.conjugate(&ops.iz);
    let ax = DMatrix::from_fn(n, n, |p, q| fx[(2 * p, 2 * q + 1)].re);
    let ay = DMatrix::from_fn(n, n, |p, q| (fy[(2 * p, 2 * q + 1)] * I).re);
    let az = DMatrix::from_fn(n, n, |p, q| fz[(2 * p, 2 * q)].re);

    let paulis = [('x', &fx, &ax, sigma_x()), ('y', &fy, &ay, sigma_y()), ('z', &fz, &az, sigma_z())];
    let mut worst = 0.0f64;
    for (axis, full, block, sigma) in paulis {
        let residual = max_abs_dyn(&(full - kron(&to_complex(block), &to_dyn2(&sigma))));
        if residual > ALGEBRA_TOL {
            return Err(SpinError::DecompositionResidual { axis, residual });
        }
        worst = worst.max(residual);
    }

    let a = (1..d).map(|k| 2.0 * ax[(f.image(k - 1) / 2, f.image(k) / 2)].abs()).collect();
    let c = (0..n).map(|k| 2.0 * az[(k, k)].abs()).collect();
    Ok(BlockPauliDecomposition { ax, ay, az, a, c, residual: worst })
}

/// Convenience: operators, permutation and decomposition for n doublets.
pub fn paired_blocks(spin: SpinQuantum) -> (SpinOperators, PairingPermutation, BlockPauliDecomposition) {
    let ops = spin_matrices(spin);
    let f = pairing_permutation(spin);
    let blocks = block_decompose(&ops, &f).expect("ladder construction factorizes exactly");
    (ops, f, blocks)
}
