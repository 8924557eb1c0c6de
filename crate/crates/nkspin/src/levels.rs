//! Static Hamiltonian, doublet structure and first-order Zeeman physics of
//! one electronic level, plus the SU(2)-gauged RF and optical couplings
//! between doublets.

use crate::linalg::{expi_herm, herm_eig, r, sigma_x, sigma_y, sigma_z, C64, I};
use crate::spin::{paired_blocks, BlockPauliDecomposition, SpinOperators, SpinQuantum};
use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};

/// Couplings below this are treated as forbidden.
pub const ZERO_COUPLING: f64 = 1e-15;
/// |1 − C_z| below this selects the degenerate gauge branch.
pub const GAUGE_TOL: f64 = 1e-12;
/// Gap / splitting ratio under which first-order theory is flagged.
pub const NEAR_CROSSING_RATIO: f64 = 10.0;

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Quadrupole and Zeeman tensors of one electronic level.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorParams {
    /// MHz
    pub d: f64,
    /// MHz
    pub e: f64,
    /// ZYZ Euler angles (rad) of the quadrupole frame in the lab frame.
    pub euler_zyz: [f64; 3],
    /// Symmetric Zeeman tensor, kHz/mT.
    pub m: Matrix3<f64>,
}

impl TensorParams {
    /// R_Q = Rz(α)·Ry(β)·Rz(γ); columns are the quadrupole axes in the lab.
    pub fn rotation(&self) -> Matrix3<f64> {
        let [a, b, g] = self.euler_zyz;
        rot_z(a) * rot_y(b) * rot_z(g)
    }

    /// Quadrupole tensor in the lab frame, MHz.
    pub fn q_lab(&self) -> Matrix3<f64> {
        let rq = self.rotation();
        rq * Matrix3::from_diagonal(&Vector3::new(-self.e, self.e, self.d)) * rq.transpose()
    }

    /// Spin-space image of R_Q: W·I_a·W† = Σ_j R_ja I_j.
    pub fn spin_rotation(&self, ops: &SpinOperators) -> DMatrix<C64> {
        let [a, b, g] = self.euler_zyz;
        expi_herm(&ops.iz, -a) * expi_herm(&ops.iy, -b) * expi_herm(&ops.iz, -g)
    }
}

/// Static field; θ is the elevation above the (D1, D2) plane and φ the
/// azimuth from D1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    /// mT
    pub b: f64,
    pub theta: f64,
    pub phi: f64,
}

impl FieldVector {
    pub fn new(b: f64, theta: f64, phi: f64) -> Self {
        assert!(b >= 0.0, "field amplitude must be nonnegative");
        Self { b, theta, phi }
    }

    pub fn unit(&self) -> Vector3<f64> {
        Vector3::new(self.theta.cos() * self.phi.cos(), self.theta.cos() * self.phi.sin(), self.theta.sin())
    }

    pub fn with_amplitude(&self, b: f64) -> Self {
        Self::new(b, self.theta, self.phi)
    }
}

/// H⁰ = I·Q·I + B·M·I in the lab frame, MHz.
pub fn build_static_hamiltonian(params: &TensorParams, field: &FieldVector, spin: SpinQuantum) -> DMatrix<C64> {
    let ops = crate::spin::spin_matrices(spin);
    let q = params.q_lab();
    let v = params.m * field.unit() * (field.b * 1e-3);
    let d = spin.dim();
    let mut h = DMatrix::<C64>::zeros(d, d);
    for j in 0..3 {
        for k in 0..3 {
            h += ops.axis(j) * ops.axis(k) * r(q[(j, k)]);
        }
        h += ops.axis(j) * r(v[j]);
    }
    h
}

/// Non-fatal conditions met while solving a level.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelNote {
    /// V_k was already ±σz-diagonal (or the doublet has no Zeeman
    /// coupling); the σx or identity gauge was used.
    DegenerateDoubletGauge { doublet: usize },
    /// Smallest doublet gap is less than ten times the largest splitting.
    NearCrossingWarning { ratio: f64 },
}

#[derive(Debug, Clone)]
pub struct LevelStructure {
    pub spin: SpinQuantum,
    pub params: TensorParams,
    pub field: FieldVector,
    /// Doublet energies in MHz, increasing.
    pub energies: Vec<f64>,
    /// Effective gyromagnetic ratios, kHz/mT.
    pub g: Vec<f64>,
    /// First-order splittings g_k·B, kHz.
    pub delta: Vec<f64>,
    /// Quadrupole eigenvectors in the paired frame (columns, n×n).
    pub p: DMatrix<f64>,
    /// Per-doublet Zeeman diagonalizers; column 0 is the lower member.
    pub zeeman: Vec<Matrix2<C64>>,
    /// Lab-frame eigenbasis; column 2k+m is member m of doublet k.
    pub eigenbasis: DMatrix<C64>,
    /// Largest splitting over the smallest doublet gap.
    pub perturbation_ratio: f64,
    pub notes: Vec<LevelNote>,
    blocks: BlockPauliDecomposition,
}

impl LevelStructure {
    pub fn n(&self) -> usize {
        self.spin.n()
    }

    /// Lab-frame columns spanning doublet k, 2n×2.
    pub fn doublet_basis(&self, k: usize) -> DMatrix<C64> {
        self.eigenbasis.columns(2 * k, 2).into_owned()
    }

    /// Zeeman coefficients of I_a in the quadrupole frame for a field
    /// direction e (kHz/mT).
    fn frame_coefficients(&self, e: &Vector3<f64>) -> Vector3<f64> {
        self.params.rotation().transpose() * (self.params.m * e)
    }

    /// 2×2 block G_kl of the Zeeman operator along the unit vector e, in
    /// the quadrupole eigenbasis (kHz/mT).
    pub fn g_block(&self, k: usize, l: usize, e: &Vector3<f64>) -> Matrix2<C64> {
        g_block(&self.blocks, &self.p, &self.frame_coefficients(e), k, l)
    }
}

fn g_block(blocks: &BlockPauliDecomposition, p: &DMatrix<f64>, alpha: &Vector3<f64>, k: usize, l: usize) -> Matrix2<C64> {
    let sigmas = [sigma_x(), sigma_y(), sigma_z()];
    let mut g = Matrix2::zeros();
    for a in 0..3 {
        let coef = (p.column(k).transpose() * blocks.axis(a) * p.column(l))[(0, 0)];
        g += sigmas[a] * r(alpha[a] * coef);
    }
    g
}

fn det2(m: &Matrix2<C64>) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Gauge 𝔓 with 𝔓†·V·𝔓 = −σz for a traceless Hermitian involution V.
/// Returns the branch flag alongside.
pub fn zeeman_gauge(v: &Matrix2<C64>) -> (Matrix2<C64>, bool) {
    let cz = v[(0, 0)].re;
    if (1.0 - cz).abs() < GAUGE_TOL {
        return (sigma_x(), true);
    }
    // Half-angle form of (V − σz)/√(2 − 2cz): same matrix, but unitary to
    // rounding even when V is close to +σz.
    let x = v[(0, 1)];
    let theta = x.norm().atan2(cz);
    let (s, c) = (theta / 2.0).sin_cos();
    let e = if x.norm() > 0.0 { x / x.norm() } else { C64::from(1.0) };
    let g = Matrix2::new(r(-s), e * c, e.conj() * c, r(s));
    (g, false)
}

pub fn solve_levels(params: &TensorParams, field: &FieldVector, spin: SpinQuantum) -> LevelStructure {
    let (ops, pairing, blocks) = paired_blocks(spin);
    let n = spin.n();
    let hq = &blocks.ax * &blocks.ax * (-params.e) + &blocks.ay * &blocks.ay * params.e + &blocks.az * &blocks.az * params.d;
    let (energies, pc) = herm_eig(&hq.map(r));
    let p = pc.map(|z| z.re);

    let alpha = params.rotation().transpose() * (params.m * field.unit());
    let mut notes = Vec::new();
    let mut g = Vec::with_capacity(n);
    let mut zeeman = Vec::with_capacity(n);
    for k in 0..n {
        let gkk = g_block(&blocks, &p, &alpha, k, k);
        let gk = 2.0 * (-det2(&gkk).re).max(0.0).sqrt();
        let (gauge, degenerate) = if gk < ZERO_COUPLING { (Matrix2::identity(), true) } else { zeeman_gauge(&(gkk * r(2.0 / gk))) };
        if degenerate {
            notes.push(LevelNote::DegenerateDoubletGauge { doublet: k });
        }
        g.push(gk);
        zeeman.push(gauge);
    }
    let delta: Vec<f64> = g.iter().map(|gk| gk * field.b).collect();

    let w = params.spin_rotation(&ops);
    let d = spin.dim();
    let mut q_frame = DMatrix::<C64>::zeros(d, d);
    for k in 0..n {
        for m in 0..2 {
            let paired: Vec<C64> = (0..d).map(|i| r(p[(i / 2, k)]) * zeeman[k][(i % 2, m)]).collect();
            let raw = pairing.apply(&paired);
            for (i, z) in raw.into_iter().enumerate() {
                q_frame[(i, 2 * k + m)] = z;
            }
        }
    }
    let eigenbasis = w * q_frame;

    let min_gap_khz = energies.windows(2).map(|w| (w[1] - w[0]) * 1e3).fold(f64::INFINITY, f64::min);
    let max_delta = delta.iter().cloned().fold(0.0, f64::max);
    let perturbation_ratio = if min_gap_khz.is_finite() { max_delta / min_gap_khz } else { 0.0 };
    if perturbation_ratio * NEAR_CROSSING_RATIO > 1.0 {
        notes.push(LevelNote::NearCrossingWarning { ratio: perturbation_ratio });
    }

    LevelStructure {
        spin,
        params: params.clone(),
        field: *field,
        energies,
        g,
        delta,
        p,
        zeeman,
        eigenbasis,
        perturbation_ratio,
        notes,
        blocks,
    }
}

/// Effective moment and SU(2) coupling matrix of a transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCoupling {
    /// kHz/mT for magnetic transitions, branching amplitude b for optical.
    pub mu: f64,
    pub u: Matrix2<C64>,
    /// Set when the transition is forbidden; `u` is then the identity.
    pub forbidden: bool,
}

impl TransitionCoupling {
    pub fn u1(&self) -> C64 {
        self.u[(0, 0)]
    }

    pub fn u2(&self) -> C64 {
        self.u[(0, 1)]
    }

    fn forbidden() -> Self {
        Self { mu: 0.0, u: Matrix2::identity(), forbidden: true }
    }
}

/// RF coupling between doublets k (rows) and l (columns) for a drive along
/// the unit vector `e_ac`. The Zeeman member bases carry the gauge
/// φ_k = 0, φ_l = π/2 so that det U = +1.
pub fn transition_coupling(structure: &LevelStructure, k: usize, l: usize, e_ac: &Vector3<f64>) -> TransitionCoupling {
    assert_ne!(k, l, "transition needs two distinct doublets");
    let gkl = structure.g_block(k, l, e_ac);
    let mu = 2.0 * det2(&gkl).norm().sqrt();
    if mu < ZERO_COUPLING {
        return TransitionCoupling::forbidden();
    }
    let raw = gkl * r(2.0 / mu);
    let u = structure.zeeman[k].adjoint() * raw * structure.zeeman[l] * I;
    TransitionCoupling { mu, u, forbidden: false }
}

/// Branching amplitude and SU(2) matrix from a raw 2×2 overlap block:
/// b = √|det O|, V = O·e^{iχ}/b with χ fixing det V = 1.
pub fn coupling_from_overlap(o: &Matrix2<C64>) -> TransitionCoupling {
    let det = det2(o);
    let b = det.norm().sqrt();
    if b < ZERO_COUPLING {
        return TransitionCoupling::forbidden();
    }
    let chi = -det.arg() / 2.0;
    TransitionCoupling { mu: b, u: o * C64::from_polar(1.0 / b, chi), forbidden: false }
}

/// Optical coupling between ground doublet `kg` and excited doublet `ke`
/// from the overlaps of their Zeeman-adapted states.
pub fn optical_coupling(ground: &LevelStructure, kg: usize, excited: &LevelStructure, ke: usize) -> TransitionCoupling {
    let sg = ground.doublet_basis(kg);
    let se = excited.doublet_basis(ke);
    let o = sg.adjoint() * se;
    coupling_from_overlap(&Matrix2::new(o[(0, 0)], o[(0, 1)], o[(1, 0)], o[(1, 1)]))
}
