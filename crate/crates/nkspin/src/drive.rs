//! The reduced driven two-doublet problem in the rotating frame.
//!
//! Basis order is (s−, s+, g−, g+). The propagator is exp(iAt/2) with A
//! stored in rad/μs; inputs and reported eigenvalues are in kHz.

use crate::linalg::{ang, expi_herm4, herm_eig4, khz, max_abs, r, unitarity_defect, C64, I};
use nalgebra::{Matrix2, Matrix4};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriveError {
    #[error("matrix is not unitary (defect {0:.3e})")]
    NonUnitaryInput(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourLevelDrive {
    /// Detuning Δ = ω_rot − ω₀, kHz.
    pub delta: f64,
    /// Splitting of the upper (s) doublet, kHz.
    pub delta_s: f64,
    /// Splitting of the lower (g) doublet, kHz.
    pub delta_g: f64,
    /// Ω₀ = μ·B_ac/2, kHz.
    pub omega0: f64,
    pub u1: C64,
    pub u2: C64,
    /// Drive phase, rad.
    pub phi: f64,
}

impl FourLevelDrive {
    /// Resonant drive at zero field.
    pub fn resonant(omega0: f64, u1: C64, u2: C64) -> Self {
        Self { delta: 0.0, delta_s: 0.0, delta_g: 0.0, omega0, u1, u2, phi: 0.0 }
    }

    pub fn with_splittings(mut self, delta_s: f64, delta_g: f64) -> Self {
        self.delta_s = delta_s;
        self.delta_g = delta_g;
        self
    }

    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_phase(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn u_matrix(&self) -> Matrix2<C64> {
        Matrix2::new(self.u1, self.u2, -self.u2.conj(), self.u1.conj())
    }

    /// |Ω₁| in kHz.
    pub fn omega1(&self) -> f64 {
        self.u1.norm() * self.omega0
    }

    /// |Ω₂| in kHz.
    pub fn omega2(&self) -> f64 {
        self.u2.norm() * self.omega0
    }

    /// ε = (δs + δg)/(2Ω₀), the low-field expansion parameter.
    pub fn epsilon(&self) -> f64 {
        (self.delta_s + self.delta_g) / (2.0 * self.omega0)
    }
}

/// The rotating-frame A-matrix in rad/μs.
pub fn build_a(drive: &FourLevelDrive) -> Matrix4<C64> {
    let d = ang(drive.delta);
    let ds = ang(drive.delta_s);
    let dg = ang(drive.delta_g);
    let coupling = drive.u_matrix() * C64::from_polar(ang(drive.omega0), drive.phi);
    let mut a = Matrix4::zeros();
    a[(0, 0)] = r(d + ds);
    a[(1, 1)] = r(d - ds);
    a[(2, 2)] = r(-d + dg);
    a[(3, 3)] = r(-d - dg);
    for i in 0..2 {
        for j in 0..2 {
            a[(i, 2 + j)] = coupling[(i, j)];
            a[(2 + j, i)] = coupling[(i, j)].conj();
        }
    }
    a
}

/// Exact and approximate eigenvalues of A, kHz, descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSet {
    pub exact: [f64; 4],
    pub approx: [f64; 4],
}

pub fn exact_eigenvalues(drive: &FourLevelDrive) -> [f64; 4] {
    herm_eig4(&build_a(drive)).0.map(khz)
}

/// Closed-form eigenvalues at Δ = 0.
pub fn zero_detuning_approx(drive: &FourLevelDrive) -> [f64; 4] {
    let (ds, dg, w0) = (drive.delta_s, drive.delta_g, drive.omega0);
    let rr = (((dg - ds) / 2.0).powi(2) + drive.omega1().powi(2)).sqrt();
    let base = (dg * dg + ds * ds) / 2.0 + w0 * w0;
    let z1 = (base + (dg + ds) * rr).sqrt();
    let z2 = (base - (dg + ds) * rr).max(0.0).sqrt();
    [z1, z2, -z2, -z1]
}

/// Unperturbed (u2 = 0) eigenvalues ζ⁰, in the pairing used by the
/// cross-term correction: (ζ⁰₁, ζ⁰₂, ζ⁰₃, ζ⁰₄).
pub fn decoupled_eigenvalues(drive: &FourLevelDrive) -> [f64; 4] {
    let (d, ds, dg) = (drive.delta, drive.delta_s, drive.delta_g);
    let w1 = drive.omega1();
    let r1 = ((2.0 * d + ds - dg).powi(2) + 4.0 * w1 * w1).sqrt();
    let r2 = ((2.0 * d + dg - ds).powi(2) + 4.0 * w1 * w1).sqrt();
    [(ds + dg + r1) / 2.0, (ds + dg - r1) / 2.0, -(ds + dg - r2) / 2.0, -(ds + dg + r2) / 2.0]
}

/// Eigenvalues with the cross term |Ω₂| restored pairwise.
pub fn general_approx(drive: &FourLevelDrive) -> [f64; 4] {
    let [z1, z2, z3, z4] = decoupled_eigenvalues(drive);
    let w2 = drive.omega2();
    let outer = ((z1 - z4).powi(2) + 4.0 * w2 * w2).sqrt();
    let inner = ((z2 - z3).powi(2) + 4.0 * w2 * w2).sqrt();
    let mut out = [(z1 + z4 + outer) / 2.0, (z2 + z3 + inner) / 2.0, (z2 + z3 - inner) / 2.0, (z1 + z4 - outer) / 2.0];
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

pub fn eigenvalues(drive: &FourLevelDrive) -> EigenSet {
    let approx = if drive.delta == 0.0 { zero_detuning_approx(drive) } else { general_approx(drive) };
    EigenSet { exact: exact_eigenvalues(drive), approx }
}

/// Validity parameter Q of the approximate eigenvalues; `omega1` is |Ω₁|.
pub fn quality_factor(g_s: f64, g_g: f64, delta: f64, omega1: f64) -> f64 {
    let num = (g_s - g_g).powi(2);
    if num == 0.0 {
        return 0.0;
    }
    let detuned = if delta == 0.0 { 0.0 } else { 4.0 * delta * delta * g_s * g_s * g_g * g_g / (omega1 * omega1 * (g_s + g_g).powi(2)) };
    num / (g_s * g_g + detuned)
}

/// Field (mT) at which ζ⁰₂ and ζ⁰₃ cross.
pub fn b_cross(omega1: f64, g_s: f64, g_g: f64, delta: f64) -> f64 {
    (omega1 * omega1 / (g_s * g_g) + 4.0 * delta * delta / (g_s + g_g).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorKind {
    Exact,
    LowFieldApprox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub u: Matrix4<C64>,
    /// μs
    pub duration: f64,
    pub kind: PropagatorKind,
}

impl Propagator {
    pub fn upper_right(&self) -> Matrix2<C64> {
        self.u.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn diagonal_blocks_norm(&self) -> f64 {
        max_abs(&self.u.fixed_view::<2, 2>(0, 0).into_owned()).max(max_abs(&self.u.fixed_view::<2, 2>(2, 2).into_owned()))
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.u)
    }
}

/// exp(iAt/2) by spectral decomposition.
pub fn propagator_exact(drive: &FourLevelDrive, t: f64) -> Propagator {
    Propagator { u: expi_herm4(&build_a(drive), t / 2.0), duration: t, kind: PropagatorKind::Exact }
}

/// Phase frame D = diag(e^{iφ/2}, e^{iφ/2}, e^{−iφ/2}, e^{−iφ/2}) that maps
/// the φ = 0 problem onto phase φ.
fn phase_frame(phi: f64) -> Matrix4<C64> {
    let p = C64::from_polar(1.0, phi / 2.0);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(p, p, p.conj(), p.conj()))
}

/// First-order low-field propagator, valid for ε < 1 and Δ = 0.
pub fn propagator_lowfield(drive: &FourLevelDrive, t: f64) -> Propagator {
    let w0 = ang(drive.omega0);
    let (s, c) = (w0 * t / 2.0).sin_cos();
    let u = drive.u_matrix();
    let mut x = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            x[(i, 2 + j)] = u[(i, j)];
            x[(2 + j, i)] = u[(i, j)].conj();
        }
    }
    let u0 = Matrix4::identity() * r(c) + x * (I * s);

    let a = drive.u1.norm();
    let e1 = if a > 0.0 { drive.u1 / a } else { r(1.0) };
    let u2 = drive.u2;
    let mut cm = Matrix4::zeros();
    cm[(0, 0)] = r(a);
    cm[(0, 1)] = -u2 * e1;
    cm[(1, 0)] = -u2.conj() / e1;
    cm[(1, 1)] = r(-a);
    cm[(2, 2)] = r(a);
    cm[(2, 3)] = u2 / e1;
    cm[(3, 2)] = u2.conj() * e1;
    cm[(3, 3)] = r(-a);
    let mut sm = Matrix4::zeros();
    sm[(0, 2)] = -e1;
    sm[(1, 3)] = r(1.0) / e1;
    sm[(2, 0)] = -r(1.0) / e1;
    sm[(3, 1)] = e1;
    let upert = cm * (I * c) + sm * r(s);

    let theta = drive.epsilon() * ang(drive.omega1()) * t / 2.0;
    let u0phi = u0 * r(theta.cos()) + upert * r(theta.sin());
    let d = phase_frame(drive.phi);
    Propagator { u: d * u0phi * d.adjoint(), duration: t, kind: PropagatorKind::LowFieldApprox }
}

/// τ_l = (2l+1)π/Ω₀ in μs.
pub fn tau_l(omega0: f64, l: usize) -> f64 {
    (2 * l + 1) as f64 * PI / ang(omega0)
}

/// 𝓜 at τ_l: c_l·U + i·s_l·diag(e^{iφ₁}, −e^{−iφ₁}) (φ = 0 frame).
pub fn pi_pulse_block(drive: &FourLevelDrive, l: usize) -> Matrix2<C64> {
    let theta = drive.epsilon() * ang(drive.omega1()) * tau_l(drive.omega0, l) / 2.0;
    let a = drive.u1.norm();
    let e1 = if a > 0.0 { drive.u1 / a } else { r(1.0) };
    drive.u_matrix() * r(theta.cos()) + Matrix2::new(e1, r(0.0), r(0.0), -r(1.0) / e1) * (I * theta.sin())
}

/// One crosstalk-free operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub l: usize,
    pub k: usize,
    /// μs
    pub tau: f64,
    /// mT
    pub b: f64,
}

/// Pulse lengths τ_l and bias fields where the cross terms of 𝓜 vanish.
pub fn crosstalk_free_grid(omega0: f64, g_s: f64, g_g: f64, u1_abs: f64, l_max: usize, k_max: usize) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for l in 0..=l_max {
        for k in 0..=k_max {
            let b = 2.0 * (2 * k + 1) as f64 * omega0 / ((2 * l + 1) as f64 * (g_g + g_s) * u1_abs);
            out.push(GridPoint { l, k, tau: tau_l(omega0, l), b });
        }
    }
    out
}

/// Largest population sent to the wrong Zeeman member of the target
/// doublet, over both starting members of either doublet.
pub fn crosstalk(u: &Matrix4<C64>) -> f64 {
    [u[(3, 0)], u[(2, 1)], u[(1, 2)], u[(0, 3)]].iter().fold(0.0, |m, z| m.max(z.norm_sqr()))
}

/// Smallest population returned to its starting state by two identical
/// pulses.
pub fn double_pulse_fidelity(u: &Matrix4<C64>) -> f64 {
    let u2 = u * u;
    (0..4).map(|i| u2[(i, i)].norm_sqr()).fold(1.0, f64::min)
}

/// Rotation angle α and axis n with M = exp(−iα n·σ/2). A global phase is
/// removed first so any unitary M is accepted.
pub fn bloch_rotation(m: &Matrix2<C64>) -> Result<(f64, [f64; 3]), DriveError> {
    let defect = unitarity_defect(m);
    if defect > 1e-9 {
        return Err(DriveError::NonUnitaryInput(defect));
    }
    let m = m * C64::from_polar(1.0, -m.determinant().arg() / 2.0);
    let a0 = ((m[(0, 0)] + m[(1, 1)]) / 2.0).re;
    let az = (I * (m[(0, 0)] - m[(1, 1)]) / 2.0).re;
    let ax = (I * (m[(0, 1)] + m[(1, 0)]) / 2.0).re;
    let ay = ((m[(1, 0)] - m[(0, 1)]) / 2.0).re;
    let norm = (ax * ax + ay * ay + az * az).sqrt();
    let alpha = 2.0 * norm.atan2(a0);
    let n = if norm > 0.0 { [ax / norm, ay / norm, az / norm] } else { [0.0, 0.0, 1.0] };
    Ok((alpha, n))
}

/// exp(−iα n·σ/2).
pub fn su2_from_rotation(alpha: f64, n: [f64; 3]) -> Matrix2<C64> {
    let (s, c) = (alpha / 2.0).sin_cos();
    let ns = crate::linalg::sigma_x() * r(n[0]) + crate::linalg::sigma_y() * r(n[1]) + crate::linalg::sigma_z() * r(n[2]);
    Matrix2::identity() * r(c) - ns * (I * s)
}
