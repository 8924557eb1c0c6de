//! Optically detected NMR: a constant RF drive on two probed classes of
//! ions, the transmitted-intensity proxy and its mode structure.

use crate::drive::{build_a, eigenvalues, EigenSet, FourLevelDrive};
use crate::linalg::{herm_eig4, C64};
use crate::spectrum::TimeTrace;
use nalgebra::{Matrix2, Matrix4, Vector4};
use thiserror::Error;

/// Index of g− and g+ in the four-level basis.
pub const G_MINUS: usize = 2;
pub const G_PLUS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdnmrError {
    #[error("sampling step {dt} μs aliases modes up to {f_max:.3} kHz (need ≤ {limit:.4} μs)")]
    AliasedSampling { dt: f64, f_max: f64, limit: f64 },
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
}

/// One class of ions: its initial density over (g−, g+) and the probed
/// population index.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeClass {
    pub rho0: Matrix2<C64>,
    pub probe: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEnsemble {
    pub classes: Vec<(f64, ProbeClass)>,
}

impl ClassEnsemble {
    /// C− probed on g− and C+ probed on g+, both starting in ½(g− + g+).
    pub fn standard() -> Self {
        let rho = Matrix2::identity() * C64::from(0.5);
        Self { classes: vec![(0.5, ProbeClass { rho0: rho, probe: G_MINUS }), (0.5, ProbeClass { rho0: rho, probe: G_PLUS })] }
    }

    /// A single class starting in the pure state g−, probed on g−.
    pub fn single_pure() -> Self {
        let rho = Matrix2::new(C64::from(1.0), C64::from(0.0), C64::from(0.0), C64::from(0.0));
        Self { classes: vec![(1.0, ProbeClass { rho0: rho, probe: G_MINUS })] }
    }

    pub fn validate(&self) -> Result<(), OdnmrError> {
        let total: f64 = self.classes.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OdnmrError::InvalidEnsemble(format!("weights sum to {total}")));
        }
        for (w, c) in &self.classes {
            if *w < 0.0 || !(G_MINUS..=G_PLUS).contains(&c.probe) {
                return Err(OdnmrError::InvalidEnsemble("negative weight or probe outside the g doublet".into()));
            }
            let tr = (c.rho0[(0, 0)] + c.rho0[(1, 1)]).re;
            let det = (c.rho0[(0, 0)] * c.rho0[(1, 1)] - c.rho0[(0, 1)] * c.rho0[(1, 0)]).re;
            let herm = (c.rho0 - c.rho0.adjoint()).norm();
            if (tr - 1.0).abs() > 1e-12 || det < -1e-12 || c.rho0[(0, 0)].re < -1e-12 || herm > 1e-12 {
                return Err(OdnmrError::InvalidEnsemble("class density is not a unit-trace positive operator".into()));
            }
        }
        Ok(())
    }
}

/// Distinct nonzero mode frequencies |ζk − ζl|/2 in kHz, ascending.
pub fn mode_frequencies(eig: &EigenSet) -> Vec<f64> {
    let z = eig.exact;
    let scale = z.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut out: Vec<f64> = Vec::new();
    for k in 0..4 {
        for l in k + 1..4 {
            let f = (z[k] - z[l]).abs() / 2.0;
            if f > 1e-9 * scale && out.iter().all(|g| (g - f).abs() > 1e-9 * scale) {
                out.push(f);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Frequency (kHz) of the (k, l) mode from descending eigenvalues.
pub fn pair_frequency(eig: &EigenSet, k: usize, l: usize) -> f64 {
    (eig.exact[k] - eig.exact[l]).abs() / 2.0
}

/// Spectral data of one drive: eigenvalues (rad/μs) and eigenvectors of A.
struct Modes {
    vals: [f64; 4],
    vecs: Matrix4<C64>,
}

fn modes(drive: &FourLevelDrive) -> Modes {
    let (vals, vecs) = herm_eig4(&build_a(drive));
    Modes { vals, vecs }
}

fn embed(rho: &Matrix2<C64>) -> Matrix4<C64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(rho);
    m
}

/// Coefficients C_kl with I(t) = Σ C_kl·exp(i(λk − λl)t/2).
fn intensity_coefficients(m: &Modes, ensemble: &ClassEnsemble) -> Matrix4<C64> {
    let mut coef = Matrix4::zeros();
    for (w, class) in &ensemble.classes {
        let rho = embed(&class.rho0);
        let p = class.probe;
        for k in 0..4 {
            for l in 0..4 {
                let vk = m.vecs.column(k);
                let vl = m.vecs.column(l);
                let inner = (vk.adjoint() * rho * vl)[(0, 0)];
                coef[(k, l)] += vk[p] * inner * vl[p].conj() * *w;
            }
        }
    }
    coef
}

/// I(t) = Σ_c w_c ⟨p_c|ρ_c(t)|p_c⟩ sampled on [0, duration). An optional
/// decay rate (μs⁻¹) damps the oscillating part.
pub fn odnmr_trace(
    drive: &FourLevelDrive,
    ensemble: &ClassEnsemble,
    duration: f64,
    dt: f64,
    damping: Option<f64>,
) -> Result<TimeTrace, OdnmrError> {
    ensemble.validate()?;
    let f_max = mode_frequencies(&eigenvalues(drive)).last().copied().unwrap_or(0.0);
    let limit = if f_max > 0.0 { 1e3 / (8.0 * f_max) } else { f64::INFINITY };
    if dt.is_nan() || dt <= 0.0 || dt > limit {
        return Err(OdnmrError::AliasedSampling { dt, f_max, limit });
    }
    let m = modes(drive);
    let coef = intensity_coefficients(&m, ensemble);
    let n = (duration / dt).round() as usize;
    let gamma = damping.unwrap_or(0.0);
    Ok(TimeTrace::from_fn(0.0, dt, n, |t| {
        let mut dc = 0.0;
        let mut osc = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                let term = coef[(k, l)] * C64::from_polar(1.0, (m.vals[k] - m.vals[l]) * t / 2.0);
                if k == l {
                    dc += term.re;
                } else {
                    osc += term.re;
                }
            }
        }
        dc + osc * (-gamma * t).exp()
    }))
}

/// B⁽ᵏ⁾_x = ⟨x|v_k⟩⟨v_k|ψ₀⟩ for descending eigenvalues.
pub fn mode_amplitudes(drive: &FourLevelDrive, psi0: &Vector4<C64>, probe: usize) -> [C64; 4] {
    let m = modes(drive);
    [0, 1, 2, 3].map(|k| {
        let vk = m.vecs.column(k);
        vk[probe] * (vk.adjoint() * psi0)[(0, 0)]
    })
}

/// Relative residuals of the ω₁₄ and ω₂₃ amplitude products once both
/// Zeeman-pure starting components are summed at a fixed probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CancellationResidual {
    pub r14: f64,
    pub r23: f64,
    /// Largest single amplitude product, the normalization.
    pub scale: f64,
}

pub fn cancellation_check(drive: &FourLevelDrive) -> CancellationResidual {
    let starts = [crate::pulse::Initial::basis(G_MINUS), crate::pulse::Initial::basis(G_PLUS)];
    let mut scale = 0.0f64;
    let mut r = [0.0f64; 2];
    for probe in [G_MINUS, G_PLUS] {
        let amps: Vec<[C64; 4]> = starts.iter().map(|s| mode_amplitudes(drive, s, probe)).collect();
        for (slot, (k, l)) in [(0, 3), (1, 2)].into_iter().enumerate() {
            let sum: C64 = amps.iter().map(|b| b[k] * b[l].conj()).sum();
            r[slot] = r[slot].max(sum.norm());
        }
        for b in &amps {
            for k in 0..4 {
                for l in 0..4 {
                    scale = scale.max((b[k] * b[l].conj()).norm());
                }
            }
        }
    }
    if scale == 0.0 {
        return CancellationResidual { r14: 0.0, r23: 0.0, scale };
    }
    CancellationResidual { r14: r[0] / scale, r23: r[1] / scale, scale }
}
