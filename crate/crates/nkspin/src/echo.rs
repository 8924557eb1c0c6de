//! Single-ion model of spin-wave storage: optical transfer pulses, two RF
//! rephasing pulses and Zeeman free evolution on {s−, s+, g−, g+, e−, e+}.

use crate::drive::{propagator_exact, FourLevelDrive};
use crate::fixture::{Fixture, FixtureError};
use crate::levels::{optical_coupling, transition_coupling, TransitionCoupling};
use crate::linalg::{ang, C64, I};
use crate::spectrum::{spectrum, Spectrum, SpectrumOptions, TimeTrace};
use nalgebra::{Matrix2, SMatrix, SVector};
use rayon::prelude::*;
use thiserror::Error;

pub type Matrix6 = SMatrix<C64, 6, 6>;
pub type Vector6 = SVector<C64, 6>;

pub const S: usize = 0;
pub const G: usize = 2;
pub const E: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EchoError {
    #[error("storage time {ts} μs is shorter than the two RF pulses ({pulses} μs)")]
    StorageTooShort { ts: f64, pulses: f64 },
    #[error("T_s step {dt} μs aliases beats up to {f_max:.3} kHz")]
    AliasedSampling { dt: f64, f_max: f64 },
    #[error("T_s grid is not uniform")]
    NonUniformGrid,
}

/// Where the first RF pulse sits inside the free time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// t1 : t2 : t3 = 1/4 : 1/2 : 1/4
    Centered,
    /// t1 : t2 : t3 = 1/8 : 1/2 : 3/8
    Shifted,
}

impl Variant {
    pub fn fractions(&self) -> [f64; 3] {
        match self {
            Self::Centered => [0.25, 0.5, 0.25],
            Self::Shifted => [0.125, 0.5, 0.375],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoSequence {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// RF π-pulse length, μs.
    pub tau0: f64,
    /// Phases of the two RF pulses; XX means equal.
    pub rf_phases: [f64; 2],
}

impl EchoSequence {
    pub fn xx(variant: Variant, ts: f64, tau0: f64) -> Result<Self, EchoError> {
        let free = ts - 2.0 * tau0;
        if free < 0.0 {
            return Err(EchoError::StorageTooShort { ts, pulses: 2.0 * tau0 });
        }
        let [f1, f2, f3] = variant.fractions();
        Ok(Self { t1: f1 * free, t2: f2 * free, t3: f3 * free, tau0, rf_phases: [0.0, 0.0] })
    }

    pub fn storage_time(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + 2.0 * self.tau0
    }
}

/// Static data of the six-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoSystem {
    /// RF drive on s ↔ g; its phase is replaced by the sequence phases.
    pub rf: FourLevelDrive,
    /// Excited-doublet splitting, kHz.
    pub delta_e: f64,
    /// g ↔ e coupling (readout and π/2 pulse).
    pub opt_g: TransitionCoupling,
    /// s ↔ e coupling (transfer π pulses).
    pub opt_s: TransitionCoupling,
}

/// Doublet roles inside the fixture: s, g in the ground manifold and e in
/// the excited one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoubletRoles {
    pub s: usize,
    pub g: usize,
    pub e: usize,
}

impl Default for DoubletRoles {
    /// s = ±3/2g, g = ±5/2g, e = ±1/2e.
    fn default() -> Self {
        Self { s: 1, g: 2, e: 0 }
    }
}

impl EchoSystem {
    /// System at field `b` (mT) along a named fixture direction, RF Rabi
    /// frequency `omega0` (kHz) along the fixture RF axis.
    pub fn from_fixture(fixture: &Fixture, direction: &str, b: f64, omega0: f64, roles: DoubletRoles) -> Result<Self, FixtureError> {
        let field = fixture.field(direction, b)?;
        let ground = fixture.ground_levels(&field);
        let excited = fixture.excited_levels(&field);
        let rf_cpl = transition_coupling(&ground, roles.s, roles.g, &fixture.rf_axis);
        let rf = FourLevelDrive::resonant(omega0, rf_cpl.u1(), rf_cpl.u2()).with_splittings(ground.delta[roles.s], ground.delta[roles.g]);
        Ok(Self {
            rf,
            delta_e: excited.delta[roles.e],
            opt_g: optical_coupling(&ground, roles.g, &excited, roles.e),
            opt_s: optical_coupling(&ground, roles.s, &excited, roles.e),
        })
    }
}

pub fn free_evolution(delta_s: f64, delta_g: f64, delta_e: f64, t: f64) -> Matrix6 {
    let mut u = Matrix6::zeros();
    for (k, d) in [delta_s, delta_g, delta_e].into_iter().enumerate() {
        let phase = ang(d) * t / 2.0;
        u[(2 * k, 2 * k)] = C64::from_polar(1.0, phase);
        u[(2 * k + 1, 2 * k + 1)] = C64::from_polar(1.0, -phase);
    }
    u
}

/// Ideal rotation of pulse area `area` between the ground doublet starting
/// at `ground` (S or G) and the excited doublet through V.
pub fn optical_op(v: &Matrix2<C64>, ground: usize, area: f64) -> Matrix6 {
    let (s, c) = (area / 2.0).sin_cos();
    let mut u = Matrix6::identity();
    for i in 0..2 {
        u[(ground + i, ground + i)] = C64::from(c);
        u[(E + i, E + i)] = C64::from(c);
        for j in 0..2 {
            u[(ground + i, E + j)] = -I * s * v[(i, j)];
            u[(E + j, ground + i)] = -I * s * v[(i, j)].conj();
        }
    }
    u
}

/// Exact RF propagator on (s, g) embedded with identity on e.
pub fn rf_op(drive: &FourLevelDrive, tau: f64) -> Matrix6 {
    let p = propagator_exact(drive, tau).u;
    let mut u = Matrix6::identity();
    u.fixed_view_mut::<4, 4>(0, 0).copy_from(&p);
    u
}

pub fn basis(k: usize) -> Vector6 {
    Vector6::from_fn(|i, _| if i == k { C64::from(1.0) } else { C64::from(0.0) })
}

/// Full sequence operator.
pub fn sequence_operator(seq: &EchoSequence, sys: &EchoSystem) -> Matrix6 {
    let (ds, dg, de) = (sys.rf.delta_s, sys.rf.delta_g, sys.delta_e);
    let opt1 = optical_op(&sys.opt_g.u, G, std::f64::consts::FRAC_PI_2);
    let opt2 = optical_op(&sys.opt_s.u, S, std::f64::consts::PI);
    let rf1 = rf_op(&sys.rf.with_phase(seq.rf_phases[0]), seq.tau0);
    let rf2 = rf_op(&sys.rf.with_phase(seq.rf_phases[1]), seq.tau0);
    opt2 * free_evolution(ds, dg, de, seq.t3)
        * rf2
        * free_evolution(ds, dg, de, seq.t2)
        * rf1
        * free_evolution(ds, dg, de, seq.t1)
        * opt2
        * opt1
}

/// Readout of the g ↔ e coherence weighted by b·V.
pub fn readout(psi: &Vector6, coupling: &TransitionCoupling) -> C64 {
    let mut amp = C64::from(0.0);
    for a in 0..2 {
        for b in 0..2 {
            amp += psi[G + a].conj() * coupling.u[(a, b)] * psi[E + b];
        }
    }
    amp * coupling.mu
}

pub fn echo_amplitude(seq: &EchoSequence, sys: &EchoSystem, psi_in: &Vector6) -> C64 {
    readout(&(sequence_operator(seq, sys) * psi_in), &sys.opt_g)
}

/// Mean |amplitude|² over the ½(g− + g+) initial mixture.
pub fn echo_efficiency(seq: &EchoSequence, sys: &EchoSystem) -> f64 {
    let u = sequence_operator(seq, sys);
    [G, G + 1].iter().map(|&k| 0.5 * readout(&(u * basis(k)), &sys.opt_g).norm_sqr()).sum()
}

/// Efficiency at each storage time of `ts_grid`.
pub fn ts_sweep(sys: &EchoSystem, variant: Variant, ts_grid: &[f64]) -> Result<Vec<f64>, EchoError> {
    let tau0 = crate::drive::tau_l(sys.rf.omega0, 0);
    ts_grid.par_iter().map(|&ts| EchoSequence::xx(variant, ts, tau0).map(|seq| echo_efficiency(&seq, sys))).collect()
}

/// Highest beat frequency the model can produce, kHz. Each path rate is
/// bounded by max δ/2, the readout pairs two paths and the efficiency
/// pairs two readout terms.
pub fn beat_bound(sys: &EchoSystem) -> f64 {
    2.0 * sys.rf.delta_s.abs().max(sys.rf.delta_g.abs()).max(sys.delta_e.abs())
}

/// DFT of efficiency versus T_s.
pub fn beat_spectrum(ts_grid: &[f64], efficiency: &[f64], f_max: f64) -> Result<Spectrum, EchoError> {
    let n = ts_grid.len();
    let dt = if n > 1 { ts_grid[1] - ts_grid[0] } else { 1.0 };
    if ts_grid.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(EchoError::NonUniformGrid);
    }
    if f_max > 0.0 && dt > 1e3 / (2.0 * f_max) {
        return Err(EchoError::AliasedSampling { dt, f_max });
    }
    let trace = TimeTrace { t0: ts_grid.first().copied().unwrap_or(0.0), dt, values: efficiency.to_vec() };
    Ok(spectrum(&trace, &SpectrumOptions::default()))
}

fn accumulate<T: Copy + std::ops::AddAssign>(groups: &mut Vec<(f64, T)>, rate: f64, value: T) {
    match groups.iter_mut().find(|g| (g.0 - rate).abs() < 1e-9) {
        Some(g) => g.1 += value,
        None => groups.push((rate, value)),
    }
}

/// A cosine component of efficiency versus storage time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatLine {
    /// kHz
    pub freq: f64,
    /// Cosine amplitude.
    pub amplitude: f64,
}

/// Beat lines predicted by splitting the free evolution into Zeeman paths.
/// Each path through (i1, i2, i3) contributes a final vector times
/// exp(iωT), T the free time; the readout pairs two paths and the
/// efficiency pairs two readout terms. Components closer than `merge`
/// kHz are summed coherently with phases taken at free time `t_ref` μs.
/// DC is omitted; lines are sorted by frequency.
pub fn predicted_beats(sys: &EchoSystem, variant: Variant, merge: f64, t_ref: f64) -> Vec<BeatLine> {
    let fr = variant.fractions();
    let tau0 = crate::drive::tau_l(sys.rf.omega0, 0);
    let opt1 = optical_op(&sys.opt_g.u, G, std::f64::consts::FRAC_PI_2);
    let opt2 = optical_op(&sys.opt_s.u, S, std::f64::consts::PI);
    let rf = rf_op(&sys.rf, tau0);
    let energy = |i: usize| {
        let d = ang([sys.rf.delta_s, sys.rf.delta_g, sys.delta_e][i / 2]) / 2.0;
        if i.is_multiple_of(2) {
            d
        } else {
            -d
        }
    };
    // (rad/μs, complex cosine amplitude at T = 0)
    let mut components: Vec<(f64, C64)> = Vec::new();
    for start in [G, G + 1] {
        let psi1 = opt2 * opt1 * basis(start);
        let mut paths: Vec<(f64, Vector6)> = Vec::new();
        for i1 in 0..6 {
            if psi1[i1].norm() < 1e-14 {
                continue;
            }
            let v = rf * basis(i1) * psi1[i1];
            for i2 in 0..6 {
                if v[i2].norm() < 1e-14 {
                    continue;
                }
                let w = rf * basis(i2) * v[i2];
                for i3 in 0..6 {
                    if w[i3].norm() < 1e-14 {
                        continue;
                    }
                    let x = opt2 * basis(i3) * w[i3];
                    let rate = fr[0] * energy(i1) + fr[1] * energy(i2) + fr[2] * energy(i3);
                    accumulate(&mut paths, rate, x);
                }
            }
        }
        let mut amp: Vec<(f64, C64)> = Vec::new();
        for (ra, xa) in &paths {
            for (rb, xb) in &paths {
                let mut c = C64::from(0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        c += xa[G + a].conj() * sys.opt_g.u[(a, b)] * xb[E + b];
                    }
                }
                let c = c * sys.opt_g.mu;
                if c.norm() > 1e-14 {
                    accumulate(&mut amp, rb - ra, c);
                }
            }
        }
        // ½ start weight, doubled for the conjugate term
        for (ra, ca) in &amp {
            for (rb, cb) in &amp {
                if ra - rb > 1e-9 {
                    accumulate(&mut components, ra - rb, ca * cb.conj());
                }
            }
        }
    }
    components.sort_by(|a, b| a.0.total_cmp(&b.0));
    let to_khz = 1e3 / (2.0 * std::f64::consts::PI);
    let mut lines = Vec::new();
    let mut k = 0;
    while k < components.len() {
        let mut sum = C64::from(0.0);
        let mut moment = 0.0;
        let mut weight = 0.0;
        let mut last = components[k].0;
        while k < components.len() && (components[k].0 - last) * to_khz <= merge {
            let (w, c) = components[k];
            sum += c * C64::from_polar(1.0, w * t_ref);
            moment += w * c.norm();
            weight += c.norm();
            last = w;
            k += 1;
        }
        if weight > 0.0 {
            lines.push(BeatLine { freq: moment / weight * to_khz, amplitude: sum.norm() });
        }
    }
    lines
}
