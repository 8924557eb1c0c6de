//! Time-dependent drives of the four-level system: hyperbolic-secant
//! adiabatic pulses, a piecewise propagator on an adaptive grid and
//! transfer maps over (B, chirp).

use crate::drive::{build_a, FourLevelDrive};
use crate::levels::{transition_coupling, LevelStructure};
use crate::linalg::{ang, expi_herm4, C64};
use nalgebra::{Matrix4, Vector3, Vector4};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("step control failed: population change {change:.3e} after {refinements} refinements")]
    StepControlFailure { change: f64, refinements: u32 },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
}

/// A shaped RWA drive: Rabi frequency and carrier detuning versus time.
pub trait Envelope: Sync {
    /// Integration window (μs).
    fn span(&self) -> (f64, f64);
    /// Instant about which the adaptive grid is built (μs).
    fn center(&self) -> f64 {
        let (a, b) = self.span();
        0.5 * (a + b)
    }
    /// Instantaneous Ω(t), kHz.
    fn rabi(&self, t: f64) -> f64;
    /// Instantaneous carrier detuning, kHz.
    fn detuning(&self, t: f64) -> f64;
    /// |d detuning/dt| in kHz/μs.
    fn sweep_rate(&self, t: f64) -> f64;
    /// Peak Rabi frequency, kHz.
    fn peak_rabi(&self) -> f64;
}

/// sech(βt) envelope with a tanh frequency sweep of total width `chirp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SechPulse {
    /// μs
    pub fwhm: f64,
    /// Total sweep Δ^rf, kHz.
    pub chirp: f64,
    /// Static carrier offset from resonance, kHz.
    pub omega_rot: f64,
    /// Ω₀ at the pulse peak, kHz.
    pub peak_rabi: f64,
    /// Half-window in units of FWHM.
    pub truncation: f64,
}

impl SechPulse {
    pub fn new(fwhm: f64, chirp: f64, peak_rabi: f64) -> Result<Self, PulseError> {
        let p = Self { fwhm, chirp, omega_rot: 0.0, peak_rabi, truncation: 4.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        if self.fwhm.is_nan() || self.fwhm <= 0.0 {
            return Err(PulseError::InvalidPulse(format!("fwhm must be positive, got {}", self.fwhm)));
        }
        if self.truncation.is_nan() || self.truncation < 3.0 {
            return Err(PulseError::InvalidPulse(format!("truncation must be at least 3, got {}", self.truncation)));
        }
        Ok(())
    }

    /// β = 2·arccosh(2)/FWHM, μs⁻¹.
    pub fn beta(&self) -> f64 {
        2.0 * 2f64.acosh() / self.fwhm
    }

    pub fn with_truncation(mut self, truncation: f64) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_offset(mut self, omega_rot: f64) -> Self {
        self.omega_rot = omega_rot;
        self
    }
}

/// Envelope sample of a sech pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample {
    pub amplitude: f64,
    /// Sweep phase 2π∫detuning dt, rad.
    pub phase: f64,
    /// Instantaneous detuning (Δ^rf/2)·tanh(βt), kHz.
    pub detuning: f64,
}

pub fn sech_envelope(pulse: &SechPulse, t: f64) -> EnvelopeSample {
    let b = pulse.beta();
    let x = b * t;
    EnvelopeSample {
        amplitude: 1.0 / x.cosh(),
        phase: std::f64::consts::PI * pulse.chirp * 1e-3 * x.cosh().ln() / b,
        detuning: 0.5 * pulse.chirp * x.tanh(),
    }
}

impl Envelope for SechPulse {
    fn span(&self) -> (f64, f64) {
        let h = self.truncation * self.fwhm;
        (-h, h)
    }

    fn center(&self) -> f64 {
        0.0
    }

    fn rabi(&self, t: f64) -> f64 {
        self.peak_rabi * sech_envelope(self, t).amplitude
    }

    fn detuning(&self, t: f64) -> f64 {
        self.omega_rot + sech_envelope(self, t).detuning
    }

    fn sweep_rate(&self, t: f64) -> f64 {
        let b = self.beta();
        (0.5 * self.chirp * b / (b * t).cosh().powi(2)).abs()
    }

    fn peak_rabi(&self) -> f64 {
        self.peak_rabi
    }
}

/// Rectangular drive of fixed Rabi frequency and detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPulse {
    pub rabi: f64,
    pub detuning: f64,
    pub duration: f64,
}

impl Envelope for ConstantPulse {
    fn span(&self) -> (f64, f64) {
        (0.0, self.duration)
    }

    fn rabi(&self, _t: f64) -> f64 {
        self.rabi
    }

    fn detuning(&self, _t: f64) -> f64 {
        self.detuning
    }

    fn sweep_rate(&self, _t: f64) -> f64 {
        0.0
    }

    fn peak_rabi(&self) -> f64 {
        self.rabi
    }
}

/// Static part of the driven problem: splittings, coupling and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveContext {
    pub delta_s: f64,
    pub delta_g: f64,
    pub u1: C64,
    pub u2: C64,
    pub phi: f64,
}

impl DriveContext {
    pub fn at(&self, rabi: f64, detuning: f64) -> FourLevelDrive {
        FourLevelDrive {
            delta: detuning,
            delta_s: self.delta_s,
            delta_g: self.delta_g,
            omega0: rabi,
            u1: self.u1,
            u2: self.u2,
            phi: self.phi,
        }
    }

    /// Context for the RF transition between doublets `s` and `g` of a
    /// level structure, driven along `e_ac`.
    pub fn from_levels(levels: &LevelStructure, s: usize, g: usize, e_ac: &Vector3<f64>) -> Self {
        let cpl = transition_coupling(levels, s, g, e_ac);
        Self { delta_s: levels.delta[s], delta_g: levels.delta[g], u1: cpl.u1(), u2: cpl.u2(), phi: 0.0 }
    }

    pub fn a_matrix<E: Envelope + ?Sized>(&self, env: &E, t: f64) -> Matrix4<C64> {
        build_a(&self.at(env.rabi(t), env.detuning(t)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Largest Rabi rotation per step, rad.
    pub max_angle: f64,
    /// Largest detuning change per step as a fraction of the peak Rabi frequency.
    pub max_sweep: f64,
    /// Accepted change of final populations under step halving.
    pub tolerance: f64,
    pub max_refinements: u32,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { max_angle: 0.05, max_sweep: 0.05, tolerance: 1e-6, max_refinements: 4 }
    }
}

/// Time grid with local steps from the angle and sweep limits, built
/// outward from the envelope center so symmetric envelopes give mirrored
/// grids.
pub fn adaptive_grid<E: Envelope + ?Sized>(env: &E, opts: &IntegratorOptions, scale: f64) -> Vec<f64> {
    let (t0, t1) = env.span();
    let tc = env.center().clamp(t0, t1);
    let peak = ang(env.peak_rabi()).max(1e-12);
    let h_max = 4.0 * opts.max_angle / peak;
    let step = |t: f64| {
        let mut h = h_max;
        let w = ang(env.rabi(t).abs());
        if w > 0.0 {
            h = h.min(opts.max_angle / w);
        }
        let sweep = env.sweep_rate(t);
        if sweep > 0.0 {
            h = h.min(opts.max_sweep * env.peak_rabi().abs() / sweep);
        }
        h * scale
    };
    let mut right = vec![tc];
    let mut t = tc;
    while t < t1 {
        t = (t + step(t)).min(t1);
        right.push(t);
    }
    let mut left = Vec::new();
    t = tc;
    while t > t0 {
        t = (t - step(t)).max(t0);
        left.push(t);
    }
    left.reverse();
    left.extend(right);
    left
}

const CF4_A1: f64 = (3.0 - 2.0 * 1.7320508075688772) / 12.0;
const CF4_A2: f64 = (3.0 + 2.0 * 1.7320508075688772) / 12.0;
const GAUSS_OFFSET: f64 = 0.28867513459481287; // √3/6

/// One fourth-order commutator-free step of ψ' = (i/2)·A(t)·ψ.
fn cf4_step<F: Fn(f64) -> Matrix4<C64>>(a_of_t: &F, t: f64, h: f64) -> Matrix4<C64> {
    let a1 = a_of_t(t + (0.5 - GAUSS_OFFSET) * h);
    let a2 = a_of_t(t + (0.5 + GAUSS_OFFSET) * h);
    let first = expi_herm4(&(a1 * C64::from(CF4_A2) + a2 * C64::from(CF4_A1)), h / 2.0);
    let second = expi_herm4(&(a1 * C64::from(CF4_A1) + a2 * C64::from(CF4_A2)), h / 2.0);
    second * first
}

/// Product of step propagators over `grid` for a generic A(t).
pub fn propagate<F: Fn(f64) -> Matrix4<C64>>(a_of_t: &F, grid: &[f64]) -> Matrix4<C64> {
    grid.windows(2).fold(Matrix4::identity(), |u, w| cf4_step(a_of_t, w[0], w[1] - w[0]) * u)
}

/// State at every grid point.
pub fn propagate_state<F: Fn(f64) -> Matrix4<C64>>(a_of_t: &F, grid: &[f64], psi0: Vector4<C64>) -> Vec<Vector4<C64>> {
    let mut states = Vec::with_capacity(grid.len());
    states.push(psi0);
    for w in grid.windows(2) {
        let next = cf4_step(a_of_t, w[0], w[1] - w[0]) * states.last().expect("nonempty");
        states.push(next);
    }
    states
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// μs
    pub times: Vec<f64>,
    pub states: Vec<Vector4<C64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> Vector4<C64> {
        *self.states.last().expect("trajectory has at least one state")
    }

    pub fn populations(&self) -> [f64; 4] {
        let s = self.final_state();
        [0, 1, 2, 3].map(|k| s[k].norm_sqr())
    }
}

/// Initial condition: a normalized pure state or a weighted mixture of
/// pure states.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Pure(Vector4<C64>),
    Mixture(Vec<(f64, Vector4<C64>)>),
}

impl Initial {
    pub fn basis(k: usize) -> Vector4<C64> {
        Vector4::from_fn(|i, _| if i == k { C64::from(1.0) } else { C64::from(0.0) })
    }

    /// ½(|s−⟩⟨s−| + |s+⟩⟨s+|).
    pub fn s_mixture() -> Self {
        Self::Mixture(vec![(0.5, Self::basis(0)), (0.5, Self::basis(1))])
    }

    /// ½(|g−⟩⟨g−| + |g+⟩⟨g+|).
    pub fn g_mixture() -> Self {
        Self::Mixture(vec![(0.5, Self::basis(2)), (0.5, Self::basis(3))])
    }

    fn components(&self) -> Vec<(f64, Vector4<C64>)> {
        match self {
            Self::Pure(v) => vec![(1.0, *v)],
            Self::Mixture(parts) => parts.clone(),
        }
    }
}

fn populations_of(u: &Matrix4<C64>, initial: &Initial) -> [f64; 4] {
    let mut pops = [0.0; 4];
    for (w, v) in initial.components() {
        let out = u * v;
        for k in 0..4 {
            pops[k] += w * out[k].norm_sqr();
        }
    }
    pops
}

fn max_diff(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Propagator over the envelope window with step-halving verification.
/// Returns the accepted propagator and the grid scale used.
pub fn verified_propagator<E: Envelope + ?Sized>(
    ctx: &DriveContext,
    env: &E,
    initial: &Initial,
    opts: &IntegratorOptions,
) -> Result<(Matrix4<C64>, f64), PulseError> {
    let a_of_t = |t: f64| ctx.a_matrix(env, t);
    let mut scale = 1.0;
    let mut u = propagate(&a_of_t, &adaptive_grid(env, opts, scale));
    let mut pops = populations_of(&u, initial);
    let mut change = f64::INFINITY;
    for refinement in 0..=opts.max_refinements {
        let finer = propagate(&a_of_t, &adaptive_grid(env, opts, scale / 2.0));
        let finer_pops = populations_of(&finer, initial);
        change = max_diff(&pops, &finer_pops);
        scale /= 2.0;
        u = finer;
        pops = finer_pops;
        if change < opts.tolerance {
            return Ok((u, scale));
        }
        if refinement == opts.max_refinements {
            break;
        }
    }
    Err(PulseError::StepControlFailure { change, refinements: opts.max_refinements })
}

/// Final populations of (s−, s+, g−, g+) after the envelope.
pub fn final_populations<E: Envelope + ?Sized>(
    ctx: &DriveContext,
    env: &E,
    initial: &Initial,
    opts: &IntegratorOptions,
) -> Result<[f64; 4], PulseError> {
    let (u, _) = verified_propagator(ctx, env, initial, opts)?;
    Ok(populations_of(&u, initial))
}

/// Pure-state trajectory on the accepted grid.
pub fn integrate<E: Envelope + ?Sized>(
    ctx: &DriveContext,
    env: &E,
    psi0: Vector4<C64>,
    opts: &IntegratorOptions,
) -> Result<Trajectory, PulseError> {
    let (_, scale) = verified_propagator(ctx, env, &Initial::Pure(psi0), opts)?;
    let times = adaptive_grid(env, opts, scale);
    let states = propagate_state(&|t| ctx.a_matrix(env, t), &times, psi0);
    Ok(Trajectory { times, states })
}

/// Final |g⟩ population over a (B, chirp) grid.
#[derive(Debug, Clone)]
pub struct TransferMap {
    pub b: Vec<f64>,
    pub chirp: Vec<f64>,
    /// cells[i][j] for b[i], chirp[j].
    pub cells: Vec<Vec<Result<f64, PulseError>>>,
}

/// Transfer from ½(s−+s+) into the g doublet. Cells are evaluated in
/// parallel; a failing cell does not abort the map.
pub fn transfer_map<C, P>(context: C, pulse: P, b_grid: &[f64], chirp_grid: &[f64], opts: &IntegratorOptions) -> TransferMap
where
    C: Fn(f64) -> DriveContext + Sync,
    P: Fn(f64) -> SechPulse + Sync,
{
    let initial = Initial::s_mixture();
    let cells = b_grid
        .par_iter()
        .map(|&b| {
            let ctx = context(b);
            chirp_grid
                .par_iter()
                .map(|&chirp| {
                    let env = pulse(chirp);
                    env.validate()?;
                    final_populations(&ctx, &env, &initial, opts).map(|p| p[2] + p[3])
                })
                .collect()
        })
        .collect();
    TransferMap { b: b_grid.to_vec(), chirp: chirp_grid.to_vec(), cells }
}
