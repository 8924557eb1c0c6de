//! Atomic frequency comb preparation in a split four-level system:
//! satellite-hole bookkeeping, a discrete-cycle hole-burning model over ion
//! frequency classes and the resulting comb efficiency.
//!
//! Each class ν carries the four optical lines (a, b), a ∈ {g−, g+},
//! b ∈ {e−, e+}, at ν + (b·δe − a·δg)/2 with relative strengths w_ab.
//! One pump cycle excites a fraction s·w_ab of the ground population of
//! every line that falls in a burn window; the excited member b then
//! returns to ground member a with probability b²·w_ab and the remainder
//! is shelved in a long-lived auxiliary level.
//!
//! The comb is read out through the first Fourier harmonic of the depth
//! profile over the band: d̄ = mean depth and c₁ = mean of
//! depth·exp(2πif/Δ). A square comb of finesse F has |c₁| = d̄·sinc(π/F),
//! so η = |c₁|²·exp(−d̄) is η_deph·d̃²·exp(−d̃) with d̃ = d̄ and
//! η_deph = |c₁|²/d̄².

use crate::linalg::C64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AfcError {
    #[error("populations still change by {change:.3e} per cycle after {cycles} cycles")]
    NonConvergence { change: f64, cycles: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombSpec {
    /// Tooth period Δ_AFC, kHz.
    pub delta_afc: f64,
    /// kHz
    pub bandwidth: f64,
    pub finesse: f64,
    pub d_eff: f64,
    pub eta_deph: f64,
}

impl CombSpec {
    pub fn validate(&self) -> Result<(), AfcError> {
        if self.finesse.is_nan() || self.finesse <= 1.0 || self.bandwidth < self.delta_afc || !(0.0..=1.0).contains(&self.eta_deph) {
            return Err(AfcError::InvalidModel(format!("inconsistent comb {self:?}")));
        }
        Ok(())
    }
}

/// η = η_deph·d̃²·exp(−d̃).
pub fn comb_efficiency(spec: &CombSpec) -> f64 {
    spec.eta_deph * spec.d_eff * spec.d_eff * (-spec.d_eff).exp()
}

/// Square-tooth dephasing factor sinc²(π/F).
pub fn square_tooth_dephasing(finesse: f64) -> f64 {
    let x = PI / finesse;
    (x.sin() / x).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Satellites {
    /// Offsets of side holes from the burn frequency, kHz.
    pub side_holes: Vec<f64>,
    /// Offsets of anti-holes, kHz.
    pub anti_holes: Vec<f64>,
}

fn symmetric_set(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        for s in [v, -v] {
            if s != 0.0 && out.iter().all(|o| (o - s).abs() > 1e-12) {
                out.push(s);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Side holes at f₀ ± δe and anti-holes at f₀ ± δg, f₀ ± |δg ± δe|.
pub fn satellite_positions(delta_g: f64, delta_e: f64, f0: f64) -> Satellites {
    let side = symmetric_set([delta_e]).into_iter().map(|x| f0 + x).collect();
    let anti = if delta_g == 0.0 {
        Vec::new()
    } else {
        symmetric_set([delta_g, (delta_g + delta_e).abs(), (delta_g - delta_e).abs()]).into_iter().map(|x| f0 + x).collect()
    };
    Satellites { side_holes: side, anti_holes: anti }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchingConditions {
    /// Zero field: every period is admissible.
    Degenerate,
    Discrete {
        /// (n, Δ_AFC) with Δ_AFC = B·g_e/n.
        side_hole: Vec<(usize, f64)>,
        /// (n, Δ_AFC) with Δ_AFC = B·g_g/(n − ½).
        anti_hole: Vec<(usize, f64)>,
    },
}

pub fn matching_conditions(b: f64, g_e: f64, g_g: f64, n_max: usize) -> MatchingConditions {
    let b = b.abs();
    if b == 0.0 {
        return MatchingConditions::Degenerate;
    }
    MatchingConditions::Discrete {
        side_hole: (1..=n_max).map(|n| (n, b * g_e / n as f64)).collect(),
        anti_hole: (1..=n_max).map(|n| (n, b * g_g / (n as f64 - 0.5))).collect(),
    }
}

/// Where light is applied during preparation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BurnMask {
    /// Burn the gaps of a square comb centered on 0.
    Comb { period: f64, bandwidth: f64, finesse: f64 },
    /// Burn a single window [center − width/2, center + width/2].
    Window { center: f64, width: f64 },
}

impl BurnMask {
    pub fn burns(&self, f: f64) -> bool {
        match *self {
            Self::Comb { period, bandwidth, finesse } => {
                let x = (f / period + 0.5).rem_euclid(1.0) - 0.5;
                f.abs() <= bandwidth / 2.0 && x.abs() * period > period / finesse / 2.0
            }
            Self::Window { center, width } => (f - center).abs() <= width / 2.0,
        }
    }

    fn reach(&self) -> f64 {
        match *self {
            Self::Comb { bandwidth, .. } => bandwidth / 2.0,
            Self::Window { center, width } => center.abs() + width / 2.0,
        }
    }
}

/// Ground populations of one class and its shelved fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassState {
    pub ground: [f64; 2],
    pub aux: f64,
}

impl ClassState {
    pub fn thermal() -> Self {
        Self { ground: [0.5, 0.5], aux: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.ground[0] + self.ground[1] + self.aux
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpingModel {
    /// kHz
    pub delta_g: f64,
    /// kHz
    pub delta_e: f64,
    /// Line strengths w[a][b]; rows and columns sum to 1.
    pub strengths: [[f64; 2]; 2],
    /// Branching b² from the excited doublet back to this ground doublet.
    pub branching: f64,
    /// Excitation probability per cycle on a unit-strength line.
    pub pump: f64,
    /// Spacing of the ion-class grid, kHz.
    pub class_step: f64,
}

impl PumpingModel {
    /// Strengths from the cross-line fraction v² of the optical V matrix.
    pub fn new(delta_g: f64, delta_e: f64, cross: f64, branching: f64) -> Self {
        Self { delta_g, delta_e, strengths: [[1.0 - cross, cross], [cross, 1.0 - cross]], branching, pump: 0.5, class_step: 1.0 }
    }

    pub fn with_class_step(mut self, h: f64) -> Self {
        self.class_step = h;
        self
    }

    pub fn validate(&self) -> Result<(), AfcError> {
        let w = &self.strengths;
        for (a, line) in w.iter().enumerate() {
            let row = line[0] + line[1];
            let col = w[0][a] + w[1][a];
            if (row - 1.0).abs() > 1e-12 || (col - 1.0).abs() > 1e-12 {
                return Err(AfcError::InvalidModel("line strengths must be doubly stochastic".into()));
            }
        }
        if w.iter().flatten().any(|&x| x < 0.0) {
            return Err(AfcError::InvalidModel("negative line strength".into()));
        }
        if !(0.0..=1.0).contains(&self.branching) || !(0.0..=1.0).contains(&self.pump) || self.class_step.is_nan() || self.class_step <= 0.0
        {
            return Err(AfcError::InvalidModel("branching, pump and class step out of range".into()));
        }
        Ok(())
    }

    /// Offset of line (a, b) from its class frequency, kHz.
    pub fn line_shift(&self, a: usize, b: usize) -> f64 {
        let sa = if a == 0 { -1.0 } else { 1.0 };
        let sb = if b == 0 { -1.0 } else { 1.0 };
        (sb * self.delta_e.abs() - sa * self.delta_g.abs()) / 2.0
    }

    /// One excitation/relaxation cycle; `lit[a][b]` selects burned lines.
    pub fn pump_cycle(&self, state: &mut ClassState, lit: &[[bool; 2]; 2]) {
        let w = &self.strengths;
        let mut excited = [0.0; 2];
        let mut ground = state.ground;
        for a in 0..2 {
            for b in 0..2 {
                if lit[a][b] {
                    let x = self.pump * w[a][b] * state.ground[a];
                    ground[a] -= x;
                    excited[b] += x;
                }
            }
        }
        for b in 0..2 {
            let mut returned = 0.0;
            for a in 0..2 {
                let back = self.branching * w[a][b] * excited[b];
                ground[a] += back;
                returned += back;
            }
            state.aux += excited[b] - returned;
        }
        state.ground = ground;
    }
}

/// Populations of every class after burning.
#[derive(Debug, Clone, PartialEq)]
pub struct BurnResult {
    pub model: PumpingModel,
    /// Class center frequencies, kHz.
    pub classes: Vec<f64>,
    pub states: Vec<ClassState>,
    pub cycles: usize,
    /// Largest population change during the last cycle.
    pub last_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleSpectrum {
    /// kHz
    pub detunings: Vec<f64>,
    /// Absorption relative to the unburnt line.
    pub absorption: Vec<f64>,
}

fn class_grid(model: &PumpingModel, mask: &BurnMask) -> Vec<f64> {
    let h = model.class_step;
    let reach = mask.reach() + model.delta_g.abs() + model.delta_e.abs() + 4.0 * h;
    let k = (reach / h).ceil() as i64;
    (-k..=k).map(|i| i as f64 * h).collect()
}

fn lit_lines(model: &PumpingModel, mask: &BurnMask, nu: f64) -> [[bool; 2]; 2] {
    let mut lit = [[false; 2]; 2];
    for (a, row) in lit.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = mask.burns(nu + model.line_shift(a, b));
        }
    }
    lit
}

/// Run `cycles` pump cycles on a flat inhomogeneous profile.
pub fn burn_comb(model: &PumpingModel, mask: &BurnMask, cycles: usize) -> Result<BurnResult, AfcError> {
    model.validate()?;
    let classes = class_grid(model, mask);
    let mut last_change = 0.0f64;
    let states = classes
        .iter()
        .map(|&nu| {
            let lit = lit_lines(model, mask, nu);
            let mut s = ClassState::thermal();
            let mut change = 0.0f64;
            for _ in 0..cycles {
                let before = s.ground;
                model.pump_cycle(&mut s, &lit);
                change = (s.ground[0] - before[0]).abs().max((s.ground[1] - before[1]).abs());
            }
            last_change = last_change.max(change);
            s
        })
        .collect();
    Ok(BurnResult { model: *model, classes, states, cycles, last_change })
}

/// Burn until no class changes by more than `tol` per cycle.
pub fn burn_until_steady(model: &PumpingModel, mask: &BurnMask, tol: f64, cycle_cap: usize) -> Result<BurnResult, AfcError> {
    model.validate()?;
    let classes = class_grid(model, mask);
    let lits: Vec<_> = classes.iter().map(|&nu| lit_lines(model, mask, nu)).collect();
    let mut states = vec![ClassState::thermal(); classes.len()];
    let mut change = f64::INFINITY;
    for cycle in 1..=cycle_cap {
        change = 0.0;
        for (s, lit) in states.iter_mut().zip(&lits) {
            let before = s.ground;
            model.pump_cycle(s, lit);
            change = change.max((s.ground[0] - before[0]).abs().max((s.ground[1] - before[1]).abs()));
        }
        if change <= tol {
            return Ok(BurnResult { model: *model, classes, states, cycles: cycle, last_change: change });
        }
    }
    Err(AfcError::NonConvergence { change, cycles: cycle_cap })
}

impl BurnResult {
    /// Every line (position, depth weight) of every class.
    fn lines(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = &self.model;
        self.classes.iter().zip(&self.states).flat_map(move |(&nu, s)| {
            (0..4).map(move |i| {
                let (a, b) = (i / 2, i % 2);
                (nu + m.line_shift(a, b), s.ground[a] * m.strengths[a][b])
            })
        })
    }

    fn lines_with_strength(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let m = &self.model;
        self.lines().enumerate().map(move |(i, (f, d))| (f, d, m.strengths[(i % 4) / 2][i % 2]))
    }

    /// Absorption binned on the class grid over [lo, hi], normalized so
    /// an unburnt ensemble reads 1.
    pub fn spectrum(&self, lo: f64, hi: f64) -> HoleSpectrum {
        let h = self.model.class_step;
        let k0 = (lo / h).floor() as i64;
        let k1 = (hi / h).ceil() as i64;
        let detunings: Vec<f64> = (k0..=k1).map(|k| k as f64 * h).collect();
        // Classes outside the simulated grid are thermal, so only the
        // deviation from ½ per line is binned on top of the unburnt level.
        let mut absorption = vec![1.0; detunings.len()];
        for (f, depth, weight) in self.lines_with_strength() {
            let k = (f / h).round() as i64;
            if (k0..=k1).contains(&k) {
                absorption[(k - k0) as usize] += depth - 0.5 * weight;
            }
        }
        HoleSpectrum { detunings, absorption }
    }

    /// (d̄, c₁) of the depth profile over the band |f| ≤ bandwidth/2 for
    /// peak optical depth `d0`.
    pub fn comb_moments(&self, d0: f64, period: f64, bandwidth: f64) -> (f64, C64) {
        let h = self.model.class_step;
        let bins = (bandwidth / h).round() + 1.0;
        let mut s0 = 0.0;
        let mut s1 = C64::new(0.0, 0.0);
        for (f, depth) in self.lines() {
            if f.abs() <= bandwidth / 2.0 {
                s0 += d0 * depth;
                s1 += C64::from_polar(d0 * depth, 2.0 * PI * f / period);
            }
        }
        (s0 / bins, s1 / bins)
    }

    /// Effective comb read out from the burned populations.
    pub fn comb_spec(&self, d0: f64, period: f64, bandwidth: f64, finesse: f64) -> CombSpec {
        let (dbar, c1) = self.comb_moments(d0, period, bandwidth);
        let eta_deph = if dbar > 0.0 { (c1.norm_sqr() / (dbar * dbar)).min(1.0) } else { 0.0 };
        CombSpec { delta_afc: period, bandwidth, finesse, d_eff: dbar, eta_deph }
    }

    pub fn efficiency(&self, d0: f64, period: f64, bandwidth: f64) -> f64 {
        let (dbar, c1) = self.comb_moments(d0, period, bandwidth);
        c1.norm_sqr() * (-dbar).exp()
    }
}

/// Largest absorption excess over the unburnt level outside the burned
/// region.
pub fn anti_hole_amplitude(spectrum: &HoleSpectrum, mask: &BurnMask) -> f64 {
    spectrum.detunings.iter().zip(&spectrum.absorption).filter(|(f, _)| !mask.burns(**f)).map(|(_, a)| a - 1.0).fold(0.0, f64::max)
}

/// Comb and burning settings shared by all cells of a ratio map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfcSettings {
    pub bandwidth: f64,
    pub finesse: f64,
    /// Peak optical depth of the unburnt line.
    pub d0: f64,
    pub cycles: usize,
    pub pump: f64,
    pub class_step: f64,
}

impl Default for AfcSettings {
    fn default() -> Self {
        Self { bandwidth: 600.0, finesse: 3.0, d0: 3.0, cycles: 200, pump: 0.5, class_step: 1.0 }
    }
}

/// Optical transition data of one field direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfcTransition {
    /// kHz/mT
    pub g_g: f64,
    /// kHz/mT
    pub g_e: f64,
    /// Cross-line fraction |V₁₂|².
    pub cross: f64,
    /// b²
    pub branching: f64,
}

/// η after burning at field `b` for period `period`.
pub fn comb_efficiency_at(tr: &AfcTransition, settings: &AfcSettings, b: f64, period: f64) -> Result<f64, AfcError> {
    let mut model = PumpingModel::new(tr.g_g * b.abs(), tr.g_e * b.abs(), tr.cross, tr.branching).with_class_step(settings.class_step);
    model.pump = settings.pump;
    let mask = BurnMask::Comb { period, bandwidth: settings.bandwidth, finesse: settings.finesse };
    let burned = burn_comb(&model, &mask, settings.cycles)?;
    Ok(burned.efficiency(settings.d0, period, settings.bandwidth))
}

/// η(B)/η(0) on a (B, Δ_AFC) grid; rows follow `b_grid`.
pub fn efficiency_ratio_map(
    tr: &AfcTransition,
    settings: &AfcSettings,
    b_grid: &[f64],
    period_grid: &[f64],
) -> Vec<Vec<Result<f64, AfcError>>> {
    let reference: Vec<Result<f64, AfcError>> = period_grid.par_iter().map(|&p| comb_efficiency_at(tr, settings, 0.0, p)).collect();
    b_grid
        .par_iter()
        .map(|&b| {
            period_grid
                .iter()
                .zip(&reference)
                .map(|(&p, r0)| {
                    let r0 = r0.clone()?;
                    let eta = comb_efficiency_at(tr, settings, b, p)?;
                    Ok(if r0 > 0.0 { eta / r0 } else { 0.0 })
                })
                .collect()
        })
        .collect()
}
