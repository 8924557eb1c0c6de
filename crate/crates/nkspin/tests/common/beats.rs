//! Path-sum oracle for the storage-time beats of the echo model, built
//! from first principles: matrices are assembled here and the free time is
//! expanded level by level.

use nalgebra::{DMatrix, DVector};
use nkspin::drive::{propagator_exact, tau_l};
use nkspin::echo::{EchoSystem, Variant};
use nkspin::spectrum::Spectrum;
use nkspin::C64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct Line {
    /// kHz
    pub freq: f64,
    pub amp: f64,
}

/// Level energies (rad/μs) in the order s−, s+, g−, g+, e−, e+; the free
/// propagator is diag(exp(iE t)).
fn energies(sys: &EchoSystem) -> [f64; 6] {
    let w = |khz: f64| 2.0 * PI * khz * 1e-3 / 2.0;
    let (s, g, e) = (w(sys.rf.delta_s), w(sys.rf.delta_g), w(sys.delta_e));
    [s, -s, g, -g, e, -e]
}

/// exp(−i·area/2·(V-coupling + h.c.)) between ground rows `ground..ground+2`
/// and the excited doublet.
fn optical(v: &nalgebra::Matrix2<C64>, ground: usize, area: f64) -> DMatrix<C64> {
    let mut h = DMatrix::<C64>::zeros(6, 6);
    for i in 0..2 {
        for j in 0..2 {
            h[(ground + i, 4 + j)] = v[(i, j)];
            h[(4 + j, ground + i)] = v[(i, j)].conj();
        }
    }
    super::expm(&(h * C64::new(0.0, -area / 2.0)))
}

fn rf(sys: &EchoSystem) -> DMatrix<C64> {
    let p = propagator_exact(&sys.rf, tau_l(sys.rf.omega0, 0)).u;
    let mut u = DMatrix::<C64>::identity(6, 6);
    for i in 0..4 {
        for j in 0..4 {
            u[(i, j)] = p[(i, j)];
        }
    }
    u
}

fn key(rate: f64) -> i64 {
    (rate * 1e9).round() as i64
}

/// All cosine components of efficiency(T), T the free time: frequency in
/// kHz and complex amplitude at T = 0 (efficiency = DC + Σ Re(c·e^{iωT})).
pub fn components(sys: &EchoSystem, variant: Variant) -> Vec<(f64, C64)> {
    let f = variant.fractions();
    let e = energies(sys);
    let o1 = optical(&sys.opt_g.u, 2, PI / 2.0);
    let o2 = optical(&sys.opt_s.u, 0, PI);
    let r = rf(sys);
    let mut out: BTreeMap<i64, (f64, C64)> = BTreeMap::new();
    for start in [2, 3] {
        let psi0 = DVector::<C64>::from_fn(6, |i, _| C64::from(if i == start { 1.0 } else { 0.0 }));
        let prepared = &o2 * &o1 * psi0;
        // ψ(T) = Σ x_rate·e^{i·rate·T}
        let mut paths: BTreeMap<i64, (f64, DVector<C64>)> = BTreeMap::new();
        for i1 in 0..6 {
            for i2 in 0..6 {
                for i3 in 0..6 {
                    let weight = r[(i2, i1)] * r[(i3, i2)] * prepared[i1];
                    if weight.norm() < 1e-15 {
                        continue;
                    }
                    let x = o2.column(i3) * weight;
                    let rate = f[0] * e[i1] + f[1] * e[i2] + f[2] * e[i3];
                    let slot = paths.entry(key(rate)).or_insert((rate, DVector::zeros(6)));
                    slot.1 += x;
                }
            }
        }
        // amplitude(T) = b·Σ ψ_g†·V·ψ_e
        let mut amp: BTreeMap<i64, (f64, C64)> = BTreeMap::new();
        for (ra, xa) in paths.values() {
            for (rb, xb) in paths.values() {
                let mut c = C64::from(0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        c += xa[2 + a].conj() * sys.opt_g.u[(a, b)] * xb[4 + b];
                    }
                }
                let slot = amp.entry(key(rb - ra)).or_insert((rb - ra, C64::from(0.0)));
                slot.1 += c * sys.opt_g.mu;
            }
        }
        // ½ per start, ×2 for the conjugate pair
        for (wa, ca) in amp.values() {
            for (wb, cb) in amp.values() {
                if wa - wb > 1e-9 {
                    let slot = out.entry(key(wa - wb)).or_insert((wa - wb, C64::from(0.0)));
                    slot.1 += ca * cb.conj();
                }
            }
        }
    }
    out.into_values().map(|(w, c)| (w * 1e3 / (2.0 * PI), c)).filter(|(_, c)| c.norm() > 1e-14).collect()
}

/// Components clustered within `cluster` kHz, summed coherently at free
/// time `t_ref` μs.
pub fn lines(components: &[(f64, C64)], cluster: f64, t_ref: f64) -> Vec<Line> {
    let mut out: Vec<(f64, f64, C64, f64)> = Vec::new(); // (last freq, Σ f·|c|, Σ c·phase, Σ|c|)
    for &(f, c) in components {
        let z = c * C64::from_polar(1.0, 2.0 * PI * f * 1e-3 * t_ref);
        match out.last_mut() {
            Some(g) if f - g.0 <= cluster => {
                g.0 = f;
                g.1 += f * c.norm();
                g.2 += z;
                g.3 += c.norm();
            }
            _ => out.push((f, f * c.norm(), z, c.norm())),
        }
    }
    out.into_iter().map(|g| Line { freq: g.1 / g.3, amp: g.2.norm() }).collect()
}

/// Efficiency(T) rebuilt from the components, without the DC term.
pub fn synthesize(components: &[(f64, C64)], t: f64) -> f64 {
    components.iter().map(|(f, c)| (c * C64::from_polar(1.0, 2.0 * PI * f * 1e-3 * t)).re).sum()
}

/// Relative thresholds for the peak-set comparison: lines above `REQUIRED`
/// of the strongest must be found; a simulated peak must sit on a line
/// above `ALLOWED`. The gap between them absorbs window sidelobes.
pub const REQUIRED: f64 = 0.05;
pub const ALLOWED: f64 = 0.01;

/// Checks that the simulated peak set equals the oracle line set within
/// one bin. Lines below twice the resolution are not resolvable from DC
/// and are left out.
pub fn compare_peak_sets(sim: &Spectrum, oracle: &[Line]) -> Result<Vec<f64>, String> {
    let bin = sim.bin_width();
    let floor = 2.0 * sim.resolution();
    let sim_peaks: Vec<f64> = sim.peaks(REQUIRED).into_iter().map(|p| p.freq).filter(|&f| f > floor).collect();
    let top = oracle.iter().filter(|l| l.freq > floor).map(|l| l.amp).fold(0.0, f64::max);
    let required: Vec<f64> = oracle.iter().filter(|l| l.freq > floor && l.amp >= REQUIRED * top).map(|l| l.freq).collect();
    let allowed: Vec<f64> = oracle.iter().filter(|l| l.freq > floor && l.amp >= ALLOWED * top).map(|l| l.freq).collect();
    for f in &sim_peaks {
        if !allowed.iter().any(|g| (f - g).abs() <= bin) {
            return Err(format!("simulated peak at {f:.3} kHz has no oracle line; oracle {required:?}"));
        }
    }
    for g in &required {
        if !sim_peaks.iter().any(|f| (f - g).abs() <= bin) {
            return Err(format!("oracle line at {g:.3} kHz missing; simulated {sim_peaks:?}"));
        }
    }
    Ok(sim_peaks)
}
