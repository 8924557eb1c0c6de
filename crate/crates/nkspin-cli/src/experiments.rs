//! The named experiments. Each returns its tables plus per-point failure
//! messages; a failing point never stops the others.

use nkspin::afc::{efficiency_ratio_map, matching_conditions, AfcSettings, AfcTransition, MatchingConditions};
use nkspin::drive::{eigenvalues, quality_factor, tau_l, FourLevelDrive};
use nkspin::echo::{beat_bound, beat_spectrum, predicted_beats, ts_sweep, DoubletRoles, EchoSystem, Variant};
use nkspin::fixture::Fixture;
use nkspin::levels::{optical_coupling, transition_coupling, FieldVector, LevelNote};
use nkspin::odnmr::{odnmr_trace, pair_frequency, ClassEnsemble};
use nkspin::pulse::{transfer_map, DriveContext, IntegratorOptions, SechPulse};
use nkspin::spectrum::{spectrum, Spectrum, SpectrumOptions, Window};

use crate::config::{EchoVariant, Ensemble, Experiment, RunConfig};
use crate::output::{num, Table};
use crate::CliError;

pub struct Outcome {
    pub tables: Vec<Table>,
    pub diagnostics: Vec<String>,
}

pub fn run(config: &RunConfig, fx: &Fixture) -> Result<Outcome, CliError> {
    // an unknown direction is a config error, caught before any work
    fx.field(&config.direction, 0.0).map_err(|e| CliError::Config(e.to_string()))?;
    match config.experiment {
        Experiment::Levels => Ok(levels(config, fx)),
        Experiment::Eigenvalues => Ok(eigen(config, fx)),
        Experiment::Odnmr => Ok(odnmr(config, fx)),
        Experiment::PulseMap => pulse_map(config, fx),
        Experiment::AfcMap => Ok(afc_map(config, fx)),
        Experiment::Echo => Ok(echo(config, fx)),
    }
}

fn field(config: &RunConfig, fx: &Fixture, b: f64) -> FieldVector {
    fx.field(&config.direction, b).expect("direction checked")
}

fn warn_notes(b: f64, level: &str, notes: &[LevelNote]) {
    for n in notes {
        if let LevelNote::NearCrossingWarning { ratio } = n {
            eprintln!("warning: B={b} mT {level}: splitting/gap ratio {ratio:.3e}, first-order Zeeman picture degrading");
        }
    }
}

fn levels(config: &RunConfig, fx: &Fixture) -> Outcome {
    let mut t = Table::new("levels.csv", &["b_mt", "level", "doublet", "energy_mhz", "g_khz_per_mt", "splitting_khz"]);
    for b in config.b.values() {
        let f = field(config, fx, b);
        for (name, lv) in [("ground", fx.ground_levels(&f)), ("excited", fx.excited_levels(&f))] {
            warn_notes(b, name, &lv.notes);
            for k in 0..lv.n() {
                t.push(vec![num(b), name.into(), k.to_string(), num(lv.energies[k]), num(lv.g[k]), num(lv.delta[k])]);
            }
        }
    }
    Outcome { tables: vec![t], diagnostics: Vec::new() }
}

/// RF drive of the (±3/2, ±1/2) ground transition at field `b`, plus Q.
fn rf_drive(config: &RunConfig, fx: &Fixture, b: f64) -> (FourLevelDrive, f64) {
    let g = fx.ground_levels(&field(config, fx, b));
    let c = transition_coupling(&g, 1, 0, &fx.rf_axis);
    let d = FourLevelDrive::resonant(config.rabi, c.u1(), c.u2()).with_splittings(g.delta[1], g.delta[0]).with_detuning(config.detuning);
    let q = quality_factor(g.g[1], g.g[0], config.detuning, d.omega1());
    (d, q)
}

fn eigen(config: &RunConfig, fx: &Fixture) -> Outcome {
    let mut t = Table::new(
        "eigenvalues.csv",
        &["b_mt", "q", "exact_1", "exact_2", "exact_3", "exact_4", "approx_1", "approx_2", "approx_3", "approx_4"],
    );
    for b in config.b.values() {
        let (d, q) = rf_drive(config, fx, b);
        let e = eigenvalues(&d);
        let mut row = vec![num(b), num(q)];
        row.extend(e.exact.iter().chain(&e.approx).map(|x| num(*x)));
        t.push(row);
    }
    Outcome { tables: vec![t], diagnostics: Vec::new() }
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn odnmr(config: &RunConfig, fx: &Fixture) -> Outcome {
    let o = &config.odnmr;
    let ensemble = match o.ensemble {
        Ensemble::Standard => ClassEnsemble::standard(),
        Ensemble::SinglePure => ClassEnsemble::single_pure(),
    };
    let opts = SpectrumOptions { window: Window::Hann, padding: o.padding, detrend: true };
    let mut trace_t = Table::new("trace.csv", &["b_mt", "t_us", "intensity"]);
    let mut spec_t = Table::new("spectrum.csv", &["b_mt", "freq_khz", "amplitude"]);
    let mut peak_t = Table::new("peaks.csv", &["b_mt", "freq_khz", "amplitude", "nearest_mode", "mode_freq_khz"]);
    let mut modes_t = Table::new("modes.csv", &["b_mt", "mode", "freq_khz"]);
    let mut diagnostics = Vec::new();
    for b in config.b.values() {
        let levels = fx.ground_levels(&field(config, fx, b));
        let drive = DriveContext::from_levels(&levels, 1, 0, &fx.rf_axis).at(config.rabi, config.detuning);
        let eig = eigenvalues(&drive);
        let modes: Vec<(String, f64)> = PAIRS.iter().map(|&(k, l)| (format!("w{}{}", k + 1, l + 1), pair_frequency(&eig, k, l))).collect();
        for (label, f) in &modes {
            modes_t.push(vec![num(b), label.clone(), num(*f)]);
        }
        let trace = match odnmr_trace(&drive, &ensemble, o.duration, o.dt, o.damping) {
            Ok(t) => t,
            Err(e) => {
                diagnostics.push(format!("B={b} mT: {e}"));
                continue;
            }
        };
        for (t, v) in trace.times().zip(&trace.values) {
            trace_t.push(vec![num(b), num(t), num(*v)]);
        }
        let s = spectrum(&trace, &opts);
        write_spectrum(&mut spec_t, b, &s);
        for p in s.peaks(config.peak_threshold) {
            let (label, f) = modes.iter().min_by(|x, y| (x.1 - p.freq).abs().total_cmp(&(y.1 - p.freq).abs())).unwrap();
            peak_t.push(vec![num(b), num(p.freq), num(p.amplitude), label.clone(), num(*f)]);
        }
    }
    Outcome { tables: vec![trace_t, spec_t, peak_t, modes_t], diagnostics }
}

fn write_spectrum(t: &mut Table, b: f64, s: &Spectrum) {
    for (f, a) in s.one_sided() {
        t.push(vec![num(b), num(f), num(a)]);
    }
}

fn pulse_map(config: &RunConfig, fx: &Fixture) -> Result<Outcome, CliError> {
    let p = &config.pulse;
    let base = SechPulse::new(p.fwhm, 0.0, config.rabi).map_err(|e| CliError::Config(e.to_string()))?;
    let opts = IntegratorOptions { tolerance: p.tolerance, max_refinements: p.max_refinements, ..IntegratorOptions::default() };
    let ctx = |b: f64| DriveContext::from_levels(&fx.ground_levels(&field(config, fx, b)), 1, 0, &fx.rf_axis);
    let pulse = |chirp: f64| SechPulse { chirp, ..base }.with_truncation(p.truncation);
    let map = transfer_map(ctx, pulse, &config.b.values(), &p.chirp.values(), &opts);
    let mut t = Table::new("transfer.csv", &["b_mt", "chirp_khz", "transfer"]);
    let mut diagnostics = Vec::new();
    for (b, row) in map.b.iter().zip(&map.cells) {
        for (c, cell) in map.chirp.iter().zip(row) {
            let v = match cell {
                Ok(v) => *v,
                Err(e) => {
                    diagnostics.push(format!("B={b} mT chirp={c} kHz: {e}"));
                    f64::NAN
                }
            };
            t.push(vec![num(*b), num(*c), num(v)]);
        }
    }
    Ok(Outcome { tables: vec![t], diagnostics })
}

fn afc_map(config: &RunConfig, fx: &Fixture) -> Outcome {
    let a = &config.afc;
    let unit = field(config, fx, 1.0);
    let g = fx.ground_levels(&unit);
    let e = fx.excited_levels(&unit);
    let o = optical_coupling(&g, 0, &e, 2);
    let tr = AfcTransition { g_g: g.g[0], g_e: e.g[2], cross: o.u[(0, 1)].norm_sqr(), branching: o.mu * o.mu };
    let settings =
        AfcSettings { bandwidth: a.bandwidth, finesse: a.finesse, d0: a.d0, cycles: a.cycles, pump: a.pump, class_step: a.class_step };
    let (bs, periods) = (config.b.values(), a.period.values());
    let map = efficiency_ratio_map(&tr, &settings, &bs, &periods);
    let mut t = Table::new("ratio.csv", &["b_mt", "period_khz", "ratio"]);
    let mut diagnostics = Vec::new();
    for (b, row) in bs.iter().zip(&map) {
        for (p, cell) in periods.iter().zip(row) {
            let v = match cell {
                Ok(v) => *v,
                Err(e) => {
                    diagnostics.push(format!("B={b} mT period={p} kHz: {e}"));
                    f64::NAN
                }
            };
            t.push(vec![num(*b), num(*p), num(v)]);
        }
    }
    let mut loci = Table::new("loci.csv", &["b_mt", "kind", "n", "period_khz"]);
    for &b in &bs {
        if let MatchingConditions::Discrete { side_hole, anti_hole } = matching_conditions(b, tr.g_e, tr.g_g, 6) {
            for (kind, list) in [("side_hole", side_hole), ("anti_hole", anti_hole)] {
                for (n, p) in list {
                    loci.push(vec![num(b), kind.into(), n.to_string(), num(p)]);
                }
            }
        }
    }
    Outcome { tables: vec![t, loci], diagnostics }
}

fn echo(config: &RunConfig, fx: &Fixture) -> Outcome {
    let e = &config.echo;
    let variant = match e.variant {
        EchoVariant::Centered => Variant::Centered,
        EchoVariant::Shifted => Variant::Shifted,
    };
    let pulses = 2.0 * tau_l(config.rabi, 0);
    let start = e.ts_start.unwrap_or(pulses);
    let grid: Vec<f64> = (0..e.ts_points).map(|k| start + e.ts_step * k as f64).collect();
    let t_ref = 0.5 * (grid[0] + grid[grid.len() - 1]) - pulses;
    let mut sweep_t = Table::new("sweep.csv", &["b_mt", "ts_us", "efficiency"]);
    let mut spec_t = Table::new("spectrum.csv", &["b_mt", "freq_khz", "amplitude"]);
    let mut peak_t = Table::new("peaks.csv", &["b_mt", "freq_khz", "amplitude"]);
    let mut pred_t = Table::new("predicted.csv", &["b_mt", "freq_khz", "amplitude"]);
    let mut diagnostics = Vec::new();
    for b in config.b.values() {
        let sys = EchoSystem::from_fixture(fx, &config.direction, b, config.rabi, DoubletRoles::default()).expect("direction checked");
        let result = ts_sweep(&sys, variant, &grid).and_then(|eff| beat_spectrum(&grid, &eff, beat_bound(&sys)).map(|s| (eff, s)));
        let (eff, s) = match result {
            Ok(x) => x,
            Err(err) => {
                diagnostics.push(format!("B={b} mT: {err}"));
                continue;
            }
        };
        for (ts, v) in grid.iter().zip(&eff) {
            sweep_t.push(vec![num(b), num(*ts), num(*v)]);
        }
        write_spectrum(&mut spec_t, b, &s);
        for p in s.peaks(config.peak_threshold) {
            peak_t.push(vec![num(b), num(p.freq), num(p.amplitude)]);
        }
        for l in predicted_beats(&sys, variant, 0.5 * s.resolution(), t_ref) {
            pred_t.push(vec![num(b), num(l.freq), num(l.amplitude)]);
        }
    }
    Outcome { tables: vec![sweep_t, spec_t, peak_t, pred_t], diagnostics }
}
