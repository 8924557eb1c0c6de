//! Uniformly sampled traces and their windowed, zero-padded DFT.

use crate::linalg::C64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Uniformly sampled real signal; times in μs.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeTrace {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.t0 + k as f64 * self.dt)
    }

    pub fn from_fn(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self { t0, dt, values: (0..n).map(|k| f(t0 + k as f64 * dt)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Self::Rectangular => vec![1.0; n],
            Self::Hann if n < 2 => vec![1.0; n],
            Self::Hann => (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub window: Window,
    /// Zero-padding factor.
    pub padding: usize,
    /// Subtract the mean before windowing.
    pub detrend: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { window: Window::Hann, padding: 4, detrend: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// kHz
    pub freq: f64,
    /// Window-corrected one-sided amplitude.
    pub amplitude: f64,
}

/// Two-sided DFT in FFT order. `amps` are scaled by 1/Σw so a cosine of
/// amplitude A shows up as A/2 on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// kHz, FFT order (negative frequencies in the upper half).
    pub freqs: Vec<f64>,
    pub amps: Vec<C64>,
    pub options: SpectrumOptions,
    /// Σ of window weights.
    pub window_sum: f64,
    pub n_samples: usize,
}

fn prepare(trace: &TimeTrace, opts: &SpectrumOptions) -> (Vec<f64>, f64) {
    let n = trace.values.len();
    let mean = if opts.detrend && n > 0 { trace.values.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let w = opts.window.weights(n);
    let sum = w.iter().sum();
    (trace.values.iter().zip(&w).map(|(x, wk)| (x - mean) * wk).collect(), sum)
}

pub fn spectrum(trace: &TimeTrace, opts: &SpectrumOptions) -> Spectrum {
    let n = trace.values.len();
    let (windowed, window_sum) = prepare(trace, opts);
    let npad = (n * opts.padding.max(1)).max(1);
    let mut buf: Vec<C64> = windowed.iter().map(|&x| C64::from(x)).collect();
    buf.resize(npad, C64::from(0.0));
    FftPlanner::new().plan_fft_forward(npad).process(&mut buf);
    let scale = if window_sum != 0.0 { 1.0 / window_sum } else { 0.0 };
    let df = 1e3 / (npad as f64 * trace.dt);
    let freqs = (0..npad).map(|k| if 2 * k <= npad { k as f64 * df } else { (k as f64 - npad as f64) * df }).collect();
    Spectrum { freqs, amps: buf.into_iter().map(|z| z * scale).collect(), options: *opts, window_sum, n_samples: n }
}

impl Spectrum {
    /// Bin spacing, kHz.
    pub fn bin_width(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Natural resolution 1/(N·dt) of the unpadded record, kHz.
    pub fn resolution(&self) -> f64 {
        self.bin_width() * self.options.padding.max(1) as f64
    }

    /// One-sided (freq, amplitude) pairs, DC through Nyquist.
    pub fn one_sided(&self) -> Vec<(f64, f64)> {
        let half = self.amps.len() / 2;
        (0..=half.min(self.amps.len().saturating_sub(1)))
            .map(|k| {
                let m = if k == 0 || 2 * k == self.amps.len() { 1.0 } else { 2.0 };
                (self.freqs[k], m * self.amps[k].norm())
            })
            .collect()
    }

    /// Relative Parseval defect against the trace the spectrum came from.
    pub fn parseval_residual(&self, trace: &TimeTrace) -> f64 {
        let (windowed, _) = prepare(trace, &self.options);
        let time_energy: f64 = windowed.iter().map(|x| x * x).sum();
        let freq_energy: f64 = self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.window_sum.powi(2) / self.amps.len() as f64;
        if time_energy == 0.0 {
            return freq_energy;
        }
        (freq_energy - time_energy).abs() / time_energy
    }

    /// Local maxima of the one-sided amplitude above `rel_threshold`·max,
    /// DC excluded, refined by parabolic interpolation. Sorted by frequency.
    pub fn peaks(&self, rel_threshold: f64) -> Vec<Peak> {
        let one = self.one_sided();
        let max = one.iter().skip(1).map(|p| p.1).fold(0.0, f64::max);
        if max == 0.0 {
            return Vec::new();
        }
        let df = self.bin_width();
        let mut out = Vec::new();
        for k in 2..one.len().saturating_sub(1) {
            let (a, b, c) = (one[k - 1].1, one[k].1, one[k + 1].1);
            if b > a && b >= c && b >= rel_threshold * max {
                let denom = a - 2.0 * b + c;
                let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
                out.push(Peak { freq: one[k].0 + shift * df, amplitude: b - 0.25 * (a - c) * shift });
            }
        }
        out
    }

    /// Largest one-sided amplitude within ±`halfwidth` kHz of `freq`.
    pub fn amplitude_near(&self, freq: f64, halfwidth: f64) -> f64 {
        self.one_sided().into_iter().filter(|(f, _)| (f - freq).abs() <= halfwidth).map(|p| p.1).fold(0.0, f64::max)
    }

    /// Largest one-sided amplitude excluding DC.
    pub fn max_amplitude(&self) -> f64 {
        self.one_sided().into_iter().skip(1).map(|p| p.1).fold(0.0, f64::max)
    }
}
