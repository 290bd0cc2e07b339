//! Zero-phase Butterworth band-pass for detector traces.
//!
//! The band is a cascade of a Butterworth high-pass at `f_lo` and a
//! Butterworth low-pass at `f_hi`, each built from second-order sections via
//! the bilinear transform with frequency prewarping. Filtering runs forward
//! and backward, so the applied magnitude response is `|H(f)|²` with zero
//! phase. A cutoff at or above Nyquist drops the low-pass stage; `f_lo = 0`
//! drops the high-pass stage.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{PatError, Result};
use crate::forward_fd::SpectralData;
use crate::forward_td::Sinogram;

pub const DEFAULT_ORDER: usize = 4;

/// Direct-form II transposed biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn lowpass(k: f64, q: f64) -> Self {
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    fn highpass(k: f64, q: f64) -> Self {
        let norm = 1.0 / (1.0 + k / q + k * k);
        Self {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::cis(-omega);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }

    /// State that makes a constant input `x` produce a constant output.
    fn steady_state(&self, x: f64) -> ([f64; 2], f64) {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let y = gain * x;
        let s2 = self.b[2] * x - self.a[1] * y;
        let s1 = y - self.b[0] * x;
        ([s1, s2], y)
    }
}

/// Butterworth pole-pair quality factors for an even order.
fn butterworth_q(order: usize) -> Vec<f64> {
    (0..order / 2)
        .map(|k| 1.0 / (2.0 * ((2 * k + 1) as f64 * PI / (2 * order) as f64).cos()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandPass {
    pub f_lo: f64,
    pub f_hi: f64,
    pub sample_rate: f64,
    pub order: usize,
    pub sections: Vec<Biquad>,
}

impl BandPass {
    pub fn new(f_lo: f64, f_hi: f64, sample_rate: f64, order: usize) -> Result<Self> {
        if !(f_lo >= 0.0 && f_lo < f_hi) {
            return Err(PatError::invalid(format!(
                "band-pass needs 0 <= f_lo < f_hi, got [{f_lo}, {f_hi}]"
            )));
        }
        if order == 0 || order % 2 != 0 {
            return Err(PatError::invalid(format!(
                "Butterworth order must be even and positive, got {order}"
            )));
        }
        let nyquist = sample_rate / 2.0;
        if f_lo >= nyquist {
            return Err(PatError::invalid(format!(
                "lower cutoff {f_lo} Hz is not below Nyquist {nyquist} Hz"
            )));
        }
        let qs = butterworth_q(order);
        let mut sections = Vec::new();
        if f_lo > 0.0 {
            let k = (PI * f_lo / sample_rate).tan();
            sections.extend(qs.iter().map(|&q| Biquad::highpass(k, q)));
        }
        let f_hi = f_hi.min(nyquist);
        if f_hi < nyquist {
            let k = (PI * f_hi / sample_rate).tan();
            sections.extend(qs.iter().map(|&q| Biquad::lowpass(k, q)));
        }
        Ok(Self {
            f_lo,
            f_hi,
            sample_rate,
            order,
            sections,
        })
    }

    /// One-pass complex response at frequency `f`.
    pub fn response(&self, f: f64) -> Complex64 {
        let omega = 2.0 * PI * f / self.sample_rate;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    /// Magnitude applied by the forward-backward filter, `|H(f)|²`.
    pub fn zero_phase_gain(&self, f: f64) -> f64 {
        self.response(f).norm_sqr()
    }

    pub fn describe(&self) -> String {
        format!(
            "butterworth order={} f_lo_hz={} f_hi_hz={} zero_phase=forward_backward",
            self.order, self.f_lo, self.f_hi
        )
    }

    fn run(&self, x: &mut [f64]) {
        let mut input0 = x[0];
        for s in &self.sections {
            let (mut state, y0) = s.steady_state(input0);
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + state[0];
                state[0] = s.b[1] * xin - s.a[0] * y + state[1];
                state[1] = s.b[2] * xin - s.a[1] * y;
                *v = y;
            }
            input0 = y0;
        }
    }

    /// Zero-phase filtering of one trace with odd-extension padding.
    pub fn filtfilt(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n < 2 || self.sections.is_empty() {
            return signal.to_vec();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * signal[0] - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * signal[n - 1] - signal[n - 1 - i]));
        self.run(&mut ext);
        ext.reverse();
        self.run(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    pub fn apply_sinogram(&self, sino: &Sinogram) -> Sinogram {
        let mut out = sino.clone();
        for l in 0..sino.n_sensors {
            let filtered = self.filtfilt(sino.trace(l));
            out.trace_mut(l).copy_from_slice(&filtered);
        }
        out
    }

    /// Applies the zero-phase gain to spectra bin by bin.
    pub fn apply_spectra(&self, spectra: &SpectralData) -> SpectralData {
        let gains: Vec<f64> = spectra
            .freqs
            .frequencies()
            .iter()
            .map(|&f| self.zero_phase_gain(f))
            .collect();
        let mut out = spectra.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v *= gains[i % gains.len()];
        }
        out
    }
}

/// Zero-phase band-pass of every trace; `f_hi` is clamped to Nyquist.
pub fn bandpass(sino: &Sinogram, f_lo: f64, f_hi: f64) -> Result<Sinogram> {
    let filter = BandPass::new(f_lo, f_hi, 1.0 / sino.dt, DEFAULT_ORDER)?;
    Ok(filter.apply_sinogram(sino))
}
