//! Zero-phase second-order IIR notch.

use rayon::prelude::*;

use super::PreprocessError;
use crate::signal_io::Recording;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    pub notch_freq: f64,
    pub quality_factor: f64,
    pub sample_rate: f64,
}

impl FilterSpec {
    /// 60 Hz line-noise notch with Q = 30.
    pub fn line_noise(sample_rate: f64) -> Self {
        FilterSpec {
            notch_freq: 60.0,
            quality_factor: 30.0,
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let nyquist = self.sample_rate / 2.0;
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(PreprocessError::Config(format!(
                "sample rate {} must be positive",
                self.sample_rate
            )));
        }
        if !(self.notch_freq > 0.0 && self.notch_freq < nyquist) {
            return Err(PreprocessError::Config(format!(
                "notch frequency {} Hz must lie in (0, {nyquist}) Hz",
                self.notch_freq
            )));
        }
        if !(self.quality_factor.is_finite() && self.quality_factor > 0.0) {
            return Err(PreprocessError::Config(format!(
                "quality factor {} must be positive",
                self.quality_factor
            )));
        }
        Ok(())
    }
}

/// Normalized biquad, `a0 == 1`, run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Notch with unit gain at DC and Nyquist and a -3 dB bandwidth of
    /// `notch_freq / quality_factor`.
    pub fn notch(spec: &FilterSpec) -> Result<Self, PreprocessError> {
        spec.validate()?;
        let w0 = 2.0 * std::f64::consts::PI * spec.notch_freq / spec.sample_rate;
        let bandwidth = w0 / spec.quality_factor;
        let gain = 1.0 / (1.0 + (bandwidth / 2.0).tan());
        let cos = w0.cos();
        Ok(Biquad {
            b: [gain, -2.0 * gain * cos, gain],
            a: [-2.0 * gain * cos, 2.0 * gain - 1.0],
        })
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Magnitude response at `freq` Hz.
    pub fn magnitude(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / sample_rate;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (
            1.0 + self.a[0] * c1 + self.a[1] * c2,
            self.a[0] * s1 + self.a[1] * s2,
        );
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    /// Filter state that makes a constant input of 1 a fixed point.
    fn steady_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }

    /// Samples for the impulse response envelope to fall below 1e-3.
    fn settle_len(&self) -> usize {
        let radius = self.a[1].abs().sqrt();
        if radius <= 0.0 || radius >= 1.0 {
            return 0;
        }
        ((1e-3f64).ln() / radius.ln()).ceil() as usize
    }

    /// Forward-backward filtering with odd-reflection padding and
    /// steady-state initial conditions.
    pub fn filtfilt(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.settle_len().max(9).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (signal[0], signal[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

        let zi = self.steady_state();
        let x0 = ext[0];
        self.run(&mut ext, [zi[0] * x0, zi[1] * x0]);
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, [zi[0] * y0, zi[1] * y0]);
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }
}

/// Zero-phase notch filter of one channel.
pub fn notch_filter(signal: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, PreprocessError> {
    let biquad = Biquad::notch(spec)?;
    if signal.is_empty() {
        return Err(PreprocessError::Empty(
            "cannot filter an empty signal".into(),
        ));
    }
    Ok(biquad.filtfilt(signal))
}

/// Filters every channel of a recording; channels run in parallel.
pub fn notch_recording(
    recording: &Recording,
    spec: &FilterSpec,
) -> Result<Recording, PreprocessError> {
    if (spec.sample_rate - recording.sample_rate as f64).abs() > 1e-9 {
        return Err(PreprocessError::Config(format!(
            "filter designed for {} Hz, recording is {} Hz",
            spec.sample_rate, recording.sample_rate
        )));
    }
    let biquad = Biquad::notch(spec)?;
    let mut out = recording.clone();
    out.channels.par_iter_mut().for_each(|c| {
        if !c.samples.is_empty() {
            c.samples = biquad.filtfilt(&c.samples);
        }
        c.calibration = None;
    });
    Ok(out)
}
