//! Pan–Tompkins style R-peak detection.
//!
//! Band-pass (5–15 Hz) -> five-point derivative -> squaring -> 150 ms
//! moving-window integration -> adaptive dual threshold with search-back.
//! Each accepted QRS is localized at the raw-signal maximum nearby and
//! refined to sub-sample precision with a parabolic fit.

use crate::error::{Error, Result};
use crate::hrv::rr::RrSeries;

pub const MIN_SAMPLING_RATE_HZ: f64 = 100.0;
pub const MIN_DURATION_S: f64 = 10.0;
pub const REFRACTORY_MS: f64 = 200.0;

const INTEGRATION_MS: f64 = 150.0;
const LOCALIZE_BACK_MS: f64 = 250.0;
const LOCALIZE_FORWARD_MS: f64 = 50.0;
// QRS energy must make up at least this share of the signal RMS for the
// detector to report peaks at all.
const MIN_BAND_RMS_RATIO: f64 = 0.12;

/// A uniformly sampled ECG trace: `(t_ms, millivolts)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgStream {
    pub sampling_rate_hz: f64,
    pub samples: Vec<(f64, f64)>,
}

impl EcgStream {
    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (b.0 - a.0) / 1000.0 + 1.0 / self.sampling_rate_hz,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz >= MIN_SAMPLING_RATE_HZ) {
            return Err(Error::Input(format!(
                "sampling rate {} Hz below {MIN_SAMPLING_RATE_HZ} Hz",
                self.sampling_rate_hz
            )));
        }
        let period = 1000.0 / self.sampling_rate_hz;
        for w in self.samples.windows(2) {
            let dt = w[1].0 - w[0].0;
            if (dt - period).abs() > 0.01 * period {
                return Err(Error::Input(format!(
                    "non-uniform sample spacing at t={} ms",
                    w[0].0
                )));
            }
        }
        if self.samples.iter().any(|s| !s.1.is_finite()) {
            return Err(Error::Input("non-finite ECG sample".into()));
        }
        Ok(())
    }
}

/// Second-order IIR section (RBJ cookbook, Butterworth Q).
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(fc: f64, fs: f64) -> Self {
        let w0 = std::f64::consts::TAU * fc / fs;
        let alpha = w0.sin() / std::f64::consts::SQRT_2;
        let cw = w0.cos();
        let a0 = 1.0 + alpha;
        Biquad {
            b: [
                (1.0 - cw) / 2.0 / a0,
                (1.0 - cw) / a0,
                (1.0 - cw) / 2.0 / a0,
            ],
            a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(fc: f64, fs: f64) -> Self {
        let w0 = std::f64::consts::TAU * fc / fs;
        let alpha = w0.sin() / std::f64::consts::SQRT_2;
        let cw = w0.cos();
        let a0 = 1.0 + alpha;
        Biquad {
            b: [
                (1.0 + cw) / 2.0 / a0,
                -(1.0 + cw) / a0,
                (1.0 + cw) / 2.0 / a0,
            ],
            a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
        }
    }

    /// Filters `x` with the state primed to the steady response of `x[0]`,
    /// so a signal that starts off zero does not ring at startup.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let u = x.first().copied().unwrap_or(0.0);
        let y_ss = u * (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let (mut x1, mut x2, mut y1, mut y2) = (u, u, y_ss, y_ss);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Intermediate signals of the detector, exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct DetectorTrace {
    pub band: Vec<f64>,
    pub integrated: Vec<f64>,
    pub band_rms_ratio: f64,
}

fn preprocess(raw: &[f64], fs: f64) -> DetectorTrace {
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    let centered: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let hp = Biquad::highpass(5.0, fs).apply(&centered);
    let band = Biquad::lowpass(15.0, fs).apply(&hp);
    let band_rms_ratio = rms(&band) / rms(&centered).max(1e-12);

    let n = band.len();
    let at = |i: isize| -> f64 {
        if i < 0 {
            0.0
        } else {
            band[i as usize]
        }
    };
    let squared: Vec<f64> = (0..n as isize)
        .map(|i| {
            let d = (2.0 * at(i) + at(i - 1) - at(i - 3) - 2.0 * at(i - 4)) * fs / 8.0;
            d * d
        })
        .collect();
    let w = ((INTEGRATION_MS / 1000.0 * fs).round() as usize).max(1);
    let mut integrated = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        acc += squared[i];
        if i >= w {
            acc -= squared[i - w];
        }
        integrated.push(acc.max(0.0) / w as f64);
    }
    DetectorTrace {
        band,
        integrated,
        band_rms_ratio,
    }
}

pub fn trace(ecg: &EcgStream) -> DetectorTrace {
    let raw: Vec<f64> = ecg.samples.iter().map(|s| s.1).collect();
    preprocess(&raw, ecg.sampling_rate_hz)
}

/// Detects R-peaks and returns the resulting RR series (unfiltered).
///
/// Signals without a band-limited QRS component yield an empty series.
pub fn detect_rpeaks(ecg: &EcgStream) -> Result<RrSeries> {
    RrSeries::from_peak_times(&detect_peak_times(ecg)?)
}

/// R-peak times in ms.
pub fn detect_peak_times(ecg: &EcgStream) -> Result<Vec<f64>> {
    ecg.validate()?;
    if ecg.duration_s() < MIN_DURATION_S {
        return Err(Error::InsufficientData(format!(
            "ECG stream of {:.1} s is shorter than {MIN_DURATION_S} s",
            ecg.duration_s()
        )));
    }
    let fs = ecg.sampling_rate_hz;
    let raw: Vec<f64> = ecg.samples.iter().map(|s| s.1).collect();
    let tr = preprocess(&raw, fs);
    if tr.band_rms_ratio < MIN_BAND_RMS_RATIO {
        log::debug!(
            "no QRS morphology (band ratio {:.3}); reporting no peaks",
            tr.band_rms_ratio
        );
        return Ok(Vec::new());
    }
    let mwi = &tr.integrated;
    let ms_to_samples = |ms: f64| (ms / 1000.0 * fs).round() as usize;
    let refractory = ms_to_samples(REFRACTORY_MS);

    let candidates: Vec<usize> = (1..mwi.len() - 1)
        .filter(|&i| mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])
        .collect();

    let learn = ms_to_samples(2000.0).min(mwi.len());
    let mut spki = 0.25 * mwi[..learn].iter().cloned().fold(0.0, f64::max);
    let mut npki = 0.5 * mwi[..learn].iter().sum::<f64>() / learn as f64;
    let mut qrs: Vec<usize> = Vec::new();
    let mut pending_noise: Vec<usize> = Vec::new();
    let mut rr_avg: Option<f64> = None;

    for &c in &candidates {
        let thr1 = npki + 0.25 * (spki - npki);
        let v = mwi[c];

        // search back for a missed beat before handling this candidate
        if let (Some(&last), Some(avg)) = (qrs.last(), rr_avg) {
            if (c - last) as f64 > 1.66 * avg {
                let thr2 = 0.5 * thr1;
                let best = pending_noise
                    .iter()
                    .copied()
                    .filter(|&p| p - last >= refractory && c - p >= refractory && mwi[p] > thr2)
                    .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                if let Some(p) = best {
                    qrs.push(p);
                    spki = 0.25 * mwi[p] + 0.75 * spki;
                }
                pending_noise.clear();
            }
        }

        if v > thr1 {
            match qrs.last().copied() {
                Some(last) if c - last < refractory => {
                    if v > mwi[last] {
                        *qrs.last_mut().unwrap() = c;
                        spki = 0.125 * v + 0.875 * spki;
                    }
                }
                _ => {
                    if let Some(&last) = qrs.last() {
                        let rr = (c - last) as f64;
                        rr_avg = Some(match rr_avg {
                            Some(a) => 0.875 * a + 0.125 * rr,
                            None => rr,
                        });
                    }
                    qrs.push(c);
                    spki = 0.125 * v + 0.875 * spki;
                    pending_noise.clear();
                }
            }
        } else {
            npki = 0.125 * v + 0.875 * npki;
            pending_noise.push(c);
        }
    }

    let back = ms_to_samples(LOCALIZE_BACK_MS);
    let fwd = ms_to_samples(LOCALIZE_FORWARD_MS);
    let period = 1000.0 / fs;
    let mut peaks: Vec<(f64, f64)> = Vec::with_capacity(qrs.len());
    for &i in &qrs {
        let lo = i.saturating_sub(back);
        let hi = (i + fwd).min(raw.len() - 1);
        let mut k = lo;
        for j in lo..=hi {
            if raw[j] > raw[k] {
                k = j;
            }
        }
        let mut offset = 0.0;
        if k > 0 && k + 1 < raw.len() {
            let (ym, y0, yp) = (raw[k - 1], raw[k], raw[k + 1]);
            let denom = ym - 2.0 * y0 + yp;
            if denom < 0.0 {
                offset = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
            }
        }
        let t = ecg.samples[k].0 + offset * period;
        match peaks.last_mut() {
            Some(last) if t - last.0 < REFRACTORY_MS => {
                if raw[k] > last.1 {
                    *last = (t, raw[k]);
                }
            }
            Some(last) if t <= last.0 => {}
            _ => peaks.push((t, raw[k])),
        }
    }
    Ok(peaks.into_iter().map(|p| p.0).collect())
}
