//! The 22 HRV features computed per analysis window.
//!
//! Time domain (10), frequency domain (8) from a 4 Hz resampled tachogram
//! with a Welch periodogram, and Poincaré descriptors (4).

use std::f64::consts::{PI, SQRT_2};

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrv::rr::{median_in_place, Beat};

pub const N_FEATURES: usize = 22;
pub const MIN_WINDOW_INTERVALS: usize = 20;

pub const RESAMPLE_HZ: f64 = 4.0;
pub const WELCH_SEGMENT_S: f64 = 32.0;

pub const VLF_BAND: (f64, f64) = (0.003, 0.04);
pub const LF_BAND: (f64, f64) = (0.04, 0.15);
pub const HF_BAND: (f64, f64) = (0.15, 0.40);

const DEGENERATE_POWER: f64 = 1e-12;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean_rr",
    "median_rr",
    "sdnn",
    "rmssd",
    "sdsd",
    "nn50",
    "pnn50",
    "nn20",
    "pnn20",
    "mean_hr",
    "vlf_power",
    "lf_power",
    "hf_power",
    "total_power",
    "lf_norm",
    "hf_norm",
    "lf_hf_ratio",
    "peak_hf_freq",
    "sd1",
    "sd2",
    "sd1_sd2_ratio",
    "ellipse_area",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvFeatures {
    pub mean_rr: f64,
    pub median_rr: f64,
    pub sdnn: f64,
    pub rmssd: f64,
    pub sdsd: f64,
    pub nn50: f64,
    pub pnn50: f64,
    pub nn20: f64,
    pub pnn20: f64,
    pub mean_hr: f64,
    pub vlf_power: f64,
    pub lf_power: f64,
    pub hf_power: f64,
    pub total_power: f64,
    pub lf_norm: f64,
    pub hf_norm: f64,
    pub lf_hf_ratio: f64,
    pub peak_hf_freq: f64,
    pub sd1: f64,
    pub sd2: f64,
    pub sd1_sd2_ratio: f64,
    pub ellipse_area: f64,
    /// HF power was numerically zero; `lf_hf_ratio` is reported as 0.
    pub degenerate_spectrum: bool,
}

impl HrvFeatures {
    /// Features in [`FEATURE_NAMES`] order.
    pub fn to_vector(&self) -> [f64; N_FEATURES] {
        [
            self.mean_rr,
            self.median_rr,
            self.sdnn,
            self.rmssd,
            self.sdsd,
            self.nn50,
            self.pnn50,
            self.nn20,
            self.pnn20,
            self.mean_hr,
            self.vlf_power,
            self.lf_power,
            self.hf_power,
            self.total_power,
            self.lf_norm,
            self.hf_norm,
            self.lf_hf_ratio,
            self.peak_hf_freq,
            self.sd1,
            self.sd2,
            self.sd1_sd2_ratio,
            self.ellipse_area,
        ]
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn pop_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// One-sided Welch power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub df: f64,
    /// ms^2 / Hz at frequencies `k * df`.
    pub psd: Vec<f64>,
}

impl Spectrum {
    /// Power integrated over bins with `lo <= f < hi`.
    pub fn band_power(&self, (lo, hi): (f64, f64)) -> f64 {
        self.psd
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 * self.df;
                f >= lo && f < hi
            })
            .map(|(_, p)| p * self.df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.df
    }

    fn peak_in(&self, (lo, hi): (f64, f64)) -> f64 {
        let mut best = (0.0, f64::NEG_INFINITY);
        for (k, p) in self.psd.iter().enumerate() {
            let f = k as f64 * self.df;
            if f >= lo && f < hi && *p > best.1 {
                best = (f, *p);
            }
        }
        best.0
    }
}

/// Linear interpolation of the tachogram onto a uniform grid, mean removed.
pub fn resample_tachogram(beats: &[Beat], fs: f64) -> Vec<f64> {
    if beats.len() < 2 {
        return Vec::new();
    }
    let t0 = beats[0].t_ms;
    let span = beats[beats.len() - 1].t_ms - t0;
    let step = 1000.0 / fs;
    let n = (span / step).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let t = t0 + k as f64 * step;
        while j + 2 < beats.len() && beats[j + 1].t_ms <= t {
            j += 1;
        }
        let (a, b) = (beats[j], beats[j + 1]);
        let frac = ((t - a.t_ms) / (b.t_ms - a.t_ms)).clamp(0.0, 1.0);
        out.push(a.rr_ms + frac * (b.rr_ms - a.rr_ms));
    }
    let m = mean(&out);
    out.iter_mut().for_each(|v| *v -= m);
    out
}

/// Welch estimate: Hann-windowed segments with 50% overlap.
pub fn welch_psd(x: &[f64], fs: f64, segment_len: usize) -> Spectrum {
    let seg = segment_len.min(x.len()).max(2);
    let step = (seg / 2).max(1);
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let n_bins = seg / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut count = 0usize;
    let mut start = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    while start + seg <= x.len() {
        for i in 0..seg {
            buf[i] = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let mut p = buf[k].norm_sqr() / (fs * wss);
            if k != 0 && !(seg.is_multiple_of(2) && k == seg / 2) {
                p *= 2.0;
            }
            *a += p;
        }
        count += 1;
        start += step;
    }
    if count > 0 {
        acc.iter_mut().for_each(|a| *a /= count as f64);
    }
    Spectrum {
        df: fs / seg as f64,
        psd: acc,
    }
}

/// Computes the 22 features from the beats falling inside one window.
pub fn compute_features(beats: &[Beat]) -> Result<HrvFeatures> {
    if beats.len() < MIN_WINDOW_INTERVALS {
        return Err(Error::InsufficientData(format!(
            "{} intervals in window, need {MIN_WINDOW_INTERVALS}",
            beats.len()
        )));
    }
    let rr: Vec<f64> = beats.iter().map(|b| b.rr_ms).collect();
    let diffs: Vec<f64> = rr.windows(2).map(|w| w[1] - w[0]).collect();
    let nd = diffs.len() as f64;

    let mean_rr = mean(&rr);
    let median_rr = median_in_place(&mut rr.clone());
    let sdnn = pop_std(&rr);
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / nd).sqrt();
    let sdsd = pop_std(&diffs);
    let nn50 = diffs.iter().filter(|d| d.abs() >= 50.0).count() as f64;
    let nn20 = diffs.iter().filter(|d| d.abs() >= 20.0).count() as f64;

    let tach = resample_tachogram(beats, RESAMPLE_HZ);
    let spec = welch_psd(&tach, RESAMPLE_HZ, (WELCH_SEGMENT_S * RESAMPLE_HZ) as usize);
    let vlf = spec.band_power(VLF_BAND);
    let lf = spec.band_power(LF_BAND);
    let hf = spec.band_power(HF_BAND);
    let degenerate = hf < DEGENERATE_POWER;
    let (lf_norm, hf_norm) = if lf + hf > 0.0 {
        (100.0 * lf / (lf + hf), 100.0 * hf / (lf + hf))
    } else {
        (0.0, 0.0)
    };

    // Poincaré: spread across and along the identity line. The 1/sqrt(2)
    // rotation factor is applied last so a constant series stays exactly 0.
    let sums: Vec<f64> = rr.windows(2).map(|w| w[1] + w[0]).collect();
    let sd1 = rmssd / SQRT_2;
    let sd2 = pop_std(&sums) / SQRT_2;

    Ok(HrvFeatures {
        mean_rr,
        median_rr,
        sdnn,
        rmssd,
        sdsd,
        nn50,
        pnn50: 100.0 * nn50 / nd,
        nn20,
        pnn20: 100.0 * nn20 / nd,
        mean_hr: 60_000.0 / mean_rr,
        vlf_power: vlf,
        lf_power: lf,
        hf_power: hf,
        total_power: spec.total_power(),
        lf_norm,
        hf_norm,
        lf_hf_ratio: if degenerate { 0.0 } else { lf / hf },
        peak_hf_freq: if degenerate {
            0.0
        } else {
            spec.peak_in(HF_BAND)
        },
        sd1,
        sd2,
        sd1_sd2_ratio: if sd2 > 0.0 { sd1 / sd2 } else { 0.0 },
        ellipse_area: PI * sd1 * sd2,
        degenerate_spectrum: degenerate,
    })
}
