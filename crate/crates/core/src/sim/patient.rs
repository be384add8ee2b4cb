//! Synthetic patient: hand motion, ECG and gaze/pain frames. All streams
//! are pure functions of the profile, the seed and time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::affect::{AffectFrame, Gaze};
use crate::assist::HandleState;
use crate::error::{Error, Result};
use crate::hrv::EcgStream;
use crate::vec2::Vec2;

pub const PURSUIT_KP: f64 = 50.0;
pub const PURSUIT_KD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatientProfile {
    /// Standard deviation of the target offset per axis, metres.
    pub skill_sigma: f64,
    /// Correlation time of the offset, seconds.
    pub noise_corr_s: f64,
    pub lag_tau_s: f64,
    pub tremor_amp_m: f64,
    pub tremor_hz: f64,
    /// Per-session multiplicative decay of `skill_sigma`.
    pub learning_rate: f64,
    pub hr_base: f64,
    pub stress_hr_delta: f64,
    pub stress_hrv_scale: f64,
    /// RR modulation amplitudes and jitter, ms.
    pub lf_amp_ms: f64,
    pub hf_amp_ms: f64,
    pub rr_jitter_ms: f64,
    /// Off-screen excursions per minute.
    pub distraction_rate: f64,
}

impl Default for PatientProfile {
    fn default() -> Self {
        PatientProfile {
            skill_sigma: 0.015,
            noise_corr_s: 4.0,
            lag_tau_s: 0.3,
            tremor_amp_m: 0.0005,
            tremor_hz: 5.0,
            learning_rate: 0.7,
            hr_base: 70.0,
            stress_hr_delta: 20.0,
            stress_hrv_scale: 0.5,
            lf_amp_ms: 30.0,
            hf_amp_ms: 25.0,
            rr_jitter_ms: 8.0,
            distraction_rate: 0.5,
        }
    }
}

impl PatientProfile {
    pub fn validate(&self) -> Result<()> {
        let mags = [
            self.skill_sigma,
            self.lag_tau_s,
            self.tremor_amp_m,
            self.tremor_hz,
            self.stress_hr_delta,
            self.lf_amp_ms,
            self.hf_amp_ms,
            self.rr_jitter_ms,
            self.distraction_rate,
        ];
        if mags.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Spec(
                "patient magnitudes must be finite and >= 0".into(),
            ));
        }
        if !(self.noise_corr_s > 0.0) {
            return Err(Error::Spec("noise_corr_s must be > 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Spec("learning_rate must lie in (0, 1]".into()));
        }
        if !(self.stress_hrv_scale > 0.0 && self.stress_hrv_scale <= 1.0) {
            return Err(Error::Spec("stress_hrv_scale must lie in (0, 1]".into()));
        }
        if !(40.0..=120.0).contains(&self.hr_base) {
            return Err(Error::Spec("hr_base must lie in [40, 120] bpm".into()));
        }
        Ok(())
    }

    pub fn session_sigma(&self, session: u32) -> f64 {
        self.skill_sigma * self.learning_rate.powi(session.saturating_sub(1) as i32)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Hand motion: PD pursuit of a noisy, lagged copy of the pacing target.
#[derive(Debug, Clone)]
pub struct PatientMotion {
    profile: PatientProfile,
    rng: ChaCha8Rng,
    sigma: f64,
    offset: Vec2,
    lagged: Option<Vec2>,
}

impl PatientMotion {
    pub fn new(profile: PatientProfile, seed: u64) -> Self {
        PatientMotion {
            profile,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sigma: 0.0,
            offset: Vec2::ZERO,
            lagged: None,
        }
    }

    /// Resets the lag filter and draws a stationary offset for `session`.
    pub fn start_session(&mut self, session: u32) {
        self.sigma = self.profile.session_sigma(session);
        let (a, b) = (normal(&mut self.rng), normal(&mut self.rng));
        self.offset = Vec2::new(a, b) * self.sigma;
        self.lagged = None;
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// User force for one step; `t_s` is exercise time.
    pub fn step(&mut self, target: Vec2, state: &HandleState, t_s: f64, dt: f64) -> Vec2 {
        let p = &self.profile;
        // exact discretisation of an Ornstein-Uhlenbeck offset
        let decay = (-dt / p.noise_corr_s).exp();
        let kick = self.sigma * (1.0 - decay * decay).sqrt();
        let (a, b) = (normal(&mut self.rng), normal(&mut self.rng));
        self.offset = self.offset * decay + Vec2::new(a, b) * kick;
        let phase = std::f64::consts::TAU * p.tremor_hz * t_s;
        let tremor = Vec2::new(phase.sin(), phase.cos()) * p.tremor_amp_m;
        let noisy = target + self.offset + tremor;
        let lagged = match self.lagged {
            Some(l) if p.lag_tau_s > 0.0 => l + (noisy - l) * (dt / (p.lag_tau_s + dt)),
            _ => noisy,
        };
        self.lagged = Some(lagged);
        (lagged - state.position) * PURSUIT_KP - state.velocity * PURSUIT_KD
    }
}

/// Streaming ECG: beats are laid down one at a time and a PQRST template
/// is summed around each.
#[derive(Debug, Clone)]
pub struct EcgGenerator {
    profile: PatientProfile,
    rng: ChaCha8Rng,
    fs: f64,
    stressed: bool,
    next_sample: u64,
    /// Beats close enough to the sample cursor to contribute.
    beats: std::collections::VecDeque<f64>,
    last_beat_ms: f64,
    peaks: Vec<f64>,
    keep_peaks: bool,
}

// (offset ms, amplitude mV, width ms)
const PQRST: [(f64, f64, f64); 5] = [
    (-200.0, 0.12, 25.0),
    (-30.0, -0.10, 8.0),
    (0.0, 1.20, 10.0),
    (30.0, -0.25, 8.0),
    (250.0, 0.30, 45.0),
];
const TEMPLATE_REACH_MS: f64 = 450.0;
const ECG_NOISE_MV: f64 = 0.015;

impl EcgGenerator {
    pub fn new(profile: PatientProfile, fs: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = rng.random_range(100.0..600.0);
        EcgGenerator {
            profile,
            rng,
            fs,
            stressed: false,
            next_sample: 0,
            beats: [first].into(),
            last_beat_ms: first,
            peaks: vec![first],
            keep_peaks: true,
        }
    }

    /// Stop recording ground-truth peak times (long live runs).
    pub fn discard_peaks(&mut self) {
        self.keep_peaks = false;
        self.peaks.clear();
    }

    pub fn set_stressed(&mut self, stressed: bool) {
        self.stressed = stressed;
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.fs
    }

    pub fn true_peaks(&self) -> &[f64] {
        &self.peaks
    }

    fn next_rr(&mut self, t_ms: f64) -> f64 {
        let p = &self.profile;
        let (hr, scale) = if self.stressed {
            (p.hr_base + p.stress_hr_delta, p.stress_hrv_scale)
        } else {
            (p.hr_base, 1.0)
        };
        let t = t_ms / 1000.0;
        let lf = p.lf_amp_ms * (std::f64::consts::TAU * 0.1 * t).sin();
        let hf = p.hf_amp_ms * (std::f64::consts::TAU * 0.25 * t).sin();
        let jitter = p.rr_jitter_ms * normal(&mut self.rng);
        (60000.0 / hr + scale * (lf + hf + jitter)).max(300.0)
    }

    /// Samples with index below `t_ms * fs / 1000`.
    pub fn generate_until(&mut self, t_ms: f64) -> Vec<(f64, f64)> {
        let end = (t_ms * self.fs / 1000.0).ceil().max(0.0) as u64;
        let mut out = Vec::with_capacity(end.saturating_sub(self.next_sample) as usize);
        while self.next_sample < end {
            let t = self.next_sample as f64 * 1000.0 / self.fs;
            while self.last_beat_ms < t + TEMPLATE_REACH_MS {
                let rr = self.next_rr(self.last_beat_ms);
                self.last_beat_ms += rr;
                self.beats.push_back(self.last_beat_ms);
                if self.keep_peaks {
                    self.peaks.push(self.last_beat_ms);
                }
            }
            while self
                .beats
                .front()
                .is_some_and(|b| *b < t - TEMPLATE_REACH_MS)
            {
                self.beats.pop_front();
            }
            let mut v = 0.05 * (std::f64::consts::TAU * 0.3 * t / 1000.0).sin();
            for &b in &self.beats {
                for (off, amp, w) in PQRST {
                    let d = t - b - off;
                    v += amp * (-d * d / (2.0 * w * w)).exp();
                }
            }
            v += ECG_NOISE_MV * normal(&mut self.rng);
            out.push((t, v));
            self.next_sample += 1;
        }
        out
    }
}

/// Batch ECG with the ground-truth R-peak times inside the stream.
pub fn ecg_generate(
    profile: &PatientProfile,
    duration_s: f64,
    stressed: bool,
    fs: f64,
    seed: u64,
) -> Result<(EcgStream, Vec<f64>)> {
    if !(duration_s >= 10.0) {
        return Err(Error::Input("ECG duration must be at least 10 s".into()));
    }
    let mut g = EcgGenerator::new(*profile, fs, seed);
    g.set_stressed(stressed);
    let end = duration_s * 1000.0;
    let samples = g.generate_until(end);
    let peaks: Vec<f64> = g
        .true_peaks()
        .iter()
        .copied()
        .filter(|p| *p < end)
        .collect();
    Ok((
        EcgStream {
            sampling_rate_hz: fs,
            samples,
        },
        peaks,
    ))
}

/// True RR intervals of a generated stream, for oracle checks.
pub fn true_rr(peaks: &[f64]) -> Vec<f64> {
    peaks.windows(2).map(|w| w[1] - w[0]).collect()
}

pub const EXCURSION_MIN_S: f64 = 2.0;
pub const EXCURSION_MAX_S: f64 = 8.0;
const OFF_SCREEN_YAW_DEG: f64 = 45.0;

/// Gaze and pain frames with Poisson-timed off-screen excursions.
#[derive(Debug, Clone)]
pub struct GazeGenerator {
    rng: ChaCha8Rng,
    rate_per_ms: f64,
    next_onset_ms: f64,
    excursions: Vec<(f64, f64)>,
}

impl GazeGenerator {
    pub fn new(profile: &PatientProfile, seed: u64) -> Self {
        let mut g = GazeGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate_per_ms: profile.distraction_rate / 60_000.0,
            next_onset_ms: f64::INFINITY,
            excursions: Vec::new(),
        };
        g.next_onset_ms = g.draw_gap(0.0);
        g
    }

    fn draw_gap(&mut self, from: f64) -> f64 {
        if self.rate_per_ms <= 0.0 {
            return f64::INFINITY;
        }
        let exp = Exp::new(self.rate_per_ms).expect("positive rate");
        from + exp.sample(&mut self.rng)
    }

    /// Onset/end times of every excursion started so far.
    pub fn excursions(&self) -> &[(f64, f64)] {
        &self.excursions
    }

    /// Frame at `t_ms`; calls must be in increasing time order.
    pub fn frame(&mut self, t_ms: u64) -> AffectFrame {
        let t = t_ms as f64;
        while self.next_onset_ms <= t {
            let len = self.rng.random_range(EXCURSION_MIN_S..=EXCURSION_MAX_S) * 1000.0;
            self.excursions
                .push((self.next_onset_ms, self.next_onset_ms + len));
            self.next_onset_ms = self.draw_gap(self.next_onset_ms);
        }
        let away = self
            .excursions
            .iter()
            .rev()
            .take(4)
            .any(|(a, b)| t >= *a && t < *b);
        let jitter_p: f64 = 4.0 * normal(&mut self.rng);
        let jitter_y: f64 = 4.0 * normal(&mut self.rng);
        let yaw = if away {
            OFF_SCREEN_YAW_DEG + jitter_y
        } else {
            jitter_y.clamp(-20.0, 20.0)
        };
        let pain = self.rng.random_range(0.0..0.2);
        AffectFrame {
            t_ms,
            gaze: Some(Gaze {
                pitch_deg: jitter_p.clamp(-20.0, 20.0),
                yaw_deg: yaw,
            }),
            on_screen: None,
            pain_prob: Some(pain),
        }
    }
}

/// Frames at `frame_hz` over `duration_s`, plus the excursion intervals.
pub fn gaze_generate(
    profile: &PatientProfile,
    duration_s: f64,
    frame_hz: f64,
    seed: u64,
) -> (Vec<AffectFrame>, Vec<(f64, f64)>) {
    let mut g = GazeGenerator::new(profile, seed);
    let step = (1000.0 / frame_hz).round() as u64;
    let end = (duration_s * 1000.0) as u64;
    let frames: Vec<AffectFrame> = (0..)
        .map(|k| k * step)
        .take_while(|t| *t < end)
        .map(|t| g.frame(t))
        .collect();
    let exc = g
        .excursions()
        .iter()
        .copied()
        .filter(|e| e.0 < end as f64)
        .collect();
    (frames, exc)
}
