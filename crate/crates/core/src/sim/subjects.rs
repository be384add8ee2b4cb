//! Labelled HRV windows from synthetic subjects, for training the stress
//! model and for leave-one-subject-out evaluation.
//!
//! Each subject records a resting baseline, then a stressed block, then a
//! recovery block, as one continuous ECG stream. Windows that lie wholly
//! inside a block carry its label; features are scaled against the
//! subject's own baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hrv::{
    ecg_to_beats, fit_baseline, normalize, svm_train, window_features, EcgStream, SvmModel,
    TrainParams, N_FEATURES,
};
use crate::sim::patient::{EcgGenerator, PatientProfile};

#[derive(Debug, Clone)]
pub struct SubjectWindows {
    pub subject: usize,
    pub windows: Vec<(Vec<f64>, bool)>,
}

#[derive(Debug, Clone, Copy)]
pub struct SubjectProtocol {
    pub baseline_s: f64,
    pub block_s: f64,
    pub window_s: f64,
    pub hop_s: f64,
    pub ecg_hz: f64,
}

impl Default for SubjectProtocol {
    fn default() -> Self {
        SubjectProtocol {
            baseline_s: 300.0,
            block_s: 300.0,
            window_s: 60.0,
            hop_s: 30.0,
            ecg_hz: 250.0,
        }
    }
}

/// A subject with individual resting heart rate and variability.
pub fn subject_profile(rng: &mut ChaCha8Rng) -> PatientProfile {
    PatientProfile {
        hr_base: rng.random_range(58.0..82.0),
        lf_amp_ms: rng.random_range(20.0..40.0),
        hf_amp_ms: rng.random_range(15.0..35.0),
        rr_jitter_ms: rng.random_range(5.0..10.0),
        ..PatientProfile::default()
    }
}

pub fn subject_windows(
    subject: usize,
    profile: &PatientProfile,
    proto: &SubjectProtocol,
    seed: u64,
) -> Result<SubjectWindows> {
    let mut ecg = EcgGenerator::new(*profile, proto.ecg_hz, seed);
    let b = proto.baseline_s * 1000.0;
    let blk = proto.block_s * 1000.0;
    let mut samples = ecg.generate_until(b);
    ecg.set_stressed(true);
    samples.extend(ecg.generate_until(b + blk));
    ecg.set_stressed(false);
    samples.extend(ecg.generate_until(b + 2.0 * blk));
    let rr = ecg_to_beats(&EcgStream {
        sampling_rate_hz: proto.ecg_hz,
        samples,
    })?;

    let w = proto.window_s * 1000.0;
    let hop = proto.hop_s * 1000.0;
    let mut baseline = Vec::new();
    let mut end = w;
    while end <= b {
        baseline.push(window_features(&rr, end - w, end)?);
        end += hop;
    }
    let params = fit_baseline(&baseline, proto.baseline_s)?;

    let mut windows = Vec::new();
    for (lo, hi, label) in [(b, b + blk, true), (b + blk, b + 2.0 * blk, false)] {
        let mut end = lo + w;
        while end <= hi {
            let f = window_features(&rr, end - w, end)?;
            windows.push((normalize(&f, &params).to_vec(), label));
            end += hop;
        }
    }
    Ok(SubjectWindows { subject, windows })
}

/// `n` subjects drawn from one seed.
pub fn synthetic_cohort(
    n: usize,
    proto: &SubjectProtocol,
    seed: u64,
) -> Result<Vec<SubjectWindows>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let p = subject_profile(&mut rng);
            let s: u64 = rng.random();
            subject_windows(i, &p, proto, s)
        })
        .collect()
}

pub fn train_on(subjects: &[&SubjectWindows], params: &TrainParams) -> Result<SvmModel> {
    let data: Vec<(Vec<f64>, bool)> = subjects
        .iter()
        .flat_map(|s| s.windows.iter().cloned())
        .collect();
    let m = svm_train(&data, params)?;
    debug_assert_eq!(m.n_features, N_FEATURES);
    Ok(m)
}

/// Per-subject accuracy when each subject is held out in turn.
pub fn loso_accuracy(cohort: &[SubjectWindows], params: &TrainParams) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(cohort.len());
    for held in cohort {
        let train: Vec<&SubjectWindows> = cohort
            .iter()
            .filter(|s| s.subject != held.subject)
            .collect();
        let model = train_on(&train, params)?;
        let mut correct = 0;
        for (x, y) in &held.windows {
            if model.predict(x)?.1 == *y {
                correct += 1;
            }
        }
        out.push(correct as f64 / held.windows.len() as f64);
    }
    Ok(out)
}
