//! ECG to stress verdicts: R-peaks, RR cleaning, HRV features, per-user
//! baseline scaling, and an RBF SVM.

pub mod features;
pub mod normalize;
pub mod rpeak;
pub mod rr;
pub mod svm;

use serde::{Deserialize, Serialize};

pub use features::{compute_features, HrvFeatures, FEATURE_NAMES, N_FEATURES};
pub use normalize::{fit_baseline, normalize, NormalizationParams};
pub use rpeak::{detect_peak_times, detect_rpeaks, EcgStream};
pub use rr::{filter_artifacts, Beat, RrSeries};
pub use svm::{svm_train, SvmModel, TrainParams};

use crate::error::{Error, Result};

/// Windowing of the stress pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StressConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub baseline_s: f64,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            window_s: 60.0,
            hop_s: 30.0,
            baseline_s: normalize::DEFAULT_BASELINE_S,
        }
    }
}

impl StressConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0 && self.hop_s > 0.0 && self.baseline_s >= self.window_s) {
            return Err(Error::Spec(
                "stress windows need window, hop > 0 and baseline >= window".into(),
            ));
        }
        Ok(())
    }
}

/// Features of the beats inside `[start_ms, end_ms)`.
pub fn window_features(rr: &RrSeries, start_ms: f64, end_ms: f64) -> Result<HrvFeatures> {
    compute_features(rr.window(start_ms, end_ms))
}

/// Cleaned beats found in an ECG excerpt.
pub fn ecg_to_beats(ecg: &EcgStream) -> Result<RrSeries> {
    Ok(filter_artifacts(&detect_rpeaks(ecg)?))
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutcome {
    /// Window collected for the baseline.
    Baseline(HrvFeatures),
    /// This window completed the baseline.
    BaselineReady {
        features: HrvFeatures,
        params: NormalizationParams,
    },
    Verdict {
        features: HrvFeatures,
        score: f64,
        stressed: bool,
    },
    /// Too few clean beats; the window is skipped.
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub start_ms: f64,
    pub end_ms: f64,
    pub outcome: WindowOutcome,
}

/// Stateful per-user stress stage. Windows close every `hop_s`; those ending
/// within the first `baseline_s` build the normalization, later ones are
/// classified.
#[derive(Debug, Clone)]
pub struct StressMonitor {
    cfg: StressConfig,
    model: SvmModel,
    origin_ms: f64,
    next_end_ms: f64,
    baseline: Vec<HrvFeatures>,
    params: Option<NormalizationParams>,
}

impl StressMonitor {
    pub fn new(cfg: StressConfig, model: SvmModel, origin_ms: f64) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        if model.n_features != N_FEATURES {
            return Err(Error::Spec(format!(
                "stress model has {} features, expected {N_FEATURES}",
                model.n_features
            )));
        }
        Ok(StressMonitor {
            cfg,
            model,
            origin_ms,
            next_end_ms: origin_ms + cfg.window_s * 1000.0,
            baseline: Vec::new(),
            params: None,
        })
    }

    pub fn config(&self) -> &StressConfig {
        &self.cfg
    }

    pub fn params(&self) -> Option<&NormalizationParams> {
        self.params.as_ref()
    }

    /// Bounds of the next window if it has closed by `now_ms`.
    pub fn due(&self, now_ms: f64) -> Option<(f64, f64)> {
        (now_ms >= self.next_end_ms).then_some((
            self.next_end_ms - self.cfg.window_s * 1000.0,
            self.next_end_ms,
        ))
    }

    fn baseline_end(&self) -> f64 {
        self.origin_ms + self.cfg.baseline_s * 1000.0
    }

    /// Processes the window returned by [`Self::due`] given its cleaned beats.
    pub fn process_window(&mut self, beats: &[Beat]) -> Result<WindowResult> {
        let end = self.next_end_ms;
        let start = end - self.cfg.window_s * 1000.0;
        self.next_end_ms += self.cfg.hop_s * 1000.0;
        let outcome = match compute_features(beats) {
            Err(Error::InsufficientData(msg)) => WindowOutcome::Skipped(msg),
            Err(e) => return Err(e),
            Ok(f) if end <= self.baseline_end() => {
                self.baseline.push(f);
                if self.next_end_ms > self.baseline_end() {
                    let p = fit_baseline(&self.baseline, self.cfg.baseline_s)?;
                    self.params = Some(p.clone());
                    WindowOutcome::BaselineReady {
                        features: f,
                        params: p,
                    }
                } else {
                    WindowOutcome::Baseline(f)
                }
            }
            Ok(f) => match &self.params {
                Some(p) => {
                    let (score, stressed) = self.model.predict(&normalize(&f, p))?;
                    WindowOutcome::Verdict {
                        features: f,
                        score,
                        stressed,
                    }
                }
                None => {
                    return Err(Error::InsufficientData(
                        "baseline incomplete when classification began".into(),
                    ))
                }
            },
        };
        // a skipped final baseline window still has to close the baseline
        if matches!(outcome, WindowOutcome::Skipped(_))
            && self.params.is_none()
            && end <= self.baseline_end()
            && self.next_end_ms > self.baseline_end()
        {
            let p = fit_baseline(&self.baseline, self.cfg.baseline_s)?;
            self.params = Some(p);
        }
        Ok(WindowResult {
            start_ms: start,
            end_ms: end,
            outcome,
        })
    }

    /// Runs every window fully covered by `rr` (batch mode).
    pub fn run_batch(&mut self, rr: &RrSeries) -> Result<Vec<WindowResult>> {
        let last = rr.beats().last().map(|b| b.t_ms).unwrap_or(self.origin_ms);
        let mut out = Vec::new();
        while let Some((s, e)) = self.due(last) {
            let beats = rr.window(s, e).to_vec();
            out.push(self.process_window(&beats)?);
        }
        Ok(out)
    }
}

/// Batch results as CSV: window bounds, what the window was used for, the
/// raw features, and the classifier output where there is one.
pub fn write_windows_csv<W: std::io::Write>(w: W, results: &[WindowResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["start_ms", "end_ms", "use"];
    header.extend(FEATURE_NAMES);
    header.extend(["score", "stressed"]);
    out.write_record(&header).map_err(io)?;
    for r in results {
        let (usage, features, verdict) = match &r.outcome {
            WindowOutcome::Baseline(f) => ("baseline", Some(f), None),
            WindowOutcome::BaselineReady { features, .. } => ("baseline", Some(features), None),
            WindowOutcome::Verdict {
                features,
                score,
                stressed,
            } => ("classified", Some(features), Some((*score, *stressed))),
            WindowOutcome::Skipped(_) => ("skipped", None, None),
        };
        let mut row = vec![
            r.start_ms.to_string(),
            r.end_ms.to_string(),
            usage.to_string(),
        ];
        match features {
            Some(f) => row.extend(f.to_vector().iter().map(|x| x.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), N_FEATURES)),
        }
        match verdict {
            Some((score, stressed)) => row.extend([score.to_string(), stressed.to_string()]),
            None => row.extend([String::new(), String::new()]),
        }
        out.write_record(&row).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Rolling ECG buffer that yields cleaned beats for closed windows.
#[derive(Debug, Clone)]
pub struct EcgWindowBuffer {
    sampling_rate_hz: f64,
    keep_ms: f64,
    samples: std::collections::VecDeque<(f64, f64)>,
}

impl EcgWindowBuffer {
    pub fn new(sampling_rate_hz: f64, keep_s: f64) -> Self {
        EcgWindowBuffer {
            sampling_rate_hz,
            keep_ms: keep_s * 1000.0,
            samples: Default::default(),
        }
    }

    pub fn extend(&mut self, samples: impl IntoIterator<Item = (f64, f64)>) {
        self.samples.extend(samples);
        if let Some(&(last, _)) = self.samples.back() {
            while self
                .samples
                .front()
                .is_some_and(|s| s.0 < last - self.keep_ms)
            {
                self.samples.pop_front();
            }
        }
    }

    /// Detects and cleans beats for `[start_ms, end_ms)`.
    pub fn beats_in(&self, start_ms: f64, end_ms: f64) -> Result<Vec<Beat>> {
        let samples: Vec<(f64, f64)> = self
            .samples
            .iter()
            .copied()
            .filter(|s| s.0 >= start_ms && s.0 < end_ms)
            .collect();
        let ecg = EcgStream {
            sampling_rate_hz: self.sampling_rate_hz,
            samples,
        };
        let rr = ecg_to_beats(&ecg)?;
        Ok(rr.window(start_ms, end_ms).to_vec())
    }
}
