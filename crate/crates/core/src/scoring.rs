//! Tracking error and the session performance deviation index (PDI).
//!
//! ```text
//! pdi = w_err  * mean_deviation / tolerance_band
//!     + w_dist * max(0, distance / path_length - 1)
//!     + w_time * max(0, elapsed / target_duration - 1)
//! ```
//!
//! Lower is better. The mean deviation is time-weighted (trapezoidal).

use serde::{Deserialize, Serialize};

use crate::assist::HandleState;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// `(w_err, w_dist, w_time)`.
    pub weights: [f64; 3],
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            weights: [0.6, 0.25, 0.15],
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        let [e, d, t] = self.weights;
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Spec(
                "scoring weights must be finite and >= 0".into(),
            ));
        }
        if ((e + d + t) - 1.0).abs() > 1e-12 {
            return Err(Error::Spec("scoring weights must sum to 1".into()));
        }
        if !(e > d && d > t) {
            return Err(Error::Spec(
                "scoring weights must satisfy w_err > w_dist > w_time".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session: u32,
    pub mean_deviation_m: f64,
    pub max_deviation_m: f64,
    pub distance_m: f64,
    pub elapsed_s: f64,
    pub pdi: f64,
}

/// Distance from the handle to the nearest path point.
pub fn sample_error(traj: &Trajectory, state: &HandleState) -> f64 {
    traj.project(state.position).1
}

/// Combines the three normalized terms into the index.
pub fn pdi_from_parts(
    traj: &Trajectory,
    cfg: &ScoringConfig,
    mean_deviation_m: f64,
    distance_m: f64,
    elapsed_s: f64,
) -> f64 {
    let spec = traj.spec();
    let [w_err, w_dist, w_time] = cfg.weights;
    w_err * (mean_deviation_m / spec.tolerance_band_m)
        + w_dist * (distance_m / traj.path_length() - 1.0).max(0.0)
        + w_time * (elapsed_s / spec.target_duration_s - 1.0).max(0.0)
}

/// Incremental form of [`compute_metrics`]; sessions feed it one tick at a time.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    first: Option<HandleState>,
    last: Option<(HandleState, f64)>,
    weighted_err: f64,
    max_err: f64,
    distance: f64,
    count: usize,
}

impl Default for MetricsAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        MetricsAccumulator {
            first: None,
            last: None,
            weighted_err: 0.0,
            max_err: 0.0,
            distance: 0.0,
            count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, traj: &Trajectory, state: &HandleState) -> Result<f64> {
        let err = sample_error(traj, state);
        self.push_with_error(state, err)?;
        Ok(err)
    }

    /// Adds a sample whose tracking error has already been computed.
    pub fn push_with_error(&mut self, state: &HandleState, err: f64) -> Result<()> {
        if let Some((prev, prev_err)) = self.last {
            let dt = state.t_ms - prev.t_ms;
            if !(dt > 0.0) {
                return Err(Error::Input(format!(
                    "timestamps must be strictly increasing ({} -> {})",
                    prev.t_ms, state.t_ms
                )));
            }
            self.weighted_err += 0.5 * (prev_err + err) * dt;
            self.distance += state.position.dist(prev.position);
        } else {
            self.first = Some(*state);
        }
        self.max_err = self.max_err.max(err);
        self.last = Some((*state, err));
        self.count += 1;
        Ok(())
    }

    pub fn finish(
        &self,
        traj: &Trajectory,
        cfg: &ScoringConfig,
        session: u32,
    ) -> Result<SessionMetrics> {
        let (Some(first), Some((last, _))) = (self.first, self.last) else {
            return Err(Error::Input("no samples".into()));
        };
        if self.count < 2 {
            return Err(Error::Input("at least two samples are required".into()));
        }
        let span_ms = last.t_ms - first.t_ms;
        let mean = self.weighted_err / span_ms;
        let elapsed_s = span_ms / 1000.0;
        Ok(SessionMetrics {
            session,
            mean_deviation_m: mean,
            max_deviation_m: self.max_err,
            distance_m: self.distance,
            elapsed_s,
            pdi: pdi_from_parts(traj, cfg, mean, self.distance, elapsed_s),
        })
    }
}

/// Scores a recorded session. Requires two or more samples with strictly
/// increasing timestamps.
pub fn compute_metrics(
    samples: &[HandleState],
    traj: &Trajectory,
    cfg: &ScoringConfig,
    session: u32,
) -> Result<SessionMetrics> {
    if samples.len() < 2 {
        return Err(Error::Input("at least two samples are required".into()));
    }
    let mut acc = MetricsAccumulator::new();
    for s in samples {
        acc.push(traj, s)?;
    }
    acc.finish(traj, cfg, session)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub best_session: u32,
    pub improving: bool,
    pub pdi_list: Vec<f64>,
}

/// Ranks a three-session protocol. Ties for the best score go to the later session.
pub fn compare_sessions(metrics: &[SessionMetrics]) -> Result<TrendReport> {
    if metrics.len() != 3 {
        return Err(Error::Input(format!(
            "expected 3 sessions, got {}",
            metrics.len()
        )));
    }
    let mut sorted: Vec<SessionMetrics> = metrics.to_vec();
    sorted.sort_by_key(|m| m.session);
    if sorted.iter().map(|m| m.session).ne(1..=3) {
        return Err(Error::Input("sessions must be numbered 1, 2, 3".into()));
    }
    Ok(trend_of(&sorted))
}

/// Trend over any non-empty, session-ordered list.
pub(crate) fn trend_of(metrics: &[SessionMetrics]) -> TrendReport {
    let pdi_list: Vec<f64> = metrics.iter().map(|m| m.pdi).collect();
    let mut best = 0;
    for (i, p) in pdi_list.iter().enumerate() {
        if *p <= pdi_list[best] {
            best = i;
        }
    }
    let improving = pdi_list.len() > 1 && pdi_list.windows(2).all(|w| w[1] < w[0]);
    TrendReport {
        best_session: metrics[best].session,
        improving,
        pdi_list,
    }
}
