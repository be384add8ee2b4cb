//! Per-frame attention and pain channels plus per-window stress verdicts,
//! smoothed and thresholded into [`AffectEvent`]s for the coach.

use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaze {
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectFrame {
    pub t_ms: u64,
    pub gaze: Option<Gaze>,
    pub on_screen: Option<bool>,
    pub pain_prob: Option<f64>,
}

impl AffectFrame {
    pub fn validate(&self) -> Result<()> {
        if self.gaze.is_none() && self.on_screen.is_none() && self.pain_prob.is_none() {
            return Err(Error::Input("affect frame carries no channel".into()));
        }
        if let Some(p) = self.pain_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Input(format!("pain_prob {p} outside [0, 1]")));
            }
        }
        if let Some(g) = self.gaze {
            if !g.pitch_deg.is_finite() || !g.yaw_deg.is_finite() {
                return Err(Error::Input("non-finite gaze angle".into()));
            }
        }
        Ok(())
    }
}

/// Gaze angles that land on the exercise screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeCalibration {
    pub yaw_range_deg: (f64, f64),
    pub pitch_range_deg: (f64, f64),
}

impl Default for GazeCalibration {
    fn default() -> Self {
        GazeCalibration {
            yaw_range_deg: (-25.0, 25.0),
            pitch_range_deg: (-25.0, 25.0),
        }
    }
}

impl GazeCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.yaw_range_deg.0 < self.yaw_range_deg.1
            && self.pitch_range_deg.0 < self.pitch_range_deg.1)
        {
            return Err(Error::Spec("gaze calibration ranges need min < max".into()));
        }
        Ok(())
    }
}

/// On-screen iff both angles lie inside their closed calibrated ranges.
pub fn classify_gaze(frame: &AffectFrame, calib: &GazeCalibration) -> Result<bool> {
    let g = frame
        .gaze
        .ok_or_else(|| Error::Input("frame has no gaze angles".into()))?;
    let (ylo, yhi) = calib.yaw_range_deg;
    let (plo, phi) = calib.pitch_range_deg;
    Ok(g.yaw_deg >= ylo && g.yaw_deg <= yhi && g.pitch_deg >= plo && g.pitch_deg <= phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffectThresholds {
    pub distraction_ratio: f64,
    pub attention_window_s: f64,
    pub pain_ratio: f64,
    pub pain_cutoff: f64,
    pub pain_window_s: f64,
    pub stress_k: usize,
    pub stress_n: usize,
    pub cooldown_s: f64,
}

impl Default for AffectThresholds {
    fn default() -> Self {
        AffectThresholds {
            distraction_ratio: 0.6,
            attention_window_s: 5.0,
            pain_ratio: 0.6,
            pain_cutoff: 0.5,
            pain_window_s: 3.0,
            stress_k: 3,
            stress_n: 4,
            cooldown_s: 60.0,
        }
    }
}

impl AffectThresholds {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.distraction_ratio) || !unit(self.pain_ratio) || !unit(self.pain_cutoff) {
            return Err(Error::Spec("affect ratios must lie in (0, 1)".into()));
        }
        if self.stress_k == 0 || self.stress_k > self.stress_n {
            return Err(Error::Spec("stress rule needs 0 < k <= n".into()));
        }
        if !(self.cooldown_s >= 0.0)
            || !(self.attention_window_s > 0.0)
            || !(self.pain_window_s > 0.0)
        {
            return Err(Error::Spec("windows must be > 0 and cooldown >= 0".into()));
        }
        Ok(())
    }

    fn cooldown_ms(&self) -> f64 {
        self.cooldown_s * 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AffectKind {
    Distraction,
    Pain,
    Stress,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectEvent {
    pub kind: AffectKind,
    pub onset_ms: u64,
    /// Window ratio for attention/pain, positive-window fraction for stress.
    pub evidence: f64,
}

/// Fraction of off-screen frames.
pub fn off_ratio(on_screen: &[bool]) -> f64 {
    on_screen.iter().filter(|v| !**v).count() as f64 / on_screen.len() as f64
}

/// Fraction of frames strictly above the pain cutoff.
pub fn pain_ratio(probs: &[f64], cutoff: f64) -> f64 {
    probs.iter().filter(|p| **p > cutoff).count() as f64 / probs.len() as f64
}

#[derive(Debug, Clone, Default)]
struct Cooldown {
    last_ms: Option<u64>,
}

impl Cooldown {
    fn ready(&self, now: u64, cooldown_ms: f64) -> bool {
        self.last_ms
            .is_none_or(|l| (now - l.min(now)) as f64 >= cooldown_ms)
    }
}

/// Sliding-window ratio detector shared by the attention and pain channels.
#[derive(Debug, Clone)]
struct RatioChannel {
    kind: AffectKind,
    window_ms: f64,
    threshold: f64,
    frames: VecDeque<(u64, bool)>,
    first_ms: Option<u64>,
    cooldown: Cooldown,
}

impl RatioChannel {
    fn new(kind: AffectKind, window_s: f64, threshold: f64) -> Self {
        RatioChannel {
            kind,
            window_ms: window_s * 1000.0,
            threshold,
            frames: VecDeque::new(),
            first_ms: None,
            cooldown: Cooldown::default(),
        }
    }

    fn push(&mut self, t_ms: u64, hit: bool, cooldown_ms: f64) -> (f64, Option<AffectEvent>) {
        self.first_ms.get_or_insert(t_ms);
        self.frames.push_back((t_ms, hit));
        while self
            .frames
            .front()
            .is_some_and(|f| (t_ms - f.0.min(t_ms)) as f64 >= self.window_ms)
        {
            self.frames.pop_front();
        }
        let ratio = self.frames.iter().filter(|f| f.1).count() as f64 / self.frames.len() as f64;
        // the window must have filled once before it can fire
        let filled = (t_ms - self.first_ms.unwrap_or(t_ms)) as f64 >= self.window_ms;
        let fire = filled && ratio > self.threshold && self.cooldown.ready(t_ms, cooldown_ms);
        if !fire {
            return (ratio, None);
        }
        self.cooldown.last_ms = Some(t_ms);
        let ev = AffectEvent {
            kind: self.kind,
            onset_ms: t_ms,
            evidence: ratio,
        };
        assert!(ev.evidence > self.threshold);
        (ratio, Some(ev))
    }
}

/// Evaluates one attention window: off-screen ratio, and an event if it
/// exceeds the threshold (cooldown is applied by the caller's stage).
pub fn attention_window(
    on_screen: &[bool],
    th: &AffectThresholds,
    t_ms: u64,
) -> (f64, Option<AffectEvent>) {
    let r = off_ratio(on_screen);
    let ev = (r > th.distraction_ratio).then_some(AffectEvent {
        kind: AffectKind::Distraction,
        onset_ms: t_ms,
        evidence: r,
    });
    (r, ev)
}

/// Evaluates one pain window.
pub fn pain_window(probs: &[f64], th: &AffectThresholds, t_ms: u64) -> (f64, Option<AffectEvent>) {
    let r = pain_ratio(probs, th.pain_cutoff);
    let ev = (r > th.pain_ratio).then_some(AffectEvent {
        kind: AffectKind::Pain,
        onset_ms: t_ms,
        evidence: r,
    });
    (r, ev)
}

/// k-of-n debouncer for per-window stress verdicts.
#[derive(Debug, Clone)]
pub struct StressSmoother {
    k: usize,
    n: usize,
    cooldown_ms: f64,
    history: VecDeque<bool>,
    cooldown: Cooldown,
}

impl StressSmoother {
    pub fn new(th: &AffectThresholds) -> Self {
        StressSmoother {
            k: th.stress_k,
            n: th.stress_n,
            cooldown_ms: th.cooldown_ms(),
            history: VecDeque::with_capacity(th.stress_n),
            cooldown: Cooldown::default(),
        }
    }

    pub fn push(&mut self, t_ms: u64, stressed: bool) -> Option<AffectEvent> {
        if self.history.len() == self.n {
            self.history.pop_front();
        }
        self.history.push_back(stressed);
        let positives = self.history.iter().filter(|v| **v).count();
        if positives < self.k || !self.cooldown.ready(t_ms, self.cooldown_ms) {
            return None;
        }
        self.cooldown.last_ms = Some(t_ms);
        let evidence = positives as f64 / self.n as f64;
        assert!(evidence >= self.k as f64 / self.n as f64);
        Some(AffectEvent {
            kind: AffectKind::Stress,
            onset_ms: t_ms,
            evidence,
        })
    }
}

/// All three channels behind one ingestion point.
#[derive(Debug, Clone)]
pub struct AffectFusion {
    thresholds: AffectThresholds,
    calibration: GazeCalibration,
    attention: RatioChannel,
    pain: RatioChannel,
    stress: StressSmoother,
}

impl AffectFusion {
    pub fn new(thresholds: AffectThresholds, calibration: GazeCalibration) -> Result<Self> {
        thresholds.validate()?;
        calibration.validate()?;
        Ok(AffectFusion {
            attention: RatioChannel::new(
                AffectKind::Distraction,
                thresholds.attention_window_s,
                thresholds.distraction_ratio,
            ),
            pain: RatioChannel::new(
                AffectKind::Pain,
                thresholds.pain_window_s,
                thresholds.pain_ratio,
            ),
            stress: StressSmoother::new(&thresholds),
            thresholds,
            calibration,
        })
    }

    pub fn thresholds(&self) -> &AffectThresholds {
        &self.thresholds
    }

    /// Feeds one frame; a precomputed `on_screen` label wins over gaze angles.
    pub fn push_frame(&mut self, frame: &AffectFrame) -> Result<Vec<AffectEvent>> {
        frame.validate()?;
        let cd = self.thresholds.cooldown_ms();
        let mut events = Vec::new();
        let on_screen = match (frame.on_screen, frame.gaze) {
            (Some(v), _) => Some(v),
            (None, Some(_)) => Some(classify_gaze(frame, &self.calibration)?),
            (None, None) => None,
        };
        if let Some(on) = on_screen {
            events.extend(self.attention.push(frame.t_ms, !on, cd).1);
        }
        if let Some(p) = frame.pain_prob {
            let hit = p > self.thresholds.pain_cutoff;
            events.extend(self.pain.push(frame.t_ms, hit, cd).1);
        }
        Ok(events)
    }

    pub fn push_stress_verdict(&mut self, t_ms: u64, stressed: bool) -> Option<AffectEvent> {
        self.stress.push(t_ms, stressed)
    }
}

const CSV_HEADER: &str = "t_ms,pitch_deg,yaw_deg,on_screen,pain_prob";

/// Reads the affect replay format; empty cells mark an absent channel.
pub fn read_affect_csv<R: Read>(reader: R) -> Result<Vec<AffectFrame>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input(format!("csv: {e}")))?
        .clone();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Input(format!(
            "affect csv header must be `{CSV_HEADER}`"
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("csv: {e}")))?;
        let line = row + 2;
        let num = |i: usize| -> Result<Option<f64>> {
            let s = rec.get(i).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Input(format!("row {line}: bad number `{s}`")))
        };
        let t_ms = rec
            .get(0)
            .unwrap_or("")
            .parse::<u64>()
            .map_err(|_| Error::Input(format!("row {line}: bad t_ms")))?;
        let gaze = match (num(1)?, num(2)?) {
            (Some(p), Some(y)) => Some(Gaze {
                pitch_deg: p,
                yaw_deg: y,
            }),
            (None, None) => None,
            _ => {
                return Err(Error::Input(format!(
                    "row {line}: pitch and yaw must both be present"
                )))
            }
        };
        let on_screen = match rec.get(3).unwrap_or("") {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => return Err(Error::Input(format!("row {line}: bad on_screen `{other}`"))),
        };
        let frame = AffectFrame {
            t_ms,
            gaze,
            on_screen,
            pain_prob: num(4)?,
        };
        frame.validate()?;
        out.push(frame);
    }
    Ok(out)
}

pub fn write_affect_csv<W: Write>(mut w: W, frames: &[AffectFrame]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for f in frames {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            f.t_ms,
            opt(f.gaze.map(|g| g.pitch_deg)),
            opt(f.gaze.map(|g| g.yaw_deg)),
            f.on_screen.map(|b| if b { "1" } else { "0" }).unwrap_or(""),
            opt(f.pain_prob),
        )?;
    }
    Ok(())
}
