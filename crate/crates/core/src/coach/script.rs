//! Scripted coach scenarios: one timestamped input per line.
//!
//! ```text
//! # comment
//! 0 start
//! 300000 tick
//! 301000 ack
//! 420000 event kind=Stress evidence=0.75
//! 541000 metrics session=1 pdi=0.52
//! ```
//!
//! Metrics lines may also carry `mean_deviation_m`, `max_deviation_m`,
//! `distance_m` and `elapsed_s`; missing ones default to 0.

use std::collections::HashMap;

use crate::affect::{AffectEvent, AffectKind};
use crate::coach::{AgentAction, Coach, CoachInput};
use crate::error::{Error, Result};
use crate::scoring::SessionMetrics;

pub fn parse_script(text: &str) -> Result<Vec<(u64, CoachInput)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Input(format!("script line {}: {msg}", n + 1));
        let mut parts = line.split_whitespace();
        let ts: u64 = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|_| bad("timestamp must be an integer".into()))?;
        let kind = parts
            .next()
            .ok_or_else(|| bad("missing input kind".into()))?;
        let mut kv = HashMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{p}`")))?;
            kv.insert(k, v);
        }
        let num = |k: &str, default: Option<f64>| -> Result<f64> {
            match kv.get(k) {
                Some(v) => v.parse().map_err(|_| bad(format!("bad number for {k}"))),
                None => default.ok_or_else(|| bad(format!("missing {k}"))),
            }
        };
        let input = match kind {
            "tick" => CoachInput::Tick,
            "start" => CoachInput::Start,
            "ack" => CoachInput::Ack,
            "event" => {
                let kind = match kv.get("kind").copied() {
                    Some("Distraction") => AffectKind::Distraction,
                    Some("Pain") => AffectKind::Pain,
                    Some("Stress") => AffectKind::Stress,
                    other => return Err(bad(format!("unknown event kind {other:?}"))),
                };
                CoachInput::Event(AffectEvent {
                    kind,
                    onset_ms: ts,
                    evidence: num("evidence", None)?,
                })
            }
            "metrics" => CoachInput::Metrics(SessionMetrics {
                session: num("session", None)? as u32,
                mean_deviation_m: num("mean_deviation_m", Some(0.0))?,
                max_deviation_m: num("max_deviation_m", Some(0.0))?,
                distance_m: num("distance_m", Some(0.0))?,
                elapsed_s: num("elapsed_s", Some(0.0))?,
                pdi: num("pdi", None)?,
            }),
            other => return Err(bad(format!("unknown input `{other}`"))),
        };
        out.push((ts, input));
    }
    Ok(out)
}

/// Drives the coach: every input is preceded by a tick at its timestamp,
/// the same order the live session and log replay use.
pub fn run_inputs(
    coach: &mut Coach,
    inputs: &[(u64, CoachInput)],
) -> Result<Vec<(u64, AgentAction)>> {
    let mut out = Vec::new();
    for (ts, input) in inputs {
        out.extend(
            coach
                .advance(*ts, &CoachInput::Tick)?
                .into_iter()
                .map(|a| (*ts, a)),
        );
        if *input != CoachInput::Tick {
            out.extend(coach.advance(*ts, input)?.into_iter().map(|a| (*ts, a)));
        }
    }
    Ok(out)
}
