//! Line-oriented wire protocol shared by datagram feeds, the UI stream and
//! session logs.
//!
//! Every record is one JSON object on one line with keys in lexicographic
//! order and floats in shortest round-trip form, so the encoding of a value
//! is unique. The envelope is `v` (always 1), `type` and `ts_ms`.

pub mod config;
pub mod log;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::affect::{AffectEvent, AffectFrame, AffectKind, Gaze};
use crate::assist::{ForceCommand, HandleState};
use crate::coach::{AgentAction, Cause, Expression, Gesture};
use crate::error::{Error, Result};
use crate::scoring::SessionMetrics;
use crate::trajectory::PathPoint;
use crate::vec2::Vec2;

pub use config::{AppConfig, NetworkConfig, SessionSetup};

pub const PROTOCOL_VERSION: u64 = 1;
pub const MAX_RECORD_BYTES: usize = 1200;

#[derive(Debug, Clone, PartialEq)]
pub enum SessionCtrl {
    Start,
    Ack,
    Abort,
    Config(Box<SessionSetup>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Hello {
        role: String,
    },
    /// `t_ms` must equal the envelope timestamp.
    Frame(AffectFrame),
    Handle(HandleState),
    Force(ForceCommand),
    /// `onset_ms` must equal the envelope timestamp.
    Event(AffectEvent),
    Metrics(SessionMetrics),
    AgentAction(AgentAction),
    SessionCtrl(SessionCtrl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub ts_ms: u64,
    pub payload: Payload,
}

impl WireMessage {
    pub fn new(ts_ms: u64, payload: Payload) -> Self {
        WireMessage { ts_ms, payload }
    }

    pub fn frame(frame: AffectFrame) -> Self {
        WireMessage::new(frame.t_ms, Payload::Frame(frame))
    }

    pub fn event(ev: AffectEvent) -> Self {
        WireMessage::new(ev.onset_ms, Payload::Event(ev))
    }

    pub fn ctrl(ts_ms: u64, c: SessionCtrl) -> Self {
        WireMessage::new(ts_ms, Payload::SessionCtrl(c))
    }

    pub fn type_name(&self) -> &'static str {
        match &self.payload {
            Payload::Hello { .. } => "HELLO",
            Payload::Frame(_) => "FRAME",
            Payload::Handle(_) => "HANDLE",
            Payload::Force(_) => "FORCE",
            Payload::Event(_) => "EVENT",
            Payload::Metrics(_) => "METRICS",
            Payload::AgentAction(_) => "AGENT_ACTION",
            Payload::SessionCtrl(_) => "SESSION_CTRL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    Start,
    Ack,
    Abort,
    Config,
}

// Field layouts as they appear on the wire; the envelope keys are added
// separately.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum Body {
    #[serde(rename = "HELLO")]
    Hello { role: String },
    #[serde(rename = "FRAME")]
    Frame {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pitch_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        yaw_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on_screen: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pain_prob: Option<f64>,
    },
    #[serde(rename = "HANDLE")]
    Handle {
        position: Vec2,
        velocity: Vec2,
        t_ms: f64,
    },
    #[serde(rename = "FORCE")]
    Force {
        force: Vec2,
        error_m: f64,
        ref_s: f64,
        ref_position: Vec2,
        ref_tangent: Vec2,
    },
    #[serde(rename = "EVENT")]
    Event { kind: AffectKind, evidence: f64 },
    #[serde(rename = "METRICS")]
    Metrics {
        session: u32,
        mean_deviation_m: f64,
        max_deviation_m: f64,
        distance_m: f64,
        elapsed_s: f64,
        pdi: f64,
    },
    #[serde(rename = "AGENT_ACTION")]
    AgentAction {
        utterance: String,
        gesture: Gesture,
        expression: Expression,
        cause: Cause,
    },
    #[serde(rename = "SESSION_CTRL")]
    SessionCtrl {
        command: Command,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<SessionSetup>,
    },
}

fn to_body(msg: &WireMessage) -> Result<Body> {
    Ok(match &msg.payload {
        Payload::Hello { role } => Body::Hello { role: role.clone() },
        Payload::Frame(f) => {
            if f.t_ms != msg.ts_ms {
                return Err(Error::Encode(
                    "FRAME t_ms differs from envelope ts_ms".into(),
                ));
            }
            f.validate().map_err(|e| Error::Encode(e.to_string()))?;
            Body::Frame {
                pitch_deg: f.gaze.map(|g| g.pitch_deg),
                yaw_deg: f.gaze.map(|g| g.yaw_deg),
                on_screen: f.on_screen,
                pain_prob: f.pain_prob,
            }
        }
        Payload::Handle(h) => Body::Handle {
            position: h.position,
            velocity: h.velocity,
            t_ms: h.t_ms,
        },
        Payload::Force(f) => Body::Force {
            force: f.force,
            error_m: f.error_m,
            ref_s: f.reference.s,
            ref_position: f.reference.position,
            ref_tangent: f.reference.tangent,
        },
        Payload::Event(e) => {
            if e.onset_ms != msg.ts_ms {
                return Err(Error::Encode(
                    "EVENT onset differs from envelope ts_ms".into(),
                ));
            }
            Body::Event {
                kind: e.kind,
                evidence: e.evidence,
            }
        }
        Payload::Metrics(m) => Body::Metrics {
            session: m.session,
            mean_deviation_m: m.mean_deviation_m,
            max_deviation_m: m.max_deviation_m,
            distance_m: m.distance_m,
            elapsed_s: m.elapsed_s,
            pdi: m.pdi,
        },
        Payload::AgentAction(a) => {
            if a.utterance.is_empty() {
                return Err(Error::Encode("empty utterance".into()));
            }
            Body::AgentAction {
                utterance: a.utterance.clone(),
                gesture: a.gesture,
                expression: a.expression,
                cause: a.cause,
            }
        }
        Payload::SessionCtrl(c) => {
            let (command, config) = match c {
                SessionCtrl::Start => (Command::Start, None),
                SessionCtrl::Ack => (Command::Ack, None),
                SessionCtrl::Abort => (Command::Abort, None),
                SessionCtrl::Config(s) => (Command::Config, Some((**s).clone())),
            };
            Body::SessionCtrl { command, config }
        }
    })
}

fn from_body(ts_ms: u64, body: Body) -> Result<Payload> {
    Ok(match body {
        Body::Hello { role } => Payload::Hello { role },
        Body::Frame {
            pitch_deg,
            yaw_deg,
            on_screen,
            pain_prob,
        } => {
            let gaze = match (pitch_deg, yaw_deg) {
                (Some(p), Some(y)) => Some(Gaze {
                    pitch_deg: p,
                    yaw_deg: y,
                }),
                (None, None) => None,
                (None, Some(_)) => return Err(Error::Decode("missing field `pitch_deg`".into())),
                (Some(_), None) => return Err(Error::Decode("missing field `yaw_deg`".into())),
            };
            let f = AffectFrame {
                t_ms: ts_ms,
                gaze,
                on_screen,
                pain_prob,
            };
            f.validate().map_err(|e| Error::Decode(e.to_string()))?;
            Payload::Frame(f)
        }
        Body::Handle {
            position,
            velocity,
            t_ms,
        } => Payload::Handle(HandleState {
            position,
            velocity,
            t_ms,
        }),
        Body::Force {
            force,
            error_m,
            ref_s,
            ref_position,
            ref_tangent,
        } => Payload::Force(ForceCommand {
            force,
            reference: PathPoint {
                s: ref_s,
                position: ref_position,
                tangent: ref_tangent,
            },
            error_m,
        }),
        Body::Event { kind, evidence } => Payload::Event(AffectEvent {
            kind,
            onset_ms: ts_ms,
            evidence,
        }),
        Body::Metrics {
            session,
            mean_deviation_m,
            max_deviation_m,
            distance_m,
            elapsed_s,
            pdi,
        } => Payload::Metrics(SessionMetrics {
            session,
            mean_deviation_m,
            max_deviation_m,
            distance_m,
            elapsed_s,
            pdi,
        }),
        Body::AgentAction {
            utterance,
            gesture,
            expression,
            cause,
        } => {
            if utterance.is_empty() {
                return Err(Error::Decode("empty utterance".into()));
            }
            Payload::AgentAction(AgentAction {
                utterance,
                gesture,
                expression,
                cause,
            })
        }
        Body::SessionCtrl { command, config } => Payload::SessionCtrl(match (command, config) {
            (Command::Start, _) => SessionCtrl::Start,
            (Command::Ack, _) => SessionCtrl::Ack,
            (Command::Abort, _) => SessionCtrl::Abort,
            (Command::Config, Some(c)) => SessionCtrl::Config(Box::new(c)),
            (Command::Config, None) => return Err(Error::Decode("missing field `config`".into())),
        }),
    })
}

fn has_null(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.iter().any(has_null),
        Value::Object(o) => o.values().any(has_null),
        _ => false,
    }
}

/// Canonical record, newline included.
pub fn encode(msg: &WireMessage) -> Result<String> {
    let body = to_body(msg)?;
    let mut value = serde_json::to_value(&body).map_err(|e| Error::Encode(e.to_string()))?;
    // serde_json writes non-finite floats as null
    if has_null(&value) {
        return Err(Error::Encode(format!(
            "{} carries a non-finite number",
            msg.type_name()
        )));
    }
    let obj = value.as_object_mut().expect("body serializes to an object");
    obj.insert("v".into(), Value::from(PROTOCOL_VERSION));
    obj.insert("ts_ms".into(), Value::from(msg.ts_ms));
    let mut line = serde_json::to_string(&value).map_err(|e| Error::Encode(e.to_string()))?;
    line.push('\n');
    if line.len() > MAX_RECORD_BYTES {
        return Err(Error::Encode(format!(
            "{} record is {} bytes, limit {MAX_RECORD_BYTES}",
            msg.type_name(),
            line.len()
        )));
    }
    Ok(line)
}

fn envelope(obj: &Map<String, Value>) -> Result<u64> {
    let v = obj
        .get("v")
        .ok_or_else(|| Error::Decode("missing field `v`".into()))?;
    if v.as_u64() != Some(PROTOCOL_VERSION) {
        return Err(Error::Decode(format!("unsupported protocol version {v}")));
    }
    if !obj.contains_key("type") {
        return Err(Error::Decode("missing field `type`".into()));
    }
    let ts = obj
        .get("ts_ms")
        .ok_or_else(|| Error::Decode("missing field `ts_ms`".into()))?;
    ts.as_u64().ok_or_else(|| {
        Error::Decode(format!(
            "field `ts_ms` must be a non-negative integer, got {ts}"
        ))
    })
}

/// Parses one record in any key order; a single trailing newline is allowed.
pub fn decode(bytes: &[u8]) -> Result<WireMessage> {
    let bytes = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let bytes = bytes.strip_suffix(b"\r").unwrap_or(bytes);
    let value: Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::Decode(format!("malformed record: {e}")))?;
    let Value::Object(obj) = &value else {
        return Err(Error::Decode("record is not an object".into()));
    };
    let ts_ms = envelope(obj)?;
    let body: Body = serde_json::from_value(value).map_err(|e| Error::Decode(e.to_string()))?;
    Ok(WireMessage {
        ts_ms,
        payload: from_body(ts_ms, body)?,
    })
}

pub fn decode_str(line: &str) -> Result<WireMessage> {
    decode(line.as_bytes())
}
