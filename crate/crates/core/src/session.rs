//! The session task shared by the server and the simulator: it owns the
//! coach, the affect stages and the running exercise, and turns inputs into
//! log records.
//!
//! Every record except `AGENT_ACTION` first ticks the coach at its
//! timestamp and is then fed to it if it is a coach input (start, ack,
//! event, metrics). Replaying a log applies the same rule, which is what
//! makes transcripts reproducible from logs alone.

use crate::affect::{AffectEvent, AffectFrame, AffectFusion, AffectThresholds, GazeCalibration};
use crate::assist::{compute_force, AssistConfig, ForceCommand, HandleState, REFERENCE_WINDOW};
use crate::coach::{AgentAction, Coach, CoachInput, Phase, UtteranceBank};
use crate::error::{Error, Result};
use crate::scoring::{MetricsAccumulator, SessionMetrics};
use crate::trajectory::{PathPoint, Trajectory};
use crate::wire::{Payload, SessionCtrl, SessionSetup, WireMessage};

/// A session counts as complete once the reference has covered this much
/// of the path; the slack absorbs rounding in the accumulated advances.
const COMPLETE_PROGRESS: f64 = 1.0 - 1e-9;
/// Sessions are cut off after this multiple of the target duration.
const TIMEOUT_FACTOR: f64 = 2.0;

#[derive(Debug, Clone)]
struct ExerciseRun {
    session: u32,
    assist: AssistConfig,
    reference: PathPoint,
    progress: f64,
    acc: MetricsAccumulator,
    t0_ms: Option<f64>,
    paused: bool,
}

fn coach_input(msg: &WireMessage) -> Option<CoachInput> {
    match &msg.payload {
        Payload::SessionCtrl(SessionCtrl::Start) => Some(CoachInput::Start),
        Payload::SessionCtrl(SessionCtrl::Ack) => Some(CoachInput::Ack),
        Payload::Event(e) => Some(CoachInput::Event(*e)),
        Payload::Metrics(m) => Some(CoachInput::Metrics(*m)),
        _ => None,
    }
}

fn action_record(ts_ms: u64, a: AgentAction) -> WireMessage {
    WireMessage::new(ts_ms, Payload::AgentAction(a))
}

/// Applies the record rule to `coach`, returning its actions as records.
/// Protocol errors (an input illegal for the phase) leave the coach as it
/// was and are reported alongside.
fn drive(coach: &mut Coach, msg: &WireMessage) -> Result<(Vec<WireMessage>, Option<Error>)> {
    let mut out: Vec<WireMessage> = coach
        .advance(msg.ts_ms, &CoachInput::Tick)?
        .into_iter()
        .map(|a| action_record(msg.ts_ms, a))
        .collect();
    let mut rejected = None;
    if let Some(input) = coach_input(msg) {
        match coach.advance(msg.ts_ms, &input) {
            Ok(actions) => out.extend(actions.into_iter().map(|a| action_record(msg.ts_ms, a))),
            Err(e @ Error::Protocol(_)) => rejected = Some(e),
            Err(e) => return Err(e),
        }
    }
    Ok((out, rejected))
}

pub struct SessionCore {
    setup: SessionSetup,
    traj: Trajectory,
    coach: Coach,
    fusion: AffectFusion,
    run: Option<ExerciseRun>,
    completed: Vec<SessionMetrics>,
    out: Vec<WireMessage>,
    aborted: bool,
    last_ts: u64,
}

impl SessionCore {
    pub fn new(
        setup: SessionSetup,
        thresholds: AffectThresholds,
        gaze: GazeCalibration,
    ) -> Result<Self> {
        setup.plan.validate()?;
        setup.scoring.validate()?;
        Ok(SessionCore {
            traj: setup.plan.exercise_spec().build()?,
            coach: Coach::new(setup.coach_config(), UtteranceBank::default())?,
            fusion: AffectFusion::new(thresholds, gaze)?,
            setup,
            run: None,
            completed: Vec::new(),
            out: Vec::new(),
            aborted: false,
            last_ts: 0,
        })
    }

    pub fn phase(&self) -> Phase {
        self.coach.phase()
    }

    pub fn setup(&self) -> &SessionSetup {
        &self.setup
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn completed(&self) -> &[SessionMetrics] {
        &self.completed
    }

    pub fn aborted(&self) -> bool {
        self.aborted
    }

    /// Exercise session currently accepting handle samples.
    pub fn active_session(&self) -> Option<u32> {
        self.run.as_ref().filter(|r| !r.paused).map(|r| r.session)
    }

    /// Assistance of the running session, or the coach's choice for the next.
    pub fn assist(&self) -> AssistConfig {
        self.run
            .as_ref()
            .map(|r| r.assist)
            .unwrap_or(*self.coach.assist())
    }

    /// Records produced since the last call, in log order.
    pub fn drain(&mut self) -> Vec<WireMessage> {
        std::mem::take(&mut self.out)
    }

    pub fn now_ms(&self) -> u64 {
        self.last_ts
    }

    fn record(&mut self, msg: WireMessage) -> Result<()> {
        if msg.ts_ms < self.last_ts {
            return Err(Error::Protocol(format!(
                "record at {} ms precedes session time {} ms",
                msg.ts_ms, self.last_ts
            )));
        }
        self.last_ts = msg.ts_ms;
        let (actions, rejected) = drive(&mut self.coach, &msg)?;
        // actions triggered by the tick precede the record; that order is
        // irrelevant to replay, which compares action sequences only
        self.out.push(msg);
        self.out.extend(actions);
        self.sync_phase();
        match rejected {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn sync_phase(&mut self) {
        match self.coach.phase() {
            Phase::ExerciseRunning(i) => match &mut self.run {
                Some(r) if r.session == i => r.paused = false,
                _ => {
                    self.run = Some(ExerciseRun {
                        session: i,
                        assist: *self.coach.assist(),
                        reference: self.traj.eval(0.0),
                        progress: 0.0,
                        acc: MetricsAccumulator::new(),
                        t0_ms: None,
                        paused: false,
                    })
                }
            },
            Phase::BreakSuggested(_) => {
                if let Some(r) = &mut self.run {
                    r.paused = true;
                }
            }
            _ => self.run = None,
        }
    }

    /// Opens the log with the setup record and starts calibration.
    pub fn begin(&mut self, ts_ms: u64) -> Result<()> {
        self.record(WireMessage::ctrl(
            ts_ms,
            SessionCtrl::Config(Box::new(self.setup.clone())),
        ))?;
        self.record(WireMessage::ctrl(ts_ms, SessionCtrl::Start))
    }

    pub fn ctrl(&mut self, ts_ms: u64, c: SessionCtrl) -> Result<()> {
        match c {
            SessionCtrl::Abort => {
                self.record(WireMessage::ctrl(ts_ms, SessionCtrl::Abort))?;
                self.aborted = true;
                Ok(())
            }
            SessionCtrl::Config(setup) => {
                if self.coach.phase() != Phase::Idle {
                    return Err(Error::Protocol(
                        "config is only accepted before start".into(),
                    ));
                }
                let fresh = SessionCore::new(
                    (*setup).clone(),
                    *self.fusion.thresholds(),
                    GazeCalibration::default(),
                )?;
                let kept_fusion = self.fusion.clone();
                let last = self.last_ts;
                let out = std::mem::take(&mut self.out);
                *self = fresh;
                self.fusion = kept_fusion;
                self.last_ts = last;
                self.out = out;
                self.record(WireMessage::ctrl(ts_ms, SessionCtrl::Config(setup)))
            }
            other => self.record(WireMessage::ctrl(ts_ms, other)),
        }
    }

    /// Liveness record; also advances the coach clock.
    pub fn heartbeat(&mut self, ts_ms: u64) -> Result<()> {
        self.record(WireMessage::new(
            ts_ms,
            Payload::Hello {
                role: "server".into(),
            },
        ))
    }

    pub fn frame(&mut self, frame: AffectFrame) -> Result<()> {
        let events = self.fusion.push_frame(&frame)?;
        self.record(WireMessage::frame(frame))?;
        for ev in events {
            self.record(WireMessage::event(ev))?;
        }
        Ok(())
    }

    /// An affect event detected outside this process.
    pub fn event(&mut self, ev: AffectEvent) -> Result<()> {
        self.record(WireMessage::event(ev))
    }

    pub fn stress_verdict(&mut self, ts_ms: u64, stressed: bool) -> Result<()> {
        if let Some(ev) = self.fusion.push_stress_verdict(ts_ms, stressed) {
            self.record(WireMessage::event(ev))?;
        }
        Ok(())
    }

    /// One handle sample. Returns the assist force while an exercise is
    /// running; samples outside a running exercise are dropped.
    pub fn handle(&mut self, ts_ms: u64, state: HandleState) -> Result<Option<ForceCommand>> {
        if !state.position.is_finite() || !state.velocity.is_finite() || !state.t_ms.is_finite() {
            return Err(Error::Input("non-finite handle state".into()));
        }
        let traj = &self.traj;
        let Some(run) = self.run.as_mut().filter(|r| !r.paused) else {
            return Ok(None);
        };
        let (reference, du) =
            traj.project_forward(run.reference.s, REFERENCE_WINDOW, state.position);
        run.acc.push(traj, &state)?;
        run.reference = reference;
        run.progress += du;
        let t0 = *run.t0_ms.get_or_insert(state.t_ms);
        let cmd = compute_force(&state, &reference, &run.assist);
        let timed_out = state.t_ms - t0 >= TIMEOUT_FACTOR * traj.spec().target_duration_s * 1000.0;
        let done = run.progress >= COMPLETE_PROGRESS || timed_out;
        let metrics = if done {
            Some(run.acc.finish(traj, &self.setup.scoring, run.session)?)
        } else {
            None
        };
        self.record(WireMessage::new(ts_ms, Payload::Handle(state)))?;
        self.record(WireMessage::new(ts_ms, Payload::Force(cmd)))?;
        if let Some(m) = metrics {
            self.completed.push(m);
            self.record(WireMessage::new(ts_ms, Payload::Metrics(m)))?;
        }
        Ok(Some(cmd))
    }
}

fn setup_of(log: &[WireMessage]) -> Result<SessionSetup> {
    log.iter()
        .find_map(|m| match &m.payload {
            Payload::SessionCtrl(SessionCtrl::Config(s)) => Some((**s).clone()),
            _ => None,
        })
        .ok_or_else(|| Error::Input("log has no SESSION_CTRL config record".into()))
}

/// Re-drives a fresh coach from a log and returns its actions as records.
pub fn replay_log(log: &[WireMessage]) -> Result<Vec<WireMessage>> {
    let mut coach: Option<Coach> = None;
    let mut out = Vec::new();
    for msg in log {
        match &msg.payload {
            Payload::AgentAction(_) => continue,
            Payload::SessionCtrl(SessionCtrl::Config(s))
                if coach.as_ref().is_none_or(|c| c.phase() == Phase::Idle) =>
            {
                coach = Some(Coach::new(s.coach_config(), UtteranceBank::default())?);
            }
            _ => {}
        }
        let c = coach
            .as_mut()
            .ok_or_else(|| Error::Input("log does not start with a config record".into()))?;
        out.extend(drive(c, msg)?.0);
    }
    Ok(out)
}

/// Recomputes per-session metrics from the logged handle samples.
pub fn rescore_log(log: &[WireMessage]) -> Result<Vec<SessionMetrics>> {
    let setup = setup_of(log)?;
    let traj = setup.plan.exercise_spec().build()?;
    let mut acc = MetricsAccumulator::new();
    let mut out = Vec::new();
    for msg in log {
        match &msg.payload {
            Payload::Handle(h) => {
                acc.push(&traj, h)?;
            }
            Payload::Metrics(m) => {
                out.push(acc.finish(&traj, &setup.scoring, m.session)?);
                acc = MetricsAccumulator::new();
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Metrics records as logged.
pub fn logged_metrics(log: &[WireMessage]) -> Vec<SessionMetrics> {
    log.iter()
        .filter_map(|m| match &m.payload {
            Payload::Metrics(x) => Some(*x),
            _ => None,
        })
        .collect()
}

/// Action records as logged.
pub fn logged_actions(log: &[WireMessage]) -> Vec<WireMessage> {
    log.iter()
        .filter(|m| matches!(m.payload, Payload::AgentAction(_)))
        .cloned()
        .collect()
}
