//! Therapy manager: the session-protocol state machine, empathic reactions
//! to affect events, difficulty adaptation and performance summaries.

pub mod bank;
pub mod script;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::affect::{AffectEvent, AffectKind};
use crate::assist::AssistConfig;
use crate::error::{Error, Result};
use crate::scoring::{trend_of, SessionMetrics};
use crate::trajectory::{TrajectoryKind, TrajectorySpec};

pub use bank::{Lcg, Template, Tone, UtteranceBank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gesture {
    Wave,
    Nod,
    ThumbsUp,
    OpenPalms,
    PointScreen,
    HandOnHeart,
    Clap,
    Beckon,
    CalmDown,
    Explain,
    Shrug,
    Bow,
}

impl Gesture {
    pub const ALL: [Gesture; 12] = [
        Gesture::Wave,
        Gesture::Nod,
        Gesture::ThumbsUp,
        Gesture::OpenPalms,
        Gesture::PointScreen,
        Gesture::HandOnHeart,
        Gesture::Clap,
        Gesture::Beckon,
        Gesture::CalmDown,
        Gesture::Explain,
        Gesture::Shrug,
        Gesture::Bow,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expression {
    #[serde(rename = "joy")]
    Joy,
    #[serde(rename = "admiration")]
    Admiration,
    #[serde(rename = "happy-for")]
    HappyFor,
    #[serde(rename = "neutral")]
    Neutral,
    #[serde(rename = "concern")]
    Concern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cause {
    Greeting,
    Instruction,
    Distraction,
    Pain,
    Stress,
    SessionSummary,
    FinalSummary,
    DifficultyChange,
}

impl Cause {
    pub const ALL: [Cause; 8] = [
        Cause::Greeting,
        Cause::Instruction,
        Cause::Distraction,
        Cause::Pain,
        Cause::Stress,
        Cause::SessionSummary,
        Cause::FinalSummary,
        Cause::DifficultyChange,
    ];

    fn of_event(kind: AffectKind) -> Cause {
        match kind {
            AffectKind::Distraction => Cause::Distraction,
            AffectKind::Pain => Cause::Pain,
            AffectKind::Stress => Cause::Stress,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub utterance: String,
    pub gesture: Gesture,
    pub expression: Expression,
    pub cause: Cause,
}

/// The therapist-facing protocol for one patient visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionPlan {
    pub exercise: TrajectorySpec,
    pub assist: AssistConfig,
    pub sessions: u32,
    pub per_session_duration_s: f64,
    pub baseline_duration_s: f64,
    /// Scheduled time for the instruction and for each summary; the
    /// simulated patient acknowledges after these delays.
    pub instruction_s: f64,
    pub summary_s: f64,
}

impl Default for SessionPlan {
    fn default() -> Self {
        SessionPlan {
            exercise: TrajectorySpec::circle(0.10),
            assist: AssistConfig::default(),
            sessions: 3,
            per_session_duration_s: 240.0,
            baseline_duration_s: 300.0,
            instruction_s: 30.0,
            summary_s: 45.0,
        }
    }
}

impl SessionPlan {
    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.sessions) {
            return Err(Error::Spec(format!(
                "plan needs 1..=10 sessions, got {}",
                self.sessions
            )));
        }
        let durations = [
            self.per_session_duration_s,
            self.baseline_duration_s,
            self.instruction_s,
            self.summary_s,
        ];
        if durations.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Spec("plan durations must be > 0".into()));
        }
        self.assist.validate()?;
        self.exercise.build().map(|_| ())
    }

    /// The exercise path with the plan's session duration as its target time.
    pub fn exercise_spec(&self) -> TrajectorySpec {
        let mut s = self.exercise.clone();
        s.target_duration_s = self.per_session_duration_s;
        s
    }

    /// Instruction, every session with its summary, and the closing summary.
    /// The resting calibration is not counted as activity.
    pub fn scheduled_activity_s(&self) -> f64 {
        self.instruction_s
            + self.sessions as f64 * (self.per_session_duration_s + self.summary_s)
            + self.summary_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyRule {
    pub hard_pdi: f64,
    pub easy_pdi: f64,
}

impl Default for DifficultyRule {
    fn default() -> Self {
        DifficultyRule {
            hard_pdi: 1.0,
            easy_pdi: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoachConfig {
    pub sessions: u32,
    pub baseline_ms: u64,
    pub exercise: TrajectoryKind,
    pub assist: AssistConfig,
    pub difficulty: DifficultyRule,
    /// React to affect events while an exercise runs.
    pub in_session_interventions: bool,
    pub seed: u64,
}

impl CoachConfig {
    pub fn from_plan(plan: &SessionPlan, seed: u64) -> Self {
        CoachConfig {
            sessions: plan.sessions,
            baseline_ms: (plan.baseline_duration_s * 1000.0).round() as u64,
            exercise: plan.exercise.kind,
            assist: plan.assist,
            difficulty: DifficultyRule::default(),
            in_session_interventions: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Calibration,
    Instruction,
    ExerciseRunning(u32),
    /// Break offered during the given session; its exercise clock is paused.
    BreakSuggested(u32),
    InterSessionSummary(u32),
    FinalSummary,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoachInput {
    Tick,
    Start,
    Ack,
    Event(AffectEvent),
    Metrics(SessionMetrics),
}

fn exercise_name(kind: TrajectoryKind) -> &'static str {
    match kind {
        TrajectoryKind::Circle => "circle",
        TrajectoryKind::Line => "straight line",
        TrajectoryKind::Lemniscate => "infinity figure",
    }
}

fn fmt_pdi(p: f64) -> String {
    format!("{p:.2}")
}

fn compose(
    cause: Cause,
    first: &Template,
    second: &Template,
    middle: &str,
    vars: &[(&str, String)],
) -> AgentAction {
    let warm = if first.tone == Tone::Warmth {
        first
    } else {
        second
    };
    let mut text = bank::fill(&first.text, vars);
    if !middle.is_empty() {
        text.push(' ');
        text.push_str(middle);
    }
    text.push(' ');
    text.push_str(&bank::fill(&second.text, vars));
    AgentAction {
        utterance: text,
        gesture: warm.gesture,
        expression: warm.expression,
        cause,
    }
}

/// Closing summary over the completed sessions: one competence template
/// with the index values, the best session when there is more than one,
/// and one warmth template.
pub fn summarize(metrics: &[SessionMetrics], bank: &UtteranceBank, seed: u64) -> AgentAction {
    let mut rng = Lcg::new(seed);
    summary_action(
        metrics,
        bank,
        &mut rng,
        Cause::FinalSummary,
        Tone::Competence,
    )
}

fn summary_action(
    metrics: &[SessionMetrics],
    bank: &UtteranceBank,
    rng: &mut Lcg,
    cause: Cause,
    lead: Tone,
) -> AgentAction {
    let last = metrics.last().expect("summary needs at least one session");
    let trend = trend_of(metrics);
    let pdi_list = trend
        .pdi_list
        .iter()
        .map(|p| fmt_pdi(*p))
        .collect::<Vec<_>>()
        .join(", ");
    let vars = [
        ("session", last.session.to_string()),
        ("pdi", fmt_pdi(last.pdi)),
        ("pdi_list", pdi_list),
        ("best", trend.best_session.to_string()),
    ];
    let first = bank.pick(cause, lead, rng);
    let second = bank.pick(cause, lead.other(), rng);
    let middle = if cause == Cause::FinalSummary && metrics.len() > 1 {
        let mut m = format!("Your best was session {}.", trend.best_session);
        if trend.improving {
            m.push_str(" You improved in every session.");
        }
        m
    } else {
        String::new()
    };
    compose(cause, first, second, &middle, &vars)
}

fn with_level(current: &AssistConfig, level: crate::assist::AssistLevel) -> AssistConfig {
    let mut next = AssistConfig::for_level(level);
    next.force_cap_n = current.force_cap_n;
    next
}

/// Moves assistance one level based on the last session's index.
pub fn adapt_difficulty(
    history: &[SessionMetrics],
    current: &AssistConfig,
    rule: &DifficultyRule,
    bank: &UtteranceBank,
    rng: &mut Lcg,
    tone: Tone,
) -> (AssistConfig, Option<AgentAction>) {
    let Some(last) = history.last() else {
        return (*current, None);
    };
    let (next, change) = if last.pdi > rule.hard_pdi && current.level.raised() != current.level {
        (
            with_level(current, current.level.raised()),
            "give you a little more support on the path",
        )
    } else if last.pdi < rule.easy_pdi && current.level.lowered() != current.level {
        (
            with_level(current, current.level.lowered()),
            "render the task more challenging by reducing the assistance",
        )
    } else {
        return (*current, None);
    };
    let tpl = bank.pick(Cause::DifficultyChange, tone, rng);
    let text = bank::fill(
        &tpl.text,
        &[("pdi", fmt_pdi(last.pdi)), ("change", change.to_string())],
    );
    let action = AgentAction {
        utterance: text,
        gesture: tpl.gesture,
        expression: tpl.expression,
        cause: Cause::DifficultyChange,
    };
    (next, Some(action))
}

/// Single-owner coach state. Every call to [`Coach::advance`] carries the
/// wall-clock timestamp of the input; time never runs backwards.
#[derive(Debug, Clone)]
pub struct Coach {
    cfg: CoachConfig,
    bank: UtteranceBank,
    rng: Lcg,
    phase: Phase,
    now_ms: u64,
    calibration_start_ms: u64,
    metrics: Vec<SessionMetrics>,
    events: Vec<AffectEvent>,
    last_tone: BTreeMap<Cause, Tone>,
    assist: AssistConfig,
}

impl Coach {
    pub fn new(cfg: CoachConfig, bank: UtteranceBank) -> Result<Self> {
        bank.validate()?;
        if !(1..=10).contains(&cfg.sessions) {
            return Err(Error::Spec(format!(
                "coach needs 1..=10 sessions, got {}",
                cfg.sessions
            )));
        }
        Ok(Coach {
            rng: Lcg::new(cfg.seed),
            assist: cfg.assist,
            cfg,
            bank,
            phase: Phase::Idle,
            now_ms: 0,
            calibration_start_ms: 0,
            metrics: Vec::new(),
            events: Vec::new(),
            last_tone: BTreeMap::new(),
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn metrics(&self) -> &[SessionMetrics] {
        &self.metrics
    }

    pub fn events(&self) -> &[AffectEvent] {
        &self.events
    }

    /// Assistance for the next (or current) exercise session.
    pub fn assist(&self) -> &AssistConfig {
        &self.assist
    }

    pub fn config(&self) -> &CoachConfig {
        &self.cfg
    }

    fn next_tone(&mut self, cause: Cause) -> Tone {
        let tone = self
            .last_tone
            .get(&cause)
            .map(|t| t.other())
            .unwrap_or(Tone::Warmth);
        self.last_tone.insert(cause, tone);
        tone
    }

    fn single(&mut self, cause: Cause, vars: &[(&str, String)]) -> AgentAction {
        let tone = self.next_tone(cause);
        let tpl = self.bank.pick(cause, tone, &mut self.rng);
        AgentAction {
            utterance: bank::fill(&tpl.text, vars),
            gesture: tpl.gesture,
            expression: tpl.expression,
            cause,
        }
    }

    fn protocol(&self, what: &str) -> Error {
        Error::Protocol(format!("{what} is not valid in phase {:?}", self.phase))
    }

    /// Applies one input. On error the state is unchanged.
    pub fn advance(&mut self, ts_ms: u64, input: &CoachInput) -> Result<Vec<AgentAction>> {
        if ts_ms < self.now_ms {
            return Err(Error::Protocol(format!(
                "input at {ts_ms} ms precedes coach time {} ms",
                self.now_ms
            )));
        }
        // validate before touching any state
        match (input, self.phase) {
            (CoachInput::Tick | CoachInput::Event(_), _) => {}
            (CoachInput::Start, Phase::Idle) => {}
            (CoachInput::Start, _) => return Err(self.protocol("start")),
            (
                CoachInput::Ack,
                Phase::Instruction
                | Phase::BreakSuggested(_)
                | Phase::InterSessionSummary(_)
                | Phase::FinalSummary,
            ) => {}
            (CoachInput::Ack, _) => return Err(self.protocol("ack")),
            (CoachInput::Metrics(m), Phase::ExerciseRunning(i)) if m.session == i => {}
            (CoachInput::Metrics(m), _) => {
                return Err(self.protocol(&format!("metrics for session {}", m.session)))
            }
        }
        self.now_ms = ts_ms;
        let mut out = Vec::new();
        match input {
            CoachInput::Tick => {
                if self.phase == Phase::Calibration
                    && ts_ms - self.calibration_start_ms >= self.cfg.baseline_ms
                {
                    self.phase = Phase::Instruction;
                    let vars = [
                        ("sessions", self.cfg.sessions.to_string()),
                        ("exercise", exercise_name(self.cfg.exercise).to_string()),
                    ];
                    out.push(self.single(Cause::Instruction, &vars));
                }
            }
            CoachInput::Start => {
                self.phase = Phase::Calibration;
                self.calibration_start_ms = ts_ms;
                out.push(self.single(Cause::Greeting, &[]));
            }
            CoachInput::Ack => {
                self.phase = match self.phase {
                    Phase::Instruction => Phase::ExerciseRunning(1),
                    Phase::BreakSuggested(i) => Phase::ExerciseRunning(i),
                    Phase::InterSessionSummary(i) if i < self.cfg.sessions => {
                        Phase::ExerciseRunning(i + 1)
                    }
                    Phase::InterSessionSummary(_) => {
                        out.push(summary_action(
                            &self.metrics,
                            &self.bank,
                            &mut self.rng,
                            Cause::FinalSummary,
                            Tone::Competence,
                        ));
                        Phase::FinalSummary
                    }
                    Phase::FinalSummary => Phase::Done,
                    _ => unreachable!("ack legality checked above"),
                };
            }
            CoachInput::Event(ev) => {
                self.events.push(*ev);
                if let Phase::ExerciseRunning(i) = self.phase {
                    if self.cfg.in_session_interventions {
                        let cause = Cause::of_event(ev.kind);
                        out.push(self.single(cause, &[]));
                        if ev.kind == AffectKind::Stress {
                            self.phase = Phase::BreakSuggested(i);
                        }
                    }
                }
            }
            CoachInput::Metrics(m) => {
                let i = m.session;
                self.metrics.push(*m);
                self.phase = Phase::InterSessionSummary(i);
                let tone = self.next_tone(Cause::SessionSummary);
                out.push(summary_action(
                    &self.metrics,
                    &self.bank,
                    &mut self.rng,
                    Cause::SessionSummary,
                    tone,
                ));
                if i < self.cfg.sessions {
                    let tone = self
                        .last_tone
                        .get(&Cause::DifficultyChange)
                        .map(|t| t.other())
                        .unwrap_or(Tone::Warmth);
                    let (next, action) = adapt_difficulty(
                        &self.metrics,
                        &self.assist,
                        &self.cfg.difficulty,
                        &self.bank,
                        &mut self.rng,
                        tone,
                    );
                    if let Some(a) = action {
                        self.last_tone.insert(Cause::DifficultyChange, tone);
                        self.assist = next;
                        out.push(a);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assist::AssistLevel;

    fn m(session: u32, pdi: f64) -> SessionMetrics {
        SessionMetrics {
            session,
            mean_deviation_m: 0.01,
            max_deviation_m: 0.02,
            distance_m: 0.7,
            elapsed_s: 240.0,
            pdi,
        }
    }

    fn ev(kind: AffectKind, t: u64) -> CoachInput {
        CoachInput::Event(AffectEvent {
            kind,
            onset_ms: t,
            evidence: 0.75,
        })
    }

    fn coach() -> Coach {
        Coach::new(
            CoachConfig::from_plan(&SessionPlan::default(), 7),
            UtteranceBank::default(),
        )
        .unwrap()
    }

    fn run_to_session(c: &mut Coach, n: u32) -> u64 {
        c.advance(0, &CoachInput::Start).unwrap();
        c.advance(300_000, &CoachInput::Tick).unwrap();
        c.advance(301_000, &CoachInput::Ack).unwrap();
        let mut t = 301_000;
        for i in 1..n {
            t += 240_000;
            c.advance(t, &CoachInput::Metrics(m(i, 0.5))).unwrap();
            t += 1000;
            c.advance(t, &CoachInput::Ack).unwrap();
        }
        t
    }

    #[test]
    fn protocol_walk() {
        let mut c = coach();
        let a = c.advance(0, &CoachInput::Start).unwrap();
        assert_eq!(a[0].cause, Cause::Greeting);
        assert_eq!(c.phase(), Phase::Calibration);
        assert!(c.advance(299_999, &CoachInput::Tick).unwrap().is_empty());
        let a = c.advance(300_000, &CoachInput::Tick).unwrap();
        assert_eq!(a[0].cause, Cause::Instruction);
        assert!(a[0].utterance.contains("circle"));
        assert_eq!(c.phase(), Phase::Instruction);
        c.advance(301_000, &CoachInput::Ack).unwrap();
        assert_eq!(c.phase(), Phase::ExerciseRunning(1));
        let mut t = 301_000;
        for i in 1..=3 {
            t += 240_000;
            let a = c.advance(t, &CoachInput::Metrics(m(i, 0.5))).unwrap();
            assert_eq!(a[0].cause, Cause::SessionSummary);
            assert_eq!(c.phase(), Phase::InterSessionSummary(i));
            t += 1000;
            let a = c.advance(t, &CoachInput::Ack).unwrap();
            if i < 3 {
                assert!(a.is_empty());
                assert_eq!(c.phase(), Phase::ExerciseRunning(i + 1));
            } else {
                assert_eq!(a[0].cause, Cause::FinalSummary);
                assert_eq!(c.phase(), Phase::FinalSummary);
            }
        }
        c.advance(t + 1, &CoachInput::Ack).unwrap();
        assert_eq!(c.phase(), Phase::Done);
    }

    #[test]
    fn stress_suggests_break() {
        let mut c = coach();
        let t = run_to_session(&mut c, 2);
        let a = c
            .advance(t + 60_000, &ev(AffectKind::Stress, t + 60_000))
            .unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].cause, Cause::Stress);
        assert!(a[0].utterance.contains("break"));
        assert_eq!(c.phase(), Phase::BreakSuggested(2));
        // metrics cannot arrive while the clock is paused
        assert!(c
            .advance(t + 61_000, &CoachInput::Metrics(m(2, 0.4)))
            .is_err());
        c.advance(t + 150_000, &CoachInput::Ack).unwrap();
        assert_eq!(c.phase(), Phase::ExerciseRunning(2));
    }

    #[test]
    fn events_gated_outside_exercise() {
        let mut c = coach();
        c.advance(0, &CoachInput::Start).unwrap();
        assert!(c
            .advance(1000, &ev(AffectKind::Distraction, 1000))
            .unwrap()
            .is_empty());
        assert_eq!(c.phase(), Phase::Calibration);
        assert_eq!(c.events().len(), 1);
    }

    #[test]
    fn illegal_inputs_leave_state() {
        let mut c = coach();
        assert!(matches!(
            c.advance(0, &CoachInput::Ack),
            Err(Error::Protocol(_))
        ));
        c.advance(10, &CoachInput::Start).unwrap();
        assert!(c.advance(20, &CoachInput::Start).is_err());
        assert!(c.advance(5, &CoachInput::Tick).is_err());
        assert!(c.advance(30, &CoachInput::Metrics(m(1, 0.1))).is_err());
        assert_eq!(c.phase(), Phase::Calibration);
    }

    #[test]
    fn distraction_and_pain_keep_running() {
        let mut c = coach();
        let t = run_to_session(&mut c, 1);
        for (k, kind) in [AffectKind::Distraction, AffectKind::Pain]
            .into_iter()
            .enumerate()
        {
            let ts = t + 1000 * (k as u64 + 1);
            let a = c.advance(ts, &ev(kind, ts)).unwrap();
            assert_eq!(a.len(), 1);
            assert_eq!(a[0].cause, Cause::of_event(kind));
            assert_eq!(c.phase(), Phase::ExerciseRunning(1));
        }
    }

    #[test]
    fn interventions_can_be_disabled() {
        let mut cfg = CoachConfig::from_plan(&SessionPlan::default(), 7);
        cfg.in_session_interventions = false;
        let mut c = Coach::new(cfg, UtteranceBank::default()).unwrap();
        let t = run_to_session(&mut c, 1);
        assert!(c
            .advance(t + 5, &ev(AffectKind::Stress, t + 5))
            .unwrap()
            .is_empty());
        assert_eq!(c.phase(), Phase::ExerciseRunning(1));
    }

    #[test]
    fn tones_alternate_per_cause() {
        let mut c = coach();
        let t = run_to_session(&mut c, 1);
        let bank = UtteranceBank::default();
        let tone_of = |a: &AgentAction| {
            bank.templates[&a.cause]
                .iter()
                .find(|tpl| tpl.text == a.utterance)
                .map(|tpl| tpl.tone)
                .unwrap()
        };
        let mut last = None;
        for k in 0..100u64 {
            let a = c
                .advance(t + k, &ev(AffectKind::Distraction, t + k))
                .unwrap();
            let tone = tone_of(&a[0]);
            assert_ne!(Some(tone), last);
            last = Some(tone);
        }
    }

    #[test]
    fn summary_names_best_session() {
        let bank = UtteranceBank::default();
        let ms = [m(1, 0.8), m(2, 0.5), m(3, 0.3)];
        let a = summarize(&ms, &bank, 11);
        assert!(a.utterance.contains("session 3"));
        assert!(a.utterance.contains("0.80, 0.50, 0.30"));
        let warm = bank.of(Cause::FinalSummary, Tone::Warmth);
        let comp = bank.of(Cause::FinalSummary, Tone::Competence);
        assert!(warm.iter().any(|t| a.utterance.contains(&t.text)));
        assert!(comp.iter().any(|t| a.utterance.contains(&bank::fill(
            &t.text,
            &[("pdi_list", "0.80, 0.50, 0.30".into())]
        ))));
        assert_eq!(a, summarize(&ms, &bank, 11));
    }

    #[test]
    fn single_session_summary() {
        let a = summarize(&[m(1, 0.4)], &UtteranceBank::default(), 3);
        assert!(a.utterance.contains("0.40"));
        assert!(!a.utterance.contains("best was"));
    }

    #[test]
    fn difficulty_rules() {
        let bank = UtteranceBank::default();
        let rule = DifficultyRule::default();
        let med = AssistConfig::for_level(AssistLevel::Medium);
        let mut rng = Lcg::new(1);
        let (next, a) = adapt_difficulty(&[m(1, 1.5)], &med, &rule, &bank, &mut rng, Tone::Warmth);
        assert_eq!(next.level, AssistLevel::High);
        assert_eq!(a.unwrap().cause, Cause::DifficultyChange);
        let (next, a) =
            adapt_difficulty(&[m(1, 0.1)], &med, &rule, &bank, &mut rng, Tone::Competence);
        assert_eq!(next.level, AssistLevel::Low);
        assert!(a
            .unwrap()
            .utterance
            .contains("render the task more challenging"));
        let (next, a) = adapt_difficulty(&[m(1, 0.5)], &med, &rule, &bank, &mut rng, Tone::Warmth);
        assert_eq!((next, a), (med, None));
        let off = AssistConfig::for_level(AssistLevel::Off);
        assert_eq!(
            adapt_difficulty(&[m(1, 0.1)], &off, &rule, &bank, &mut rng, Tone::Warmth).1,
            None
        );
    }

    #[test]
    fn default_plan_is_about_fifteen_minutes() {
        let min = SessionPlan::default().scheduled_activity_s() / 60.0;
        assert!((13.0..=17.0).contains(&min), "{min}");
    }
}
