//! Headless closed loop: synthetic patient, handle dynamics, stress
//! pipeline and coach, all advanced on one simulated clock.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affect::AffectKind;
use crate::assist::{step_dynamics, HandleState};
use crate::coach::Phase;
use crate::error::{Error, Result};
use crate::hrv::{EcgWindowBuffer, StressMonitor, WindowOutcome};
use crate::scoring::SessionMetrics;
use crate::session::SessionCore;
use crate::sim::patient::{EcgGenerator, GazeGenerator, PatientMotion};
use crate::wire::{AppConfig, Payload, SessionCtrl, WireMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    /// Sessions during which the patient is stressed. Stress sets in when
    /// the preceding summary (or the instruction) begins and lifts for good
    /// once a break starts, or when the session ends.
    pub stressed_sessions: Vec<u32>,
    /// How long the patient rests before acknowledging a break.
    pub break_s: f64,
    pub ecg_hz: f64,
    pub frame_hz: f64,
    /// Run the ECG/HRV/SVM stage (costly; off for motion-only studies).
    pub stress_pipeline: bool,
    pub max_duration_s: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            stressed_sessions: vec![2],
            break_s: 90.0,
            ecg_hz: 250.0,
            frame_hz: 10.0,
            stress_pipeline: true,
            max_duration_s: 7200.0,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.break_s > 0.0 && self.ecg_hz >= 100.0 && self.max_duration_s > 0.0) {
            return Err(Error::Spec(
                "sim needs break_s > 0, ecg_hz >= 100, max_duration_s > 0".into(),
            ));
        }
        if !(self.frame_hz > 0.0 && (1000.0 / self.frame_hz).fract() == 0.0) {
            return Err(Error::Spec("frame_hz must divide 1000 ms evenly".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub metrics: Vec<SessionMetrics>,
    pub actions: Vec<WireMessage>,
    pub stress_events: usize,
    pub distraction_events: usize,
    /// `(window end ms, stressed verdict, ground truth at window end)`.
    pub verdicts: Vec<(u64, bool, bool)>,
    pub records: usize,
    pub final_phase: Phase,
    pub end_ms: u64,
}

fn stress_truth(opts: &SimOptions, phase: Phase, sessions: u32, rested: &[u32]) -> bool {
    let upcoming = match phase {
        Phase::Instruction => Some(1),
        Phase::InterSessionSummary(i) if i < sessions => Some(i + 1),
        Phase::ExerciseRunning(i) => Some(i),
        _ => None,
    };
    upcoming.is_some_and(|i| opts.stressed_sessions.contains(&i) && !rested.contains(&i))
}

/// Runs a whole visit. Every record goes to `sink` in log order.
pub fn simulate(
    cfg: &AppConfig,
    seed: u64,
    mut sink: impl FnMut(&WireMessage) -> Result<()>,
) -> Result<SimReport> {
    cfg.validate()?;
    let opts = &cfg.sim;
    let dt = cfg.dynamics.dt_s;
    let tick_ms = dt * 1000.0;
    if tick_ms.fract() != 0.0 {
        return Err(Error::Spec(
            "simulation needs dt_s to be a whole number of milliseconds".into(),
        ));
    }
    let tick_ms = tick_ms as u64;
    let frame_ms = (1000.0 / opts.frame_hz) as u64;
    if !frame_ms.is_multiple_of(tick_ms) {
        return Err(Error::Spec(
            "frame period must be a multiple of the control tick".into(),
        ));
    }

    let mut setup = cfg.setup();
    setup.seed = seed;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut motion = PatientMotion::new(cfg.patient, master.random());
    let mut gaze = GazeGenerator::new(&cfg.patient, master.random());
    let mut ecg = EcgGenerator::new(cfg.patient, opts.ecg_hz, master.random());
    ecg.discard_peaks();

    let mut core = SessionCore::new(setup, cfg.thresholds, cfg.gaze)?;
    let traj = core.trajectory().clone();
    let target_s = traj.spec().target_duration_s;
    let sessions = core.setup().plan.sessions;
    let plan = core.setup().plan.clone();

    let mut monitor = if opts.stress_pipeline {
        Some(StressMonitor::new(
            cfg.stress_config(),
            cfg.load_model()?,
            0.0,
        )?)
    } else {
        None
    };
    let keep_s = cfg.stress.window_s + cfg.stress.hop_s + 5.0;
    let mut ecg_buf = EcgWindowBuffer::new(opts.ecg_hz, keep_s);

    let mut report = SimReport {
        metrics: Vec::new(),
        actions: Vec::new(),
        stress_events: 0,
        distraction_events: 0,
        verdicts: Vec::new(),
        records: 0,
        final_phase: Phase::Idle,
        end_ms: 0,
    };
    let mut flush = |core: &mut SessionCore, report: &mut SimReport| -> Result<()> {
        for m in core.drain() {
            match &m.payload {
                Payload::AgentAction(_) => report.actions.push(m.clone()),
                Payload::Metrics(x) => report.metrics.push(*x),
                Payload::Event(e) if e.kind == AffectKind::Stress => report.stress_events += 1,
                Payload::Event(e) if e.kind == AffectKind::Distraction => {
                    report.distraction_events += 1
                }
                _ => {}
            }
            report.records += 1;
            sink(&m)?;
        }
        Ok(())
    };

    core.begin(0)?;
    flush(&mut core, &mut report)?;

    let mut phase = core.phase();
    let mut phase_since = 0u64;
    let mut handle = HandleState::at_rest(traj.eval(0.0).position);
    let mut motion_session = 0u32;
    let mut rested: Vec<u32> = Vec::new();
    let max_ms = (opts.max_duration_s * 1000.0) as u64;
    let mut ts = 0u64;

    while core.phase() != Phase::Done {
        ts += tick_ms;
        if ts > max_ms {
            return Err(Error::Input(format!(
                "simulation did not finish within {} s",
                opts.max_duration_s
            )));
        }
        if let Phase::BreakSuggested(i) = core.phase() {
            if !rested.contains(&i) {
                rested.push(i);
            }
        }
        let truth = stress_truth(opts, core.phase(), sessions, &rested);
        ecg.set_stressed(truth);

        if ts.is_multiple_of(frame_ms) {
            core.frame(gaze.frame(ts))?;
            if monitor.is_some() {
                ecg_buf.extend(ecg.generate_until(ts as f64));
            }
        }
        if let Some(mon) = &mut monitor {
            while let Some((s, e)) = mon.due(ts as f64) {
                let beats = ecg_buf.beats_in(s, e)?;
                match mon.process_window(&beats)?.outcome {
                    WindowOutcome::Verdict { stressed, .. } => {
                        report.verdicts.push((ts, stressed, truth));
                        core.stress_verdict(ts, stressed)?;
                    }
                    WindowOutcome::Skipped(msg) => log::debug!("stress window skipped: {msg}"),
                    _ => {}
                }
            }
        }

        let wait_s = match phase {
            Phase::Instruction => Some(plan.instruction_s),
            Phase::InterSessionSummary(_) | Phase::FinalSummary => Some(plan.summary_s),
            Phase::BreakSuggested(_) => Some(opts.break_s),
            _ => None,
        };
        if let Some(w) = wait_s {
            if (ts - phase_since) as f64 >= w * 1000.0 {
                core.ctrl(ts, SessionCtrl::Ack)?;
            }
        }

        if let Some(i) = core.active_session() {
            if i != motion_session {
                motion_session = i;
                motion.start_session(i);
                handle = HandleState::at_rest(traj.eval(0.0).position);
            }
            let t_s = handle.t_ms / 1000.0;
            let pace = traj.eval(t_s / target_s).position;
            if let Some(cmd) = core.handle(ts, handle)? {
                let user = motion.step(pace, &handle, t_s, dt);
                handle = step_dynamics(&handle, user, cmd.force, &cfg.dynamics)?;
            }
        }

        flush(&mut core, &mut report)?;
        if core.phase() != phase {
            phase = core.phase();
            phase_since = ts;
        }
    }
    report.final_phase = core.phase();
    report.end_ms = ts;
    Ok(report)
}

/// Simulates into a log file.
pub fn simulate_to_file(cfg: &AppConfig, seed: u64, path: &std::path::Path) -> Result<SimReport> {
    let f =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = crate::wire::log::LogWriter::new(std::io::BufWriter::new(f));
    let report = simulate(cfg, seed, |m| w.append(m))?;
    w.flush()?;
    Ok(report)
}
