//! Regenerates the shipped stress model and the test fixtures.
//!
//! ```text
//! cargo run --release -p rehab-core --example make_fixtures
//! ```
//!
//! Every output is deterministic in the seeds below, so rerunning this
//! leaves the tree unchanged unless the generators themselves changed.

use std::fs;
use std::path::{Path, PathBuf};

use rehab_core::assist::HandleState;
use rehab_core::coach::script::{parse_script, run_inputs};
use rehab_core::coach::{AgentAction, Coach, CoachConfig, SessionPlan, UtteranceBank};
use rehab_core::hrv::rr::write_peak_csv;
use rehab_core::hrv::TrainParams;
use rehab_core::session::SessionCore;
use rehab_core::sim::subjects::{synthetic_cohort, train_on, SubjectProtocol};
use rehab_core::sim::{ecg_generate, simulate_to_file, PatientProfile};
use rehab_core::trajectory::TrajectorySpec;
use rehab_core::wire::log::LogWriter;
use rehab_core::wire::{self, AppConfig, Payload, SessionCtrl, WireMessage};
use rehab_core::{Result, Vec2};

/// Training cohort; the LOSO check draws its subjects from other seeds.
const MODEL_COHORT_SEED: u64 = 20_240_611;
pub const COACH_SEED: u64 = 42;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixtures(sub: &str) -> PathBuf {
    let p = root().join("tests/fixtures").join(sub);
    fs::create_dir_all(&p).expect("create fixture dir");
    p
}

fn model() -> Result<()> {
    let cohort = synthetic_cohort(10, &SubjectProtocol::default(), MODEL_COHORT_SEED)?;
    let refs: Vec<_> = cohort.iter().collect();
    let m = train_on(&refs, &TrainParams::default())?;
    m.save(&root().join("assets/stress_svm.json"))?;
    println!("model: {} support vectors", m.support_vectors.len());
    Ok(())
}

fn short_config(i: usize) -> AppConfig {
    let mut cfg = AppConfig::default();
    let (exercise, per_s) = match i % 3 {
        0 => (TrajectorySpec::circle(0.06 + 0.01 * (i % 4) as f64), 2.5),
        1 => (
            TrajectorySpec::line(Vec2::new(-0.1, 0.0), Vec2::new(0.1, 0.05)),
            2.0,
        ),
        _ => (TrajectorySpec::lemniscate(0.08), 3.0),
    };
    cfg.plan = SessionPlan {
        exercise,
        sessions: 1 + (i % 2) as u32,
        per_session_duration_s: per_s,
        baseline_duration_s: 1.0,
        instruction_s: 0.5,
        summary_s: 0.5,
        ..SessionPlan::default()
    };
    cfg.stress.window_s = 1.0;
    cfg.stress.hop_s = 1.0;
    cfg.sim.stress_pipeline = false;
    cfg.patient.skill_sigma = [0.0, 0.005, 0.01, 0.02, 0.03][i % 5];
    cfg
}

fn scoring_logs() -> Result<()> {
    let dir = fixtures("scoring");
    for i in 0..20 {
        let cfg = short_config(i);
        let r = simulate_to_file(
            &cfg,
            1000 + i as u64,
            &dir.join(format!("log_{i:02}.ndjson")),
        )?;
        let pdis: Vec<String> = r.metrics.iter().map(|m| format!("{:.3}", m.pdi)).collect();
        println!("scoring log {i:02}: pdi {}", pdis.join(" "));
    }
    perfect_log(&dir.join("perfect.ndjson"))
}

/// A trace that stays on the out-and-back line at every sample. The grid is
/// dyadic so path length, travelled distance and deviation are all exact.
fn perfect_log(path: &Path) -> Result<()> {
    let half = 0.125;
    let step = 1.0 / 1024.0;
    let mut cfg = AppConfig::default();
    cfg.plan = SessionPlan {
        exercise: TrajectorySpec::line(Vec2::new(-half, 0.0), Vec2::new(half, 0.0)),
        sessions: 1,
        per_session_duration_s: 10.0,
        baseline_duration_s: 1.0,
        instruction_s: 0.5,
        summary_s: 0.5,
        ..SessionPlan::default()
    };
    let mut core = SessionCore::new(cfg.setup(), cfg.thresholds, cfg.gaze)?;
    let mut w = LogWriter::new(std::io::BufWriter::new(
        fs::File::create(path).expect("create log"),
    ));
    let mut flush = |core: &mut SessionCore| -> Result<()> {
        for m in core.drain() {
            w.append(&m)?;
        }
        Ok(())
    };
    core.begin(0)?;
    core.heartbeat(1000)?;
    core.ctrl(1500, SessionCtrl::Ack)?;
    flush(&mut core)?;

    let n = (2.0 * half / step) as usize;
    let mut xs: Vec<f64> = (0..=n).map(|k| -half + k as f64 * step).collect();
    xs.extend((0..n).rev().map(|k| -half + k as f64 * step));
    let mut ts = 1500;
    for (k, x) in xs.iter().enumerate() {
        ts += 10;
        let state = HandleState {
            position: Vec2::new(*x, 0.0),
            velocity: Vec2::ZERO,
            t_ms: k as f64 * 10.0,
        };
        core.handle(ts, state)?;
        flush(&mut core)?;
        if !core.completed().is_empty() {
            break;
        }
    }
    let m = core
        .completed()
        .first()
        .copied()
        .expect("perfect trace completes");
    println!(
        "perfect log: pdi {} distance {} after {} samples",
        m.pdi,
        m.distance_m,
        (ts - 1500) / 10
    );
    core.ctrl(ts + 500, SessionCtrl::Ack)?;
    core.ctrl(ts + 1000, SessionCtrl::Ack)?;
    flush(&mut core)?;
    w.flush()
}

fn rr_csvs() -> Result<()> {
    let dir = fixtures("hrv");
    let write = |name: &str, peaks: &[f64]| -> Result<()> {
        write_peak_csv(fs::File::create(dir.join(name)).expect("create csv"), peaks)
    };
    let constant: Vec<f64> = (0..600).map(|k| 1000.0 + 800.0 * k as f64).collect();
    write("constant_800.csv", &constant)?;
    let mut t = 1000.0;
    let mut alternating = vec![t];
    for k in 0..600 {
        t += if k % 2 == 0 { 790.0 } else { 810.0 };
        alternating.push(t);
    }
    write("alternating_790_810.csv", &alternating)?;
    // ten quiet minutes: a five-minute baseline and five minutes to classify
    let (_, peaks) = ecg_generate(&PatientProfile::default(), 600.0, false, 250.0, 7)?;
    write("resting_600s.csv", &peaks)
}

pub fn coach_config() -> CoachConfig {
    CoachConfig::from_plan(&SessionPlan::default(), COACH_SEED)
}

fn transcript(actions: &[(u64, AgentAction)]) -> Result<String> {
    let mut out = String::new();
    for (ts, a) in actions {
        out.push_str(&wire::encode(&WireMessage::new(
            *ts,
            Payload::AgentAction(a.clone()),
        ))?);
    }
    Ok(out)
}

fn coach_goldens() -> Result<()> {
    let dir = fixtures("coach");
    for name in ["clean_run", "stress_session_2", "chronic_distraction"] {
        let script = fs::read_to_string(dir.join(format!("{name}.script"))).expect("read script");
        let mut coach = Coach::new(coach_config(), UtteranceBank::default())?;
        let actions = run_inputs(&mut coach, &parse_script(&script)?)?;
        fs::write(
            dir.join(format!("{name}.expected.ndjson")),
            transcript(&actions)?,
        )
        .expect("write golden");
        println!(
            "coach {name}: {} actions, final phase {:?}",
            actions.len(),
            coach.phase()
        );
    }
    Ok(())
}

fn wire_goldens() -> Result<()> {
    let dir = fixtures("wire");
    let text = fs::read_to_string(dir.join("golden.ndjson")).expect("read wire goldens");
    for line in text.lines() {
        let m = wire::decode_str(line)?;
        assert_eq!(
            wire::encode(&m)?,
            format!("{line}\n"),
            "golden line is not canonical"
        );
    }
    println!("wire goldens: {} lines canonical", text.lines().count());
    Ok(())
}

fn main() -> Result<()> {
    model()?;
    scoring_logs()?;
    rr_csvs()?;
    coach_goldens()?;
    wire_goldens()
}
