//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs without the test harness so the lines always print.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rehab_core::affect::{AffectEvent, AffectFrame, AffectKind, Gaze};
use rehab_core::assist::{
    compute_force, step_dynamics, AssistConfig, AssistLevel, ForceCommand, HandleDynamicsConfig,
    HandleState, REFERENCE_WINDOW,
};
use rehab_core::coach::script::{parse_script, run_inputs};
use rehab_core::coach::{
    AgentAction, Cause, Coach, CoachConfig, DifficultyRule, Expression, Gesture, SessionPlan,
    UtteranceBank,
};
use rehab_core::hrv::features::resample_tachogram;
use rehab_core::hrv::rpeak::detect_peak_times;
use rehab_core::hrv::{compute_features, svm_train, Beat, SvmModel, TrainParams, N_FEATURES};
use rehab_core::scoring::{ScoringConfig, SessionMetrics};
use rehab_core::session::{logged_metrics, rescore_log};
use rehab_core::sim::subjects::{loso_accuracy, synthetic_cohort, SubjectProtocol};
use rehab_core::sim::{simulate, EcgGenerator, PatientProfile};
use rehab_core::trajectory::{PathPoint, TrajectoryKind, TrajectorySpec};
use rehab_core::wire::log::read_log_file;
use rehab_core::wire::{
    decode, encode, AppConfig, Payload, SessionCtrl, SessionSetup, WireMessage,
};
use rehab_core::Vec2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

// ---------------------------------------------------------------- trend

fn trend() -> Outcome {
    let t0 = Instant::now();
    let cfg = AppConfig::default();
    let seeds: Vec<u64> = (1..=100).collect();
    let workers = std::thread::available_parallelism()
        .map_or(4, |n| n.get())
        .min(16);
    let results: Vec<Option<Vec<f64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(seeds.len().div_ceil(workers))
            .map(|chunk| {
                let cfg = &cfg;
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|&seed| {
                            simulate(cfg, seed, |_| Ok(()))
                                .ok()
                                .map(|r| r.metrics.iter().map(|m| m.pdi).collect::<Vec<f64>>())
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sim worker"))
            .collect()
    });
    let elapsed = t0.elapsed();
    let decreasing = results
        .iter()
        .filter(|r| matches!(r.as_deref(), Some([a, b, c]) if a > b && b > c))
        .count();
    let failed = results.iter().filter(|r| r.is_none()).count();
    outcome(
        decreasing >= 95 && elapsed < Duration::from_secs(120),
        format!(
            "{decreasing}/100 runs strictly decreasing (need >= 95), {failed} errors, {} (limit 120 s)",
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------- controller

fn controller() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = [0.0f64; 4];
    let mut bad = [0usize; 4];
    for _ in 0..100_000 {
        let level =
            [AssistLevel::Low, AssistLevel::Medium, AssistLevel::High][rng.random_range(0..3)];
        let cfg = AssistConfig {
            force_cap_n: rng.random_range(1.0..40.0),
            ..AssistConfig::for_level(level)
        };
        let reference = PathPoint {
            s: rng.random(),
            position: Vec2::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)),
            tangent: Vec2::new(1.0, 0.0),
        };
        let dir = rng.random_range(0.0..TAU);
        let e = rng.random_range(0.0..0.08);
        let pos = reference.position - Vec2::new(dir.cos(), dir.sin()) * e;
        let state = HandleState {
            position: pos,
            velocity: Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            t_ms: 0.0,
        };
        let ForceCommand { force, error_m, .. } = compute_force(&state, &reference, &cfg);
        let offset = reference.position - pos;
        let d = cfg.deadband_m;
        // deadband: exactly zero
        if error_m <= d && force != Vec2::ZERO {
            bad[0] += 1;
        }
        // cap
        let over = force.norm() - cfg.force_cap_n;
        worst[1] = worst[1].max(over);
        if over > 1e-9 {
            bad[1] += 1;
        }
        // direction: parallel to the offset, pointing at the reference
        if force != Vec2::ZERO {
            let cross =
                (force.x * offset.y - force.y * offset.x).abs() / (force.norm() * offset.norm());
            worst[2] = worst[2].max(cross);
            if cross > 1e-9 || force.dot(offset) <= 0.0 {
                bad[2] += 1;
            }
        }
        // continuity at the threshold: just past d the force tends to zero
        let edge = reference.position - Vec2::new(dir.cos(), dir.sin()) * (d * (1.0 + 1e-12));
        let f_edge = compute_force(
            &HandleState {
                position: edge,
                ..state
            },
            &reference,
            &cfg,
        )
        .force
        .norm();
        worst[3] = worst[3].max(f_edge);
        if f_edge > 1e-9 {
            bad[3] += 1;
        }
    }
    outcome(
        bad.iter().all(|&b| b == 0),
        format!(
            "1e5 states: deadband violations {}, cap excess max {:.1e} ({} bad), direction error max {:.1e} ({} bad), edge force max {:.1e} ({} bad)",
            bad[0], worst[1], bad[1], worst[2], bad[2], worst[3], bad[3]
        ),
    )
}

// ---------------------------------------------------------------- convergence

fn convergence() -> Outcome {
    let traj = TrajectorySpec::circle(0.08).build().expect("circle");
    let cfg = AssistConfig::for_level(AssistLevel::Medium);
    let dynamics = HandleDynamicsConfig::default();
    let mut state = HandleState::at_rest(Vec2::new(0.13, 0.0));
    let mut reference = traj.project(state.position).0;
    let start_err = compute_force(&state, &reference, &cfg).error_m;
    let mut reached = None;
    let mut final_err = f64::NAN;
    for tick in 1..=500 {
        reference = traj
            .project_forward(reference.s, REFERENCE_WINDOW, state.position)
            .0;
        let cmd = compute_force(&state, &reference, &cfg);
        state = step_dynamics(&state, Vec2::ZERO, cmd.force, &dynamics).expect("step");
        let err = traj
            .project_forward(reference.s, REFERENCE_WINDOW, state.position)
            .0
            .position
            .dist(state.position);
        if reached.is_none() && err <= cfg.deadband_m {
            reached = Some(tick as f64 * dynamics.dt_s);
        }
        final_err = err;
    }
    let pass = reached.is_some_and(|t| t <= 5.0) && final_err <= cfg.deadband_m;
    outcome(
        pass,
        format!(
            "start {start_err:.3} m off, within d={} m after {}, error at 5 s {final_err:.4} m",
            cfg.deadband_m,
            reached.map_or("never".to_string(), |t| format!("{t:.2} s"))
        ),
    )
}

// ---------------------------------------------------------------- scoring oracle

/// Path formulas written out again, independent of the library.
struct OraclePath {
    kind: TrajectoryKind,
    c: Vec2,
    size: f64,
    ends: [Vec2; 2],
}

impl OraclePath {
    fn new(spec: &TrajectorySpec) -> Self {
        OraclePath {
            kind: spec.kind,
            c: spec.center,
            size: spec.size,
            ends: spec.endpoints.unwrap_or([Vec2::ZERO; 2]),
        }
    }

    fn at(&self, s: f64) -> (f64, f64) {
        let th = TAU * s;
        match self.kind {
            TrajectoryKind::Circle => (
                self.c.x + self.size * th.cos(),
                self.c.y + self.size * th.sin(),
            ),
            TrajectoryKind::Lemniscate => (
                self.c.x + self.size * th.cos(),
                self.c.y + self.size * th.sin() * th.cos(),
            ),
            TrajectoryKind::Line => {
                // out-and-back: triangle wave in [0, 1]
                let u = 1.0 - (2.0 * s - 1.0).abs();
                let [a, b] = self.ends;
                (a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u)
            }
        }
    }

    fn dist(&self, s: f64, p: (f64, f64)) -> f64 {
        let q = self.at(s);
        ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt()
    }

    /// Dense scan, then ternary refinement around the three best samples.
    fn deviation(&self, p: (f64, f64)) -> f64 {
        const N: usize = 20_000;
        let mut samples: Vec<(f64, usize)> = (0..N)
            .map(|i| (self.dist(i as f64 / N as f64, p), i))
            .collect();
        samples.select_nth_unstable_by(3, |a, b| a.0.total_cmp(&b.0));
        let mut best = f64::INFINITY;
        for &(d0, i) in &samples[..3] {
            let (mut lo, mut hi) = ((i as f64 - 1.0) / N as f64, (i as f64 + 1.0) / N as f64);
            if self.kind == TrajectoryKind::Line {
                lo = lo.max(0.0);
                hi = hi.min(1.0);
            }
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if self.dist(m1, p) <= self.dist(m2, p) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.min(d0).min(self.dist(0.5 * (lo + hi), p));
        }
        best
    }

    fn length(&self) -> f64 {
        match self.kind {
            TrajectoryKind::Circle => TAU * self.size,
            TrajectoryKind::Line => {
                let [a, b] = self.ends;
                2.0 * ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt()
            }
            TrajectoryKind::Lemniscate => {
                // composite Simpson over the full loop
                let n = 400_000;
                let h = 1.0 / n as f64;
                let speed = |s: f64| {
                    let th = TAU * s;
                    TAU * self.size * (th.sin().powi(2) + (2.0 * th).cos().powi(2)).sqrt()
                };
                let mut acc = speed(0.0) + speed(1.0);
                for k in 1..n {
                    acc += speed(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
                }
                acc * h / 3.0
            }
        }
    }
}

fn oracle_pdi(spec: &TrajectorySpec, weights: [f64; 3], samples: &[HandleState]) -> f64 {
    let path = OraclePath::new(spec);
    let errs: Vec<f64> = samples
        .iter()
        .map(|h| path.deviation((h.position.x, h.position.y)))
        .collect();
    let mut area = 0.0;
    let mut dist = 0.0;
    for k in 1..samples.len() {
        let (a, b) = (&samples[k - 1], &samples[k]);
        area += 0.5 * (errs[k - 1] + errs[k]) * (b.t_ms - a.t_ms);
        dist +=
            ((b.position.x - a.position.x).powi(2) + (b.position.y - a.position.y).powi(2)).sqrt();
    }
    let span = samples.last().unwrap().t_ms - samples[0].t_ms;
    let mean = area / span;
    weights[0] * mean / spec.tolerance_band_m
        + weights[1] * (dist / path.length() - 1.0).max(0.0)
        + weights[2] * (span / 1000.0 / spec.target_duration_s - 1.0).max(0.0)
}

fn log_setup(log: &[WireMessage]) -> SessionSetup {
    log.iter()
        .find_map(|m| match &m.payload {
            Payload::SessionCtrl(SessionCtrl::Config(s)) => Some((**s).clone()),
            _ => None,
        })
        .expect("log carries its setup")
}

/// Per session: oracle PDI, logged PDI, rescored PDI.
fn score_log(path: &Path) -> Vec<(f64, f64, f64)> {
    let log = read_log_file(path).expect("fixture log reads");
    let setup = log_setup(&log);
    let logged = logged_metrics(&log);
    let rescored = rescore_log(&log).expect("rescore");
    let mut out = Vec::new();
    let mut samples = Vec::new();
    let mut k = 0;
    for m in &log {
        match &m.payload {
            Payload::Handle(h) => samples.push(*h),
            Payload::Metrics(_) => {
                let o = oracle_pdi(&setup.plan.exercise_spec(), setup.scoring.weights, &samples);
                out.push((o, logged[k].pdi, rescored[k].pdi));
                samples.clear();
                k += 1;
            }
            _ => {}
        }
    }
    out
}

fn scoring_oracle() -> Outcome {
    let dir = fixtures().join("scoring");
    let paths: Vec<PathBuf> = (0..20)
        .map(|i| dir.join(format!("log_{i:02}.ndjson")))
        .collect();
    let results: Vec<Vec<(f64, f64, f64)>> = std::thread::scope(|s| {
        let hs: Vec<_> = paths
            .iter()
            .map(|p| s.spawn(move || score_log(p)))
            .collect();
        hs.into_iter()
            .map(|h| h.join().expect("oracle worker"))
            .collect()
    });
    let sessions: usize = results.iter().map(Vec::len).sum();
    let worst = results
        .iter()
        .flatten()
        .map(|(o, l, r)| (o - l).abs().max((o - r).abs()))
        .fold(0.0, f64::max);
    let perfect = read_log_file(&dir.join("perfect.ndjson")).expect("perfect log");
    let p_logged = logged_metrics(&perfect);
    let p_rescored = rescore_log(&perfect).expect("rescore perfect");
    let perfect_zero = p_logged.len() == 1
        && p_logged[0].pdi == 0.0
        && p_rescored.len() == 1
        && p_rescored[0].pdi == 0.0;
    outcome(
        results.len() == 20 && sessions >= 20 && worst <= 1e-9 && perfect_zero,
        format!(
            "20 logs / {sessions} sessions, max |pdi - oracle| {worst:.2e} (limit 1e-9) over logged and rescored; perfect log pdi logged {} rescored {}",
            p_logged.first().map_or(f64::NAN, |m| m.pdi),
            p_rescored.first().map_or(f64::NAN, |m| m.pdi)
        ),
    )
}

// ---------------------------------------------------------------- HRV identities

fn beats_from_rr(rr: &[f64]) -> Vec<Beat> {
    let mut t = 0.0;
    rr.iter()
        .map(|&r| {
            t += r;
            Beat { t_ms: t, rr_ms: r }
        })
        .collect()
}

fn hrv_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_sd1 = 0.0f64;
    let mut errors = 0;
    for _ in 0..1000 {
        let n = rng.random_range(40..150);
        let base = rng.random_range(600.0..1100.0);
        let spread = rng.random_range(1.0..80.0);
        let rr: Vec<f64> = (0..n)
            .map(|_| base + rng.random_range(-spread..spread))
            .collect();
        match compute_features(&beats_from_rr(&rr)) {
            Ok(f) => worst_sd1 = worst_sd1.max((f.sd1 - f.rmssd / 2f64.sqrt()).abs()),
            Err(_) => errors += 1,
        }
    }
    let c = compute_features(&beats_from_rr(&[800.0; 80])).expect("constant window");
    let dispersion = [
        c.sdnn,
        c.rmssd,
        c.sdsd,
        c.nn50,
        c.pnn50,
        c.nn20,
        c.pnn20,
        c.sd1,
        c.sd2,
        c.ellipse_area,
    ];
    let constant_zero = dispersion.iter().all(|&x| x == 0.0);
    let alt: Vec<f64> = (0..80)
        .map(|k| if k % 2 == 0 { 790.0 } else { 810.0 })
        .collect();
    let a = compute_features(&beats_from_rr(&alt)).expect("alternating window");
    let alt_exact = a.rmssd == 20.0 && a.sdnn == 10.0;
    outcome(
        worst_sd1 <= 1e-6 && errors == 0 && constant_zero && alt_exact,
        format!(
            "1000 windows: max |sd1 - rmssd/sqrt2| {worst_sd1:.1e} ms ({errors} errors); constant window dispersion {dispersion:?}; alternating rmssd {} sdnn {}",
            a.rmssd, a.sdnn
        ),
    )
}

// ---------------------------------------------------------------- spectral

fn tone_beats(freq_hz: f64, duration_s: f64) -> Vec<Beat> {
    let rr_at = |t_ms: f64| 800.0 + 50.0 * (TAU * freq_hz * t_ms / 1000.0).sin();
    let mut beats = Vec::new();
    let mut t = 0.0;
    while t < duration_s * 1000.0 {
        let r = rr_at(t);
        t += r;
        beats.push(Beat { t_ms: t, rr_ms: r });
    }
    beats
}

/// Band powers of the resampled series from a plain DFT.
fn dft_fractions(beats: &[Beat]) -> (f64, f64) {
    let x = resample_tachogram(beats, 4.0);
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let (mut lf, mut hf) = (0.0, 0.0);
    for k in 1..n / 2 {
        let f = k as f64 * 4.0 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let ph = TAU * (k * j) as f64 / n as f64;
            re += (v - mean) * ph.cos();
            im -= (v - mean) * ph.sin();
        }
        let p = re * re + im * im;
        if (0.04..0.15).contains(&f) {
            lf += p;
        } else if (0.15..0.40).contains(&f) {
            hf += p;
        }
    }
    (lf / (lf + hf), hf / (lf + hf))
}

fn spectral() -> Outcome {
    let hf_beats = tone_beats(0.25, 300.0);
    let lf_beats = tone_beats(0.1, 300.0);
    let fh = compute_features(&hf_beats).expect("hf tone");
    let fl = compute_features(&lf_beats).expect("lf tone");
    let hf_frac = fh.hf_power / (fh.lf_power + fh.hf_power);
    let lf_frac = fl.lf_power / (fl.lf_power + fl.hf_power);
    let (_, hf_dft) = dft_fractions(&hf_beats);
    let (lf_dft, _) = dft_fractions(&lf_beats);
    outcome(
        hf_frac >= 0.95 && lf_frac >= 0.95 && hf_dft >= 0.95 && lf_dft >= 0.95,
        format!(
            "0.25 Hz tone HF fraction {hf_frac:.4} (DFT {hf_dft:.4}); 0.1 Hz tone LF fraction {lf_frac:.4} (DFT {lf_dft:.4}); need >= 0.95"
        ),
    )
}

// ---------------------------------------------------------------- R-peaks

fn rpeaks() -> Outcome {
    let fs = 250.0;
    let mut gen = EcgGenerator::new(PatientProfile::default(), fs, 2024);
    let mut samples = Vec::new();
    // alternate calm and stressed five-minute stretches
    for block in 0..6 {
        gen.set_stressed(block % 2 == 1);
        samples.extend(gen.generate_until((block + 1) as f64 * 300_000.0));
    }
    let truth: Vec<f64> = gen.true_peaks().to_vec();
    let ecg = rehab_core::hrv::EcgStream {
        sampling_rate_hz: fs,
        samples,
    };
    let detected = match detect_peak_times(&ecg) {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("detector failed: {e}")),
    };
    // greedy one-to-one matching within 75 ms
    let (mut i, mut j, mut matched, mut worst) = (0, 0, 0usize, 0.0f64);
    while i < truth.len() && j < detected.len() {
        let dt = detected[j] - truth[i];
        if dt.abs() <= 75.0 {
            matched += 1;
            worst = worst.max(dt.abs());
            i += 1;
            j += 1;
        } else if dt < 0.0 {
            j += 1;
        } else {
            i += 1;
        }
    }
    let se = matched as f64 / truth.len() as f64;
    let ppv = matched as f64 / detected.len() as f64;
    outcome(
        se >= 0.99 && ppv >= 0.99 && worst <= 10.0,
        format!(
            "30 min, {} true beats, {} detected: Se {:.2}%, PPV {:.2}%, max timing error {worst:.1} ms (limit 10 ms)",
            truth.len(),
            detected.len(),
            100.0 * se,
            100.0 * ppv
        ),
    )
}

// ---------------------------------------------------------------- SVM

fn svm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n_sv = rng.random_range(1..40);
        let gamma = 10f64.powf(rng.random_range(-3.0..0.5));
        let model = SvmModel {
            version: 1,
            gamma,
            bias: rng.random_range(-2.0..2.0),
            n_features: N_FEATURES,
            support_vectors: (0..n_sv)
                .map(|_| {
                    (0..N_FEATURES)
                        .map(|_| rng.random_range(-0.5..1.5))
                        .collect()
                })
                .collect(),
            dual_coefficients: (0..n_sv).map(|_| rng.random_range(-10.0..10.0)).collect(),
        };
        for _ in 0..100 {
            let x: Vec<f64> = (0..N_FEATURES)
                .map(|_| rng.random_range(-0.5..1.5))
                .collect();
            let naive: f64 = model
                .support_vectors
                .iter()
                .zip(&model.dual_coefficients)
                .map(|(sv, a)| {
                    let d2: f64 = sv.iter().zip(&x).map(|(p, q)| (p - q) * (p - q)).sum();
                    a * (-gamma * d2).exp()
                })
                .sum::<f64>()
                + model.bias;
            let got = model.decision(&x).expect("decision");
            worst = worst.max((got - naive).abs());
        }
    }
    // two separated blobs
    let mut data = Vec::new();
    for k in 0..200 {
        let label = k % 2 == 0;
        let c = if label { 0.8 } else { 0.2 };
        let x: Vec<f64> = (0..N_FEATURES)
            .map(|_| c + rng.random_range(-0.1..0.1))
            .collect();
        data.push((x, label));
    }
    let train_acc = match svm_train(&data, &TrainParams::default()) {
        Ok(m) => {
            data.iter()
                .filter(|(x, y)| m.predict(x).map(|p| p.1) == Ok(*y))
                .count() as f64
                / data.len() as f64
        }
        Err(_) => 0.0,
    };
    outcome(
        worst <= 1e-9 && train_acc == 1.0,
        format!(
            "50 models x 100 inputs: max |decision - kernel sum| {worst:.1e} (limit 1e-9); two-blob training accuracy {:.1}%",
            100.0 * train_acc
        ),
    )
}

// ---------------------------------------------------------------- LOSO

fn loso() -> Outcome {
    let t0 = Instant::now();
    let cohort = match synthetic_cohort(10, &SubjectProtocol::default(), 7) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("cohort failed: {e}")),
    };
    let acc = match loso_accuracy(&cohort, &TrainParams::default()) {
        Ok(a) => a,
        Err(e) => return outcome(false, format!("loso failed: {e}")),
    };
    let elapsed = t0.elapsed();
    let windows: usize = cohort.iter().map(|s| s.windows.len()).sum();
    let correct: f64 = cohort
        .iter()
        .zip(&acc)
        .map(|(s, a)| a * s.windows.len() as f64)
        .sum();
    let pooled = correct / windows as f64;
    let min = acc.iter().cloned().fold(1.0, f64::min);
    outcome(
        pooled >= 0.90 && elapsed < Duration::from_secs(60),
        format!(
            "10 subjects, {windows} windows: accuracy {:.1}% (need >= 90%), worst subject {:.1}%, {} (limit 60 s)",
            100.0 * pooled,
            100.0 * min,
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------- coach goldens

const COACH_SEED: u64 = 42;

fn transcript(actions: &[(u64, AgentAction)]) -> String {
    actions
        .iter()
        .map(|(ts, a)| {
            encode(&WireMessage::new(*ts, Payload::AgentAction(a.clone()))).expect("encode action")
        })
        .collect()
}

fn coach_goldens() -> Outcome {
    let dir = fixtures().join("coach");
    let mut notes = Vec::new();
    let mut pass = true;
    for name in ["clean_run", "stress_session_2", "chronic_distraction"] {
        let script = fs::read_to_string(dir.join(format!("{name}.script"))).expect("script");
        let golden =
            fs::read_to_string(dir.join(format!("{name}.expected.ndjson"))).expect("golden");
        let mut coach = Coach::new(
            CoachConfig::from_plan(&SessionPlan::default(), COACH_SEED),
            UtteranceBank::default(),
        )
        .expect("coach");
        let actions = run_inputs(&mut coach, &parse_script(&script).expect("parse")).expect("run");
        let got = transcript(&actions);
        let same = got == golden;
        let best_named = actions.iter().any(|(_, a)| {
            a.cause == Cause::FinalSummary && a.utterance.contains("Your best was session")
        });
        let mut ok = same && best_named;
        if name == "stress_session_2" {
            ok &= actions.iter().any(|(_, a)| {
                a.cause == Cause::Stress && a.utterance.to_lowercase().contains("break")
            });
        }
        if name == "chronic_distraction" {
            ok &= actions
                .iter()
                .filter(|(_, a)| a.cause == Cause::Distraction)
                .count()
                >= 3;
        }
        pass &= ok;
        notes.push(format!(
            "{name} {} ({} actions)",
            if ok { "identical" } else { "MISMATCH" },
            actions.len()
        ));
    }
    outcome(pass, notes.join(", "))
}

// ---------------------------------------------------------------- protocol

fn float(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-1.0..1.0),
        1 => rng.random_range(-1e6..1e6),
        2 => [
            0.0,
            -0.0,
            1e-300,
            f64::MAX,
            f64::MIN_POSITIVE,
            0.1,
            1.0 / 3.0,
        ][rng.random_range(0..7)],
        _ => loop {
            let x = f64::from_bits(rng.random());
            if x.is_finite() {
                break x;
            }
        },
    }
}

fn vec2(rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(float(rng), float(rng))
}

fn text(rng: &mut ChaCha8Rng) -> String {
    const POOL: &[char] = &[
        'a', 'Z', ' ', '"', '\\', '\n', '\t', 'é', '✓', '€', '{', '}', ':', ',', '\u{1}',
    ];
    let n = rng.random_range(1..80);
    (0..n)
        .map(|_| POOL[rng.random_range(0..POOL.len())])
        .collect()
}

fn random_setup(rng: &mut ChaCha8Rng) -> SessionSetup {
    let mut exercise = match rng.random_range(0..3) {
        0 => TrajectorySpec::circle(float(rng)),
        1 => TrajectorySpec::lemniscate(float(rng)),
        _ => TrajectorySpec::line(vec2(rng), vec2(rng)),
    };
    exercise.center = vec2(rng);
    let level = [
        AssistLevel::Off,
        AssistLevel::Low,
        AssistLevel::Medium,
        AssistLevel::High,
    ][rng.random_range(0..4)];
    SessionSetup {
        plan: SessionPlan {
            exercise,
            assist: AssistConfig {
                level,
                stiffness_n_per_m: float(rng),
                deadband_m: float(rng),
                force_cap_n: float(rng),
            },
            sessions: rng.random(),
            per_session_duration_s: float(rng),
            baseline_duration_s: float(rng),
            instruction_s: float(rng),
            summary_s: float(rng),
        },
        scoring: ScoringConfig {
            weights: [float(rng), float(rng), float(rng)],
        },
        difficulty: DifficultyRule {
            hard_pdi: float(rng),
            easy_pdi: float(rng),
        },
        in_session_interventions: rng.random(),
        seed: rng.random(),
    }
}

const EXPRESSIONS: [Expression; 5] = [
    Expression::Joy,
    Expression::Admiration,
    Expression::HappyFor,
    Expression::Neutral,
    Expression::Concern,
];

fn random_message(rng: &mut ChaCha8Rng) -> WireMessage {
    let ts: u64 = if rng.random() {
        rng.random()
    } else {
        rng.random_range(0..10_000_000)
    };
    let payload = match rng.random_range(0..8) {
        0 => Payload::Hello { role: text(rng) },
        1 => {
            let gaze = rng.random::<bool>().then(|| Gaze {
                pitch_deg: float(rng),
                yaw_deg: float(rng),
            });
            let mut on_screen = rng.random::<bool>().then(|| rng.random());
            let pain_prob = rng.random::<bool>().then(|| rng.random::<f64>());
            if gaze.is_none() && pain_prob.is_none() {
                on_screen = Some(rng.random());
            }
            Payload::Frame(AffectFrame {
                t_ms: ts,
                gaze,
                on_screen,
                pain_prob,
            })
        }
        2 => Payload::Handle(HandleState {
            position: vec2(rng),
            velocity: vec2(rng),
            t_ms: float(rng),
        }),
        3 => Payload::Force(ForceCommand {
            force: vec2(rng),
            reference: PathPoint {
                s: float(rng),
                position: vec2(rng),
                tangent: vec2(rng),
            },
            error_m: float(rng),
        }),
        4 => Payload::Event(AffectEvent {
            kind: [
                AffectKind::Distraction,
                AffectKind::Pain,
                AffectKind::Stress,
            ][rng.random_range(0..3)],
            onset_ms: ts,
            evidence: float(rng),
        }),
        5 => Payload::Metrics(SessionMetrics {
            session: rng.random(),
            mean_deviation_m: float(rng),
            max_deviation_m: float(rng),
            distance_m: float(rng),
            elapsed_s: float(rng),
            pdi: float(rng),
        }),
        6 => Payload::AgentAction(AgentAction {
            utterance: text(rng),
            gesture: Gesture::ALL[rng.random_range(0..Gesture::ALL.len())],
            expression: EXPRESSIONS[rng.random_range(0..EXPRESSIONS.len())],
            cause: Cause::ALL[rng.random_range(0..Cause::ALL.len())],
        }),
        _ => Payload::SessionCtrl(match rng.random_range(0..4) {
            0 => SessionCtrl::Start,
            1 => SessionCtrl::Ack,
            2 => SessionCtrl::Abort,
            _ => SessionCtrl::Config(Box::new(random_setup(rng))),
        }),
    };
    WireMessage::new(ts, payload)
}

fn mutate(rng: &mut ChaCha8Rng, seeds: &[Vec<u8>]) -> Vec<u8> {
    match rng.random_range(0..4) {
        0 => {
            let n = rng.random_range(0..1300);
            (0..n).map(|_| rng.random()).collect()
        }
        1 => {
            let s = &seeds[rng.random_range(0..seeds.len())];
            s[..rng.random_range(0..=s.len())].to_vec()
        }
        2 => {
            let mut s = seeds[rng.random_range(0..seeds.len())].clone();
            for _ in 0..rng.random_range(1..6) {
                let i = rng.random_range(0..s.len());
                s[i] = rng.random();
            }
            s
        }
        _ => {
            let mut s = seeds[rng.random_range(0..seeds.len())].clone();
            const TOKENS: &[&[u8]] = &[
                b"null",
                b"1e999",
                b"-1",
                b"\"",
                b"{",
                b"}",
                b"[",
                b"]",
                b",",
                b"\"v\":2",
                b"18446744073709551616",
            ];
            let i = rng.random_range(0..=s.len());
            let t = TOKENS[rng.random_range(0..TOKENS.len())];
            s.splice(i..i, t.iter().copied());
            s
        }
    }
}

fn protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut round_trips, mut oversize, mut mismatches) = (0, 0, 0);
    while round_trips < 10_000 {
        let m = random_message(&mut rng);
        match encode(&m) {
            Ok(bytes) => {
                round_trips += 1;
                let back = decode(bytes.as_bytes());
                if back.as_ref() != Ok(&m)
                    || encode(&back.unwrap_or(m.clone())).ok().as_deref() != Some(&bytes)
                {
                    mismatches += 1;
                }
            }
            Err(_) => oversize += 1,
        }
    }

    let mut golden_lines: Vec<String> = Vec::new();
    for f in [
        "wire/golden.ndjson",
        "coach/clean_run.expected.ndjson",
        "coach/stress_session_2.expected.ndjson",
    ] {
        let text = fs::read_to_string(fixtures().join(f)).expect("golden file");
        golden_lines.extend(text.lines().map(|l| format!("{l}\n")));
    }
    golden_lines.push(
        "{\"evidence\":0.75,\"kind\":\"Stress\",\"ts_ms\":120000,\"type\":\"EVENT\",\"v\":1}\n"
            .into(),
    );
    let stable = golden_lines
        .iter()
        .filter(|l| decode(l.as_bytes()).and_then(|m| encode(&m)).as_deref() == Ok(l.as_str()))
        .count();

    let seeds: Vec<Vec<u8>> = golden_lines
        .iter()
        .map(|l| l.clone().into_bytes())
        .collect();
    let mut panics = 0;
    let mut accepted = 0;
    for _ in 0..1_000_000 {
        let d = mutate(&mut rng, &seeds);
        match std::panic::catch_unwind(|| decode(&d).is_ok()) {
            Ok(true) => accepted += 1,
            Ok(false) => {}
            Err(_) => panics += 1,
        }
    }
    outcome(
        mismatches == 0 && stable == golden_lines.len() && panics == 0,
        format!(
            "10^4 round trips, {mismatches} mismatches ({oversize} oversize skipped); {stable}/{} goldens stable; 10^6 fuzz datagrams, {panics} aborts, {accepted} still decodable",
            golden_lines.len()
        ),
    )
}

// ---------------------------------------------------------------- duration

fn duration() -> Outcome {
    let plan = SessionPlan::default();
    let scheduled_min = plan.scheduled_activity_s() / 60.0;
    // measured: a calm simulated visit from the instruction to the goodbye
    let mut cfg = AppConfig::default();
    cfg.sim.stressed_sessions.clear();
    cfg.sim.stress_pipeline = false;
    let measured_min = match simulate(&cfg, 1, |_| Ok(())) {
        Ok(r) => (r.end_ms as f64 / 1000.0 - plan.baseline_duration_s) / 60.0,
        Err(_) => f64::NAN,
    };
    let ok = |m: f64| (13.0..=17.0).contains(&m);
    outcome(
        ok(scheduled_min) && ok(measured_min),
        format!(
            "default plan schedules {scheduled_min:.2} min; simulated visit after calibration took {measured_min:.2} min (need 13-17)"
        ),
    )
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let checks: [Check; 12] = [
        ("trend reproduction", trend),
        ("controller properties", controller),
        ("closed-loop convergence", convergence),
        ("scoring oracle", scoring_oracle),
        ("hrv identities", hrv_identities),
        ("spectral check", spectral),
        ("r-peak detection", rpeaks),
        ("svm", svm),
        ("end-to-end stress loso", loso),
        ("coach golden logs", coach_goldens),
        ("protocol", protocol),
        ("session duration", duration),
    ];
    // the timed checks run alone so their budgets are measured fairly
    let timed = ["trend reproduction", "end-to-end stress loso"];
    let mut results: Vec<Option<Outcome>> = checks.iter().map(|_| None).collect();
    for (i, (name, f)) in checks.iter().enumerate() {
        if timed.contains(name) {
            results[i] = Some(f());
        }
    }
    std::thread::scope(|s| {
        let hs: Vec<_> = checks
            .iter()
            .enumerate()
            .filter(|(_, (name, _))| !timed.contains(name))
            .map(|(i, (_, f))| (i, s.spawn(f)))
            .collect();
        for (i, h) in hs {
            results[i] = Some(
                h.join()
                    .unwrap_or_else(|_| outcome(false, "check panicked")),
            );
        }
    });
    let mut failed = 0;
    for ((name, _), r) in checks.iter().zip(results) {
        let r = r.expect("every check ran");
        if !r.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    println!(
        "acceptance: {}/{} passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
