use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rehab_core::hrv::rr::read_peak_csv;
use rehab_core::hrv::{filter_artifacts, write_windows_csv, StressConfig, StressMonitor, SvmModel};
use rehab_core::server::Server;
use rehab_core::session::{replay_log, rescore_log};
use rehab_core::sim::simulate_to_file;
use rehab_core::wire::log::read_log_file;
use rehab_core::wire::{encode, AppConfig};
use rehab_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rehab", version, about = "Closed-loop rehabilitation trainer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the live session server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a headless visit with the synthetic patient and write its log.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Batch stress classification of an RR (peak time) series.
    Hrv {
        #[arg(long)]
        rr: PathBuf,
        /// Stress model; the built-in one when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 300.0)]
        baseline_s: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute per-session metrics from a log.
    Score {
        #[arg(long)]
        log: PathBuf,
    },
    /// Re-drive the coach from a log and print its actions.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<AppConfig> {
    match path {
        Some(p) => AppConfig::load(p),
        None => Ok(AppConfig::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn run(cmd: Cmd) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cmd {
        Cmd::Serve { config } => {
            let server = Server::bind(AppConfig::load(&config)?)?;
            eprintln!(
                "listening: udp {} tcp {}; log {}",
                server.udp_addr(),
                server.tcp_addr(),
                server.log_path().display()
            );
            let out = server.run()?;
            eprintln!(
                "session {} in phase {:?}; {} records logged",
                if out.aborted { "aborted" } else { "finished" },
                out.final_phase,
                out.records
            );
        }
        Cmd::Simulate { config, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let report = simulate_to_file(&cfg, seed.unwrap_or(cfg.seed), &out)?;
            for m in &report.metrics {
                writeln!(stdout, "session={} pdi={}", m.session, m.pdi)?;
            }
            eprintln!(
                "{} records over {} s written to {}",
                report.records,
                report.end_ms / 1000,
                out.display()
            );
        }
        Cmd::Hrv {
            rr,
            model,
            baseline_s,
            out,
        } => {
            let f = File::open(&rr).map_err(|e| Error::Io(format!("{}: {e}", rr.display())))?;
            let series = filter_artifacts(&read_peak_csv(BufReader::new(f))?);
            let model = match model {
                Some(p) => SvmModel::load(&p)?,
                None => rehab_core::wire::config::default_model(),
            };
            let cfg = StressConfig {
                baseline_s,
                ..StressConfig::default()
            };
            let origin = series.beats().first().map(|b| b.t_ms).unwrap_or(0.0);
            let results = StressMonitor::new(cfg, model, origin)?.run_batch(&series)?;
            let mut w = create(&out)?;
            write_windows_csv(&mut w, &results)?;
            w.flush()?;
            eprintln!("{} windows written to {}", results.len(), out.display());
        }
        Cmd::Score { log } => {
            for m in rescore_log(&read_log_file(&log)?)? {
                writeln!(
                    stdout,
                    "session={} pdi={} mean_deviation_m={} max_deviation_m={} distance_m={} elapsed_s={}",
                    m.session, m.pdi, m.mean_deviation_m, m.max_deviation_m, m.distance_m, m.elapsed_s
                )?;
            }
        }
        Cmd::Replay { log } => {
            for a in replay_log(&read_log_file(&log)?)? {
                stdout.write_all(encode(&a)?.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
