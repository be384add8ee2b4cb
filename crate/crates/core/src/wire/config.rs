//! Application configuration (TOML) and the setup record that makes every
//! session log self-describing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::affect::{AffectThresholds, GazeCalibration};
use crate::assist::HandleDynamicsConfig;
use crate::coach::{CoachConfig, DifficultyRule, SessionPlan};
use crate::error::{Error, Result};
use crate::hrv::{StressConfig, SvmModel};
use crate::scoring::ScoringConfig;
use crate::sim::{PatientProfile, SimOptions};

const DEFAULT_MODEL: &str = include_str!("../../assets/stress_svm.json");

/// The model shipped with the crate, trained on synthetic subjects.
pub fn default_model() -> SvmModel {
    SvmModel::from_json(DEFAULT_MODEL).expect("embedded model is valid")
}

/// Everything needed to re-score a log or re-drive its coach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSetup {
    pub plan: SessionPlan,
    pub scoring: ScoringConfig,
    pub difficulty: DifficultyRule,
    pub in_session_interventions: bool,
    pub seed: u64,
}

impl SessionSetup {
    pub fn coach_config(&self) -> CoachConfig {
        let mut c = CoachConfig::from_plan(&self.plan, self.seed);
        c.difficulty = self.difficulty;
        c.in_session_interventions = self.in_session_interventions;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub bind: String,
    /// Datagram port for sensor and replay feeds; 0 picks a free port.
    pub udp_port: u16,
    /// Stream port for the UI; 0 picks a free port.
    pub tcp_port: u16,
    pub heartbeat_ms: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            bind: "127.0.0.1".into(),
            udp_port: 9750,
            tcp_port: 9751,
            heartbeat_ms: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,
    /// Stress model file; the embedded model is used when absent.
    pub model_path: Option<PathBuf>,
    /// Session log written by `serve`.
    pub log_path: Option<PathBuf>,
    pub plan: SessionPlan,
    pub dynamics: HandleDynamicsConfig,
    pub scoring: ScoringConfig,
    pub difficulty: DifficultyRule,
    pub in_session_interventions: bool,
    pub thresholds: AffectThresholds,
    pub gaze: GazeCalibration,
    /// Window and hop; the baseline length always comes from the plan.
    pub stress: StressConfig,
    pub network: NetworkConfig,
    pub patient: PatientProfile,
    pub sim: SimOptions,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            seed: 0,
            model_path: None,
            log_path: None,
            plan: SessionPlan::default(),
            dynamics: HandleDynamicsConfig::default(),
            scoring: ScoringConfig::default(),
            difficulty: DifficultyRule::default(),
            in_session_interventions: true,
            thresholds: AffectThresholds::default(),
            gaze: GazeCalibration::default(),
            stress: StressConfig::default(),
            network: NetworkConfig::default(),
            patient: PatientProfile::default(),
            sim: SimOptions::default(),
        }
    }
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AppConfig =
            toml::from_str(text).map_err(|e| Error::Spec(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative `model_path` or `log_path` is taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: AppConfig =
            toml::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.model_path, &mut cfg.log_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.dynamics.validate()?;
        self.scoring.validate()?;
        self.thresholds.validate()?;
        self.gaze.validate()?;
        self.stress_config().validate()?;
        self.patient.validate()?;
        self.sim.validate()?;
        if !(self.difficulty.easy_pdi < self.difficulty.hard_pdi) {
            return Err(Error::Spec("difficulty needs easy_pdi < hard_pdi".into()));
        }
        let n = &self.network;
        if n.udp_port != 0 && n.udp_port == n.tcp_port {
            return Err(Error::Spec(format!(
                "udp and tcp ports must differ (both {})",
                n.udp_port
            )));
        }
        if n.heartbeat_ms == 0 {
            return Err(Error::Spec("heartbeat_ms must be > 0".into()));
        }
        if let Some(p) = &self.model_path {
            if !p.is_file() {
                return Err(Error::Spec(format!(
                    "model file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn stress_config(&self) -> StressConfig {
        StressConfig {
            baseline_s: self.plan.baseline_duration_s,
            ..self.stress
        }
    }

    pub fn load_model(&self) -> Result<SvmModel> {
        match &self.model_path {
            Some(p) => SvmModel::load(p),
            None => Ok(default_model()),
        }
    }

    pub fn setup(&self) -> SessionSetup {
        SessionSetup {
            plan: self.plan.clone(),
            scoring: self.scoring,
            difficulty: self.difficulty,
            in_session_interventions: self.in_session_interventions,
            seed: self.seed,
        }
    }
}
