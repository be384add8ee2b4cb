//! Synthetic patient and the headless closed-loop runner.

pub mod patient;
pub mod runner;
pub mod subjects;

pub use patient::{
    ecg_generate, gaze_generate, true_rr, EcgGenerator, GazeGenerator, PatientMotion,
    PatientProfile,
};
pub use runner::{simulate, simulate_to_file, SimOptions, SimReport};
