//! Assist-as-needed control: a deadband restoring force toward a forward
//! moving reference, and the mass-damper handle that stands in for the
//! planar device.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{PathPoint, Trajectory};
use crate::vec2::Vec2;

/// Fraction of the path the reference may advance in a single tick.
pub const REFERENCE_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AssistLevel {
    Off,
    Low,
    Medium,
    High,
}

impl AssistLevel {
    /// `(stiffness N/m, deadband m)` for this level.
    pub fn gains(self) -> (f64, f64) {
        match self {
            AssistLevel::Off => (0.0, 0.0),
            AssistLevel::Low => (50.0, 0.015),
            AssistLevel::Medium => (100.0, 0.010),
            AssistLevel::High => (200.0, 0.005),
        }
    }

    /// One step more assistance, saturating at `High`.
    pub fn raised(self) -> Self {
        match self {
            AssistLevel::Off => AssistLevel::Low,
            AssistLevel::Low => AssistLevel::Medium,
            AssistLevel::Medium | AssistLevel::High => AssistLevel::High,
        }
    }

    /// One step less assistance, saturating at `Off`.
    pub fn lowered(self) -> Self {
        match self {
            AssistLevel::Off | AssistLevel::Low => AssistLevel::Off,
            AssistLevel::Medium => AssistLevel::Low,
            AssistLevel::High => AssistLevel::Medium,
        }
    }
}

pub const DEFAULT_FORCE_CAP_N: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssistConfig {
    pub level: AssistLevel,
    pub stiffness_n_per_m: f64,
    pub deadband_m: f64,
    pub force_cap_n: f64,
}

impl AssistConfig {
    pub fn for_level(level: AssistLevel) -> Self {
        let (k, d) = level.gains();
        AssistConfig {
            level,
            stiffness_n_per_m: k,
            deadband_m: d,
            force_cap_n: DEFAULT_FORCE_CAP_N,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.deadband_m.is_finite()
            && self.stiffness_n_per_m.is_finite()
            && self.force_cap_n.is_finite();
        if !ok {
            return Err(Error::Spec("non-finite assist parameter".into()));
        }
        if self.deadband_m < 0.0 || self.stiffness_n_per_m < 0.0 {
            return Err(Error::Spec("deadband and stiffness must be >= 0".into()));
        }
        if self.force_cap_n <= 0.0 {
            return Err(Error::Spec("force cap must be > 0".into()));
        }
        if self.level == AssistLevel::Off && self.stiffness_n_per_m != 0.0 {
            return Err(Error::Spec(
                "assist level Off requires zero stiffness".into(),
            ));
        }
        Ok(())
    }
}

impl Default for AssistConfig {
    fn default() -> Self {
        Self::for_level(AssistLevel::Medium)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandleState {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Exercise clock, ms since the session started (paused during breaks).
    pub t_ms: f64,
}

impl HandleState {
    pub fn at_rest(position: Vec2) -> Self {
        HandleState {
            position,
            velocity: Vec2::ZERO,
            t_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceCommand {
    pub force: Vec2,
    pub reference: PathPoint,
    pub error_m: f64,
}

/// Axis-aligned workspace the handle is confined to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: Vec2,
    pub max: Vec2,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace {
            min: Vec2::new(-0.15, -0.15),
            max: Vec2::new(0.15, 0.15),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandleDynamicsConfig {
    pub mass_kg: f64,
    pub damping_ns_per_m: f64,
    pub dt_s: f64,
    #[serde(default)]
    pub workspace: Workspace,
}

impl Default for HandleDynamicsConfig {
    fn default() -> Self {
        HandleDynamicsConfig {
            mass_kg: 1.0,
            damping_ns_per_m: 5.0,
            dt_s: 0.01,
            workspace: Workspace::default(),
        }
    }
}

impl HandleDynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg > 0.0) || !self.mass_kg.is_finite() {
            return Err(Error::Spec("mass must be > 0".into()));
        }
        if !(self.damping_ns_per_m >= 0.0) || !self.damping_ns_per_m.is_finite() {
            return Err(Error::Spec("damping must be >= 0".into()));
        }
        if !(self.dt_s > 0.0 && self.dt_s <= 0.02) {
            return Err(Error::Spec("dt must lie in (0, 0.02] s".into()));
        }
        let ws = self.workspace;
        if !(ws.min.x < ws.max.x && ws.min.y < ws.max.y) {
            return Err(Error::Spec("empty workspace".into()));
        }
        Ok(())
    }
}

/// The point the controller pulls toward: the projection of the handle
/// onto the forward window starting at `prev_s`. Never moves backward.
pub fn advance_reference(traj: &Trajectory, prev_s: f64, handle_pos: Vec2) -> PathPoint {
    traj.project_forward(prev_s, REFERENCE_WINDOW, handle_pos).0
}

/// Deadband restoring force: zero inside `d`, `min(k (e - d), F_max)` past it,
/// pointing from the handle toward the reference.
pub fn compute_force(
    state: &HandleState,
    reference: &PathPoint,
    cfg: &AssistConfig,
) -> ForceCommand {
    let offset = reference.position - state.position;
    let e = offset.norm();
    let force = if e <= cfg.deadband_m || cfg.stiffness_n_per_m == 0.0 {
        Vec2::ZERO
    } else {
        let mag = (cfg.stiffness_n_per_m * (e - cfg.deadband_m)).min(cfg.force_cap_n);
        offset * (mag / e)
    };
    ForceCommand {
        force,
        reference: *reference,
        error_m: e,
    }
}

/// One semi-implicit Euler step of the mass-damper handle.
pub fn step_dynamics(
    state: &HandleState,
    user_force: Vec2,
    assist_force: Vec2,
    dyn_cfg: &HandleDynamicsConfig,
) -> Result<HandleState> {
    if !user_force.is_finite() || !assist_force.is_finite() {
        return Err(Error::Input("non-finite force".into()));
    }
    let dt = dyn_cfg.dt_s;
    let total = user_force + assist_force - state.velocity * dyn_cfg.damping_ns_per_m;
    let mut v = state.velocity + total * (dt / dyn_cfg.mass_kg);
    let mut x = state.position + v * dt;
    let ws = dyn_cfg.workspace;
    if x.x < ws.min.x || x.x > ws.max.x {
        x.x = x.x.clamp(ws.min.x, ws.max.x);
        v.x = 0.0;
    }
    if x.y < ws.min.y || x.y > ws.max.y {
        x.y = x.y.clamp(ws.min.y, ws.max.y);
        v.y = 0.0;
    }
    Ok(HandleState {
        position: x,
        velocity: v,
        t_ms: state.t_ms + dt * 1000.0,
    })
}
