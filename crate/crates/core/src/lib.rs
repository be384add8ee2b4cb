//! Closed-loop upper-limb rehabilitation trainer: trajectory tracking with
//! assist-as-needed force, performance scoring, HRV stress classification,
//! affect fusion and an embodied coach driving a line-oriented wire protocol.

pub mod affect;
pub mod assist;
pub mod coach;
pub mod error;
pub mod hrv;
pub mod scoring;
pub mod server;
pub mod session;
pub mod sim;
pub mod trajectory;
pub mod vec2;
pub mod wire;

pub use error::{Error, Result};
pub use vec2::Vec2;
