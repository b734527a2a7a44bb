//! Slow-time radar code synthesis trading detection SINR against the delay-Doppler
//! Cramér-Rao bound under energy and similarity constraints.
//!
//! The design problem is scalarized by a weight `beta`, convexified with a quartic
//! augmentation, relaxed to four blocks and solved by maximum block improvement with a
//! closed-form per-block update.

pub mod analysis;
pub mod cli;
pub mod crb;
pub mod error;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
