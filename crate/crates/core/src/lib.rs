//! System model and classical detection for multi-tag ambient backscatter
//! communication (AmBC).
//!
//! A reader with `M` antennas observes an uncooperative RF source whose
//! signal reaches it directly and through `N` passive tags. Each tag switches
//! between a reflective and an absorbing state once per tag symbol, so the
//! reader must decide between `2^N` joint tag states.
//!
//! This crate holds the pieces shared by every detector:
//!
//! * [`config`]: scenario parameters and their derived powers.
//! * [`hypothesis`]: joint tag states and their bit encoding.
//! * [`rng`]: `(seed, stream)`-addressable random streams.
//! * [`channel`]: Rayleigh channel draws, pilot schedules and frame synthesis.
//! * [`detectors`]: perfect-CSI likelihood ratio tests, the energy detector
//!   and pairwise-error-probability bounds.
//! * [`frame_dump`]: the binary frame dump used by golden-file tests.

pub mod channel;
pub mod config;
pub mod detectors;
mod error;
pub mod frame_dump;
pub mod hypothesis;
pub mod rng;

pub use error::{Error, Result};

/// Complex sample type used on every classical signal path.
pub type C64 = num_complex::Complex<f64>;
