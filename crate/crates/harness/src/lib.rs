//! Monte Carlo experiment driver for multi-tag AmBC detection.
//!
//! * [`sweep`]: BER sweeps over SNR, zeta, K, N or P for any mix of the
//!   perfect-CSI LRT, the energy detector, EmbedNet, ChanEstNet and the
//!   analytical bounds.
//! * [`report`]: the CSV schema and gnuplot data output.
//! * [`throughput`]: normalized per-tag throughput.
//! * [`models`] and [`recipes`]: desk-scale training and the canned
//!   figure reproductions.
//! * [`cli`]: the `ambc` command line.

pub mod cli;
mod error;
pub mod method;
pub mod models;
pub mod profile;
pub mod recipes;
pub mod report;
pub mod sweep;
pub mod throughput;

pub use error::{HarnessError, Result};
