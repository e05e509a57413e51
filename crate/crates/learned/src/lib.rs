//! Learned multi-tag detectors.
//!
//! * [`embednet`]: a prototypical network over sample-covariance features.
//!   Each frame's pilots form per-class prototypes; data symbols go to the
//!   nearest one. No CSI and no per-frame weight updates.
//! * [`chanestnet`]: a CNN that refines one-hot pilot correlations into
//!   channel estimates, followed by the classical LRT.

pub mod chanestnet;
pub mod embednet;
mod error;
pub mod features;
mod training;

pub use error::{LearnedError, Result};
pub use training::TrainingLog;

use ambc_core::hypothesis::{BitMatrix, Hypothesis};

/// Hypothesis decisions as a `decisions.len() x n_tags` bit matrix.
pub fn decisions_to_bits(decisions: &[usize], n_tags: usize) -> Result<BitMatrix> {
    let hyps = decisions
        .iter()
        .map(|&j| Hypothesis::new(j, n_tags))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(BitMatrix::from_hypotheses(&hyps, n_tags))
}
