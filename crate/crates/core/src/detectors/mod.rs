//! Perfect-CSI benchmarks, the energy detector and analytical error bounds.

mod energy;
mod lrt;
mod pep;
mod rule;

pub use energy::{energy_detect, energy_statistic, EnergyStats};
pub use lrt::{lrt_constellation, lrt_gaussian, GaussianHypothesis, GaussianLrtCache};
pub use pep::{binomial, estimate_delta0, pep_chernoff_bound, pep_union_bound, q_function, PepBoundParams};
pub use rule::{GaussianLrtMode, LrtDetector};

use crate::hypothesis::Hypothesis;

/// Outcome of a multi-hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct LrtDecision {
    pub chosen: Hypothesis,
    /// `L_j` for every hypothesis.
    pub log_likelihoods: Vec<f64>,
}

impl LrtDecision {
    pub fn from_log_likelihoods(log_likelihoods: Vec<f64>, n_tags: usize) -> Self {
        let chosen = Hypothesis::new(argmax_lowest(&log_likelihoods), n_tags)
            .expect("one log-likelihood per hypothesis");
        LrtDecision {
            chosen,
            log_likelihoods,
        }
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_pick_lowest_index() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_lowest(&[0.0; 4]), 0);
        assert_eq!(argmax_lowest(&[f64::NEG_INFINITY, -1e300]), 1);
    }
}
