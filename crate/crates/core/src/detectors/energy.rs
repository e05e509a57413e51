use crate::channel::{AmbientSource, EffectiveChannels, ObsBlock};
use crate::Result;

use super::LrtDecision;

use std::f64::consts::PI;

/// Gaussian approximation of the per-symbol energy under each hypothesis:
/// `E ~ N(delta_j, gamma_j^2)`.
#[derive(Debug, Clone)]
pub struct EnergyStats {
    n_tags: usize,
    /// Means `delta_j = sigma_s^2 |w_j|^2 + M sigma_u^2`.
    pub delta: Vec<f64>,
    /// Variances `gamma_j^2 = (sigma_s^4 |w_j|^4 + 2 sigma_s^2 sigma_u^2 |w_j|^2 + M sigma_u^4) / K`.
    pub gamma_sq: Vec<f64>,
}

impl EnergyStats {
    /// Statistics under a Gaussian source, for which `E|s|^4 = 2 sigma_s^4`.
    pub fn new(channels: &EffectiveChannels, sigma_s_sq: f64, sigma_u_sq: f64, k_samples: usize) -> Self {
        Self::with_source_fourth_moment(
            channels,
            sigma_s_sq,
            2.0 * sigma_s_sq * sigma_s_sq,
            sigma_u_sq,
            k_samples,
        )
    }

    /// Statistics matched to the actual source distribution. Only the
    /// `|w|^4` term of the variance changes: it is scaled by
    /// `E|s|^4 - sigma_s^4`, which vanishes for constant-modulus sources.
    pub fn for_source(
        channels: &EffectiveChannels,
        source: &AmbientSource,
        sigma_u_sq: f64,
        k_samples: usize,
    ) -> Self {
        Self::with_source_fourth_moment(
            channels,
            source.sigma_s_sq,
            source.fourth_moment(),
            sigma_u_sq,
            k_samples,
        )
    }

    fn with_source_fourth_moment(
        channels: &EffectiveChannels,
        sigma_s_sq: f64,
        fourth_moment: f64,
        sigma_u_sq: f64,
        k_samples: usize,
    ) -> Self {
        let m = channels.n_antennas() as f64;
        let k = k_samples as f64;
        let excess = fourth_moment - sigma_s_sq * sigma_s_sq;
        let (delta, gamma_sq) = (0..channels.n_hypotheses())
            .map(|j| {
                let wn: f64 = channels.w(j).iter().map(|z| z.norm_sqr()).sum();
                let delta = sigma_s_sq * wn + m * sigma_u_sq;
                let var = excess * wn * wn
                    + 2.0 * sigma_s_sq * sigma_u_sq * wn
                    + m * sigma_u_sq * sigma_u_sq;
                // A noiseless constant-modulus source has zero energy spread;
                // keep the likelihood finite.
                (delta, (var / k).max(f64::MIN_POSITIVE))
            })
            .unzip();
        EnergyStats {
            n_tags: channels.n_tags(),
            delta,
            gamma_sq,
        }
    }
}

/// Average received energy `E = (1/K) sum_k |x_k|^2`.
pub fn energy_statistic(obs: ObsBlock<'_>) -> f64 {
    obs.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / obs.n_samples() as f64
}

/// Picks the hypothesis maximizing the Gaussian likelihood of the observed
/// energy. Assumes `K` is large enough for the approximation to hold.
pub fn energy_detect(obs: ObsBlock<'_>, stats: &EnergyStats) -> Result<LrtDecision> {
    let e = energy_statistic(obs);
    let lls = stats
        .delta
        .iter()
        .zip(&stats.gamma_sq)
        .map(|(&d, &g)| -0.5 * (2.0 * PI * g).ln() - (e - d) * (e - d) / (2.0 * g))
        .collect();
    Ok(LrtDecision::from_log_likelihoods(lls, stats.n_tags))
}
