use crate::config::SystemConfig;
use crate::channel::draw_channel;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Inputs of the pairwise-error-probability bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PepBoundParams {
    /// Squared channel separation contributed by one tag, `Delta_0`.
    pub delta0: f64,
    pub k_samples: usize,
    pub sigma_s_sq: f64,
    pub sigma_u_sq: f64,
    pub n_tags: usize,
}

impl PepBoundParams {
    pub fn from_config(cfg: &SystemConfig, delta0: f64) -> Self {
        PepBoundParams {
            delta0,
            k_samples: cfg.str_samples,
            sigma_s_sq: cfg.sigma_s_sq,
            sigma_u_sq: cfg.noise_var(),
            n_tags: cfg.n_tags,
        }
    }

    fn snr_k(&self) -> f64 {
        self.k_samples as f64 * self.sigma_s_sq / self.sigma_u_sq
    }
}

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_{d=1}^{N} C(N,d) Q(sqrt(K sigma_s^2 / sigma_u^2 * d * Delta_0))`.
pub fn pep_union_bound(p: &PepBoundParams) -> f64 {
    let snr_k = p.snr_k();
    (1..=p.n_tags)
        .map(|d| binomial(p.n_tags, d) * q_function((snr_k * d as f64 * p.delta0).sqrt()))
        .sum()
}

/// `(1/2) sum_{d=1}^{N} C(N,d) exp(-K sigma_s^2 d Delta_0 / (2 sigma_u^2))`,
/// the union bound with `Q(x) <= exp(-x^2/2) / 2` applied termwise.
pub fn pep_chernoff_bound(p: &PepBoundParams) -> f64 {
    let snr_k = p.snr_k();
    0.5 * (1..=p.n_tags)
        .map(|d| binomial(p.n_tags, d) * (-snr_k * d as f64 * p.delta0 / 2.0).exp())
        .sum::<f64>()
}

/// Monte Carlo mean of `|v_i|^2` over channel draws and tags. Converges to
/// `zeta * M` for unit-variance channels.
pub fn estimate_delta0(cfg: &SystemConfig, rng: &mut RngStream, n_draws: usize) -> Result<f64> {
    if n_draws == 0 {
        return Err(Error::config("n_draws", "must be at least 1"));
    }
    let mut acc = 0.0;
    for _ in 0..n_draws {
        let ch = draw_channel(cfg, rng)?;
        for i in 0..cfg.n_tags {
            acc += ch.v(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    Ok(acc / (n_draws * cfg.n_tags) as f64)
}
