use crate::channel::{EffectiveChannels, ObsBlock};
use crate::{Error, Result, C64};

use super::LrtDecision;

use std::f64::consts::PI;

/// Covariance of one hypothesis under a Gaussian source,
/// `Sigma_j = sigma_s^2 w_j w_j^H + sigma_u^2 I`.
#[derive(Debug, Clone)]
pub struct GaussianHypothesis {
    /// Row-major `M x M`.
    pub sigma: Vec<C64>,
    /// Row-major `M x M`, from the Sherman-Morrison identity.
    pub sigma_inv: Vec<C64>,
    /// From the matrix determinant lemma.
    pub log_det: f64,
}

/// Per-hypothesis covariances, inverses and log-determinants for one frame.
#[derive(Debug, Clone)]
pub struct GaussianLrtCache {
    n_tags: usize,
    n_antennas: usize,
    pub hypotheses: Vec<GaussianHypothesis>,
}

impl GaussianLrtCache {
    pub fn new(channels: &EffectiveChannels, sigma_s_sq: f64, sigma_u_sq: f64) -> Result<Self> {
        if !(sigma_u_sq > 0.0 && sigma_u_sq.is_finite()) {
            return Err(Error::config(
                "sigma_u_sq",
                format!("Gaussian LRT needs positive noise power, got {sigma_u_sq}"),
            ));
        }
        if !(sigma_s_sq > 0.0) {
            return Err(Error::config("sigma_s_sq", "must be positive"));
        }
        let m = channels.n_antennas();
        let hypotheses = (0..channels.n_hypotheses())
            .map(|j| {
                let w = channels.w(j);
                let norm_sq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
                // Sigma^-1 = (I - c w w^H) / sigma_u^2, c = sigma_s^2 / (sigma_u^2 + sigma_s^2 |w|^2)
                let c = sigma_s_sq / (sigma_u_sq + sigma_s_sq * norm_sq);
                let mut sigma = vec![C64::new(0.0, 0.0); m * m];
                let mut sigma_inv = vec![C64::new(0.0, 0.0); m * m];
                for a in 0..m {
                    for b in 0..m {
                        let outer = w[a] * w[b].conj();
                        let eye = if a == b { 1.0 } else { 0.0 };
                        sigma[a * m + b] = outer * sigma_s_sq + eye * sigma_u_sq;
                        sigma_inv[a * m + b] = (C64::new(eye, 0.0) - outer * c) / sigma_u_sq;
                    }
                }
                let log_det = m as f64 * sigma_u_sq.ln() + (sigma_s_sq * norm_sq / sigma_u_sq).ln_1p();
                GaussianHypothesis {
                    sigma,
                    sigma_inv,
                    log_det,
                }
            })
            .collect();
        Ok(GaussianLrtCache {
            n_tags: channels.n_tags(),
            n_antennas: m,
            hypotheses,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }
}

/// Gaussian-source LRT:
/// `L_j = -K (M ln pi + ln det Sigma_j) - sum_k x_k^H Sigma_j^-1 x_k`.
///
/// The quadratic forms are evaluated as `K tr(Sigma_j^-1 R)` with the sample
/// covariance `R`, which is the same sum regrouped.
pub fn lrt_gaussian(obs: ObsBlock<'_>, cache: &GaussianLrtCache) -> Result<LrtDecision> {
    let m = cache.n_antennas;
    Error::check_len("observation antennas", m, obs.n_antennas())?;
    let k = obs.n_samples();
    // Unnormalized sample covariance S = sum_k x_k x_k^H.
    let mut s = vec![C64::new(0.0, 0.0); m * m];
    for a in 0..m {
        let xa = obs.antenna(a);
        for b in a..m {
            let xb = obs.antenna(b);
            let acc: C64 = xa.iter().zip(xb).map(|(p, q)| p * q.conj()).sum();
            s[a * m + b] = acc;
            s[b * m + a] = acc.conj();
        }
    }
    let base = -(k as f64) * m as f64 * PI.ln();
    let lls = cache
        .hypotheses
        .iter()
        .map(|hyp| {
            // tr(A S) = sum_ab A_ab S_ba; real for Hermitian A, S.
            let mut quad = 0.0;
            for a in 0..m {
                for b in 0..m {
                    quad += (hyp.sigma_inv[a * m + b] * s[b * m + a]).re;
                }
            }
            base - k as f64 * hyp.log_det - quad
        })
        .collect();
    Ok(LrtDecision::from_log_likelihoods(lls, cache.n_tags))
}

/// Known-symbol LRT for a modulated source:
/// `L_j = -K M ln(pi sigma_u^2) - (1/sigma_u^2) sum_k |x_k - w_j s_k|^2`.
pub fn lrt_constellation(
    obs: ObsBlock<'_>,
    ambient: &[C64],
    channels: &EffectiveChannels,
    sigma_u_sq: f64,
) -> Result<LrtDecision> {
    if !(sigma_u_sq > 0.0 && sigma_u_sq.is_finite()) {
        return Err(Error::config(
            "sigma_u_sq",
            format!("LRT needs positive noise power, got {sigma_u_sq}"),
        ));
    }
    let m = channels.n_antennas();
    let k = obs.n_samples();
    Error::check_len("observation antennas", m, obs.n_antennas())?;
    Error::check_len("ambient symbols", k, ambient.len())?;

    // |x - w s|^2 summed over k = sum|x|^2 - 2 Re(w^H y) + |w|^2 sum|s|^2, y = sum_k s_k* x_k
    let energy_s: f64 = ambient.iter().map(|s| s.norm_sqr()).sum();
    let mut energy_x = 0.0;
    let mut y = vec![C64::new(0.0, 0.0); m];
    for (a, ya) in y.iter_mut().enumerate() {
        let xa = obs.antenna(a);
        energy_x += xa.iter().map(|z| z.norm_sqr()).sum::<f64>();
        *ya = xa.iter().zip(ambient).map(|(x, s)| s.conj() * x).sum();
    }
    let base = -(k as f64) * m as f64 * (PI * sigma_u_sq).ln();
    let lls = (0..channels.n_hypotheses())
        .map(|j| {
            let w = channels.w(j);
            let cross: f64 = w.iter().zip(&y).map(|(wa, ya)| (wa.conj() * ya).re).sum();
            let wn: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            let residual = (energy_x - 2.0 * cross + wn * energy_s).max(0.0);
            base - residual / sigma_u_sq
        })
        .collect();
    Ok(LrtDecision::from_log_likelihoods(lls, channels.n_tags()))
}
