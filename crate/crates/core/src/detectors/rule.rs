use crate::channel::{EffectiveChannels, ObsBlock};
use crate::config::SourceKind;
use crate::{Error, Result, C64};

use super::{lrt_constellation, lrt_gaussian, GaussianLrtCache, LrtDecision};

/// Likelihood the receiver evaluates when the ambient source is Gaussian.
/// Modulated sources always use the known-symbol likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaussianLrtMode {
    /// Unknown symbols: `x_k ~ CN(0, sigma_s^2 w w^H + sigma_u^2 I)`.
    #[default]
    Covariance,
    /// The symbols `s_k` are known to the receiver, as for a modulated
    /// source: `x_k ~ CN(w s_k, sigma_u^2 I)`.
    KnownSymbols,
}

impl GaussianLrtMode {
    pub fn name(self) -> &'static str {
        match self {
            GaussianLrtMode::Covariance => "covariance",
            GaussianLrtMode::KnownSymbols => "known-symbols",
        }
    }
}

impl std::str::FromStr for GaussianLrtMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "covariance" | "cov" => Ok(GaussianLrtMode::Covariance),
            "known-symbols" | "known" | "coherent" => Ok(GaussianLrtMode::KnownSymbols),
            other => Err(Error::config(
                "gaussian_lrt",
                format!("unknown mode `{other}` (expected covariance or known-symbols)"),
            )),
        }
    }
}

impl std::fmt::Display for GaussianLrtMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The multi-hypothesis LRT for one frame's (true or estimated) channels.
#[derive(Debug, Clone)]
pub struct LrtDetector {
    channels: EffectiveChannels,
    sigma_u_sq: f64,
    covariance: Option<GaussianLrtCache>,
}

impl LrtDetector {
    pub fn new(
        channels: EffectiveChannels,
        source: SourceKind,
        gaussian_mode: GaussianLrtMode,
        sigma_s_sq: f64,
        sigma_u_sq: f64,
    ) -> Result<Self> {
        let covariance = if source == SourceKind::Gaussian && gaussian_mode == GaussianLrtMode::Covariance {
            Some(GaussianLrtCache::new(&channels, sigma_s_sq, sigma_u_sq)?)
        } else {
            None
        };
        Ok(LrtDetector {
            channels,
            sigma_u_sq,
            covariance,
        })
    }

    pub fn channels(&self) -> &EffectiveChannels {
        &self.channels
    }

    /// `ambient` is ignored by the covariance rule.
    pub fn detect(&self, obs: ObsBlock<'_>, ambient: &[C64]) -> Result<LrtDecision> {
        match &self.covariance {
            Some(cache) => lrt_gaussian(obs, cache),
            None => lrt_constellation(obs, ambient, &self.channels, self.sigma_u_sq),
        }
    }
}
