use std::fmt;
use std::str::FromStr;

use ambc_core::config::{ForwardFading, SystemConfig};
use ambc_core::detectors::GaussianLrtMode;

use crate::{HarnessError, Result};

/// Variance model of the energy detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdVariance {
    /// Gaussian-source variance for every source.
    #[default]
    Stated,
    /// Variance matched to the source's fourth moment.
    SourceMatched,
}

impl EdVariance {
    pub fn name(self) -> &'static str {
        match self {
            EdVariance::Stated => "stated",
            EdVariance::SourceMatched => "source-matched",
        }
    }
}

impl FromStr for EdVariance {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stated" | "gaussian" => Ok(EdVariance::Stated),
            "source-matched" | "matched" => Ok(EdVariance::SourceMatched),
            other => Err(HarnessError::invalid("ed-variance", format!("unknown model `{other}`"))),
        }
    }
}

impl fmt::Display for EdVariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Detector-side modelling choices that are not part of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectorOptions {
    pub gaussian_lrt: GaussianLrtMode,
    pub ed_variance: EdVariance,
}

/// Named bundle of channel and detector modelling choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// Rayleigh forward links, covariance LRT for Gaussian sources,
    /// Gaussian-source energy variance.
    #[default]
    Literal,
    /// Unit-modulus forward links, known-symbol LRT for every source,
    /// source-matched energy variance. Reproduces the published curves.
    Calibrated,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Literal => "literal",
            Profile::Calibrated => "calibrated",
        }
    }

    pub fn fading(self) -> ForwardFading {
        match self {
            Profile::Literal => ForwardFading::Rayleigh,
            Profile::Calibrated => ForwardFading::PhaseOnly,
        }
    }

    pub fn options(self) -> DetectorOptions {
        match self {
            Profile::Literal => DetectorOptions::default(),
            Profile::Calibrated => DetectorOptions {
                gaussian_lrt: GaussianLrtMode::KnownSymbols,
                ed_variance: EdVariance::SourceMatched,
            },
        }
    }

    pub fn apply(self, cfg: &mut SystemConfig) {
        cfg.forward_fading = self.fading();
    }

    /// One-line description for logs and reports.
    pub fn describe(self) -> String {
        let o = self.options();
        format!(
            "profile {}: forward fading {}, Gaussian-source LRT {}, ED variance {}",
            self.name(),
            self.fading(),
            o.gaussian_lrt,
            o.ed_variance
        )
    }
}

impl FromStr for Profile {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Profile::Literal),
            "calibrated" => Ok(Profile::Calibrated),
            other => Err(HarnessError::invalid("profile", format!("unknown profile `{other}` (literal, calibrated)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
