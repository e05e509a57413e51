//! Scenario parameters.

use crate::{Error, Result};

/// Largest supported number of tags. The hypothesis space grows as `2^N`.
pub const MAX_TAGS: usize = 16;

/// Statistical model of the ambient RF source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    /// Circularly symmetric complex Gaussian symbols, `CN(0, sigma_s^2)`.
    Gaussian,
    /// Equiprobable QPSK symbols.
    Qpsk,
    /// Equiprobable square 16-QAM symbols.
    Qam16,
}

impl SourceKind {
    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Gaussian => "gaussian",
            SourceKind::Qpsk => "qpsk",
            SourceKind::Qam16 => "qam16",
        }
    }

    pub fn is_modulated(self) -> bool {
        !matches!(self, SourceKind::Gaussian)
    }
}

impl std::str::FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" => Ok(SourceKind::Gaussian),
            "qpsk" => Ok(SourceKind::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(SourceKind::Qam16),
            other => Err(Error::config(
                "source",
                format!("unknown source `{other}` (expected gaussian, qpsk or qam16)"),
            )),
        }
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Distribution of the source-to-tag channels `f_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ForwardFading {
    /// `f_i ~ CN(0, 1)`.
    #[default]
    Rayleigh,
    /// `f_i = e^{j phi}` with uniform phase: the tag sits at a fixed
    /// distance from the source and only the carrier phase is random.
    /// `E|f_i|^2 = 1` as in the Rayleigh case, so `zeta` keeps its meaning.
    PhaseOnly,
}

impl ForwardFading {
    pub fn name(self) -> &'static str {
        match self {
            ForwardFading::Rayleigh => "rayleigh",
            ForwardFading::PhaseOnly => "phase-only",
        }
    }
}

impl std::str::FromStr for ForwardFading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(ForwardFading::Rayleigh),
            "phase-only" | "phase" | "unit" => Ok(ForwardFading::PhaseOnly),
            other => Err(Error::config(
                "forward_fading",
                format!("unknown model `{other}` (expected rayleigh or phase-only)"),
            )),
        }
    }
}

impl std::fmt::Display for ForwardFading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// All parameters of one simulated scenario.
///
/// `snr_db = +inf` is accepted as a noiseless sentinel and `zeta_db = -inf`
/// switches a tag's reflection off entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of tags `N`.
    pub n_tags: usize,
    /// Reader antennas `M`.
    pub n_antennas: usize,
    /// Ambient samples per tag symbol `K` (source-to-tag ratio).
    pub str_samples: usize,
    /// Tag symbols per frame `T`.
    pub frame_len: usize,
    /// Pilot symbols at the head of each frame `P`.
    pub n_pilots: usize,
    /// Per-tag backscatter-to-direct power ratio in dB.
    pub zeta_db: Vec<f64>,
    /// Direct-path SNR in dB.
    pub snr_db: f64,
    /// Ambient source power.
    pub sigma_s_sq: f64,
    pub source: SourceKind,
    pub forward_fading: ForwardFading,
    pub seed: u64,
}

impl SystemConfig {
    /// The reference scenario: `M = 4`, `K = 20`, `T = 160`, `P = 32`,
    /// every tag at -20 dB relative strength, trained/evaluated at 20 dB.
    pub fn reference(n_tags: usize, source: SourceKind) -> Self {
        SystemConfig {
            n_tags,
            n_antennas: 4,
            str_samples: 20,
            frame_len: 160,
            n_pilots: 32,
            zeta_db: vec![-20.0; n_tags],
            snr_db: 20.0,
            sigma_s_sq: 1.0,
            source,
            forward_fading: ForwardFading::Rayleigh,
            seed: 0,
        }
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tags == 0 || self.n_tags > MAX_TAGS {
            return Err(Error::config(
                "n_tags",
                format!("must be in 1..={MAX_TAGS}, got {}", self.n_tags),
            ));
        }
        if self.n_antennas == 0 {
            return Err(Error::config("n_antennas", "must be positive"));
        }
        if self.str_samples == 0 {
            return Err(Error::config("str_samples", "must be positive"));
        }
        if self.frame_len == 0 {
            return Err(Error::config("frame_len", "must be positive"));
        }
        if self.n_pilots >= self.frame_len {
            return Err(Error::config(
                "n_pilots",
                format!(
                    "must be smaller than frame_len ({} >= {})",
                    self.n_pilots, self.frame_len
                ),
            ));
        }
        if self.zeta_db.len() != self.n_tags {
            return Err(Error::config(
                "zeta_db",
                format!("expected {} entries, got {}", self.n_tags, self.zeta_db.len()),
            ));
        }
        if let Some(z) = self.zeta_db.iter().find(|z| z.is_nan() || **z == f64::INFINITY) {
            return Err(Error::config("zeta_db", format!("not a usable dB value: {z}")));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::config("snr_db", format!("not a usable dB value: {}", self.snr_db)));
        }
        if !(self.sigma_s_sq > 0.0 && self.sigma_s_sq.is_finite()) {
            return Err(Error::config("sigma_s_sq", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn n_hypotheses(&self) -> usize {
        1 << self.n_tags
    }

    pub fn data_len(&self) -> usize {
        self.frame_len - self.n_pilots
    }

    /// Noise power per antenna, `sigma_s^2 / 10^(SNR/10)`. Zero for the
    /// `+inf` sentinel.
    pub fn noise_var(&self) -> f64 {
        self.sigma_s_sq / db_to_linear(self.snr_db)
    }

    /// Tag reflection amplitudes `alpha_i = sqrt(10^(zeta_i/10))`.
    pub fn alphas(&self) -> Vec<f64> {
        self.zeta_db.iter().map(|&z| db_to_linear(z).sqrt()).collect()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
