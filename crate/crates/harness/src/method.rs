use std::fmt;
use std::str::FromStr;

use crate::{HarnessError, Result};

/// Detectors and analytical bounds a sweep can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    LrtPerfectCsi,
    EnergyDetector,
    EmbedNet,
    ChanEstNet,
    PepUnion,
    PepChernoff,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::LrtPerfectCsi,
        Method::EnergyDetector,
        Method::EmbedNet,
        Method::ChanEstNet,
        Method::PepUnion,
        Method::PepChernoff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::LrtPerfectCsi => "lrt",
            Method::EnergyDetector => "ed",
            Method::EmbedNet => "embednet",
            Method::ChanEstNet => "chanestnet",
            Method::PepUnion => "pep-union",
            Method::PepChernoff => "pep-chernoff",
        }
    }

    /// Bound rows carry an analytical value instead of counted errors.
    pub fn is_bound(self) -> bool {
        matches!(self, Method::PepUnion | Method::PepChernoff)
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Method::EmbedNet | Method::ChanEstNet)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "lrt" | "lrt-perfect-csi" => Method::LrtPerfectCsi,
            "ed" | "energy" => Method::EnergyDetector,
            "embednet" => Method::EmbedNet,
            "chanestnet" => Method::ChanEstNet,
            "pep-union" | "union" => Method::PepUnion,
            "pep-chernoff" | "chernoff" => Method::PepChernoff,
            other => {
                return Err(HarnessError::invalid(
                    "methods",
                    format!("unknown method `{other}` (expected lrt, ed, embednet, chanestnet, pep-union, pep-chernoff)"),
                ))
            }
        })
    }
}

/// Comma-separated method list, duplicates removed, order kept.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(HarnessError::invalid("methods", "empty method list"));
    }
    Ok(out)
}
