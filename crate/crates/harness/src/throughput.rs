//! Normalized per-tag throughput `b_pc * eta_data * (1 - BER)`.

use std::fmt;
use std::str::FromStr;

use crate::method::Method;
use crate::sweep::BerRow;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Information bits per tag symbol.
    pub b_pc: f64,
    /// Fraction of tag symbols carrying data.
    pub eta_data: f64,
}

impl SchemeParams {
    /// Pilot-based framing: one bit per symbol, `1 - P/T` payload.
    pub fn pilot_framed(frame_len: usize, n_pilots: usize) -> Self {
        SchemeParams {
            b_pc: 1.0,
            eta_data: 1.0 - n_pilots as f64 / frame_len as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Learned detectors with `T = 160`, `P = 32`.
    Ours,
    /// Perfect-CSI LRT under the same framing.
    Lrt,
    /// Pilot-free non-coherent FM0/Miller-coded multi-tag detection: half
    /// a bit per symbol, no pilot overhead.
    Reference,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ours => "ours",
            Scheme::Lrt => "lrt",
            Scheme::Reference => "reference",
        }
    }

    pub fn params(self) -> SchemeParams {
        match self {
            Scheme::Ours | Scheme::Lrt => SchemeParams { b_pc: 1.0, eta_data: 0.8 },
            Scheme::Reference => SchemeParams { b_pc: 0.5, eta_data: 1.0 },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Scheme::Ours),
            "lrt" => Ok(Scheme::Lrt),
            "reference" | "ref" => Ok(Scheme::Reference),
            other => Err(HarnessError::invalid("scheme", format!("unknown scheme `{other}` (ours, lrt, reference)"))),
        }
    }
}

/// Throughput of the pilot-free reference detector for N = 2 and N = 3 at
/// SNR -5, 0, ..., 25 dB, as published for that scheme.
pub const REFERENCE_SNR_DB: [f64; 7] = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0];
pub const REFERENCE_THROUGHPUT_N2: [f64; 7] = [0.385, 0.453, 0.484, 0.495, 0.498, 0.499, 0.500];
pub const REFERENCE_THROUGHPUT_N3: [f64; 7] = [0.325, 0.409, 0.460, 0.481, 0.493, 0.498, 0.499];

pub fn reference_throughput(n_tags: usize, snr_db: f64) -> Option<f64> {
    let table = match n_tags {
        2 => &REFERENCE_THROUGHPUT_N2,
        3 => &REFERENCE_THROUGHPUT_N3,
        _ => return None,
    };
    REFERENCE_SNR_DB.iter().position(|&s| s == snr_db).map(|i| table[i])
}

pub fn throughput(ber: f64, p: SchemeParams) -> f64 {
    p.b_pc * p.eta_data * (1.0 - ber)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputEntry {
    pub method: Method,
    pub axis_value: f64,
    pub n_tags: usize,
    pub b_pc: f64,
    pub eta_data: f64,
    pub ber: f64,
    pub t_tag: f64,
}

/// One entry per simulated row; bound rows are skipped.
pub fn compute_throughput(rows: &[BerRow], params: SchemeParams) -> Result<Vec<ThroughputEntry>> {
    rows.iter()
        .filter(|r| !r.method.is_bound())
        .map(|r| {
            if !(0.0..=1.0).contains(&r.ber) {
                return Err(HarnessError::invalid("ber", format!("{} is outside [0, 1]", r.ber)));
            }
            Ok(ThroughputEntry {
                method: r.method,
                axis_value: r.axis_value,
                n_tags: r.n_tags,
                b_pc: params.b_pc,
                eta_data: params.eta_data,
                ber: r.ber,
                t_tag: throughput(r.ber, params),
            })
        })
        .collect()
}
