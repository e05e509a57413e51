//! Input features computed from raw observations.

use ambc_core::channel::ObsBlock;
use ambc_core::C64;

/// Sample covariance `R = X X^H / K` of one tag symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFeature {
    n_antennas: usize,
    /// Row-major `M x M`.
    pub r: Vec<C64>,
}

impl CovarianceFeature {
    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.r[a * self.n_antennas + b]
    }

    /// Network input `[Re R, Im R]`, shape `2 x M x M`.
    pub fn to_input(&self) -> Vec<f32> {
        self.r
            .iter()
            .map(|z| z.re as f32)
            .chain(self.r.iter().map(|z| z.im as f32))
            .collect()
    }
}

pub fn covariance_feature(obs: ObsBlock<'_>) -> CovarianceFeature {
    let m = obs.n_antennas();
    let k = obs.n_samples() as f64;
    let mut r = vec![C64::new(0.0, 0.0); m * m];
    for a in 0..m {
        let xa = obs.antenna(a);
        for b in a..m {
            let xb = obs.antenna(b);
            let s: C64 = xa.iter().zip(xb).map(|(p, q)| p * q.conj()).sum::<C64>() / k;
            r[a * m + b] = s;
            r[b * m + a] = s.conj();
        }
        // Exact real diagonal.
        r[a * m + a].im = 0.0;
    }
    CovarianceFeature { n_antennas: m, r }
}
