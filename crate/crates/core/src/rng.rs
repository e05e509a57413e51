//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and selected
//! by a 64-bit stream id, so any trial of a sweep can be regenerated from
//! `(seed, indices)` alone and trials can run in any order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result, C64};

#[derive(Debug, Clone)]
pub struct RngStream {
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { stream_id, rng }
    }

    /// Stream addressed by a tuple of indices (e.g. sweep point, trial,
    /// purpose). Distinct tuples give distinct stream ids.
    pub fn derived(seed: u64, indices: &[u64]) -> Self {
        RngStream::new(seed, stream_id_for(indices))
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bit(&mut self) -> bool {
        self.rng.next_u32() & 1 == 1
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One `CN(0, variance)` draw. `variance = 0` yields exact zeros while
    /// still consuming the stream, so noiseless runs stay aligned with noisy
    /// ones.
    pub fn complex_gaussian(&mut self, variance: f64) -> C64 {
        let scale = (variance / 2.0).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        C64::new(re * scale, im * scale)
    }

    /// `dim` independent `CN(0, variance)` components.
    pub fn sample_circular_gaussian(&mut self, dim: usize, variance: f64) -> Result<Vec<C64>> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::config("variance", format!("must be positive, got {variance}")));
        }
        Ok((0..dim).map(|_| self.complex_gaussian(variance)).collect())
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Access to the underlying generator for `rand` APIs.
    pub fn raw(&mut self) -> &mut impl RngCore {
        &mut self.rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_id_for(indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_replay() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let xa = a.sample_circular_gaussian(16, 1.0).unwrap();
        let xb = b.sample_circular_gaussian(16, 1.0).unwrap();
        let bits = |v: &[C64]| v.iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&xa), bits(&xb));
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 4);
        assert_ne!(a.uniform(), b.uniform());
        assert_ne!(stream_id_for(&[1, 2]), stream_id_for(&[2, 1]));
        assert_ne!(stream_id_for(&[0]), stream_id_for(&[0, 0]));
    }

    #[test]
    fn rejects_degenerate_variance() {
        let mut r = RngStream::new(0, 0);
        assert!(r.sample_circular_gaussian(4, 0.0).is_err());
        assert!(r.sample_circular_gaussian(4, -1.0).is_err());
    }

    #[test]
    fn unit_variance_moments() {
        let mut r = RngStream::new(11, 0);
        let dim = 4;
        let draws = 1_000_000;
        let mut power = vec![0.0; dim];
        // Empirical covariance, accumulated as a dim x dim complex matrix.
        let mut cov = vec![C64::new(0.0, 0.0); dim * dim];
        for _ in 0..draws {
            let x = r.sample_circular_gaussian(dim, 1.0).unwrap();
            for a in 0..dim {
                power[a] += x[a].norm_sqr();
                for b in 0..dim {
                    cov[a * dim + b] += x[a] * x[b].conj();
                }
            }
        }
        for p in power {
            let mean = p / draws as f64;
            assert!((0.995..=1.005).contains(&mean), "E|x|^2 = {mean}");
        }
        let mut err = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                let target = if a == b { 1.0 } else { 0.0 };
                err += (cov[a * dim + b] / draws as f64 - target).norm_sqr();
            }
        }
        let rel = err.sqrt() / (dim as f64).sqrt();
        assert!(rel < 0.01, "relative Frobenius error {rel}");
    }

    #[test]
    fn real_and_imaginary_parts_split_variance() {
        let mut r = RngStream::new(5, 9);
        let n = 200_000;
        let (mut re, mut im) = (0.0, 0.0);
        for _ in 0..n {
            let z = r.complex_gaussian(2.0);
            re += z.re * z.re;
            im += z.im * z.im;
        }
        assert!((re / n as f64 - 1.0).abs() < 0.02);
        assert!((im / n as f64 - 1.0).abs() < 0.02);
    }
}
