use super::{expect_rank4, Mode};
use crate::{NnError, Real, Result, Tensor};

/// Per-channel batch normalization for `B x C x H x W` inputs.
///
/// Training normalizes with the biased batch variance and updates the
/// running statistics with the unbiased one, `r <- (1 - m) r + m s`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<F: Real> {
    channels: usize,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    pub eps: F,
    pub momentum: F,
    cache: Option<BnCache<F>>,
}

#[derive(Debug, Clone)]
struct BnCache<F> {
    xhat: Vec<F>,
    inv_std: Vec<F>,
    shape: [usize; 4],
    mode: Mode,
}

impl<F: Real> BatchNorm2d<F> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            channels,
            gamma: Tensor::full(&[channels], F::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], F::one()),
            eps: F::from_f64_lossy(1e-5),
            momentum: F::from_f64_lossy(0.1),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Per-channel `(mean, inv_std)` for the given mode. Training-mode
    /// statistics come from `x`; the unbiased batch variance is returned too.
    fn stats(&self, x: &Tensor<F>, shape: [usize; 4], mode: Mode) -> Result<(Vec<F>, Vec<F>, Vec<F>)> {
        let [b, c, h, w] = shape;
        let p = h * w;
        let count = b * p;
        match mode {
            Mode::Eval => {
                let mean = self.running_mean.data().to_vec();
                let inv = self
                    .running_var
                    .data()
                    .iter()
                    .map(|&v| F::one() / (v + self.eps).sqrt())
                    .collect();
                Ok((mean, inv, Vec::new()))
            }
            Mode::Train => {
                if count < 2 {
                    return Err(NnError::shape("batchnorm2d (train needs >= 2 values per channel)", &[2], &[count]));
                }
                let n = F::from_usize(count).expect("count");
                let mut mean = vec![F::zero(); c];
                let mut var = vec![F::zero(); c];
                for ci in 0..c {
                    let mut s = F::zero();
                    for bi in 0..b {
                        s += x.data()[(bi * c + ci) * p..(bi * c + ci + 1) * p].iter().copied().sum();
                    }
                    let m = s / n;
                    let mut ss = F::zero();
                    for bi in 0..b {
                        for &v in &x.data()[(bi * c + ci) * p..(bi * c + ci + 1) * p] {
                            ss += (v - m) * (v - m);
                        }
                    }
                    mean[ci] = m;
                    var[ci] = ss / n;
                }
                let inv = var.iter().map(|&v| F::one() / (v + self.eps).sqrt()).collect();
                let unbiased = var.iter().map(|&v| v * n / (n - F::one())).collect();
                Ok((mean, inv, unbiased))
            }
        }
    }

    fn normalize(&self, x: &Tensor<F>, shape: [usize; 4], mean: &[F], inv: &[F]) -> (Vec<F>, Vec<F>) {
        let [b, c, h, w] = shape;
        let p = h * w;
        let mut xhat = vec![F::zero(); x.len()];
        let mut y = vec![F::zero(); x.len()];
        for bi in 0..b {
            for ci in 0..c {
                let (g, be) = (self.gamma.data()[ci], self.beta.data()[ci]);
                for i in (bi * c + ci) * p..(bi * c + ci + 1) * p {
                    let v = (x.data()[i] - mean[ci]) * inv[ci];
                    xhat[i] = v;
                    y[i] = g * v + be;
                }
            }
        }
        (xhat, y)
    }

    pub(crate) fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let shape = expect_rank4("batchnorm2d", x, Some(self.channels))?;
        let (mean, inv, unbiased) = self.stats(x, shape, mode)?;
        let (xhat, y) = self.normalize(x, shape, &mean, &inv);
        if mode == Mode::Train {
            let m = self.momentum;
            for ci in 0..self.channels {
                let rm = &mut self.running_mean.data_mut()[ci];
                *rm = (F::one() - m) * *rm + m * mean[ci];
                let rv = &mut self.running_var.data_mut()[ci];
                *rv = (F::one() - m) * *rv + m * unbiased[ci];
            }
        }
        self.cache = Some(BnCache {
            xhat,
            inv_std: inv,
            shape,
            mode,
        });
        Tensor::new(shape.to_vec(), y)
    }

    pub(crate) fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let shape = expect_rank4("batchnorm2d", x, Some(self.channels))?;
        let (mean, inv, _) = self.stats(x, shape, Mode::Eval)?;
        Tensor::new(shape.to_vec(), self.normalize(x, shape, &mean, &inv).1)
    }

    pub(crate) fn backward(&mut self, grad: &Tensor<F>) -> Option<Result<Tensor<F>>> {
        let cache = self.cache.as_ref()?;
        let [b, c, h, w] = cache.shape;
        if grad.shape() != cache.shape {
            return Some(Err(NnError::shape("batchnorm2d backward", &cache.shape, grad.shape())));
        }
        let p = h * w;
        let n = F::from_usize(b * p).expect("count");
        let dy = grad.data();
        let mut dgamma = vec![F::zero(); c];
        let mut dbeta = vec![F::zero(); c];
        for bi in 0..b {
            for ci in 0..c {
                for i in (bi * c + ci) * p..(bi * c + ci + 1) * p {
                    dgamma[ci] += dy[i] * cache.xhat[i];
                    dbeta[ci] += dy[i];
                }
            }
        }
        let mut dx = vec![F::zero(); dy.len()];
        for bi in 0..b {
            for ci in 0..c {
                let g = self.gamma.data()[ci] * cache.inv_std[ci];
                for i in (bi * c + ci) * p..(bi * c + ci + 1) * p {
                    dx[i] = match cache.mode {
                        Mode::Eval => g * dy[i],
                        Mode::Train => g * (dy[i] - dbeta[ci] / n - cache.xhat[i] * dgamma[ci] / n),
                    };
                }
            }
        }
        for (acc, d) in self.gamma.grad_mut().iter_mut().zip(&dgamma) {
            *acc += *d;
        }
        for (acc, d) in self.beta.grad_mut().iter_mut().zip(&dbeta) {
            *acc += *d;
        }
        Some(Tensor::new(cache.shape.to_vec(), dx))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub(crate) fn cast<G: Real>(&self) -> BatchNorm2d<G> {
        BatchNorm2d {
            channels: self.channels,
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self.running_mean.cast(),
            running_var: self.running_var.cast(),
            eps: G::from_f64_lossy(self.eps.to_f64().expect("finite")),
            momentum: G::from_f64_lossy(self.momentum.to_f64().expect("finite")),
            cache: None,
        }
    }
}
