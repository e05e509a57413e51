use std::marker::PhantomData;

use super::uniform;
use crate::real::{gemm, MatRef};
use crate::{NnError, Real, Result, Tensor};

/// Fully connected layer `y = x W^T + b` on `B x in` inputs.
#[derive(Debug, Clone)]
pub struct Linear<F: Real> {
    in_features: usize,
    out_features: usize,
    /// `out x in`.
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
    cache: Option<Tensor<F>>,
}

impl<F: Real> Linear<F> {
    /// Weights `U(-1/sqrt(in), 1/sqrt(in))`, zero bias.
    pub fn new<R: rand::Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        Linear {
            in_features,
            out_features,
            weight: Tensor::new(
                vec![out_features, in_features],
                uniform(rng, in_features * out_features, bound),
            )
            .expect("consistent shape"),
            bias: Tensor::zeros(&[out_features]),
            cache: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn out_features(&self) -> usize {
        self.out_features
    }

    pub(crate) fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.in_features {
            return Err(NnError::shape("linear", &[s.first().copied().unwrap_or(0), self.in_features], s));
        }
        let b = s[0];
        let mut y: Vec<F> = (0..b).flat_map(|_| self.bias.data().iter().copied()).collect();
        gemm(
            MatRef::new(x.data(), b, self.in_features),
            MatRef::new(self.weight.data(), self.out_features, self.in_features).t(),
            F::one(),
            &mut y,
        );
        Tensor::new(vec![b, self.out_features], y)
    }

    pub(crate) fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub(crate) fn backward(&mut self, grad: &Tensor<F>) -> Option<Result<Tensor<F>>> {
        let x = self.cache.as_ref()?;
        let b = x.shape()[0];
        if grad.shape() != [b, self.out_features] {
            return Some(Err(NnError::shape("linear backward", &[b, self.out_features], grad.shape())));
        }
        let dy = MatRef::new(grad.data(), b, self.out_features);
        let (wdata, wgrad) = self.weight.data_and_grad_mut();
        gemm(dy.t(), MatRef::new(x.data(), b, self.in_features), F::one(), wgrad);
        let bgrad = self.bias.grad_mut();
        for row in grad.data().chunks_exact(self.out_features) {
            for (acc, g) in bgrad.iter_mut().zip(row) {
                *acc += *g;
            }
        }
        let mut dx = vec![F::zero(); b * self.in_features];
        gemm(
            dy,
            MatRef::new(wdata, self.out_features, self.in_features),
            F::zero(),
            &mut dx,
        );
        Some(Tensor::new(vec![b, self.in_features], dx))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub(crate) fn cast<G: Real>(&self) -> Linear<G> {
        Linear {
            in_features: self.in_features,
            out_features: self.out_features,
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            cache: None,
        }
    }
}

/// Element-wise `max(x, 0)`. The subgradient at 0 is taken as 0.
#[derive(Debug, Clone)]
pub struct Relu<F> {
    mask: Option<(Vec<bool>, Vec<usize>)>,
    _f: PhantomData<F>,
}

impl<F: Real> Default for Relu<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Relu<F> {
    pub fn new() -> Self {
        Relu {
            mask: None,
            _f: PhantomData,
        }
    }

    pub(crate) fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let y = x.data().iter().map(|&v| if v > F::zero() { v } else { F::zero() }).collect();
        Tensor::new(x.shape().to_vec(), y)
    }

    pub(crate) fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.mask = Some((x.data().iter().map(|&v| v > F::zero()).collect(), x.shape().to_vec()));
        self.infer(x)
    }

    pub(crate) fn backward(&mut self, grad: &Tensor<F>) -> Option<Result<Tensor<F>>> {
        let (mask, shape) = self.mask.as_ref()?;
        if grad.shape() != shape.as_slice() {
            return Some(Err(NnError::shape("relu backward", shape, grad.shape())));
        }
        let dx = grad
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &m)| if m { g } else { F::zero() })
            .collect();
        Some(Tensor::new(shape.clone(), dx))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.mask = None;
    }
}

/// `B x ...` to `B x (product of the rest)`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    cache: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Flatten { cache: None }
    }

    pub(crate) fn infer<F: Real>(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let b = x.batch();
        let rest = if b == 0 { 0 } else { x.len() / b };
        x.clone().reshape(&[b, rest])
    }

    pub(crate) fn forward<F: Real>(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.cache = Some(x.shape().to_vec());
        self.infer(x)
    }

    pub(crate) fn backward<F: Real>(&mut self, grad: &Tensor<F>) -> Option<Result<Tensor<F>>> {
        let shape = self.cache.as_ref()?;
        Some(grad.clone().reshape(shape))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }
}
