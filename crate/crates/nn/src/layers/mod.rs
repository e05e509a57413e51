//! Layers with explicit forward/backward passes.
//!
//! All spatial tensors are `B x C x H x W`, row-major.

mod batchnorm;
mod conv;
mod dense;
mod pool;

pub use batchnorm::BatchNorm2d;
pub use conv::Conv2d;
pub use dense::{Flatten, Linear, Relu};
pub use pool::AdaptiveAvgPool2d;

use crate::{NnError, Real, Result, Tensor};

/// Batch normalization uses batch statistics in `Train` and running
/// statistics in `Eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One element of a [`Sequential`](crate::Sequential) stack.
#[derive(Debug, Clone)]
pub enum Layer<F: Real> {
    Conv2d(Conv2d<F>),
    BatchNorm2d(BatchNorm2d<F>),
    Relu(Relu<F>),
    AdaptiveAvgPool2d(AdaptiveAvgPool2d),
    Flatten(Flatten),
    Linear(Linear<F>),
}

/// A persistent tensor of a layer and whether the optimizer updates it.
pub struct Param<'a, F> {
    pub name: &'static str,
    pub tensor: &'a Tensor<F>,
    pub trainable: bool,
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $e:expr) => {
        match $self {
            Layer::Conv2d($l) => $e,
            Layer::BatchNorm2d($l) => $e,
            Layer::Relu($l) => $e,
            Layer::AdaptiveAvgPool2d($l) => $e,
            Layer::Flatten($l) => $e,
            Layer::Linear($l) => $e,
        }
    };
}

impl<F: Real> Layer<F> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm2d(_) => "batchnorm2d",
            Layer::Relu(_) => "relu",
            Layer::AdaptiveAvgPool2d(_) => "adaptive_avg_pool2d",
            Layer::Flatten(_) => "flatten",
            Layer::Linear(_) => "linear",
        }
    }

    /// Forward pass that caches what the backward pass needs.
    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        match self {
            Layer::BatchNorm2d(l) => l.forward(x, mode),
            Layer::Conv2d(l) => l.forward(x),
            Layer::Relu(l) => l.forward(x),
            Layer::AdaptiveAvgPool2d(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::Linear(l) => l.forward(x),
        }
    }

    /// Evaluation-mode forward pass without side effects.
    pub fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        dispatch!(self, l => l.infer(x))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    /// Returns `None` if no forward pass has been cached.
    pub(crate) fn backward(&mut self, grad: &Tensor<F>) -> Option<Result<Tensor<F>>> {
        dispatch!(self, l => l.backward(grad))
    }

    pub fn params(&self) -> Vec<Param<'_, F>> {
        let p = |name, tensor, trainable| Param {
            name,
            tensor,
            trainable,
        };
        match self {
            Layer::Conv2d(l) => vec![p("weight", &l.weight, true)],
            Layer::BatchNorm2d(l) => vec![
                p("gamma", &l.gamma, true),
                p("beta", &l.beta, true),
                p("running_mean", &l.running_mean, false),
                p("running_var", &l.running_var, false),
            ],
            Layer::Linear(l) => vec![p("weight", &l.weight, true), p("bias", &l.bias, true)],
            _ => Vec::new(),
        }
    }

    /// Mutable access to all persistent tensors, in [`params`](Self::params)
    /// order, flagged as trainable or not.
    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<F>, bool)> {
        match self {
            Layer::Conv2d(l) => vec![("weight", &mut l.weight, true)],
            Layer::BatchNorm2d(l) => vec![
                ("gamma", &mut l.gamma, true),
                ("beta", &mut l.beta, true),
                ("running_mean", &mut l.running_mean, false),
                ("running_var", &mut l.running_var, false),
            ],
            Layer::Linear(l) => vec![("weight", &mut l.weight, true), ("bias", &mut l.bias, true)],
            _ => Vec::new(),
        }
    }

    pub(crate) fn clear_cache(&mut self) {
        dispatch!(self, l => l.clear_cache())
    }

    /// Same layer in another precision; caches are dropped.
    pub fn cast<G: Real>(&self) -> Layer<G> {
        match self {
            Layer::Conv2d(l) => Layer::Conv2d(l.cast()),
            Layer::BatchNorm2d(l) => Layer::BatchNorm2d(l.cast()),
            Layer::Relu(_) => Layer::Relu(Relu::new()),
            Layer::AdaptiveAvgPool2d(l) => Layer::AdaptiveAvgPool2d(l.cast()),
            Layer::Flatten(_) => Layer::Flatten(Flatten::new()),
            Layer::Linear(l) => Layer::Linear(l.cast()),
        }
    }
}

pub(crate) fn expect_rank4(op: &'static str, x: &Tensor<impl Real>, channels: Option<usize>) -> Result<[usize; 4]> {
    let s = x.shape();
    if s.len() != 4 || channels.is_some_and(|c| s[1] != c) {
        let c = channels.unwrap_or(s.get(1).copied().unwrap_or(0));
        return Err(NnError::shape(op, &[s.first().copied().unwrap_or(0), c, 0, 0], s));
    }
    Ok([s[0], s[1], s[2], s[3]])
}

/// Uniform `[-bound, bound]` initializer.
pub(crate) fn uniform<F: Real, R: rand::Rng + ?Sized>(rng: &mut R, n: usize, bound: f64) -> Vec<F> {
    (0..n)
        .map(|_| F::from_f64_lossy(rng.random_range(-bound..=bound)))
        .collect()
}
