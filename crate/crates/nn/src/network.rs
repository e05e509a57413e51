use crate::layers::{Layer, Mode};
use crate::{NnError, Real, Result, Tensor};

/// An ordered stack of named layers.
#[derive(Debug, Clone)]
pub struct Sequential<F: Real = f32> {
    layers: Vec<(String, Layer<F>)>,
}

impl<F: Real> Default for Sequential<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Sequential<F> {
    pub fn new() -> Self {
        Sequential { layers: Vec::new() }
    }

    pub fn push(mut self, name: impl Into<String>, layer: Layer<F>) -> Self {
        self.layers.push((name.into(), layer));
        self
    }

    pub fn layers(&self) -> impl Iterator<Item = (&str, &Layer<F>)> {
        self.layers.iter().map(|(n, l)| (n.as_str(), l))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = (&str, &mut Layer<F>)> {
        self.layers.iter_mut().map(|(n, l)| (n.as_str(), l))
    }

    /// Forward pass caching activations for [`backward`](Self::backward).
    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let mut cur = None;
        for (_, layer) in &mut self.layers {
            let next = layer.forward(cur.as_ref().unwrap_or(x), mode)?;
            next.debug_check_finite(layer.kind());
            cur = Some(next);
        }
        Ok(cur.unwrap_or_else(|| x.clone()))
    }

    /// Evaluation-mode forward pass through `&self`; nothing is mutated.
    pub fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let mut cur = None;
        for (_, layer) in &self.layers {
            let next = layer.infer(cur.as_ref().unwrap_or(x))?;
            next.debug_check_finite(layer.kind());
            cur = Some(next);
        }
        Ok(cur.unwrap_or_else(|| x.clone()))
    }

    /// Back-propagates `grad` (gradient of the loss w.r.t. the last forward
    /// output), accumulating into parameter gradients. Returns the gradient
    /// w.r.t. the network input.
    pub fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let mut cur = grad.clone();
        for (name, layer) in self.layers.iter_mut().rev() {
            cur = layer
                .backward(&cur)
                .ok_or_else(|| NnError::BackwardBeforeForward { layer: name.clone() })??;
            cur.debug_check_finite(layer.kind());
        }
        Ok(cur)
    }

    /// Drops cached activations so that a stale cache cannot be reused.
    pub fn clear_cache(&mut self) {
        for (_, l) in &mut self.layers {
            l.clear_cache();
        }
    }

    pub fn zero_grad(&mut self) {
        for (_, l) in &mut self.layers {
            for (_, t, _) in l.params_mut() {
                t.zero_grad();
            }
        }
    }

    /// Every persistent tensor as `("layer.param", tensor, trainable)`.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<F>, bool)> {
        self.layers
            .iter()
            .flat_map(|(name, l)| {
                l.params()
                    .into_iter()
                    .map(move |p| (format!("{name}.{}", p.name), p.tensor, p.trainable))
            })
            .collect()
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>, bool)> {
        self.layers
            .iter_mut()
            .flat_map(|(name, l)| {
                let name = name.clone();
                l.params_mut()
                    .into_iter()
                    .map(move |(p, t, tr)| (format!("{name}.{p}"), t, tr))
            })
            .collect()
    }

    /// Trainable tensors in a fixed order, for the optimizer.
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.named_tensors_mut()
            .into_iter()
            .filter(|(_, _, tr)| *tr)
            .map(|(_, t, _)| t)
            .collect()
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.named_tensors().iter().filter(|(_, _, tr)| *tr).map(|(_, t, _)| t.len()).sum()
    }

    /// FNV-1a over the bit patterns of every persistent tensor.
    pub fn parameter_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (name, t, _) in self.named_tensors() {
            for byte in name.bytes() {
                h = (h ^ byte as u64).wrapping_mul(0x100_0000_01b3);
            }
            for v in t.data() {
                let bits = v.to_f64().expect("finite").to_bits();
                h = (h ^ bits).wrapping_mul(0x100_0000_01b3);
            }
        }
        h
    }

    pub fn cast<G: Real>(&self) -> Sequential<G> {
        Sequential {
            layers: self.layers.iter().map(|(n, l)| (n.clone(), l.cast())).collect(),
        }
    }
}
