use crate::{NnError, Real, Result, Tensor};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<F: Real = f32> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> AdamState<F> {
    /// `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr: F::from_f64_lossy(lr),
            beta1: F::from_f64_lossy(0.9),
            beta2: F::from_f64_lossy(0.999),
            eps: F::from_f64_lossy(1e-8),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of every tensor from its accumulated gradient. Tensors
    /// without a gradient buffer are treated as having zero gradient.
    pub fn step(&mut self, params: &mut [&mut Tensor<F>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![F::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(NnError::shape("adam parameter list", &[self.m.len()], &[params.len()]));
        }
        for (i, p) in params.iter().enumerate() {
            if self.m[i].len() != p.len() {
                return Err(NnError::shape("adam parameter", &[self.m[i].len()], &[p.len()]));
            }
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = F::one() - self.beta1.powi(t);
        let c2 = F::one() - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let Some(grad) = p.grad().map(<[F]>::to_vec) else {
                continue;
            };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (F::one() - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (F::one() - self.beta2) * g * g;
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                *w -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
