//! Central finite-difference checks of the hand-written backward passes.
//!
//! The scalar loss is `L = sum(y * R)` for a fixed random `R`, so the
//! upstream gradient is `R` itself and any error is in the layers.

use rand::{Rng, SeedableRng};

use crate::layers::Mode;
use crate::{Result, Sequential, Tensor};

/// Agreement between analytic and numeric gradients for one tensor.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub name: String,
    /// Entries compared.
    pub checked: usize,
    /// `|a - n| / max(|a|, |n|)` over the compared entries (vector norms).
    pub rel_error: f64,
}

/// Which entries of each parameter tensor to perturb.
#[derive(Debug, Clone, Copy)]
pub enum Coverage {
    All,
    /// At most `per_tensor` entries, chosen at random; smaller tensors are
    /// checked in full.
    Sample { per_tensor: usize, seed: u64 },
}

struct Probe {
    net: Sequential<f64>,
    x: Tensor<f64>,
    r: Vec<f64>,
    mode: Mode,
}

impl Probe {
    fn new(net: &Sequential<f64>, x: &Tensor<f64>, mode: Mode, seed: u64) -> Result<Self> {
        let mut net = net.clone();
        let y = net.forward(x, mode)?;
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let r = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Ok(Probe {
            net,
            x: x.clone(),
            r,
            mode,
        })
    }

    fn loss(&self, net: &Sequential<f64>, x: &Tensor<f64>) -> Result<f64> {
        // Training-mode BN updates running statistics, which never feed back
        // into a training-mode output; evaluate on a scratch copy.
        let y = match self.mode {
            Mode::Train => net.clone().forward(x, Mode::Train)?,
            Mode::Eval => net.infer(x)?,
        };
        Ok(y.data().iter().zip(&self.r).map(|(a, b)| a * b).sum())
    }

    fn analytic(&self) -> Result<(Sequential<f64>, Tensor<f64>)> {
        let mut net = self.net.clone();
        net.zero_grad();
        let y = net.forward(&self.x, self.mode)?;
        let dx = net.backward(&Tensor::new(y.shape().to_vec(), self.r.clone())?)?;
        Ok((net, dx))
    }
}

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(n.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Per-tensor comparison for every trainable parameter.
pub fn check_parameters(
    net: &Sequential<f64>,
    x: &Tensor<f64>,
    mode: Mode,
    h: f64,
    coverage: Coverage,
) -> Result<Vec<GradReport>> {
    let probe = Probe::new(net, x, mode, 0x5eed)?;
    let (with_grads, _) = probe.analytic()?;
    let analytic: Vec<(String, Vec<f64>)> = with_grads
        .named_tensors()
        .into_iter()
        .filter(|(_, _, tr)| *tr)
        .map(|(n, t, _)| (n, t.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()])))
        .collect();
    let mut reports = Vec::new();
    for (ti, (name, grad)) in analytic.iter().enumerate() {
        let indices: Vec<usize> = match coverage {
            Coverage::All => (0..grad.len()).collect(),
            Coverage::Sample { per_tensor, seed } if grad.len() > per_tensor => {
                let mut rng = rand::rngs::StdRng::seed_from_u64(seed ^ ti as u64);
                (0..per_tensor).map(|_| rng.random_range(0..grad.len())).collect()
            }
            Coverage::Sample { .. } => (0..grad.len()).collect(),
        };
        let mut a = Vec::with_capacity(indices.len());
        let mut n = Vec::with_capacity(indices.len());
        for &i in &indices {
            let eval = |delta: f64| -> Result<f64> {
                let mut p = probe.net.clone();
                let mut params: Vec<_> = p.named_tensors_mut().into_iter().filter(|(_, _, tr)| *tr).collect();
                params[ti].1.data_mut()[i] += delta;
                drop(params);
                probe.loss(&p, &probe.x)
            };
            let num = (eval(h)? - eval(-h)?) / (2.0 * h);
            a.push(grad[i]);
            n.push(num);
        }
        reports.push(GradReport {
            name: name.clone(),
            checked: indices.len(),
            rel_error: rel_error(&a, &n),
        });
    }
    Ok(reports)
}

/// Gradient w.r.t. the network input, every entry.
pub fn check_input(net: &Sequential<f64>, x: &Tensor<f64>, mode: Mode, h: f64) -> Result<GradReport> {
    let probe = Probe::new(net, x, mode, 0x1a7e)?;
    let (_, dx) = probe.analytic()?;
    let mut n = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        n.push((probe.loss(&probe.net, &xp)? - probe.loss(&probe.net, &xm)?) / (2.0 * h));
    }
    Ok(GradReport {
        name: "input".into(),
        checked: x.len(),
        rel_error: rel_error(dx.data(), &n),
    })
}

/// Directional derivative along one random direction through all trainable
/// parameters at once: `(L(t + h d) - L(t - h d)) / 2h` against `g . d`.
pub fn check_direction(net: &Sequential<f64>, x: &Tensor<f64>, mode: Mode, h: f64, seed: u64) -> Result<GradReport> {
    let probe = Probe::new(net, x, mode, 0xd1ec)?;
    let (with_grads, _) = probe.analytic()?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let grads: Vec<Vec<f64>> = with_grads
        .named_tensors()
        .into_iter()
        .filter(|(_, _, tr)| *tr)
        .map(|(_, t, _)| t.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();
    let dirs: Vec<Vec<f64>> = grads
        .iter()
        .map(|g| (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let analytic: f64 = grads
        .iter()
        .zip(&dirs)
        .map(|(g, d)| g.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    let eval = |scale: f64| -> Result<f64> {
        let mut p = probe.net.clone();
        for ((_, t, _), d) in p.named_tensors_mut().into_iter().filter(|(_, _, tr)| *tr).zip(&dirs) {
            for (w, di) in t.data_mut().iter_mut().zip(d) {
                *w += scale * di;
            }
        }
        probe.loss(&p, &probe.x)
    };
    let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
    Ok(GradReport {
        name: "direction".into(),
        checked: grads.iter().map(Vec::len).sum(),
        rel_error: rel_error(&[analytic], &[numeric]),
    })
}
