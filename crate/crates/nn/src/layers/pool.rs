use super::expect_rank4;
use crate::{NnError, Real, Result, Tensor};

/// Adaptive average pooling to a fixed `out_h x out_w` grid. Bin `i` along
/// an axis of length `L` covers `[floor(i L / n), ceil((i + 1) L / n))`, so
/// smaller inputs are upsampled by replication and equal sizes pass through.
#[derive(Debug, Clone)]
pub struct AdaptiveAvgPool2d {
    out_h: usize,
    out_w: usize,
    cache: Option<[usize; 4]>,
}

fn bins(len: usize, n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|i| ((i * len) / n, ((i + 1) * len).div_ceil(n)))
        .collect()
}

impl AdaptiveAvgPool2d {
    pub fn new(out_h: usize, out_w: usize) -> Self {
        AdaptiveAvgPool2d {
            out_h,
            out_w,
            cache: None,
        }
    }

    pub fn output_size(&self) -> (usize, usize) {
        (self.out_h, self.out_w)
    }

    pub(crate) fn infer<F: Real>(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let [b, c, h, w] = expect_rank4("adaptive_avg_pool2d", x, None)?;
        if h == 0 || w == 0 {
            return Err(NnError::shape("adaptive_avg_pool2d", &[b, c, 1, 1], x.shape()));
        }
        let (rows, cols) = (bins(h, self.out_h), bins(w, self.out_w));
        let mut y = Vec::with_capacity(b * c * self.out_h * self.out_w);
        for plane in x.data().chunks_exact(h * w) {
            for &(r0, r1) in &rows {
                for &(c0, c1) in &cols {
                    let mut s = F::zero();
                    for r in r0..r1 {
                        for q in c0..c1 {
                            s += plane[r * w + q];
                        }
                    }
                    y.push(s / F::from_usize((r1 - r0) * (c1 - c0)).expect("count"));
                }
            }
        }
        Tensor::new(vec![b, c, self.out_h, self.out_w], y)
    }

    pub(crate) fn forward<F: Real>(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let y = self.infer(x)?;
        self.cache = Some(expect_rank4("adaptive_avg_pool2d", x, None)?);
        Ok(y)
    }

    pub(crate) fn backward<F: Real>(&mut self, grad: &Tensor<F>) -> Option<Result<Tensor<F>>> {
        let [b, c, h, w] = self.cache?;
        let expected = [b, c, self.out_h, self.out_w];
        if grad.shape() != expected {
            return Some(Err(NnError::shape("adaptive_avg_pool2d backward", &expected, grad.shape())));
        }
        let (rows, cols) = (bins(h, self.out_h), bins(w, self.out_w));
        let mut dx = vec![F::zero(); b * c * h * w];
        for (plane, g) in dx.chunks_exact_mut(h * w).zip(grad.data().chunks_exact(self.out_h * self.out_w)) {
            for (i, &(r0, r1)) in rows.iter().enumerate() {
                for (j, &(c0, c1)) in cols.iter().enumerate() {
                    let share = g[i * self.out_w + j] / F::from_usize((r1 - r0) * (c1 - c0)).expect("count");
                    for r in r0..r1 {
                        for q in c0..c1 {
                            plane[r * w + q] += share;
                        }
                    }
                }
            }
        }
        Some(Tensor::new(vec![b, c, h, w], dx))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub(crate) fn cast(&self) -> Self {
        AdaptiveAvgPool2d::new(self.out_h, self.out_w)
    }
}
