use super::{expect_rank4, uniform};
use crate::real::{gemm, MatRef};
use crate::{Real, Result, Tensor};

/// 3x3 convolution, stride 1, zero padding 1, no bias (a batch norm
/// always follows).
#[derive(Debug, Clone)]
pub struct Conv2d<F: Real> {
    in_channels: usize,
    out_channels: usize,
    /// `out x in x 3 x 3`.
    pub weight: Tensor<F>,
    cache: Option<ConvCache<F>>,
}

#[derive(Debug, Clone)]
struct ConvCache<F> {
    cols: Vec<F>,
    shape: [usize; 4],
}

const KS: usize = 3;

impl<F: Real> Conv2d<F> {
    /// Kaiming-uniform style init: `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: rand::Rng + ?Sized>(in_channels: usize, out_channels: usize, rng: &mut R) -> Self {
        let fan_in = in_channels * KS * KS;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = Tensor::new(
            vec![out_channels, in_channels, KS, KS],
            uniform(rng, out_channels * fan_in, bound),
        )
        .expect("consistent shape");
        Conv2d {
            in_channels,
            out_channels,
            weight,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn compute(&self, x: &Tensor<F>) -> Result<(Tensor<F>, Vec<F>, [usize; 4])> {
        let shape = expect_rank4("conv2d", x, Some(self.in_channels))?;
        let [b, _, h, w] = shape;
        let cols = im2col(x.data(), shape);
        let rows = self.in_channels * KS * KS;
        let mut y = vec![F::zero(); self.out_channels * b * h * w];
        gemm(
            MatRef::new(self.weight.data(), self.out_channels, rows),
            MatRef::new(&cols, rows, b * h * w),
            F::zero(),
            &mut y,
        );
        let out = from_channel_major(&y, b, self.out_channels, h * w);
        let out = Tensor::new(vec![b, self.out_channels, h, w], out)?;
        Ok((out, cols, shape))
    }

    pub(crate) fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let (out, cols, shape) = self.compute(x)?;
        self.cache = Some(ConvCache { cols, shape });
        Ok(out)
    }

    pub(crate) fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.compute(x).map(|r| r.0)
    }

    pub(crate) fn backward(&mut self, grad: &Tensor<F>) -> Option<Result<Tensor<F>>> {
        let cache = self.cache.as_ref()?;
        let [b, c, h, w] = cache.shape;
        let expected = [b, self.out_channels, h, w];
        if grad.shape() != expected {
            return Some(Err(crate::NnError::shape("conv2d backward", &expected, grad.shape())));
        }
        let rows = c * KS * KS;
        let n = b * h * w;
        let dy = to_channel_major(grad.data(), b, self.out_channels, h * w);
        let (wdata, wgrad) = self.weight.data_and_grad_mut();
        gemm(
            MatRef::new(&dy, self.out_channels, n),
            MatRef::new(&cache.cols, rows, n).t(),
            F::one(),
            wgrad,
        );
        let mut dcols = vec![F::zero(); rows * n];
        gemm(
            MatRef::new(wdata, self.out_channels, rows).t(),
            MatRef::new(&dy, self.out_channels, n),
            F::zero(),
            &mut dcols,
        );
        let dx = col2im(&dcols, cache.shape);
        Some(Tensor::new(cache.shape.to_vec(), dx))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub(crate) fn cast<G: Real>(&self) -> Conv2d<G> {
        Conv2d {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            weight: self.weight.cast(),
            cache: None,
        }
    }
}

/// Rows `(c, ky, kx)`, columns `(b, y, x)`.
fn im2col<F: Real>(x: &[F], [b, c, h, w]: [usize; 4]) -> Vec<F> {
    let n = b * h * w;
    let mut cols = vec![F::zero(); c * KS * KS * n];
    for ci in 0..c {
        for ky in 0..KS {
            for kx in 0..KS {
                let row = (ci * KS + ky) * KS + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for bi in 0..b {
                    let src = &x[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for xx in 0..w {
                            let sx = xx as isize + kx as isize - 1;
                            if sx >= 0 && sx < w as isize {
                                dst[(bi * h + y) * w + xx] = src[sy as usize * w + sx as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im<F: Real>(cols: &[F], [b, c, h, w]: [usize; 4]) -> Vec<F> {
    let n = b * h * w;
    let mut x = vec![F::zero(); b * c * h * w];
    for ci in 0..c {
        for ky in 0..KS {
            for kx in 0..KS {
                let row = (ci * KS + ky) * KS + kx;
                let src = &cols[row * n..(row + 1) * n];
                for bi in 0..b {
                    let dst = &mut x[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for xx in 0..w {
                            let sx = xx as isize + kx as isize - 1;
                            if sx >= 0 && sx < w as isize {
                                dst[sy as usize * w + sx as usize] += src[(bi * h + y) * w + xx];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `B x C x P` to `C x (B P)`.
fn to_channel_major<F: Real>(x: &[F], b: usize, c: usize, p: usize) -> Vec<F> {
    let mut out = vec![F::zero(); x.len()];
    for bi in 0..b {
        for ci in 0..c {
            out[(ci * b + bi) * p..(ci * b + bi + 1) * p].copy_from_slice(&x[(bi * c + ci) * p..(bi * c + ci + 1) * p]);
        }
    }
    out
}

/// `C x (B P)` to `B x C x P`.
fn from_channel_major<F: Real>(y: &[F], b: usize, c: usize, p: usize) -> Vec<F> {
    let mut out = vec![F::zero(); y.len()];
    for ci in 0..c {
        for bi in 0..b {
            out[(bi * c + ci) * p..(bi * c + ci + 1) * p].copy_from_slice(&y[(ci * b + bi) * p..(ci * b + bi + 1) * p]);
        }
    }
    out
}
