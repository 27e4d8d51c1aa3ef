//! 3x3, stride 1, zero-padding 1 ("same") 2-D convolution via im2col + GEMM.

use super::linalg::gemm;
use super::rng::{glorot_uniform, StreamRng};
use super::{NnError, Param, Parameterized, Tensor};

const K: usize = 3;

fn check_input(input: &Tensor) -> Result<(usize, usize, usize), NnError> {
    match *input.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(NnError::ShapeMismatch(format!("conv input must be CxHxW, got {s:?}"))),
    }
}

fn check_weights(weights: &Tensor, c_in: usize) -> Result<usize, NnError> {
    match *weights.shape() {
        [c_out, ci, K, K] if ci == c_in => Ok(c_out),
        ref s => Err(NnError::ShapeMismatch(format!(
            "conv weights must be C_out x {c_in} x 3 x 3, got {s:?}"
        ))),
    }
}

/// Unfolds the padded 3x3 neighbourhoods into a `(C*9) x (H*W)` matrix.
fn im2col(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut col = vec![0.0; c * K * K * hw];
    for ci in 0..c {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &mut col[((ci * K + ky) * K + kx) * hw..][..hw];
                let x_lo = 1usize.saturating_sub(kx);
                let x_hi = (w + 1).saturating_sub(kx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let src = &plane[(sy - 1) * w..sy * w];
                    row[y * w + x_lo..y * w + x_hi]
                        .copy_from_slice(&src[x_lo + kx - 1..x_hi + kx - 1]);
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter-adds columns back onto the input grid.
fn col2im(col: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; c * hw];
    for ci in 0..c {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &col[((ci * K + ky) * K + kx) * hw..][..hw];
                let x_lo = 1usize.saturating_sub(kx);
                let x_hi = (w + 1).saturating_sub(kx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let dst = &mut plane[(sy - 1) * w..sy * w];
                    for (d, s) in dst[x_lo + kx - 1..x_hi + kx - 1]
                        .iter_mut()
                        .zip(&row[y * w + x_lo..y * w + x_hi])
                    {
                        *d += s;
                    }
                }
            }
        }
    }
    out
}

fn forward_with_col(
    col: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weights: &Tensor,
    bias: &[f64],
) -> Result<Tensor, NnError> {
    let c_out = check_weights(weights, c_in)?;
    if bias.len() != c_out {
        return Err(NnError::ShapeMismatch(format!(
            "conv bias has {} entries for {c_out} filters",
            bias.len()
        )));
    }
    let hw = h * w;
    let mut out = vec![0.0; c_out * hw];
    for (plane, b) in out.chunks_exact_mut(hw).zip(bias) {
        plane.fill(*b);
    }
    gemm(c_out, c_in * K * K, hw, weights.data(), false, col, false, &mut out, 1.0);
    Tensor::from_vec(&[c_out, h, w], out)
}

/// Cross-correlation of a `C_in x H x W` input with `C_out x C_in x 3 x 3`
/// weights plus per-filter bias; output is `C_out x H x W`.
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<Tensor, NnError> {
    let (c, h, w) = check_input(input)?;
    let col = im2col(input.data(), c, h, w);
    forward_with_col(&col, c, h, w, weights, bias)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

fn backward_with_col(
    grad_out: &Tensor,
    col: &[f64],
    input_shape: (usize, usize, usize),
    weights: &Tensor,
) -> Result<ConvGrads, NnError> {
    let (c_in, h, w) = input_shape;
    let c_out = check_weights(weights, c_in)?;
    grad_out.expect_shape(&[c_out, h, w], "conv grad_out")?;
    let hw = h * w;
    let kk = c_in * K * K;

    let bias = grad_out.data().chunks_exact(hw).map(|p| p.iter().sum()).collect();
    let mut gw = vec![0.0; c_out * kk];
    gemm(c_out, hw, kk, grad_out.data(), false, col, true, &mut gw, 0.0);
    let mut gcol = vec![0.0; kk * hw];
    gemm(kk, c_out, hw, weights.data(), true, grad_out.data(), false, &mut gcol, 0.0);
    Ok(ConvGrads {
        input: Tensor::from_vec(&[c_in, h, w], col2im(&gcol, c_in, h, w))?,
        weights: Tensor::from_vec(weights.shape(), gw)?,
        bias,
    })
}

/// Exact gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward(grad_out: &Tensor, input: &Tensor, weights: &Tensor) -> Result<ConvGrads, NnError> {
    let (c, h, w) = check_input(input)?;
    let col = im2col(input.data(), c, h, w);
    backward_with_col(grad_out, &col, (c, h, w), weights)
}

/// Convolution layer owning its weights, bias and their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
}

/// Forward-pass state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Conv2dCache {
    col: Vec<f64>,
    shape: (usize, usize, usize),
}

impl Conv2d {
    pub fn new(prefix: &str, c_in: usize, c_out: usize, rng: &mut StreamRng) -> Self {
        let weight = glorot_uniform(rng, &[c_out, c_in, K, K], c_in * K * K, c_out * K * K);
        Self {
            weight: Param::new(format!("{prefix}.weight"), weight),
            bias: Param::new(format!("{prefix}.bias"), Tensor::zeros(&[c_out])),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Conv2dCache), NnError> {
        let (c, h, w) = check_input(input)?;
        let col = im2col(input.data(), c, h, w);
        let out = forward_with_col(&col, c, h, w, &self.weight.value, self.bias.value.data())?;
        Ok((out, Conv2dCache { col, shape: (c, h, w) }))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor, cache: &Conv2dCache) -> Result<Tensor, NnError> {
        let grads = backward_with_col(grad_out, &cache.col, cache.shape, &self.weight.value)?;
        for (g, d) in self.weight.grad.data_mut().iter_mut().zip(grads.weights.data()) {
            *g += d;
        }
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(&grads.bias) {
            *g += d;
        }
        Ok(grads.input)
    }
}

impl Parameterized for Conv2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient};
    use crate::nn::rng::stream;
    use rand::Rng;

    /// Quadruple-loop reference convolution.
    fn naive_conv(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Vec<f64> {
        let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let c_out = weights.shape()[0];
        let x = |c: usize, y: isize, xx: isize| -> f64 {
            if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                0.0
            } else {
                input.data()[(c * h + y as usize) * w + xx as usize]
            }
        };
        let mut out = vec![0.0; c_out * h * w];
        for co in 0..c_out {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = bias[co];
                    for ci in 0..c_in {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let wv = weights.data()[((co * c_in + ci) * 3 + ky) * 3 + kx];
                                acc += wv * x(ci, y as isize + ky as isize - 1, xx as isize + kx as isize - 1);
                            }
                        }
                    }
                    out[(co * h + y) * w + xx] = acc;
                }
            }
        }
        out
    }

    fn random(shape: &[usize], seed: u32) -> Tensor {
        let mut rng = stream(99, seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let input = random(&[1, 5, 4], 0);
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let weights = Tensor::from_vec(&[1, 1, 3, 3], k).unwrap();
        assert_eq!(conv2d_forward(&input, &weights, &[0.0]).unwrap(), input);
    }

    #[test]
    fn ones_kernel_interior() {
        let input = Tensor::from_vec(&[1, 4, 4], vec![1.0; 16]).unwrap();
        let weights = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let out = conv2d_forward(&input, &weights, &[0.0]).unwrap();
        assert_eq!(out.data()[5], 9.0);
        assert_eq!(out.data()[0], 4.0);
    }

    #[test]
    fn matches_naive_oracle() {
        let input = random(&[2, 4, 4], 1);
        let weights = random(&[3, 2, 3, 3], 2);
        let bias = [0.1, -0.2, 0.3];
        let fast = conv2d_forward(&input, &weights, &bias).unwrap();
        for (a, b) in fast.data().iter().zip(naive_conv(&input, &weights, &bias)) {
            assert!((a - b).abs() < 1e-9);
        }
        let odd = random(&[2, 5, 3], 3);
        let fast = conv2d_forward(&odd, &weights, &bias).unwrap();
        for (a, b) in fast.data().iter().zip(naive_conv(&odd, &weights, &bias)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_errors() {
        let input = random(&[2, 4, 4], 1);
        let weights = random(&[3, 1, 3, 3], 2);
        assert!(matches!(conv2d_forward(&input, &weights, &[0.0; 3]), Err(NnError::ShapeMismatch(_))));
        let weights = random(&[3, 2, 3, 3], 2);
        assert!(matches!(conv2d_forward(&input, &weights, &[0.0; 2]), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn zero_grad_out_and_bias_sum() {
        let input = random(&[2, 4, 4], 4);
        let weights = random(&[3, 2, 3, 3], 5);
        let zero = conv2d_backward(&Tensor::zeros(&[3, 4, 4]), &input, &weights).unwrap();
        assert!(zero.input.data().iter().all(|&v| v == 0.0));
        assert!(zero.weights.data().iter().all(|&v| v == 0.0));
        assert!(zero.bias.iter().all(|&v| v == 0.0));

        let g = random(&[3, 4, 4], 6);
        let grads = conv2d_backward(&g, &input, &weights).unwrap();
        for co in 0..3 {
            let s: f64 = g.data()[co * 16..(co + 1) * 16].iter().sum();
            assert!((grads.bias[co] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let input = random(&[2, 4, 4], 7);
        let weights = random(&[3, 2, 3, 3], 8);
        let bias = vec![0.05, -0.1, 0.2];
        let proj = random(&[3, 4, 4], 9);
        let loss = |inp: &Tensor, wt: &Tensor, b: &[f64]| -> f64 {
            conv2d_forward(inp, wt, b)
                .unwrap()
                .data()
                .iter()
                .zip(proj.data())
                .map(|(a, p)| a * p)
                .sum()
        };
        let grads = conv2d_backward(&proj, &input, &weights).unwrap();

        let num_in = numeric_gradient(
            |x| loss(&Tensor::from_vec(&[2, 4, 4], x.to_vec()).unwrap(), &weights, &bias),
            input.data(),
            1e-3,
        );
        assert!(max_relative_error(grads.input.data(), &num_in) < 1e-4);
        let num_w = numeric_gradient(
            |x| loss(&input, &Tensor::from_vec(&[3, 2, 3, 3], x.to_vec()).unwrap(), &bias),
            weights.data(),
            1e-3,
        );
        assert!(max_relative_error(grads.weights.data(), &num_w) < 1e-4);
        let num_b = numeric_gradient(|b| loss(&input, &weights, b), &bias, 1e-3);
        assert!(max_relative_error(&grads.bias, &num_b) < 1e-4);
    }

    #[test]
    fn layer_accumulates() {
        let mut layer = Conv2d::new("c", 2, 3, &mut stream(3, 0));
        let input = random(&[2, 4, 4], 10);
        let (out, cache) = layer.forward(&input).unwrap();
        assert_eq!(out.shape(), &[3, 4, 4]);
        let g = random(&[3, 4, 4], 11);
        layer.backward(&g, &cache).unwrap();
        layer.backward(&g, &cache).unwrap();
        let once = conv2d_backward(&g, &input, &layer.weight.value).unwrap();
        for (a, b) in layer.weight.grad.data().iter().zip(once.weights.data()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }
}
