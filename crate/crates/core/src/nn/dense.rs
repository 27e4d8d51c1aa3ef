use super::linalg::gemm;
use super::rng::{glorot_uniform, StreamRng};
use super::{NnError, Param, Parameterized, Tensor};

fn dims(weights: &Tensor) -> Result<(usize, usize), NnError> {
    match *weights.shape() {
        [m, n] => Ok((m, n)),
        ref s => Err(NnError::ShapeMismatch(format!("dense weights must be m x n, got {s:?}"))),
    }
}

/// `W x + b` for `W` of shape `m x n`.
pub fn dense_forward(input: &[f64], weights: &Tensor, bias: &[f64]) -> Result<Vec<f64>, NnError> {
    let (m, n) = dims(weights)?;
    if input.len() != n || bias.len() != m {
        return Err(NnError::ShapeMismatch(format!(
            "dense {m}x{n} applied to input {} with bias {}",
            input.len(),
            bias.len()
        )));
    }
    let mut out = bias.to_vec();
    gemm(m, n, 1, weights.data(), false, input, false, &mut out, 1.0);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

pub fn dense_backward(grad_out: &[f64], input: &[f64], weights: &Tensor) -> Result<DenseGrads, NnError> {
    let (m, n) = dims(weights)?;
    if grad_out.len() != m || input.len() != n {
        return Err(NnError::ShapeMismatch(format!(
            "dense {m}x{n} backward with grad {} and input {}",
            grad_out.len(),
            input.len()
        )));
    }
    let mut gw = vec![0.0; m * n];
    gemm(m, 1, n, grad_out, false, input, false, &mut gw, 0.0);
    let mut gx = vec![0.0; n];
    gemm(n, m, 1, weights.data(), true, grad_out, false, &mut gx, 0.0);
    Ok(DenseGrads {
        input: gx,
        weights: Tensor::from_vec(&[m, n], gw)?,
        bias: grad_out.to_vec(),
    })
}

/// Fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new(prefix: &str, inputs: usize, outputs: usize, rng: &mut StreamRng) -> Self {
        Self {
            weight: Param::new(
                format!("{prefix}.weight"),
                glorot_uniform(rng, &[outputs, inputs], inputs, outputs),
            ),
            bias: Param::new(format!("{prefix}.bias"), Tensor::zeros(&[outputs])),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        dense_forward(input, &self.weight.value, self.bias.value.data())
    }

    pub fn backward(&mut self, grad_out: &[f64], input: &[f64]) -> Result<Vec<f64>, NnError> {
        let grads = dense_backward(grad_out, input, &self.weight.value)?;
        for (g, d) in self.weight.grad.data_mut().iter_mut().zip(grads.weights.data()) {
            *g += d;
        }
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(&grads.bias) {
            *g += d;
        }
        Ok(grads.input)
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
