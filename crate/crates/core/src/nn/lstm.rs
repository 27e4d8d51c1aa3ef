//! Single-layer LSTM with backpropagation through time.
//!
//! Gate rows are stacked `[input, forget, candidate, output]` in each of the
//! `4h x d` input weights, `4h x h` recurrent weights and `4h` bias.

use super::linalg::gemm;
use super::rng::{glorot_uniform, StreamRng};
use super::{NnError, Param, Parameterized, Tensor};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w_input: Param,
    pub w_hidden: Param,
    pub bias: Param,
}

/// Per-step activations recorded by [`Lstm::forward`].
#[derive(Debug, Clone, PartialEq)]
struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates, `[i, f, g, o]` each of length `h`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    steps: Vec<Step>,
    hidden: Vec<Vec<f64>>,
}

impl LstmTrace {
    /// Hidden state after every step.
    pub fn hidden_states(&self) -> &[Vec<f64>] {
        &self.hidden
    }

    pub fn final_hidden(&self) -> &[f64] {
        self.hidden.last().expect("trace of a nonempty sequence")
    }

    pub fn final_cell(&self) -> &[f64] {
        &self.steps.last().expect("trace of a nonempty sequence").c
    }
}

impl Lstm {
    /// Glorot-uniform weights, forget-gate bias 1, other biases 0.
    pub fn new(prefix: &str, input_dim: usize, hidden: usize, rng: &mut StreamRng) -> Self {
        let w_input = glorot_uniform(rng, &[4 * hidden, input_dim], input_dim, 4 * hidden);
        let w_hidden = glorot_uniform(rng, &[4 * hidden, hidden], hidden, 4 * hidden);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        Self::from_tensors(prefix, w_input, w_hidden, bias).expect("consistent shapes")
    }

    pub fn from_tensors(prefix: &str, w_input: Tensor, w_hidden: Tensor, bias: Tensor) -> Result<Self, NnError> {
        let (rows, _) = match *w_input.shape() {
            [r, d] if r % 4 == 0 && r > 0 => (r, d),
            ref s => return Err(NnError::ShapeMismatch(format!("LSTM input weights {s:?}"))),
        };
        let hidden = rows / 4;
        w_hidden.expect_shape(&[rows, hidden], "LSTM recurrent weights")?;
        bias.expect_shape(&[rows], "LSTM bias")?;
        Ok(Self {
            w_input: Param::new(format!("{prefix}.w_input"), w_input),
            w_hidden: Param::new(format!("{prefix}.w_hidden"), w_hidden),
            bias: Param::new(format!("{prefix}.bias"), bias),
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.value.shape()[1]
    }

    pub fn input_size(&self) -> usize {
        self.w_input.value.shape()[1]
    }

    /// Runs the recurrence from zero hidden and cell state.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<LstmTrace, NnError> {
        if inputs.is_empty() {
            return Err(NnError::EmptySequence);
        }
        let (h, d) = (self.hidden_size(), self.input_size());
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut steps = Vec::with_capacity(inputs.len());
        let mut hidden = Vec::with_capacity(inputs.len());
        for x in inputs {
            if x.len() != d {
                return Err(NnError::ShapeMismatch(format!("LSTM input of {} for dimension {d}", x.len())));
            }
            let mut pre = self.bias.value.data().to_vec();
            gemm(4 * h, d, 1, self.w_input.value.data(), false, x, false, &mut pre, 1.0);
            gemm(4 * h, h, 1, self.w_hidden.value.data(), false, &h_prev, false, &mut pre, 1.0);
            let mut gates = pre;
            for (k, v) in gates.iter_mut().enumerate() {
                *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
            }
            let (i, f, g, o) = (&gates[..h], &gates[h..2 * h], &gates[2 * h..3 * h], &gates[3 * h..]);
            let c: Vec<f64> = (0..h).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
            steps.push(Step {
                x: x.clone(),
                h_prev: std::mem::replace(&mut h_prev, h_new.clone()),
                c_prev: std::mem::replace(&mut c_prev, c.clone()),
                gates,
                c,
                tanh_c,
            });
            hidden.push(h_new);
        }
        Ok(LstmTrace { steps, hidden })
    }

    /// BPTT. `grad_hidden[t]` is the loss gradient with respect to the hidden
    /// state emitted at step `t`. Accumulates parameter gradients and returns
    /// the gradient for every input vector.
    pub fn backward(&mut self, trace: &LstmTrace, grad_hidden: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NnError> {
        if grad_hidden.len() != trace.steps.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} hidden gradients for {} steps",
                grad_hidden.len(),
                trace.steps.len()
            )));
        }
        let (h, d) = (self.hidden_size(), self.input_size());
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut grad_inputs = vec![Vec::new(); trace.steps.len()];
        let mut da = vec![0.0; 4 * h];
        for (t, step) in trace.steps.iter().enumerate().rev() {
            if grad_hidden[t].len() != h {
                return Err(NnError::ShapeMismatch(format!("hidden gradient of {}", grad_hidden[t].len())));
            }
            let gates = &step.gates;
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let dh = grad_hidden[t][j] + dh_next[j];
                let d_o = dh * step.tanh_c[j];
                let dc = dh * o * (1.0 - step.tanh_c[j] * step.tanh_c[j]) + dc_next[j];
                da[j] = dc * g * i * (1.0 - i);
                da[h + j] = dc * step.c_prev[j] * f * (1.0 - f);
                da[2 * h + j] = dc * i * (1.0 - g * g);
                da[3 * h + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            gemm(4 * h, 1, d, &da, false, &step.x, false, self.w_input.grad.data_mut(), 1.0);
            gemm(4 * h, 1, h, &da, false, &step.h_prev, false, self.w_hidden.grad.data_mut(), 1.0);
            for (b, v) in self.bias.grad.data_mut().iter_mut().zip(&da) {
                *b += v;
            }
            let mut dx = vec![0.0; d];
            gemm(d, 4 * h, 1, self.w_input.value.data(), true, &da, false, &mut dx, 0.0);
            gemm(h, 4 * h, 1, self.w_hidden.value.data(), true, &da, false, &mut dh_next, 0.0);
            grad_inputs[t] = dx;
        }
        Ok(grad_inputs)
    }
}

impl Parameterized for Lstm {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}
