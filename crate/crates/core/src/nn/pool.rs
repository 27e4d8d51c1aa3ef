use super::{NnError, Tensor};

/// 2x2 / stride-2 max pooling over a `C x H x W` tensor with even `H`, `W`.
///
/// Also returns, per output cell, the flat input index that won; ties go to
/// the smallest flat index.
pub fn maxpool2d(input: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
    let (c, h, w) = match *input.shape() {
        [c, h, w] => (c, h, w),
        ref s => return Err(NnError::ShapeMismatch(format!("pool input must be CxHxW, got {s:?}"))),
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NnError::OddSpatialDim { height: h, width: w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let base = (ci * h + 2 * oy) * w + 2 * ox;
                // candidate order is increasing flat index
                let mut best = base;
                for idx in [base + 1, base + w, base + w + 1] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(&[c, oh, ow], out)?, argmax))
}

/// Routes each output gradient to the input position recorded in `argmax`.
pub fn maxpool2d_backward(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor, NnError> {
    if grad_out.len() != argmax.len() {
        return Err(NnError::ShapeMismatch(format!(
            "{} pool gradients for {} argmax entries",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut grad_in = Tensor::zeros(input_shape);
    let gi = grad_in.data_mut();
    for (&g, &idx) in grad_out.data().iter().zip(argmax) {
        if idx >= gi.len() {
            return Err(NnError::ShapeMismatch(format!("argmax index {idx} outside input")));
        }
        gi[idx] += g;
    }
    Ok(grad_in)
}
