use super::{NnError, Tensor};

fn table_dims(table: &Tensor) -> Result<(usize, usize), NnError> {
    match *table.shape() {
        [v, d] => Ok((v, d)),
        ref s => Err(NnError::ShapeMismatch(format!("embedding table must be V x d, got {s:?}"))),
    }
}

/// Gathers rows of a `V x d` table. Index `V` is the reserved
/// out-of-vocabulary slot and yields the zero vector.
pub fn embedding_lookup(table: &Tensor, indices: &[usize]) -> Result<Vec<Vec<f64>>, NnError> {
    let (v, d) = table_dims(table)?;
    indices
        .iter()
        .map(|&i| match i.cmp(&v) {
            std::cmp::Ordering::Less => Ok(table.data()[i * d..(i + 1) * d].to_vec()),
            std::cmp::Ordering::Equal => Ok(vec![0.0; d]),
            std::cmp::Ordering::Greater => Err(NnError::IndexOutOfRange { index: i, vocab: v }),
        })
        .collect()
}

/// Scatter-adds per-position gradients into `grad_table`; the OOV slot
/// receives nothing.
pub fn embedding_backward(grad_table: &mut Tensor, indices: &[usize], grads: &[Vec<f64>]) -> Result<(), NnError> {
    let (v, d) = table_dims(grad_table)?;
    if indices.len() != grads.len() {
        return Err(NnError::ShapeMismatch(format!(
            "{} indices but {} gradient rows",
            indices.len(),
            grads.len()
        )));
    }
    for (&i, g) in indices.iter().zip(grads) {
        if g.len() != d {
            return Err(NnError::ShapeMismatch(format!("gradient row of {} for dimension {d}", g.len())));
        }
        if i > v {
            return Err(NnError::IndexOutOfRange { index: i, vocab: v });
        }
        if i == v {
            continue;
        }
        for (t, x) in grad_table.data_mut()[i * d..(i + 1) * d].iter_mut().zip(g) {
            *t += x;
        }
    }
    Ok(())
}
