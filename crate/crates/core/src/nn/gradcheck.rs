//! Central-difference gradient checking.

use super::Parameterized;

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps` for every coordinate.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + eps;
            let plus = f(&probe);
            probe[i] = x[i] - eps;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    /// Coordinates skipped because a perturbation crossed a kink or tie.
    pub excluded: usize,
}

/// Compares the analytic gradient of `loss_and_grad` against central
/// differences for every coordinate of every parameter of `model`.
///
/// `loss_and_grad` must return the loss and accumulate the analytic gradient
/// into the model's parameter gradients; it is called once for the analytic
/// pass (after `zero_grad`) and twice per coordinate for the numeric pass.
pub fn gradient_check<M: Parameterized>(
    model: &mut M,
    mut loss_and_grad: impl FnMut(&mut M) -> f64,
    eps: f64,
) -> GradCheckReport {
    gradient_check_piecewise(model, |m| (loss_and_grad(m), 0), eps)
}

/// Like [`gradient_check`] for piecewise-smooth models.
///
/// `loss_and_grad` also returns a signature of the discrete state of the
/// forward pass (ReLU signs, pooling winners). A coordinate whose `+eps` or
/// `-eps` probe changes the signature straddles a kink and is excluded.
pub fn gradient_check_piecewise<M: Parameterized>(
    model: &mut M,
    mut loss_and_grad: impl FnMut(&mut M) -> (f64, u64),
    eps: f64,
) -> GradCheckReport {
    model.zero_grad();
    let (_, base) = loss_and_grad(model);
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.data().to_vec()).collect();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
        excluded: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let original = model.params()[pi].value.data()[j];
            model.params_mut()[pi].value.data_mut()[j] = original + eps;
            let (plus, sig_plus) = loss_and_grad(model);
            model.params_mut()[pi].value.data_mut()[j] = original - eps;
            let (minus, sig_minus) = loss_and_grad(model);
            model.params_mut()[pi].value.data_mut()[j] = original;
            if sig_plus != base || sig_minus != base {
                report.excluded += 1;
                continue;
            }

            let err = relative_error(a, (plus - minus) / (2.0 * eps));
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((model.params()[pi].name.clone(), j));
            }
        }
    }
    model.zero_grad();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Param, Tensor};

    struct Linear {
        w: Param,
    }

    impl Parameterized for Linear {
        fn params(&self) -> Vec<&Param> {
            vec![&self.w]
        }
        fn params_mut(&mut self) -> Vec<&mut Param> {
            vec![&mut self.w]
        }
    }

    #[test]
    fn linear_model_is_exact() {
        let x = [0.5, -1.5, 2.0];
        let mut model = Linear {
            w: Param::new("w", Tensor::from_vec(&[3], vec![0.1, 0.2, -0.3]).unwrap()),
        };
        let report = gradient_check(
            &mut model,
            |m| {
                let w = m.w.value.data().to_vec();
                for (g, xi) in m.w.grad.data_mut().iter_mut().zip(&x) {
                    *g += xi;
                }
                w.iter().zip(&x).map(|(a, b)| a * b).sum()
            },
            1e-3,
        );
        assert_eq!(report.checked, 3);
        assert!(report.max_relative_error < 1e-9, "{report:?}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let mut model = Linear {
            w: Param::new("w", Tensor::from_vec(&[1], vec![1.0]).unwrap()),
        };
        let report = gradient_check(
            &mut model,
            |m| {
                let w = m.w.value.data()[0];
                m.w.grad.data_mut()[0] += w; // true gradient is 2w
                w * w
            },
            1e-3,
        );
        assert!(report.max_relative_error > 0.4);
        assert_eq!(report.worst, Some(("w".to_string(), 0)));
    }
}
