//! Reconstruction and classification losses with analytic gradients.
//!
//! All losses average over batch rows.

use crate::error::{Error, Result};
use crate::nn::{Matrix, Scalar};

/// Adaptive per-dimension weights of the reconstruction loss:
/// `w_i = |x_i - x̂_i|^2 / ||x - x̂||_2`, and `w = 0` for a zero residual.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights<T> {
    pub w: Vec<T>,
}

impl<T: Scalar> LossWeights<T> {
    pub fn from_residual(x: &[T], x_hat: &[T]) -> Self {
        let norm = residual_norm(x, x_hat);
        let w = if norm == T::zero() {
            vec![T::zero(); x.len()]
        } else {
            x.iter()
                .zip(x_hat)
                .map(|(&a, &b)| {
                    let r = a - b;
                    r * r / norm
                })
                .collect()
        };
        Self { w }
    }
}

fn residual_norm<T: Scalar>(x: &[T], x_hat: &[T]) -> T {
    x.iter()
        .zip(x_hat)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        .sqrt()
}

fn same_shape<T: Scalar>(op: &'static str, a: &Matrix<T>, b: &Matrix<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Adaptive-weighted L1 reconstruction loss `Σ_i w_i |x_i - x̂_i|` and its
/// gradient with respect to `x_hat`.
///
/// The weights are treated as constants when differentiating, so the
/// gradient is `-w_i sign(x_i - x̂_i)` (divided by the batch size).
pub fn weighted_l1_loss<T: Scalar>(x: &Matrix<T>, x_hat: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    same_shape("weighted_l1_loss", x, x_hat)?;
    let rows = x.rows();
    let mut grad = Matrix::zeros(rows, x.cols());
    if rows == 0 {
        return Ok((T::zero(), grad));
    }
    let scale = T::one() / T::of(rows as f64);
    let mut total = T::zero();
    for i in 0..rows {
        let (xr, hr) = (x.row(i), x_hat.row(i));
        let norm = residual_norm(xr, hr);
        if norm == T::zero() {
            continue;
        }
        // Σ w_i |r_i| = Σ |r_i|^3 / ||r||
        let mut cubes = T::zero();
        for (g, (&a, &b)) in grad.row_mut(i).iter_mut().zip(xr.iter().zip(hr)) {
            let r = a - b;
            cubes = cubes + r.abs() * r * r;
            *g = -(r * r.abs() / norm) * scale;
        }
        total = total + cubes / norm;
    }
    Ok((total * scale, grad))
}

/// `Σ_i w_i |x_i - x̂_i|` with caller-supplied weights (one row of weights per
/// batch row), averaged over rows. This is the function whose exact gradient
/// [`weighted_l1_loss`] returns when `weights` are taken at the same point.
pub fn weighted_l1_with_weights<T: Scalar>(x: &Matrix<T>, x_hat: &Matrix<T>, weights: &[LossWeights<T>]) -> Result<T> {
    same_shape("weighted_l1_with_weights", x, x_hat)?;
    if weights.len() != x.rows() {
        return Err(Error::Argument(format!(
            "{} weight rows for {} batch rows",
            weights.len(),
            x.rows()
        )));
    }
    if x.rows() == 0 {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (i, w) in weights.iter().enumerate() {
        for ((&a, &b), &wi) in x.row(i).iter().zip(x_hat.row(i)).zip(&w.w) {
            total = total + wi * (a - b).abs();
        }
    }
    Ok(total / T::of(x.rows() as f64))
}

/// Per-row adaptive weights for a batch.
pub fn batch_weights<T: Scalar>(x: &Matrix<T>, x_hat: &Matrix<T>) -> Vec<LossWeights<T>> {
    (0..x.rows())
        .map(|i| LossWeights::from_residual(x.row(i), x_hat.row(i)))
        .collect()
}

/// Plain L1 loss `Σ_i |x_i - x̂_i|` and its gradient w.r.t. `x_hat`.
pub fn l1_loss<T: Scalar>(x: &Matrix<T>, x_hat: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    same_shape("l1_loss", x, x_hat)?;
    let rows = x.rows().max(1);
    let scale = T::one() / T::of(rows as f64);
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut total = T::zero();
    for ((g, &a), &b) in grad.as_mut_slice().iter_mut().zip(x.as_slice()).zip(x_hat.as_slice()) {
        let r = a - b;
        total = total + r.abs();
        *g = if r > T::zero() {
            -scale
        } else if r < T::zero() {
            scale
        } else {
            T::zero()
        };
    }
    Ok((total * scale, grad))
}

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Mean softmax cross-entropy for integer labels and its gradient w.r.t.
/// the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<(T, Matrix<T>)> {
    if labels.len() != logits.rows() {
        return Err(Error::Shape {
            op: "softmax_cross_entropy",
            left: logits.shape(),
            right: (labels.len(), 1),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= logits.cols()) {
        return Err(Error::Argument(format!(
            "label {bad} out of range for {} classes",
            logits.cols()
        )));
    }
    let mut grad = softmax(logits);
    if labels.is_empty() {
        return Ok((T::zero(), grad));
    }
    let scale = T::one() / T::of(labels.len() as f64);
    let tiny = T::min_positive_value();
    let mut total = T::zero();
    for (i, &label) in labels.iter().enumerate() {
        let row = grad.row_mut(i);
        total = total - row[label].max(tiny).ln();
        row[label] = row[label] - T::one();
        for v in row.iter_mut() {
            *v = *v * scale;
        }
    }
    Ok((total * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn weighted_l1_three_four() {
        let (loss, grad) = weighted_l1_loss(&row(&[3., 4.]), &row(&[0., 0.])).unwrap();
        assert_eq!(loss, 18.2);
        let w = LossWeights::from_residual(&[3.0, 4.0], &[0.0, 0.0]);
        assert_eq!(w.w, vec![9.0 / 5.0, 16.0 / 5.0]);
        // x > x̂ everywhere, so the gradient is -w
        assert_eq!(grad.as_slice(), &[-9.0 / 5.0, -16.0 / 5.0]);
    }

    #[test]
    fn weighted_l1_unit_residual() {
        let (loss, _) = weighted_l1_loss(&row(&[1., 0.]), &row(&[0., 0.])).unwrap();
        assert_eq!(loss, 1.0);
        let w = LossWeights::from_residual(&[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(w.w, vec![1.0, 0.0]);
    }

    #[test]
    fn weighted_l1_zero_residual() {
        let x = row(&[0.5, -2.0, 7.0]);
        let (loss, grad) = weighted_l1_loss(&x, &x).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.as_slice().iter().all(|&g| g == 0.0));
        assert!(LossWeights::from_residual(x.as_slice(), x.as_slice()).w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn weighted_l1_matches_frozen_weights_form() {
        let x = Matrix::<f64>::from_vec(2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]).unwrap();
        let h = Matrix::from_vec(2, 3, vec![0.2, 0.1, 0.5, -1.0, 2.5, 1.0]).unwrap();
        let (loss, _) = weighted_l1_loss(&x, &h).unwrap();
        let frozen = weighted_l1_with_weights(&x, &h, &batch_weights(&x, &h)).unwrap();
        assert!((loss - frozen).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        assert!(weighted_l1_loss(&row(&[1.0]), &row(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Matrix::<f64>::zeros(2, 4);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((grad[(0, 0)] - (0.25 - 1.0) / 2.0).abs() < 1e-12);
        assert!((grad[(1, 1)] - 0.25 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Matrix::from_vec(2, 3, vec![1000.0, 0.0, -5.0, 0.1, 0.2, 0.3]).unwrap();
        let p = softmax(&logits);
        for r in p.iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        assert!(softmax_cross_entropy(&Matrix::<f64>::zeros(1, 2), &[2]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weighted_l1_nonnegative_and_zero_iff_equal(
                x in prop::collection::vec(-10.0f64..10.0, 1..12),
                delta in prop::collection::vec(-5.0f64..5.0, 12),
                same in any::<bool>(),
            ) {
                let h: Vec<f64> = if same {
                    x.clone()
                } else {
                    x.iter().zip(&delta).map(|(a, d)| a + d).collect()
                };
                let (loss, _) = weighted_l1_loss(&row(&x), &row(&h)).unwrap();
                prop_assert!(loss >= 0.0);
                let equal = x == h;
                prop_assert_eq!(loss == 0.0, equal);
            }
        }
    }
}
