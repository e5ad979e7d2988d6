use super::ModelError;
use crate::scalar::Scalar;

/// Pinball loss of one quantile for error `e = actual − predicted`.
pub fn pinball<T: Scalar>(q: T, e: T) -> T {
    ((q - T::one()) * e).max(q * e)
}

fn check_quantiles<T: Scalar>(quantiles: &[T]) -> Result<(), ModelError> {
    if quantiles.iter().any(|&q| !(q > T::zero() && q < T::one())) {
        return Err(ModelError::InvalidConfig("quantiles must lie strictly inside (0, 1)".into()));
    }
    Ok(())
}

/// Mean pinball loss over the quantile outputs of one prediction.
pub fn quantile_loss<T: Scalar>(predicted: &[T], actual: T, quantiles: &[T]) -> Result<T, ModelError> {
    if predicted.len() != quantiles.len() || quantiles.is_empty() {
        return Err(ModelError::Shape(format!(
            "{} predictions for {} quantiles",
            predicted.len(),
            quantiles.len()
        )));
    }
    check_quantiles(quantiles)?;
    let total: T = predicted.iter().zip(quantiles).map(|(&p, &q)| pinball(q, actual - p)).sum();
    Ok(total / T::from_usize_lossy(quantiles.len()))
}

pub fn rmse_loss<T: Scalar>(predicted: &[T], actual: &[T]) -> Result<T, ModelError> {
    if predicted.len() != actual.len() {
        return Err(ModelError::Shape(format!("{} predictions for {} actuals", predicted.len(), actual.len())));
    }
    if predicted.is_empty() {
        return Err(ModelError::Domain("rmse of an empty list".into()));
    }
    let sse: T = predicted.iter().zip(actual).map(|(&p, &a)| (p - a) * (p - a)).sum();
    Ok((sse / T::from_usize_lossy(predicted.len())).sqrt())
}

/// Loss of a batch of outputs and its derivative with respect to each output.
pub(crate) fn batch_loss_and_grad<T: Scalar>(
    outputs: &[Vec<T>],
    actual: &[T],
    quantiles: Option<&[T]>,
) -> (T, Vec<Vec<T>>) {
    let b = T::from_usize_lossy(outputs.len());
    match quantiles {
        Some(qs) => {
            let scale = T::one() / (b * T::from_usize_lossy(qs.len()));
            let mut total = T::zero();
            let grads = outputs
                .iter()
                .zip(actual)
                .map(|(out, &y)| {
                    out.iter()
                        .zip(qs)
                        .map(|(&p, &q)| {
                            let e = y - p;
                            total += pinball(q, e);
                            if e > T::zero() {
                                -q * scale
                            } else {
                                (T::one() - q) * scale
                            }
                        })
                        .collect()
                })
                .collect();
            (total * scale, grads)
        }
        None => {
            let sse: T = outputs.iter().zip(actual).map(|(o, &y)| (o[0] - y) * (o[0] - y)).sum();
            let loss = (sse / b).sqrt();
            let grads = outputs
                .iter()
                .zip(actual)
                .map(|(o, &y)| {
                    let g = if loss > T::zero() { (o[0] - y) / (b * loss) } else { T::zero() };
                    vec![g]
                })
                .collect();
            (loss, grads)
        }
    }
}
