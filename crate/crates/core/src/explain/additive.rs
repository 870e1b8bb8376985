use ndarray::Array2;

use super::{ExplainError, ImportanceVector, Scope};
use crate::models::{AdditiveModel, Classifier};

/// `|f_i(x_i)|` for one instance.
pub fn additive_local(
    m: &AdditiveModel,
    x: &[f64],
    instance: usize,
) -> Result<ImportanceVector, ExplainError> {
    m.check_width(x.len())?;
    ImportanceVector::new(m.terms(x), Scope::Local(instance))
}

/// Mean of `|f_i(x_i)|` over the rows of `training`.
pub fn additive_global(
    m: &AdditiveModel,
    training: &Array2<f64>,
) -> Result<ImportanceVector, ExplainError> {
    m.check_width(training.ncols())?;
    if training.nrows() == 0 {
        return Err(ExplainError::NoInstances);
    }
    let mut scores = vec![0.0; m.shapes().len()];
    for row in training.rows() {
        for ((s, shape), &v) in scores.iter_mut().zip(m.shapes()).zip(row.iter()) {
            *s += shape.eval(v).abs();
        }
    }
    let n = training.nrows() as f64;
    ImportanceVector::new(scores.into_iter().map(|s| s / n).collect(), Scope::Global)
}
