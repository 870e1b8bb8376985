use super::{ExplainError, ImportanceVector, Scope};
use crate::models::{Classifier, LogisticModel};

/// Coefficient magnitudes `|beta_j|` on standardized features.
pub fn rcm_global(m: &LogisticModel) -> ImportanceVector {
    ImportanceVector::new(m.coefficients().to_vec(), Scope::Global)
        .expect("fitted coefficients are finite")
}

/// Contribution magnitudes `|beta_j * z_j|`, where `z` is the raw instance `x`
/// passed through the model's standardizer.
pub fn rcm_local(
    m: &LogisticModel,
    x: &[f64],
    instance: usize,
) -> Result<ImportanceVector, ExplainError> {
    m.check_width(x.len())?;
    let z = m.standardizer().transform_row(x);
    let contributions = m.coefficients().iter().zip(&z).map(|(b, v)| b * v).collect();
    ImportanceVector::new(contributions, Scope::Local(instance))
}
