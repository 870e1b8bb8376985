use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExplainError, ImportanceVector, Scope};
use crate::models::Classifier;

/// Smallest accepted perturbation sample count.
pub const MIN_LIME_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Kernel width; `None` means `0.75 * sqrt(P)`.
    pub kernel_width: Option<f64>,
    /// Ridge penalty on the surrogate coefficients.
    pub ridge: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            kernel_width: None,
            ridge: 1.0,
        }
    }
}

impl LimeConfig {
    pub fn width_for(&self, n_features: usize) -> f64 {
        self.kernel_width
            .unwrap_or_else(|| 0.75 * (n_features as f64).sqrt())
    }
}

/// Weighted ridge surrogate over feature-presence indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeExplanation {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub kernel_width: f64,
    pub n_samples: usize,
}

impl LimeExplanation {
    pub fn importance(&self, instance: usize) -> Result<ImportanceVector, ExplainError> {
        ImportanceVector::new(self.coefficients.clone(), Scope::Local(instance))
    }
}

/// Local surrogate for the model's class-1 probability around `x`.
///
/// Presence vectors `z` are drawn uniformly from `{0,1}^P`; absent features
/// take the background column mean. Samples are weighted by
/// `exp(-h^2 / width^2)`, `h` being the number of absent features, and a
/// ridge regression with an unpenalized intercept is fitted to the
/// probabilities.
pub fn lime_local<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Array2<f64>,
    config: &LimeConfig,
    seed: u64,
) -> Result<LimeExplanation, ExplainError> {
    model.check_width(x.len())?;
    model.check_width(background.ncols())?;
    if background.nrows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    if config.n_samples < MIN_LIME_SAMPLES {
        return Err(ExplainError::Invalid(format!(
            "LIME needs at least {MIN_LIME_SAMPLES} samples"
        )));
    }
    let width = config.width_for(x.len());
    if !(width > 0.0 && width.is_finite()) || !(config.ridge >= 0.0) {
        return Err(ExplainError::Invalid("kernel width / ridge".into()));
    }
    let fill = background
        .mean_axis(Axis(0))
        .expect("background is non-empty")
        .to_vec();

    let p = x.len();
    let n = config.n_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DMatrix::<f64>::zeros(n, p);
    let mut y = DVector::<f64>::zeros(n);
    let mut w = DVector::<f64>::zeros(n);
    let mut hybrid = vec![0.0; p];
    for k in 0..n {
        let mut absent = 0usize;
        for j in 0..p {
            let present = rng.gen_bool(0.5);
            z[(k, j)] = if present { 1.0 } else { 0.0 };
            hybrid[j] = if present { x[j] } else { fill[j] };
            absent += usize::from(!present);
        }
        y[k] = model.predict_proba_row(&hybrid);
        let h = absent as f64;
        w[k] = (-(h * h) / (width * width)).exp();
    }
    if (1..n).all(|k| z.row(k) == z.row(0)) {
        return Err(ExplainError::DegenerateSamples);
    }

    let w_sum = w.sum();
    let z_mean = z.tr_mul(&w) / w_sum;
    let y_mean = w.dot(&y) / w_sum;
    let mut zc = z.clone();
    for (mut row, &wk) in zc.row_iter_mut().zip(w.iter()) {
        row -= z_mean.transpose();
        row *= wk.sqrt();
    }
    let yc = DVector::from_iterator(n, (0..n).map(|k| (y[k] - y_mean) * w[k].sqrt()));
    let mut gram = zc.tr_mul(&zc);
    for j in 0..p {
        gram[(j, j)] += config.ridge;
    }
    let rhs = zc.tr_mul(&yc);
    let coef = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or(ExplainError::DegenerateSamples)?,
    };
    let intercept = y_mean - coef.dot(&z_mean);
    let coefficients: Vec<f64> = coef.iter().copied().collect();
    if let Some(j) = coefficients.iter().position(|c| !c.is_finite()) {
        return Err(ExplainError::NonFinite(j));
    }
    Ok(LimeExplanation {
        intercept,
        coefficients,
        kernel_width: width,
        n_samples: n,
    })
}
