use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sigmoid, Classifier, ModelError};
use crate::data::{Dataset, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    /// L2 penalty on the coefficients (the intercept is not penalized).
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the gradient's Euclidean norm falls to this value.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// L2-regularized logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    intercept: f64,
    coefficients: Vec<f64>,
    standardizer: Standardizer,
    iterations: usize,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem<'a> {
    z: &'a DMatrix<f64>,
    y: &'a [f64],
    l2: f64,
}

impl Problem<'_> {
    /// Mean log-loss plus `l2/2 * |beta|^2`; `w[0]` is the intercept.
    fn objective(&self, w: &DVector<f64>) -> f64 {
        let n = self.y.len() as f64;
        let eta = self.z * w;
        let loss: f64 = eta
            .iter()
            .zip(self.y)
            .map(|(&e, &y)| softplus(e) - y * e)
            .sum();
        let penalty: f64 = w.iter().skip(1).map(|b| b * b).sum();
        loss / n + 0.5 * self.l2 * penalty
    }

    fn gradient_hessian(&self, w: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.y.len() as f64;
        let eta = self.z * w;
        let p = eta.map(sigmoid);
        let resid = DVector::from_iterator(
            self.y.len(),
            p.iter().zip(self.y).map(|(pi, yi)| pi - yi),
        );
        let mut grad = self.z.tr_mul(&resid) / n;
        let weights = p.map(|pi| pi * (1.0 - pi));
        let mut weighted = self.z.clone();
        for (mut row, &wt) in weighted.row_iter_mut().zip(weights.iter()) {
            row *= wt;
        }
        let mut hess = self.z.tr_mul(&weighted) / n;
        for j in 1..w.len() {
            grad[j] += self.l2 * w[j];
            hess[(j, j)] += self.l2;
        }
        (grad, hess)
    }
}

/// Newton's method with backtracking line search on the penalized mean
/// log-loss. The design matrix is the standardized feature matrix with a
/// leading column of ones.
pub fn fit_logistic(d: &Dataset, config: &LogisticConfig) -> Result<LogisticModel, ModelError> {
    let standardizer = Standardizer::fit(d.features());
    let n = d.n_rows();
    let p = d.n_features();
    let mut z = DMatrix::<f64>::zeros(n, p + 1);
    let mut buf = vec![0.0; p];
    for i in 0..n {
        standardizer.transform_row_into(d.row(i), &mut buf);
        z[(i, 0)] = 1.0;
        for j in 0..p {
            z[(i, j + 1)] = buf[j];
        }
    }
    let y: Vec<f64> = d.labels().iter().map(|&l| f64::from(l)).collect();
    let problem = Problem {
        z: &z,
        y: &y,
        l2: config.l2,
    };

    let mut w = DVector::<f64>::zeros(p + 1);
    let mut f = problem.objective(&w);
    let mut iterations = 0;
    while iterations < config.max_iter {
        let (grad, hess) = problem.gradient_hessian(&w);
        if grad.norm() <= config.tol {
            break;
        }
        iterations += 1;
        let step = match hess.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => hess
                .lu()
                .solve(&grad)
                .unwrap_or_else(|| grad.clone()),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &w - &step * t;
            let fc = problem.objective(&candidate);
            if fc.is_finite() && fc <= f {
                w = candidate;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !f.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("logistic coefficients".into()));
    }
    Ok(LogisticModel {
        intercept: w[0],
        coefficients: w.iter().skip(1).copied().collect(),
        standardizer,
        iterations,
    })
}

impl LogisticModel {
    /// A model with given parameters on features scaled by `standardizer`.
    pub fn from_parts(
        intercept: f64,
        coefficients: Vec<f64>,
        standardizer: Standardizer,
    ) -> Result<Self, ModelError> {
        if coefficients.len() != standardizer.n_features() {
            return Err(ModelError::Invalid("coefficient/standardizer width".into()));
        }
        Ok(Self {
            intercept,
            coefficients,
            standardizer,
            iterations: 0,
        })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Coefficients on the standardized features.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Log-odds for a raw (unstandardized) instance.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mean = self.standardizer.mean();
        let std = self.standardizer.std();
        self.intercept
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(j, b)| b * (x[j] - mean[j]) / std[j])
                .sum::<f64>()
    }
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    fn explained_output(&self, x: &[f64]) -> f64 {
        self.logit(x)
    }
}
