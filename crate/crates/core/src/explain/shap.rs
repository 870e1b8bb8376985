//! Shapley value attributions with an interventional value function.
//!
//! For an instance `x` and coalition `S`, the value `v(S)` is the model output
//! averaged over background rows `b`, each evaluated on the hybrid that takes
//! `x` on `S` and `b` elsewhere. `phi_0 = v({})` and local accuracy gives
//! `phi_0 + sum(phi) = v(all) = f(x)`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ExplainError, ImportanceVector, Scope};
use crate::models::Classifier;

/// Largest feature count for full subset enumeration.
pub const DEFAULT_EXACT_CAP: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapleyMode {
    /// Enumerate all `2^P` coalitions.
    Exact,
    /// Average marginal contributions over random feature orderings.
    Sampled { permutations: usize },
}

impl ShapleyMode {
    /// Exact when `n_features <= exact_cap`, sampled otherwise.
    pub fn choose(n_features: usize, exact_cap: usize, permutations: usize) -> Self {
        if n_features <= exact_cap {
            ShapleyMode::Exact
        } else {
            ShapleyMode::Sampled { permutations }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyExplanation {
    /// Mean model output over the background.
    pub base_value: f64,
    pub values: Vec<f64>,
    pub mode: ShapleyMode,
}

impl ShapleyExplanation {
    /// `phi_0 + sum(phi)`, which reproduces the model output.
    pub fn total(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>()
    }

    pub fn importance(&self, instance: usize) -> Result<ImportanceVector, ExplainError> {
        ImportanceVector::new(self.values.clone(), Scope::Local(instance))
    }
}

fn check_inputs<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Array2<f64>,
) -> Result<(), ExplainError> {
    model.check_width(x.len())?;
    model.check_width(background.ncols())?;
    if background.nrows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    Ok(())
}

fn background_rows(background: &Array2<f64>) -> Vec<Vec<f64>> {
    background.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Full enumeration:
/// `phi_i = sum_{S without i} |S|!(P-|S|-1)!/P! * (v(S + i) - v(S))`.
pub fn shap_exact<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Array2<f64>,
    cap: usize,
) -> Result<ShapleyExplanation, ExplainError> {
    check_inputs(model, x, background)?;
    let p = x.len();
    if p > cap || p >= usize::BITS as usize {
        return Err(ExplainError::TooManyFeatures { p, cap });
    }
    let n_masks = 1usize << p;
    let bg = background_rows(background);
    let mut values = vec![0.0; n_masks];
    let mut hybrid = vec![0.0; p];
    for b in &bg {
        for (mask, v) in values.iter_mut().enumerate() {
            for j in 0..p {
                hybrid[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
            }
            *v += model.explained_output(&hybrid);
        }
    }
    let n_bg = bg.len() as f64;
    for v in &mut values {
        *v /= n_bg;
    }

    // |S|!(P-|S|-1)!/P! = 1 / (P * C(P-1, |S|))
    let mut weights = vec![0.0; p];
    let mut binom = 1.0;
    for (s, w) in weights.iter_mut().enumerate() {
        *w = 1.0 / (p as f64 * binom);
        binom = binom * (p - 1 - s) as f64 / (s + 1) as f64;
    }

    let mut phi = vec![0.0; p];
    for mask in 0..n_masks {
        let size = mask.count_ones() as usize;
        for (i, phi_i) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *phi_i += weights[size] * (values[mask | 1 << i] - values[mask]);
            }
        }
    }
    Ok(ShapleyExplanation {
        base_value: values[0],
        values: phi,
        mode: ShapleyMode::Exact,
    })
}

/// Averages marginal contributions over the given feature orderings.
///
/// Each ordering must be a permutation of `0..P`. For every background row
/// features are switched from `b` to `x` one at a time in ordering order.
pub fn shap_permutations<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Array2<f64>,
    orderings: &[Vec<usize>],
) -> Result<ShapleyExplanation, ExplainError> {
    check_inputs(model, x, background)?;
    if orderings.is_empty() {
        return Err(ExplainError::Invalid("no feature orderings".into()));
    }
    let p = x.len();
    for o in orderings {
        let mut seen = vec![false; p];
        if o.len() != p || o.iter().any(|&j| j >= p || std::mem::replace(&mut seen[j], true)) {
            return Err(ExplainError::Invalid("ordering is not a permutation".into()));
        }
    }
    let bg = background_rows(background);
    let n_bg = bg.len() as f64;
    let base_value = bg.iter().map(|b| model.explained_output(b)).sum::<f64>() / n_bg;

    let mut phi = vec![0.0; p];
    let mut hybrid = vec![0.0; p];
    for order in orderings {
        for b in &bg {
            hybrid.copy_from_slice(b);
            let mut prev = model.explained_output(&hybrid);
            for &j in order {
                hybrid[j] = x[j];
                let cur = model.explained_output(&hybrid);
                phi[j] += cur - prev;
                prev = cur;
            }
        }
    }
    let scale = n_bg * orderings.len() as f64;
    for v in &mut phi {
        *v /= scale;
    }
    Ok(ShapleyExplanation {
        base_value,
        values: phi,
        mode: ShapleyMode::Sampled {
            permutations: orderings.len(),
        },
    })
}

/// Monte Carlo estimate from `n_permutations` uniformly random orderings.
/// Local accuracy holds up to rounding because every ordering telescopes.
pub fn shap_sampled<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Array2<f64>,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyExplanation, ExplainError> {
    if n_permutations == 0 {
        return Err(ExplainError::Invalid("need at least one permutation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let orderings: Vec<Vec<usize>> = (0..n_permutations)
        .map(|_| {
            order.shuffle(&mut rng);
            order.clone()
        })
        .collect();
    shap_permutations(model, x, background, &orderings)
}

/// One local explanation in the given mode; `seed` is ignored when exact.
pub fn shap_local<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Array2<f64>,
    mode: ShapleyMode,
    seed: u64,
) -> Result<ShapleyExplanation, ExplainError> {
    match mode {
        ShapleyMode::Exact => shap_exact(model, x, background, usize::MAX),
        ShapleyMode::Sampled { permutations } => {
            shap_sampled(model, x, background, permutations, seed)
        }
    }
}

/// Mean absolute Shapley value per feature over local explanations.
pub fn shap_global_from_local(
    explanations: &[ShapleyExplanation],
) -> Result<ImportanceVector, ExplainError> {
    let first = explanations.first().ok_or(ExplainError::NoInstances)?;
    let mut scores = vec![0.0; first.values.len()];
    for e in explanations {
        for (s, v) in scores.iter_mut().zip(&e.values) {
            *s += v.abs();
        }
    }
    let n = explanations.len() as f64;
    ImportanceVector::new(scores.into_iter().map(|s| s / n).collect(), Scope::Global)
}

/// Global importance: mean `|phi_i|` over the rows of `instances`.
/// In sampled mode row `k` uses its own generator stream of `seed`.
pub fn shap_global<M: Classifier + ?Sized>(
    model: &M,
    instances: &Array2<f64>,
    background: &Array2<f64>,
    mode: ShapleyMode,
    seed: u64,
) -> Result<ImportanceVector, ExplainError> {
    let explanations = instances
        .rows()
        .into_iter()
        .enumerate()
        .map(|(k, row)| {
            shap_local(model, &row.to_vec(), background, mode, seed.wrapping_add(k as u64))
        })
        .collect::<Result<Vec<_>, _>>()?;
    shap_global_from_local(&explanations)
}
