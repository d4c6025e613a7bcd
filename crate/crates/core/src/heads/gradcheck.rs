use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

use super::nn::{activation_signature, backward_all, forward_all, ParamStore, Tensor4};
use super::train::cross_entropy;
use super::Head;

/// Central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-3;
/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(|analytic|, |numeric|, 1e-6)`.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation flipped a ReLU or max-pool decision,
    /// where the loss is not differentiable and the comparison is meaningless.
    pub skipped: usize,
    pub loss: f64,
}

fn loss_and_signature(head: &Head, store: &ParamStore, x: &Tensor4, classes: &[usize]) -> Result<(f64, u64)> {
    let (y, caches) = forward_all(&head.layers, store, x.clone(), true)?;
    Ok((cross_entropy(&y.data, classes).0, activation_signature(&caches)))
}

/// Compares backpropagated gradients of the mean cross-entropy with central
/// finite differences on up to `n_params` randomly drawn trainable
/// parameters. Forward passes run in training mode (batch statistics).
pub fn grad_check(head: &Head, inputs: &[Vec<f64>], labels: &[Label], n_params: usize, seed: u64) -> Result<GradCheckReport> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Config("gradient check needs a non-empty labelled batch".into()));
    }
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let x = head.batch(&refs)?;
    let classes: Vec<usize> = labels.iter().map(|l| l.class_index()).collect();

    let mut store = head.store.clone();
    store.zero_grad();
    let (y, caches) = forward_all(&head.layers, &store, x.clone(), true)?;
    let (loss, grad) = cross_entropy(&y.data, &classes);
    let signature = activation_signature(&caches);
    backward_all(&head.layers, &mut store, &caches, Tensor4::new(y.n, y.c, y.h, y.w, grad)?);
    let analytic = store.clone();

    let mut candidates: Vec<(usize, usize)> = store
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| p.trainable)
        .flat_map(|(i, p)| (0..p.value.len()).map(move |j| (i, j)))
        .collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let h = GRAD_CHECK_STEP;
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, skipped: 0, loss };
    for (i, j) in candidates {
        if report.checked == n_params {
            break;
        }
        let original = store.params[i].value[j];
        store.params[i].value[j] = original + h;
        let (plus, sig_plus) = loss_and_signature(head, &store, &x, &classes)?;
        store.params[i].value[j] = original - h;
        let (minus, sig_minus) = loss_and_signature(head, &store, &x, &classes)?;
        store.params[i].value[j] = original;
        if sig_plus != signature || sig_minus != signature {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.params[i].grad[j];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}
