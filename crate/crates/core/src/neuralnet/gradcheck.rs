//! Central finite differences against the analytic triplet gradient.

use super::{
    embed_sparse, forward_into, triplet_backward, triplet_loss, BackpropScratch, ForwardTrace, ModelParams, NetError,
    NetworkSpec,
};

/// Magnitude below which relative error is measured against this floor
/// instead, so float noise on near-zero partials is not amplified.
const RELATIVE_FLOOR: f64 = 1e-6;

fn no_dropout(spec: &NetworkSpec) -> NetworkSpec {
    NetworkSpec { dropout_rate: 0.0, ..spec.clone() }
}

fn loss_at(
    spec: &NetworkSpec,
    params: &ModelParams,
    inputs: [&[(usize, f64)]; 3],
    margin: f64,
) -> Result<f64, NetError> {
    let a = embed_sparse(spec, params, inputs[0])?;
    let p = embed_sparse(spec, params, inputs[1])?;
    let n = embed_sparse(spec, params, inputs[2])?;
    triplet_loss(&a, &p, &n, margin)
}

/// Backprop gradient of one triplet's loss, dropout disabled.
pub fn analytic_triplet_gradient(
    spec: &NetworkSpec,
    params: &ModelParams,
    inputs: [&[(usize, f64)]; 3],
    margin: f64,
) -> Result<ModelParams, NetError> {
    let spec = no_dropout(spec);
    let mut traces = [ForwardTrace::default(), ForwardTrace::default(), ForwardTrace::default()];
    for (t, x) in traces.iter_mut().zip(inputs) {
        forward_into(&spec, params, x, None, t)?;
    }
    let mut grads = params.zeros_like();
    triplet_backward(
        &spec,
        params,
        &traces[0],
        &traces[1],
        &traces[2],
        margin,
        1.0,
        &mut grads,
        &mut BackpropScratch::default(),
    )?;
    Ok(grads)
}

/// Central-difference gradient with step `h`, one parameter at a time.
pub fn numeric_triplet_gradient(
    spec: &NetworkSpec,
    params: &ModelParams,
    inputs: [&[(usize, f64)]; 3],
    margin: f64,
    h: f64,
) -> Result<ModelParams, NetError> {
    let spec = no_dropout(spec);
    let mut probe = params.clone();
    let mut grads = params.zeros_like();
    for i in 0..params.len() {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + h;
        let up = loss_at(&spec, &probe, inputs, margin)?;
        probe.values_mut()[i] = orig - h;
        let down = loss_at(&spec, &probe, inputs, margin)?;
        probe.values_mut()[i] = orig;
        grads.values_mut()[i] = (up - down) / (2.0 * h);
    }
    Ok(grads)
}

/// Worst `|a - n| / max(|a|, |n|, floor)` over all parameters.
pub fn max_relative_error(analytic: &ModelParams, numeric: &ModelParams) -> f64 {
    analytic
        .values()
        .iter()
        .zip(numeric.values())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR))
        .fold(0.0, f64::max)
}

/// Compares analytic and central-difference gradients (step 1e-5) for one
/// triplet and returns the worst relative error.
pub fn grad_check(
    spec: &NetworkSpec,
    params: &ModelParams,
    inputs: [&[(usize, f64)]; 3],
    margin: f64,
) -> Result<f64, NetError> {
    let analytic = analytic_triplet_gradient(spec, params, inputs, margin)?;
    let numeric = numeric_triplet_gradient(spec, params, inputs, margin, 1e-5)?;
    Ok(max_relative_error(&analytic, &numeric))
}
