use serde::{Deserialize, Serialize};

use super::{backprop, BackpropScratch, ForwardTrace, ModelParams, NetError, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletLossConfig {
    pub margin: f64,
}

impl Default for TripletLossConfig {
    fn default() -> Self {
        TripletLossConfig { margin: 1.0 }
    }
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64, NetError> {
    if x.len() != y.len() {
        return Err(NetError::Dim { expected: x.len(), got: y.len() });
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// `max(d(a, p) - d(a, n) + margin, 0)` with Euclidean `d`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<f64, NetError> {
    let dp = euclidean_distance(anchor, positive)?;
    let dn = euclidean_distance(anchor, negative)?;
    Ok((dp - dn + margin).max(0.0))
}

/// Loss of one triplet from its three traces; when the hinge is active,
/// accumulates `scale * dL/dθ` through all three branches into `grads`.
///
/// A zero distance contributes a zero subgradient for its term.
#[allow(clippy::too_many_arguments)]
pub fn triplet_backward(
    spec: &NetworkSpec,
    params: &ModelParams,
    anchor: &ForwardTrace,
    positive: &ForwardTrace,
    negative: &ForwardTrace,
    margin: f64,
    scale: f64,
    grads: &mut ModelParams,
    scratch: &mut BackpropScratch,
) -> Result<f64, NetError> {
    let a = anchor.output();
    let p = positive.output();
    let n = negative.output();
    let dp = euclidean_distance(a, p)?;
    let dn = euclidean_distance(a, n)?;
    let loss = dp - dn + margin;
    if !loss.is_finite() {
        return Err(NetError::NonFinite("loss"));
    }
    if loss <= 0.0 {
        return Ok(0.0);
    }
    let dim = a.len();
    let mut ga = vec![0.0; dim];
    let mut gp = vec![0.0; dim];
    let mut gn = vec![0.0; dim];
    for k in 0..dim {
        if dp > 0.0 {
            let u = (a[k] - p[k]) / dp;
            ga[k] += scale * u;
            gp[k] -= scale * u;
        }
        if dn > 0.0 {
            let v = (a[k] - n[k]) / dn;
            ga[k] -= scale * v;
            gn[k] += scale * v;
        }
    }
    backprop(spec, params, anchor, &ga, grads, scratch)?;
    backprop(spec, params, positive, &gp, grads, scratch)?;
    backprop(spec, params, negative, &gn, grads, scratch)?;
    Ok(loss)
}

/// Softmax cross-entropy over the linear outputs restricted to `allowed`
/// classes (the cards of a pack); accumulates `scale * dL/dθ`.
#[allow(clippy::too_many_arguments)]
pub fn softmax_cross_entropy_backward(
    spec: &NetworkSpec,
    params: &ModelParams,
    trace: &ForwardTrace,
    allowed: &[usize],
    target: usize,
    scale: f64,
    grads: &mut ModelParams,
    scratch: &mut BackpropScratch,
) -> Result<f64, NetError> {
    let logits = trace.output();
    let max = allowed.iter().map(|&i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = allowed.iter().map(|&i| (logits[i] - max).exp()).sum();
    let mut grad = vec![0.0; logits.len()];
    for &i in allowed {
        grad[i] += scale * (logits[i] - max).exp() / denom;
    }
    grad[target] -= scale;
    let loss = denom.ln() + max - logits[target];
    if !loss.is_finite() {
        return Err(NetError::NonFinite("loss"));
    }
    backprop(spec, params, trace, &grad, grads, scratch)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{forward_into, sparse_input};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distances() {
        assert_eq!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(euclidean_distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn loss_examples() {
        // d(a,p) = 0, d(a,n) = 2
        assert_eq!(triplet_loss(&[0.0, 0.0], &[0.0, 0.0], &[2.0, 0.0], 1.0).unwrap(), 0.0);
        // p == n leaves exactly the margin
        assert_eq!(triplet_loss(&[0.3, 0.1], &[0.5, -0.5], &[0.5, -0.5], 1.0).unwrap(), 1.0);
        // d(a,p) = 1.5, d(a,n) = 0.5
        assert_eq!(triplet_loss(&[0.0], &[1.5], &[-0.5], 1.0).unwrap(), 2.0);
        assert!(triplet_loss(&[0.0], &[1.0, 0.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn clamped_triplet_leaves_gradient_untouched() {
        let spec = NetworkSpec { dropout_rate: 0.0, ..NetworkSpec::embedding(4, vec![3], 2) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams::init(&spec, &mut rng);
        let mut traces = vec![ForwardTrace::default(); 3];
        for (t, x) in traces.iter_mut().zip([[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]]) {
            forward_into(&spec, &params, &sparse_input(&x), None, t).unwrap();
        }
        let mut grads = params.zeros_like();
        let mut scratch = BackpropScratch::default();
        // margin 0 and d(a,p) = 0 puts the triplet in the flat region
        let loss =
            triplet_backward(&spec, &params, &traces[0], &traces[1], &traces[2], 0.0, 1.0, &mut grads, &mut scratch)
                .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.values().iter().all(|&g| g == 0.0));
    }

    proptest! {
        #[test]
        fn loss_properties(
            a in proptest::collection::vec(-1.0f64..1.0, 3),
            p in proptest::collection::vec(-1.0f64..1.0, 3),
            n in proptest::collection::vec(-1.0f64..1.0, 3),
            m in 0.0f64..3.0,
        ) {
            let l = triplet_loss(&a, &p, &n, m).unwrap();
            prop_assert!(l >= 0.0);
            let dp = euclidean_distance(&a, &p).unwrap();
            let dn = euclidean_distance(&a, &n).unwrap();
            prop_assert_eq!(l == 0.0, dn >= dp + m);
            let swapped = triplet_loss(&a, &n, &p, m).unwrap();
            if dp - dn + m > 0.0 && dn - dp + m > 0.0 {
                prop_assert!((l + swapped - 2.0 * m).abs() < 1e-12);
            }
            prop_assert_eq!(euclidean_distance(&a, &p).unwrap(), euclidean_distance(&p, &a).unwrap());
        }
    }
}
