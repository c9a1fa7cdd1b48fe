//! Central-difference gradient verification.

use super::graph::{Graph, NodeId};
use super::networks::{NetNodes, NetworkParameters};
use super::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-4;

/// Compare analytic gradients against central differences of `f`.
///
/// `analytic` pairs parameter indices with their gradients. Up to
/// `max_coords_per_tensor` coordinates are probed per tensor, spread
/// uniformly across it. Returns the maximum relative error
/// `|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)` over the probed
/// coordinates.
pub fn finite_diff_check<F>(
    f: F,
    params: &mut NetworkParameters,
    analytic: &[(usize, Tensor)],
    eps: f64,
    max_coords_per_tensor: usize,
) -> f64
where
    F: Fn(&NetworkParameters) -> f64,
{
    let mut worst: f64 = 0.0;
    for (idx, grad) in analytic {
        let len = grad.len();
        let stride = (len / max_coords_per_tensor.max(1)).max(1);
        for k in (0..len).step_by(stride) {
            let original = params.tensor_mut(*idx).data()[k];

            params.tensor_mut(*idx).data_mut()[k] = original + eps;
            let plus = f(params);
            params.tensor_mut(*idx).data_mut()[k] = original - eps;
            let minus = f(params);
            params.tensor_mut(*idx).data_mut()[k] = original;

            let fd = (plus - minus) / (2.0 * eps);
            let ad = grad.data()[k];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Gradient-check an arbitrary scalar loss built over the selected
/// parameters: runs one backward pass for the analytic gradients, then
/// compares against central differences of the rebuilt loss.
pub fn check_builder<B, S>(
    params: &mut NetworkParameters,
    select: S,
    build: B,
    eps: f64,
    max_coords_per_tensor: usize,
) -> f64
where
    B: Fn(&mut Graph, &NetNodes) -> NodeId,
    S: Fn(&str) -> bool + Copy,
{
    let mut g = Graph::new();
    let bound = params.bind(&mut g, select);
    let nets = NetNodes::trainable(params, &bound);
    let loss = build(&mut g, &nets);
    g.backward(loss);
    let analytic = bound.gradients(&g);

    finite_diff_check(
        |p| {
            let mut g = Graph::new();
            let nets = NetNodes::frozen(p);
            let loss = build(&mut g, &nets);
            g.value(loss).item()
        },
        params,
        &analytic,
        eps,
        max_coords_per_tensor,
    )
}
