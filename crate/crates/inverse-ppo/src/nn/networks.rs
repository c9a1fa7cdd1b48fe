//! Network definitions over the autodiff graph: depth autoencoder,
//! policy head, and value head, plus parameter initialization.

use super::adam::Adam;
use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use super::NnError;
use crate::world::DepthMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape decisions for every network in the system.
///
/// The encoder halves each spatial dimension twice with stride-2
/// convolutions, then projects to the latent vector. The decoder mirrors it
/// through zero-upsampled (transposed) convolutions.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub depth_height: usize,
    pub depth_width: usize,
    pub conv_channels: (usize, usize),
    pub latent_dim: usize,
    pub state_dim: usize,
    pub hidden_dim: usize,
    pub action_count: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            depth_height: 16,
            depth_width: 32,
            conv_channels: (8, 16),
            latent_dim: 254,
            state_dim: 256,
            hidden_dim: 128,
            action_count: 8,
        }
    }
}

fn halved(n: usize) -> usize {
    // Output size of a stride-2, k=3, pad=1 convolution.
    (n - 1) / 2 + 1
}

impl ArchConfig {
    pub fn for_depth(height: usize, width: usize) -> Self {
        ArchConfig {
            depth_height: height,
            depth_width: width,
            ..ArchConfig::default()
        }
    }

    pub fn conv1_out(&self) -> (usize, usize) {
        (halved(self.depth_height), halved(self.depth_width))
    }

    pub fn conv2_out(&self) -> (usize, usize) {
        let (h, w) = self.conv1_out();
        (halved(h), halved(w))
    }

    pub fn flat_dim(&self) -> usize {
        let (h, w) = self.conv2_out();
        self.conv_channels.1 * h * w
    }

    /// Trailing zero padding needed so each transposed convolution exactly
    /// restores the mirrored spatial size.
    fn output_extra(target: usize, source: usize) -> usize {
        // conv-transpose output without extra: (source-1)*2 + 3 - 2*1.
        target - (2 * source - 1)
    }

    fn deconv1_extra(&self) -> (usize, usize) {
        let (h1, w1) = self.conv1_out();
        let (h2, w2) = self.conv2_out();
        (Self::output_extra(h1, h2), Self::output_extra(w1, w2))
    }

    fn deconv2_extra(&self) -> (usize, usize) {
        let (h1, w1) = self.conv1_out();
        (
            Self::output_extra(self.depth_height, h1),
            Self::output_extra(self.depth_width, w1),
        )
    }

    /// `(name, shape)` of every tensor, in canonical order.
    pub fn tensor_specs(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (c1, c2) = self.conv_channels;
        let flat = self.flat_dim();
        vec![
            ("enc.conv1.w", vec![c1, 1, 3, 3]),
            ("enc.conv1.b", vec![c1]),
            ("enc.conv2.w", vec![c2, c1, 3, 3]),
            ("enc.conv2.b", vec![c2]),
            ("enc.fc.w", vec![self.latent_dim, flat]),
            ("enc.fc.b", vec![self.latent_dim]),
            ("dec.fc.w", vec![flat, self.latent_dim]),
            ("dec.fc.b", vec![flat]),
            ("dec.deconv1.w", vec![c2, c1, 3, 3]),
            ("dec.deconv1.b", vec![c1]),
            ("dec.deconv2.w", vec![c1, 1, 3, 3]),
            ("dec.deconv2.b", vec![1]),
            ("pi.fc1.w", vec![self.hidden_dim, self.state_dim]),
            ("pi.fc1.b", vec![self.hidden_dim]),
            ("pi.fc2.w", vec![self.action_count, self.hidden_dim]),
            ("pi.fc2.b", vec![self.action_count]),
            ("vf.fc1.w", vec![self.hidden_dim, self.state_dim]),
            ("vf.fc1.b", vec![self.hidden_dim]),
            ("vf.fc2.w", vec![1, self.hidden_dim]),
            ("vf.fc2.b", vec![1]),
        ]
    }
}

/// Ordered, named weight tensors for encoder, decoder, policy, and value
/// networks.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    arch: ArchConfig,
    tensors: Vec<(String, Tensor)>,
}

impl NetworkParameters {
    /// Seeded uniform initialization scaled by the fan-in of each layer;
    /// biases share the bound of their weight tensor.
    pub fn init(arch: ArchConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bound = 1.0;
        let tensors = arch
            .tensor_specs()
            .into_iter()
            .map(|(name, shape)| {
                if !name.ends_with(".b") {
                    let fan_in: usize = shape[1..].iter().product();
                    bound = 1.0 / (fan_in as f64).sqrt();
                }
                let data = (0..shape.iter().product::<usize>())
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                (name.to_string(), Tensor::new(shape, data))
            })
            .collect();
        NetworkParameters { arch, tensors }
    }

    /// Rebuild from named tensors (checkpoint load); shapes are validated
    /// against `arch`.
    pub fn from_tensors(
        arch: ArchConfig,
        tensors: Vec<(String, Tensor)>,
    ) -> Result<Self, NnError> {
        let specs = arch.tensor_specs();
        if tensors.len() != specs.len() {
            return Err(NnError::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                specs.len(),
                tensors.len()
            )));
        }
        for ((name, tensor), (want_name, want_shape)) in tensors.iter().zip(&specs) {
            if name != want_name {
                return Err(NnError::ShapeMismatch(format!(
                    "expected tensor `{want_name}`, found `{name}`"
                )));
            }
            if tensor.shape() != &want_shape[..] {
                return Err(NnError::ShapeMismatch(format!(
                    "tensor `{name}`: expected shape {want_shape:?}, found {:?}",
                    tensor.shape()
                )));
            }
        }
        Ok(NetworkParameters { arch, tensors })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn tensors(&self) -> &[(String, Tensor)] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> &Tensor {
        &self
            .tensors
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("unknown tensor `{name}`"))
            .1
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.tensors[index].1
    }

    pub fn index_of(&self, name: &str) -> usize {
        self.tensors
            .iter()
            .position(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("unknown tensor `{name}`"))
    }

    /// Bind tensors whose names match `select` as trainable graph leaves.
    pub fn bind(&self, g: &mut Graph, select: impl Fn(&str) -> bool) -> BoundParams {
        let entries = self
            .tensors
            .iter()
            .enumerate()
            .filter(|(_, (name, _))| select(name))
            .map(|(i, (_, t))| (i, g.param(t.clone())))
            .collect();
        BoundParams { entries }
    }

    /// L2 norm over all parameters, used by convergence diagnostics.
    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .map(|(_, t)| t.squared_norm())
            .sum::<f64>()
            .sqrt()
    }
}

/// Trainable graph leaves for a subset of the parameters.
pub struct BoundParams {
    entries: Vec<(usize, NodeId)>,
}

impl BoundParams {
    pub fn node(&self, params: &NetworkParameters, name: &str) -> NodeId {
        let idx = params.index_of(name);
        self.entries
            .iter()
            .find(|(i, _)| *i == idx)
            .unwrap_or_else(|| panic!("tensor `{name}` is not bound"))
            .1
    }

    /// `(parameter index, gradient)` pairs after a backward pass.
    pub fn gradients(&self, g: &Graph) -> Vec<(usize, Tensor)> {
        self.entries
            .iter()
            .map(|&(i, id)| (i, g.grad(id).clone()))
            .collect()
    }

    pub fn entries(&self) -> &[(usize, NodeId)] {
        &self.entries
    }
}

/// Node lookup used by the forward builders: either bound (trainable) or
/// constant snapshots of the current parameters.
pub struct NetNodes<'p> {
    params: &'p NetworkParameters,
    bound: Option<&'p BoundParams>,
}

impl<'p> NetNodes<'p> {
    pub fn frozen(params: &'p NetworkParameters) -> Self {
        NetNodes {
            params,
            bound: None,
        }
    }

    pub fn trainable(params: &'p NetworkParameters, bound: &'p BoundParams) -> Self {
        NetNodes {
            params,
            bound: Some(bound),
        }
    }

    pub fn node(&self, g: &mut Graph, name: &str) -> NodeId {
        match self.bound {
            Some(b)
                if b
                    .entries
                    .iter()
                    .any(|(i, _)| *i == self.params.index_of(name)) =>
            {
                b.node(self.params, name)
            }
            _ => g.constant(self.params.tensor(name).clone()),
        }
    }
}

/// Encoder: depth batch `[B,1,H,W]` (normalized) to latent `[B,K]`.
pub fn encoder_nodes(g: &mut Graph, nets: &NetNodes, x: NodeId) -> NodeId {
    let arch = nets.params.arch();
    let (w1, b1) = (nets.node(g, "enc.conv1.w"), nets.node(g, "enc.conv1.b"));
    let (w2, b2) = (nets.node(g, "enc.conv2.w"), nets.node(g, "enc.conv2.b"));
    let (wf, bf) = (nets.node(g, "enc.fc.w"), nets.node(g, "enc.fc.b"));

    let c1 = g.conv2d(x, w1, b1, 2, 1);
    let a1 = g.relu(c1);
    let c2 = g.conv2d(a1, w2, b2, 2, 1);
    let a2 = g.relu(c2);
    let batch = g.value(x).shape()[0];
    let flat = g.reshape(a2, vec![batch, arch.flat_dim()]);
    g.linear(flat, wf, bf)
}

/// Decoder: latent `[B,K]` back to a depth reconstruction `[B,1,H,W]`.
pub fn decoder_nodes(g: &mut Graph, nets: &NetNodes, z: NodeId) -> NodeId {
    let arch = nets.params.arch();
    let (wf, bf) = (nets.node(g, "dec.fc.w"), nets.node(g, "dec.fc.b"));
    let (w1, b1) = (nets.node(g, "dec.deconv1.w"), nets.node(g, "dec.deconv1.b"));
    let (w2, b2) = (nets.node(g, "dec.deconv2.w"), nets.node(g, "dec.deconv2.b"));

    let batch = g.value(z).shape()[0];
    let (h2, w2dim) = arch.conv2_out();
    let f = g.linear(z, wf, bf);
    let a = g.relu(f);
    let grid = g.reshape(a, vec![batch, arch.conv_channels.1, h2, w2dim]);

    let up1 = g.zero_upsample2d(grid, 2, arch.deconv1_extra());
    let k1 = g.flip_kernel(w1);
    let d1 = g.conv2d(up1, k1, b1, 1, 1);
    let a1 = g.relu(d1);

    let up2 = g.zero_upsample2d(a1, 2, arch.deconv2_extra());
    let k2 = g.flip_kernel(w2);
    g.conv2d(up2, k2, b2, 1, 1)
}

/// Policy head: states `[B,S]` to action logits `[B,A]`.
pub fn policy_logits_nodes(g: &mut Graph, nets: &NetNodes, states: NodeId) -> NodeId {
    let (w1, b1) = (nets.node(g, "pi.fc1.w"), nets.node(g, "pi.fc1.b"));
    let (w2, b2) = (nets.node(g, "pi.fc2.w"), nets.node(g, "pi.fc2.b"));
    let h = g.linear(states, w1, b1);
    let a = g.tanh(h);
    g.linear(a, w2, b2)
}

/// Value head: states `[B,S]` to values `[B]`.
pub fn value_nodes(g: &mut Graph, nets: &NetNodes, states: NodeId) -> NodeId {
    let (w1, b1) = (nets.node(g, "vf.fc1.w"), nets.node(g, "vf.fc1.b"));
    let (w2, b2) = (nets.node(g, "vf.fc2.w"), nets.node(g, "vf.fc2.b"));
    let h = g.linear(states, w1, b1);
    let a = g.tanh(h);
    let v = g.linear(a, w2, b2);
    let batch = g.value(states).shape()[0];
    g.reshape(v, vec![batch])
}

fn depth_batch_tensor(arch: &ArchConfig, maps: &[&DepthMap]) -> Result<Tensor, NnError> {
    if maps.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let (h, w) = (arch.depth_height, arch.depth_width);
    let mut data = Vec::with_capacity(maps.len() * h * w);
    for m in maps {
        if m.sensor.height != h || m.sensor.width != w {
            return Err(NnError::ShapeMismatch(format!(
                "depth map is {}x{}, encoder expects {h}x{w}",
                m.sensor.height, m.sensor.width
            )));
        }
        data.extend(m.normalized());
    }
    Ok(Tensor::new(vec![maps.len(), 1, h, w], data))
}

/// Run the frozen encoder on one depth map; returns the latent vector.
pub fn encoder_forward(params: &NetworkParameters, depth: &DepthMap) -> Result<Vec<f64>, NnError> {
    let x = depth_batch_tensor(params.arch(), &[depth])?;
    let mut g = Graph::new();
    let xid = g.constant(x);
    let nets = NetNodes::frozen(params);
    let z = encoder_nodes(&mut g, &nets, xid);
    let out = g.value(z).data().to_vec();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("encoder output".into()));
    }
    Ok(out)
}

/// Discrete action distribution: probabilities and their logs.
#[derive(Clone, Debug)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 })
            .sum::<f64>()
    }

    pub fn argmax(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}

/// Run the policy head on one state.
pub fn policy_forward(
    params: &NetworkParameters,
    state: &[f64],
) -> Result<ActionDistribution, NnError> {
    check_state(params, state)?;
    let mut g = Graph::new();
    let s = g.constant(Tensor::new(vec![1, state.len()], state.to_vec()));
    let nets = NetNodes::frozen(params);
    let logits = policy_logits_nodes(&mut g, &nets, s);
    let ls = g.log_softmax_rows(logits);
    let log_probs = g.value(ls).data().to_vec();
    let probs = log_probs.iter().map(|lp| lp.exp()).collect();
    Ok(ActionDistribution { probs, log_probs })
}

/// Run the value head on one state.
pub fn value_forward(params: &NetworkParameters, state: &[f64]) -> Result<f64, NnError> {
    check_state(params, state)?;
    let mut g = Graph::new();
    let s = g.constant(Tensor::new(vec![1, state.len()], state.to_vec()));
    let nets = NetNodes::frozen(params);
    let v = value_nodes(&mut g, &nets, s);
    Ok(g.value(v).item())
}

fn check_state(params: &NetworkParameters, state: &[f64]) -> Result<(), NnError> {
    if state.len() != params.arch().state_dim {
        return Err(NnError::ShapeMismatch(format!(
            "state has dimension {}, expected {}",
            state.len(),
            params.arch().state_dim
        )));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("state vector".into()));
    }
    Ok(())
}

/// One reconstruction step: mean squared error over the batch, backward,
/// optimizer step. Returns the pre-step loss.
pub fn autoencoder_train_step(
    params: &mut NetworkParameters,
    optimizer: &mut Adam,
    batch: &[&DepthMap],
) -> Result<f64, NnError> {
    let x = depth_batch_tensor(params.arch(), batch)?;
    let mut g = Graph::new();
    let xid = g.constant(x);
    let bound = params.bind(&mut g, |n| n.starts_with("enc.") || n.starts_with("dec."));
    let nets = NetNodes::trainable(params, &bound);
    let z = encoder_nodes(&mut g, &nets, xid);
    let recon = decoder_nodes(&mut g, &nets, z);
    let diff = g.sub(recon, xid);
    let sq = g.mul(diff, diff);
    let loss = g.mean_all(sq);
    let loss_value = g.value(loss).item();
    if !loss_value.is_finite() {
        return Err(NnError::NonFinite("reconstruction loss".into()));
    }
    g.backward(loss);
    optimizer.step(params, &bound.gradients(&g));
    Ok(loss_value)
}

/// Reverse sweep from `loss`, then one optimizer step over the bound
/// parameters. Returns the global L2 gradient norm.
pub fn backward_and_step(
    g: &mut Graph,
    loss: NodeId,
    bound: &BoundParams,
    params: &mut NetworkParameters,
    optimizer: &mut Adam,
) -> f64 {
    g.backward(loss);
    let grads = bound.gradients(g);
    let norm = grads
        .iter()
        .map(|(_, t)| t.squared_norm())
        .sum::<f64>()
        .sqrt();
    optimizer.step(params, &grads);
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::SensorParams;
    use approx::assert_relative_eq;

    fn small_arch() -> ArchConfig {
        ArchConfig {
            depth_height: 6,
            depth_width: 8,
            conv_channels: (2, 3),
            latent_dim: 5,
            state_dim: 7,
            hidden_dim: 4,
            action_count: 8,
        }
    }

    fn depth(arch: &ArchConfig, value: f64) -> DepthMap {
        let sensor = SensorParams {
            height: arch.depth_height,
            width: arch.depth_width,
            ..SensorParams::default()
        };
        DepthMap::constant(sensor, value * sensor.max_range)
    }

    #[test]
    fn zero_weights_give_bias_outputs() {
        let arch = small_arch();
        let mut params = NetworkParameters::init(arch, 0);
        for i in 0..params.tensors().len() {
            let t = params.tensor_mut(i);
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        let d = depth(&arch, 0.5);
        let latent = encoder_forward(&params, &d).unwrap();
        assert_eq!(latent, vec![0.0; arch.latent_dim]);

        let state = vec![0.3; arch.state_dim];
        let dist = policy_forward(&params, &state).unwrap();
        for p in &dist.probs {
            assert_relative_eq!(*p, 1.0 / 8.0, epsilon = 1e-12);
        }
        assert_eq!(value_forward(&params, &state).unwrap(), 0.0);
    }

    #[test]
    fn forward_passes_are_deterministic() {
        let arch = small_arch();
        let params = NetworkParameters::init(arch, 7);
        let d = depth(&arch, 0.25);
        assert_eq!(
            encoder_forward(&params, &d).unwrap(),
            encoder_forward(&params, &d).unwrap()
        );
        let state = vec![0.1; arch.state_dim];
        assert_eq!(
            value_forward(&params, &state).unwrap(),
            value_forward(&params, &state).unwrap()
        );
    }

    #[test]
    fn policy_probabilities_normalize_and_match_logits() {
        let arch = small_arch();
        let params = NetworkParameters::init(arch, 3);
        let state: Vec<f64> = (0..arch.state_dim).map(|i| (i as f64 * 0.37).sin()).collect();
        let dist = policy_forward(&params, &state).unwrap();
        let total: f64 = dist.probs.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
        assert!(dist.probs.iter().all(|p| *p > 0.0));
        for (p, lp) in dist.probs.iter().zip(&dist.log_probs) {
            assert_relative_eq!(p.ln(), *lp, epsilon = 1e-9);
        }
    }

    #[test]
    fn wrong_depth_shape_is_rejected() {
        let arch = small_arch();
        let params = NetworkParameters::init(arch, 0);
        let other = ArchConfig {
            depth_height: 4,
            depth_width: 4,
            ..arch
        };
        let d = depth(&other, 0.5);
        assert!(matches!(
            encoder_forward(&params, &d),
            Err(NnError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn autoencoder_loss_decreases_on_fixed_batch() {
        let arch = small_arch();
        let mut params = NetworkParameters::init(arch, 11);
        let mut opt = Adam::for_selected(&params, 3e-3, |n| {
            n.starts_with("enc.") || n.starts_with("dec.")
        });
        let maps: Vec<DepthMap> = (0..4)
            .map(|i| depth(&arch, 0.2 + 0.15 * i as f64))
            .collect();
        let refs: Vec<&DepthMap> = maps.iter().collect();

        let mut losses = Vec::new();
        for _ in 0..120 {
            losses.push(autoencoder_train_step(&mut params, &mut opt, &refs).unwrap());
        }
        // Average over 50-step windows must decrease.
        let head: f64 = losses[..50].iter().sum::<f64>() / 50.0;
        let tail: f64 = losses[losses.len() - 50..].iter().sum::<f64>() / 50.0;
        assert!(tail < head, "loss did not decrease: {head} -> {tail}");
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let arch = small_arch();
        let mut params = NetworkParameters::init(arch, 2);
        let before = params.clone();
        let mut opt = Adam::for_selected(&params, 0.0, |n| {
            n.starts_with("enc.") || n.starts_with("dec.")
        });
        let d = depth(&arch, 0.4);
        autoencoder_train_step(&mut params, &mut opt, &[&d]).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn perfect_reconstruction_has_zero_loss() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]));
        let diff = g.sub(x, x);
        let sq = g.mul(diff, diff);
        let loss = g.mean_all(sq);
        assert_eq!(g.value(loss).item(), 0.0);
    }

    #[test]
    fn paper_scale_arch_dimensions_check_out() {
        let arch = ArchConfig::for_depth(224, 224);
        assert_eq!(arch.conv1_out(), (112, 112));
        assert_eq!(arch.conv2_out(), (56, 56));
        let d16 = ArchConfig::default();
        assert_eq!(d16.conv1_out(), (8, 16));
        assert_eq!(d16.conv2_out(), (4, 8));
        assert_eq!(d16.flat_dim(), 16 * 4 * 8);
        // Odd sizes mirror exactly too.
        let odd = ArchConfig::for_depth(5, 7);
        let (h1, w1) = odd.conv1_out();
        assert_eq!((h1, w1), (3, 4));
        assert_eq!(odd.conv2_out(), (2, 2));
    }
}
