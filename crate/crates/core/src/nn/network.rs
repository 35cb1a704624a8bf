use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::conv::{conv_backward, conv_forward, ConvShape};
use super::gemm::{gemm, Strided};
use crate::error::{Error, Result};
use crate::pipeline::{flatten_size, Observation, ObservationSpec, OBSERVATION_CHANNELS};
use crate::world::Action;

pub type QValues = [f64; Action::COUNT];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub n_conv_layers: usize,
    pub n_kernels: usize,
    pub kernel_size: usize,
    pub hidden_sizes: Vec<usize>,
    /// Channels per branch input. Observations carry 4; any extra channels
    /// are fed as zeros.
    pub input_channels: usize,
    pub action_count: usize,
    /// Flying time is divided by this before entering the dense layers.
    pub max_flying_time: u32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_conv_layers: 2,
            n_kernels: 16,
            kernel_size: 5,
            hidden_sizes: vec![256, 256, 256],
            input_channels: OBSERVATION_CHANNELS,
            action_count: Action::COUNT,
            max_flying_time: 150,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size % 2 == 0 {
            return Err(Error::InvalidConfig(format!("kernel size {} must be odd", self.kernel_size)));
        }
        if self.action_count != Action::COUNT {
            return Err(Error::InvalidConfig(format!("action count must be {}", Action::COUNT)));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig("hidden sizes must be a non-empty list of positive widths".into()));
        }
        if self.n_kernels == 0 {
            return Err(Error::InvalidConfig("need at least one kernel".into()));
        }
        if self.input_channels < OBSERVATION_CHANNELS {
            return Err(Error::InvalidConfig(format!(
                "input_channels {} is below the {OBSERVATION_CHANNELS} observation channels",
                self.input_channels
            )));
        }
        if self.max_flying_time == 0 {
            return Err(Error::InvalidConfig("max_flying_time must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Local,
    Global,
}

/// Named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer {
    shape: ConvShape,
    weight: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct BranchLayout {
    branch: Branch,
    in_side: usize,
    convs: Vec<ConvLayer>,
}

impl BranchLayout {
    fn out_len(&self) -> usize {
        let last = self.convs.last().expect("at least one conv layer");
        last.shape.out_channels * last.shape.out_side().pow(2)
    }

    fn input_side(&self) -> usize {
        self.in_side
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weight: usize,
    bias: usize,
    relu: bool,
}

/// Parameter layout derived from the network config, the observation spec
/// and the map size.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    branches: Vec<BranchLayout>,
    dense: Vec<DenseLayer>,
    blocks: Vec<ParamBlock>,
    flatten: usize,
    total: usize,
}

impl NetworkLayout {
    pub fn new(config: &NetworkConfig, spec: ObservationSpec, map_size: usize) -> Result<Self> {
        config.validate()?;
        if config.n_conv_layers == 0 {
            return Err(Error::InvalidConfig("need at least one conv layer per branch".into()));
        }
        let expected_flatten =
            flatten_size(spec, map_size, config.n_kernels, config.n_conv_layers, config.kernel_size)?;

        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| -> usize {
            let block = ParamBlock { name, shape, offset };
            offset += block.len();
            let start = block.offset;
            blocks.push(block);
            start
        };

        let mut branches = Vec::new();
        let mut sides = Vec::new();
        if spec.local_size > 0 {
            sides.push((Branch::Local, spec.local_size));
        }
        sides.push((Branch::Global, spec.global_side(map_size)));
        for (branch, in_side) in sides {
            let tag = match branch {
                Branch::Local => "local",
                Branch::Global => "global",
            };
            let mut convs = Vec::new();
            let mut side = in_side;
            for i in 0..config.n_conv_layers {
                let shape = ConvShape {
                    in_channels: if i == 0 { config.input_channels } else { config.n_kernels },
                    out_channels: config.n_kernels,
                    kernel: config.kernel_size,
                    in_side: side,
                };
                let k = config.kernel_size;
                let weight = push(format!("{tag}.conv{i}.weight"), vec![shape.out_channels, shape.in_channels, k, k]);
                let bias = push(format!("{tag}.conv{i}.bias"), vec![shape.out_channels]);
                side = shape.out_side();
                convs.push(ConvLayer { shape, weight, bias });
            }
            branches.push(BranchLayout { branch, in_side, convs });
        }

        let flatten = branches.iter().map(BranchLayout::out_len).sum::<usize>() + 1;
        if flatten != expected_flatten {
            return Err(Error::ShapeMismatch(format!(
                "conv stack flattens to {flatten}, expected {expected_flatten}"
            )));
        }

        let mut dense = Vec::new();
        let mut inputs = flatten;
        let widths = config
            .hidden_sizes
            .iter()
            .map(|&w| (w, true))
            .chain(std::iter::once((config.action_count, false)));
        for (i, (outputs, relu)) in widths.enumerate() {
            let name = if relu { format!("dense{i}") } else { "output".to_string() };
            let weight = push(format!("{name}.weight"), vec![outputs, inputs]);
            let bias = push(format!("{name}.bias"), vec![outputs]);
            dense.push(DenseLayer {
                inputs,
                outputs,
                weight,
                bias,
                relu,
            });
            inputs = outputs;
        }

        Ok(Self {
            branches,
            dense,
            blocks,
            flatten,
            total: offset,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.total
    }

    pub fn flatten_len(&self) -> usize {
        self.flatten
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }
}

/// Exact number of trainable weights and biases.
pub fn parameter_count(config: &NetworkConfig, spec: ObservationSpec, map_size: usize) -> Result<usize> {
    Ok(NetworkLayout::new(config, spec, map_size)?.parameter_count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    config: NetworkConfig,
    spec: ObservationSpec,
    map_size: usize,
    layout: NetworkLayout,
    params: Vec<f64>,
}

/// Activations of one batched forward pass, kept for backpropagation.
#[derive(Debug)]
pub struct ForwardPass {
    batch: usize,
    /// Per branch: input followed by each conv output, `(C, B, s, s)`.
    conv_acts: Vec<Vec<Vec<f64>>>,
    /// Dense inputs: flattened features, then each hidden activation.
    dense_acts: Vec<Vec<f64>>,
    q: Vec<f64>,
}

impl ForwardPass {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn q(&self, sample: usize) -> QValues {
        let mut out = [0.0; Action::COUNT];
        out.copy_from_slice(&self.q[sample * Action::COUNT..(sample + 1) * Action::COUNT]);
        out
    }

    pub fn q_all(&self) -> Vec<QValues> {
        (0..self.batch).map(|b| self.q(b)).collect()
    }

    /// Flattened features (conv outputs of both branches and flying time)
    /// for one sample.
    pub fn features(&self, sample: usize) -> &[f64] {
        let width = self.dense_acts[0].len() / self.batch;
        &self.dense_acts[0][sample * width..(sample + 1) * width]
    }
}

impl QNetwork {
    /// Fan-in scaled uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        config: NetworkConfig,
        spec: ObservationSpec,
        map_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(config, spec, map_size)?;
        for block in net.layout.blocks.clone() {
            if block.name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = block.shape[1..].iter().product();
            let gain = if block.name.starts_with("output") { 3.0 } else { 6.0 };
            let limit = (gain / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for p in &mut net.params[block.range()] {
                *p = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn zeros(config: NetworkConfig, spec: ObservationSpec, map_size: usize) -> Result<Self> {
        let layout = NetworkLayout::new(&config, spec, map_size)?;
        let params = vec![0.0; layout.total];
        Ok(Self {
            config,
            spec,
            map_size,
            layout,
            params,
        })
    }

    pub fn from_params(config: NetworkConfig, spec: ObservationSpec, map_size: usize, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(config, spec, map_size)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters given, layout needs {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn spec(&self) -> ObservationSpec {
        self.spec
    }

    pub fn map_size(&self) -> usize {
        self.map_size
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn flatten_len(&self) -> usize {
        self.layout.flatten
    }

    /// `self <- (1 - tau) * self + tau * online`.
    pub fn soft_update_from(&mut self, online: &QNetwork, tau: f64) -> Result<()> {
        if online.params.len() != self.params.len() {
            return Err(Error::ShapeMismatch("soft update between different layouts".into()));
        }
        if tau == 1.0 {
            self.params.copy_from_slice(&online.params);
        } else {
            for (t, &o) in self.params.iter_mut().zip(&online.params) {
                *t = (1.0 - tau) * *t + tau * o;
            }
        }
        Ok(())
    }

    fn check_obs(&self, obs: &Observation) -> Result<()> {
        let want_local = self.spec.local_size;
        let want_global = self.spec.global_side(self.map_size);
        let ch = OBSERVATION_CHANNELS;
        if obs.local_side != want_local
            || obs.global_side != want_global
            || obs.local.len() != ch * want_local * want_local
            || obs.global.len() != ch * want_global * want_global
        {
            return Err(Error::ShapeMismatch(format!(
                "observation local {}x{} / global {}x{}, network expects {want_local} / {want_global}",
                obs.local_side, obs.local_side, obs.global_side, obs.global_side
            )));
        }
        Ok(())
    }

    /// Packs one branch of the batch as `(C_in, B, s, s)`.
    fn pack_input(&self, branch: &BranchLayout, batch: &[&Observation]) -> Vec<f64> {
        let s = branch.input_side();
        let plane = s * s;
        let n = batch.len();
        let mut x = vec![0.0; self.config.input_channels * n * plane];
        for (b, obs) in batch.iter().enumerate() {
            let src = match branch.branch {
                Branch::Local => &obs.local,
                Branch::Global => &obs.global,
            };
            for c in 0..OBSERVATION_CHANNELS {
                let dst = &mut x[(c * n + b) * plane..][..plane];
                for (d, &v) in dst.iter_mut().zip(&src[c * plane..(c + 1) * plane]) {
                    *d = v as f64;
                }
            }
        }
        x
    }

    pub fn forward_batch(&self, batch: &[&Observation]) -> Result<ForwardPass> {
        for obs in batch {
            self.check_obs(obs)?;
        }
        let n = batch.len();
        let p = &self.params;

        let mut conv_acts = Vec::with_capacity(self.layout.branches.len());
        for branch in &self.layout.branches {
            let mut acts = vec![self.pack_input(branch, batch)];
            for layer in &branch.convs {
                let w = &p[layer.weight..layer.weight + layer.shape.weight_len()];
                let bias = &p[layer.bias..layer.bias + layer.shape.out_channels];
                let y = conv_forward(&layer.shape, w, bias, acts.last().unwrap(), n);
                acts.push(y);
            }
            conv_acts.push(acts);
        }

        // Flatten each sample as (channel, row, col) per branch, then time.
        let width = self.layout.flatten;
        let mut z = vec![0.0; n * width];
        for b in 0..n {
            let row = &mut z[b * width..(b + 1) * width];
            let mut at = 0;
            for (branch, acts) in self.layout.branches.iter().zip(&conv_acts) {
                let last = branch.convs.last().unwrap().shape;
                let o2 = last.out_side().pow(2);
                let y = acts.last().unwrap();
                for c in 0..last.out_channels {
                    row[at..at + o2].copy_from_slice(&y[(c * n + b) * o2..][..o2]);
                    at += o2;
                }
            }
            row[at] = batch[b].flying_time as f64 / self.config.max_flying_time as f64;
        }

        let mut dense_acts = vec![z];
        let mut q = Vec::new();
        for layer in &self.layout.dense {
            let input = dense_acts.last().unwrap();
            let mut out = vec![0.0; n * layer.outputs];
            let bias = &p[layer.bias..layer.bias + layer.outputs];
            for row in out.chunks_exact_mut(layer.outputs) {
                row.copy_from_slice(bias);
            }
            gemm(
                n,
                layer.inputs,
                layer.outputs,
                1.0,
                Strided::row_major(input, layer.inputs),
                Strided::transposed(&p[layer.weight..layer.weight + layer.inputs * layer.outputs], layer.inputs),
                1.0,
                &mut out,
                layer.outputs,
            );
            if layer.relu {
                for v in &mut out {
                    *v = v.max(0.0);
                }
                dense_acts.push(out);
            } else {
                q = out;
            }
        }

        Ok(ForwardPass {
            batch: n,
            conv_acts,
            dense_acts,
            q,
        })
    }

    pub fn q_values(&self, obs: &Observation) -> Result<QValues> {
        Ok(self.forward_batch(&[obs])?.q(0))
    }

    pub fn q_values_batch(&self, batch: &[&Observation]) -> Result<Vec<QValues>> {
        Ok(self.forward_batch(batch)?.q_all())
    }

    /// Gradient of the loss w.r.t. every parameter, given `dq`, the
    /// gradient w.r.t. the Q-values (`batch x 6`, row-major), summed over
    /// the batch.
    pub fn backward(&self, pass: &ForwardPass, dq: &[f64]) -> Result<Vec<f64>> {
        let mut grad = Vec::new();
        self.backward_into(pass, dq, &mut grad)?;
        Ok(grad)
    }

    /// As [`QNetwork::backward`], reusing `grad` as the output buffer.
    pub fn backward_into(&self, pass: &ForwardPass, dq: &[f64], grad: &mut Vec<f64>) -> Result<()> {
        let n = pass.batch;
        if dq.len() != n * Action::COUNT {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient has {} values for a batch of {n}",
                dq.len()
            )));
        }
        let p = &self.params;
        grad.clear();
        grad.resize(p.len(), 0.0);

        let mut upstream = dq.to_vec();
        for (li, layer) in self.layout.dense.iter().enumerate().rev() {
            let input = &pass.dense_acts[li];
            let (ins, outs) = (layer.inputs, layer.outputs);
            // dW (outs x ins) += up^T (outs x n) * input (n x ins)
            gemm(
                outs,
                n,
                ins,
                1.0,
                Strided::transposed(&upstream, outs),
                Strided::row_major(input, ins),
                1.0,
                &mut grad[layer.weight..layer.weight + outs * ins],
                ins,
            );
            let db = &mut grad[layer.bias..layer.bias + outs];
            for row in upstream.chunks_exact(outs) {
                for (g, &u) in db.iter_mut().zip(row) {
                    *g += u;
                }
            }
            // d input (n x ins) = up (n x outs) * W (outs x ins)
            let mut down = vec![0.0; n * ins];
            gemm(
                n,
                outs,
                ins,
                1.0,
                Strided::row_major(&upstream, outs),
                Strided::row_major(&p[layer.weight..layer.weight + outs * ins], ins),
                0.0,
                &mut down,
                ins,
            );
            if li > 0 {
                // input was a ReLU output
                for (d, &a) in down.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            upstream = down;
        }

        // Scatter the feature gradient back onto each branch output.
        let width = self.layout.flatten;
        let mut at = 0;
        for (bi, branch) in self.layout.branches.iter().enumerate() {
            let last = branch.convs.last().unwrap().shape;
            let o2 = last.out_side().pow(2);
            let mut dy = vec![0.0; last.out_channels * n * o2];
            for b in 0..n {
                let row = &upstream[b * width..(b + 1) * width];
                for c in 0..last.out_channels {
                    dy[(c * n + b) * o2..][..o2].copy_from_slice(&row[at + c * o2..at + (c + 1) * o2]);
                }
            }
            at += last.out_channels * o2;

            let acts = &pass.conv_acts[bi];
            for (ci, layer) in branch.convs.iter().enumerate().rev() {
                let wl = layer.shape.weight_len();
                let (gw, gb) = {
                    let (lo, hi) = grad.split_at_mut(layer.bias);
                    (&mut lo[layer.weight..layer.weight + wl], &mut hi[..layer.shape.out_channels])
                };
                let dx = conv_backward(
                    &layer.shape,
                    &p[layer.weight..layer.weight + wl],
                    &acts[ci],
                    &acts[ci + 1],
                    &mut dy,
                    n,
                    gw,
                    gb,
                    ci > 0,
                );
                if let Some(dx) = dx {
                    dy = dx;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn obs_for(spec: ObservationSpec, map_size: usize, rng: &mut SimRng) -> Observation {
        let gs = spec.global_side(map_size);
        let l = spec.local_size;
        Observation {
            local_side: l,
            global_side: gs,
            local: (0..4 * l * l).map(|_| rng.random_range(-1.0..1.0)).collect(),
            global: (0..4 * gs * gs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            flying_time: rng.random_range(0..50),
        }
    }

    #[test]
    fn table_parameter_counts() {
        let six = NetworkConfig {
            input_channels: 6,
            ..NetworkConfig::default()
        };
        assert_eq!(parameter_count(&six, ObservationSpec::new(17, 3), 32).unwrap(), 1_175_302);
        assert_eq!(parameter_count(&six, ObservationSpec::new(17, 5), 50).unwrap(), 978_694);
        let four = NetworkConfig::default();
        assert_eq!(parameter_count(&four, ObservationSpec::new(17, 3), 32).unwrap(), 1_173_702);
        assert_eq!(parameter_count(&four, ObservationSpec::new(17, 5), 50).unwrap(), 977_094);
    }

    #[test]
    fn zero_weights_give_zero_q() {
        let spec = ObservationSpec::new(5, 2);
        let cfg = NetworkConfig {
            n_conv_layers: 1,
            n_kernels: 2,
            kernel_size: 3,
            hidden_sizes: vec![4],
            ..NetworkConfig::default()
        };
        let net = QNetwork::zeros(cfg, spec, 5).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let q = net.q_values(&obs_for(spec, 5, &mut rng)).unwrap();
        assert_eq!(q, [0.0; 6]);
    }

    #[test]
    fn batch_forward_equals_single_forward() {
        let spec = ObservationSpec::new(5, 2);
        let cfg = NetworkConfig {
            n_conv_layers: 2,
            n_kernels: 3,
            kernel_size: 3,
            hidden_sizes: vec![8, 8],
            ..NetworkConfig::default()
        };
        let mut rng = SimRng::seed_from_u64(1);
        let net = QNetwork::new(cfg, spec, 6, &mut rng).unwrap();
        let obs: Vec<Observation> = (0..4).map(|_| obs_for(spec, 6, &mut rng)).collect();
        let refs: Vec<&Observation> = obs.iter().collect();
        let batched = net.q_values_batch(&refs).unwrap();
        for (o, qb) in obs.iter().zip(&batched) {
            let q = net.q_values(o).unwrap();
            for (a, b) in q.iter().zip(qb) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_observation_is_rejected() {
        let spec = ObservationSpec::new(5, 2);
        let cfg = NetworkConfig {
            n_conv_layers: 1,
            n_kernels: 2,
            kernel_size: 3,
            hidden_sizes: vec![4],
            ..NetworkConfig::default()
        };
        let net = QNetwork::zeros(cfg, spec, 5).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let wrong = obs_for(ObservationSpec::new(3, 2), 5, &mut rng);
        assert!(matches!(net.q_values(&wrong), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let spec = ObservationSpec::new(5, 2);
        let cfg = NetworkConfig {
            n_conv_layers: 1,
            n_kernels: 2,
            kernel_size: 3,
            hidden_sizes: vec![4],
            ..NetworkConfig::default()
        };
        let mut rng = SimRng::seed_from_u64(2);
        let net = QNetwork::new(cfg, spec, 5, &mut rng).unwrap();
        let o = obs_for(spec, 5, &mut rng);
        let pass = net.forward_batch(&[&o]).unwrap();
        let g = net.backward(&pass, &[0.0; 6]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_dense_layer_gradient_by_hand() {
        // Smallest net: 1x1 global input, 1x1 kernel, one hidden unit.
        // Flatten = 1 feature + time. With all weights known, dQ_a/dW_out[a]
        // equals the hidden activation.
        let spec = ObservationSpec::new(0, 1);
        let cfg = NetworkConfig {
            n_conv_layers: 1,
            n_kernels: 1,
            kernel_size: 1,
            hidden_sizes: vec![1],
            max_flying_time: 10,
            ..NetworkConfig::default()
        };
        let mut net = QNetwork::zeros(cfg, spec, 1).unwrap();
        let layout = net.layout().clone();
        let find = |name: &str| layout.blocks().iter().find(|b| b.name == name).unwrap().clone();
        let set = |net: &mut QNetwork, name: &str, vals: &[f64]| {
            let b = find(name);
            net.params_mut()[b.range()].copy_from_slice(vals);
        };
        set(&mut net, "global.conv0.weight", &[1.0, 0.0, 0.0, 2.0]);
        set(&mut net, "dense0.weight", &[0.5, 1.0]);
        set(&mut net, "output.weight", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let obs = Observation {
            local_side: 0,
            global_side: 1,
            local: vec![],
            global: vec![0.0, 1.0, 1.0, 0.25], // landing, nfz, obstacle, target
            flying_time: 5,
        };
        // conv: 1*0 + 2*0.25 = 0.5 ; hidden = relu(0.5*0.5 + 1.0*0.5) = 0.75
        let pass = net.forward_batch(&[&obs]).unwrap();
        assert_eq!(pass.features(0), &[0.5, 0.5]);
        let q = pass.q(0);
        assert!((q[2] - 3.0 * 0.75).abs() < 1e-12);
        // dL/dq = e_2 (only action 2)
        let mut dq = [0.0; 6];
        dq[2] = 1.0;
        let g = net.backward(&pass, &dq).unwrap();
        let out_w = &g[find("output.weight").range()];
        assert_eq!(out_w, &[0.0, 0.0, 0.75, 0.0, 0.0, 0.0]);
        assert_eq!(&g[find("output.bias").range()], &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        // hidden grad = 3; dense0.weight grad = 3 * features
        assert_eq!(&g[find("dense0.weight").range()], &[1.5, 1.5]);
        // conv grad = 3 * 0.5 * input channels
        assert_eq!(&g[find("global.conv0.weight").range()], &[0.0, 1.5, 1.5, 0.375]);
    }
}
