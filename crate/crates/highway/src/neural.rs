//! Minimal dense network with exact backpropagation, plus the TD-target and
//! dueling value/advantage machinery. Double precision throughout; plain
//! gradient descent only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuelingAgg {
    Max,
    Mean,
}

/// Fully connected network. Hidden layers use the rectifier; the output
/// layer activation is configurable so a trunk can expose rectified features.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: Vec<usize>,
    /// weights[l] is dims[l+1] x dims[l], row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub output_activation: Activation,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Vec<f64>,
    /// Post-activation output of every layer.
    activations: Vec<Vec<f64>>,
    /// Pre-activation values of every layer.
    pre_activations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)).
    pub fn init(dims: &[usize], output_activation: Activation, rng: &mut ChaCha8Rng) -> Mlp {
        assert!(dims.len() >= 2, "an Mlp needs at least one layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
            output_activation,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        if x.len() != self.dims[0] {
            return Err(Error::Shape(format!(
                "input length {} != expected {}",
                x.len(),
                self.dims[0]
            )));
        }
        let mut act = x.to_vec();
        let mut activations = Vec::with_capacity(self.layer_count());
        let mut pre_activations = Vec::with_capacity(self.layer_count());
        for l in 0..self.layer_count() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &w[i * n_in..(i + 1) * n_in];
                *zi += row.iter().zip(&act).map(|(wij, aj)| wij * aj).sum::<f64>();
            }
            let last = l == self.layer_count() - 1;
            let out: Vec<f64> = if !last || self.output_activation == Activation::Relu {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre_activations.push(z);
            activations.push(out.clone());
            act = out;
            let _ = n_out;
        }
        Ok((
            act,
            MlpCache {
                input: x.to_vec(),
                activations,
                pre_activations,
            },
        ))
    }

    /// Exact gradients of a scalar loss given dL/d(output). Also returns
    /// dL/d(input) so composed networks can chain.
    pub fn backward(&self, cache: &MlpCache, upstream: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let layers = self.layer_count();
        if cache.activations.len() != layers || upstream.len() != self.dims[layers] {
            return Err(Error::State("cache does not match this network".into()));
        }
        let mut dw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut db: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let relu_layer = l < layers - 1 || self.output_activation == Activation::Relu;
            if relu_layer {
                for (d, z) in delta.iter_mut().zip(&cache.pre_activations[l]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let n_in = self.dims[l];
            let prev: &[f64] = if l == 0 {
                &cache.input
            } else {
                &cache.activations[l - 1]
            };
            for (i, &di) in delta.iter().enumerate() {
                db[l][i] = di;
                let row = &mut dw[l][i * n_in..(i + 1) * n_in];
                for (wij, &aj) in row.iter_mut().zip(prev) {
                    *wij = di * aj;
                }
            }
            let mut next_delta = vec![0.0; n_in];
            let w = &self.weights[l];
            for (i, &di) in delta.iter().enumerate() {
                let row = &w[i * n_in..(i + 1) * n_in];
                for (nd, &wij) in next_delta.iter_mut().zip(row) {
                    *nd += di * wij;
                }
            }
            delta = next_delta;
        }
        Ok((MlpGrads { weights: dw, biases: db }, delta))
    }

    pub fn sgd_step(&mut self, grads: &MlpGrads, lr: f64) -> Result<()> {
        if grads.weights.len() != self.weights.len() {
            return Err(Error::Shape("gradient layer count mismatch".into()));
        }
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            if w.len() != g.len() {
                return Err(Error::Shape("gradient shape mismatch".into()));
            }
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= lr * gi;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (bi, gi) in b.iter_mut().zip(g) {
                *bi -= lr * gi;
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.layer_count() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape("flat parameter length mismatch".into()));
        }
        let mut off = 0;
        for l in 0..self.layer_count() {
            let nw = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn add(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in w {
                *x *= s;
            }
        }
    }
}

/// Max-subtraction dueling head: q_i = v + (a_i - max_j a_j). Pins
/// max_i q_i = v and leaves the argmax of the advantages unchanged.
pub fn dueling_aggregate(v: f64, a: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::Shape("empty advantage vector".into()));
    }
    let a_max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(a.iter().map(|&ai| v + ai - a_max).collect())
}

/// Mean-subtraction variant, kept behind the aggregation config flag.
pub fn dueling_aggregate_mean(v: f64, a: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::Shape("empty advantage vector".into()));
    }
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    Ok(a.iter().map(|&ai| v + ai - mean).collect())
}

/// Smallest index achieving the maximum.
pub fn argmax_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// TD target: r at terminal transitions, else r + gamma * max q_next.
/// `q_next` must come from the target parameters.
pub fn td_target(r: f64, q_next: &[f64], gamma: f64, terminal: bool) -> f64 {
    if terminal || q_next.is_empty() {
        r
    } else {
        r + gamma * q_next[argmax_action(q_next)]
    }
}

/// Batch-mean squared error.
pub fn mse_loss(pred: &[f64], targets: &[f64]) -> Result<f64> {
    if pred.len() != targets.len() || pred.is_empty() {
        return Err(Error::Shape("mse_loss length mismatch".into()));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(targets)
        .map(|(p, t)| (t - p) * (t - p))
        .sum::<f64>()
        / n)
}

/// Shared trunk feeding a scalar value stream and an |A|-wide advantage
/// stream, combined by the configured aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingNet {
    pub trunk: Mlp,
    pub value: Mlp,
    pub advantage: Mlp,
    pub agg: DuelingAgg,
}

#[derive(Debug, Clone)]
pub struct DuelingCache {
    trunk: MlpCache,
    value: MlpCache,
    advantage: MlpCache,
    advantages: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DuelingGrads {
    pub trunk: MlpGrads,
    pub value: MlpGrads,
    pub advantage: MlpGrads,
}

impl DuelingNet {
    pub fn init(
        input: usize,
        width: usize,
        actions: usize,
        agg: DuelingAgg,
        rng: &mut ChaCha8Rng,
    ) -> DuelingNet {
        DuelingNet {
            trunk: Mlp::init(&[input, width], Activation::Relu, rng),
            value: Mlp::init(&[width, width, 1], Activation::Identity, rng),
            advantage: Mlp::init(&[width, width, actions], Activation::Identity, rng),
            agg,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, DuelingCache)> {
        let (features, trunk_cache) = self.trunk.forward(x)?;
        let (v, value_cache) = self.value.forward(&features)?;
        let (a, advantage_cache) = self.advantage.forward(&features)?;
        let q = match self.agg {
            DuelingAgg::Max => dueling_aggregate(v[0], &a)?,
            DuelingAgg::Mean => dueling_aggregate_mean(v[0], &a)?,
        };
        Ok((
            q,
            DuelingCache {
                trunk: trunk_cache,
                value: value_cache,
                advantage: advantage_cache,
                advantages: a,
            },
        ))
    }

    pub fn backward(&self, cache: &DuelingCache, upstream: &[f64]) -> Result<DuelingGrads> {
        let n = cache.advantages.len();
        if upstream.len() != n {
            return Err(Error::Shape("upstream length != action count".into()));
        }
        let sum: f64 = upstream.iter().sum();
        let mut da = upstream.to_vec();
        match self.agg {
            DuelingAgg::Max => {
                // Subgradient routes through the first maximal advantage.
                let idx = argmax_action(&cache.advantages);
                da[idx] -= sum;
            }
            DuelingAgg::Mean => {
                for d in da.iter_mut() {
                    *d -= sum / n as f64;
                }
            }
        }
        let (value_grads, d_feat_v) = self.value.backward(&cache.value, &[sum])?;
        let (advantage_grads, d_feat_a) = self.advantage.backward(&cache.advantage, &da)?;
        let d_features: Vec<f64> = d_feat_v.iter().zip(&d_feat_a).map(|(a, b)| a + b).collect();
        let (trunk_grads, _) = self.trunk.backward(&cache.trunk, &d_features)?;
        Ok(DuelingGrads {
            trunk: trunk_grads,
            value: value_grads,
            advantage: advantage_grads,
        })
    }

    pub fn sgd_step(&mut self, grads: &DuelingGrads, lr: f64) -> Result<()> {
        self.trunk.sgd_step(&grads.trunk, lr)?;
        self.value.sgd_step(&grads.value, lr)?;
        self.advantage.sgd_step(&grads.advantage, lr)
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.value.param_count() + self.advantage.param_count()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = self.trunk.flat_params();
        out.extend(self.value.flat_params());
        out.extend(self.advantage.flat_params());
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape("flat parameter length mismatch".into()));
        }
        let (nt, nv) = (self.trunk.param_count(), self.value.param_count());
        self.trunk.set_flat_params(&flat[..nt])?;
        self.value.set_flat_params(&flat[nt..nt + nv])?;
        self.advantage.set_flat_params(&flat[nt + nv..])
    }
}

impl DuelingGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.trunk.flat();
        out.extend(self.value.flat());
        out.extend(self.advantage.flat());
        out
    }

    pub fn add(&mut self, other: &DuelingGrads) {
        self.trunk.add(&other.trunk);
        self.value.add(&other.value);
        self.advantage.add(&other.advantage);
    }

    pub fn scale(&mut self, s: f64) {
        self.trunk.scale(s);
        self.value.scale(s);
        self.advantage.scale(s);
    }
}

/// A Q-value network of either topology, behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum QNetwork {
    Mlp(Mlp),
    Dueling(DuelingNet),
}

#[derive(Debug, Clone)]
pub enum QCache {
    Mlp(MlpCache),
    Dueling(DuelingCache),
}

#[derive(Debug, Clone)]
pub enum QGrads {
    Mlp(MlpGrads),
    Dueling(DuelingGrads),
}

impl QNetwork {
    /// Plain input -> width -> width -> actions network.
    pub fn new_dqn(input: usize, width: usize, actions: usize, seed: u64) -> QNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QNetwork::Mlp(Mlp::init(
            &[input, width, width, actions],
            Activation::Identity,
            &mut rng,
        ))
    }

    pub fn new_dueling(
        input: usize,
        width: usize,
        actions: usize,
        agg: DuelingAgg,
        seed: u64,
    ) -> QNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QNetwork::Dueling(DuelingNet::init(input, width, actions, agg, &mut rng))
    }

    pub fn input_dim(&self) -> usize {
        match self {
            QNetwork::Mlp(m) => m.dims[0],
            QNetwork::Dueling(d) => d.trunk.dims[0],
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            QNetwork::Mlp(m) => *m.dims.last().unwrap(),
            QNetwork::Dueling(d) => *d.advantage.dims.last().unwrap(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, QCache)> {
        match self {
            QNetwork::Mlp(m) => {
                let (q, c) = m.forward(x)?;
                Ok((q, QCache::Mlp(c)))
            }
            QNetwork::Dueling(d) => {
                let (q, c) = d.forward(x)?;
                Ok((q, QCache::Dueling(c)))
            }
        }
    }

    pub fn q_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    pub fn backward(&self, cache: &QCache, upstream: &[f64]) -> Result<QGrads> {
        match (self, cache) {
            (QNetwork::Mlp(m), QCache::Mlp(c)) => {
                let (g, _) = m.backward(c, upstream)?;
                Ok(QGrads::Mlp(g))
            }
            (QNetwork::Dueling(d), QCache::Dueling(c)) => {
                Ok(QGrads::Dueling(d.backward(c, upstream)?))
            }
            _ => Err(Error::State("cache does not match this network".into())),
        }
    }

    pub fn sgd_step(&mut self, grads: &QGrads, lr: f64) -> Result<()> {
        if lr <= 0.0 {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        match (self, grads) {
            (QNetwork::Mlp(m), QGrads::Mlp(g)) => m.sgd_step(g, lr),
            (QNetwork::Dueling(d), QGrads::Dueling(g)) => d.sgd_step(g, lr),
            _ => Err(Error::Shape("gradient does not match this network".into())),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            QNetwork::Mlp(m) => m.param_count(),
            QNetwork::Dueling(d) => d.param_count(),
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        match self {
            QNetwork::Mlp(m) => m.flat_params(),
            QNetwork::Dueling(d) => d.flat_params(),
        }
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            QNetwork::Mlp(m) => m.set_flat_params(flat),
            QNetwork::Dueling(d) => d.set_flat_params(flat),
        }
    }
}

impl QGrads {
    pub fn flat(&self) -> Vec<f64> {
        match self {
            QGrads::Mlp(g) => g.flat(),
            QGrads::Dueling(g) => g.flat(),
        }
    }

    pub fn add(&mut self, other: &QGrads) {
        match (self, other) {
            (QGrads::Mlp(a), QGrads::Mlp(b)) => a.add(b),
            (QGrads::Dueling(a), QGrads::Dueling(b)) => a.add(b),
            _ => panic!("gradient variant mismatch"),
        }
    }

    pub fn scale(&mut self, s: f64) {
        match self {
            QGrads::Mlp(g) => g.scale(s),
            QGrads::Dueling(g) => g.scale(s),
        }
    }
}

fn mlp_kink_margin(m: &Mlp, cache: &MlpCache) -> f64 {
    let mut margin = f64::INFINITY;
    for (l, z) in cache.pre_activations.iter().enumerate() {
        let last = l == m.layer_count() - 1;
        if !last || m.output_activation == Activation::Relu {
            for &v in z {
                margin = margin.min(v.abs());
            }
        }
    }
    margin
}

/// Distance of the forward pass at `x` to the nearest non-differentiable
/// point (relu zero crossings, and the advantage argmax tie in the dueling
/// head). Finite-difference gradient checks are only valid when this margin
/// comfortably exceeds the probe step.
pub fn kink_margin(net: &QNetwork, x: &[f64]) -> Result<f64> {
    let (_, cache) = net.forward(x)?;
    Ok(match (&net, cache) {
        (QNetwork::Mlp(m), QCache::Mlp(c)) => mlp_kink_margin(m, &c),
        (QNetwork::Dueling(d), QCache::Dueling(c)) => {
            let mut margin = mlp_kink_margin(&d.trunk, &c.trunk)
                .min(mlp_kink_margin(&d.value, &c.value))
                .min(mlp_kink_margin(&d.advantage, &c.advantage));
            if d.agg == DuelingAgg::Max {
                let mut sorted = c.advantages.clone();
                sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if sorted.len() > 1 {
                    margin = margin.min(sorted[0] - sorted[1]);
                }
            }
            margin
        }
        _ => unreachable!("cache variant matches network variant"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = Mlp::init(&[3, 4, 2], Activation::Identity, &mut rng);
        m.set_flat_params(&vec![0.0; m.param_count()]).unwrap();
        let (y, _) = m.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passthrough() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = Mlp::init(&[3, 3], Activation::Identity, &mut rng);
        let mut flat = vec![0.0; m.param_count()];
        for i in 0..3 {
            flat[i * 3 + i] = 1.0;
        }
        m.set_flat_params(&flat).unwrap();
        let x = [0.5, -1.25, 2.0];
        let (y, _) = m.forward(&x).unwrap();
        assert_eq!(y, x.to_vec());
    }

    #[test]
    fn forward_matches_direct_matrix_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = Mlp::init(&[3, 4, 2], Activation::Identity, &mut rng);
        let x = [0.3, -0.7, 1.1];
        let (y, _) = m.forward(&x).unwrap();
        // straight-line re-evaluation
        let mut h = [0.0; 4];
        for i in 0..4 {
            let mut z = m.biases[0][i];
            for j in 0..3 {
                z += m.weights[0][i * 3 + j] * x[j];
            }
            h[i] = z.max(0.0);
        }
        for i in 0..2 {
            let mut z = m.biases[1][i];
            for j in 0..4 {
                z += m.weights[1][i * 4 + j] * h[j];
            }
            assert!((y[i] - z).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Mlp::init(&[3, 2], Activation::Identity, &mut rng);
        assert!(m.forward(&[1.0, 2.0]).is_err());
        assert!(dueling_aggregate(1.0, &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dueling_aggregate_values() {
        let q = dueling_aggregate(1.0, &[0.5, 0.2, 0.5]).unwrap();
        assert_eq!(q, vec![1.0, 0.7, 1.0]);
        let q = dueling_aggregate(2.5, &[0.0, 0.0]).unwrap();
        assert_eq!(q, vec![2.5, 2.5]);
    }

    #[test]
    fn argmax_and_td_target() {
        assert_eq!(argmax_action(&[0.0, 3.0, 1.0]), 1);
        assert_eq!(argmax_action(&[2.0, 2.0]), 0);
        assert_eq!(td_target(-1.0, &[5.0], 0.8, true), -1.0);
        assert!((td_target(1.0, &[1.0, 2.0], 0.8, false) - 2.6).abs() < 1e-12);
        assert_eq!(td_target(0.5, &[9.0], 0.0, false), 0.5);
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0], &[2.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
    }

    #[test]
    fn single_neuron_hand_gradient() {
        // y = w*x, loss (y-t)^2: dL/dw = 2(wx - t) x = 8 at w=1, x=2, t=0.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = Mlp::init(&[1, 1], Activation::Identity, &mut rng);
        m.set_flat_params(&[1.0, 0.0]).unwrap();
        let (y, cache) = m.forward(&[2.0]).unwrap();
        let upstream = [2.0 * (y[0] - 0.0)];
        let (g, _) = m.backward(&cache, &upstream).unwrap();
        assert_eq!(g.weights[0][0], 8.0);
        assert_eq!(g.biases[0][0], 4.0);
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::new_dueling(4, 6, 3, DuelingAgg::Max, 9);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = net.forward(&x).unwrap();
        let g = net.backward(&cache, &[0.0, 0.0, 0.0]).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sgd_update_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = Mlp::init(&[1, 1], Activation::Identity, &mut rng);
        m.set_flat_params(&[1.0, 0.0]).unwrap();
        let g = MlpGrads {
            weights: vec![vec![2.0]],
            biases: vec![vec![0.0]],
        };
        m.sgd_step(&g, 0.1).unwrap();
        assert!((m.weights[0][0] - 0.8).abs() < 1e-15);
        // near-zero lr limit leaves parameters effectively unchanged
        m.sgd_step(&g, 1e-30).unwrap();
        assert!((m.weights[0][0] - 0.8).abs() < 1e-20);
    }

    #[test]
    fn init_determinism() {
        let a = QNetwork::new_dueling(23, 16, 5, DuelingAgg::Max, 7);
        let b = QNetwork::new_dueling(23, 16, 5, DuelingAgg::Max, 7);
        assert_eq!(a.flat_params(), b.flat_params());
        let x = vec![0.1; 23];
        assert_eq!(a.q_values(&x).unwrap(), b.q_values(&x).unwrap());
    }
}
