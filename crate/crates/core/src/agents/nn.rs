//! Minimal dueling Q-network with hand-written backpropagation and Adam.
//!
//! All weights live in one flat parameter vector so target sync, optimizer
//! state and checkpoints are plain slice copies. Dense layers store weights
//! row-major as `[out][in]` followed by the bias.

use rand::Rng;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub input: usize,
    /// Widths of the shared trunk layers.
    pub trunk: Vec<usize>,
    /// Width of the hidden layer in each head.
    pub head: usize,
    pub actions: usize,
}

impl Topology {
    pub fn dueling(input: usize, trunk: &[usize], head: usize, actions: usize) -> Self {
        Self {
            input,
            trunk: trunk.to_vec(),
            head,
            actions,
        }
    }

    pub fn describe(&self) -> String {
        let trunk: Vec<String> = self.trunk.iter().map(usize::to_string).collect();
        format!("{}-{}|{}|{}", self.input, trunk.join("-"), self.head, self.actions)
    }
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    inp: usize,
    out: usize,
    offset: usize,
}

impl Dense {
    fn len(&self) -> usize {
        self.inp * self.out + self.out
    }

    fn forward(&self, p: &[f64], x: &[f64], y: &mut Vec<f64>, relu: bool) {
        let w = &p[self.offset..self.offset + self.inp * self.out];
        let b = &p[self.offset + self.inp * self.out..self.offset + self.len()];
        y.clear();
        for o in 0..self.out {
            let row = &w[o * self.inp..(o + 1) * self.inp];
            let mut acc = b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            y.push(if relu { acc.max(0.0) } else { acc });
        }
    }

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], g: &mut [f64]) -> Vec<f64> {
        let wo = self.offset;
        let bo = self.offset + self.inp * self.out;
        let mut dx = vec![0.0; self.inp];
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g[bo + o] += d;
            let row = wo + o * self.inp;
            for i in 0..self.inp {
                g[row + i] += d * x[i];
                dx[i] += p[row + i] * d;
            }
        }
        dx
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    trunk: Vec<Vec<f64>>,
    value_hidden: Vec<f64>,
    adv_hidden: Vec<f64>,
    pub value: f64,
    pub advantage: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuelingNetwork {
    topology: Topology,
    params: Vec<f64>,
}

impl DuelingNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(topology: Topology, rng: &mut R) -> Self {
        let layers = Self::layout(&topology);
        let total = layers.iter().map(Dense::len).sum();
        let mut params = vec![0.0; total];
        for l in &layers {
            let limit = (6.0 / (l.inp + l.out) as f64).sqrt();
            for w in &mut params[l.offset..l.offset + l.inp * l.out] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Self { topology, params }
    }

    pub fn from_params(topology: Topology, params: Vec<f64>) -> Result<Self> {
        let expected: usize = Self::layout(&topology).iter().map(Dense::len).sum();
        if params.len() != expected {
            return Err(SimError::LengthMismatch {
                left: expected,
                right: params.len(),
            });
        }
        Ok(Self { topology, params })
    }

    /// Trunk layers, then value head (2 layers), then advantage head (2 layers).
    fn layout(t: &Topology) -> Vec<Dense> {
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut push = |inp, out| {
            let d = Dense { inp, out, offset };
            offset += d.len();
            layers.push(d);
        };
        let mut prev = t.input;
        for &w in &t.trunk {
            push(prev, w);
            prev = w;
        }
        push(prev, t.head);
        push(t.head, 1);
        push(prev, t.head);
        push(t.head, t.actions);
        layers
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Becomes an exact copy of `other`'s parameters.
    pub fn copy_from(&mut self, other: &DuelingNetwork) {
        self.params.copy_from_slice(&other.params);
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let layers = Self::layout(&self.topology);
        let depth = self.topology.trunk.len();
        let mut trunk = Vec::with_capacity(depth + 1);
        trunk.push(x.to_vec());
        for l in &layers[..depth] {
            let mut y = Vec::with_capacity(l.out);
            l.forward(&self.params, trunk.last().expect("input present"), &mut y, true);
            trunk.push(y);
        }
        let features = trunk.last().expect("trunk output");
        let (mut vh, mut v, mut ah, mut a) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        layers[depth].forward(&self.params, features, &mut vh, true);
        layers[depth + 1].forward(&self.params, &vh, &mut v, false);
        layers[depth + 2].forward(&self.params, features, &mut ah, true);
        layers[depth + 3].forward(&self.params, &ah, &mut a, false);
        let value = v[0];
        let q = combine(value, &a);
        ForwardCache {
            trunk,
            value_hidden: vh,
            adv_hidden: ah,
            value,
            advantage: a,
            q,
        }
    }

    pub fn q_values(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).q
    }

    /// Q-values with a finiteness check.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.q_values(x);
        if q.iter().all(|v| v.is_finite()) {
            Ok(q)
        } else {
            Err(SimError::NonFinite("network activation"))
        }
    }

    /// Backpropagates `dq` (gradient of the loss w.r.t. each Q output) and
    /// accumulates parameter gradients into `grad`.
    pub fn backward(&self, cache: &ForwardCache, dq: &[f64], grad: &mut [f64]) {
        let layers = Self::layout(&self.topology);
        let depth = self.topology.trunk.len();
        let n = dq.len() as f64;
        let dv = dq.iter().sum::<f64>();
        let mean_dq = dv / n;
        let da: Vec<f64> = dq.iter().map(|d| d - mean_dq).collect();

        let features = &cache.trunk[depth];
        let mut dvh = layers[depth + 1].backward(&self.params, &cache.value_hidden, &[dv], grad);
        relu_mask(&mut dvh, &cache.value_hidden);
        let mut dfeat = layers[depth].backward(&self.params, features, &dvh, grad);
        let mut dah = layers[depth + 3].backward(&self.params, &cache.adv_hidden, &da, grad);
        relu_mask(&mut dah, &cache.adv_hidden);
        let from_adv = layers[depth + 2].backward(&self.params, features, &dah, grad);
        for (a, b) in dfeat.iter_mut().zip(from_adv) {
            *a += b;
        }
        for i in (0..depth).rev() {
            relu_mask(&mut dfeat, &cache.trunk[i + 1]);
            dfeat = layers[i].backward(&self.params, &cache.trunk[i], &dfeat, grad);
        }
    }
}

fn relu_mask(d: &mut [f64], activation: &[f64]) {
    for (g, a) in d.iter_mut().zip(activation) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Q(s, a) = V(s) + A(s, a) - mean over a' of A(s, a').
pub fn combine(value: f64, advantage: &[f64]) -> Vec<f64> {
    let mean = advantage.iter().sum::<f64>() / advantage.len() as f64;
    advantage.iter().map(|a| value + (a - mean)).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Double-Q target: the online net picks the next action, the target net
/// evaluates it.
pub fn double_q_target(
    reward: f64,
    next_state: &[f64],
    terminal: bool,
    online: &DuelingNetwork,
    target: &DuelingNetwork,
    discount: f64,
) -> f64 {
    if terminal {
        return reward;
    }
    let best = argmax(&online.q_values(next_state));
    reward + discount * target.q_values(next_state)[best]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; params],
            v: vec![0.0; params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// One training sample: scaled state, action index and regression target.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// Squared TD loss over a batch. With `clip`, the error is clipped to
/// [-clip, clip] in the gradient (Huber-style), so large errors push with
/// bounded force. Returns (mean squared error, gradient).
pub fn td_loss_and_grad(net: &DuelingNetwork, batch: &[Sample<'_>], clip: Option<f64>) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.param_count()];
    let mut loss = 0.0;
    let n = batch.len() as f64;
    for s in batch {
        let cache = net.forward_cached(s.input);
        let err = cache.q[s.action] - s.target;
        loss += err * err;
        let e = clip.map_or(err, |c| err.clamp(-c, c));
        let mut dq = vec![0.0; cache.q.len()];
        dq[s.action] = 2.0 * e / n;
        net.backward(&cache, &dq, &mut grad);
    }
    (loss / n, grad)
}
