//! Multilayer perceptron on flattened pixels: a trunk shared by every option
//! and one linear output head per option.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Transition;
use crate::abstraction::L1ActionKey;
use crate::gridworld::{render_pixels, Action, GroundState, WorldMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub warmup: usize,
    /// Gradient steps between target-network syncs.
    pub target_sync: u64,
    pub beta_mc: f64,
    pub gamma: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            replay_capacity: 10_000,
            batch_size: 32,
            warmup: 64,
            target_sync: 250,
            beta_mc: 0.1,
            gamma: 0.99,
        }
    }
}

const BETA1: f32 = 0.9;
const BETA2: f32 = 0.999;
const ADAM_EPS: f32 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    #[serde(skip)]
    pub w: Vec<f32>,
    #[serde(skip)]
    pub b: Vec<f32>,
    #[serde(skip)]
    m: Vec<f32>,
    #[serde(skip)]
    v: Vec<f32>,
    pub steps: u64,
}

impl Linear {
    fn new(inputs: usize, outputs: usize, scale: f32, rng: &mut impl Rng) -> Linear {
        let n = inputs * outputs + outputs;
        Linear {
            inputs,
            outputs,
            w: (0..inputs * outputs).map(|_| rng.gen_range(-scale..scale)).collect(),
            b: vec![0.0; outputs],
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
        }
    }

    fn forward(&self, x: &[f32], out: &mut Vec<f32>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.b[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f32>());
        }
    }

    /// Accumulates parameter gradients into `grad` (weights then biases) and
    /// returns the gradient with respect to the input.
    fn backward(&self, x: &[f32], dy: &[f32], grad: &mut [f32]) -> Vec<f32> {
        let mut dx = vec![0.0; self.inputs];
        let nw = self.inputs * self.outputs;
        for o in 0..self.outputs {
            let d = dy[o];
            if d == 0.0 {
                continue;
            }
            let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
            let g = &mut grad[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                g[i] += d * x[i];
                dx[i] += d * row[i];
            }
            grad[nw + o] += d;
        }
        dx
    }

    fn adam(&mut self, grad: &[f32], lr: f32) {
        self.steps += 1;
        let t = self.steps as i32;
        let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        let nw = self.w.len();
        for (i, g) in grad.iter().enumerate() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let step = lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
            if i < nw {
                self.w[i] -= step;
            } else {
                self.b[i - nw] -= step;
            }
        }
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Vec<f32>)>) {
        out.push((format!("{prefix}.w"), &mut self.w));
        out.push((format!("{prefix}.b"), &mut self.b));
        out.push((format!("{prefix}.adam_m"), &mut self.m));
        out.push((format!("{prefix}.adam_v"), &mut self.v));
    }

    /// Weights without optimiser state, for target copies.
    fn frozen(&self) -> Linear {
        Linear {
            m: Vec::new(),
            v: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: GroundState,
    pub action: Action,
    pub reward: f64,
    pub next: GroundState,
    pub done: bool,
    pub mc_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub online: Linear,
    pub target: Linear,
    pub replay: VecDeque<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub cfg: NetworkConfig,
    pub inputs: usize,
    pub trunk: Vec<Linear>,
    pub target_trunk: Vec<Linear>,
    /// Heads in creation order; `head_index` maps option keys into it.
    pub heads: Vec<Head>,
    pub head_keys: Vec<L1ActionKey>,
    #[serde(skip)]
    head_index: BTreeMap<L1ActionKey, usize>,
    pub updates: u64,
}

struct Activations {
    layers: Vec<Vec<f32>>,
    q: Vec<f32>,
}

pub fn observe_pixels(world: &WorldMap, s: &GroundState) -> Vec<f32> {
    render_pixels(world, s)
        .pixels
        .iter()
        .map(|&p| p as f32 / 255.0)
        .collect()
}

impl QNetwork {
    pub fn new(cfg: NetworkConfig, inputs: usize, rng: &mut impl Rng) -> QNetwork {
        let mut trunk = Vec::new();
        let mut width = inputs;
        for &h in &cfg.hidden {
            trunk.push(Linear::new(width, h, (6.0 / width as f32).sqrt(), rng));
            width = h;
        }
        let target_trunk = trunk.iter().map(Linear::frozen).collect();
        QNetwork {
            cfg,
            inputs,
            trunk,
            target_trunk,
            heads: Vec::new(),
            head_keys: Vec::new(),
            head_index: BTreeMap::new(),
            updates: 0,
        }
    }

    fn feature_width(&self) -> usize {
        self.trunk.last().map_or(self.inputs, |l| l.outputs)
    }

    pub fn head_of(&self, key: &L1ActionKey) -> Option<usize> {
        self.head_index.get(key).copied()
    }

    pub fn ensure_head(&mut self, key: &L1ActionKey, rng: &mut impl Rng) -> usize {
        if let Some(i) = self.head_of(key) {
            return i;
        }
        let width = self.feature_width();
        let online = Linear::new(width, 4, (1.0 / width as f32).sqrt(), rng);
        let target = online.frozen();
        self.heads.push(Head {
            online,
            target,
            replay: VecDeque::new(),
        });
        self.head_keys.push(key.clone());
        let i = self.heads.len() - 1;
        self.head_index.insert(key.clone(), i);
        i
    }

    /// Rebuilds lookup tables after deserialisation.
    pub fn reindex(&mut self) {
        self.head_index = self.head_keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    }

    fn run(trunk: &[Linear], head: &Linear, x: &[f32]) -> Activations {
        let mut layers = vec![x.to_vec()];
        let mut buf = Vec::new();
        for l in trunk {
            l.forward(layers.last().expect("input layer"), &mut buf);
            for v in buf.iter_mut() {
                *v = v.max(0.0);
            }
            layers.push(buf.clone());
        }
        let mut q = Vec::new();
        head.forward(layers.last().expect("features"), &mut q);
        Activations { layers, q }
    }

    pub fn q_values(&self, head: usize, x: &[f32]) -> [f32; 4] {
        let a = Self::run(&self.trunk, &self.heads[head].online, x);
        [a.q[0], a.q[1], a.q[2], a.q[3]]
    }

    fn target_q(&self, head: usize, x: &[f32]) -> Vec<f32> {
        Self::run(&self.target_trunk, &self.heads[head].target, x).q
    }

    pub fn greedy(&self, head: usize, x: &[f32], rng: &mut impl Rng) -> Action {
        let q = self.q_values(head, x);
        let best = q.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let ties: Vec<usize> = (0..4).filter(|&i| q[i] >= best).collect();
        Action::from_index(ties[rng.gen_range(0..ties.len())])
    }

    pub fn push_episode(&mut self, head: usize, episode: &[(Transition, f64)]) {
        let cap = self.cfg.replay_capacity;
        let replay = &mut self.heads[head].replay;
        for (t, g) in episode {
            if replay.len() == cap {
                replay.pop_front();
            }
            replay.push_back(Sample {
                state: t.state,
                action: t.action,
                reward: t.reward,
                next: t.next,
                done: t.done,
                mc_return: *g,
            });
        }
    }

    /// One minibatch gradient step on `head`. Only the trunk and that head
    /// move. Returns the mean squared error, or `None` during warmup.
    pub fn train_step(&mut self, world: &WorldMap, head: usize, rng: &mut impl Rng) -> Option<f32> {
        let replay = &self.heads[head].replay;
        if replay.len() < self.cfg.warmup.max(self.cfg.batch_size) {
            return None;
        }
        let idx: Vec<usize> = (0..replay.len()).collect();
        let batch: Vec<Sample> = idx
            .choose_multiple(rng, self.cfg.batch_size)
            .map(|&i| replay[i])
            .collect();
        let n = batch.len() as f32;
        let mut trunk_grads: Vec<Vec<f32>> = self.trunk.iter().map(|l| vec![0.0; l.param_count()]).collect();
        let mut head_grad = vec![0.0; self.heads[head].online.param_count()];
        let mut loss = 0.0;
        let (beta, gamma) = (self.cfg.beta_mc as f32, self.cfg.gamma as f32);
        for s in &batch {
            let x = observe_pixels(world, &s.state);
            let act = Self::run(&self.trunk, &self.heads[head].online, &x);
            let y = if s.done {
                s.reward as f32
            } else {
                let x2 = observe_pixels(world, &s.next);
                let online = Self::run(&self.trunk, &self.heads[head].online, &x2).q;
                let mut arg = 0;
                for i in 1..4 {
                    if online[i] > online[arg] {
                        arg = i;
                    }
                }
                s.reward as f32 + gamma * self.target_q(head, &x2)[arg]
            };
            let target = (1.0 - beta) * y + beta * s.mc_return as f32;
            let a = s.action.index();
            let err = act.q[a] - target;
            loss += err * err / n;
            let mut dy = vec![0.0; 4];
            dy[a] = err / n;
            let feats = act.layers.last().expect("features");
            let mut d = self.heads[head].online.backward(feats, &dy, &mut head_grad);
            for (li, layer) in self.trunk.iter().enumerate().rev() {
                let out = &act.layers[li + 1];
                for (dv, o) in d.iter_mut().zip(out) {
                    if *o <= 0.0 {
                        *dv = 0.0;
                    }
                }
                d = layer.backward(&act.layers[li], &d, &mut trunk_grads[li]);
            }
        }
        let lr = self.cfg.learning_rate as f32;
        for (l, g) in self.trunk.iter_mut().zip(&trunk_grads) {
            l.adam(g, lr);
        }
        self.heads[head].online.adam(&head_grad, lr);
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.target_sync) {
            self.sync_targets();
        }
        Some(loss)
    }

    pub fn sync_targets(&mut self) {
        self.target_trunk = self.trunk.iter().map(Linear::frozen).collect();
        for h in &mut self.heads {
            h.target = h.online.frozen();
        }
    }

    /// Every float array, in a fixed order with stable names.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f32>)> {
        let mut out = Vec::new();
        for (i, l) in self.trunk.iter_mut().enumerate() {
            l.tensors_mut(&format!("trunk.{i}"), &mut out);
        }
        for (i, l) in self.target_trunk.iter_mut().enumerate() {
            out.push((format!("target_trunk.{i}.w"), &mut l.w));
            out.push((format!("target_trunk.{i}.b"), &mut l.b));
        }
        for (i, h) in self.heads.iter_mut().enumerate() {
            h.online.tensors_mut(&format!("head.{i}"), &mut out);
            out.push((format!("target_head.{i}.w"), &mut h.target.w));
            out.push((format!("target_head.{i}.b"), &mut h.target.b));
        }
        out
    }
}
