//! Flat parameter storage with a named-tensor layout.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GnnError, EDGE_FEATURES, NODE_FEATURES, OBS_FEATURES};

/// Which way messages travel along line-graph arcs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageDirection {
    /// Edge `e` aggregates from its successors `(e, f)`: information about
    /// what lies ahead flows back toward the edges that lead there.
    #[default]
    Backward,
    /// Edge `e` aggregates from its predecessors `(a, e)`.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub direction: MessageDirection,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self { embedding_dim: 32, hidden_dim: 64, direction: MessageDirection::Backward }
    }
}

/// Every tensor of the model, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum T {
    EncW1,
    EncB1,
    EncW2,
    EncB2,
    AggWSelf,
    AggWArc,
    AggWNbr,
    AggB1,
    AggW2,
    AggB2,
    GruWz,
    GruBz,
    GruWr,
    GruBr,
    GruWn,
    GruBn,
    ScW1,
    ScB1,
    ScW2,
    ScB2,
}

pub const TENSORS: [T; 20] = [
    T::EncW1,
    T::EncB1,
    T::EncW2,
    T::EncB2,
    T::AggWSelf,
    T::AggWArc,
    T::AggWNbr,
    T::AggB1,
    T::AggW2,
    T::AggB2,
    T::GruWz,
    T::GruBz,
    T::GruWr,
    T::GruBr,
    T::GruWn,
    T::GruBn,
    T::ScW1,
    T::ScB1,
    T::ScW2,
    T::ScB2,
];

impl T {
    pub fn name(self) -> &'static str {
        match self {
            T::EncW1 => "encode.w1",
            T::EncB1 => "encode.b1",
            T::EncW2 => "encode.w2",
            T::EncB2 => "encode.b2",
            T::AggWSelf => "aggregate.w_self",
            T::AggWArc => "aggregate.w_arc",
            T::AggWNbr => "aggregate.w_neighbor",
            T::AggB1 => "aggregate.b1",
            T::AggW2 => "aggregate.w2",
            T::AggB2 => "aggregate.b2",
            T::GruWz => "update.w_z",
            T::GruBz => "update.b_z",
            T::GruWr => "update.w_r",
            T::GruBr => "update.b_r",
            T::GruWn => "update.w_n",
            T::GruBn => "update.b_n",
            T::ScW1 => "score.w1",
            T::ScB1 => "score.b1",
            T::ScW2 => "score.w2",
            T::ScB2 => "score.b2",
        }
    }

    /// `(rows, cols)`; biases are column vectors.
    pub fn shape(self, c: &GnnConfig) -> (usize, usize) {
        let (d, h) = (c.embedding_dim, c.hidden_dim);
        let score_in = OBS_FEATURES + d + EDGE_FEATURES + NODE_FEATURES;
        match self {
            T::EncW1 => (h, d + EDGE_FEATURES),
            T::EncB1 | T::AggB1 | T::ScB1 => (h, 1),
            T::EncW2 | T::AggW2 => (d, h),
            T::EncB2 | T::AggB2 | T::GruBz | T::GruBr | T::GruBn => (d, 1),
            T::AggWSelf | T::AggWNbr => (h, d),
            T::AggWArc => (h, NODE_FEATURES),
            T::GruWz | T::GruWr | T::GruWn => (d, 2 * d),
            T::ScW1 => (h, score_in),
            T::ScW2 => (1, h),
            T::ScB2 => (1, 1),
        }
    }

    /// Fan-in used for initialization; a bias shares its weight's fan-in.
    fn fan_in(self, c: &GnnConfig) -> usize {
        let (d, h) = (c.embedding_dim, c.hidden_dim);
        match self {
            T::EncW1 | T::EncB1 => d + EDGE_FEATURES,
            T::EncW2 | T::EncB2 | T::AggW2 | T::AggB2 | T::ScW2 | T::ScB2 => h,
            T::AggWSelf | T::AggWArc | T::AggWNbr | T::AggB1 => 2 * d + NODE_FEATURES,
            T::GruWz | T::GruBz | T::GruWr | T::GruBr | T::GruWn | T::GruBn => 2 * d,
            T::ScW1 | T::ScB1 => OBS_FEATURES + d + EDGE_FEATURES + NODE_FEATURES,
        }
    }
}

/// All weights and biases in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    config: GnnConfig,
    offsets: [usize; 21],
    data: Vec<f64>,
}

impl ParameterSet {
    pub fn zeros(config: GnnConfig) -> Self {
        let mut offsets = [0usize; 21];
        for (i, t) in TENSORS.iter().enumerate() {
            let (r, c) = t.shape(&config);
            offsets[i + 1] = offsets[i] + r * c;
        }
        Self { config, offsets, data: alloc::vec![0.0; offsets[20]] }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng>(config: GnnConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(config);
        for (i, t) in TENSORS.iter().enumerate() {
            let bound = 1.0 / crate::math::sqrt(t.fan_in(&config) as f64);
            for x in &mut p.data[p.offsets[i]..p.offsets[i + 1]] {
                *x = rng.random_range(-bound..=bound);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self { config: self.config, offsets: self.offsets, data: alloc::vec![0.0; self.data.len()] }
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    pub fn get(&self, t: T) -> &[f64] {
        let i = t as usize;
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn get_mut(&mut self, t: T) -> &mut [f64] {
        let i = t as usize;
        &mut self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(name, rows, cols, values)` for every tensor.
    pub fn tensors(&self) -> impl Iterator<Item = (&'static str, usize, usize, &[f64])> + '_ {
        TENSORS.iter().map(move |&t| {
            let (r, c) = t.shape(&self.config);
            (t.name(), r, c, self.get(t))
        })
    }

    /// Rebuild from named tensors, checking names, order and shapes.
    pub fn from_tensors(config: GnnConfig, tensors: Vec<(String, usize, usize, Vec<f64>)>) -> Result<Self, GnnError> {
        let mut p = Self::zeros(config);
        if tensors.len() != TENSORS.len() {
            return Err(GnnError::TensorCount { expected: TENSORS.len(), got: tensors.len() });
        }
        for (&t, (name, rows, cols, values)) in TENSORS.iter().zip(tensors) {
            if name != t.name() {
                return Err(GnnError::TensorName { expected: t.name(), got: name });
            }
            let shape = t.shape(&config);
            if (rows, cols) != shape || values.len() != rows * cols {
                return Err(GnnError::TensorShape { name: t.name(), expected: shape, got: (rows, cols) });
            }
            p.get_mut(t).copy_from_slice(&values);
        }
        if !p.is_finite() {
            return Err(GnnError::NonFinite);
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        crate::math::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn fill(&mut self, v: f64) {
        for x in &mut self.data {
            *x = v;
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &ParameterSet, s: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// FNV-1a over the raw bits.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for x in &self.data {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Adaptive-moment optimizer with global gradient-norm clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(params: &ParameterSet, learning_rate: f64, clip_norm: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm,
            m: alloc::vec![0.0; params.len()],
            v: alloc::vec![0.0; params.len()],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Clip `grad` in place, then update `params`. Returns the pre-clip norm.
    pub fn step(&mut self, params: &mut ParameterSet, grad: &mut ParameterSet) -> f64 {
        let norm = grad.norm();
        if self.clip_norm > 0.0 && norm > self.clip_norm {
            grad.scale(self.clip_norm / norm);
        }
        self.t += 1;
        let b1t = 1.0 - crate::math::powi(self.beta1, self.t.min(i32::MAX as u64) as i32);
        let b2t = 1.0 - crate::math::powi(self.beta2, self.t.min(i32::MAX as u64) as i32);
        for (((p, g), m), v) in params.data.iter_mut().zip(&grad.data).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mh = *m / b1t;
            let vh = *v / b2t;
            *p -= self.learning_rate * mh / (crate::math::sqrt(vh) + self.epsilon);
        }
        norm
    }
}
