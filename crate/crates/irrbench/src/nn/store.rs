//! Named parameter storage with gradient buffers and SGD-with-momentum.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Weight initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform on `[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform,
    Zeros,
}

/// Fan counts by tensor rank: `[p, n]` maps `n` inputs to `p` outputs;
/// `[c_out, c_in, k]` convolves `c_in * k` inputs into `c_out * k` output
/// positions per receptive field.
fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [p, n] => (*n, *p),
        [c_out, c_in, k] => (c_in * k, c_out * k),
        other => {
            let n: usize = other.iter().product();
            (n, n)
        }
    }
}

#[derive(Debug, Clone)]
struct ParamEntry {
    name: String,
    value: Tensor,
    grad: Tensor,
    velocity: Tensor,
}

/// All trainable tensors of one model, in registration order.
///
/// Gradients accumulate across `backward` calls until `sgd_step` or
/// `zero_grads` clears them. Stepping without a fresh backward pass is an
/// error.
#[derive(Debug, Clone)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
    seed: u64,
    grads_ready: bool,
}

impl ParamStore {
    pub fn new(seed: u64) -> ParamStore {
        ParamStore {
            entries: Vec::new(),
            index: HashMap::new(),
            seed,
            grads_ready: false,
        }
    }

    /// Adds a tensor initialized per `init`, drawing from `rng`. Names must
    /// be unique.
    pub fn register(
        &mut self,
        name: &str,
        shape: &[usize],
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let value = match init {
            Init::Zeros => Tensor::zeros(shape),
            Init::GlorotUniform => {
                let (fan_in, fan_out) = fans(shape);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut t = Tensor::zeros(shape);
                for v in t.data_mut() {
                    *v = rng.random_range(-bound..bound);
                }
                t
            }
        };
        self.insert_raw(name, value)
    }

    /// Adds a tensor with explicit values; used by checkpoint loading.
    pub(crate) fn insert_raw(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!(
                "parameter {name} registered twice"
            )));
        }
        let shape = value.shape().to_vec();
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad: Tensor::zeros(&shape),
            velocity: Tensor::zeros(&shape),
        });
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].grad)
    }

    /// Overwrites a parameter's values; the shape must match.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))?;
        if value.shape() != self.entries[i].value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "parameter {name} has shape {:?}, got {:?}",
                self.entries[i].value.shape(),
                value.shape()
            )));
        }
        self.entries[i].value = value;
        Ok(())
    }

    /// Adds `delta` to one scalar inside a parameter; used by finite
    /// difference probes.
    pub fn nudge(&mut self, name: &str, flat_index: usize, delta: f64) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))?;
        let data = self.entries[i].value.data_mut();
        if flat_index >= data.len() {
            return Err(Error::InvalidArgument(format!(
                "index {flat_index} out of bounds for parameter {name}"
            )));
        }
        data[flat_index] += delta;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_tensors(&self) -> usize {
        self.entries.len()
    }

    /// Total scalar count across all parameters.
    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn grads_ready(&self) -> bool {
        self.grads_ready
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            for g in e.grad.data_mut() {
                *g = 0.0;
            }
        }
        self.grads_ready = false;
    }

    /// One SGD-with-momentum update: `v <- momentum * v + grad`,
    /// `p <- p - lr * v`. Consumes the gradients.
    pub fn sgd_step(&mut self, learning_rate: f64, momentum: f64) -> Result<()> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        if !self.grads_ready {
            return Err(Error::StaleGradients);
        }
        for e in &mut self.entries {
            for j in 0..e.value.len() {
                let v = momentum * e.velocity.data()[j] + e.grad.data()[j];
                e.velocity.data_mut()[j] = v;
                e.value.data_mut()[j] -= learning_rate * v;
            }
        }
        self.zero_grads();
        Ok(())
    }

    pub(crate) fn entry_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub(crate) fn value_by_index(&self, idx: usize) -> &Tensor {
        &self.entries[idx].value
    }

    pub(crate) fn accumulate_grad(&mut self, idx: usize, contribution: &Tensor) {
        let grad = &mut self.entries[idx].grad;
        debug_assert_eq!(grad.shape(), contribution.shape());
        for (g, c) in grad.data_mut().iter_mut().zip(contribution.data()) {
            *g += c;
        }
    }

    pub(crate) fn mark_grads_ready(&mut self) {
        self.grads_ready = true;
    }

    /// Parameter values only; optimizer state is ignored.
    pub fn values_equal(&self, other: &ParamStore) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.value == b.value)
    }
}
