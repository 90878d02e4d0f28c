//! The three window classifiers: a fixed-length convolutional net, a
//! convolutional-recurrent net, and a continuous-time recurrent net that
//! consumes per-sample elapsed times.
//!
//! The convolutional architectures read only window values, never elapsed
//! times, so their outputs are bitwise independent of timing metadata. The
//! continuous-time net is the only one that sees the irregular grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{checkpoint, CfcWeights, Init, LstmWeights, NodeId, ParamStore, Tape, Tensor};
use crate::windowing::Window;

/// Channels produced by every convolution layer.
const CONV_CHANNELS: usize = 16;
/// Kernel width of every convolution layer.
const KERNEL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    ConvDense,
    DeepConvLstm,
    CfcNet,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::ConvDense,
        Architecture::DeepConvLstm,
        Architecture::CfcNet,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::ConvDense => "conv_dense",
            Architecture::DeepConvLstm => "deep_conv_lstm",
            Architecture::CfcNet => "cfc_net",
        }
    }

    /// True when the architecture needs windows padded to a fixed length.
    pub fn fixed_length(&self) -> bool {
        !matches!(self, Architecture::CfcNet)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Architecture> {
        match s {
            "conv_dense" => Ok(Architecture::ConvDense),
            "deep_conv_lstm" => Ok(Architecture::DeepConvLstm),
            "cfc_net" => Ok(Architecture::CfcNet),
            other => Err(Error::InvalidArgument(format!(
                "unknown architecture {other:?} (expected conv_dense, deep_conv_lstm, or cfc_net)"
            ))),
        }
    }
}

fn default_hidden() -> usize {
    32
}

/// Everything needed to rebuild a model's parameter shapes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub input_channels: usize,
    pub num_classes: usize,
    /// Sample count fixed-length architectures consume; the continuous-time
    /// net treats it as the nominal length but accepts any positive length.
    pub window_len: usize,
    #[serde(default = "default_hidden")]
    pub hidden_size: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::InvalidArgument("models need at least one channel".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "classification needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.hidden_size == 0 {
            return Err(Error::InvalidArgument("hidden size must be at least 1".into()));
        }
        let min_len = match self.architecture {
            // Three stacked convolutions each shrink the time axis by
            // KERNEL - 1.
            Architecture::ConvDense => 3 * (KERNEL - 1) + 1,
            Architecture::DeepConvLstm => 4 * (KERNEL - 1) + 1,
            Architecture::CfcNet => 1,
        };
        if self.window_len < min_len {
            return Err(Error::InvalidArgument(format!(
                "{} needs windows of at least {min_len} samples, got {}",
                self.architecture, self.window_len
            )));
        }
        Ok(())
    }
}

/// Canonical parameter list for a config: name, shape, and init scheme, in
/// registration order. Builder and checkpoint loader both derive from this.
fn parameter_plan(config: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = config.input_channels;
    let k = config.num_classes;
    let h = config.hidden_size;
    let c = CONV_CHANNELS;
    let mut plan: Vec<(String, Vec<usize>, Init)> = Vec::new();
    let conv = |plan: &mut Vec<_>, name: &str, c_in: usize| {
        plan.push((format!("{name}.weight"), vec![c, c_in, KERNEL], Init::GlorotUniform));
        plan.push((format!("{name}.bias"), vec![c], Init::Zeros));
    };
    let dense = |plan: &mut Vec<_>, name: &str, rows: usize, cols: usize| {
        plan.push((format!("{name}.weight"), vec![rows, cols], Init::GlorotUniform));
        plan.push((format!("{name}.bias"), vec![rows], Init::Zeros));
    };
    match config.architecture {
        Architecture::ConvDense => {
            conv(&mut plan, "conv1", d);
            conv(&mut plan, "conv2", c);
            conv(&mut plan, "conv3", c);
            let flat = (config.window_len - 3 * (KERNEL - 1)) * c;
            dense(&mut plan, "fc1", h, flat);
            dense(&mut plan, "fc2", k, h);
        }
        Architecture::DeepConvLstm => {
            conv(&mut plan, "conv1", d);
            conv(&mut plan, "conv2", c);
            conv(&mut plan, "conv3", c);
            conv(&mut plan, "conv4", c);
            for gate in ["input", "forget", "output", "candidate"] {
                dense(&mut plan, &format!("lstm.{gate}"), h, c + h);
            }
            dense(&mut plan, "head", k, h);
        }
        Architecture::CfcNet => {
            dense(&mut plan, "proj", h, d);
            for head in ["rate", "transient", "steady"] {
                dense(&mut plan, &format!("cfc.{head}"), h, h + h);
            }
            dense(&mut plan, "head", k, h);
        }
    }
    plan
}

/// Index of the largest logit; ties resolve to the smallest class id.
pub fn argmax(logits: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in logits.iter().enumerate() {
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// A classifier: a config plus its parameter store.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
}

impl Model {
    /// Builds and initializes a model. Weight draws depend only on
    /// `config.seed` and the parameter order, so identical configs yield
    /// identical models.
    pub fn new(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new(config.seed);
        for (name, shape, init) in parameter_plan(&config) {
            params.register(&name, &shape, init, &mut rng)?;
        }
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    fn check_window(&self, window: &Window) -> Result<()> {
        if window.num_channels() != self.config.input_channels {
            return Err(Error::ShapeMismatch(format!(
                "window has {} channels, model expects {}",
                window.num_channels(),
                self.config.input_channels
            )));
        }
        if self.config.architecture.fixed_length()
            && window.num_samples() != self.config.window_len
        {
            return Err(Error::ShapeMismatch(format!(
                "{} expects exactly {} samples per window, got {}",
                self.config.architecture,
                self.config.window_len,
                window.num_samples()
            )));
        }
        Ok(())
    }

    fn place_params(&self, tape: &mut Tape) -> Result<HashMap<String, NodeId>> {
        let mut placed = HashMap::new();
        for name in self.params.names() {
            let id = tape.param(&self.params, name)?;
            placed.insert(name.to_string(), id);
        }
        Ok(placed)
    }

    fn forward(
        &self,
        tape: &mut Tape,
        placed: &HashMap<String, NodeId>,
        window: &Window,
    ) -> Result<NodeId> {
        self.check_window(window)?;
        let p = |name: &str| -> NodeId {
            *placed.get(name).expect("placed from this model's own store")
        };
        let values = Tensor::matrix(
            window.num_samples(),
            window.num_channels(),
            window.values().iter().cloned().collect(),
        )?;
        let x = tape.input(values);
        match self.config.architecture {
            Architecture::ConvDense => {
                let mut cur = x;
                for conv in ["conv1", "conv2", "conv3"] {
                    let c = tape.conv1d(cur, p(&format!("{conv}.weight")), p(&format!("{conv}.bias")))?;
                    cur = tape.relu(c);
                }
                let flat = tape.flatten(cur);
                let fc1 = tape.dense(p("fc1.weight"), flat, p("fc1.bias"))?;
                let act = tape.relu(fc1);
                tape.dense(p("fc2.weight"), act, p("fc2.bias"))
            }
            Architecture::DeepConvLstm => {
                let mut cur = x;
                for conv in ["conv1", "conv2", "conv3", "conv4"] {
                    let c = tape.conv1d(cur, p(&format!("{conv}.weight")), p(&format!("{conv}.bias")))?;
                    cur = tape.relu(c);
                }
                let weights = LstmWeights {
                    w_input: p("lstm.input.weight"),
                    b_input: p("lstm.input.bias"),
                    w_forget: p("lstm.forget.weight"),
                    b_forget: p("lstm.forget.bias"),
                    w_output: p("lstm.output.weight"),
                    b_output: p("lstm.output.bias"),
                    w_candidate: p("lstm.candidate.weight"),
                    b_candidate: p("lstm.candidate.bias"),
                };
                let steps = tape.value(cur).shape()[0];
                let mut h = tape.input(Tensor::zeros(&[self.config.hidden_size]));
                let mut c_state = tape.input(Tensor::zeros(&[self.config.hidden_size]));
                for t in 0..steps {
                    let x_t = tape.row(cur, t)?;
                    let (nh, nc) = tape.lstm_cell(x_t, h, c_state, &weights)?;
                    h = nh;
                    c_state = nc;
                }
                tape.dense(p("head.weight"), h, p("head.bias"))
            }
            Architecture::CfcNet => {
                let weights = CfcWeights {
                    w_rate: p("cfc.rate.weight"),
                    b_rate: p("cfc.rate.bias"),
                    w_transient: p("cfc.transient.weight"),
                    b_transient: p("cfc.transient.bias"),
                    w_steady: p("cfc.steady.weight"),
                    b_steady: p("cfc.steady.bias"),
                };
                let mut h = tape.input(Tensor::zeros(&[self.config.hidden_size]));
                for t in 0..window.num_samples() {
                    let x_t = tape.row(x, t)?;
                    let proj = tape.dense(p("proj.weight"), x_t, p("proj.bias"))?;
                    let step = tape.cfc_cell(proj, h, window.elapsed()[t], &weights)?;
                    h = step.output;
                }
                tape.dense(p("head.weight"), h, p("head.bias"))
            }
        }
    }

    /// Class scores for one window.
    pub fn logits(&self, window: &Window) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let placed = self.place_params(&mut tape)?;
        let node = self.forward(&mut tape, &placed, window)?;
        Ok(tape.value(node).data().to_vec())
    }

    /// Predicted class id; logit ties resolve to the smallest id.
    pub fn predict(&self, window: &Window) -> Result<usize> {
        Ok(argmax(&self.logits(window)?).expect("num_classes >= 2"))
    }

    /// Mean cross-entropy over the batch, with gradients accumulated into
    /// the parameter store, ready for an optimizer step.
    pub fn batch_loss_backward(&mut self, windows: &[&Window]) -> Result<f64> {
        if windows.is_empty() {
            return Err(Error::Empty("batch of no windows".into()));
        }
        let mut tape = Tape::new();
        let placed = self.place_params(&mut tape)?;
        let mut losses = Vec::with_capacity(windows.len());
        for w in windows {
            let logits = self.forward(&mut tape, &placed, w)?;
            losses.push(tape.softmax_cross_entropy(logits, w.label())?);
        }
        let loss = tape.mean(&losses)?;
        tape.backward(loss, &mut self.params)?;
        tape.value(loss).as_scalar()
    }

    /// Mean cross-entropy over the batch, forward only.
    pub fn batch_loss(&self, windows: &[&Window]) -> Result<f64> {
        if windows.is_empty() {
            return Err(Error::Empty("batch of no windows".into()));
        }
        let mut tape = Tape::new();
        let placed = self.place_params(&mut tape)?;
        let mut acc = 0.0;
        for w in windows {
            let logits = self.forward(&mut tape, &placed, w)?;
            let loss = tape.softmax_cross_entropy(logits, w.label())?;
            acc += tape.value(loss).as_scalar()?;
        }
        Ok(acc / windows.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let config_json = serde_json::to_string(&self.config)?;
        checkpoint::save(&self.params, &config_json, path)
    }

    pub fn load(path: &Path) -> Result<Model> {
        let (config_json, params) = checkpoint::load(path)?;
        let config: ModelConfig = serde_json::from_str(&config_json)
            .map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
        config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let plan = parameter_plan(&config);
        let names: Vec<&str> = params.names().collect();
        if names.len() != plan.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters for {}, found {}",
                plan.len(),
                config.architecture,
                names.len()
            )));
        }
        for ((name, shape, _), found) in plan.iter().zip(&names) {
            if name != found {
                return Err(Error::Checkpoint(format!(
                    "expected parameter {name}, found {found}"
                )));
            }
            let tensor = params.get(found).expect("name from store");
            if tensor.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "{name}: expected shape {shape:?}, found {:?}",
                    tensor.shape()
                )));
            }
        }
        Ok(Model { config, params })
    }
}
