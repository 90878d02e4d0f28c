//! Reverse-mode autodiff tape over whole tensors.
//!
//! Forward calls append nodes and compute values eagerly; `backward` walks
//! the tape once in reverse, accumulating parameter gradients into the
//! [`ParamStore`] the parameters were placed from. Recurrent cells (LSTM,
//! closed-form continuous-time) are composed from the primitive ops, so one
//! set of backward rules covers every model.

use super::store::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Input,
    Param(usize),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Offset(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Dense { w: NodeId, x: NodeId, b: NodeId },
    Conv1d { x: NodeId, w: NodeId, b: NodeId },
    Row { x: NodeId, row: usize },
    Flatten(NodeId),
    Concat(NodeId, NodeId),
    Mean(Vec<NodeId>),
    SoftmaxCrossEntropy { logits: NodeId, target: usize, probs: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// LSTM gate parameters, already placed on a tape. Each weight maps the
/// concatenated `[x; h_prev]` vector to the hidden size.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights {
    pub w_input: NodeId,
    pub b_input: NodeId,
    pub w_forget: NodeId,
    pub b_forget: NodeId,
    pub w_output: NodeId,
    pub b_output: NodeId,
    pub w_candidate: NodeId,
    pub b_candidate: NodeId,
}

/// Closed-form continuous-time cell parameters, placed on a tape. Each
/// weight maps `[x; h_prev]` to the hidden size.
#[derive(Debug, Clone, Copy)]
pub struct CfcWeights {
    pub w_rate: NodeId,
    pub b_rate: NodeId,
    pub w_transient: NodeId,
    pub b_transient: NodeId,
    pub w_steady: NodeId,
    pub b_steady: NodeId,
}

/// Intermediate heads of one continuous-time cell step, exposed so tests can
/// check the mixing behavior.
#[derive(Debug, Clone, Copy)]
pub struct CfcStep {
    /// New hidden state.
    pub output: NodeId,
    /// Head that dominates at small elapsed times.
    pub transient: NodeId,
    /// Head the state decays toward as elapsed time grows.
    pub steady: NodeId,
    /// Positive per-unit decay rate.
    pub rate: NodeId,
    /// Mixing gate `sigmoid(-rate * tau)`.
    pub gate: NodeId,
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn stable_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        debug_assert!(value.all_finite(), "tape produced a non-finite tensor");
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Places a constant (non-trainable) tensor.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Places a named parameter from `store`. Gradients flow back into the
    /// same store on `backward`, so one tape must stick to one store.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        let idx = store
            .entry_index(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))?;
        Ok(self.push(store.value_by_index(idx).clone(), Op::Param(idx)))
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "add")?;
        let value = Tensor::from_vec(
            self.value(a).shape(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x + y)
                .collect(),
        )?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "sub")?;
        let value = Tensor::from_vec(
            self.value(a).shape(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x - y)
                .collect(),
        )?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "mul")?;
        let value = Tensor::from_vec(
            self.value(a).shape(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x * y)
                .collect(),
        )?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.value(x).map(|v| v * c);
        self.push(value, Op::Scale(x, c))
    }

    pub fn offset(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.value(x).map(|v| v + c);
        self.push(value, Op::Offset(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(stable_sigmoid);
        self.push(value, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::tanh);
        self.push(value, Op::Tanh(x))
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(stable_softplus);
        self.push(value, Op::Softplus(x))
    }

    /// Affine map `w x + b` with `w: [p, n]`, `x: [n]`, `b: [p]`.
    pub fn dense(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (wt, xt, bt) = (self.value(w), self.value(x), self.value(b));
        match (wt.shape(), xt.shape(), bt.shape()) {
            ([p, n], [xn], [bp]) if n == xn && p == bp => {}
            (ws, xs, bs) => {
                return Err(Error::ShapeMismatch(format!(
                    "dense: w {ws:?}, x {xs:?}, b {bs:?}"
                )))
            }
        }
        let (p, n) = (wt.shape()[0], wt.shape()[1]);
        let mut out = vec![0.0; p];
        for i in 0..p {
            let row = &wt.data()[i * n..(i + 1) * n];
            let mut acc = bt.data()[i];
            for (wv, xv) in row.iter().zip(xt.data()) {
                acc += wv * xv;
            }
            out[i] = acc;
        }
        Ok(self.push(Tensor::vector(out), Op::Dense { w, x, b }))
    }

    /// Valid cross-correlation along the time axis.
    ///
    /// `x: [m, c_in]`, `w: [c_out, c_in, k]`, `b: [c_out]`; the result is
    /// `[m - k + 1, c_out]` with
    /// `y[t, o] = b[o] + sum_{c, j} x[t + j, c] * w[o, c, j]`.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xt, wt, bt) = (self.value(x), self.value(w), self.value(b));
        let (m, c_in, c_out, k) = match (xt.shape(), wt.shape(), bt.shape()) {
            ([m, ci], [co, wci, k], [bo]) if ci == wci && co == bo => (*m, *ci, *co, *k),
            (xs, ws, bs) => {
                return Err(Error::ShapeMismatch(format!(
                    "conv1d: x {xs:?}, w {ws:?}, b {bs:?}"
                )))
            }
        };
        if m < k {
            return Err(Error::ShapeMismatch(format!(
                "conv1d: {m} samples is shorter than kernel {k}"
            )));
        }
        let out_len = m - k + 1;
        let mut out = Tensor::zeros(&[out_len, c_out]);
        for t in 0..out_len {
            for o in 0..c_out {
                let mut acc = bt.data()[o];
                for c in 0..c_in {
                    for j in 0..k {
                        acc += xt.data()[xt.idx2(t + j, c)] * wt.data()[wt.idx3(o, c, j)];
                    }
                }
                let idx = out.idx2(t, o);
                out.data_mut()[idx] = acc;
            }
        }
        Ok(self.push(out, Op::Conv1d { x, w, b }))
    }

    /// Extracts row `row` of a matrix as a vector.
    pub fn row(&mut self, x: NodeId, row: usize) -> Result<NodeId> {
        let xt = self.value(x);
        match xt.shape() {
            [m, n] if row < *m => {
                let value = Tensor::vector(xt.data()[row * n..(row + 1) * n].to_vec());
                Ok(self.push(value, Op::Row { x, row }))
            }
            shape => Err(Error::ShapeMismatch(format!(
                "row {row} of tensor with shape {shape:?}"
            ))),
        }
    }

    /// Reshapes any tensor to a vector.
    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::vector(self.value(x).data().to_vec());
        self.push(value, Op::Flatten(x))
    }

    /// Concatenates two vectors.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.shape().len() != 1 || bt.shape().len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "concat expects vectors, got {:?} and {:?}",
                at.shape(),
                bt.shape()
            )));
        }
        let mut data = at.data().to_vec();
        data.extend_from_slice(bt.data());
        Ok(self.push(Tensor::vector(data), Op::Concat(a, b)))
    }

    /// Mean of scalar nodes; the batch-loss reducer.
    pub fn mean(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::Empty("mean over no nodes".into()));
        }
        let mut acc = 0.0;
        for &x in xs {
            acc += self.value(x).as_scalar()?;
        }
        let value = Tensor::scalar(acc / xs.len() as f64);
        Ok(self.push(value, Op::Mean(xs.to_vec())))
    }

    /// Cross-entropy of softmax(logits) against a hard target, computed via
    /// max-subtracted log-sum-exp.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let lt = self.value(logits);
        if lt.shape().len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "logits must be a vector, got {:?}",
                lt.shape()
            )));
        }
        let k = lt.shape()[0];
        if target >= k {
            return Err(Error::InvalidArgument(format!(
                "target class {target} out of range for {k} logits"
            )));
        }
        let max = lt.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = lt.data().iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        let loss = sum.ln() - (lt.data()[target] - max);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy { logits, target, probs },
        ))
    }

    /// One LSTM step. Gates read the concatenated `[x; h_prev]`:
    /// `i, f, o = sigmoid(...)`, `c~ = tanh(...)`,
    /// `c = f * c_prev + i * c~`, `h = o * tanh(c)`.
    pub fn lstm_cell(
        &mut self,
        x: NodeId,
        h_prev: NodeId,
        c_prev: NodeId,
        w: &LstmWeights,
    ) -> Result<(NodeId, NodeId)> {
        let u = self.concat(x, h_prev)?;
        let i_lin = self.dense(w.w_input, u, w.b_input)?;
        let i = self.sigmoid(i_lin);
        let f_lin = self.dense(w.w_forget, u, w.b_forget)?;
        let f = self.sigmoid(f_lin);
        let o_lin = self.dense(w.w_output, u, w.b_output)?;
        let o = self.sigmoid(o_lin);
        let cand_lin = self.dense(w.w_candidate, u, w.b_candidate)?;
        let cand = self.tanh(cand_lin);
        let keep = self.mul(f, c_prev)?;
        let write = self.mul(i, cand)?;
        let c = self.add(keep, write)?;
        let c_act = self.tanh(c);
        let h = self.mul(o, c_act)?;
        Ok((h, c))
    }

    /// One closed-form continuous-time step over elapsed time `tau`.
    ///
    /// With `u = [x; h_prev]`: `rate = softplus(...)` keeps decay positive,
    /// `transient = tanh(...)`, `steady = tanh(...)`, and the new state mixes
    /// them by `gate = sigmoid(-rate * tau)`:
    /// `h = gate * transient + (1 - gate) * steady`. Large `tau` forgets the
    /// transient head entirely.
    pub fn cfc_cell(
        &mut self,
        x: NodeId,
        h_prev: NodeId,
        tau: f64,
        w: &CfcWeights,
    ) -> Result<CfcStep> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "elapsed time must be non-negative and finite, got {tau}"
            )));
        }
        let u = self.concat(x, h_prev)?;
        let rate_lin = self.dense(w.w_rate, u, w.b_rate)?;
        let rate = self.softplus(rate_lin);
        let transient_lin = self.dense(w.w_transient, u, w.b_transient)?;
        let transient = self.tanh(transient_lin);
        let steady_lin = self.dense(w.w_steady, u, w.b_steady)?;
        let steady = self.tanh(steady_lin);
        let decay = self.scale(rate, -tau);
        let gate = self.sigmoid(decay);
        let neg_gate = self.scale(gate, -1.0);
        let complement = self.offset(neg_gate, 1.0);
        let transient_part = self.mul(gate, transient)?;
        let steady_part = self.mul(complement, steady)?;
        let output = self.add(transient_part, steady_part)?;
        Ok(CfcStep {
            output,
            transient,
            steady,
            rate,
            gate,
        })
    }

    /// Accumulates `d loss / d p` into `store` for every parameter `p` placed
    /// on this tape. `loss` must be a scalar node. Gradients add onto
    /// whatever the store already holds.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::InvalidArgument(
                "backward target is not on this tape".into(),
            ));
        }
        self.value(loss).as_scalar()?;
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn add_into(slot: &mut Option<Tensor>, shape: &[usize], values: &[f64]) {
            match slot {
                Some(t) => {
                    for (g, v) in t.data_mut().iter_mut().zip(values) {
                        *g += v;
                    }
                }
                None => {
                    *slot = Some(
                        Tensor::from_vec(shape, values.to_vec())
                            .expect("gradient shape matches node shape"),
                    );
                }
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            debug_assert_eq!(g.shape(), node.value.shape());
            match &node.op {
                Op::Input => {}
                Op::Param(p) => store.accumulate_grad(*p, &g),
                Op::Add(a, b) => {
                    add_into(&mut grads[a.0], self.nodes[a.0].value.shape(), g.data());
                    add_into(&mut grads[b.0], self.nodes[b.0].value.shape(), g.data());
                }
                Op::Sub(a, b) => {
                    add_into(&mut grads[a.0], self.nodes[a.0].value.shape(), g.data());
                    let neg: Vec<f64> = g.data().iter().map(|v| -v).collect();
                    add_into(&mut grads[b.0], self.nodes[b.0].value.shape(), &neg);
                }
                Op::Mul(a, b) => {
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    let da: Vec<f64> = g.data().iter().zip(bv).map(|(g, b)| g * b).collect();
                    let db: Vec<f64> = g.data().iter().zip(av).map(|(g, a)| g * a).collect();
                    add_into(&mut grads[a.0], self.nodes[a.0].value.shape(), &da);
                    add_into(&mut grads[b.0], self.nodes[b.0].value.shape(), &db);
                }
                Op::Scale(x, c) => {
                    let dx: Vec<f64> = g.data().iter().map(|v| v * c).collect();
                    add_into(&mut grads[x.0], self.nodes[x.0].value.shape(), &dx);
                }
                Op::Offset(x) => {
                    add_into(&mut grads[x.0], self.nodes[x.0].value.shape(), g.data());
                }
                Op::Relu(x) => {
                    let xv = self.nodes[x.0].value.data();
                    let dx: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(xv)
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    add_into(&mut grads[x.0], self.nodes[x.0].value.shape(), &dx);
                }
                Op::Sigmoid(x) => {
                    let yv = node.value.data();
                    let dx: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(yv)
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect();
                    add_into(&mut grads[x.0], self.nodes[x.0].value.shape(), &dx);
                }
                Op::Tanh(x) => {
                    let yv = node.value.data();
                    let dx: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(yv)
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect();
                    add_into(&mut grads[x.0], self.nodes[x.0].value.shape(), &dx);
                }
                Op::Softplus(x) => {
                    let xv = self.nodes[x.0].value.data();
                    let dx: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(xv)
                        .map(|(g, x)| g * stable_sigmoid(*x))
                        .collect();
                    add_into(&mut grads[x.0], self.nodes[x.0].value.shape(), &dx);
                }
                Op::Dense { w, x, b } => {
                    let wt = &self.nodes[w.0].value;
                    let xt = &self.nodes[x.0].value;
                    let (p, n) = (wt.shape()[0], wt.shape()[1]);
                    let mut dw = vec![0.0; p * n];
                    let mut dx = vec![0.0; n];
                    for i in 0..p {
                        let gi = g.data()[i];
                        for j in 0..n {
                            dw[i * n + j] = gi * xt.data()[j];
                            dx[j] += gi * wt.data()[i * n + j];
                        }
                    }
                    add_into(&mut grads[w.0], wt.shape(), &dw);
                    add_into(&mut grads[x.0], xt.shape(), &dx);
                    add_into(&mut grads[b.0], self.nodes[b.0].value.shape(), g.data());
                }
                Op::Conv1d { x, w, b } => {
                    let xt = &self.nodes[x.0].value;
                    let wt = &self.nodes[w.0].value;
                    let (c_out, c_in, k) = (wt.shape()[0], wt.shape()[1], wt.shape()[2]);
                    let out_len = node.value.shape()[0];
                    let mut dx = vec![0.0; xt.len()];
                    let mut dw = vec![0.0; wt.len()];
                    let mut db = vec![0.0; c_out];
                    for t in 0..out_len {
                        for o in 0..c_out {
                            let go = g.data()[node.value.idx2(t, o)];
                            db[o] += go;
                            for c in 0..c_in {
                                for j in 0..k {
                                    dx[xt.idx2(t + j, c)] += go * wt.data()[wt.idx3(o, c, j)];
                                    dw[wt.idx3(o, c, j)] += go * xt.data()[xt.idx2(t + j, c)];
                                }
                            }
                        }
                    }
                    add_into(&mut grads[x.0], xt.shape(), &dx);
                    add_into(&mut grads[w.0], wt.shape(), &dw);
                    add_into(&mut grads[b.0], self.nodes[b.0].value.shape(), &db);
                }
                Op::Row { x, row } => {
                    let xt = &self.nodes[x.0].value;
                    let n = xt.shape()[1];
                    let mut dx = vec![0.0; xt.len()];
                    dx[row * n..(row + 1) * n].copy_from_slice(g.data());
                    add_into(&mut grads[x.0], xt.shape(), &dx);
                }
                Op::Flatten(x) => {
                    add_into(&mut grads[x.0], self.nodes[x.0].value.shape(), g.data());
                }
                Op::Concat(a, b) => {
                    let an = self.nodes[a.0].value.len();
                    add_into(&mut grads[a.0], self.nodes[a.0].value.shape(), &g.data()[..an]);
                    add_into(&mut grads[b.0], self.nodes[b.0].value.shape(), &g.data()[an..]);
                }
                Op::Mean(xs) => {
                    let share = g.data()[0] / xs.len() as f64;
                    for x in xs {
                        add_into(&mut grads[x.0], &[], &[share]);
                    }
                }
                Op::SoftmaxCrossEntropy { logits, target, probs } => {
                    let gs = g.data()[0];
                    let dl: Vec<f64> = probs
                        .iter()
                        .enumerate()
                        .map(|(i, p)| gs * (p - if i == *target { 1.0 } else { 0.0 }))
                        .collect();
                    add_into(&mut grads[logits.0], self.nodes[logits.0].value.shape(), &dl);
                }
            }
        }
        store.mark_grads_ready();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::store::Init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_forward_matches_hand_computation() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        store.register("w", &[2, 3], Init::Zeros, &mut rng).unwrap();
        store
            .set("w", Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap())
            .unwrap();
        store.register("b", &[2], Init::Zeros, &mut rng).unwrap();
        store.set("b", Tensor::vector(vec![0.5, -0.5])).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        let b = tape.param(&store, "b").unwrap();
        let x = tape.input(Tensor::vector(vec![1.0, 0.0, -1.0]));
        let y = tape.dense(w, x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0 - 3.0 + 0.5, 4.0 - 6.0 - 0.5]);
    }

    #[test]
    fn conv1d_matches_hand_computation() {
        // One input channel, one output channel, kernel [1, 2]: sliding dot
        // products over [1, 2, 3, 4] give [1*1+2*2, 2*1+3*2, 3*1+4*2] + 10.
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        store.register("w", &[1, 1, 2], Init::Zeros, &mut rng).unwrap();
        store
            .set("w", Tensor::from_vec(&[1, 1, 2], vec![1.0, 2.0]).unwrap())
            .unwrap();
        store.register("b", &[1], Init::Zeros, &mut rng).unwrap();
        store.set("b", Tensor::vector(vec![10.0])).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        let b = tape.param(&store, "b").unwrap();
        let x = tape.input(Tensor::matrix(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.conv1d(x, w, b).unwrap();
        assert_eq!(tape.value(y).shape(), &[3, 1]);
        assert_eq!(tape.value(y).data(), &[15.0, 18.0, 21.0]);
    }

    #[test]
    fn conv1d_output_length_is_m_minus_k_plus_1() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        store
            .register("w", &[16, 3, 5], Init::GlorotUniform, &mut rng)
            .unwrap();
        store.register("b", &[16], Init::Zeros, &mut rng).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        let b = tape.param(&store, "b").unwrap();
        let x = tape.input(Tensor::zeros(&[100, 3]));
        let y = tape.conv1d(x, w, b).unwrap();
        assert_eq!(tape.value(y).shape(), &[96, 16]);
        // Kernel longer than the input is rejected.
        let short = tape.input(Tensor::zeros(&[4, 3]));
        assert!(tape.conv1d(short, w, b).is_err());
    }

    #[test]
    fn softmax_cross_entropy_matches_closed_form() {
        let mut tape = Tape::new();
        let logits = tape.input(Tensor::vector(vec![2.0, 0.5, -1.0]));
        let loss = tape.softmax_cross_entropy(logits, 1).unwrap();
        let z: Vec<f64> = vec![2.0, 0.5, -1.0];
        let max = 2.0;
        let lse = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let expected = lse - (0.5 - max);
        assert!((tape.value(loss).as_scalar().unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn softmax_cross_entropy_survives_huge_logits() {
        let mut tape = Tape::new();
        let logits = tape.input(Tensor::vector(vec![1e4, -1e4]));
        let loss = tape.softmax_cross_entropy(logits, 0).unwrap();
        let v = tape.value(loss).as_scalar().unwrap();
        assert!(v.is_finite());
        assert!(v >= 0.0);
        assert!(tape.softmax_cross_entropy(logits, 2).is_err());
    }

    #[test]
    fn cross_entropy_gradient_is_probs_minus_onehot() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        store.register("logits", &[3], Init::Zeros, &mut rng).unwrap();
        store
            .set("logits", Tensor::vector(vec![1.0, -0.5, 0.25]))
            .unwrap();
        let mut tape = Tape::new();
        let logits = tape.param(&store, "logits").unwrap();
        let loss = tape.softmax_cross_entropy(logits, 2).unwrap();
        tape.backward(loss, &mut store).unwrap();
        let z = [1.0_f64, -0.5, 0.25];
        let sum: f64 = z.iter().map(|v| v.exp()).sum();
        let probs: Vec<f64> = z.iter().map(|v| v.exp() / sum).collect();
        let grad = store.grad("logits").unwrap().data();
        for i in 0..3 {
            let expected = probs[i] - if i == 2 { 1.0 } else { 0.0 };
            assert!((grad[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_accumulates_across_calls() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        store.register("logits", &[2], Init::Zeros, &mut rng).unwrap();
        store.set("logits", Tensor::vector(vec![0.7, -0.2])).unwrap();
        let run = |store: &mut ParamStore| {
            let mut tape = Tape::new();
            let logits = tape.param(store, "logits").unwrap();
            let loss = tape.softmax_cross_entropy(logits, 0).unwrap();
            tape.backward(loss, store).unwrap();
        };
        run(&mut store);
        let once = store.grad("logits").unwrap().data().to_vec();
        run(&mut store);
        let twice = store.grad("logits").unwrap().data().to_vec();
        for (a, b) in once.iter().zip(&twice) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
        // A [1]-shaped tensor is not a scalar, so mean() rejects it.
        let mut tape = Tape::new();
        let v = tape.input(Tensor::vector(vec![1.0]));
        assert!(tape.mean(&[v]).is_err());
    }

    #[test]
    fn gradient_of_square_via_finite_difference() {
        // loss = mean over one SCE is contrived here; use dense to a single
        // logit pair instead and check d loss / d w numerically.
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        store.register("w", &[2, 3], Init::GlorotUniform, &mut rng).unwrap();
        store.register("b", &[2], Init::Zeros, &mut rng).unwrap();
        let x_data = vec![0.3, -1.2, 0.7];
        let loss_value = |store: &ParamStore| -> f64 {
            let mut tape = Tape::new();
            let w = tape.param(store, "w").unwrap();
            let b = tape.param(store, "b").unwrap();
            let x = tape.input(Tensor::vector(x_data.clone()));
            let y = tape.dense(w, x, b).unwrap();
            let loss = tape.softmax_cross_entropy(y, 0).unwrap();
            tape.value(loss).as_scalar().unwrap()
        };
        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        let b = tape.param(&store, "b").unwrap();
        let x = tape.input(Tensor::vector(x_data.clone()));
        let y = tape.dense(w, x, b).unwrap();
        let loss = tape.softmax_cross_entropy(y, 0).unwrap();
        tape.backward(loss, &mut store).unwrap();
        let analytic = store.grad("w").unwrap().data().to_vec();
        let h = 1e-6;
        for i in 0..6 {
            store.nudge("w", i, h).unwrap();
            let up = loss_value(&store);
            store.nudge("w", i, -2.0 * h).unwrap();
            let down = loss_value(&store);
            store.nudge("w", i, h).unwrap();
            let numeric = (up - down) / (2.0 * h);
            assert!(
                (analytic[i] - numeric).abs() <= 1e-6,
                "coord {i}: {} vs {numeric}",
                analytic[i]
            );
        }
    }

    #[test]
    fn backward_needs_scalar_loss() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        store.register("w", &[2], Init::GlorotUniform, &mut rng).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        assert!(tape.backward(w, &mut store).is_err());
    }

    #[test]
    fn mean_averages_scalars() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::scalar(1.0));
        let b = tape.input(Tensor::scalar(3.0));
        let m = tape.mean(&[a, b]).unwrap();
        assert_eq!(tape.value(m).as_scalar().unwrap(), 2.0);
        assert!(tape.mean(&[]).is_err());
    }

    #[test]
    fn cfc_output_is_convex_mix_of_heads() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 4;
        let u = 3 + h;
        for head in ["rate", "transient", "steady"] {
            store
                .register(&format!("{head}.w"), &[h, u], Init::GlorotUniform, &mut rng)
                .unwrap();
            store
                .register(&format!("{head}.b"), &[h], Init::Zeros, &mut rng)
                .unwrap();
        }
        let mut tape = Tape::new();
        let weights = CfcWeights {
            w_rate: tape.param(&store, "rate.w").unwrap(),
            b_rate: tape.param(&store, "rate.b").unwrap(),
            w_transient: tape.param(&store, "transient.w").unwrap(),
            b_transient: tape.param(&store, "transient.b").unwrap(),
            w_steady: tape.param(&store, "steady.w").unwrap(),
            b_steady: tape.param(&store, "steady.b").unwrap(),
        };
        let x = tape.input(Tensor::vector(vec![0.5, -0.3, 1.1]));
        let h0 = tape.input(Tensor::zeros(&[h]));
        let step = tape.cfc_cell(x, h0, 0.02, &weights).unwrap();
        let out = tape.value(step.output).data();
        let transient = tape.value(step.transient).data();
        let steady = tape.value(step.steady).data();
        let gate = tape.value(step.gate).data();
        for i in 0..h {
            assert!(gate[i] > 0.0 && gate[i] < 1.0);
            let mix = gate[i] * transient[i] + (1.0 - gate[i]) * steady[i];
            assert!((out[i] - mix).abs() < 1e-14);
            let (lo, hi) = if transient[i] < steady[i] {
                (transient[i], steady[i])
            } else {
                (steady[i], transient[i])
            };
            assert!(out[i] >= lo - 1e-14 && out[i] <= hi + 1e-14);
        }
        // Rates are positive, so huge elapsed time collapses onto the steady
        // head exactly (the gate underflows to 0).
        assert!(tape.value(step.rate).data().iter().all(|&r| r > 0.0));
        let step_inf = tape.cfc_cell(x, h0, 1e9, &weights).unwrap();
        assert_eq!(
            tape.value(step_inf.output).data(),
            tape.value(step_inf.steady).data()
        );
        // Negative elapsed time is rejected.
        assert!(tape.cfc_cell(x, h0, -0.1, &weights).is_err());
    }

    #[test]
    fn cfc_drifts_toward_steady_as_tau_grows() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 3;
        let u = 2 + h;
        for head in ["rate", "transient", "steady"] {
            store
                .register(&format!("{head}.w"), &[h, u], Init::GlorotUniform, &mut rng)
                .unwrap();
            store
                .register(&format!("{head}.b"), &[h], Init::Zeros, &mut rng)
                .unwrap();
        }
        let mut tape = Tape::new();
        let weights = CfcWeights {
            w_rate: tape.param(&store, "rate.w").unwrap(),
            b_rate: tape.param(&store, "rate.b").unwrap(),
            w_transient: tape.param(&store, "transient.w").unwrap(),
            b_transient: tape.param(&store, "transient.b").unwrap(),
            w_steady: tape.param(&store, "steady.w").unwrap(),
            b_steady: tape.param(&store, "steady.b").unwrap(),
        };
        let x = tape.input(Tensor::vector(vec![0.2, -0.9]));
        let h0 = tape.input(Tensor::vector(vec![0.1, 0.4, -0.2]));
        let mut prev_dist: Option<Vec<f64>> = None;
        for tau in [0.0, 0.1, 1.0, 10.0, 100.0] {
            let step = tape.cfc_cell(x, h0, tau, &weights).unwrap();
            let out = tape.value(step.output).data().to_vec();
            let steady = tape.value(step.steady).data().to_vec();
            let dist: Vec<f64> = out
                .iter()
                .zip(&steady)
                .map(|(o, s)| (o - s).abs())
                .collect();
            if let Some(prev) = prev_dist {
                for i in 0..h {
                    assert!(dist[i] <= prev[i] + 1e-14, "tau {tau} coord {i}");
                }
            }
            prev_dist = Some(dist);
        }
    }

    #[test]
    fn lstm_cell_state_follows_gate_equations() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 3;
        let u = 2 + h;
        for gate in ["input", "forget", "output", "candidate"] {
            store
                .register(&format!("{gate}.w"), &[h, u], Init::GlorotUniform, &mut rng)
                .unwrap();
            store
                .register(&format!("{gate}.b"), &[h], Init::Zeros, &mut rng)
                .unwrap();
        }
        let mut tape = Tape::new();
        let weights = LstmWeights {
            w_input: tape.param(&store, "input.w").unwrap(),
            b_input: tape.param(&store, "input.b").unwrap(),
            w_forget: tape.param(&store, "forget.w").unwrap(),
            b_forget: tape.param(&store, "forget.b").unwrap(),
            w_output: tape.param(&store, "output.w").unwrap(),
            b_output: tape.param(&store, "output.b").unwrap(),
            w_candidate: tape.param(&store, "candidate.w").unwrap(),
            b_candidate: tape.param(&store, "candidate.b").unwrap(),
        };
        let x = tape.input(Tensor::vector(vec![1.0, -0.5]));
        let h0 = tape.input(Tensor::vector(vec![0.1, -0.1, 0.2]));
        let c0 = tape.input(Tensor::vector(vec![0.3, 0.0, -0.4]));
        let (h1, c1) = tape.lstm_cell(x, h0, c0, &weights).unwrap();

        // Recompute by hand from the stored weights.
        let uvec = [1.0, -0.5, 0.1, -0.1, 0.2];
        let affine = |name: &str| -> Vec<f64> {
            let w = store.get(&format!("{name}.w")).unwrap();
            let b = store.get(&format!("{name}.b")).unwrap();
            (0..h)
                .map(|i| {
                    let mut acc = b.data()[i];
                    for j in 0..u {
                        acc += w.data()[w.idx2(i, j)] * uvec[j];
                    }
                    acc
                })
                .collect()
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i_gate: Vec<f64> = affine("input").iter().map(|&v| sig(v)).collect();
        let f_gate: Vec<f64> = affine("forget").iter().map(|&v| sig(v)).collect();
        let o_gate: Vec<f64> = affine("output").iter().map(|&v| sig(v)).collect();
        let cand: Vec<f64> = affine("candidate").iter().map(|&v| v.tanh()).collect();
        let c_prev = [0.3, 0.0, -0.4];
        for k in 0..h {
            let c_expected = f_gate[k] * c_prev[k] + i_gate[k] * cand[k];
            let h_expected = o_gate[k] * c_expected.tanh();
            assert!((tape.value(c1).data()[k] - c_expected).abs() < 1e-12);
            assert!((tape.value(h1).data()[k] - h_expected).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.input(Tensor::vector(vec![1.0, 2.0, 3.0]));
        assert!(tape.add(a, b).is_err());
        assert!(tape.mul(a, b).is_err());
        let m = tape.input(Tensor::zeros(&[2, 2]));
        assert!(tape.row(m, 5).is_err());
        assert!(tape.concat(a, m).is_err());
    }
}
