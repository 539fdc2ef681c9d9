//! Reverse-mode automatic differentiation via an eager Wengert tape.
//!
//! The tape records every operation of a forward pass together with its
//! computed value; [`GradientTape::backward`] then replays the record in
//! reverse, accumulating vector-Jacobian products into every parameter leaf.
//! Parameters are bound with a caller-chosen slot index so gradients can be
//! routed back to the owning model in a stable order.
//!
//! The forward value of each op is computed by the same pure kernels in
//! [`crate::nn::ops`] that the tape-free decode path uses, so training and
//! inference can never drift apart numerically.

use crate::error::{Error, Result};
use crate::nn::lstm::LstmCellParams;
use crate::nn::ops;
use crate::nn::tensor::Tensor;

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    VecMat { x: Var, w: Var },
    MatVec { m: Var, v: Var },
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    AddRows { m: Var, v: Var },
    Mul { a: Var, b: Var },
    Sigmoid { x: Var },
    Tanh { x: Var },
    Softmax { x: Var },
    Concat { a: Var, b: Var },
    StackRows { parts: Vec<Var> },
    EmbedRow { table: Var, row: usize },
    SumAll { x: Var },
    AddScalars { parts: Vec<Var> },
    /// Fused softmax + negative log likelihood of `target`.
    SoftmaxXent { logits: Var, target: usize },
    /// Summed elementwise binary cross-entropy of sigmoid(logits) vs targets.
    SigmoidBce { logits: Var, targets: Vec<f64> },
}

struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct GradientTape {
    nodes: Vec<Node>,
    /// (param slot, node) bindings, in binding order.
    params: Vec<(usize, Var)>,
}

/// Gradients keyed by the parameter slots bound on the tape.
pub struct Gradients {
    by_slot: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a bound slot. Querying a slot that was never recorded
    /// on the tape is an error.
    pub fn get(&self, slot: usize) -> Result<&Tensor> {
        self.by_slot
            .get(slot)
            .and_then(|g| g.as_ref())
            .ok_or(Error::Unrecorded(slot))
    }

    pub fn slots(&self) -> usize {
        self.by_slot.len()
    }
}

impl GradientTape {
    pub fn new() -> GradientTape {
        GradientTape::default()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        debug_assert!(value.all_finite(), "non-finite tape value");
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Record a constant input (no gradient flows into it).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t)
    }

    /// Record a parameter leaf. The tensor is snapshotted; `slot` keys the
    /// gradient returned by [`backward`](Self::backward).
    pub fn param(&mut self, slot: usize, t: &Tensor) -> Var {
        let v = self.push(Op::Leaf, t.clone());
        self.params.push((slot, v));
        v
    }

    pub fn vecmat(&mut self, x: Var, w: Var) -> Result<Var> {
        let value = ops::vecmat(self.value(x), self.value(w))?;
        Ok(self.push(Op::VecMat { x, w }, value))
    }

    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var> {
        let value = ops::matvec(self.value(m), self.value(v))?;
        Ok(self.push(Op::MatVec { m, v }, value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul { a, b }, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add { a, b }, value))
    }

    pub fn add_rows(&mut self, m: Var, v: Var) -> Result<Var> {
        let value = ops::add_rows(self.value(m), self.value(v))?;
        Ok(self.push(Op::AddRows { m, v }, value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::mul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Mul { a, b }, value))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = ops::sigmoid(self.value(x));
        self.push(Op::Sigmoid { x }, value)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = ops::tanh(self.value(x));
        self.push(Op::Tanh { x }, value)
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let value = ops::softmax(self.value(x))?;
        Ok(self.push(Op::Softmax { x }, value))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::concat(self.value(a), self.value(b))?;
        Ok(self.push(Op::Concat { a, b }, value))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let value = ops::stack_rows(&tensors)?;
        Ok(self.push(
            Op::StackRows {
                parts: parts.to_vec(),
            },
            value,
        ))
    }

    pub fn embed_row(&mut self, table: Var, row: usize) -> Result<Var> {
        let t = self.value(table);
        if t.shape().len() != 2 || row >= t.rows() {
            return Err(Error::ShapeMismatch {
                context: "embed_row",
                expected: format!("row < {}", t.rows()),
                got: format!("row {row} of {:?}", t.shape()),
            });
        }
        let value = Tensor::from_values(&[t.cols()], t.row(row).to_vec())?;
        Ok(self.push(Op::EmbedRow { table, row }, value))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).values().iter().sum());
        self.push(Op::SumAll { x }, value)
    }

    pub fn add_scalars(&mut self, parts: &[Var]) -> Result<Var> {
        let mut total = 0.0;
        for &p in parts {
            if !self.value(p).is_scalar() {
                return Err(Error::ShapeMismatch {
                    context: "add_scalars",
                    expected: "scalar parts".to_string(),
                    got: format!("{:?}", self.value(p).shape()),
                });
            }
            total += self.value(p).item();
        }
        Ok(self.push(
            Op::AddScalars {
                parts: parts.to_vec(),
            },
            Tensor::scalar(total),
        ))
    }

    /// -log softmax(logits)[target], numerically fused.
    pub fn softmax_xent(&mut self, logits: Var, target: usize) -> Result<Var> {
        let probs = ops::softmax(self.value(logits))?;
        let (loss, _clamped) = ops::cross_entropy(&probs, target)?;
        Ok(self.push(Op::SoftmaxXent { logits, target }, Tensor::scalar(loss)))
    }

    /// Sum_i [ BCE(sigmoid(logits_i), targets_i) ], numerically fused.
    /// Targets are constants in {0, 1}.
    pub fn sigmoid_bce(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let z = self.value(logits);
        if z.numel() != targets.len() {
            return Err(Error::ShapeMismatch {
                context: "sigmoid_bce",
                expected: format!("{} targets", z.numel()),
                got: format!("{}", targets.len()),
            });
        }
        // stable form: max(z,0) - z*y + ln(1 + exp(-|z|))
        let loss: f64 = z
            .values()
            .iter()
            .zip(targets)
            .map(|(&zi, &yi)| zi.max(0.0) - zi * yi + (-zi.abs()).exp().ln_1p())
            .sum();
        Ok(self.push(
            Op::SigmoidBce {
                logits,
                targets: targets.to_vec(),
            },
            Tensor::scalar(loss),
        ))
    }

    /// Reverse pass from a scalar loss: exact reverse-mode derivatives of the
    /// recorded graph with respect to every bound parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::ShapeMismatch {
                context: "backward",
                expected: "scalar loss".to_string(),
                got: format!("{:?}", self.value(loss).shape()),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let out_grad = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.backward_op(idx, &out_grad, &mut grads);
            grads[idx] = Some(out_grad);
        }

        let n_slots = self
            .params
            .iter()
            .map(|&(slot, _)| slot + 1)
            .max()
            .unwrap_or(0);
        let mut by_slot: Vec<Option<Tensor>> = (0..n_slots).map(|_| None).collect();
        for &(slot, var) in &self.params {
            let shape = self.value(var).shape().to_vec();
            let g = grads[var.0]
                .clone()
                .unwrap_or_else(|| vec![0.0; self.value(var).numel()]);
            let tensor = Tensor::from_values(&shape, g)?;
            match &mut by_slot[slot] {
                Some(existing) => {
                    let summed = ops::add(existing, &tensor)?;
                    *existing = summed;
                }
                None => by_slot[slot] = Some(tensor),
            }
        }
        Ok(Gradients { by_slot })
    }

    fn accumulate(grads: &mut [Option<Vec<f64>>], var: Var, contribution: &[f64]) {
        match &mut grads[var.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contribution) {
                    *e += c;
                }
            }
            None => grads[var.0] = Some(contribution.to_vec()),
        }
    }

    fn backward_op(&self, idx: usize, dout: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}

            Op::VecMat { x, w } => {
                // out[j] = sum_k x[k] w[k,j]
                let xv = self.value(*x).values();
                let wt = self.value(*w);
                let (k, n) = (wt.rows(), wt.cols());
                let wv = wt.values();
                let mut dx = vec![0.0; k];
                for i in 0..k {
                    dx[i] = (0..n).map(|j| dout[j] * wv[i * n + j]).sum();
                }
                let mut dw = vec![0.0; k * n];
                for i in 0..k {
                    let xi = xv[i];
                    for j in 0..n {
                        dw[i * n + j] = xi * dout[j];
                    }
                }
                Self::accumulate(grads, *x, &dx);
                Self::accumulate(grads, *w, &dw);
            }

            Op::MatVec { m, v } => {
                // out[i] = sum_j m[i,j] v[j]
                let mt = self.value(*m);
                let (n, d) = (mt.rows(), mt.cols());
                let mv = mt.values();
                let vv = self.value(*v).values();
                let mut dm = vec![0.0; n * d];
                let mut dv = vec![0.0; d];
                for i in 0..n {
                    for j in 0..d {
                        dm[i * d + j] = dout[i] * vv[j];
                        dv[j] += dout[i] * mv[i * d + j];
                    }
                }
                Self::accumulate(grads, *m, &dm);
                Self::accumulate(grads, *v, &dv);
            }

            Op::MatMul { a, b } => {
                // dA = dOut B^T ; dB = A^T dOut
                let at = self.value(*a);
                let bt = self.value(*b);
                let (m, k, n) = (at.rows(), at.cols(), bt.cols());
                let av = at.values();
                let bv = bt.values();
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        da[i * k + p] = (0..n).map(|j| dout[i * n + j] * bv[p * n + j]).sum();
                    }
                }
                let mut db = vec![0.0; k * n];
                for p in 0..k {
                    for i in 0..m {
                        let aip = av[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            db[p * n + j] += aip * dout[i * n + j];
                        }
                    }
                }
                Self::accumulate(grads, *a, &da);
                Self::accumulate(grads, *b, &db);
            }

            Op::Add { a, b } => {
                Self::accumulate(grads, *a, dout);
                Self::accumulate(grads, *b, dout);
            }

            Op::AddRows { m, v } => {
                let d = self.value(*v).numel();
                let n = self.value(*m).rows();
                Self::accumulate(grads, *m, dout);
                let mut dv = vec![0.0; d];
                for i in 0..n {
                    for j in 0..d {
                        dv[j] += dout[i * d + j];
                    }
                }
                Self::accumulate(grads, *v, &dv);
            }

            Op::Mul { a, b } => {
                let av = self.value(*a).values();
                let bv = self.value(*b).values();
                let da: Vec<f64> = dout.iter().zip(bv).map(|(d, b)| d * b).collect();
                let db: Vec<f64> = dout.iter().zip(av).map(|(d, a)| d * a).collect();
                Self::accumulate(grads, *a, &da);
                Self::accumulate(grads, *b, &db);
            }

            Op::Sigmoid { x } => {
                let out = self.nodes[idx].value.values();
                let dx: Vec<f64> = dout
                    .iter()
                    .zip(out)
                    .map(|(d, o)| d * o * (1.0 - o))
                    .collect();
                Self::accumulate(grads, *x, &dx);
            }

            Op::Tanh { x } => {
                let out = self.nodes[idx].value.values();
                let dx: Vec<f64> = dout.iter().zip(out).map(|(d, o)| d * (1.0 - o * o)).collect();
                Self::accumulate(grads, *x, &dx);
            }

            Op::Softmax { x } => {
                let out = self.nodes[idx].value.values();
                let dot: f64 = dout.iter().zip(out).map(|(d, o)| d * o).sum();
                let dx: Vec<f64> = dout
                    .iter()
                    .zip(out)
                    .map(|(d, o)| o * (d - dot))
                    .collect();
                Self::accumulate(grads, *x, &dx);
            }

            Op::Concat { a, b } => {
                let na = self.value(*a).numel();
                Self::accumulate(grads, *a, &dout[..na]);
                Self::accumulate(grads, *b, &dout[na..]);
            }

            Op::StackRows { parts } => {
                let d = dout.len() / parts.len();
                for (i, part) in parts.iter().enumerate() {
                    Self::accumulate(grads, *part, &dout[i * d..(i + 1) * d]);
                }
            }

            Op::EmbedRow { table, row } => {
                let t = self.value(*table);
                let (rows, d) = (t.rows(), t.cols());
                let mut dt = vec![0.0; rows * d];
                dt[row * d..(row + 1) * d].copy_from_slice(dout);
                Self::accumulate(grads, *table, &dt);
            }

            Op::SumAll { x } => {
                let n = self.value(*x).numel();
                let dx = vec![dout[0]; n];
                Self::accumulate(grads, *x, &dx);
            }

            Op::AddScalars { parts } => {
                for part in parts {
                    Self::accumulate(grads, *part, dout);
                }
            }

            Op::SoftmaxXent { logits, target } => {
                let probs = ops::softmax(self.value(*logits)).expect("validated in forward");
                let mut dl: Vec<f64> = probs.values().iter().map(|&p| p * dout[0]).collect();
                dl[*target] -= dout[0];
                Self::accumulate(grads, *logits, &dl);
            }

            Op::SigmoidBce { logits, targets } => {
                let z = self.value(*logits).values();
                let dl: Vec<f64> = z
                    .iter()
                    .zip(targets)
                    .map(|(&zi, &yi)| (ops::sigmoid_scalar(zi) - yi) * dout[0])
                    .collect();
                Self::accumulate(grads, *logits, &dl);
            }
        }
    }
}

/// LSTM cell parameters bound to a tape as `Var`s.
pub struct TapedLstmCell {
    pub w_x: [Var; 4],
    pub w_h: [Var; 4],
    pub b: [Var; 4],
}

impl TapedLstmCell {
    /// Bind all 12 gate tensors as consecutive parameter slots starting at
    /// `base_slot`, in the same order as [`LstmCellParams::tensors`].
    pub fn bind(tape: &mut GradientTape, base_slot: usize, cell: &LstmCellParams) -> TapedLstmCell {
        let w_x = std::array::from_fn(|g| tape.param(base_slot + g, &cell.w_x[g]));
        let w_h = std::array::from_fn(|g| tape.param(base_slot + 4 + g, &cell.w_h[g]));
        let b = std::array::from_fn(|g| tape.param(base_slot + 8 + g, &cell.b[g]));
        TapedLstmCell { w_x, w_h, b }
    }

    /// One LSTM step composed from primitive tape ops, so its backward pass
    /// needs no dedicated rule. Returns (h', c').
    pub fn step(&self, tape: &mut GradientTape, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let pre = |tape: &mut GradientTape, g: usize| -> Result<Var> {
            let xi = tape.vecmat(x, self.w_x[g])?;
            let hi = tape.vecmat(h, self.w_h[g])?;
            let s = tape.add(xi, hi)?;
            tape.add(s, self.b[g])
        };
        let zi = pre(tape, 0)?;
        let zf = pre(tape, 1)?;
        let zo = pre(tape, 2)?;
        let zg = pre(tape, 3)?;
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let o = tape.sigmoid(zo);
        let g = tape.tanh(zg);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_new = tape.add(fc, ig)?;
        let tc = tape.tanh(c_new);
        let h_new = tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }
}
