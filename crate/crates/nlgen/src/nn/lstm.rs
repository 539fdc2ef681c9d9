//! The LSTM cell: parameters and the forward step.
//!
//! Standard non-peephole cell with four gates (input, forget, output,
//! candidate), sigmoid gating, tanh candidate and output squashing:
//!
//! ```text
//! i = sigmoid(x Wx_i + h Wh_i + b_i)      f = sigmoid(x Wx_f + h Wh_f + b_f)
//! o = sigmoid(x Wx_o + h Wh_o + b_o)      g = tanh   (x Wx_g + h Wh_g + b_g)
//! c' = f (.) c + i (.) g                  h' = o (.) tanh(c')
//! ```

use crate::error::{Error, Result};
use crate::nn::ops;
use crate::nn::tensor::Tensor;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};

/// Gate order used everywhere: input, forget, output, candidate.
pub const GATE_NAMES: [&str; 4] = ["input", "forget", "output", "candidate"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// Input-to-hidden weights per gate, each [input_size, hidden_size].
    pub w_x: [Tensor; 4],
    /// Hidden-to-hidden weights per gate, each [hidden_size, hidden_size].
    pub w_h: [Tensor; 4],
    /// Biases per gate, each [hidden_size].
    pub b: [Tensor; 4],
}

impl LstmCellParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> LstmCellParams {
        LstmCellParams {
            input_size,
            hidden_size,
            w_x: std::array::from_fn(|_| Tensor::zeros(&[input_size, hidden_size])),
            w_h: std::array::from_fn(|_| Tensor::zeros(&[hidden_size, hidden_size])),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden_size])),
        }
    }

    /// Uniform [-scale, scale) initialization of all weights and biases.
    pub fn uniform(input_size: usize, hidden_size: usize, scale: f64, rng: &mut DetRng) -> Self {
        LstmCellParams {
            input_size,
            hidden_size,
            w_x: std::array::from_fn(|_| {
                Tensor::uniform(&[input_size, hidden_size], -scale, scale, rng)
            }),
            w_h: std::array::from_fn(|_| {
                Tensor::uniform(&[hidden_size, hidden_size], -scale, scale, rng)
            }),
            b: std::array::from_fn(|_| Tensor::uniform(&[hidden_size], -scale, scale, rng)),
        }
    }

    /// All tensors in canonical order with `prefix.`-qualified names.
    pub fn tensors(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(12);
        for (g, name) in GATE_NAMES.iter().enumerate() {
            out.push((format!("{prefix}.w_x.{name}"), &self.w_x[g]));
        }
        for (g, name) in GATE_NAMES.iter().enumerate() {
            out.push((format!("{prefix}.w_h.{name}"), &self.w_h[g]));
        }
        for (g, name) in GATE_NAMES.iter().enumerate() {
            out.push((format!("{prefix}.b.{name}"), &self.b[g]));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::with_capacity(12);
        let (wx, rest) = (&mut self.w_x, (&mut self.w_h, &mut self.b));
        out.extend(wx.iter_mut());
        out.extend(rest.0.iter_mut());
        out.extend(rest.1.iter_mut());
        out
    }

    fn check_shapes(&self, x: &Tensor, h: &Tensor, c: &Tensor) -> Result<()> {
        let ok = x.shape() == [self.input_size]
            && h.shape() == [self.hidden_size]
            && c.shape() == [self.hidden_size];
        if !ok {
            return Err(Error::ShapeMismatch {
                context: "lstm_step",
                expected: format!(
                    "x [{}], h [{}], c [{}]",
                    self.input_size, self.hidden_size, self.hidden_size
                ),
                got: format!("x {:?}, h {:?}, c {:?}", x.shape(), h.shape(), c.shape()),
            });
        }
        Ok(())
    }
}

/// One forward step of the cell. Deterministic: identical inputs give
/// bit-identical outputs. Returns (h', c').
pub fn lstm_step(
    cell: &LstmCellParams,
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
) -> Result<(Tensor, Tensor)> {
    cell.check_shapes(x, h_prev, c_prev)?;
    let pre = |g: usize| -> Result<Tensor> {
        let xin = ops::vecmat(x, &cell.w_x[g])?;
        let hin = ops::vecmat(h_prev, &cell.w_h[g])?;
        ops::add(&ops::add(&xin, &hin)?, &cell.b[g])
    };
    let i = ops::sigmoid(&pre(0)?);
    let f = ops::sigmoid(&pre(1)?);
    let o = ops::sigmoid(&pre(2)?);
    let g = ops::tanh(&pre(3)?);
    let c = ops::add(&ops::mul(&f, c_prev)?, &ops::mul(&i, &g)?)?;
    let h = ops::mul(&o, &ops::tanh(&c))?;
    Ok((h, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar-by-scalar reference trace, independent of the Tensor kernels.
    fn reference_step(
        cell: &LstmCellParams,
        x: &[f64],
        h: &[f64],
        c: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hs = cell.hidden_size;
        let gate = |g: usize, j: usize| -> f64 {
            let mut z = cell.b[g].values()[j];
            for (k, &xk) in x.iter().enumerate() {
                z += xk * cell.w_x[g].values()[k * hs + j];
            }
            for (k, &hk) in h.iter().enumerate() {
                z += hk * cell.w_h[g].values()[k * hs + j];
            }
            z
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut hn = vec![0.0; hs];
        let mut cn = vec![0.0; hs];
        for j in 0..hs {
            let i = sig(gate(0, j));
            let f = sig(gate(1, j));
            let o = sig(gate(2, j));
            let g = gate(3, j).tanh();
            cn[j] = f * c[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn zero_weights_zero_state_gives_zero_outputs() {
        let cell = LstmCellParams::zeros(3, 2);
        let x = Tensor::from_values(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let h0 = Tensor::zeros(&[2]);
        let c0 = Tensor::zeros(&[2]);
        let (h, c) = lstm_step(&cell, &x, &h0, &c0).unwrap();
        assert_eq!(h.values(), &[0.0, 0.0]);
        assert_eq!(c.values(), &[0.0, 0.0]);
    }

    /// Golden values frozen from a one-off hand calculation of the four gate
    /// equations (input_size 1, hidden_size 2, diagonal recurrences).
    #[test]
    fn hand_computed_golden_step() {
        let mut cell = LstmCellParams::zeros(1, 2);
        cell.w_x[0] = Tensor::from_values(&[1, 2], vec![0.5, -0.5]).unwrap();
        cell.w_x[1] = Tensor::from_values(&[1, 2], vec![1.0, 0.0]).unwrap();
        cell.w_x[2] = Tensor::from_values(&[1, 2], vec![0.0, 1.0]).unwrap();
        cell.w_x[3] = Tensor::from_values(&[1, 2], vec![0.25, 0.25]).unwrap();
        for (g, d) in [(0usize, 0.1f64), (1, 0.2), (2, 0.3), (3, 0.4)] {
            cell.w_h[g] = Tensor::from_values(&[2, 2], vec![d, 0.0, 0.0, d]).unwrap();
        }
        cell.b[0] = Tensor::from_values(&[2], vec![0.1, 0.1]).unwrap();
        cell.b[1] = Tensor::from_values(&[2], vec![0.2, 0.2]).unwrap();
        cell.b[2] = Tensor::from_values(&[2], vec![0.3, 0.3]).unwrap();

        let x = Tensor::from_values(&[1], vec![1.0]).unwrap();
        let h0 = Tensor::from_values(&[2], vec![0.5, -0.5]).unwrap();
        let c0 = Tensor::from_values(&[2], vec![1.0, 0.5]).unwrap();
        let (h, c) = lstm_step(&cell, &x, &h0, &c0).unwrap();

        let expect_c = [1.063027, 0.281942];
        let expect_h = [0.480464, 0.208639];
        for j in 0..2 {
            assert!(
                (c.values()[j] - expect_c[j]).abs() < 1e-4,
                "c[{j}] = {}",
                c.values()[j]
            );
            assert!(
                (h.values()[j] - expect_h[j]).abs() < 1e-4,
                "h[{j}] = {}",
                h.values()[j]
            );
        }
    }

    #[test]
    fn two_chained_steps_match_scalar_oracle() {
        let mut rng = DetRng::new(1234);
        for _ in 0..20 {
            let cell = LstmCellParams::uniform(3, 4, 0.5, &mut rng);
            let x = Tensor::uniform(&[3], -1.0, 1.0, &mut rng);
            let h0 = Tensor::uniform(&[4], -1.0, 1.0, &mut rng);
            let c0 = Tensor::uniform(&[4], -1.0, 1.0, &mut rng);

            let (h1, c1) = lstm_step(&cell, &x, &h0, &c0).unwrap();
            let (h2, c2) = lstm_step(&cell, &x, &h1, &c1).unwrap();

            let (rh1, rc1) = reference_step(&cell, x.values(), h0.values(), c0.values());
            let (rh2, rc2) = reference_step(&cell, x.values(), &rh1, &rc1);
            for j in 0..4 {
                assert!((h1.values()[j] - rh1[j]).abs() < 1e-12);
                assert!((c1.values()[j] - rc1[j]).abs() < 1e-12);
                assert!((h2.values()[j] - rh2[j]).abs() < 1e-12);
                assert!((c2.values()[j] - rc2[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let mut rng = DetRng::new(9);
        let cell = LstmCellParams::uniform(2, 3, 0.1, &mut rng);
        let x = Tensor::uniform(&[2], -1.0, 1.0, &mut rng);
        let h = Tensor::zeros(&[3]);
        let c = Tensor::zeros(&[3]);
        let (h1, c1) = lstm_step(&cell, &x, &h, &c).unwrap();
        let (h2, c2) = lstm_step(&cell, &x, &h, &c).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(c1, c2);

        let bad = Tensor::zeros(&[5]);
        assert!(lstm_step(&cell, &bad, &h, &c).is_err());
    }
}
