//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Step counter; advances by exactly 1 per accepted update.
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    /// Fresh state with zero moment accumulators shaped like `params`.
    pub fn new(params: &[&Tensor], learning_rate: f64) -> AdamState {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// One bias-corrected Adam step over all parameters. `grads[i] == None`
    /// is treated as a zero gradient for parameter i.
    ///
    /// If any gradient contains a NaN the whole update is rejected: no
    /// parameter or accumulator changes, the step counter does not advance,
    /// and a warning is logged. Returns whether the update was applied.
    pub fn update(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Option<&Tensor>],
    ) -> Result<bool> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                context: "adam_update",
                expected: format!("{} parameters", self.m.len()),
                got: format!("{} params, {} grads", params.len(), grads.len()),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if g.shape() != params[i].shape() {
                    return Err(Error::ShapeMismatch {
                        context: "adam_update",
                        expected: format!("{:?}", params[i].shape()),
                        got: format!("{:?}", g.shape()),
                    });
                }
                if g.values().iter().any(|v| v.is_nan()) {
                    log::warn!("adam_update: NaN gradient in parameter {i}, batch rejected");
                    return Ok(false);
                }
            }
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let zero;
            let g = match grads[i] {
                Some(g) => g,
                None => {
                    zero = Tensor::zeros(params[i].shape());
                    &zero
                }
            };
            let m = self.m[i].values_mut();
            let v = self.v[i].values_mut();
            let p = params[i].values_mut();
            for ((pj, (mj, vj)), &gj) in p
                .iter_mut()
                .zip(m.iter_mut().zip(v.iter_mut()))
                .zip(g.values())
            {
                *mj = self.beta1 * *mj + (1.0 - self.beta1) * gj;
                *vj = self.beta2 * *vj + (1.0 - self.beta2) * gj * gj;
                let m_hat = *mj / bc1;
                let v_hat = *vj / bc2;
                *pj -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(true)
    }
}
