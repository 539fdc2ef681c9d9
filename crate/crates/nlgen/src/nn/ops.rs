//! Pure forward kernels: activations, linear algebra, losses.
//!
//! These are the single source of truth for all forward math. The gradient
//! tape's eager forward pass calls straight into them, so the decode path
//! (which runs tape-free) and the training path compute identical values.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Probability floor used when taking logs of predicted distributions.
pub const PROB_CLAMP: f64 = 1e-12;

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logistic sigmoid, overflow-safe on both tails.
pub fn sigmoid(x: &Tensor) -> Tensor {
    let values = x.values().iter().map(|&v| sigmoid_scalar(v)).collect();
    Tensor::from_values(x.shape(), values).expect("same shape")
}

/// Elementwise tanh.
pub fn tanh(x: &Tensor) -> Tensor {
    let values = x.values().iter().map(|v| v.tanh()).collect();
    Tensor::from_values(x.shape(), values).expect("same shape")
}

/// Softmax over a non-empty vector. Max-subtraction keeps it overflow-safe;
/// the output sums to 1 and is invariant to adding a constant to all logits.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.numel() == 0 {
        return Err(Error::EmptyInput("softmax"));
    }
    let max = logits
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.values().iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Tensor::from_values(logits.shape(), out)
}

/// Negative log likelihood of `target` under a predicted distribution.
/// A zero probability at the target is clamped at `PROB_CLAMP` and flagged
/// in the logs rather than producing an infinity. Returns (loss, clamped).
pub fn cross_entropy(predicted: &Tensor, target: usize) -> Result<(f64, bool)> {
    if target >= predicted.numel() {
        return Err(Error::ShapeMismatch {
            context: "cross_entropy",
            expected: format!("target < {}", predicted.numel()),
            got: format!("target {target}"),
        });
    }
    let p = predicted.values()[target];
    if p < PROB_CLAMP {
        log::warn!("cross_entropy: clamped zero probability at target {target}");
        Ok(((PROB_CLAMP).ln().neg(), true))
    } else {
        Ok((p.ln().neg(), false))
    }
}

use std::ops::Neg;

/// x[k] . W[k,n] -> [n] (row vector times matrix).
pub fn vecmat(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    if x.shape().len() != 1 || w.shape().len() != 2 || x.numel() != w.rows() {
        return Err(Error::ShapeMismatch {
            context: "vecmat",
            expected: "[k] . [k,n]".to_string(),
            got: format!("{:?} . {:?}", x.shape(), w.shape()),
        });
    }
    let (k, n) = (w.rows(), w.cols());
    let mut out = vec![0.0; n];
    let xv = x.values();
    let wv = w.values();
    for i in 0..k {
        let xi = xv[i];
        if xi == 0.0 {
            continue;
        }
        let row = &wv[i * n..(i + 1) * n];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    Tensor::from_values(&[n], out)
}

/// M[n,d] . v[d] -> [n] (matrix times column vector).
pub fn matvec(m: &Tensor, v: &Tensor) -> Result<Tensor> {
    if m.shape().len() != 2 || v.shape().len() != 1 || m.cols() != v.numel() {
        return Err(Error::ShapeMismatch {
            context: "matvec",
            expected: "[n,d] . [d]".to_string(),
            got: format!("{:?} . {:?}", m.shape(), v.shape()),
        });
    }
    let (n, d) = (m.rows(), m.cols());
    let mv = m.values();
    let vv = v.values();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = &mv[i * d..(i + 1) * d];
        out[i] = row.iter().zip(vv).map(|(a, b)| a * b).sum();
    }
    Tensor::from_values(&[n], out)
}

/// A[m,k] . B[k,n] -> [m,n].
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.rows() {
        return Err(Error::ShapeMismatch {
            context: "matmul",
            expected: "[m,k] . [k,n]".to_string(),
            got: format!("{:?} . {:?}", a.shape(), b.shape()),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let av = a.values();
    let bv = b.values();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = av[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &bv[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bpj) in orow.iter_mut().zip(brow) {
                *o += aip * bpj;
            }
        }
    }
    Tensor::from_values(&[m, n], out)
}

/// Elementwise a + b.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: "add",
            expected: format!("{:?}", a.shape()),
            got: format!("{:?}", b.shape()),
        });
    }
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x + y)
        .collect();
    Tensor::from_values(a.shape(), values)
}

/// Elementwise a * b.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: "mul",
            expected: format!("{:?}", a.shape()),
            got: format!("{:?}", b.shape()),
        });
    }
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x * y)
        .collect();
    Tensor::from_values(a.shape(), values)
}

/// M[n,d] + v[d] broadcast over rows.
pub fn add_rows(m: &Tensor, v: &Tensor) -> Result<Tensor> {
    if m.shape().len() != 2 || v.shape().len() != 1 || m.cols() != v.numel() {
        return Err(Error::ShapeMismatch {
            context: "add_rows",
            expected: "[n,d] + [d]".to_string(),
            got: format!("{:?} + {:?}", m.shape(), v.shape()),
        });
    }
    let (n, d) = (m.rows(), m.cols());
    let mut values = m.values().to_vec();
    let vv = v.values();
    for i in 0..n {
        for j in 0..d {
            values[i * d + j] += vv[j];
        }
    }
    Tensor::from_values(&[n, d], values)
}

/// Concatenation of two vectors.
pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape().len() != 1 || b.shape().len() != 1 {
        return Err(Error::ShapeMismatch {
            context: "concat",
            expected: "two vectors".to_string(),
            got: format!("{:?}, {:?}", a.shape(), b.shape()),
        });
    }
    let mut values = a.values().to_vec();
    values.extend_from_slice(b.values());
    Tensor::from_values(&[a.numel() + b.numel()], values)
}

/// Stack n vectors of length d into an [n,d] matrix.
pub fn stack_rows(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::EmptyInput("stack_rows"));
    }
    let d = parts[0].numel();
    let mut values = Vec::with_capacity(parts.len() * d);
    for p in parts {
        if p.shape().len() != 1 || p.numel() != d {
            return Err(Error::ShapeMismatch {
                context: "stack_rows",
                expected: format!("[{d}]"),
                got: format!("{:?}", p.shape()),
            });
        }
        values.extend_from_slice(p.values());
    }
    Tensor::from_values(&[parts.len(), d], values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_values() {
        let x = Tensor::from_values(&[3], vec![0.0, 100.0, -2.0]).unwrap();
        let y = sigmoid(&x);
        assert!((y.values()[0] - 0.5).abs() < 1e-12);
        assert!((y.values()[1] - 1.0).abs() < 1e-9);
        // hand calculator: 1/(1+e^2) = 0.11920292
        assert!((y.values()[2] - 0.11920).abs() < 1e-4);
        // saturates to exactly 1.0 in f64 at the far tail; never exceeds it
        assert!(y.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn sigmoid_no_overflow_on_large_negative() {
        let x = Tensor::from_values(&[1], vec![-900.0]).unwrap();
        let y = sigmoid(&x);
        assert!(y.values()[0] >= 0.0 && y.values()[0] < 1e-100);
        assert!(y.all_finite());
    }

    #[test]
    fn softmax_reference_values() {
        let y = softmax(&Tensor::from_values(&[2], vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(y.values(), &[0.5, 0.5]);

        // large logits must not overflow
        let y = softmax(&Tensor::from_values(&[2], vec![1000.0, 0.0]).unwrap()).unwrap();
        assert!((y.values()[0] - 1.0).abs() < 1e-9);
        assert!(y.values()[1] < 1e-9);

        // hand calculator: exp(1,2,3)/sum
        let y = softmax(&Tensor::from_values(&[3], vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert!((y.values()[0] - 0.09003).abs() < 1e-4);
        assert!((y.values()[1] - 0.24473).abs() < 1e-4);
        assert!((y.values()[2] - 0.66524).abs() < 1e-4);
    }

    #[test]
    fn softmax_shift_invariance_and_sum() {
        let a = Tensor::from_values(&[4], vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        let b = Tensor::from_values(&[4], vec![100.3, 98.8, 102.0, 100.7]).unwrap();
        let ya = softmax(&a).unwrap();
        let yb = softmax(&b).unwrap();
        for (x, y) in ya.values().iter().zip(yb.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let sum: f64 = ya.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_empty_is_error() {
        assert!(softmax(&Tensor::from_values(&[0], vec![]).unwrap()).is_err());
    }

    #[test]
    fn cross_entropy_reference_values() {
        let uniform = Tensor::from_values(&[4], vec![0.25; 4]).unwrap();
        let (loss, clamped) = cross_entropy(&uniform, 2).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        assert!(!clamped);

        let sure = Tensor::from_values(&[3], vec![0.0, 1.0, 0.0]).unwrap();
        let (loss, _) = cross_entropy(&sure, 1).unwrap();
        assert_eq!(loss, 0.0);

        // additivity over a 3-step sequence with the same distribution each step
        let total: f64 = (0..3)
            .map(|_| cross_entropy(&uniform, 0).unwrap().0)
            .sum();
        assert!((total - 3.0 * 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let dist = Tensor::from_values(&[2], vec![1.0, 0.0]).unwrap();
        let (loss, clamped) = cross_entropy(&dist, 1).unwrap();
        assert!(clamped);
        assert!(loss.is_finite());
        assert!((loss - (-PROB_CLAMP.ln())).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_target_out_of_range() {
        let dist = Tensor::from_values(&[2], vec![0.5, 0.5]).unwrap();
        assert!(cross_entropy(&dist, 5).is_err());
    }

    #[test]
    fn vecmat_matvec_matmul_agree() {
        let x = Tensor::from_values(&[2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::from_values(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = vecmat(&x, &w).unwrap();
        assert_eq!(y.values(), &[9.0, 12.0, 15.0]);

        let v = Tensor::from_values(&[3], vec![1.0, 0.0, -1.0]).unwrap();
        let z = matvec(&w, &v).unwrap();
        assert_eq!(z.values(), &[-2.0, -2.0]);

        let a = Tensor::from_values(&[1, 2], vec![1.0, 2.0]).unwrap();
        let c = matmul(&a, &w).unwrap();
        assert_eq!(c.values(), y.values());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let x = Tensor::from_values(&[3], vec![1.0; 3]).unwrap();
        let w = Tensor::from_values(&[2, 2], vec![1.0; 4]).unwrap();
        assert!(vecmat(&x, &w).is_err());
        assert!(matvec(&w, &x).is_err());
        assert!(add(&x, &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn stack_and_broadcast() {
        let a = Tensor::from_values(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_values(&[2], vec![3.0, 4.0]).unwrap();
        let m = stack_rows(&[&a, &b]).unwrap();
        assert_eq!(m.shape(), &[2, 2]);
        let shifted = add_rows(&m, &a).unwrap();
        assert_eq!(shifted.values(), &[2.0, 4.0, 4.0, 6.0]);
    }
}
