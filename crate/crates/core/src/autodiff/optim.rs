use serde::{Deserialize, Serialize};

use super::array::NdArray;
use crate::error::{Error, Result};

/// A trainable array with its gradient and Adam moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: NdArray,
    pub grad: NdArray,
    pub first_moment: NdArray,
    pub second_moment: NdArray,
    pub step: u64,
}

impl Parameter {
    pub fn new(value: NdArray) -> Self {
        let zeros = NdArray::zeros(value.shape());
        Self {
            grad: zeros.clone(),
            first_moment: zeros.clone(),
            second_moment: zeros,
            value,
            step: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// One bias-corrected Adam update on every parameter. Gradients are left
    /// in place; callers clear them.
    ///
    /// `lr == 0` still advances the moments and step counters but leaves
    /// values untouched.
    pub fn step(&self, params: &mut [Parameter], lr: f64) -> Result<()> {
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {lr}"
            )));
        }
        for p in params.iter_mut() {
            p.step += 1;
            let t = p.step as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let g = p.grad.data();
            let m = p.first_moment.data_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
            }
            let v = p.second_moment.data_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
            }
            if lr == 0.0 {
                continue;
            }
            let (m, v) = (p.first_moment.data(), p.second_moment.data());
            let w = p.value.data_mut();
            for ((wi, mi), vi) in w.iter_mut().zip(m).zip(v) {
                let m_hat = mi / c1;
                let v_hat = vi / c2;
                *wi -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64, g: f64) -> Parameter {
        let mut p = Parameter::new(NdArray::scalar(v));
        p.grad = NdArray::scalar(g);
        p
    }

    #[test]
    fn zero_lr_leaves_values() {
        let mut ps = vec![scalar_param(1.5, 0.3)];
        Adam::default().step(&mut ps, 0.0).unwrap();
        assert_eq!(ps[0].value.data(), &[1.5]);
        assert_eq!(ps[0].step, 1);
    }

    #[test]
    fn zero_gradient_leaves_values() {
        let mut ps = vec![scalar_param(-2.0, 0.0)];
        Adam::default().step(&mut ps, 0.01).unwrap();
        assert_eq!(ps[0].value.data(), &[-2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = 1, v_hat = 1 after bias correction, so the step is
        // lr / (1 + eps).
        let mut ps = vec![scalar_param(0.0, 1.0)];
        Adam::default().step(&mut ps, 0.001).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((ps[0].value.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_or_nan_lr() {
        let mut ps = vec![scalar_param(0.0, 1.0)];
        assert!(Adam::default().step(&mut ps, -1e-3).is_err());
        assert!(Adam::default().step(&mut ps, f64::NAN).is_err());
        assert_eq!(ps[0].step, 0);
    }

    #[test]
    fn step_counter_increments() {
        let mut ps = vec![scalar_param(0.0, 1.0)];
        for k in 1..=5 {
            Adam::default().step(&mut ps, 1e-3).unwrap();
            assert_eq!(ps[0].step, k);
        }
    }
}
