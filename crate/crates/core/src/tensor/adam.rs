//! Adam optimizer with bias correction.

use super::Tensor;
use crate::error::TensorError;
use crate::scalar::Scalar;

/// First/second moment estimates for one parameter tensor.
struct Slot<T> {
    m: Tensor<T>,
    v: Tensor<T>,
}

/// Adam state across all parameters of a model, in a fixed enumeration
/// order. Moment shapes are locked in on the first step; later steps must
/// present the same parameter count and shapes.
pub struct Adam<T> {
    beta1: T,
    beta2: T,
    eps: T,
    t: u32,
    slots: Vec<Slot<T>>,
}

impl<T: Scalar> Default for Adam<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Adam<T> {
    pub fn new() -> Self {
        Adam {
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            t: 0,
            slots: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    /// Applies one update: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    /// `params` and `grads` must be aligned index-for-index.
    pub fn step(
        &mut self,
        lr: T,
        params: &mut [&mut Tensor<T>],
        grads: &[Tensor<T>],
    ) -> Result<(), TensorError> {
        if params.len() != grads.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                detail: format!("{} parameters vs {} gradients", params.len(), grads.len()),
            });
        }
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| Slot {
                    m: Tensor::zeros(p.shape()),
                    v: Tensor::zeros(p.shape()),
                })
                .collect();
        }
        if self.slots.len() != params.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                detail: format!(
                    "optimizer tracks {} parameters, step presented {}",
                    self.slots.len(),
                    params.len()
                ),
            });
        }
        self.t += 1;
        let one = T::one();
        let bias1 = one - self.beta1.powi(self.t as i32);
        let bias2 = one - self.beta2.powi(self.t as i32);
        for ((param, grad), slot) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.slots.iter_mut())
        {
            if param.shape() != grad.shape() || param.shape() != slot.m.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    detail: format!(
                        "parameter {:?}, gradient {:?}, moments {:?}",
                        param.shape(),
                        grad.shape(),
                        slot.m.shape()
                    ),
                });
            }
            let pd = param.data_mut();
            let gd = grad.data();
            let md = slot.m.data_mut();
            let vd = slot.v.data_mut();
            for i in 0..pd.len() {
                md[i] = self.beta1 * md[i] + (one - self.beta1) * gd[i];
                vd[i] = self.beta2 * vd[i] + (one - self.beta2) * gd[i] * gd[i];
                let m_hat = md[i] / bias1;
                let v_hat = vd[i] / bias2;
                pd[i] = pd[i] - lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
