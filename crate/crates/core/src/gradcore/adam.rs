use super::params::{GroupId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam with bias correction and a learning rate per parameter group.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    group_lr: Vec<T>,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    /// `group_lr[g]` is the learning rate of [`GroupId`]`(g)`.
    pub fn new(store: &ParamStore<T>, group_lr: Vec<T>) -> Self {
        Adam {
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            group_lr,
            first: store.zeros_like(),
            second: store.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self, group: GroupId) -> T {
        self.group_lr[group.0]
    }

    /// Applies one update with `grads[i]` the gradient of parameter `i`.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Tensor<T>]) -> Result<()> {
        if grads.len() != store.len() || self.first.len() != store.len() {
            return Err(Error::dims(
                "adam_step",
                format!("{} parameters", store.len()),
                format!("{} gradients", grads.len()),
            ));
        }
        for (id, p) in store.iter() {
            let g = &grads[id.index()];
            if g.shape() != p.value.shape() {
                return Err(Error::dims(
                    "adam_step",
                    format!("{} {:?}", p.name, p.value.shape()),
                    format!("gradient {:?}", g.shape()),
                ));
            }
            if !g.all_finite() {
                return Err(Error::Training(format!(
                    "non-finite gradient for parameter {}",
                    p.name
                )));
            }
            if p.group.0 >= self.group_lr.len() {
                return Err(Error::Config(format!(
                    "parameter {} is in group {} but only {} learning rates are set",
                    p.name,
                    p.group.0,
                    self.group_lr.len()
                )));
            }
        }

        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let (b1, b2) = (self.beta1, self.beta2);
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        let ids: Vec<_> = store.iter().map(|(id, p)| (id, p.group)).collect();
        for (id, group) in ids {
            let lr = self.group_lr[group.0];
            let g = grads[id.index()].data();
            let m = self.first[id.index()].data_mut();
            let v = self.second[id.index()].data_mut();
            let w = store.get_mut(id).data_mut();
            for k in 0..w.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                if lr == T::zero() {
                    continue;
                }
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                w[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
