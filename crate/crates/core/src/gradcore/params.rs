use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Optimizer group a parameter belongs to; each group has its own learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroupId(pub usize);

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub group: GroupId,
    pub value: Tensor<T>,
}

/// Named trainable tensors in registration order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, group: GroupId, value: Tensor<T>) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            group,
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    /// Looks up `name` and checks its shape.
    pub fn expect(&self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        let id = self
            .find(name)
            .ok_or_else(|| Error::Schema(format!("missing parameter {name}")))?;
        let (r, c) = self.get(id).shape();
        if (r, c) != (rows, cols) {
            return Err(Error::Schema(format!(
                "parameter {name} has shape {r}x{c}, expected {rows}x{cols}"
            )));
        }
        Ok(id)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Zero tensors shaped like every parameter, for gradient accumulation.
    pub fn zeros_like(&self) -> Vec<Tensor<T>> {
        self.params
            .iter()
            .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
            .collect()
    }

    pub fn total_size(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}
