use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::glorot;
use crate::error::{Error, Result};
use crate::gradcore::{NodeId, ParamId, ParamStore};
use crate::{Real, Tape, Tensor, MAIN_GROUP};

/// Fixed per-feature standardization `(x − shift) · scale` in front of the
/// first layer. It is not trained; an affine map followed by a linear layer
/// spans the same functions, only the optimizer's step geometry changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub shift: Vec<Real>,
    pub scale: Vec<Real>,
}

impl InputNorm {
    /// Column means and inverse population standard deviations of `rows`;
    /// near-constant columns keep scale 1.
    pub fn fit(rows: &[Vec<Real>]) -> Result<InputNorm> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Config("input normalization needs equal-width nonempty rows".into()));
        }
        let n = rows.len() as Real;
        let mut shift = vec![0.0; width];
        for r in rows {
            shift.iter_mut().zip(r).for_each(|(s, x)| *s += x / n);
        }
        let mut var = vec![0.0; width];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&shift) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let scale = var
            .iter()
            .zip(&shift)
            .map(|(v, m)| {
                let sd = v.sqrt();
                if sd > 1e-8 * (1.0 + m.abs()) {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        if shift.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("input normalization saw non-finite features".into()));
        }
        Ok(InputNorm { shift, scale })
    }

    pub fn width(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let (rows, cols) = tape.value(x).shape();
        if cols != self.width() || self.scale.len() != self.width() {
            return Err(Error::dims(
                "input norm",
                format!("{rows}x{cols}"),
                format!("width {}", self.width()),
            ));
        }
        let shift = tape.constant(Tensor::from_fn(rows, cols, |_, j| self.shift[j]));
        let scale = tape.constant(Tensor::from_fn(rows, cols, |_, j| self.scale[j]));
        let centered = tape.sub(x, shift)?;
        tape.mul(centered, scale)
    }
}

/// One hidden layer with ReLU and dropout, scalar output.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub dropout: Real,
    pub norm: Option<InputNorm>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore<Real>,
        input: usize,
        hidden: usize,
        dropout: Real,
        rng: &mut R,
    ) -> Mlp {
        Mlp {
            w1: store.register("mlp.W1", MAIN_GROUP, glorot(hidden, input, rng)),
            b1: store.register("mlp.b1", MAIN_GROUP, Tensor::zeros(1, hidden)),
            w2: store.register("mlp.W2", MAIN_GROUP, glorot(1, hidden, rng)),
            b2: store.register("mlp.b2", MAIN_GROUP, Tensor::zeros(1, 1)),
            dropout,
            norm: None,
        }
    }

    pub fn attach(store: &ParamStore<Real>, input: usize, hidden: usize, dropout: Real) -> Result<Mlp> {
        Ok(Mlp {
            w1: store.expect("mlp.W1", hidden, input)?,
            b1: store.expect("mlp.b1", 1, hidden)?,
            w2: store.expect("mlp.W2", 1, hidden)?,
            b2: store.expect("mlp.b2", 1, 1)?,
            dropout,
            norm: None,
        })
    }

    /// `B × input` in, `B × 1` out.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore<Real>,
        x: NodeId,
        train: bool,
        rng: &mut R,
    ) -> Result<NodeId> {
        let rows = tape.value(x).rows();
        let ones = tape.constant(Tensor::filled(rows, 1, 1.0));
        let [w1, b1, w2, b2] = [self.w1, self.b1, self.w2, self.b2].map(|p| tape.param(p, store.get(p).clone()));
        let x = match &self.norm {
            Some(norm) => norm.apply(tape, x)?,
            None => x,
        };

        let z = tape.matmul_t(x, w1)?;
        let bias = tape.matmul(ones, b1)?;
        let z = tape.add(z, bias)?;
        let a = tape.relu(z);
        let a = tape.dropout(a, self.dropout, train, rng)?;
        let out = tape.matmul_t(a, w2)?;
        let bias = tape.matmul(ones, b2)?;
        tape.add(out, bias)
    }
}
