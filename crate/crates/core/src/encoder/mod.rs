//! Directed message passing encoder producing per-node embeddings.

mod batch;

pub use batch::GraphBatch;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::{NodeId, ParamId, ParamStore};
use crate::{Real, Tape, Tensor, MAIN_GROUP};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub node_width: usize,
    pub edge_width: usize,
    pub hidden: usize,
    /// Message passing steps `T`.
    pub steps: usize,
    pub dropout: Real,
}

/// Parameters `W_i`, `W_m`, `W_o`, stored `out × in` and registered in the main group.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub w_i: ParamId,
    pub w_m: ParamId,
    pub w_o: ParamId,
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as Real).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore<Real>, config: EncoderConfig, rng: &mut R) -> Result<Encoder> {
        if config.hidden == 0 || config.steps == 0 || config.node_width == 0 {
            return Err(Error::Config(format!(
                "encoder needs hidden, steps and node width ≥ 1, got {config:?}"
            )));
        }
        let h = config.hidden;
        let w_i = glorot(h, config.node_width + config.edge_width, rng);
        let w_m = glorot(h, h, rng);
        let w_o = glorot(h, config.node_width + h, rng);
        Ok(Encoder {
            config,
            w_i: store.register("encoder.W_i", MAIN_GROUP, w_i),
            w_m: store.register("encoder.W_m", MAIN_GROUP, w_m),
            w_o: store.register("encoder.W_o", MAIN_GROUP, w_o),
        })
    }

    /// Binds to parameters already present in `store` (e.g. from a checkpoint).
    pub fn attach(store: &ParamStore<Real>, config: EncoderConfig) -> Result<Encoder> {
        let h = config.hidden;
        Ok(Encoder {
            config,
            w_i: store.expect("encoder.W_i", h, config.node_width + config.edge_width)?,
            w_m: store.expect("encoder.W_m", h, h)?,
            w_o: store.expect("encoder.W_o", h, config.node_width + h)?,
        })
    }

    /// Node embeddings `H` for the whole batch (one row per node).
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore<Real>,
        batch: &GraphBatch,
        train: bool,
        rng: &mut R,
    ) -> Result<NodeId> {
        let w_i = tape.param(self.w_i, store.get(self.w_i).clone());
        let w_m = tape.param(self.w_m, store.get(self.w_m).clone());
        let w_o = tape.param(self.w_o, store.get(self.w_o).clone());

        let x_edge = tape.constant(batch.edge_inputs.clone());
        let pre = tape.matmul_t(x_edge, w_i)?;
        let h0 = tape.relu(pre);
        let mut h = h0;
        for _ in 0..self.config.steps {
            let m = tape.gather_sum(h, batch.messages.clone())?;
            let mw = tape.matmul_t(m, w_m)?;
            let sum = tape.add(h0, mw)?;
            let next = tape.relu(sum);
            h = tape.dropout(next, self.config.dropout, train, rng)?;
        }

        let m_v = tape.gather_sum(h, batch.outgoing.clone())?;
        let x_node = tape.constant(batch.node_inputs.clone());
        let cat = tape.concat(&[x_node, m_v])?;
        let out = tape.matmul_t(cat, w_o)?;
        Ok(tape.relu(out))
    }
}

/// Per-graph sums of node embeddings, one row per graph.
pub fn aggregate(tape: &mut Tape, nodes: NodeId, batch: &GraphBatch) -> Result<NodeId> {
    tape.gather_sum(nodes, batch.members.clone())
}
