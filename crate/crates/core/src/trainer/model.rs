use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::encoder::{Encoder, EncoderConfig, GraphBatch};
use crate::error::{Error, Result};
use crate::gradcore::ParamStore;
use crate::graphdata::{Dataset, LabelStats, MolecularGraph, Task};
use crate::protohead::{Head, HeadConfig, HeadOutput, InputNorm};
use crate::{gradcore, rng, Real, Tape, Tensor, TransportPlan};

pub const CHECKPOINT_FORMAT: u32 = 1;
const INIT_TAG: u64 = 0x1417;
const EVAL_CHUNK: usize = 64;

/// Encoder plus readout head with their parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: TrainConfig,
    pub task: Task,
    pub label_stats: LabelStats,
    pub node_width: usize,
    pub edge_width: usize,
    pub store: ParamStore<Real>,
    pub encoder: Encoder,
    pub head: Head,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Real>,
}

/// On-disk form of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub task: Task,
    pub node_width: usize,
    pub edge_width: usize,
    pub label_stats: LabelStats,
    pub best_epoch: Option<usize>,
    pub input_norm: Option<InputNorm>,
    pub params: BTreeMap<String, StoredTensor>,
}

fn encoder_config(config: &TrainConfig, node_width: usize, edge_width: usize) -> EncoderConfig {
    EncoderConfig {
        node_width,
        edge_width,
        hidden: config.n_hidden,
        steps: config.n_layers,
        dropout: config.dropout_gnn,
    }
}

fn head_config(config: &TrainConfig) -> HeadConfig {
    HeadConfig {
        kind: config.head,
        input: config.n_hidden,
        n_pc: config.n_pc,
        pc_size: config.pc_size,
        pc_hidden: config.pc_hidden,
        ffn_hidden: config.n_ffn_hidden,
        dropout: config.dropout_fnn,
    }
}

impl Model {
    /// Fresh parameters drawn from the config seed.
    pub fn new(
        config: TrainConfig,
        task: Task,
        node_width: usize,
        edge_width: usize,
        label_stats: LabelStats,
    ) -> Result<Model> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, &[INIT_TAG]);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, encoder_config(&config, node_width, edge_width), &mut rng)?;
        let head = Head::new(&mut store, head_config(&config), &mut rng)?;
        Ok(Model {
            config,
            task,
            label_stats,
            node_width,
            edge_width,
            store,
            encoder,
            head,
        })
    }

    /// Records a forward pass over `graphs` on `tape`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        graphs: &[&MolecularGraph],
        train: bool,
        rng: &mut R,
    ) -> Result<HeadOutput> {
        let batch = GraphBatch::new(graphs, self.node_width, self.edge_width)?;
        let nodes = self.encoder.forward(tape, &self.store, &batch, train, rng)?;
        self.head.forward(tape, &self.store, nodes, &batch, train, rng)
    }

    fn eval_chunks<T>(
        &self,
        ds: &Dataset,
        mut visit: impl FnMut(&Tape, &HeadOutput) -> Result<T>,
    ) -> Result<Vec<T>> {
        let mut rng = rng::stream(self.config.seed, &[]);
        let refs: Vec<&MolecularGraph> = ds.graphs.iter().collect();
        let mut out = Vec::new();
        for chunk in refs.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let head = self.forward(&mut tape, chunk, false, &mut rng)?;
            out.push(visit(&tape, &head)?);
        }
        Ok(out)
    }

    /// Raw head outputs: standardized values for regression, logits for classification.
    pub fn logits(&self, ds: &Dataset) -> Result<Vec<Real>> {
        let raw = self.eval_chunks(ds, |tape, out| Ok(tape.value(out.prediction).data().to_vec()))?;
        Ok(raw.into_iter().flatten().collect())
    }

    /// Predictions on the original label scale: de-standardized values for
    /// regression, probabilities for classification.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<Real>> {
        Ok(self
            .logits(ds)?
            .into_iter()
            .map(|z| match self.task {
                Task::Regression => self.label_stats.destandardize(z),
                Task::Classification => gradcore::sigmoid(z),
            })
            .collect())
    }

    /// Input of the final MLP for each graph.
    pub fn represent(&self, ds: &Dataset) -> Result<Vec<Vec<Real>>> {
        let chunks = self.eval_chunks(ds, |tape, out| {
            let r = tape.value(out.representation);
            Ok((0..r.rows()).map(|i| r.row(i).to_vec()).collect::<Vec<_>>())
        })?;
        Ok(chunks.into_iter().flatten().collect())
    }

    /// Optimal plans per graph and prototype; empty lists for heads without transport.
    pub fn transport_plans(&self, ds: &Dataset) -> Result<Vec<Vec<TransportPlan>>> {
        if !self.config.head.uses_transport() {
            return Ok(vec![Vec::new(); ds.len()]);
        }
        let chunks = self.eval_chunks(ds, |_, out| Ok(out.plans.clone()))?;
        Ok(chunks.into_iter().flatten().collect())
    }

    /// Fits the fixed MLP input standardization on the representations of
    /// `ds` under the current parameters.
    pub fn fit_input_norm(&mut self, ds: &Dataset) -> Result<()> {
        self.head.mlp.norm = None;
        let norm = InputNorm::fit(&self.represent(ds)?)?;
        self.head.mlp.norm = Some(norm);
        Ok(())
    }

    /// Prototype point clouds in parameter order.
    pub fn prototypes(&self) -> Vec<&Tensor> {
        self.head.prototypes.iter().map(|&p| self.store.get(p)).collect()
    }

    pub fn to_checkpoint(&self, best_epoch: Option<usize>) -> Checkpoint {
        let params = self
            .store
            .iter()
            .map(|(_, p)| {
                (
                    p.name.clone(),
                    StoredTensor {
                        rows: p.value.rows(),
                        cols: p.value.cols(),
                        data: p.value.data().to_vec(),
                    },
                )
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT,
            config: self.config.clone(),
            task: self.task,
            node_width: self.node_width,
            edge_width: self.edge_width,
            label_stats: self.label_stats,
            best_epoch,
            input_norm: self.head.mlp.norm.clone(),
            params,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Model> {
        if ck.format_version != CHECKPOINT_FORMAT {
            return Err(Error::Schema(format!(
                "checkpoint format {} is not supported (expected {CHECKPOINT_FORMAT})",
                ck.format_version
            )));
        }
        // Rebuild the layout, then overwrite every tensor from the file.
        let mut model = Model::new(ck.config.clone(), ck.task, ck.node_width, ck.edge_width, ck.label_stats)?;
        let names: Vec<String> = model.store.iter().map(|(_, p)| p.name.clone()).collect();
        if names.len() != ck.params.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} parameters, model expects {}",
                ck.params.len(),
                names.len()
            )));
        }
        for name in names {
            let stored = ck
                .params
                .get(&name)
                .ok_or_else(|| Error::Schema(format!("checkpoint lacks parameter {name}")))?;
            let id = model.store.expect(&name, stored.rows, stored.cols)?;
            let value = Tensor::from_vec(stored.rows, stored.cols, stored.data.clone())
                .map_err(|_| Error::Schema(format!("parameter {name} has the wrong number of entries")))?;
            if !value.all_finite() {
                return Err(Error::Schema(format!("parameter {name} has non-finite entries")));
            }
            *model.store.get_mut(id) = value;
        }
        if let Some(norm) = &ck.input_norm {
            if norm.width() != model.head.config.representation_width() || norm.scale.len() != norm.width() {
                return Err(Error::Schema("input normalization width does not match the head".into()));
            }
        }
        model.head.mlp.norm = ck.input_norm.clone();
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>, best_epoch: Option<usize>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&self.to_checkpoint(best_epoch))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Model, Checkpoint)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Ok((Model::from_checkpoint(&ck)?, ck))
    }
}
