//! Readout heads: Wasserstein distances to learned prototype point clouds,
//! the Euclidean special case, the plain sum baseline, and the final MLP.

mod mlp;

pub use mlp::{InputNorm, Mlp};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{aggregate, glorot, GraphBatch};
use crate::error::{Error, Result};
use crate::gradcore::{NodeId, ParamId, ParamStore};
use crate::otcore::{cost_matrix_raw, emd_exact, CostKind};
use crate::{Real, Tape, Tensor, TransportPlan, MAIN_GROUP, PROTOTYPE_GROUP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    #[serde(rename = "ProtoW-L2")]
    ProtoWL2,
    #[serde(rename = "ProtoW-Dot")]
    ProtoWDot,
    #[serde(rename = "ProtoS-L2")]
    ProtoSL2,
    #[serde(rename = "BaselineSum")]
    BaselineSum,
}

impl HeadKind {
    pub const ALL: [HeadKind; 4] = [
        HeadKind::ProtoWL2,
        HeadKind::ProtoWDot,
        HeadKind::ProtoSL2,
        HeadKind::BaselineSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::ProtoWL2 => "ProtoW-L2",
            HeadKind::ProtoWDot => "ProtoW-Dot",
            HeadKind::ProtoSL2 => "ProtoS-L2",
            HeadKind::BaselineSum => "BaselineSum",
        }
    }

    /// Ground cost implied by the head, `None` for the baseline.
    pub fn cost(self) -> Option<CostKind> {
        match self {
            HeadKind::ProtoWL2 | HeadKind::ProtoSL2 => Some(CostKind::SquaredL2),
            HeadKind::ProtoWDot => Some(CostKind::NegativeDot),
            HeadKind::BaselineSum => None,
        }
    }

    /// Whether the head solves transport problems against prototype clouds.
    pub fn uses_transport(self) -> bool {
        matches!(self, HeadKind::ProtoWL2 | HeadKind::ProtoWDot)
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<HeadKind> {
        HeadKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown head '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub kind: HeadKind,
    /// Encoder output width.
    pub input: usize,
    /// Number of prototypes `M`.
    pub n_pc: usize,
    /// Points per prototype `N`; ignored (forced to 1) for ProtoS-L2.
    pub pc_size: usize,
    /// Prototype space dimension `d`.
    pub pc_hidden: usize,
    pub ffn_hidden: usize,
    pub dropout: Real,
}

impl HeadConfig {
    pub fn points_per_prototype(&self) -> usize {
        match self.kind {
            HeadKind::ProtoSL2 => 1,
            _ => self.pc_size,
        }
    }

    /// Width of the representation fed to the MLP.
    pub fn representation_width(&self) -> usize {
        match self.kind {
            HeadKind::BaselineSum => self.input,
            _ => self.n_pc,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut bad = vec![];
        for (name, v) in [("input", self.input), ("ffn_hidden", self.ffn_hidden)] {
            if v == 0 {
                bad.push(name);
            }
        }
        if self.kind != HeadKind::BaselineSum {
            for (name, v) in [("n_pc", self.n_pc), ("pc_size", self.pc_size), ("pc_hidden", self.pc_hidden)] {
                if v == 0 {
                    bad.push(name);
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("head sizes must be ≥ 1: {}", bad.join(", "))))
        }
    }
}

/// Head parameters. Prototypes live in the prototype group, everything else
/// in the main group.
#[derive(Clone, Debug)]
pub struct Head {
    pub config: HeadConfig,
    /// `d × input` map into prototype space.
    pub projection: Option<ParamId>,
    pub prototypes: Vec<ParamId>,
    pub mlp: Mlp,
}

/// Values recorded by one head pass over a batch.
pub struct HeadOutput {
    /// One row per graph: scaled distances, or the summed embedding for the baseline.
    pub representation: NodeId,
    /// `B × 1` raw scores.
    pub prediction: NodeId,
    /// Projected node cloud of each graph; empty for the baseline.
    pub clouds: Vec<NodeId>,
    /// Prototype leaves on the tape.
    pub prototypes: Vec<NodeId>,
    /// Optimal plan per graph and prototype (ProtoW heads only).
    pub plans: Vec<Vec<TransportPlan>>,
}

fn prototype_name(i: usize) -> String {
    format!("prototype.{i}")
}

impl Head {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore<Real>, config: HeadConfig, rng: &mut R) -> Result<Head> {
        config.validate()?;
        let mut projection = None;
        let mut prototypes = Vec::new();
        if config.kind != HeadKind::BaselineSum {
            let p = glorot(config.pc_hidden, config.input, rng);
            projection = Some(store.register("projection.P", MAIN_GROUP, p));
            let n = config.points_per_prototype();
            for i in 0..config.n_pc {
                let q = Tensor::from_fn(n, config.pc_hidden, |_, _| rng.gen_range(-1.0..=1.0));
                prototypes.push(store.register(prototype_name(i), PROTOTYPE_GROUP, q));
            }
        }
        let mlp = Mlp::new(store, config.representation_width(), config.ffn_hidden, config.dropout, rng);
        Ok(Head {
            config,
            projection,
            prototypes,
            mlp,
        })
    }

    pub fn attach(store: &ParamStore<Real>, config: HeadConfig) -> Result<Head> {
        config.validate()?;
        let mut projection = None;
        let mut prototypes = Vec::new();
        if config.kind != HeadKind::BaselineSum {
            projection = Some(store.expect("projection.P", config.pc_hidden, config.input)?);
            let n = config.points_per_prototype();
            for i in 0..config.n_pc {
                prototypes.push(store.expect(&prototype_name(i), n, config.pc_hidden)?);
            }
        }
        let mlp = Mlp::attach(store, config.representation_width(), config.ffn_hidden, config.dropout)?;
        Ok(Head {
            config,
            projection,
            prototypes,
            mlp,
        })
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore<Real>,
        nodes: NodeId,
        batch: &GraphBatch,
        train: bool,
        rng: &mut R,
    ) -> Result<HeadOutput> {
        let mut clouds = Vec::new();
        let mut plans = Vec::new();
        let protos: Vec<NodeId> = self
            .prototypes
            .iter()
            .map(|&p| tape.param(p, store.get(p).clone()))
            .collect();

        let representation = match (self.config.kind, self.projection) {
            (HeadKind::BaselineSum, _) => aggregate(tape, nodes, batch)?,
            (kind, Some(p)) => {
                let pn = tape.param(p, store.get(p).clone());
                let projected = project_nodes(tape, nodes, pn)?;
                let mut rows = Vec::with_capacity(batch.graph_count());
                if kind == HeadKind::ProtoSL2 {
                    let sums = aggregate(tape, projected, batch)?;
                    let stacked = tape.concat_rows(&protos)?;
                    for (b, &(start, n)) in batch.spans.iter().enumerate() {
                        clouds.push(tape.slice_rows(projected, start, n)?);
                        let s = tape.slice_rows(sums, b, 1)?;
                        rows.push(euclidean_readout(tape, s, stacked)?);
                    }
                } else {
                    let cost = kind.cost().expect("transport head has a cost");
                    for &(start, n) in &batch.spans {
                        let cloud = tape.slice_rows(projected, start, n)?;
                        let (row, graph_plans) = wasserstein_readout(tape, cloud, &protos, cost, true)?;
                        clouds.push(cloud);
                        rows.push(row);
                        plans.push(graph_plans);
                    }
                }
                tape.concat_rows(&rows)?
            }
            (_, None) => return Err(Error::Internal("prototype head without projection".into())),
        };

        let prediction = self.mlp.forward(tape, store, representation, train, rng)?;
        Ok(HeadOutput {
            representation,
            prediction,
            clouds,
            prototypes: protos,
            plans,
        })
    }
}

/// Maps node embeddings (`V × input`) into prototype space with `P` (`d × input`).
pub fn project_nodes(tape: &mut Tape, nodes: NodeId, projection: NodeId) -> Result<NodeId> {
    tape.matmul_t(nodes, projection)
}

/// Wasserstein distances from `cloud` (`n × d`) to each prototype (`N × d`) as a
/// `1 × M` row. Plans come from the exact solver and are held fixed for
/// gradients. With `scaled`, each entry is multiplied by `n·N`.
pub fn wasserstein_readout(
    tape: &mut Tape,
    cloud: NodeId,
    prototypes: &[NodeId],
    cost: CostKind,
    scaled: bool,
) -> Result<(NodeId, Vec<TransportPlan>)> {
    let n = tape.value(cloud).rows();
    if n == 0 || prototypes.is_empty() {
        return Err(Error::Usage("readout needs a nonempty cloud and at least one prototype".into()));
    }
    let size = tape.value(prototypes[0]).rows();
    if prototypes.iter().any(|&q| tape.value(q).rows() != size) {
        return Err(Error::Config("prototypes must share one point count".into()));
    }
    let m = prototypes.len();

    let mut plans = Vec::with_capacity(m);
    let mut padded = Vec::with_capacity(m);
    for (i, &q) in prototypes.iter().enumerate() {
        let c = cost_matrix_raw(tape.value(cloud), tape.value(q), cost)?;
        let plan = emd_exact(&c)?;
        let mut wide = Tensor::zeros(n, m * size);
        for r in 0..n {
            wide.row_mut(r)[i * size..(i + 1) * size].copy_from_slice(plan.matrix().row(r));
        }
        padded.push(wide);
        plans.push(plan);
    }
    let stacked = tape.concat_rows(prototypes)?;
    let row = tape.transport_cost(cloud, stacked, padded, cost)?;
    let row = if scaled {
        tape.scale(row, (n * size) as Real)
    } else {
        row
    };
    Ok((row, plans))
}

/// Squared Euclidean distances from a `1 × d` point to each row of `stacked`.
pub fn euclidean_readout(tape: &mut Tape, point: NodeId, stacked: NodeId) -> Result<NodeId> {
    let m = tape.value(stacked).rows();
    let plans = (0..m)
        .map(|i| Tensor::from_fn(1, m, |_, j| if i == j { 1.0 } else { 0.0 }))
        .collect();
    tape.transport_cost(point, stacked, plans, CostKind::SquaredL2)
}
