use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graphdata::MolecularGraph;
use crate::Tensor;

/// Disjoint union of several graphs, laid out for one encoder pass.
///
/// Directed edges and nodes are numbered graph by graph; the index lists
/// drive the message and readout sums.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    /// `cat(x_v, e_vw)` for every directed edge `v → w`.
    pub edge_inputs: Tensor,
    pub node_inputs: Tensor,
    /// For directed edge `v → w`: the edges `k → v` with `k ≠ w`, sorted by `k`.
    pub messages: Arc<[Vec<usize>]>,
    /// For node `v`: the outgoing edges `v → w`, sorted by `w`.
    pub outgoing: Arc<[Vec<usize>]>,
    /// For each graph: its node rows.
    pub members: Arc<[Vec<usize>]>,
    /// `(first node row, node count)` per graph.
    pub spans: Vec<(usize, usize)>,
}

impl GraphBatch {
    pub fn new(graphs: &[&MolecularGraph], node_width: usize, edge_width: usize) -> Result<GraphBatch> {
        let total_nodes: usize = graphs.iter().map(|g| g.node_count()).sum();
        let total_edges: usize = graphs.iter().map(|g| g.directed_edge_count()).sum();
        let mut edge_inputs = Vec::with_capacity(total_edges * (node_width + edge_width));
        let mut node_inputs = Vec::with_capacity(total_nodes * node_width);
        let mut messages = Vec::with_capacity(total_edges);
        let mut outgoing = Vec::with_capacity(total_nodes);
        let mut members = Vec::with_capacity(graphs.len());
        let mut spans = Vec::with_capacity(graphs.len());
        let (mut node_base, mut edge_base) = (0, 0);

        for g in graphs {
            let n = g.node_count();
            if n == 0 {
                return Err(Error::Schema(format!("graph '{}' has no nodes", g.id)));
            }
            if g.node_width() != node_width {
                return Err(Error::dims("encoder node features", node_width, g.node_width()));
            }
            if let Some(w) = g.edge_width().filter(|w| *w != edge_width) {
                return Err(Error::dims("encoder edge features", edge_width, w));
            }
            node_inputs.extend_from_slice(g.nodes.data());

            // incoming[v] and out[v] hold (neighbor, directed edge) pairs
            let mut incoming: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
            let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
            for k in 0..g.directed_edge_count() {
                let (v, w) = g.directed(k);
                incoming[w].push((v, k));
                out[v].push((w, k));
                edge_inputs.extend_from_slice(g.nodes.row(v));
                edge_inputs.extend_from_slice(g.edge_features(k));
            }
            for list in incoming.iter_mut().chain(out.iter_mut()) {
                list.sort_unstable();
            }
            for k in 0..g.directed_edge_count() {
                let (v, _) = g.directed(k);
                let reverse = k ^ 1;
                messages.push(
                    incoming[v]
                        .iter()
                        .filter(|&&(_, e)| e != reverse)
                        .map(|&(_, e)| edge_base + e)
                        .collect(),
                );
            }
            for list in &out {
                outgoing.push(list.iter().map(|&(_, e)| edge_base + e).collect());
            }
            members.push((node_base..node_base + n).collect());
            spans.push((node_base, n));
            node_base += n;
            edge_base += g.directed_edge_count();
        }

        Ok(GraphBatch {
            edge_inputs: Tensor::from_vec(total_edges, node_width + edge_width, edge_inputs)?,
            node_inputs: Tensor::from_vec(total_nodes, node_width, node_inputs)?,
            messages: messages.into(),
            outgoing: outgoing.into(),
            members: members.into(),
            spans,
        })
    }

    pub fn graph_count(&self) -> usize {
        self.spans.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_inputs.rows()
    }

    pub fn directed_edge_count(&self) -> usize {
        self.edge_inputs.rows()
    }
}
