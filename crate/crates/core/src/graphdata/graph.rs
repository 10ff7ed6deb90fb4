use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::Usage(format!(
                "unknown task '{other}' (expected regression or classification)"
            ))),
        }
    }
}

/// Undirected edge as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub features: Vec<Real>,
}

/// Featurized graph. Undirected edge `k` yields directed edges `2k`
/// (src → dst) and `2k + 1` (dst → src).
#[derive(Clone, Debug, PartialEq)]
pub struct MolecularGraph {
    pub id: String,
    pub nodes: Tensor,
    pub edges: Vec<Edge>,
    pub label: Option<Real>,
}

impl MolecularGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.rows()
    }

    pub fn node_width(&self) -> usize {
        self.nodes.cols()
    }

    pub fn edge_width(&self) -> Option<usize> {
        self.edges.first().map(|e| e.features.len())
    }

    pub fn directed_edge_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// Endpoints `(from, to)` of directed edge `k`.
    pub fn directed(&self, k: usize) -> (usize, usize) {
        let e = &self.edges[k / 2];
        if k.is_multiple_of(2) {
            (e.src, e.dst)
        } else {
            (e.dst, e.src)
        }
    }

    pub fn edge_features(&self, k: usize) -> &[Real] {
        &self.edges[k / 2].features
    }

    /// Checks structural invariants: at least one node, edges in range,
    /// no self loops, one feature width per edge set, finite entries.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if n == 0 {
            return Err(Error::Schema(format!("graph '{}' has no nodes", self.id)));
        }
        if !self.nodes.all_finite() {
            return Err(Error::Schema(format!("graph '{}' has non-finite node features", self.id)));
        }
        let width = self.edge_width();
        for (k, e) in self.edges.iter().enumerate() {
            if e.src >= n || e.dst >= n || e.src == e.dst {
                return Err(Error::Schema(format!(
                    "graph '{}' edge {k} ({}, {}) invalid for {n} nodes",
                    self.id, e.src, e.dst
                )));
            }
            if Some(e.features.len()) != width {
                return Err(Error::Schema(format!(
                    "graph '{}' edge {k} has {} features, expected {}",
                    self.id,
                    e.features.len(),
                    width.unwrap_or(0)
                )));
            }
            if e.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("graph '{}' edge {k} has non-finite features", self.id)));
            }
        }
        if let Some(y) = self.label {
            if !y.is_finite() {
                return Err(Error::Schema(format!("graph '{}' label is not finite", self.id)));
            }
        }
        Ok(())
    }
}
