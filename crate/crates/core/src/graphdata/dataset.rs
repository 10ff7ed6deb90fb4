use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, MolecularGraph, Task};
use crate::error::{Error, Result};
use crate::{Real, Tensor};

/// Graphs sharing one task kind and one feature layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<MolecularGraph>,
    pub task: Task,
}

/// One line of the JSONL format.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    nodes: Vec<Vec<Real>>,
    edges: Vec<(usize, usize, Vec<Real>)>,
    label: Option<Real>,
    task: Task,
}

impl Record {
    fn from_graph(g: &MolecularGraph, task: Task) -> Record {
        Record {
            id: g.id.clone(),
            nodes: (0..g.node_count()).map(|i| g.nodes.row(i).to_vec()).collect(),
            edges: g
                .edges
                .iter()
                .map(|e| (e.src, e.dst, e.features.clone()))
                .collect(),
            label: g.label,
            task,
        }
    }

    fn into_graph(self) -> Result<MolecularGraph> {
        let nodes = Tensor::from_rows(&self.nodes)
            .map_err(|_| Error::Schema(format!("graph '{}' has ragged node feature rows", self.id)))?;
        let graph = MolecularGraph {
            id: self.id,
            nodes,
            edges: self
                .edges
                .into_iter()
                .map(|(src, dst, features)| Edge { src, dst, features })
                .collect(),
            label: self.label,
        };
        graph.validate()?;
        Ok(graph)
    }
}

impl Dataset {
    pub fn new(graphs: Vec<MolecularGraph>, task: Task) -> Result<Dataset> {
        let ds = Dataset { graphs, task };
        ds.validate()?;
        Ok(ds)
    }

    pub fn empty(task: Task) -> Dataset {
        Dataset {
            graphs: Vec::new(),
            task,
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn node_width(&self) -> Option<usize> {
        self.graphs.first().map(|g| g.node_width())
    }

    pub fn edge_width(&self) -> Option<usize> {
        self.graphs.iter().find_map(|g| g.edge_width())
    }

    pub fn labels(&self) -> Vec<Option<Real>> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    /// Copies the graphs at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            task: self.task,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let node_width = self.node_width();
        let edge_width = self.edge_width();
        for g in &self.graphs {
            g.validate()?;
            check_layout(g, node_width, edge_width)?;
            check_label(g, self.task)?;
        }
        Ok(())
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Dataset> {
        let mut graphs = Vec::new();
        let mut task = None;
        let mut widths: (Option<usize>, Option<usize>) = (None, None);
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Record {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line).map_err(|e| Error::Record {
                line: line_no,
                message: e.to_string(),
            })?;
            let record_task = record.task;
            let at_line = |e: Error| match e {
                Error::Schema(m) => Error::Schema(format!("line {line_no}: {m}")),
                other => other,
            };
            let graph = record.into_graph().map_err(at_line)?;
            match task {
                None => task = Some(record_task),
                Some(t) if t != record_task => {
                    return Err(Error::Schema(format!(
                        "line {line_no}: task '{record_task}' differs from '{t}'"
                    )))
                }
                Some(_) => {}
            }
            widths.0 = widths.0.or(Some(graph.node_width()));
            widths.1 = widths.1.or(graph.edge_width());
            check_layout(&graph, widths.0, widths.1).map_err(at_line)?;
            check_label(&graph, record_task).map_err(at_line)?;
            graphs.push(graph);
        }
        Ok(Dataset {
            graphs,
            task: task.unwrap_or(Task::Regression),
        })
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<()> {
        for g in &self.graphs {
            serde_json::to_writer(&mut writer, &Record::from_graph(g, self.task))?;
            writer
                .write_all(b"\n")
                .map_err(|e| Error::Internal(format!("write failed: {e}")))?;
        }
        Ok(())
    }

    /// Loads a JSONL file. An empty file gives an empty regression dataset.
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_jsonl(BufReader::new(file))
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.write_jsonl(&mut writer)?;
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_layout(g: &MolecularGraph, node_width: Option<usize>, edge_width: Option<usize>) -> Result<()> {
    if let Some(w) = node_width {
        if g.node_width() != w {
            return Err(Error::Schema(format!(
                "graph '{}' has node width {}, expected {w}",
                g.id,
                g.node_width()
            )));
        }
    }
    if let (Some(w), Some(have)) = (edge_width, g.edge_width()) {
        if have != w {
            return Err(Error::Schema(format!(
                "graph '{}' has edge width {have}, expected {w}",
                g.id
            )));
        }
    }
    Ok(())
}

fn check_label(g: &MolecularGraph, task: Task) -> Result<()> {
    if let (Task::Classification, Some(y)) = (task, g.label) {
        if y != 0.0 && y != 1.0 {
            return Err(Error::Schema(format!(
                "graph '{}' has classification label {y}, expected 0 or 1",
                g.id
            )));
        }
    }
    Ok(())
}
