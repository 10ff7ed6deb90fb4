//! Graph datasets: JSONL storage, CSV conversion, splits and batching.

mod convert;
mod dataset;
mod graph;
mod split;

pub use convert::{convert_csv, ConvertFailure};
pub use dataset::Dataset;
pub use graph::{Edge, MolecularGraph, Task};
pub use split::{batches, split, standardize_labels, LabelStats, SplitSpec};
