//! SMILES line notation to molecular graphs.

mod element;
mod features;
mod molecule;
mod parser;

pub use element::Element;
pub use features::{edge_features, featurize, node_features, EDGE_FEATURES, NODE_FEATURES};
pub use molecule::{Atom, Bond, BondOrder, Molecule};
pub use parser::parse_smiles;
