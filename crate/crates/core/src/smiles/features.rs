use super::{BondOrder, Element, Molecule};
use crate::graphdata::{Edge, MolecularGraph};
use crate::{Real, Tensor};

const DEGREE_SLOTS: usize = 6;
const CHARGE_SLOTS: usize = 5;
const HYDROGEN_SLOTS: usize = 5;

/// Node feature width: element ⊕ degree ⊕ charge ⊕ aromatic ⊕ hydrogens.
pub const NODE_FEATURES: usize =
    Element::FEATURE_SLOTS + DEGREE_SLOTS + CHARGE_SLOTS + 1 + HYDROGEN_SLOTS;
/// Edge feature width: bond order ⊕ in-ring.
pub const EDGE_FEATURES: usize = BondOrder::FEATURE_SLOTS + 1;

pub fn node_features(mol: &Molecule) -> Tensor {
    let mut x = Tensor::zeros(mol.atom_count(), NODE_FEATURES);
    for (i, atom) in mol.atoms.iter().enumerate() {
        let row = x.row_mut(i);
        let mut base = 0;
        row[base + atom.element.slot()] = 1.0;
        base += Element::FEATURE_SLOTS;
        row[base + atom.degree.min(DEGREE_SLOTS - 1)] = 1.0;
        base += DEGREE_SLOTS;
        row[base + (atom.charge.clamp(-2, 2) + 2) as usize] = 1.0;
        base += CHARGE_SLOTS;
        row[base] = if atom.aromatic { 1.0 } else { 0.0 };
        base += 1;
        row[base + (mol.hydrogen_count(i) as usize).min(HYDROGEN_SLOTS - 1)] = 1.0;
    }
    x
}

pub fn edge_features(mol: &Molecule) -> Vec<Vec<Real>> {
    let ring = mol.ring_bonds();
    mol.bonds
        .iter()
        .zip(ring)
        .map(|(bond, in_ring)| {
            let mut f = vec![0.0; EDGE_FEATURES];
            f[bond.order.slot()] = 1.0;
            f[BondOrder::FEATURE_SLOTS] = if in_ring { 1.0 } else { 0.0 };
            f
        })
        .collect()
}

/// Builds the featurized graph; bonds become undirected edges in input order.
pub fn featurize(mol: &Molecule, id: impl Into<String>, label: Option<Real>) -> MolecularGraph {
    let edges = mol
        .bonds
        .iter()
        .zip(edge_features(mol))
        .map(|(b, features)| Edge {
            src: b.a,
            dst: b.b,
            features,
        })
        .collect();
    MolecularGraph {
        id: id.into(),
        nodes: node_features(mol),
        edges,
        label,
    }
}
