use super::Element;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const FEATURE_SLOTS: usize = 4;

    pub fn slot(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }

    /// Contribution to the valence sum, in half-bond units.
    pub(crate) fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Hydrogen count written inside brackets; `None` for organic-subset atoms.
    pub explicit_h: Option<u8>,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

/// Parsed molecular connectivity with atoms in input order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl Molecule {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn has_bond(&self, a: usize, b: usize) -> bool {
        self.bonds
            .iter()
            .any(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    /// Hydrogens attached to atom `i`: the bracket count if written, otherwise
    /// derived from the default valence.
    pub fn hydrogen_count(&self, i: usize) -> u32 {
        let atom = &self.atoms[i];
        if let Some(h) = atom.explicit_h {
            return h as u32;
        }
        let Some(valence) = atom.element.default_valence() else {
            return 0;
        };
        let half: u32 = self
            .bonds
            .iter()
            .filter(|e| e.a == i || e.b == i)
            .map(|e| e.order.half_units())
            .sum();
        valence.saturating_sub(half / 2 + atom.charge.unsigned_abs() as u32)
    }

    /// Flags bonds that lie on a cycle, i.e. bonds that are not bridges.
    pub fn ring_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, e) in self.bonds.iter().enumerate() {
            adj[e.a].push((e.b, k));
            adj[e.b].push((e.a, k));
        }
        let mut in_ring = vec![true; self.bonds.len()];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut time = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // frames: (vertex, bond used to enter, next adjacency index)
            let mut stack = vec![(root, usize::MAX, 0usize)];
            disc[root] = time;
            low[root] = time;
            time += 1;
            while let Some(&mut (v, parent_bond, ref mut next)) = stack.last_mut() {
                if let Some(&(w, k)) = adj[v].get(*next) {
                    *next += 1;
                    if k == parent_bond {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = time;
                        low[w] = time;
                        time += 1;
                        stack.push((w, k, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(u, _, _)) = stack.last() {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            in_ring[parent_bond] = false;
                        }
                    }
                }
            }
        }
        in_ring
    }
}
