use std::fmt;

const PERIODIC_TABLE: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Chemical element as seen by the featurizer.
///
/// Elements outside the organic set keep their atomic number so that
/// bracket atoms round-trip, but they share one feature slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
    /// Any other element by atomic number; 0 is the `*` wildcard.
    Other(u8),
}

impl Element {
    pub const FEATURE_SLOTS: usize = 11;

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        let e = match symbol {
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "P" => Element::P,
            "S" => Element::S,
            "F" => Element::F,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            "*" => Element::Other(0),
            _ => {
                let z = PERIODIC_TABLE.iter().position(|s| *s == symbol)?;
                Element::Other(z as u8 + 1)
            }
        };
        Some(e)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::Other(0) => "*",
            Element::Other(z) => PERIODIC_TABLE[z as usize - 1],
        }
    }

    /// Index into the one-hot element block.
    pub fn slot(self) -> usize {
        match self {
            Element::B => 0,
            Element::C => 1,
            Element::N => 2,
            Element::O => 3,
            Element::P => 4,
            Element::S => 5,
            Element::F => 6,
            Element::Cl => 7,
            Element::Br => 8,
            Element::I => 9,
            Element::Other(_) => 10,
        }
    }

    /// Default valence used to derive implicit hydrogens; `None` for other elements.
    pub fn default_valence(self) -> Option<u32> {
        match self {
            Element::B | Element::N | Element::P => Some(3),
            Element::C => Some(4),
            Element::O | Element::S => Some(2),
            Element::F | Element::Cl | Element::Br | Element::I => Some(1),
            Element::Other(_) => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
