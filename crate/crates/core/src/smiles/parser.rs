use std::collections::BTreeMap;

use super::{Atom, Bond, BondOrder, Element, Molecule};
use crate::error::{Error, Result};

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

/// Explicit bond symbol with the offset where it was written.
#[derive(Clone, Copy)]
struct PendingBond {
    order: BondOrder,
    offset: usize,
}

struct OpenRing {
    atom: usize,
    bond: Option<PendingBond>,
    offset: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    mol: Molecule,
}

/// Parses a SMILES string into a molecule. Stereo markers are accepted and
/// dropped; isotopes and atom classes are parsed and discarded.
pub fn parse_smiles(s: &str) -> Result<Molecule> {
    if s.is_empty() {
        return Err(err(0, "empty string"));
    }
    Parser {
        src: s.as_bytes(),
        pos: 0,
        mol: Molecule::default(),
    }
    .run()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn run(mut self) -> Result<Molecule> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<PendingBond> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();
        // set right after '(' so that "()" is rejected
        let mut branch_empty = false;

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(err(start, "branch without a preceding atom"));
                    };
                    if pending.is_some() {
                        return Err(err(start, "bond symbol before branch"));
                    }
                    branches.push((p, start));
                    branch_empty = true;
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(err(start, "unbalanced ')'"));
                    };
                    if branch_empty {
                        return Err(err(start, "empty branch"));
                    }
                    if let Some(b) = pending {
                        return Err(err(b.offset, "bond to nonexistent atom"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'.' => {
                    if let Some(b) = pending {
                        return Err(err(b.offset, "bond to nonexistent atom"));
                    }
                    if prev.is_none() || branch_empty {
                        return Err(err(start, "empty component"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return Err(err(start, "consecutive bond symbols"));
                    }
                    if prev.is_none() {
                        return Err(err(start, "bond to nonexistent atom"));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    pending = Some(PendingBond { order, offset: start });
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return Err(err(start, "ring closure without a preceding atom"));
                    };
                    let label = self.ring_label()?;
                    match rings.remove(&label) {
                        None => {
                            rings.insert(
                                label,
                                OpenRing {
                                    atom: p,
                                    bond: pending.take(),
                                    offset: start,
                                },
                            );
                        }
                        Some(open) => {
                            if open.atom == p {
                                return Err(err(start, "ring closure onto the same atom"));
                            }
                            if self.mol.has_bond(open.atom, p) {
                                return Err(err(start, "duplicate bond"));
                            }
                            let order = match (open.bond, pending.take()) {
                                (Some(a), Some(b)) if a.order != b.order => {
                                    return Err(err(b.offset, "conflicting ring-closure bond"));
                                }
                                (Some(a), _) | (None, Some(a)) => a.order,
                                (None, None) => self.default_order(open.atom, p),
                            };
                            self.add_bond(open.atom, p, order);
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    let idx = self.mol.atoms.len();
                    self.mol.atoms.push(atom);
                    if let Some(p) = prev {
                        let order = match pending.take() {
                            Some(b) => b.order,
                            None => self.default_order(p, idx),
                        };
                        self.add_bond(p, idx, order);
                    }
                    prev = Some(idx);
                    branch_empty = false;
                }
            }
        }

        if let Some(b) = pending {
            return Err(err(b.offset, "bond to nonexistent atom"));
        }
        if !branches.is_empty() {
            return Err(err(self.src.len(), "unclosed branch"));
        }
        if let Some(open) = rings.values().min_by_key(|r| r.offset) {
            return Err(err(open.offset, "unmatched ring-closure index"));
        }
        if self.mol.atoms.is_empty() {
            return Err(err(0, "no atoms"));
        }
        Ok(self.mol)
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.mol.atoms[a].aromatic && self.mol.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) {
        self.mol.atoms[a].degree += 1;
        self.mol.atoms[b].degree += 1;
        self.mol.bonds.push(Bond { a, b, order });
    }

    fn ring_label(&mut self) -> Result<u32> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.src.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(err(start, "'%' must be followed by two digits")),
            }
        } else {
            self.pos += 1;
            Ok((self.src[start] - b'0') as u32)
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let start = self.pos;
        let c = self.src[start];
        if c == b'[' {
            return self.bracket_atom();
        }
        let two = self.src.get(start..start + 2);
        let (symbol, aromatic, len) = match (c, two) {
            (b'C', Some(b"Cl")) => ("Cl", false, 2),
            (b'B', Some(b"Br")) => ("Br", false, 2),
            (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I', _) => {
                (std::str::from_utf8(&self.src[start..start + 1]).unwrap(), false, 1)
            }
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            (b'*', _) => ("*", false, 1),
            _ => return Err(err(start, format!("unknown atom token '{}'", c as char))),
        };
        self.pos += len;
        Ok(Atom {
            element: Element::from_symbol(symbol).expect("organic subset symbol"),
            aromatic,
            charge: 0,
            explicit_h: None,
            degree: 0,
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.pos;
        self.pos += 1;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }

        let (element, aromatic) = self.bracket_symbol()?;

        // chirality: @, @@, or @ followed by a class tag such as TH1 or OH12
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if self.src.get(self.pos..self.pos + 2).is_some_and(|t| {
                matches!(t, b"TH" | b"AL" | b"SP" | b"TB" | b"OH")
            }) {
                self.pos += 2;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }

        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                hydrogens = d - b'0';
                self.pos += 1;
            }
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let charge_start = self.pos;
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            let mut digits = 0;
            let mut magnitude = 0i32;
            while let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                magnitude = magnitude * 10 + (d - b'0') as i32;
                digits += 1;
                self.pos += 1;
            }
            if digits > 0 {
                charge = unit * magnitude;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
            if !(-4..=4).contains(&charge) {
                return Err(err(charge_start, format!("charge {charge} outside [-4, 4]")));
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            let class_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == class_start {
                return Err(err(class_start, "atom class needs digits"));
            }
        }

        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(_) => return Err(err(self.pos, "unexpected character in bracket atom")),
            None => return Err(err(open, "unclosed bracket atom")),
        }
        Ok(Atom {
            element,
            aromatic,
            charge: charge as i8,
            explicit_h: Some(hydrogens),
            degree: 0,
        })
    }

    fn bracket_symbol(&mut self) -> Result<(Element, bool)> {
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Err(err(start, "unclosed bracket atom"));
        };
        if c == b'*' {
            self.pos += 1;
            return Ok((Element::Other(0), false));
        }
        if c.is_ascii_lowercase() {
            for (tok, sym) in [(&b"se"[..], "Se"), (b"as", "As"), (b"te", "Te")] {
                if self.src.get(start..start + 2) == Some(tok) {
                    self.pos += 2;
                    return Ok((Element::from_symbol(sym).unwrap(), true));
                }
            }
            let sym = match c {
                b'b' => "B",
                b'c' => "C",
                b'n' => "N",
                b'o' => "O",
                b'p' => "P",
                b's' => "S",
                _ => return Err(err(start, format!("unknown atom token '{}'", c as char))),
            };
            self.pos += 1;
            return Ok((Element::from_symbol(sym).unwrap(), true));
        }
        if !c.is_ascii_uppercase() {
            return Err(err(start, format!("unknown atom token '{}'", c as char)));
        }
        if let Some(&l) = self.src.get(start + 1).filter(|l| l.is_ascii_lowercase()) {
            let sym = [c, l];
            if let Some(e) = Element::from_symbol(std::str::from_utf8(&sym).unwrap()) {
                self.pos += 2;
                return Ok((e, false));
            }
        }
        match Element::from_symbol(std::str::from_utf8(&[c]).unwrap()) {
            Some(e) => {
                self.pos += 1;
                Ok((e, false))
            }
            None => Err(err(start, format!("unknown element '{}'", c as char))),
        }
    }
}
