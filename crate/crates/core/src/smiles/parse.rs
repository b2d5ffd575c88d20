use std::collections::BTreeMap;

use super::molecule::{
    normalize_chirality, Atom, BondOrder, BondStereo, Chirality, Element, GraphError, Molecule,
};
use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BondSymbol {
    order: BondOrder,
    stereo: BondStereo,
    offset: usize,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Atom(usize),
    PendingRing(u16),
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSymbol>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    mol: Molecule,
    atom_offsets: Vec<usize>,
    has_parent: Vec<bool>,
    written: Vec<Vec<Slot>>,
    prev: Option<usize>,
    pending: Option<BondSymbol>,
    branches: Vec<(Option<usize>, usize, usize)>,
    rings: BTreeMap<u16, OpenRing>,
}

/// Parses a SMILES string into a [`Molecule`].
///
/// Errors carry the byte offset of the offending character.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        mol: Molecule::new(),
        atom_offsets: Vec::new(),
        has_parent: Vec::new(),
        written: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
    };
    p.run()?;
    p.finish()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<u8> {
        self.text.get(self.pos + k).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let offset = self.pos;
            match c {
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom, offset)?;
                }
                b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                    let element = match (c, self.peek_at(1)) {
                        (b'C', Some(b'l')) => {
                            self.pos += 1;
                            Element::Cl
                        }
                        (b'B', Some(b'r')) => {
                            self.pos += 1;
                            Element::Br
                        }
                        _ => Element::from_symbol(std::str::from_utf8(&[c]).unwrap()).unwrap(),
                    };
                    self.pos += 1;
                    self.push_atom(Atom::new(element), offset)?;
                }
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                    let element =
                        Element::from_aromatic_symbol(std::str::from_utf8(&[c]).unwrap()).unwrap();
                    self.pos += 1;
                    self.push_atom(Atom::aromatic(element), offset)?;
                }
                b'-' | b'=' | b'#' | b'$' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(SmilesError::UnexpectedBond { offset });
                    }
                    let (order, stereo) = match c {
                        b'-' => (BondOrder::Single, BondStereo::None),
                        b'=' => (BondOrder::Double, BondStereo::None),
                        b'#' => (BondOrder::Triple, BondStereo::None),
                        b'$' => (BondOrder::Quadruple, BondStereo::None),
                        b':' => (BondOrder::Aromatic, BondStereo::None),
                        b'/' => (BondOrder::Single, BondStereo::Up),
                        _ => (BondOrder::Single, BondStereo::Down),
                    };
                    self.pending = Some(BondSymbol {
                        order,
                        stereo,
                        offset,
                    });
                    self.pos += 1;
                }
                b'(' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(SmilesError::UnbalancedParen { offset });
                    }
                    self.branches
                        .push((self.prev, offset, self.mol.atom_count()));
                    self.pos += 1;
                }
                b')' => {
                    let Some((restore, _, count)) = self.branches.pop() else {
                        return Err(SmilesError::UnbalancedParen { offset });
                    };
                    if self.pending.is_some() {
                        return Err(SmilesError::UnexpectedBond { offset });
                    }
                    if count == self.mol.atom_count() {
                        return Err(SmilesError::MalformedBranch { offset });
                    }
                    self.prev = restore;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_closure((c - b'0') as u16, offset)?;
                }
                b'%' => {
                    let (Some(d1), Some(d2)) = (self.peek_at(1), self.peek_at(2)) else {
                        return Err(SmilesError::MalformedRingNumber { offset });
                    };
                    if !d1.is_ascii_digit() || !d2.is_ascii_digit() {
                        return Err(SmilesError::MalformedRingNumber { offset });
                    }
                    self.pos += 3;
                    self.ring_closure(((d1 - b'0') * 10 + (d2 - b'0')) as u16, offset)?;
                }
                b'.' => {
                    if self.prev.is_none() || self.pending.is_some() || !self.branches.is_empty() {
                        return Err(SmilesError::UnexpectedChar { offset, ch: '.' });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                _ => {
                    let ch = std::str::from_utf8(&self.text[self.pos..])
                        .ok()
                        .and_then(|s| s.chars().next())
                        .unwrap_or('\u{fffd}');
                    return Err(SmilesError::UnexpectedChar { offset, ch });
                }
            }
        }
        Ok(())
    }

    fn default_order(&self, x: usize, y: usize) -> BondOrder {
        if self.mol.atom(x).aromatic && self.mol.atom(y).aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn push_atom(&mut self, atom: Atom, offset: usize) -> Result<(), SmilesError> {
        let idx = self.mol.add_atom(atom);
        self.atom_offsets.push(offset);
        self.written.push(Vec::new());
        self.has_parent.push(self.prev.is_some());
        if let Some(prev) = self.prev {
            let (order, stereo) = match self.pending.take() {
                Some(sym) => (sym.order, sym.stereo),
                None => (self.default_order(prev, idx), BondStereo::None),
            };
            self.mol
                .add_bond(prev, idx, order, stereo)
                .map_err(|e| graph_error(e, offset))?;
            self.written[prev].push(Slot::Atom(idx));
            self.written[idx].push(Slot::Atom(prev));
        } else if self.pending.is_some() {
            return Err(SmilesError::UnexpectedBond { offset });
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self, number: u16, offset: usize) -> Result<(), SmilesError> {
        let Some(here) = self.prev else {
            return Err(SmilesError::UnpairedRing { offset, number });
        };
        let sym = self.pending.take();
        match self.rings.remove(&number) {
            None => {
                self.written[here].push(Slot::PendingRing(number));
                self.rings.insert(
                    number,
                    OpenRing {
                        atom: here,
                        bond: sym,
                        offset,
                    },
                );
            }
            Some(open) => {
                if open.atom == here {
                    return Err(SmilesError::RingSelfBond { offset });
                }
                // A symbol at either end applies, read from the atom it follows.
                let (order, stereo, from, to) = match (open.bond, sym) {
                    (Some(a), Some(b)) => {
                        let same_stereo = a.stereo == b.stereo.flipped();
                        if a.order != b.order || !same_stereo {
                            return Err(SmilesError::ConflictingRingBond { offset });
                        }
                        (a.order, a.stereo, open.atom, here)
                    }
                    (Some(a), None) => (a.order, a.stereo, open.atom, here),
                    (None, Some(b)) => (b.order, b.stereo, here, open.atom),
                    (None, None) => (
                        self.default_order(open.atom, here),
                        BondStereo::None,
                        open.atom,
                        here,
                    ),
                };
                self.mol
                    .add_bond(from, to, order, stereo)
                    .map_err(|e| graph_error(e, offset))?;
                let slot = self.written[open.atom]
                    .iter_mut()
                    .find(|s| matches!(s, Slot::PendingRing(n) if *n == number))
                    .expect("open ring has a pending slot");
                *slot = Slot::Atom(here);
                self.written[here].push(Slot::Atom(open.atom));
            }
        }
        Ok(())
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let malformed = |reason: &'static str| SmilesError::MalformedBracket {
            offset: start,
            reason,
        };
        self.pos += 1;

        let isotope = self.read_number();
        let isotope = match isotope {
            Some(0) => return Err(malformed("isotope must be positive")),
            Some(v) if v > u16::MAX as u32 => return Err(malformed("isotope too large")),
            Some(v) => Some(v as u16),
            None => None,
        };

        let sym_start = self.pos;
        let (element, aromatic) = match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                self.pos += 1;
                while matches!(self.peek(), Some(c) if c.is_ascii_lowercase()) {
                    self.pos += 1;
                }
                let symbol = std::str::from_utf8(&self.text[sym_start..self.pos]).unwrap();
                let element =
                    Element::from_symbol(symbol).ok_or_else(|| SmilesError::UnknownElement {
                        offset: sym_start,
                        symbol: symbol.to_string(),
                    })?;
                (element, false)
            }
            Some(c) if c.is_ascii_lowercase() => {
                self.pos += 1;
                while matches!(self.peek(), Some(c) if c.is_ascii_lowercase()) {
                    self.pos += 1;
                }
                let symbol = std::str::from_utf8(&self.text[sym_start..self.pos]).unwrap();
                let element = Element::from_aromatic_symbol(symbol).ok_or_else(|| {
                    SmilesError::UnknownElement {
                        offset: sym_start,
                        symbol: symbol.to_string(),
                    }
                })?;
                (element, true)
            }
            _ => return Err(malformed("missing element symbol")),
        };

        let mut chirality = Chirality::None;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            chirality = Chirality::Ccw;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chirality = Chirality::Cw;
            }
        }

        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = match self.read_number() {
                Some(v) if v <= 9 => v as u8,
                Some(_) => return Err(malformed("hydrogen count too large")),
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(v) = self.read_number() {
                charge = unit * v as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
            if charge.abs() > 8 {
                return Err(malformed("charge out of range"));
            }
        }

        // Atom classes are accepted and dropped.
        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return Err(malformed("atom class without number"));
            }
        }

        if self.peek() != Some(b']') {
            return Err(malformed("expected ']'"));
        }
        self.pos += 1;

        Ok(Atom {
            element,
            aromatic,
            formal_charge: charge as i8,
            explicit_h: Some(hydrogens),
            isotope,
            chirality,
        })
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(c @ b'0'..=b'9') = self.peek() {
            value = value.saturating_mul(10).saturating_add((c - b'0') as u32);
            self.pos += 1;
        }
        (self.pos > start).then_some(value)
    }

    fn finish(mut self) -> Result<Molecule, SmilesError> {
        if let Some(sym) = self.pending {
            return Err(SmilesError::UnexpectedBond { offset: sym.offset });
        }
        if let Some(&(_, offset, _)) = self.branches.last() {
            return Err(SmilesError::UnbalancedParen { offset });
        }
        if let Some((&number, open)) = self.rings.iter().next() {
            return Err(SmilesError::UnpairedRing {
                offset: open.offset,
                number,
            });
        }
        if self.mol.is_empty() {
            return Err(SmilesError::Empty);
        }
        for i in 0..self.mol.atom_count() {
            if self.mol.atom(i).explicit_h.is_none() && self.mol.implicit_hydrogens(i).is_none() {
                return Err(SmilesError::Valence {
                    offset: self.atom_offsets[i],
                    element: self.mol.atom(i).element,
                });
            }
        }
        for i in 0..self.mol.atom_count() {
            let chirality = self.mol.atom(i).chirality;
            if chirality == Chirality::None {
                continue;
            }
            let mut written: Vec<Option<usize>> = self.written[i]
                .iter()
                .map(|s| match s {
                    Slot::Atom(a) => Some(*a),
                    Slot::PendingRing(_) => unreachable!("all rings closed"),
                })
                .collect();
            if self.mol.total_hydrogens(i) > 0 {
                let at = usize::from(self.has_parent[i]);
                written.insert(at.min(written.len()), None);
            }
            self.mol.atom_mut(i).chirality = normalize_chirality(chirality, &written);
        }
        Ok(self.mol)
    }
}

fn graph_error(e: GraphError, offset: usize) -> SmilesError {
    match e {
        GraphError::DuplicateBond(..) => SmilesError::DuplicateBond { offset },
        GraphError::SelfBond(..) => SmilesError::RingSelfBond { offset },
        GraphError::StereoOnMultipleBond(..) => SmilesError::UnexpectedBond { offset },
        other => SmilesError::Graph(other),
    }
}
