//! Molecular graph types shared by every string representation.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Elements accepted by the parser: the organic subset plus hydrogen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    F,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 11] = [
        Element::H,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == symbol)
    }

    /// Lowercase aromatic spelling, for elements allowed to be aromatic.
    pub fn aromatic_symbol(self) -> Option<&'static str> {
        match self {
            Element::B => Some("b"),
            Element::C => Some("c"),
            Element::N => Some("n"),
            Element::O => Some("o"),
            Element::P => Some("p"),
            Element::S => Some("s"),
            _ => None,
        }
    }

    pub fn from_aromatic_symbol(symbol: &str) -> Option<Element> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.aromatic_symbol() == Some(symbol))
    }

    pub fn can_be_aromatic(self) -> bool {
        self.aromatic_symbol().is_some()
    }

    /// Standard valences of the neutral element, ascending.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::H => &[1],
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    /// Lowest valence adjusted for a formal charge (isoelectronic shift).
    pub fn charged_valence(self, charge: i8) -> u8 {
        let base = self.valences()[0] as i32;
        let q = charge as i32;
        let v = match self {
            Element::H if q != 0 => 0,
            Element::C => base - q.abs(),
            Element::B => base - q,
            _ => base + q,
        };
        v.clamp(0, 8) as u8
    }

    /// Largest number of bonds (hydrogens included) the atom may carry.
    pub fn max_valence(self, charge: i8) -> u8 {
        if charge == 0 {
            *self.valences().last().unwrap()
        } else {
            self.charged_valence(charge)
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Tetrahedral chirality. Stored relative to the neighbor order
/// "implicit hydrogen first, then neighbors by ascending atom index".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Chirality {
    #[default]
    None,
    /// `@`
    Ccw,
    /// `@@`
    Cw,
}

impl Chirality {
    pub fn inverted(self) -> Chirality {
        match self {
            Chirality::None => Chirality::None,
            Chirality::Ccw => Chirality::Cw,
            Chirality::Cw => Chirality::Ccw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// `Some` only for bracket atoms; unbracketed atoms get implicit hydrogens.
    pub explicit_h: Option<u8>,
    pub isotope: Option<u16>,
    pub chirality: Chirality,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            aromatic: false,
            formal_charge: 0,
            explicit_h: None,
            isotope: None,
            chirality: Chirality::None,
        }
    }

    pub fn aromatic(element: Element) -> Atom {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }

    pub fn is_bracketed(&self) -> bool {
        self.explicit_h.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Quadruple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count as one.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Quadruple => 4,
        }
    }

    pub fn from_valence(order: u8) -> Option<BondOrder> {
        match order {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Quadruple),
            _ => None,
        }
    }
}

/// Directional marker of a single bond (`/` is `Up`, `\` is `Down`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum BondStereo {
    #[default]
    None,
    Up,
    Down,
}

impl BondStereo {
    pub fn flipped(self) -> BondStereo {
        match self {
            BondStereo::None => BondStereo::None,
            BondStereo::Up => BondStereo::Down,
            BondStereo::Down => BondStereo::Up,
        }
    }
}

/// A bond between atoms `a < b`. `stereo` reads in the `a -> b` direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: BondStereo,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    /// Stereo marker as seen when walking from `from` to the other end.
    pub fn stereo_from(&self, from: usize) -> BondStereo {
        if from == self.a {
            self.stereo
        } else {
            self.stereo.flipped()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("atom index {0} out of range")]
    AtomOutOfRange(usize),
    #[error("bond from atom {0} to itself")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("stereo marker on non-single bond {0}-{1}")]
    StereoOnMultipleBond(usize, usize),
    #[error("element {0} cannot be aromatic")]
    AromaticElement(Element),
    #[error("valence exceeded on atom {0}")]
    Valence(usize),
}

/// An attributed molecular graph. Components are implied by connectivity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub fn new() -> Molecule {
        Molecule::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn bond_mut(&mut self, i: usize) -> &mut Bond {
        &mut self.bonds[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs in bond insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn bond_between(&self, x: usize, y: usize) -> Option<usize> {
        self.adjacency
            .get(x)?
            .iter()
            .find(|&&(n, _)| n == y)
            .map(|&(_, b)| b)
    }

    /// Adds a bond. `stereo` is read in the `from -> to` direction.
    pub fn add_bond(
        &mut self,
        from: usize,
        to: usize,
        order: BondOrder,
        stereo: BondStereo,
    ) -> Result<usize, GraphError> {
        let n = self.atoms.len();
        if from >= n {
            return Err(GraphError::AtomOutOfRange(from));
        }
        if to >= n {
            return Err(GraphError::AtomOutOfRange(to));
        }
        if from == to {
            return Err(GraphError::SelfBond(from));
        }
        if self.bond_between(from, to).is_some() {
            return Err(GraphError::DuplicateBond(from.min(to), from.max(to)));
        }
        if stereo != BondStereo::None && order != BondOrder::Single {
            return Err(GraphError::StereoOnMultipleBond(from, to));
        }
        let (a, b, stereo) = if from < to {
            (from, to, stereo)
        } else {
            (to, from, stereo.flipped())
        };
        let idx = self.bonds.len();
        self.bonds.push(Bond {
            a,
            b,
            order,
            stereo,
        });
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Ok(idx)
    }

    /// Sum of bond valences at `atom` (aromatic bonds count one).
    pub fn bond_valence_sum(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence() as u32)
            .sum()
    }

    /// Implicit hydrogens of an unbracketed atom; `None` when the bonds
    /// already exceed every allowed valence.
    pub fn implicit_hydrogens(&self, atom: usize) -> Option<u8> {
        let a = &self.atoms[atom];
        implicit_hydrogens(a.element, a.aromatic, self.bond_valence_sum(atom))
    }

    /// Explicit hydrogens for bracket atoms, implicit ones otherwise.
    pub fn total_hydrogens(&self, atom: usize) -> u8 {
        match self.atoms[atom].explicit_h {
            Some(h) => h,
            None => self.implicit_hydrogens(atom).unwrap_or(0),
        }
    }

    /// Connected component label per atom, numbered in order of first atom.
    pub fn components(&self) -> Vec<usize> {
        let n = self.atoms.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(x) = stack.pop() {
                for &(y, _) in &self.adjacency[x] {
                    if label[y] == usize::MAX {
                        label[y] = next;
                        stack.push(y);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Checks every structural invariant, including valence limits.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let n = self.atoms.len();
        let mut seen = std::collections::HashSet::new();
        for bond in &self.bonds {
            if bond.a >= n {
                return Err(GraphError::AtomOutOfRange(bond.a));
            }
            if bond.b >= n {
                return Err(GraphError::AtomOutOfRange(bond.b));
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfBond(bond.a));
            }
            if !seen.insert((bond.a.min(bond.b), bond.a.max(bond.b))) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            if bond.stereo != BondStereo::None && bond.order != BondOrder::Single {
                return Err(GraphError::StereoOnMultipleBond(bond.a, bond.b));
            }
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.aromatic && !atom.element.can_be_aromatic() {
                return Err(GraphError::AromaticElement(atom.element));
            }
            match atom.explicit_h {
                None => {
                    if self.implicit_hydrogens(i).is_none() {
                        return Err(GraphError::Valence(i));
                    }
                }
                Some(h) => {
                    let used = self.bond_valence_sum(i) + h as u32;
                    if used > atom.element.max_valence(atom.formal_charge) as u32 {
                        return Err(GraphError::Valence(i));
                    }
                }
            }
        }
        Ok(())
    }

    /// Relabels atoms so that old atom `i` becomes `perm[i]`. Chirality is
    /// re-expressed against the new index order.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut inverse = vec![0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let mut out = Molecule::new();
        for &old in &inverse {
            out.add_atom(self.atoms[old].clone());
        }
        let mut order: Vec<usize> = (0..self.bonds.len()).collect();
        order.sort_by_key(|&b| {
            let bond = &self.bonds[b];
            let (x, y) = (perm[bond.a], perm[bond.b]);
            (x.min(y), x.max(y))
        });
        for b in order {
            let bond = self.bonds[b];
            out.add_bond(perm[bond.a], perm[bond.b], bond.order, bond.stereo)
                .expect("permutation preserves a valid graph");
        }
        for old in 0..self.atoms.len() {
            let chir = self.atoms[old].chirality;
            if chir == Chirality::None {
                continue;
            }
            let has_h = self.total_hydrogens(old) > 0;
            // Reference order of the source, expressed with new labels.
            let mut written: Vec<Option<usize>> = Vec::new();
            if has_h {
                written.push(None);
            }
            let mut nbrs: Vec<usize> = self.adjacency[old].iter().map(|&(n, _)| n).collect();
            nbrs.sort_unstable();
            written.extend(nbrs.into_iter().map(|n| Some(perm[n])));
            out.atoms[perm[old]].chirality = normalize_chirality(chir, &written);
        }
        out
    }

    /// Copy with all chirality and bond direction markers removed.
    pub fn without_stereo(&self) -> Molecule {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            atom.chirality = Chirality::None;
        }
        for bond in &mut out.bonds {
            bond.stereo = BondStereo::None;
        }
        out
    }

    pub(crate) fn rebuild_adjacency(&mut self) {
        let mut adjacency = vec![Vec::new(); self.atoms.len()];
        for (i, bond) in self.bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        self.adjacency = adjacency;
    }

    /// Restores derived lookup tables after deserialization.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Molecule, GraphError> {
        let mut mol = Molecule::new();
        for atom in atoms {
            mol.add_atom(atom);
        }
        for bond in bonds {
            mol.add_bond(bond.a, bond.b, bond.order, bond.stereo)?;
        }
        Ok(mol)
    }
}

/// Hydrogen count filling an unbracketed atom up to its next standard valence.
///
/// Aromatic atoms reserve one unit for the pi system and only ever use their
/// lowest valence, so `c` in benzene gets one hydrogen and `s`/`o` get none.
pub fn implicit_hydrogens(element: Element, aromatic: bool, bond_sum: u32) -> Option<u8> {
    let valences = element.valences();
    if aromatic {
        let lowest = valences[0] as u32;
        if bond_sum < lowest {
            return Some((lowest - bond_sum - 1) as u8);
        }
        let max = *valences.last().unwrap() as u32;
        return (bond_sum <= max).then_some(0);
    }
    valences
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= bond_sum)
        .map(|v| (v - bond_sum) as u8)
}

/// Parity of the permutation taking `written` to the reference order
/// (hydrogen first, then ascending atom index). Odd parity flips chirality.
pub(crate) fn normalize_chirality(chirality: Chirality, written: &[Option<usize>]) -> Chirality {
    if chirality == Chirality::None {
        return chirality;
    }
    if permutation_is_odd(written) {
        chirality.inverted()
    } else {
        chirality
    }
}

/// Inverse of [`normalize_chirality`]: express a stored chirality against a
/// new written order. Parity is symmetric so the same computation applies.
pub(crate) fn chirality_for_order(stored: Chirality, written: &[Option<usize>]) -> Chirality {
    normalize_chirality(stored, written)
}

fn permutation_is_odd(seq: &[Option<usize>]) -> bool {
    // `None` sorts before every `Some`, matching the reference order.
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implicit_hydrogen_rules() {
        assert_eq!(implicit_hydrogens(Element::C, false, 0), Some(4));
        assert_eq!(implicit_hydrogens(Element::C, false, 5), None);
        assert_eq!(implicit_hydrogens(Element::S, false, 3), Some(1));
        assert_eq!(implicit_hydrogens(Element::P, false, 4), Some(1));
        assert_eq!(implicit_hydrogens(Element::N, false, 4), None);
        // benzene carbon, pyridine nitrogen, thiophene sulfur, furan oxygen
        assert_eq!(implicit_hydrogens(Element::C, true, 2), Some(1));
        assert_eq!(implicit_hydrogens(Element::N, true, 2), Some(0));
        assert_eq!(implicit_hydrogens(Element::S, true, 2), Some(0));
        assert_eq!(implicit_hydrogens(Element::O, true, 2), Some(0));
        assert_eq!(implicit_hydrogens(Element::C, true, 5), None);
    }

    #[test]
    fn charged_valences() {
        assert_eq!(Element::N.charged_valence(1), 4);
        assert_eq!(Element::O.charged_valence(-1), 1);
        assert_eq!(Element::C.charged_valence(-1), 3);
        assert_eq!(Element::B.charged_valence(-1), 4);
        assert_eq!(Element::H.charged_valence(1), 0);
        assert_eq!(Element::S.max_valence(0), 6);
    }

    #[test]
    fn add_bond_rejects_bad_edges() {
        let mut m = Molecule::new();
        let a = m.add_atom(Atom::new(Element::C));
        let b = m.add_atom(Atom::new(Element::C));
        assert_eq!(
            m.add_bond(a, a, BondOrder::Single, BondStereo::None),
            Err(GraphError::SelfBond(0))
        );
        m.add_bond(a, b, BondOrder::Single, BondStereo::None)
            .unwrap();
        assert!(matches!(
            m.add_bond(b, a, BondOrder::Double, BondStereo::None),
            Err(GraphError::DuplicateBond(0, 1))
        ));
        assert!(matches!(
            m.add_bond(a, 7, BondOrder::Single, BondStereo::None),
            Err(GraphError::AtomOutOfRange(7))
        ));
    }

    #[test]
    fn reversed_bond_flips_stereo() {
        let mut m = Molecule::new();
        let a = m.add_atom(Atom::new(Element::F));
        let b = m.add_atom(Atom::new(Element::C));
        m.add_bond(b, a, BondOrder::Single, BondStereo::Up).unwrap();
        assert_eq!(m.bond(0).stereo, BondStereo::Down);
        assert_eq!(m.bond(0).stereo_from(b), BondStereo::Up);
    }

    #[test]
    fn parity() {
        assert!(!permutation_is_odd(&[None, Some(1), Some(2), Some(3)]));
        assert!(permutation_is_odd(&[Some(1), None, Some(2), Some(3)]));
        assert!(!permutation_is_odd(&[Some(3), Some(1), Some(2)]));
    }
}
