use crate::smiles::{Atom, BondOrder, BondStereo, Molecule};

use super::token::{AtomSymbol, SelfiesToken};

struct Derivation<'a> {
    tokens: &'a [SelfiesToken],
    mol: Molecule,
    /// Remaining bond capacity per atom; never negative by construction.
    remaining: Vec<u8>,
    fragment_start: usize,
}

impl Derivation<'_> {
    fn place(&mut self, symbol: &AtomSymbol) -> usize {
        let mut atom = Atom::new(symbol.element);
        atom.formal_charge = symbol.charge;
        atom.isotope = symbol.isotope;
        let max = symbol.element.max_valence(symbol.charge);
        atom.explicit_h = symbol.hydrogens.map(|h| h.min(max));
        self.remaining.push(symbol.capacity());
        self.mol.add_atom(atom)
    }

    /// Reads up to `size` index tokens starting at `i`, clipped at `end`.
    fn read_index(&self, i: usize, end: usize, size: u8) -> (usize, usize) {
        let stop = (i + size as usize).min(end);
        let value = self.tokens[i..stop]
            .iter()
            .fold(0usize, |acc, t| acc * 16 + t.index_value() as usize);
        (value, stop)
    }

    /// Derives `tokens[start..end]`. `cur` is the attachment atom and
    /// `state` how many bond units may still be spent from it here.
    fn derive(
        &mut self,
        start: usize,
        end: usize,
        mut cur: Option<usize>,
        mut state: u8,
        top: bool,
    ) {
        let mut i = start;
        while i < end {
            let token = self.tokens[i];
            i += 1;
            match token {
                SelfiesToken::Nop => {}
                SelfiesToken::Dot => {
                    if top {
                        cur = None;
                        state = 0;
                        self.fragment_start = self.mol.atom_count();
                    }
                }
                SelfiesToken::Atom { bond, atom } => match cur {
                    None => {
                        let a = self.place(&atom);
                        cur = Some(a);
                        state = self.remaining[a];
                    }
                    Some(c) => {
                        let order = bond.min(state.min(self.remaining[c])).min(atom.capacity());
                        if order == 0 {
                            continue;
                        }
                        let a = self.place(&atom);
                        self.mol
                            .add_bond(
                                c,
                                a,
                                BondOrder::from_valence(order).unwrap(),
                                BondStereo::None,
                            )
                            .expect("fresh atom");
                        self.remaining[c] -= order;
                        self.remaining[a] -= order;
                        cur = Some(a);
                        state = self.remaining[a];
                    }
                },
                SelfiesToken::Branch { bond, size } => {
                    let Some(c) = cur else { continue };
                    let avail = state.min(self.remaining[c]);
                    if avail <= 1 {
                        continue;
                    }
                    let (q, next) = self.read_index(i, end, size);
                    let branch_end = next.saturating_add(q + 1).min(end);
                    let before = self.remaining[c];
                    self.derive(next, branch_end, Some(c), (avail - 1).min(bond), false);
                    state = state.saturating_sub(before - self.remaining[c]);
                    i = branch_end;
                }
                SelfiesToken::Ring { bond, size } => {
                    let Some(c) = cur else { continue };
                    if state.min(self.remaining[c]) == 0 {
                        continue;
                    }
                    let (q, next) = self.read_index(i, end, size);
                    i = next;
                    let target = c.saturating_sub(q + 1).max(self.fragment_start);
                    if target == c {
                        continue;
                    }
                    let order = bond
                        .min(state)
                        .min(self.remaining[c])
                        .min(self.remaining[target]);
                    let added = match self.mol.bond_between(c, target) {
                        Some(b) => {
                            let existing = self.mol.bond(b).order.valence();
                            let total = (existing + order).min(3);
                            self.mol.bond_mut(b).order = BondOrder::from_valence(total).unwrap();
                            total - existing
                        }
                        None if order > 0 => {
                            self.mol
                                .add_bond(
                                    c,
                                    target,
                                    BondOrder::from_valence(order).unwrap(),
                                    BondStereo::None,
                                )
                                .expect("distinct atoms without a bond");
                            order
                        }
                        None => 0,
                    };
                    self.remaining[c] -= added;
                    self.remaining[target] -= added;
                    state -= added;
                }
            }
        }
    }
}

/// Derives a molecule from any token sequence. Requested bond orders are
/// clipped to the capacity left on both ends and tokens that cannot be
/// honored are skipped, so the result always satisfies the molecule
/// invariants (possibly empty).
pub fn decode_selfies(tokens: &[SelfiesToken]) -> Molecule {
    let mut d = Derivation {
        tokens,
        mol: Molecule::new(),
        remaining: Vec::new(),
        fragment_start: 0,
    };
    d.derive(0, tokens.len(), None, 0, true);
    let mut mol = d.mol;
    mol.rebuild_adjacency();
    mol
}

#[cfg(test)]
mod tests {
    use super::super::parse_tokens;
    use super::*;
    use crate::smiles::canonical_smiles;

    fn dec(s: &str) -> Molecule {
        let m = decode_selfies(&parse_tokens(s).unwrap());
        m.check_invariants().unwrap();
        m
    }

    fn smi(s: &str) -> String {
        canonical_smiles(&dec(s))
    }

    fn canon(s: &str) -> String {
        crate::smiles::canonicalize(s).unwrap()
    }

    #[test]
    fn methane_and_ethene() {
        assert_eq!(smi("[C]"), "C");
        let m = dec("[C][=C]");
        assert_eq!(m.bond(0).order, BondOrder::Double);
        assert_eq!(m.total_hydrogens(0), 2);
    }

    #[test]
    fn bond_orders_are_clipped() {
        // O has two units: the triple request becomes a double.
        let m = dec("[C][#O]");
        assert_eq!(m.bond(0).order, BondOrder::Double);
        // F saturated after the first bond; the next atom is skipped.
        assert_eq!(smi("[C][F][C]"), canon("CF"));
    }

    #[test]
    fn branch_reads_length() {
        // C(C)O with a one-token branch.
        assert_eq!(smi("[C][Branch1][C][C][O]"), canon("C(C)O"));
        assert_eq!(smi("[C][Branch1][Ring1][C][C][O]"), canon("C(CC)O"));
        // Index digit [O] = 9 overflows the string and is clipped.
        assert_eq!(dec("[C][Branch1][O][C][C]").atom_count(), 3);
    }

    #[test]
    fn branch_needs_two_units() {
        // F has a single unit, so the branch is skipped and its index
        // token is read as an ordinary atom.
        assert_eq!(smi("[F][Branch1][C][O]"), canon("FCO"));
    }

    #[test]
    fn ring_closes_back() {
        let m = dec("[C][C][C][C][C][C][Ring1][=Branch1]");
        assert_eq!(m.bond_count(), 6);
        assert_eq!(m.atom_count(), 6);
        // Ring onto an existing bond raises its order.
        let m = dec("[C][C][Ring1][C]");
        assert_eq!(m.bond_count(), 1);
        assert_eq!(m.bond(0).order, BondOrder::Double);
    }

    #[test]
    fn ring_before_any_atom_is_ignored() {
        assert_eq!(dec("[Ring1][C]").atom_count(), 1);
        assert!(dec("").is_empty());
    }

    #[test]
    fn fragments() {
        let m = dec("[C][.][O]");
        assert_eq!(m.atom_count(), 2);
        assert_eq!(m.bond_count(), 0);
    }

    #[test]
    fn saturated_bracket_atom() {
        let m = dec("[CH4][C]");
        assert_eq!(m.atom_count(), 1);
        assert_eq!(m.total_hydrogens(0), 4);
    }
}
