use petgraph::algo::maximum_matching;
use petgraph::graph::UnGraph;

use super::molecule::{BondOrder, Molecule};
use super::SmilesError;

fn in_ring(mol: &Molecule, bond: usize) -> bool {
    let b = mol.bond(bond);
    let mut seen = vec![false; mol.atom_count()];
    let mut stack = vec![b.a];
    seen[b.a] = true;
    while let Some(x) = stack.pop() {
        for &(y, e) in mol.neighbors(x) {
            if e == bond || seen[y] {
                continue;
            }
            if y == b.b {
                return true;
            }
            seen[y] = true;
            stack.push(y);
        }
    }
    false
}

/// Replaces aromatic flags and bonds with an explicit single/double
/// assignment. Hydrogen counts are preserved: any atom whose implicit count
/// would change becomes a bracket atom with the original count.
pub fn kekulize(mol: &Molecule) -> Result<Molecule, SmilesError> {
    let n = mol.atom_count();
    let hydrogens: Vec<u8> = (0..n).map(|i| mol.total_hydrogens(i)).collect();
    let mut out = mol.clone();

    // Aromatic bonds outside rings join separate aromatic systems.
    let mut ring_aromatic = vec![false; mol.bond_count()];
    for (i, bond) in mol.bonds().iter().enumerate() {
        if bond.order == BondOrder::Aromatic {
            if in_ring(mol, i) {
                ring_aromatic[i] = true;
            } else {
                out.bond_mut(i).order = BondOrder::Single;
            }
        }
    }

    // An aromatic atom needs a double bond when its lowest valence has one
    // unit left after single-counting its bonds and hydrogens.
    let needs: Vec<bool> = (0..n)
        .map(|i| {
            let a = mol.atom(i);
            if !a.aromatic {
                return false;
            }
            let used = mol.bond_valence_sum(i) + hydrogens[i] as u32;
            a.element.charged_valence(a.formal_charge) as u32 > used
        })
        .collect();

    let mut graph = UnGraph::<usize, usize>::new_undirected();
    let mut node = vec![None; n];
    for i in 0..n {
        if needs[i] {
            node[i] = Some(graph.add_node(i));
        }
    }
    for (i, bond) in mol.bonds().iter().enumerate() {
        if !ring_aromatic[i] {
            continue;
        }
        if let (Some(x), Some(y)) = (node[bond.a], node[bond.b]) {
            graph.add_edge(x, y, i);
        }
    }
    let matching = maximum_matching(&graph);
    if !matching.is_perfect() {
        let atom = (0..n)
            .find(|&i| node[i].is_some_and(|x| !matching.contains_node(x)))
            .unwrap_or(0);
        return Err(SmilesError::Kekulize { atom });
    }
    for (i, bond) in mol.bonds().iter().enumerate() {
        if ring_aromatic[i] {
            out.bond_mut(i).order = BondOrder::Single;
            if let (Some(x), Some(y)) = (node[bond.a], node[bond.b]) {
                if matching.mate(x) == Some(y) {
                    out.bond_mut(i).order = BondOrder::Double;
                }
            }
        }
    }
    for i in 0..n {
        out.atom_mut(i).aromatic = false;
    }
    for i in 0..n {
        if out.atom(i).explicit_h.is_none() && out.implicit_hydrogens(i) != Some(hydrogens[i]) {
            out.atom_mut(i).explicit_h = Some(hydrogens[i]);
        }
    }
    out.rebuild_adjacency();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    fn doubles(m: &Molecule) -> usize {
        m.bonds()
            .iter()
            .filter(|b| b.order == BondOrder::Double)
            .count()
    }

    #[test]
    fn benzene_alternates() {
        let k = kekulize(&parse_smiles("c1ccccc1").unwrap()).unwrap();
        assert_eq!(doubles(&k), 3);
        for i in 0..6 {
            let d = k
                .neighbors(i)
                .iter()
                .filter(|&&(_, b)| k.bond(b).order == BondOrder::Double)
                .count();
            assert_eq!(d, 1);
            assert_eq!(k.total_hydrogens(i), 1);
            assert!(k.atom(i).explicit_h.is_none());
        }
    }

    #[test]
    fn heteroaromatics() {
        for (s, d) in [
            ("c1ccncc1", 3),
            ("c1cc[nH]c1", 2),
            ("c1ccoc1", 2),
            ("c1ccsc1", 2),
            ("c1ccc2ccccc2c1", 5),
            ("c1ccc2[nH]ccc2c1", 4),
            ("O=c1cc[nH]cc1", 3),
            ("c1cc[n+](C)cc1", 3),
            ("c1ccccc1c1ccccc1", 6),
        ] {
            let m = parse_smiles(s).unwrap();
            let k = kekulize(&m).unwrap();
            assert_eq!(doubles(&k), d, "{s}");
            for i in 0..m.atom_count() {
                assert_eq!(k.total_hydrogens(i), m.total_hydrogens(i), "{s} atom {i}");
            }
            k.check_invariants().unwrap();
        }
    }

    #[test]
    fn impossible_system() {
        assert!(matches!(
            kekulize(&parse_smiles("c1cccc1").unwrap()),
            Err(SmilesError::Kekulize { .. })
        ));
    }
}
