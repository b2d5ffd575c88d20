#![allow(dead_code)]

pub mod oracles;

use molseq::smiles::{BondOrder, Molecule};
use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;

pub fn corpus() -> Vec<String> {
    include_str!("../fixtures/corpus.smi")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

type NodeLabel = (u8, bool, i8, u8, u16);

fn to_graph(mol: &Molecule) -> UnGraph<NodeLabel, BondOrder> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            g.add_node((
                a.element.atomic_number(),
                a.aromatic,
                a.formal_charge,
                mol.total_hydrogens(i),
                a.isotope.unwrap_or(0),
            ))
        })
        .collect();
    for b in mol.bonds() {
        g.add_edge(nodes[b.a], nodes[b.b], b.order);
    }
    g
}

/// Labeled graph isomorphism (element, aromaticity, charge, hydrogens,
/// isotope, bond order), computed by VF2 independently of canonical ranks.
pub fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    a.atom_count() == b.atom_count()
        && a.bond_count() == b.bond_count()
        && is_isomorphic_matching(&to_graph(a), &to_graph(b), |x, y| x == y, |x, y| x == y)
}

fn heavy_graph(mol: &Molecule) -> UnGraph<(u8, i8, u8, u16), BondOrder> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            g.add_node((
                a.element.atomic_number(),
                a.formal_charge,
                mol.total_hydrogens(i),
                a.isotope.unwrap_or(0),
            ))
        })
        .collect();
    for b in mol.bonds() {
        g.add_edge(nodes[b.a], nodes[b.b], b.order);
    }
    g
}

/// Isomorphism between a molecule and a Kekulé form of it: atoms must
/// agree on element, charge, hydrogens and isotope; aromatic bonds may map
/// to single or double bonds, every other bond must keep its order.
pub fn kekule_isomorphic(original: &Molecule, kekule: &Molecule) -> bool {
    if original.atom_count() != kekule.atom_count() || original.bond_count() != kekule.bond_count()
    {
        return false;
    }
    if kekule.atoms().iter().any(|a| a.aromatic)
        || kekule
            .bonds()
            .iter()
            .any(|b| b.order == BondOrder::Aromatic)
    {
        return false;
    }
    is_isomorphic_matching(
        &heavy_graph(original),
        &heavy_graph(kekule),
        |x, y| x == y,
        |x, y| match x {
            BondOrder::Aromatic => matches!(y, BondOrder::Single | BondOrder::Double),
            _ => x == y,
        },
    )
}

/// Fixture corpus as a labeled table whose tasks are structural facts,
/// so the labels are learnable from the string alone.
pub fn synthetic_table() -> molseq::experiment::DatasetTable {
    use molseq::smiles::{parse_smiles, Element};
    let tasks = ["nitrogen", "aromatic", "halogen", "oxygen"];
    let smiles = corpus();
    let labels = smiles
        .iter()
        .map(|s| {
            let m = parse_smiles(s).unwrap();
            let has = |f: &dyn Fn(&molseq::smiles::Atom) -> bool| m.atoms().iter().any(f) as u8;
            vec![
                has(&|a| a.element == Element::N),
                has(&|a| a.aromatic),
                has(&|a| {
                    matches!(
                        a.element,
                        Element::F | Element::Cl | Element::Br | Element::I
                    )
                }),
                has(&|a| a.element == Element::O),
            ]
        })
        .collect();
    let mut columns = vec!["smiles".to_string()];
    columns.extend(tasks.iter().map(|t| t.to_string()));
    molseq::experiment::DatasetTable {
        columns,
        smiles,
        labels,
        rejected: Vec::new(),
    }
}
