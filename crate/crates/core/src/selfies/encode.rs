use crate::smiles::{canonical_ranks, implicit_hydrogens, kekulize, Molecule};

use super::token::{index_token, AtomSymbol, SelfiesToken};
use super::SelfiesError;

/// Index tokens for `value` using the fewest base-16 digits (at most 3).
fn index_tokens(value: usize) -> Result<(u8, Vec<SelfiesToken>), SelfiesError> {
    let size = match value {
        0..=0xF => 1,
        0x10..=0xFF => 2,
        0x100..=0xFFF => 3,
        _ => return Err(SelfiesError::SpanTooLarge { span: value }),
    };
    let digits = (0..size)
        .rev()
        .map(|k| index_token(((value >> (4 * k)) & 0xF) as u16))
        .collect();
    Ok((size, digits))
}

fn atom_symbol(mol: &Molecule, i: usize) -> AtomSymbol {
    let atom = mol.atom(i);
    let h = mol.total_hydrogens(i);
    let implied = implicit_hydrogens(atom.element, false, mol.bond_valence_sum(i));
    if atom.formal_charge == 0 && atom.isotope.is_none() && implied == Some(h) {
        AtomSymbol::plain(atom.element)
    } else {
        AtomSymbol {
            element: atom.element,
            charge: atom.formal_charge,
            hydrogens: Some(h),
            isotope: atom.isotope,
        }
    }
}

struct Tree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Position of each atom in token order.
    position: Vec<usize>,
    roots: Vec<usize>,
}

/// Depth-first spanning forest following ascending atom index, which is
/// also the order atoms are emitted in.
fn spanning_forest(mol: &Molecule) -> Tree {
    let n = mol.atom_count();
    let mut tree = Tree {
        parent: vec![None; n],
        children: vec![Vec::new(); n],
        position: vec![usize::MAX; n],
        roots: Vec::new(),
    };
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut nb: Vec<usize> = mol.neighbors(i).iter().map(|&(j, _)| j).collect();
            nb.sort_unstable();
            nb
        })
        .collect();
    let mut counter = 0;
    for root in 0..n {
        if tree.position[root] != usize::MAX {
            continue;
        }
        tree.roots.push(root);
        tree.position[root] = counter;
        counter += 1;
        let mut stack = vec![(root, 0usize)];
        while let Some(top) = stack.last_mut() {
            let (x, k) = *top;
            if k == neighbors[x].len() {
                stack.pop();
                continue;
            }
            top.1 += 1;
            let y = neighbors[x][k];
            if tree.position[y] == usize::MAX {
                tree.position[y] = counter;
                counter += 1;
                tree.parent[y] = Some(x);
                tree.children[x].push(y);
                stack.push((y, 0));
            }
        }
    }
    tree
}

fn bond_order(mol: &Molecule, x: usize, y: usize) -> u8 {
    let b = mol.bond_between(x, y).expect("tree edge");
    mol.bond(b).order.valence()
}

fn emit_chain(
    mol: &Molecule,
    tree: &Tree,
    start: usize,
    out: &mut Vec<SelfiesToken>,
) -> Result<(), SelfiesError> {
    let mut x = start;
    loop {
        let bond = tree.parent[x].map_or(1, |p| bond_order(mol, p, x));
        out.push(SelfiesToken::atom(bond, atom_symbol(mol, x)));

        // Closures back to atoms already emitted, nearest first.
        let mut back: Vec<usize> = mol
            .neighbors(x)
            .iter()
            .map(|&(y, _)| y)
            .filter(|&y| tree.position[y] < tree.position[x] && Some(y) != tree.parent[x])
            .collect();
        back.sort_by_key(|&y| std::cmp::Reverse(tree.position[y]));
        for y in back {
            let (size, digits) = index_tokens(tree.position[x] - tree.position[y] - 1)?;
            out.push(SelfiesToken::Ring {
                bond: bond_order(mol, x, y),
                size,
            });
            out.extend(digits);
        }

        let Some((&last, branches)) = tree.children[x].split_last() else {
            return Ok(());
        };
        for &child in branches {
            let mut sub = Vec::new();
            emit_chain(mol, tree, child, &mut sub)?;
            let (size, digits) = index_tokens(sub.len() - 1)?;
            out.push(SelfiesToken::Branch {
                bond: bond_order(mol, x, child),
                size,
            });
            out.extend(digits);
            out.extend(sub);
        }
        x = last;
    }
}

/// Encodes a kekulized, stereo-free molecule following its atom order.
fn encode_kekule(mol: &Molecule) -> Result<Vec<SelfiesToken>, SelfiesError> {
    let tree = spanning_forest(mol);
    let mut out = Vec::new();
    for (k, &root) in tree.roots.iter().enumerate() {
        if k > 0 {
            out.push(SelfiesToken::Dot);
        }
        emit_chain(mol, &tree, root, &mut out)?;
    }
    Ok(out)
}

/// Canonical encoding: atoms are relabeled by canonical rank before
/// kekulization and traversal, so every spelling of a molecule yields the
/// same tokens. Stereochemistry is not represented.
pub fn encode_selfies(mol: &Molecule) -> Result<Vec<SelfiesToken>, SelfiesError> {
    let plain = mol.without_stereo();
    let ranked = plain.permuted(&canonical_ranks(&plain));
    encode_kekule(&kekulize(&ranked)?)
}

/// Encoding that keeps the molecule's own atom order, so distinct SMILES
/// spellings of one molecule give distinct token strings. The Kekulé
/// assignment is still chosen in canonical order, so all spellings decode
/// to the same bond orders.
pub fn encode_selfies_in_order(mol: &Molecule) -> Result<Vec<SelfiesToken>, SelfiesError> {
    let plain = mol.without_stereo();
    let ranks = canonical_ranks(&plain);
    let mut back = vec![0; ranks.len()];
    for (old, &new) in ranks.iter().enumerate() {
        back[new] = old;
    }
    let kek = kekulize(&plain.permuted(&ranks))?.permuted(&back);
    encode_kekule(&kek)
}
