//! Canonical atom ranking and the canonical SMILES form built on it.
//!
//! Ranks come from iterative neighborhood refinement of an atom invariant.
//! Remaining ties are broken by doubling every rank, lowering one atom of
//! the smallest tied class, and refining again. Stereo markers do not take
//! part in ranking.

use super::molecule::{BondOrder, BondStereo, Molecule};
use super::parse::parse_smiles;
use super::write::write_traversal;
use super::SmilesError;

fn initial_invariants(mol: &Molecule) -> Vec<(u8, bool, usize, i8, u8, u16)> {
    (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            (
                a.element.atomic_number(),
                a.aromatic,
                mol.degree(i),
                a.formal_charge,
                mol.total_hydrogens(i),
                a.isotope.unwrap_or(0),
            )
        })
        .collect()
}

/// Dense ranks (0-based) of `keys` in sorted order; equal keys share a rank.
fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut r = 0;
    for k in 0..idx.len() {
        if k > 0 && keys[idx[k]] != keys[idx[k - 1]] {
            r += 1;
        }
        ranks[idx[k]] = r;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    let mut seen = ranks.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Refines `ranks` by the sorted multiset of (neighbor rank, bond order)
/// until the number of classes stops growing. Existing order is kept.
fn refine(mol: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(n, b)| (ranks[n], mol.bond(b).order as u8))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        ranks = next;
        if next_classes == classes {
            return ranks;
        }
        classes = next_classes;
    }
}

/// Canonical rank of every atom: a total order (a permutation of
/// `0..atom_count`) that does not depend on the input atom numbering.
pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    let n = mol.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let mut ranks = refine(mol, dense_ranks(&initial_invariants(mol)));
    while class_count(&ranks) < n {
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = (0..n)
            .find(|&r| counts[r] > 1)
            .expect("a tied class exists");
        let pick = (0..n).find(|&i| ranks[i] == tied).unwrap();
        let mut doubled: Vec<usize> = ranks.iter().map(|&r| 2 * r + 1).collect();
        doubled[pick] -= 1;
        ranks = refine(mol, dense_ranks(&doubled));
    }
    ranks
}

/// Traversal order used for canonical output: each component starts at
/// its lowest-ranked atom and neighbors are visited by ascending rank.
pub(crate) fn ranked_traversal(mol: &Molecule, ranks: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let labels = mol.components();
    let n_comp = labels.iter().max().map_or(0, |m| m + 1);
    let mut best: Vec<Option<usize>> = vec![None; n_comp];
    for (i, &c) in labels.iter().enumerate() {
        if best[c].is_none_or(|b| ranks[i] < ranks[b]) {
            best[c] = Some(i);
        }
    }
    let mut starts: Vec<usize> = best.into_iter().flatten().collect();
    starts.sort_by_key(|&s| ranks[s]);
    let order = (0..mol.atom_count())
        .map(|i| {
            let mut nb: Vec<usize> = mol.neighbors(i).iter().map(|&(n, _)| n).collect();
            nb.sort_by_key(|&n| ranks[n]);
            nb
        })
        .collect();
    (starts, order)
}

/// Canonical SMILES of an already parsed molecule.
pub fn canonical_smiles(mol: &Molecule) -> String {
    let ranks = canonical_ranks(mol);
    let (starts, order) = ranked_traversal(mol, &ranks);
    let mut best = write_traversal(mol, &starts, &order);
    // Inverting every mark of one stereo system leaves the molecule
    // unchanged; systems own disjoint mark positions, so flipping each
    // one independently toward the smaller string reaches the minimum.
    let mut current = mol.clone();
    for system in stereo_systems(mol) {
        let mut flipped = current.clone();
        for &b in &system {
            let bond = flipped.bond_mut(b);
            bond.stereo = bond.stereo.flipped();
        }
        let s = write_traversal(&flipped, &starts, &order);
        if s < best {
            best = s;
            current = flipped;
        }
    }
    best
}

/// Groups directional single bonds that share a double bond into systems.
fn stereo_systems(mol: &Molecule) -> Vec<Vec<usize>> {
    let marked: Vec<usize> = (0..mol.bond_count())
        .filter(|&b| mol.bond(b).stereo != BondStereo::None)
        .collect();
    if marked.is_empty() {
        return Vec::new();
    }
    let mut parent: Vec<usize> = (0..mol.bond_count()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for bond in mol.bonds() {
        if bond.order != BondOrder::Double {
            continue;
        }
        let around: Vec<usize> = [bond.a, bond.b]
            .iter()
            .flat_map(|&x| mol.neighbors(x).iter().map(|&(_, bi)| bi))
            .filter(|&bi| mol.bond(bi).stereo != BondStereo::None)
            .collect();
        for w in around.windows(2) {
            let (ra, rb) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[ra] = rb;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for b in marked {
        let r = find(&mut parent, b);
        groups.entry(r).or_default().push(b);
    }
    groups.into_values().collect()
}

/// Canonical form of a SMILES string. Idempotent, and equal for every
/// spelling of the same molecule.
pub fn canonicalize(smiles: &str) -> Result<String, SmilesError> {
    Ok(canonical_smiles(&parse_smiles(smiles)?))
}
