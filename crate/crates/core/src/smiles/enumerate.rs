use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::molecule::Molecule;
use super::parse::parse_smiles;
use super::write::write_traversal;
use super::SmilesError;

/// Random spelling of an already parsed molecule.
pub fn random_smiles(mol: &Molecule, rng: &mut impl Rng) -> String {
    let labels = mol.components();
    let n_comp = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    members.shuffle(rng);
    let starts: Vec<usize> = members
        .iter()
        .map(|atoms| atoms[rng.gen_range(0..atoms.len())])
        .collect();
    let order: Vec<Vec<usize>> = (0..mol.atom_count())
        .map(|i| {
            let mut nb: Vec<usize> = mol.neighbors(i).iter().map(|&(n, _)| n).collect();
            nb.shuffle(rng);
            nb
        })
        .collect();
    write_traversal(mol, &starts, &order)
}

/// A random valid spelling of `smiles`, determined by `seed`.
pub fn enumerate_random(smiles: &str, seed: u64) -> Result<String, SmilesError> {
    let mol = parse_smiles(smiles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_smiles(&mol, &mut rng))
}

/// Generates `n_generate` random spellings, drops duplicates, and keeps the
/// `n_keep` shortest (ties broken lexicographically).
pub fn augment(
    smiles: &str,
    n_generate: usize,
    n_keep: usize,
    seed: u64,
) -> Result<Vec<String>, SmilesError> {
    if n_keep > n_generate {
        return Err(SmilesError::InvalidAugment { n_generate, n_keep });
    }
    let mol = parse_smiles(smiles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = (0..n_generate)
        .map(|_| random_smiles(&mol, &mut rng))
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out.dedup();
    out.truncate(n_keep);
    Ok(out)
}
