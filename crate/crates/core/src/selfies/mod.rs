//! SELFIES: a bracket-token molecular language in which every token string
//! derives a valid molecule.
//!
//! Bond orders requested by a token are clipped to the valence still free
//! on both ends, branch and ring tokens read their length from the index
//! tokens that follow, and anything that cannot be honored is skipped.

mod decode;
mod encode;
mod token;

use std::collections::BTreeSet;

pub use decode::decode_selfies;
pub use encode::{encode_selfies, encode_selfies_in_order};
pub use token::{index_alphabet, parse_tokens, split_tokens, AtomSymbol, SelfiesToken};

use crate::smiles::{canonical_smiles, parse_smiles, Element, SmilesError};
use crate::tokenize::{PAD, UNK};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelfiesError {
    #[error("unbalanced bracket at offset {offset}")]
    UnbalancedBracket { offset: usize },
    #[error("unknown SELFIES token '{token}' at offset {offset}")]
    UnknownToken { offset: usize, token: String },
    #[error("branch or ring span {span} needs more than three index symbols")]
    SpanTooLarge { span: usize },
    #[error(transparent)]
    Smiles(#[from] SmilesError),
}

pub fn to_text(tokens: &[SelfiesToken]) -> String {
    tokens.iter().map(ToString::to_string).collect()
}

/// Canonical SELFIES of a SMILES string.
pub fn smiles_to_selfies(smiles: &str) -> Result<String, SelfiesError> {
    Ok(to_text(&encode_selfies(&parse_smiles(smiles)?)?))
}

/// SELFIES that follows the atom order of the given spelling.
pub fn smiles_to_selfies_in_order(smiles: &str) -> Result<String, SelfiesError> {
    Ok(to_text(&encode_selfies_in_order(&parse_smiles(smiles)?)?))
}

/// Decodes a SELFIES string to canonical SMILES. Only malformed token
/// text can fail; every well-formed token sequence decodes.
pub fn selfies_to_smiles(selfies: &str) -> Result<String, SelfiesError> {
    Ok(canonical_smiles(&decode_selfies(&parse_tokens(selfies)?)))
}

/// Sorted, deduplicated tokens of a corpus, preceded by the reserved
/// padding and unknown specials.
pub fn selfies_alphabet<S: AsRef<str>>(corpus: &[S]) -> Result<Vec<String>, SelfiesError> {
    let mut set = BTreeSet::new();
    for s in corpus {
        for t in split_tokens(s.as_ref())? {
            set.insert(t.to_string());
        }
    }
    let mut out = vec![PAD.to_string(), UNK.to_string()];
    out.extend(set);
    Ok(out)
}

/// Generic tokens for random generation: plain and common charged atoms
/// with every bond prefix, branches, rings, no-op and fragment separator.
pub fn robust_alphabet() -> Vec<SelfiesToken> {
    let mut out = Vec::new();
    let mut atoms: Vec<AtomSymbol> = Element::ALL.iter().map(|&e| AtomSymbol::plain(e)).collect();
    for (e, q, h) in [
        (Element::N, 1, 0),
        (Element::N, 1, 1),
        (Element::N, -1, 0),
        (Element::O, -1, 0),
        (Element::O, 1, 0),
        (Element::C, -1, 0),
        (Element::C, 0, 0),
        (Element::S, 1, 0),
        (Element::B, -1, 0),
        (Element::P, 1, 0),
    ] {
        atoms.push(AtomSymbol {
            element: e,
            charge: q,
            hydrogens: Some(h),
            isotope: None,
        });
    }
    for bond in 1..=3 {
        for &atom in &atoms {
            out.push(SelfiesToken::Atom { bond, atom });
        }
        for size in 1..=3 {
            out.push(SelfiesToken::Branch { bond, size });
            out.push(SelfiesToken::Ring { bond, size });
        }
    }
    out.push(SelfiesToken::Nop);
    out.push(SelfiesToken::Dot);
    out
}
