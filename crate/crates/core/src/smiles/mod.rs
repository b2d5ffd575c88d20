//! SMILES grammar: parsing, writing, canonical form, random enumeration
//! and augmentation over the organic subset.

mod canon;
mod enumerate;
mod kekule;
mod molecule;
mod parse;
mod write;

pub use canon::{canonical_ranks, canonical_smiles, canonicalize};
pub use enumerate::{augment, enumerate_random, random_smiles};
pub use kekule::kekulize;
pub use molecule::{
    implicit_hydrogens, Atom, Bond, BondOrder, BondStereo, Chirality, Element, GraphError, Molecule,
};
pub use parse::parse_smiles;
pub use write::write_smiles;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unbalanced parenthesis at offset {offset}")]
    UnbalancedParen { offset: usize },
    #[error("empty branch at offset {offset}")]
    MalformedBranch { offset: usize },
    #[error("unpaired ring closure {number} at offset {offset}")]
    UnpairedRing { offset: usize, number: u16 },
    #[error("malformed ring number at offset {offset}")]
    MalformedRingNumber { offset: usize },
    #[error("ring closure bonds an atom to itself at offset {offset}")]
    RingSelfBond { offset: usize },
    #[error("ring closure bond symbols disagree at offset {offset}")]
    ConflictingRingBond { offset: usize },
    #[error("duplicate bond at offset {offset}")]
    DuplicateBond { offset: usize },
    #[error("unknown element '{symbol}' at offset {offset}")]
    UnknownElement { offset: usize, symbol: String },
    #[error("valence exceeded for {element} at offset {offset}")]
    Valence { offset: usize, element: Element },
    #[error("malformed bracket atom at offset {offset}: {reason}")]
    MalformedBracket { offset: usize, reason: &'static str },
    #[error("bond symbol not between two atoms at offset {offset}")]
    UnexpectedBond { offset: usize },
    #[error("unexpected character '{ch}' at offset {offset}")]
    UnexpectedChar { offset: usize, ch: char },
    #[error("aromatic system cannot be kekulized (atom {atom})")]
    Kekulize { atom: usize },
    #[error("invalid traversal: {0}")]
    InvalidTraversal(String),
    #[error("n_keep ({n_keep}) exceeds n_generate ({n_generate})")]
    InvalidAugment { n_generate: usize, n_keep: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}
