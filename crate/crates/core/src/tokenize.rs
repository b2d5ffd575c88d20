//! Tokenizers and corpus vocabularies.
//!
//! SMILES are split one token per character (so `Cl` becomes `C`, `l`);
//! SELFIES are split one token per bracketed unit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::selfies::{split_tokens, SelfiesError};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

pub fn tokenize_smiles(text: &str) -> Vec<String> {
    text.chars().map(String::from).collect()
}

pub fn tokenize_selfies(text: &str) -> Result<Vec<String>, SelfiesError> {
    Ok(split_tokens(text)?.into_iter().map(String::from).collect())
}

/// Token/index bijection with `<pad>` at 0 and `<unk>` at 1, followed by
/// the corpus tokens in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>]) -> Vocab {
        let set: BTreeSet<&str> = corpus
            .iter()
            .flat_map(|seq| seq.iter().map(AsRef::as_ref))
            .filter(|t| *t != PAD && *t != UNK)
            .collect();
        let mut tokens = vec![PAD.to_string(), UNK.to_string()];
        tokens.extend(set.into_iter().map(String::from));
        Vocab::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Vocab {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t.as_ref())).collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .map(|&i| {
                self.tokens
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| UNK.to_string())
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.index).expect("string map serializes")
    }

    /// Parses the `{token: index}` object written by [`Vocab::to_json`].
    pub fn from_json(text: &str) -> Result<Vocab, String> {
        let map: BTreeMap<String, usize> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut tokens = vec![String::new(); map.len()];
        for (t, &i) in &map {
            match tokens.get_mut(i) {
                Some(slot) if slot.is_empty() => *slot = t.clone(),
                _ => return Err(format!("index {i} is duplicated or out of range")),
            }
        }
        if tokens.first().map(String::as_str) != Some(PAD)
            || tokens.get(1).map(String::as_str) != Some(UNK)
        {
            return Err("specials must sit at indices 0 and 1".into());
        }
        Ok(Vocab::from_tokens(tokens))
    }

    /// Hex SHA-256 over the tokens in index order; ties checkpoints to
    /// the vocabulary they were trained with.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Serialize for Vocab {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.index.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocab {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Vocab, D::Error> {
        let map = BTreeMap::<String, usize>::deserialize(d)?;
        let text = serde_json::to_string(&map).map_err(serde::de::Error::custom)?;
        Vocab::from_json(&text).map_err(serde::de::Error::custom)
    }
}

/// Right-pads sequences with [`PAD_INDEX`] to the longest length and
/// returns the true lengths alongside.
pub fn pad_batch(seqs: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let width = seqs.iter().map(Vec::len).max().unwrap_or(0);
    let lengths = seqs.iter().map(Vec::len).collect();
    let padded = seqs
        .iter()
        .map(|s| {
            let mut row = s.clone();
            row.resize(width, PAD_INDEX);
            row
        })
        .collect();
    (padded, lengths)
}
