//! Turns a table into token sequences for one input representation:
//! canonicalize, split, augment the training rows, optionally convert to
//! SELFIES, tokenize, and index with a training-only vocabulary.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetTable, ExperimentError};
use crate::selfies::{selfies_to_smiles, smiles_to_selfies_in_order};
use crate::smiles::{augment, canonicalize};
use crate::tokenize::{tokenize_selfies, tokenize_smiles, Vocab, PAD, UNK};
use crate::train::{split_random, Example, Split, SplitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Smiles,
    AugSmiles,
    Selfies,
    AugSelfies,
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::Smiles,
        Representation::AugSmiles,
        Representation::Selfies,
        Representation::AugSelfies,
    ];

    pub fn is_augmented(self) -> bool {
        matches!(self, Representation::AugSmiles | Representation::AugSelfies)
    }

    pub fn is_selfies(self) -> bool {
        matches!(self, Representation::Selfies | Representation::AugSelfies)
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::Smiles => "smiles",
            Representation::AugSmiles => "aug_smiles",
            Representation::Selfies => "selfies",
            Representation::AugSelfies => "aug_selfies",
        }
    }

    /// Human label as used in report rows.
    pub fn label(self) -> &'static str {
        match self {
            Representation::Smiles => "SMILES",
            Representation::AugSmiles => "Augmented SMILES",
            Representation::Selfies => "SELFIES",
            Representation::AugSelfies => "Augmented SELFIES",
        }
    }

    pub fn tokenize(self, text: &str) -> Result<Vec<String>, ExperimentError> {
        if self.is_selfies() {
            tokenize_selfies(text).map_err(|e| ExperimentError::Pipeline(format!("{text}: {e}")))
        } else {
            Ok(tokenize_smiles(text))
        }
    }

    /// Canonical identity of a model input string: the canonical SMILES for
    /// SMILES inputs, the canonical SMILES of the decoded molecule for
    /// SELFIES inputs.
    pub fn identity(self, text: &str) -> Result<String, ExperimentError> {
        let r = if self.is_selfies() {
            selfies_to_smiles(text).map_err(|e| e.to_string())
        } else {
            canonicalize(text).map_err(|e| e.to_string())
        };
        r.map_err(|e| ExperimentError::Pipeline(format!("{text}: {e}")))
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == key)
            .ok_or_else(|| ExperimentError::Pipeline(format!("unknown setup '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub n_generate: usize,
    pub n_keep: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            n_generate: 20,
            n_keep: 5,
        }
    }
}

/// One model input: the string fed to the tokenizer and its indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Source row in the table.
    pub row: usize,
    pub text: String,
    pub tokens: Vec<usize>,
    pub augmented: bool,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub representation: Representation,
    pub split: Split,
    pub vocab: Vocab,
    /// Canonical SMILES per table row.
    pub canonical: Vec<String>,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Examples of one task, labels taken from each sample's source row.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

pub fn prepare_setup(
    table: &DatasetTable,
    representation: Representation,
    split_seed: u64,
    aug: &AugmentSpec,
) -> Result<Prepared, ExperimentError> {
    let canonical = table
        .smiles
        .iter()
        .enumerate()
        .map(|(row, s)| {
            canonicalize(s).map_err(|e| ExperimentError::Molecule {
                row: row + 1,
                smiles: s.clone(),
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let split = split_random(table.len(), &SplitSpec::new(split_seed))?;

    // One augmentation seed per training row, drawn in split order.
    let mut seeds = ChaCha8Rng::seed_from_u64(split_seed ^ 0x5eed_a06e);
    let mut train_smiles = Vec::new();
    for &row in &split.train {
        let seed: u64 = seeds.gen();
        train_smiles.push((row, canonical[row].clone(), false));
        if representation.is_augmented() {
            let extra =
                augment(&canonical[row], aug.n_generate, aug.n_keep, seed).map_err(|e| {
                    ExperimentError::Molecule {
                        row: row + 1,
                        smiles: canonical[row].clone(),
                        reason: e.to_string(),
                    }
                })?;
            for s in extra.into_iter().filter(|s| *s != canonical[row]) {
                train_smiles.push((row, s, true));
            }
        }
    }
    let held = |rows: &[usize]| -> Vec<(usize, String, bool)> {
        rows.iter()
            .map(|&r| (r, canonical[r].clone(), false))
            .collect()
    };

    // (row, text, augmented, tokens) before indexing against the vocabulary.
    type Tokenized = (usize, String, bool, Vec<String>);
    let convert = |items: Vec<(usize, String, bool)>| -> Result<Vec<Tokenized>, ExperimentError> {
        items
            .into_iter()
            .map(|(row, smiles, augmented)| {
                let text = if representation.is_selfies() {
                    smiles_to_selfies_in_order(&smiles).map_err(|e| ExperimentError::Molecule {
                        row: row + 1,
                        smiles: smiles.clone(),
                        reason: e.to_string(),
                    })?
                } else {
                    smiles
                };
                let toks = representation.tokenize(&text)?;
                Ok((row, text, augmented, toks))
            })
            .collect()
    };
    let train = convert(train_smiles)?;
    let val = convert(held(&split.val))?;
    let test = convert(held(&split.test))?;

    let corpus: Vec<Vec<&str>> = train
        .iter()
        .map(|t| t.3.iter().map(String::as_str).collect())
        .collect();
    let vocab = Vocab::build(&corpus);
    let index = |items: Vec<Tokenized>| -> Vec<Sample> {
        items
            .into_iter()
            .map(|(row, text, augmented, toks)| Sample {
                row,
                tokens: vocab.encode(&toks),
                text,
                augmented,
            })
            .collect()
    };
    Ok(Prepared {
        representation,
        train: index(train),
        val: index(val),
        test: index(test),
        split,
        vocab,
        canonical,
    })
}

impl Prepared {
    pub fn task_data(&self, table: &DatasetTable, task: usize) -> TaskData {
        let ex = |s: &[Sample]| -> Vec<Example> {
            s.iter()
                .map(|x| Example {
                    tokens: x.tokens.clone(),
                    labels: vec![table.labels[x.row][task] as f64],
                })
                .collect()
        };
        TaskData {
            train: ex(&self.train),
            val: ex(&self.val),
            test: ex(&self.test),
        }
    }

    /// Checks the leakage guards:
    /// every augmented string is a spelling of its own source molecule;
    /// no augmented string is a held-out molecule (unless the raw data
    /// itself repeats that molecule in the training split);
    /// held-out inputs are exactly the unaugmented split rows;
    /// the vocabulary is exactly the training tokens.
    pub fn check_leakage(&self) -> Result<(), ExperimentError> {
        let leak = |m: String| Err(ExperimentError::Leakage(m));
        let repr = self.representation;
        let mut source_id = std::collections::HashMap::new();
        let mut train_orig = HashSet::new();
        for s in self.train.iter().filter(|s| !s.augmented) {
            let id = repr.identity(&s.text)?;
            source_id.insert(s.row, id.clone());
            train_orig.insert(id);
        }
        let mut held = HashSet::new();
        for (part, rows) in [(&self.val, &self.split.val), (&self.test, &self.split.test)] {
            if part.len() != rows.len()
                || part
                    .iter()
                    .zip(rows.iter())
                    .any(|(s, &r)| s.augmented || s.row != r)
            {
                return leak("held-out inputs differ from the split rows".into());
            }
            for s in part {
                held.insert(repr.identity(&s.text)?);
            }
        }
        for s in self.train.iter().filter(|s| s.augmented) {
            let id = repr.identity(&s.text)?;
            if source_id.get(&s.row) != Some(&id) {
                return leak(format!(
                    "augmented '{}' is not a spelling of row {}",
                    s.text,
                    s.row + 1
                ));
            }
            if held.contains(&id) && !train_orig.contains(&id) {
                return leak(format!(
                    "augmented '{}' matches a held-out molecule",
                    s.text
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for s in &self.train {
            seen.extend(repr.tokenize(&s.text)?);
        }
        let vocab: BTreeSet<String> = self
            .vocab
            .tokens()
            .iter()
            .filter(|t| *t != PAD && *t != UNK)
            .cloned()
            .collect();
        if vocab != seen {
            return leak("vocabulary differs from the training tokens".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::LoadOptions;
    use crate::tokenize::UNK_INDEX;

    fn table() -> DatasetTable {
        let mols = [
            "CCO",
            "c1ccccc1O",
            "CC(=O)O",
            "CCN(CC)CC",
            "c1ccncc1",
            "OC1CCCCC1",
            "CC(C)Cl",
            "C=CC#N",
            "O=C(N)c1ccccc1",
            "CS(=O)(=O)C",
            "C1CC1Br",
            "FC(F)(F)c1ccccc1",
            "CCCCCCCC",
            "NCCO",
            "c1ccc2ccccc2c1",
            "[NH4+].[Cl-]",
        ];
        let mut text = String::from("smiles");
        for t in 0..27 {
            text.push_str(&format!(",t{t}"));
        }
        text.push('\n');
        for (i, m) in mols.iter().enumerate() {
            text.push_str(&format!("\"{m}\""));
            for t in 0..27 {
                text.push_str(if (i + t) % 3 == 0 { ",1" } else { ",0" });
            }
            text.push('\n');
        }
        DatasetTable::from_reader(text.as_bytes(), LoadOptions::default()).unwrap()
    }

    #[test]
    fn names_parse() {
        assert_eq!(
            "aug-selfies".parse::<Representation>().unwrap(),
            Representation::AugSelfies
        );
        assert_eq!(
            "aug_smiles".parse::<Representation>().unwrap(),
            Representation::AugSmiles
        );
        assert!("other".parse::<Representation>().is_err());
    }

    #[test]
    fn every_setup_respects_the_guards() {
        let t = table();
        for repr in Representation::ALL {
            let p = prepare_setup(&t, repr, 4, &AugmentSpec::default()).unwrap();
            p.check_leakage().unwrap();
            assert_eq!(p.val.len(), p.split.val.len());
            assert_eq!(p.test.len(), p.split.test.len());
            let n_orig = p.train.iter().filter(|s| !s.augmented).count();
            assert_eq!(n_orig, p.split.train.len());
            assert!(p.train.len() <= 6 * n_orig);
            if repr.is_augmented() {
                assert!(p.train.len() > 2 * n_orig, "{repr}: {}", p.train.len());
            } else {
                assert_eq!(p.train.len(), n_orig);
            }
            if repr.is_selfies() {
                assert!(p.train.iter().all(|s| s.text.starts_with('[')));
            }
        }
    }

    #[test]
    fn unseen_held_out_tokens_map_to_unk() {
        let t = table();
        let p = prepare_setup(&t, Representation::Smiles, 4, &AugmentSpec::default()).unwrap();
        for s in p.val.iter().chain(&p.test) {
            for (tok, &i) in tokenize_smiles(&s.text).iter().zip(&s.tokens) {
                assert_eq!(i == UNK_INDEX, !p.vocab.contains(tok));
            }
        }
    }

    #[test]
    fn guard_catches_planted_leak() {
        let t = table();
        let mut p =
            prepare_setup(&t, Representation::AugSmiles, 4, &AugmentSpec::default()).unwrap();
        let victim = p.val[0].clone();
        p.train.push(Sample {
            row: p.train[0].row,
            augmented: true,
            ..victim
        });
        assert!(matches!(
            p.check_leakage(),
            Err(ExperimentError::Leakage(_))
        ));
    }

    #[test]
    fn task_labels_follow_source_rows() {
        let t = table();
        let p = prepare_setup(&t, Representation::AugSelfies, 2, &AugmentSpec::default()).unwrap();
        let d = p.task_data(&t, 5);
        for (s, e) in p.train.iter().zip(&d.train) {
            assert_eq!(e.labels[0], t.labels[s.row][5] as f64);
        }
        assert_eq!(d.test.len(), p.test.len());
    }

    #[test]
    fn deterministic() {
        let t = table();
        let a = prepare_setup(&t, Representation::AugSelfies, 8, &AugmentSpec::default()).unwrap();
        let b = prepare_setup(&t, Representation::AugSelfies, 8, &AugmentSpec::default()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.vocab, b.vocab);
    }
}
