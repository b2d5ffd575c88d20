//! Molecular string pipeline for side-effect classification.
//!
//! The crate covers the full path from raw SMILES to a test ROC-AUC:
//!
//! * [`smiles`]: parsing, canonical form, random enumeration, augmentation
//! * [`selfies`]: robust bracket-token encoding with a total decoder
//! * [`tokenize`]: character/bracket tokenizers and vocabularies
//! * [`qsim`]: statevector simulation of the angle-encoded entangler kernel
//! * [`model`]: classical LSTM and quantum-kernel LSTM with exact gradients
//! * [`train`]: optimizers, early stopping, learning-rate schedule
//! * [`metrics`]: ROC curve, ROC-AUC, aggregation
//! * [`experiment`]: dataset ingestion, setups, hyperparameter search, reports

pub mod experiment;
pub mod metrics;
pub mod model;
pub mod qsim;
pub mod selfies;
pub mod smiles;
pub mod tokenize;
pub mod train;
