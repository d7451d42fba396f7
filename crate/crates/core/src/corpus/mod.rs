//! Corpus ingestion: vocabulary construction, windowed co-occurrence
//! counting, and the signed PMI matrix.
//!
//! The corpus is plain UTF-8 text, pre-tokenized, one sentence per line.
//! Tokens are lowercased (configurable), numeric tokens collapse onto a
//! reserved number token, and tokens rarer than `min_count` collapse onto
//! a reserved rare token.

mod cooccur;
mod pmi;
mod vocab;

pub use cooccur::{count_cooccurrences, CooccurrencePairs};
pub use pmi::{compute_pmi, PmiEntry, PmiMatrix};
pub use vocab::{build_vocabulary, TokenNormalizer, Vocabulary, NUMBER_TOKEN, RARE_TOKEN};
