//! Benchmark evaluation of learned word representations: similarity
//! ranking, analogy offsets, sentence completion, and sentiment
//! classification, plus the shared cosine/rank machinery.
//!
//! All evaluations are read-only over an [`EmbeddingSet`]; benchmark
//! words pass through the same normalization as corpus ingestion, and
//! out-of-vocabulary items are reported next to every score.

mod analogy;
mod completion;
mod embeddings;
mod sentiment;
mod similarity;

pub use analogy::{eval_analogies, solve_analogy, AnalogyDataset, AnalogyItem, AnalogyResult};
pub use completion::{
    eval_sentence_completion, CompletionDataset, CompletionItem, CompletionResult,
};
pub use embeddings::{EmbeddingSet, VectorFormat};
pub use sentiment::{
    eval_sentiment, sentence_features, train_logreg, LogisticModel, SentimentDataset,
    SentimentExample, SentimentResult, DEFAULT_L2_GRID,
};
pub use similarity::{cosine, eval_word_similarity, spearman, SimilarityDataset, SimilarityResult};
