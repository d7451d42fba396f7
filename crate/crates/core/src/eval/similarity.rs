use std::path::Path;

use crate::error::{Error, Result};

use super::EmbeddingSet;

/// Cosine similarity; zero vectors (possible after aggressive
/// sparsification) compare as 0 so evaluation never aborts mid-benchmark.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (x, y) in u.iter().zip(v.iter()) {
        dot += x * y;
        nu += x * x;
        nv += y * y;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

/// Average ranks (1-based); ties receive the mean of the ranks they span.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("finite values"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of tie-averaged
/// ranks. A constant list has no ranking and is rejected.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::validation("need at least 2 observations"));
    }
    if xs.iter().chain(ys.iter()).any(|x| !x.is_finite()) {
        return Err(Error::validation("scores must be finite"));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in rx.iter().zip(ry.iter()) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::DegenerateRanking);
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Word pairs with human similarity judgements.
#[derive(Debug, Clone)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    pub fn new(name: impl Into<String>, pairs: Vec<(String, String, f64)>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::validation("similarity dataset needs at least 2 pairs"));
        }
        if pairs.iter().any(|p| !p.2.is_finite()) {
            return Err(Error::validation("human scores must be finite"));
        }
        Ok(SimilarityDataset {
            name: name.into(),
            pairs,
        })
    }

    /// Loads `word1<TAB>word2<TAB>score` lines; `#` lines are comments.
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [w1, w2, score] = fields[..] else {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    "expected word1<TAB>word2<TAB>score",
                ));
            };
            let score: f64 = score.trim().parse().map_err(|_| {
                Error::parse(path, lineno + 1, format!("bad score {score:?}"))
            })?;
            pairs.push((w1.to_string(), w2.to_string(), score));
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "similarity".to_string());
        SimilarityDataset::new(name, pairs)
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SimilarityResult {
    pub rho: f64,
    pub evaluated_pairs: usize,
    pub total_pairs: usize,
}

/// Ranks cosine similarities against human scores. Pairs with either
/// word missing are skipped and show up only in the counts.
pub fn eval_word_similarity(
    emb: &EmbeddingSet,
    dataset: &SimilarityDataset,
) -> Result<SimilarityResult> {
    let mut human = Vec::new();
    let mut model = Vec::new();
    for (w1, w2, score) in &dataset.pairs {
        let (Some(u), Some(v)) = (emb.lookup(w1), emb.lookup(w2)) else {
            continue;
        };
        human.push(*score);
        model.push(cosine(u, v));
    }
    if human.len() < 2 {
        return Err(Error::validation(format!(
            "dataset {}: fewer than 2 evaluable pairs ({} of {})",
            dataset.name,
            human.len(),
            dataset.pairs.len()
        )));
    }
    Ok(SimilarityResult {
        rho: spearman(&model, &human)?,
        evaluated_pairs: human.len(),
        total_pairs: dataset.pairs.len(),
    })
}
