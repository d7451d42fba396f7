use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::Vocabulary;

/// Sentences per parallel counting shard.
const SHARD_SENTENCES: usize = 8192;

/// Aggregated symmetric-window co-occurrence counts.
///
/// Entries are keyed by (word id, context id), sorted, with no duplicate
/// keys; marginals and the grand total are kept consistent with the
/// entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrencePairs {
    vocab_size: usize,
    /// (word_id, context_id, count), sorted by (word_id, context_id).
    entries: Vec<(u32, u32, u32)>,
    total_pairs: u64,
    word_marginals: Vec<u64>,
    context_marginals: Vec<u64>,
}

impl CooccurrencePairs {
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn entries(&self) -> &[(u32, u32, u32)] {
        &self.entries
    }

    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    pub fn word_marginal(&self, id: u32) -> u64 {
        self.word_marginals[id as usize]
    }

    pub fn context_marginal(&self, id: u32) -> u64 {
        self.context_marginals[id as usize]
    }

    pub fn count(&self, word: u32, context: u32) -> u32 {
        self.entries
            .binary_search_by_key(&(word, context), |&(w, c, _)| (w, c))
            .map(|i| self.entries[i].2)
            .unwrap_or(0)
    }

    fn from_map(map: HashMap<u64, u32>, vocab_size: usize) -> Result<Self> {
        let mut entries: Vec<(u32, u32, u32)> = map
            .into_iter()
            .map(|(key, count)| ((key >> 32) as u32, key as u32, count))
            .collect();
        entries.par_sort_unstable_by_key(|&(w, c, _)| (w, c));

        let mut total = 0u64;
        let mut word_marginals = vec![0u64; vocab_size];
        let mut context_marginals = vec![0u64; vocab_size];
        for &(w, c, count) in &entries {
            total += count as u64;
            word_marginals[w as usize] += count as u64;
            context_marginals[c as usize] += count as u64;
        }
        Ok(CooccurrencePairs {
            vocab_size,
            entries,
            total_pairs: total,
            word_marginals,
            context_marginals,
        })
    }

    /// Writes the matrix as a header `C V NNZ` followed by `c v count`
    /// lines sorted by (c, v).
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let c = self.vocab_size;
        writeln!(w, "{} {} {}", c, c, self.entries.len()).map_err(|e| Error::io(path, e))?;
        let mut lines: Vec<(u32, u32, u32)> = self
            .entries
            .iter()
            .map(|&(word, ctx, count)| (ctx, word, count))
            .collect();
        lines.par_sort_unstable_by_key(|&(c, v, _)| (c, v));
        for (c, v, count) in lines {
            writeln!(w, "{c} {v} {count}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, 1, "bad header, expected: C V NNZ"))?;
        let [c_dim, v_dim, nnz] = dims[..] else {
            return Err(Error::parse(path, 1, "bad header, expected: C V NNZ"));
        };
        if c_dim != v_dim {
            return Err(Error::parse(path, 1, "context and word dimensions differ"));
        }
        let mut entries = Vec::with_capacity(nnz);
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(c), Some(v), Some(count), None) = (it.next(), it.next(), it.next(), it.next())
            else {
                return Err(Error::parse(path, lineno + 1, "expected: c v count"));
            };
            let parse_id = |s: &str, what: &str| -> Result<u32> {
                let id: u32 = s
                    .parse()
                    .map_err(|_| Error::parse(path, lineno + 1, format!("bad {what} {s:?}")))?;
                if id as usize >= c_dim {
                    return Err(Error::parse(path, lineno + 1, format!("{what} {id} out of range")));
                }
                Ok(id)
            };
            let c = parse_id(c, "context id")?;
            let v = parse_id(v, "word id")?;
            let count: u32 = count
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad count {count:?}")))?;
            entries.push((v, c, count));
        }
        if entries.len() != nnz {
            return Err(Error::parse(
                path,
                0,
                format!("header claims {nnz} entries, found {}", entries.len()),
            ));
        }
        let map: HashMap<u64, u32> = entries
            .iter()
            .map(|&(v, c, count)| (((v as u64) << 32) | c as u64, count))
            .collect();
        if map.len() != entries.len() {
            return Err(Error::parse(path, 0, "duplicate (c, v) entry"));
        }
        CooccurrencePairs::from_map(map, c_dim)
    }
}

/// Counts symmetric windowed co-occurrences over sentences. Windows never
/// cross sentence boundaries; both orientations of a pair are counted.
///
/// Counting shards the sentences and merges per-shard maps; the merge is
/// commutative so the result is independent of scheduling.
pub fn count_cooccurrences<I, S>(
    sentences: I,
    vocab: &Vocabulary,
    window: usize,
) -> Result<CooccurrencePairs>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if window == 0 {
        return Err(Error::validation("window must be >= 1"));
    }
    if vocab.is_empty() {
        return Err(Error::Internal("empty vocabulary".to_string()));
    }

    // Resolve sentences to id sequences up front; counting then touches
    // only integers.
    let resolved: Vec<Vec<u32>> = sentences
        .into_iter()
        .map(|s| {
            s.as_ref()
                .split_whitespace()
                .map(|tok| vocab.resolve(tok))
                .collect()
        })
        .collect();

    let map = resolved
        .par_chunks(SHARD_SENTENCES)
        .map(|shard| {
            let mut local: HashMap<u64, u32> = HashMap::new();
            for ids in shard {
                count_sentence(ids, window, &mut local);
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge_counts(b, a);
            }
            merge_counts(a, b)
        });

    CooccurrencePairs::from_map(map, vocab.len())
}

fn merge_counts(mut into: HashMap<u64, u32>, from: HashMap<u64, u32>) -> HashMap<u64, u32> {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
    into
}

fn count_sentence(ids: &[u32], window: usize, map: &mut HashMap<u64, u32>) {
    let n = ids.len();
    for i in 0..n {
        let hi = (i + window).min(n.saturating_sub(1));
        for j in i + 1..=hi {
            let (a, b) = (ids[i] as u64, ids[j] as u64);
            *map.entry((a << 32) | b).or_insert(0) += 1;
            *map.entry((b << 32) | a).or_insert(0) += 1;
        }
    }
}

/// Counts co-occurrences over a corpus file (one sentence per line).
pub fn count_cooccurrences_from_file(
    path: &Path,
    vocab: &Vocabulary,
    window: usize,
) -> Result<CooccurrencePairs> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    count_cooccurrences(text.lines(), vocab, window)
}
