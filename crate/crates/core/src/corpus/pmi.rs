use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::CooccurrencePairs;

/// One stored cell of the signed PMI matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmiEntry {
    pub context: u32,
    pub word: u32,
    pub value: f64,
}

/// Sparse signed PMI word-context matrix.
///
/// Contexts are the same vocabulary as words, so the matrix is square.
/// Only observed pairs are stored; values are finite, nonzero, and may be
/// negative. Entries are sorted by (context, word); row offsets and a
/// column permutation support traversal along either axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PmiMatrix {
    size: usize,
    entries: Vec<PmiEntry>,
    row_ptr: Vec<u32>,
    /// Entry indices sorted by (word, context).
    col_perm: Vec<u32>,
    col_ptr: Vec<u32>,
}

impl PmiMatrix {
    pub fn from_entries(size: usize, mut entries: Vec<PmiEntry>) -> Result<Self> {
        if entries.len() >= u32::MAX as usize {
            return Err(Error::validation("too many PMI entries"));
        }
        for e in &entries {
            if (e.context as usize) >= size || (e.word as usize) >= size {
                return Err(Error::validation(format!(
                    "entry ({}, {}) out of range for size {size}",
                    e.context, e.word
                )));
            }
            if !e.value.is_finite() || e.value == 0.0 {
                return Err(Error::validation(format!(
                    "entry ({}, {}) has non-finite or zero value {}",
                    e.context, e.word, e.value
                )));
            }
        }
        entries.sort_by_key(|e| (e.context, e.word));
        if entries.windows(2).any(|w| {
            (w[0].context, w[0].word) == (w[1].context, w[1].word)
        }) {
            return Err(Error::validation("duplicate (context, word) entry"));
        }

        let mut row_ptr = vec![0u32; size + 1];
        for e in &entries {
            row_ptr[e.context as usize + 1] += 1;
        }
        for i in 0..size {
            row_ptr[i + 1] += row_ptr[i];
        }

        let mut col_perm: Vec<u32> = (0..entries.len() as u32).collect();
        col_perm.sort_by_key(|&i| {
            let e = &entries[i as usize];
            (e.word, e.context)
        });
        let mut col_ptr = vec![0u32; size + 1];
        for e in &entries {
            col_ptr[e.word as usize + 1] += 1;
        }
        for i in 0..size {
            col_ptr[i + 1] += col_ptr[i];
        }

        Ok(PmiMatrix {
            size,
            entries,
            row_ptr,
            col_perm,
            col_ptr,
        })
    }

    /// Matrix side length (C = V = vocabulary size).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_contexts(&self) -> usize {
        self.size
    }

    pub fn num_words(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[PmiEntry] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> PmiEntry {
        self.entries[idx]
    }

    /// Stored entries of row `context`, ordered by word id.
    pub fn row(&self, context: u32) -> &[PmiEntry] {
        let lo = self.row_ptr[context as usize] as usize;
        let hi = self.row_ptr[context as usize + 1] as usize;
        &self.entries[lo..hi]
    }

    /// Stored entries of column `word`, ordered by context id.
    pub fn column(&self, word: u32) -> impl Iterator<Item = &PmiEntry> {
        let lo = self.col_ptr[word as usize] as usize;
        let hi = self.col_ptr[word as usize + 1] as usize;
        self.col_perm[lo..hi]
            .iter()
            .map(move |&i| &self.entries[i as usize])
    }

    pub fn get(&self, context: u32, word: u32) -> Option<f64> {
        self.row(context)
            .binary_search_by_key(&word, |e| e.word)
            .ok()
            .map(|i| self.row(context)[i].value)
    }

    /// Writes a header `C V NNZ` followed by `c v value` lines; values
    /// carry 13 significant digits.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{} {} {}", self.size, self.size, self.entries.len())
            .map_err(|e| Error::io(path, e))?;
        for e in &self.entries {
            writeln!(w, "{} {} {:.12e}", e.context, e.word, e.value)
                .map_err(|e| Error::io(path, e))?;
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
            let (Some(c), Some(v), Some(val), None) = (it.next(), it.next(), it.next(), it.next())
            else {
                return Err(Error::parse(path, lineno + 1, "expected: c v value"));
            };
            let context: u32 = c
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad context id {c:?}")))?;
            let word: u32 = v
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad word id {v:?}")))?;
            let value: f64 = val
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad value {val:?}")))?;
            entries.push(PmiEntry {
                context,
                word,
                value,
            });
        }
        if entries.len() != nnz {
            return Err(Error::parse(
                path,
                0,
                format!("header claims {nnz} entries, found {}", entries.len()),
            ));
        }
        PmiMatrix::from_entries(c_dim, entries)
    }
}

/// Computes signed PMI for every observed pair:
/// `ln(count * total / (word_marginal * context_marginal))`.
///
/// Pairs whose PMI is exactly zero are dropped: they carry no sampling
/// weight and no gradient toward the stored value. Negative values are
/// retained.
pub fn compute_pmi(pairs: &CooccurrencePairs) -> Result<PmiMatrix> {
    if pairs.total_pairs() == 0 {
        return Err(Error::validation("no co-occurrence pairs observed"));
    }
    let total = pairs.total_pairs() as f64;
    let mut entries = Vec::with_capacity(pairs.entries().len());
    for &(word, context, count) in pairs.entries() {
        let wm = pairs.word_marginal(word) as f64;
        let cm = pairs.context_marginal(context) as f64;
        let value = ((count as f64 * total) / (wm * cm)).ln();
        if value != 0.0 {
            entries.push(PmiEntry {
                context,
                word,
                value,
            });
        }
    }
    PmiMatrix::from_entries(pairs.vocab_size(), entries)
}
