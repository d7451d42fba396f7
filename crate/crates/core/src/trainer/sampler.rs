//! Weighted sampling of PMI entries and conflict-free batch selection.

use rand::Rng;

use crate::corpus::PmiMatrix;
use crate::error::{Error, Result};

/// Draw budget multiplier for conflict rejection in batch selection.
const REJECTION_BUDGET: usize = 10;

/// Alias-table sampler drawing entry indices with probability
/// proportional to the absolute PMI value.
#[derive(Debug, Clone)]
pub struct EntrySampler {
    prob: Vec<f64>,
    alias: Vec<u32>,
    total_weight: f64,
}

impl EntrySampler {
    /// Builds the alias table over `|value|` of all stored entries.
    pub fn build(pmi: &PmiMatrix) -> Result<Self> {
        let weights: Vec<f64> = pmi.entries().iter().map(|e| e.value.abs()).collect();
        Self::from_weights(&weights)
    }

    pub(crate) fn from_weights(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::validation("cannot sample from an empty matrix"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::validation("sampling weights must have a positive finite sum"));
        }

        // Vose construction with index-ordered worklists so the table is
        // deterministic.
        let mut prob: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, p) in prob.iter().enumerate() {
            if *p < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while !small.is_empty() && !large.is_empty() {
            let s = small.pop().expect("non-empty");
            let l = *large.last().expect("non-empty");
            alias[s as usize] = l;
            let leftover = prob[l as usize] - (1.0 - prob[s as usize]);
            prob[l as usize] = leftover;
            if leftover < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Entries left on either worklist have probability 1 up to rounding.
        for &i in small.iter().chain(large.iter()) {
            prob[i as usize] = 1.0;
        }

        Ok(EntrySampler {
            prob,
            alias,
            total_weight: total,
        })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Draws one entry index; one uniform variate per draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let n = self.prob.len();
        let u: f64 = rng.gen::<f64>() * n as f64;
        let idx = (u as usize).min(n - 1);
        let frac = u - idx as f64;
        if frac < self.prob[idx] {
            idx
        } else {
            self.alias[idx] as usize
        }
    }

    /// Selection probability of entry `i` as encoded by the table.
    pub fn table_probability(&self, i: usize) -> f64 {
        let n = self.prob.len() as f64;
        let mut p = self.prob[i];
        for (j, &a) in self.alias.iter().enumerate() {
            if a as usize == i && j != i {
                p += 1.0 - self.prob[j];
            }
        }
        p / n
    }
}

/// Reusable scratch for batch selection; avoids reallocating the
/// occupancy maps every batch.
pub(crate) struct BatchScratch {
    row_used: Vec<bool>,
    col_used: Vec<bool>,
    touched_rows: Vec<u32>,
    touched_cols: Vec<u32>,
}

impl BatchScratch {
    pub(crate) fn new(size: usize) -> Self {
        BatchScratch {
            row_used: vec![false; size],
            col_used: vec![false; size],
            touched_rows: Vec::new(),
            touched_cols: Vec::new(),
        }
    }

    fn clear(&mut self) {
        for &r in &self.touched_rows {
            self.row_used[r as usize] = false;
        }
        for &c in &self.touched_cols {
            self.col_used[c as usize] = false;
        }
        self.touched_rows.clear();
        self.touched_cols.clear();
    }
}

/// Draws up to `batch_size` entry indices that are pairwise distinct in
/// both context and word, rejecting conflicting draws. The batch may be
/// smaller than requested when the rejection budget runs out; it is
/// never empty.
pub(crate) fn sample_batch_with<R, F>(
    pmi: &PmiMatrix,
    batch_size: usize,
    rng: &mut R,
    scratch: &mut BatchScratch,
    mut draw: F,
) -> Vec<usize>
where
    R: Rng,
    F: FnMut(&mut R) -> usize,
{
    scratch.clear();
    let mut batch = Vec::with_capacity(batch_size);
    let budget = batch_size.saturating_mul(REJECTION_BUDGET).max(1);
    for _ in 0..budget {
        if batch.len() >= batch_size {
            break;
        }
        let idx = draw(rng);
        let e = pmi.entry(idx);
        if scratch.row_used[e.context as usize] || scratch.col_used[e.word as usize] {
            continue;
        }
        scratch.row_used[e.context as usize] = true;
        scratch.col_used[e.word as usize] = true;
        scratch.touched_rows.push(e.context);
        scratch.touched_cols.push(e.word);
        batch.push(idx);
    }
    batch
}

/// Conflict-free batch under |PMI|-proportional sampling.
pub fn sample_batch<R: Rng>(
    sampler: &EntrySampler,
    pmi: &PmiMatrix,
    batch_size: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut scratch = BatchScratch::new(pmi.size());
    sample_batch_with(pmi, batch_size, rng, &mut scratch, |r| sampler.sample(r))
}
