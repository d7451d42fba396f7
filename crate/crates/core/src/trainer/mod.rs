//! Stochastic proximal learning of the dictionary and code matrices.
//!
//! Each iteration samples one stored PMI entry (weight proportional to
//! its absolute value, or uniformly with gradient rescaling), takes a
//! simultaneous gradient step on the owning dictionary row and code
//! column, and applies the forest proximal operator to the column.
//! Entries within a batch never share a row or a column, so batch
//! members update concurrently without locks and the end state is
//! identical for any thread count.

mod checkpoint;
mod sampler;
mod shared;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use sampler::{sample_batch, EntrySampler};

use std::path::Path;
use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PmiMatrix;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::prox::{forest_prox, l1_prox, ProxPlan};

use sampler::{sample_batch_with, BatchScratch};
use shared::SharedSlices;

/// Entries per chunk when evaluating the objective; partial sums are
/// combined in chunk order so the result does not depend on the thread
/// count.
const OBJECTIVE_CHUNK: usize = 8192;

/// Dense dictionary, C x M, row per context, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    contexts: usize,
    dims: usize,
    data: Vec<f64>,
}

impl Dictionary {
    pub fn new(contexts: usize, dims: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), contexts * dims);
        Dictionary {
            contexts,
            dims,
            data,
        }
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }

    pub fn num_dims(&self) -> usize {
        self.dims
    }

    /// Row `d_c` for context c.
    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.dims..(c + 1) * self.dims]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.dims..(c + 1) * self.dims]
    }

    /// Column `d_m`: the basis vector of latent dimension m.
    pub fn column(&self, m: usize) -> impl Iterator<Item = f64> + '_ {
        self.data[m..].iter().step_by(self.dims).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Dense code matrix, M x V, stored column-major so each word column
/// `a_v` is contiguous. Exact zeros produced by the prox are preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeMatrix {
    dims: usize,
    words: usize,
    data: Vec<f64>,
}

impl CodeMatrix {
    pub fn new(dims: usize, words: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dims * words);
        CodeMatrix { dims, words, data }
    }

    pub fn num_dims(&self) -> usize {
        self.dims
    }

    pub fn num_words(&self) -> usize {
        self.words
    }

    /// Word representation `a_v`.
    pub fn column(&self, v: usize) -> &[f64] {
        &self.data[v * self.dims..(v + 1) * self.dims]
    }

    pub fn column_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.data[v * self.dims..(v + 1) * self.dims]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Fraction of entries that are exactly nonzero.
    pub fn nonzero_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let nz = self.data.iter().filter(|&&x| x != 0.0).count();
        nz as f64 / self.data.len() as f64
    }
}

/// Fraction of exactly-nonzero entries of the code matrix.
pub fn nonzero_fraction(codes: &CodeMatrix) -> f64 {
    codes.nonzero_fraction()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Entries drawn with probability proportional to |PMI|.
    Weighted,
    /// Entries drawn uniformly; the gradient is rescaled by
    /// `|x| * NNZ / sum|x|` so the expected update matches weighted mode.
    UniformScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxThresholdMode {
    /// Threshold `eta_t * lambda` (proximal-gradient consistent).
    Scaled,
    /// Threshold `lambda` regardless of the learning rate.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxRoute {
    /// Per-node block thresholding over the forest (the structured path).
    Forest,
    /// Plain coordinate soft thresholding (the l1 baseline); equivalent
    /// to `Forest` over an all-singleton forest, bit for bit.
    L1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Strength of the structured penalty.
    pub lambda: f64,
    /// Squared-l2 penalty on dictionary columns.
    pub tau: f64,
    /// Initial learning rate.
    pub eta0: f64,
    /// Decay constant: `eta_t = eta0 / (1 + decay * t / T)`.
    pub decay: f64,
    /// Total iterations T (one sampled entry per iteration).
    pub iterations: u64,
    /// Entries updated concurrently per batch.
    pub batch_size: usize,
    pub seed: u64,
    pub sampling: SamplingMode,
    pub prox_threshold: ProxThresholdMode,
    pub prox_route: ProxRoute,
    /// Entries of D and A initialize uniformly in [-init_scale, init_scale].
    pub init_scale: f64,
    /// Number of objective-trace evaluations spread over the run.
    pub objective_evals: usize,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.1,
            tau: 1e-5,
            eta0: 0.05,
            decay: 1.0,
            iterations: 100_000,
            batch_size: 32,
            seed: 42,
            sampling: SamplingMode::Weighted,
            prox_threshold: ProxThresholdMode::Scaled,
            prox_route: ProxRoute::Forest,
            init_scale: 0.1,
            objective_evals: 100,
            threads: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.tau < 0.0 || self.eta0 < 0.0 {
            return Err(Error::validation("lambda, tau and eta0 must be nonnegative"));
        }
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::validation("init_scale must be nonnegative"));
        }
        Ok(())
    }
}

/// Objective and sparsity diagnostics for one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: u64,
    /// (iteration, objective) pairs, including iteration 0 and the end.
    pub objective_trace: Vec<(u64, f64)>,
    pub nonzero_fraction: f64,
    pub wall_seconds: f64,
    pub config: TrainConfig,
}

pub struct TrainOutcome {
    pub dictionary: Dictionary,
    pub codes: CodeMatrix,
    pub report: TrainReport,
}

/// Optional side channels for a training run.
#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Snapshot destination, written every T/10 iterations and at the end.
    pub checkpoint_path: Option<&'a Path>,
    /// Called after each batch is sampled (before it is applied) with the
    /// global iteration index of the batch's first entry and the sampled
    /// entry indices.
    #[allow(clippy::type_complexity)]
    pub observer: Option<&'a mut dyn FnMut(u64, &[usize])>,
}

/// One simultaneous gradient update of `d_c` and `a_v` for entry value
/// `x`, followed by the proximal step on `a_v`.
///
/// Both updates use the pre-step values; `scale` multiplies only the
/// residual gradient (1 in weighted mode). Returns the residual.
pub fn sgd_step(
    d_c: &mut [f64],
    a_v: &mut [f64],
    x: f64,
    eta: f64,
    tau: f64,
    scale: f64,
    prox_threshold: f64,
    prox: ProxApply<'_>,
) -> Result<f64> {
    debug_assert_eq!(d_c.len(), a_v.len());
    let mut dot = 0.0;
    for (d, a) in d_c.iter().zip(a_v.iter()) {
        dot += d * a;
    }
    let r = x - dot;
    if !r.is_finite() {
        return Err(Error::Divergence);
    }
    let g = 2.0 * eta * scale * r;
    let shrink = 2.0 * eta * tau;
    for (d, a) in d_c.iter_mut().zip(a_v.iter_mut()) {
        let d_old = *d;
        let a_old = *a;
        *d = d_old + g * a_old - shrink * d_old;
        *a = a_old + g * d_old;
    }
    match prox {
        ProxApply::Forest(plan) => forest_prox(plan, a_v, prox_threshold)?,
        ProxApply::L1 => l1_prox(a_v, prox_threshold),
    }
    Ok(r)
}

/// Which proximal operator closes an SGD step.
#[derive(Clone, Copy)]
pub enum ProxApply<'a> {
    Forest(&'a ProxPlan),
    L1,
}

/// Full objective over the stored entries:
/// squared reconstruction loss + lambda * sum_v omega(a_v) + tau * ||D||_F^2.
pub fn objective(
    pmi: &PmiMatrix,
    dictionary: &Dictionary,
    codes: &CodeMatrix,
    lambda: f64,
    tau: f64,
    plan: &ProxPlan,
) -> f64 {
    use rayon::prelude::*;

    let dims = dictionary.num_dims();
    debug_assert_eq!(dims, codes.num_dims());

    let loss_parts: Vec<f64> = pmi
        .entries()
        .par_chunks(OBJECTIVE_CHUNK)
        .map(|chunk| {
            let mut s = 0.0;
            for e in chunk {
                let d_c = dictionary.row(e.context as usize);
                let a_v = codes.column(e.word as usize);
                let mut dot = 0.0;
                for (d, a) in d_c.iter().zip(a_v.iter()) {
                    dot += d * a;
                }
                let r = e.value - dot;
                s += r * r;
            }
            s
        })
        .collect();
    let loss: f64 = loss_parts.iter().sum();

    let omega_parts: Vec<f64> = (0..codes.num_words())
        .collect::<Vec<_>>()
        .par_chunks(OBJECTIVE_CHUNK)
        .map(|chunk| chunk.iter().map(|&v| plan.omega(codes.column(v))).sum())
        .collect();
    let omega_total: f64 = omega_parts.iter().sum();

    let frob_parts: Vec<f64> = dictionary
        .as_slice()
        .par_chunks(OBJECTIVE_CHUNK)
        .map(|chunk| chunk.iter().map(|x| x * x).sum())
        .collect();
    let frob: f64 = frob_parts.iter().sum();

    loss + lambda * omega_total + tau * frob
}

/// Runs Algorithm-style stochastic proximal training.
pub fn train(pmi: &PmiMatrix, forest: &Forest, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_options(pmi, forest, config, TrainOptions::default())
}

pub fn train_with_options(
    pmi: &PmiMatrix,
    forest: &Forest,
    config: &TrainConfig,
    mut options: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if forest.is_empty() {
        return Err(Error::validation("forest must have at least one node"));
    }
    if pmi.nnz() == 0 {
        return Err(Error::validation("PMI matrix has no stored entries"));
    }

    let start = Instant::now();
    let contexts = pmi.num_contexts();
    let words = pmi.num_words();
    let dims = forest.len();
    let plan = ProxPlan::new(forest);
    let total_iters = config.iterations;

    // Coordinator-owned RNG: initialization first, then all sampling, so
    // a seed fully determines the run.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Uniform::new_inclusive(-config.init_scale, config.init_scale);
    let d_data: Vec<f64> = (0..contexts * dims).map(|_| init.sample(&mut rng)).collect();
    let a_data: Vec<f64> = (0..dims * words).map(|_| init.sample(&mut rng)).collect();

    let sampler = match config.sampling {
        SamplingMode::Weighted => Some(EntrySampler::build(pmi)?),
        SamplingMode::UniformScaled => None,
    };
    // Scale constant for uniform mode: |x| * NNZ / sum |x|.
    let abs_sum: f64 = pmi.entries().iter().map(|e| e.value.abs()).sum();
    let nnz = pmi.nnz();
    let uniform_scale = nnz as f64 / abs_sum;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;

    let mut d_shared = SharedSlices::new(d_data, dims);
    let mut a_shared = SharedSlices::new(a_data, dims);

    let trace_every = (total_iters / config.objective_evals.max(1) as u64).max(1);
    let checkpoint_every = (total_iters / 10).max(1);
    let mut scratch = BatchScratch::new(pmi.size());
    let mut trace: Vec<(u64, f64)> = Vec::new();
    let mut next_trace = 0u64;
    let mut next_checkpoint = checkpoint_every;
    let mut done = 0u64;

    // Borrowing dance: objective evaluation needs whole-matrix views, so
    // snapshot through temporary Dictionary/CodeMatrix wrappers.
    let eval_objective = |d: &mut SharedSlices, a: &mut SharedSlices| -> f64 {
        let dict = Dictionary::new(contexts, dims, d.as_slice().to_vec());
        let codes = CodeMatrix::new(dims, words, a.as_slice().to_vec());
        objective(pmi, &dict, &codes, config.lambda, config.tau, &plan)
    };

    while done < total_iters {
        if done >= next_trace {
            let value = pool.install(|| eval_objective(&mut d_shared, &mut a_shared));
            if !value.is_finite() {
                return Err(Error::Divergence);
            }
            trace.push((done, value));
            next_trace += trace_every;
        }

        let want = (total_iters - done).min(config.batch_size as u64) as usize;
        let batch = match &sampler {
            Some(s) => sample_batch_with(pmi, want, &mut rng, &mut scratch, |r| s.sample(r)),
            // One uniform variate per draw, mirroring the alias table's
            // consumption so equal-weight runs coincide across modes.
            None => sample_batch_with(pmi, want, &mut rng, &mut scratch, |r| {
                let u: f64 = r.gen::<f64>() * nnz as f64;
                (u as usize).min(nnz - 1)
            }),
        };
        if let Some(observer) = options.observer.as_mut() {
            observer(done, &batch);
        }

        let base = done;
        let apply = |position: usize, entry_idx: usize| -> Result<()> {
            let e = pmi.entry(entry_idx);
            let t = base + position as u64;
            let eta = config.eta0 / (1.0 + config.decay * t as f64 / total_iters as f64);
            let threshold = match config.prox_threshold {
                ProxThresholdMode::Scaled => eta * config.lambda,
                ProxThresholdMode::Fixed => config.lambda,
            };
            let scale = match config.sampling {
                SamplingMode::Weighted => 1.0,
                SamplingMode::UniformScaled => e.value.abs() * uniform_scale,
            };
            let prox = match config.prox_route {
                ProxRoute::Forest => ProxApply::Forest(&plan),
                ProxRoute::L1 => ProxApply::L1,
            };
            // Sound: entries within a batch are pairwise distinct in both
            // context and word, so these slices never alias.
            let d_c = unsafe { d_shared.slice_mut_unchecked(e.context as usize) };
            let a_v = unsafe { a_shared.slice_mut_unchecked(e.word as usize) };
            sgd_step(d_c, a_v, e.value, eta, config.tau, scale, threshold, prox)?;
            Ok(())
        };

        if config.threads == 1 {
            for (i, &idx) in batch.iter().enumerate() {
                apply(i, idx)?;
            }
        } else {
            use rayon::prelude::*;
            pool.install(|| {
                batch
                    .par_iter()
                    .enumerate()
                    .try_for_each(|(i, &idx)| apply(i, idx))
            })?;
        }
        done += batch.len() as u64;

        if done >= next_checkpoint || done >= total_iters {
            if let Some(path) = options.checkpoint_path {
                let snapshot = Checkpoint {
                    iteration: done,
                    dictionary: Dictionary::new(contexts, dims, d_shared.as_slice().to_vec()),
                    codes: CodeMatrix::new(dims, words, a_shared.as_slice().to_vec()),
                };
                write_checkpoint(path, &snapshot)?;
            }
            while next_checkpoint <= done {
                next_checkpoint += checkpoint_every;
            }
        }
    }

    let final_objective = pool.install(|| eval_objective(&mut d_shared, &mut a_shared));
    if !final_objective.is_finite() {
        return Err(Error::Divergence);
    }
    trace.push((done, final_objective));

    let dictionary = Dictionary::new(contexts, dims, d_shared.into_inner());
    let codes = CodeMatrix::new(dims, words, a_shared.into_inner());
    if dictionary.as_slice().iter().any(|x| !x.is_finite())
        || codes.as_slice().iter().any(|x| !x.is_finite())
    {
        return Err(Error::Divergence);
    }

    let report = TrainReport {
        iterations: done,
        objective_trace: trace,
        nonzero_fraction: codes.nonzero_fraction(),
        wall_seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    log::info!(
        "trained {} iterations in {:.2}s, final objective {:.6e}, nonzero fraction {:.4}",
        report.iterations,
        report.wall_seconds,
        final_objective,
        report.nonzero_fraction
    );

    Ok(TrainOutcome {
        dictionary,
        codes,
        report,
    })
}

#[cfg(test)]
mod tests;
