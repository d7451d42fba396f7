use super::*;
use crate::corpus::PmiEntry;
use approx::assert_relative_eq;

fn matrix_from(size: usize, entries: &[(u32, u32, f64)]) -> PmiMatrix {
    PmiMatrix::from_entries(
        size,
        entries
            .iter()
            .map(|&(c, v, value)| PmiEntry {
                context: c,
                word: v,
                value,
            })
            .collect(),
    )
    .unwrap()
}

/// Dense cross matrix with deterministic pseudo-random nonzero values.
fn dense_matrix(size: usize, seed: u64) -> PmiMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for c in 0..size as u32 {
        for v in 0..size as u32 {
            let value: f64 = rng.gen_range(-2.0..2.0);
            if value != 0.0 {
                entries.push((c, v, value));
            }
        }
    }
    matrix_from(size, &entries)
}

#[test]
fn sgd_step_zero_residual_is_identity() {
    let mut d = vec![1.0, 2.0];
    let mut a = vec![3.0, 4.0];
    let x = 11.0; // exactly d . a
    sgd_step(&mut d, &mut a, x, 0.25, 0.0, 1.0, 0.0, ProxApply::L1).unwrap();
    assert_eq!(d, vec![1.0, 2.0]);
    assert_eq!(a, vec![3.0, 4.0]);
}

#[test]
fn sgd_step_scalar_hand_case() {
    let mut d = vec![1.0];
    let mut a = vec![1.0];
    sgd_step(&mut d, &mut a, 2.0, 0.25, 0.0, 1.0, 0.0, ProxApply::L1).unwrap();
    assert_eq!(d, vec![1.5]);
    assert_eq!(a, vec![1.5]);
}

#[test]
fn sgd_step_matches_finite_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let m = 5;
    let tau = 0.3;
    for _ in 0..50 {
        let d: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: f64 = rng.gen_range(-2.0..2.0);
        let f = |d: &[f64], a: &[f64]| -> f64 {
            let dot: f64 = d.iter().zip(a).map(|(p, q)| p * q).sum();
            let dn: f64 = d.iter().map(|p| p * p).sum();
            (x - dot) * (x - dot) + tau * dn
        };
        // One tiny step recovers the negative gradient: update = -eta * grad.
        let eta = 1.0;
        let mut d1 = d.clone();
        let mut a1 = a.clone();
        sgd_step(&mut d1, &mut a1, x, eta, tau, 1.0, 0.0, ProxApply::L1).unwrap();
        let h = 1e-6;
        for i in 0..m {
            let mut dp = d.clone();
            let mut dm = d.clone();
            dp[i] += h;
            dm[i] -= h;
            let grad = (f(&dp, &a) - f(&dm, &a)) / (2.0 * h);
            let analytic = -(d1[i] - d[i]) / eta;
            assert_relative_eq!(analytic, grad, max_relative = 1e-5, epsilon = 1e-7);

            let mut ap = a.clone();
            let mut am = a.clone();
            ap[i] += h;
            am[i] -= h;
            let grad = (f(&d, &ap) - f(&d, &am)) / (2.0 * h);
            let analytic = -(a1[i] - a[i]) / eta;
            assert_relative_eq!(analytic, grad, max_relative = 1e-5, epsilon = 1e-7);
        }
    }
}

#[test]
fn sgd_step_reports_divergence() {
    let mut d = vec![f64::MAX, f64::MAX];
    let mut a = vec![f64::MAX, f64::MAX];
    let err = sgd_step(&mut d, &mut a, 1.0, 0.5, 0.0, 1.0, 0.0, ProxApply::L1);
    assert!(matches!(err, Err(Error::Divergence)));
    assert_eq!(err.unwrap_err().to_string(), "divergence; reduce eta0");
}

#[test]
fn objective_zero_matrices_is_sum_of_squares() {
    let pmi = matrix_from(3, &[(0, 1, 2.0), (1, 2, -3.0)]);
    let forest = Forest::flat(4).unwrap();
    let plan = ProxPlan::new(&forest);
    let d = Dictionary::new(3, 4, vec![0.0; 12]);
    let a = CodeMatrix::new(4, 3, vec![0.0; 12]);
    let got = objective(&pmi, &d, &a, 0.5, 0.5, &plan);
    assert_relative_eq!(got, 13.0, max_relative = 1e-15);
}

#[test]
fn objective_exact_factorization_is_zero() {
    // D = [[1],[2]], A = [[3, 4]]: X entries equal products.
    let pmi = matrix_from(2, &[(0, 0, 3.0), (0, 1, 4.0), (1, 0, 6.0), (1, 1, 8.0)]);
    let forest = Forest::flat(1).unwrap();
    let plan = ProxPlan::new(&forest);
    let d = Dictionary::new(2, 1, vec![1.0, 2.0]);
    let a = CodeMatrix::new(1, 2, vec![3.0, 4.0]);
    assert_eq!(objective(&pmi, &d, &a, 0.0, 0.0, &plan), 0.0);
}

#[test]
fn objective_matches_direct_recomputation() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let size = 6;
    let forest = Forest::default_forest(1).unwrap();
    let plan = ProxPlan::new(&forest);
    let m = forest.len();
    let pmi = dense_matrix(size, 99);
    let d = Dictionary::new(size, m, (0..size * m).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let a = CodeMatrix::new(m, size, (0..m * size).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let (lambda, tau) = (0.3, 0.07);

    // Independent recomputation straight from the definitions, using the
    // forest's own omega rather than the plan's.
    let mut expect = 0.0;
    for e in pmi.entries() {
        let dot: f64 = d
            .row(e.context as usize)
            .iter()
            .zip(a.column(e.word as usize))
            .map(|(p, q)| p * q)
            .sum();
        expect += (e.value - dot) * (e.value - dot);
    }
    for v in 0..size {
        expect += lambda * forest.omega(a.column(v)).unwrap();
    }
    for col in 0..m {
        expect += tau * d.column(col).map(|x| x * x).sum::<f64>();
    }

    let got = objective(&pmi, &d, &a, lambda, tau, &plan);
    assert_relative_eq!(got, expect, max_relative = 1e-12);
}

#[test]
fn nonzero_fraction_cases() {
    assert_eq!(CodeMatrix::new(2, 2, vec![0.0; 4]).nonzero_fraction(), 0.0);
    assert_eq!(CodeMatrix::new(2, 2, vec![1.0; 4]).nonzero_fraction(), 1.0);
    assert_eq!(
        CodeMatrix::new(2, 2, vec![1.0, 0.0, 2.0, -3.0]).nonzero_fraction(),
        0.75
    );
}

fn quick_config(iterations: u64) -> TrainConfig {
    TrainConfig {
        iterations,
        batch_size: 4,
        objective_evals: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_same_result() {
    let pmi = dense_matrix(10, 1);
    let forest = Forest::default_forest(1).unwrap();
    let cfg = quick_config(2000);
    let run1 = train(&pmi, &forest, &cfg).unwrap();
    let run2 = train(&pmi, &forest, &cfg).unwrap();
    for (x, y) in run1
        .dictionary
        .as_slice()
        .iter()
        .zip(run2.dictionary.as_slice())
    {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    for (x, y) in run1.codes.as_slice().iter().zip(run2.codes.as_slice()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn thread_count_does_not_change_result() {
    let pmi = dense_matrix(12, 2);
    let forest = Forest::default_forest(1).unwrap();
    let single = train(&pmi, &forest, &quick_config(1500)).unwrap();
    let multi = train(
        &pmi,
        &forest,
        &TrainConfig {
            threads: 4,
            ..quick_config(1500)
        },
    )
    .unwrap();
    for (x, y) in single.codes.as_slice().iter().zip(multi.codes.as_slice()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    for (x, y) in single
        .dictionary
        .as_slice()
        .iter()
        .zip(multi.dictionary.as_slice())
    {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn huge_fixed_lambda_zeroes_all_codes() {
    let pmi = dense_matrix(8, 3);
    let forest = Forest::default_forest(1).unwrap();
    let cfg = TrainConfig {
        lambda: 1e3,
        prox_threshold: ProxThresholdMode::Fixed,
        iterations: 4000,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let out = train(&pmi, &forest, &cfg).unwrap();
    assert_eq!(out.codes.nonzero_fraction(), 0.0);
}

#[test]
fn untouched_columns_keep_initialization() {
    use rand::distributions::{Distribution, Uniform};
    use rand::SeedableRng;
    // Entries only reference words 0 and 1; columns 2 and 3 must remain
    // exactly at their seeded initialization.
    let pmi = matrix_from(4, &[(0, 0, 1.0), (1, 1, -2.0), (2, 0, 0.5), (3, 1, 1.5)]);
    let forest = Forest::flat(3).unwrap();
    let cfg = TrainConfig {
        iterations: 500,
        batch_size: 2,
        seed: 9,
        ..TrainConfig::default()
    };
    let out = train(&pmi, &forest, &cfg).unwrap();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Uniform::new_inclusive(-cfg.init_scale, cfg.init_scale);
    let dims = forest.len();
    let _d: Vec<f64> = (0..4 * dims).map(|_| init.sample(&mut rng)).collect();
    let a: Vec<f64> = (0..dims * 4).map(|_| init.sample(&mut rng)).collect();
    for v in 2..4usize {
        let expect = &a[v * dims..(v + 1) * dims];
        let got = out.codes.column(v);
        for (x, y) in got.iter().zip(expect) {
            assert_eq!(x.to_bits(), y.to_bits(), "column {v} moved");
        }
    }
}

#[test]
fn objective_trace_decreases_end_to_end() {
    let pmi = dense_matrix(10, 4);
    let forest = Forest::default_forest(1).unwrap();
    let out = train(&pmi, &forest, &quick_config(20_000)).unwrap();
    let trace = &out.report.objective_trace;
    assert!(trace.len() >= 2);
    assert_eq!(trace[0].0, 0);
    let first = trace.first().unwrap().1;
    let last = trace.last().unwrap().1;
    assert!(
        last < first,
        "objective did not decrease: {first} -> {last}"
    );
}

#[test]
fn divergent_learning_rate_errors() {
    let pmi = dense_matrix(8, 5);
    let forest = Forest::default_forest(1).unwrap();
    let cfg = TrainConfig {
        eta0: 1e8,
        iterations: 5000,
        ..TrainConfig::default()
    };
    assert!(matches!(
        train(&pmi, &forest, &cfg),
        Err(Error::Divergence)
    ));
}

#[test]
fn flat_forest_equals_l1_route_bitwise() {
    let pmi = dense_matrix(9, 6);
    let m = 13;
    let forest = Forest::flat(m).unwrap();
    let base = quick_config(3000);
    let via_forest = train(
        &pmi,
        &forest,
        &TrainConfig {
            prox_route: ProxRoute::Forest,
            ..base.clone()
        },
    )
    .unwrap();
    let via_l1 = train(
        &pmi,
        &forest,
        &TrainConfig {
            prox_route: ProxRoute::L1,
            ..base
        },
    )
    .unwrap();
    for (x, y) in via_forest
        .codes
        .as_slice()
        .iter()
        .zip(via_l1.codes.as_slice())
    {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn uniform_scaled_with_unit_magnitudes_matches_weighted_bitwise() {
    // With |x| = 1 everywhere the scaling constant is exactly 1 and the
    // uniform draw consumes the same variates as the alias table, so the
    // two modes coincide run for run.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
    let size = 8;
    let mut entries = Vec::new();
    for c in 0..size as u32 {
        for v in 0..size as u32 {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            entries.push((c, v, sign));
        }
    }
    let pmi = matrix_from(size, &entries);
    let forest = Forest::default_forest(1).unwrap();
    let base = quick_config(2000);
    let weighted = train(
        &pmi,
        &forest,
        &TrainConfig {
            sampling: SamplingMode::Weighted,
            ..base.clone()
        },
    )
    .unwrap();
    let uniform = train(
        &pmi,
        &forest,
        &TrainConfig {
            sampling: SamplingMode::UniformScaled,
            ..base
        },
    )
    .unwrap();
    for (x, y) in weighted.codes.as_slice().iter().zip(uniform.codes.as_slice()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn observer_sees_disjoint_batches() {
    let pmi = dense_matrix(10, 7);
    let forest = Forest::default_forest(1).unwrap();
    let cfg = quick_config(400);
    let mut batches: Vec<(u64, Vec<usize>)> = Vec::new();
    let mut observer = |start: u64, entries: &[usize]| {
        batches.push((start, entries.to_vec()));
    };
    train_with_options(
        &pmi,
        &forest,
        &cfg,
        TrainOptions {
            observer: Some(&mut observer),
            ..TrainOptions::default()
        },
    )
    .unwrap();
    let total: usize = batches.iter().map(|(_, b)| b.len()).sum();
    assert_eq!(total as u64, cfg.iterations);
    for (_, batch) in &batches {
        for (i, &x) in batch.iter().enumerate() {
            for &y in &batch[i + 1..] {
                let a = pmi.entry(x);
                let b = pmi.entry(y);
                assert_ne!(a.context, b.context);
                assert_ne!(a.word, b.word);
            }
        }
    }
}

#[test]
fn checkpoints_written_during_training() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    let pmi = dense_matrix(6, 8);
    let forest = Forest::flat(4).unwrap();
    let cfg = quick_config(100);
    let out = train_with_options(
        &pmi,
        &forest,
        &cfg,
        TrainOptions {
            checkpoint_path: Some(&path),
            ..TrainOptions::default()
        },
    )
    .unwrap();
    let snapshot = read_checkpoint(&path).unwrap();
    assert_eq!(snapshot.iteration, 100);
    for (x, y) in snapshot.codes.as_slice().iter().zip(out.codes.as_slice()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
