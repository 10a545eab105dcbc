//! Recovery tests for decomposition and completion on constructed low-rank
//! tensors, plus the solver invariants (unit factors, monotone objectives).

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::{CPForm, DenseTensor};

use cp_decomp::{
    alternating_minimization, alternating_minimization_traced, complete, complete_traced,
    decompose, power_iteration_deflation, DecompConfig, DecompError, ObservationMask,
};

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-3 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Gram-Schmidt over random Gaussian-ish columns: `count` orthonormal
/// vectors of the given dimension.
fn orthonormal_vectors(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(count <= dim);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    while vectors.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        for prev in &vectors {
            let proj: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= proj * p;
            }
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-6 {
            vectors.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    vectors
}

/// Random unit-factor CP tensor (the synthetic generator used throughout
/// the tests); orthonormal=true draws mutually orthogonal factors per mode.
fn build_cp(
    rng: &mut ChaCha8Rng,
    shape: &[usize],
    weights: &[f64],
    orthonormal: bool,
) -> (CPForm, DenseTensor) {
    let r = weights.len();
    let factors: Vec<Vec<Vec<f64>>> = shape
        .iter()
        .map(|&d| {
            if orthonormal {
                orthonormal_vectors(rng, d, r)
            } else {
                (0..r).map(|_| random_unit(rng, d)).collect()
            }
        })
        .collect();
    let cp = CPForm::new(weights.to_vec(), factors).unwrap();
    let t = cp.reconstruct(shape).unwrap();
    (cp, t)
}

fn relative_error(t: &DenseTensor, cp: &CPForm) -> f64 {
    let recon = cp.reconstruct(t.shape()).unwrap();
    t.frobenius_distance(&recon).unwrap() / t.frobenius_norm().max(f64::MIN_POSITIVE)
}

#[test]
fn power_iteration_recovers_single_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let shape = [4usize, 5, 6];
    let (truth, t) = build_cp(&mut rng, &shape, &[2.0], false);
    let cfg = DecompConfig::default().with_rank(1).with_seed(1);
    let cp = power_iteration_deflation(&t, &cfg).unwrap();

    // Weight and factors match up to per-mode signs whose product is +1.
    let mut signed_weight = cp.weights()[0];
    for mode in 0..3 {
        let align: f64 = cp.factor(mode, 0)
            .iter()
            .zip(truth.factor(mode, 0))
            .map(|(a, b)| a * b)
            .sum();
        assert!(align.abs() > 1.0 - 1e-7, "factor mode {mode} misaligned: {align}");
        signed_weight *= align.signum();
    }
    assert!((signed_weight - 2.0).abs() < 1e-7);
    assert!(relative_error(&t, &cp) < 1e-8);
}

#[test]
fn zero_tensor_is_degenerate() {
    let t = DenseTensor::zeros(vec![3, 3, 3]);
    let cfg = DecompConfig::default().with_rank(1);
    assert!(matches!(
        power_iteration_deflation(&t, &cfg),
        Err(DecompError::DegenerateTensor { .. })
    ));
}

#[test]
fn power_iteration_recovers_orthogonal_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let shape = [6usize, 5, 7];
    let (truth, t) = build_cp(&mut rng, &shape, &[3.0, 1.0], true);
    let cfg = DecompConfig::default().with_rank(2).with_seed(3);
    let cp = power_iteration_deflation(&t, &cfg).unwrap();

    // Deflation extracts the dominant component first.
    let mut got: Vec<f64> = cp.weights().iter().map(|w| w.abs()).collect();
    got.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!((got[0] - 3.0).abs() < 1e-6);
    assert!((got[1] - 1.0).abs() < 1e-6);
    assert!(relative_error(&t, &cp) < 1e-6);
    let _ = truth;
}

#[test]
fn altmin_is_a_fixed_point_on_exact_init() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shape = [5usize, 4, 6];
    let (truth, t) = build_cp(&mut rng, &shape, &[2.0, -1.0], true);
    let cfg = DecompConfig::default().with_rank(2);
    let refined = alternating_minimization(&t, &truth, &cfg).unwrap();
    assert!(relative_error(&t, &refined) < 1e-10);
}

#[test]
fn altmin_improves_perturbed_init() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let shape = [5usize, 6, 4];
    let (truth, t) = build_cp(&mut rng, &shape, &[2.0, 1.0], true);

    // Perturb every factor by 1e-3 noise and renormalize.
    let factors: Vec<Vec<Vec<f64>>> = truth
        .factors()
        .iter()
        .map(|per_mode| {
            per_mode
                .iter()
                .map(|v| {
                    let noisy: Vec<f64> =
                        v.iter().map(|x| x + 1e-3 * (rng.gen::<f64>() - 0.5)).collect();
                    let len = noisy.iter().map(|x| x * x).sum::<f64>().sqrt();
                    noisy.into_iter().map(|x| x / len).collect()
                })
                .collect()
        })
        .collect();
    let init = CPForm::new(truth.weights().to_vec(), factors).unwrap();
    let init_err = relative_error(&t, &init);
    assert!(init_err > 1e-5, "perturbation should be visible: {init_err}");

    let cfg = DecompConfig::default().with_rank(2);
    let refined = alternating_minimization(&t, &init, &cfg).unwrap();
    assert!(relative_error(&t, &refined) < init_err);
}

#[test]
fn altmin_objective_is_monotone_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let shape = [20usize, 10, 10];
    let (_, t) = build_cp(&mut rng, &shape, &[1.0, 0.7, 0.4], false);
    let cfg = DecompConfig::default().with_rank(3).with_seed(5);
    let init = power_iteration_deflation(&t, &cfg).unwrap();
    let (cp, history) = alternating_minimization_traced(&t, &init, &cfg).unwrap();
    assert!(history.len() >= 2);
    for pair in history.windows(2) {
        assert!(pair[1] <= pair[0], "objective increased: {pair:?}");
    }
    assert!(relative_error(&t, &cp) < 1e-4);
}

#[test]
fn decompose_at_true_rank_recovers_random_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let shape = [20usize, 10, 10];
    let (_, t) = build_cp(&mut rng, &shape, &[1.0, 0.6, 0.3], false);
    let cfg = DecompConfig::default().with_rank(3).with_seed(23);
    let cp = decompose(&t, &cfg).unwrap();
    assert!(relative_error(&t, &cp) < 1e-4);
}

#[test]
fn rank1_fit_of_rank2_tensor_is_bounded_by_tensor_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let shape = [5usize, 6, 7];
    let (_, t) = build_cp(&mut rng, &shape, &[2.0, 1.0], true);
    let cfg = DecompConfig::default().with_rank(1).with_seed(31);
    let cp = decompose(&t, &cfg).unwrap();
    let err = t
        .frobenius_distance(&cp.reconstruct(t.shape()).unwrap())
        .unwrap();
    assert!(err > 0.0);
    assert!(err < t.frobenius_norm());
}

#[test]
fn overspecified_rank_does_not_fit_worse() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let shape = [12usize, 10, 11];
    let (_, t) = build_cp(&mut rng, &shape, &[1.0, 0.8, 0.6, 0.4, 0.2], true);
    let cfg5 = DecompConfig::default().with_rank(5).with_seed(41);
    let cfg10 = DecompConfig::default().with_rank(10).with_seed(41);
    let err5 = relative_error(&t, &decompose(&t, &cfg5).unwrap());
    let err10 = relative_error(&t, &decompose(&t, &cfg10).unwrap());
    assert!(err10 <= err5 + 1e-12, "err10={err10} err5={err5}");
}

#[test]
fn recovery_rate_on_seeded_orthonormal_tensors() {
    // Distinct weights, orthonormalized factors: at least 18 of 20 seeds
    // must reach relative error < 1e-4 at the true rank.
    let weights = [1.0, 0.775, 0.55, 0.325, 0.1];
    let mut hits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (_, t) = build_cp(&mut rng, &[8, 6, 7], &weights, true);
        let cfg = DecompConfig::default().with_rank(5).with_seed(seed);
        let cp = decompose(&t, &cfg).unwrap();
        if relative_error(&t, &cp) < 1e-4 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "only {hits}/20 trials recovered");
}

#[test]
fn full_mask_completion_equals_decompose_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let shape = [5usize, 4, 6];
    let (_, t) = build_cp(&mut rng, &shape, &[2.0, 1.0], true);
    let cfg = DecompConfig::default().with_rank(2).with_seed(47);
    let mask = ObservationMask::full(&shape);
    let completed = complete(&t, &mask, &cfg).unwrap();
    let decomposed = decompose(&t, &cfg).unwrap();
    assert_eq!(completed, decomposed);
    assert!(relative_error(&t, &completed) < 1e-4);
}

#[test]
fn masked_completion_recovers_unobserved_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let shape = [4usize, 4, 4];
    let (_, t) = build_cp(&mut rng, &shape, &[2.0], false);

    // Seeded uniform mask revealing ~75% of the entries.
    let mask_data: Vec<f64> = (0..t.len())
        .map(|_| if rng.gen::<f64>() < 0.75 { 1.0 } else { 0.0 })
        .collect();
    let mask = ObservationMask::new(DenseTensor::new(shape.to_vec(), mask_data).unwrap()).unwrap();
    assert!(mask.observed_count() > 0 && !mask.is_full());

    let cfg = DecompConfig::default().with_rank(1).with_seed(59);
    let cp = complete(&t, &mask, &cfg).unwrap();
    let recon = cp.reconstruct(&shape).unwrap();
    for flat in 0..t.len() {
        if !mask.is_observed(flat) {
            let err = (recon.data()[flat] - t.data()[flat]).abs();
            assert!(err < 1e-6, "unobserved entry {flat} off by {err}");
        }
    }
}

#[test]
fn masked_objective_is_monotone_and_observed_entries_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let shape = [5usize, 5, 5];
    let (_, t) = build_cp(&mut rng, &shape, &[1.5, 0.5], true);
    let mask_data: Vec<f64> = (0..t.len())
        .map(|_| if rng.gen::<f64>() < 0.8 { 1.0 } else { 0.0 })
        .collect();
    let mask = ObservationMask::new(DenseTensor::new(shape.to_vec(), mask_data).unwrap()).unwrap();
    let cfg = DecompConfig::default().with_rank(2).with_seed(67);
    let (cp, history) = complete_traced(&t, &mask, &cfg).unwrap();
    for pair in history.windows(2) {
        assert!(pair[1] <= pair[0], "masked objective increased: {pair:?}");
    }
    let recon = cp.reconstruct(&shape).unwrap();
    for flat in 0..t.len() {
        if mask.is_observed(flat) {
            assert!((recon.data()[flat] - t.data()[flat]).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    // Every returned factor vector is unit-norm within 1e-9.
    #[test]
    fn factors_are_unit_norm(seed in 0u64..100_000, rank in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<f64> = (0..rank).map(|k| 1.0 - 0.2 * k as f64).collect();
        let (_, t) = build_cp(&mut rng, &[4, 3, 5], &weights, false);
        let cfg = DecompConfig::default().with_rank(rank).with_seed(seed);
        let cp = decompose(&t, &cfg).unwrap();
        for mode in 0..3 {
            for k in 0..rank {
                let len: f64 = cp.factor(mode, k).iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assert!((len - 1.0).abs() < 1e-9);
            }
        }
    }

    // Accepted alternating-minimization sweeps never increase the objective.
    #[test]
    fn altmin_trace_never_increases(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, t) = build_cp(&mut rng, &[3, 4, 3], &[1.0, 0.5], false);
        let cfg = DecompConfig::default().with_rank(2).with_seed(seed ^ 0xabcd);
        let init = power_iteration_deflation(&t, &cfg).unwrap();
        let (_, history) = alternating_minimization_traced(&t, &init, &cfg).unwrap();
        for pair in history.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
    }
}
