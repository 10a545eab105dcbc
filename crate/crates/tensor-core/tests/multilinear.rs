//! Oracle and property tests for contraction, reconstruction, and the CP
//! helpers. The oracles are deliberately naive index loops, independent of
//! the stride-based implementation they check.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::{CPForm, DenseTensor, ModeArg};

/// Brute-force contraction: loops over every multi-index of the tensor.
fn naive_contract(t: &DenseTensor, args: &[ModeArg]) -> DenseTensor {
    let n = t.order();
    let out_shape: Vec<usize> = t
        .shape()
        .iter()
        .zip(args)
        .filter(|(_, a)| matches!(a, ModeArg::Identity))
        .map(|(&d, _)| d)
        .collect();
    let mut out = DenseTensor::zeros(out_shape);
    let mut index = vec![0usize; n];
    for flat in 0..t.len() {
        let mut rem = flat;
        for m in (0..n).rev() {
            index[m] = rem % t.shape()[m];
            rem /= t.shape()[m];
        }
        let mut prod = t.data()[flat];
        let mut free = Vec::new();
        for (m, arg) in args.iter().enumerate() {
            match arg {
                ModeArg::Vector(v) => prod *= v[index[m]],
                ModeArg::Identity => free.push(index[m]),
            }
        }
        let at = out.index_of(&free).unwrap();
        out.data_mut()[at] += prod;
    }
    out
}

/// Brute-force CP reconstruction: per-entry triple sum.
fn naive_reconstruct(cp: &CPForm, shape: &[usize]) -> DenseTensor {
    let mut out = DenseTensor::zeros(shape.to_vec());
    let n = shape.len();
    let mut index = vec![0usize; n];
    for flat in 0..out.len() {
        let mut rem = flat;
        for m in (0..n).rev() {
            index[m] = rem % shape[m];
            rem /= shape[m];
        }
        out.data_mut()[flat] = cp.eval(&index);
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn random_cp(rng: &mut ChaCha8Rng, shape: &[usize], rank: usize) -> CPForm {
    let weights: Vec<f64> = (0..rank).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
    let factors = shape
        .iter()
        .map(|&d| (0..rank).map(|_| random_unit(rng, d)).collect())
        .collect();
    CPForm::new(weights, factors).unwrap()
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> DenseTensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    DenseTensor::new(shape.to_vec(), data).unwrap()
}

#[test]
fn reconstruct_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shape = [3usize, 4, 5];
    let cp = random_cp(&mut rng, &shape, 2);
    let fast = cp.reconstruct(&shape).unwrap();
    let slow = naive_reconstruct(&cp, &shape);
    for (a, b) in fast.data().iter().zip(slow.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn contract_matches_naive_oracle_on_random_tensors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let shape = [4usize, 3, 5];
        let t = random_tensor(&mut rng, &shape);
        let v1 = random_unit(&mut rng, 3);
        let v2 = random_unit(&mut rng, 5);
        let args = [
            ModeArg::Identity,
            ModeArg::Vector(&v1),
            ModeArg::Vector(&v2),
        ];
        let fast = t.contract(&args).unwrap();
        let slow = naive_contract(&t, &args);
        assert_eq!(fast.shape(), slow.shape());
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn frobenius_and_entrywise_match_element_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_tensor(&mut rng, &[2, 3]);
    let b = random_tensor(&mut rng, &[2, 3]);

    let mut dist2 = 0.0;
    for i in 0..a.len() {
        let d = a.data()[i] - b.data()[i];
        dist2 += d * d;
    }
    assert!((a.frobenius_distance(&b).unwrap() - dist2.sqrt()).abs() < 1e-14);
    assert!(
        (a.frobenius_distance(&b).unwrap() - b.frobenius_distance(&a).unwrap()).abs() < 1e-15
    );

    let prod = a.entrywise_multiply(&b).unwrap();
    for i in 0..a.len() {
        assert_eq!(prod.data()[i], a.data()[i] * b.data()[i]);
    }
}

#[test]
fn contract_of_reconstruct_with_basis_recovers_cp_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let shape = [3usize, 2, 4];
    let cp = random_cp(&mut rng, &shape, 3);
    let t = cp.reconstruct(&shape).unwrap();
    for i in 0..3 {
        for j in 0..2 {
            for k in 0..4 {
                let mut e0 = vec![0.0; 3];
                let mut e1 = vec![0.0; 2];
                let mut e2 = vec![0.0; 4];
                e0[i] = 1.0;
                e1[j] = 1.0;
                e2[k] = 1.0;
                let got = t.contract_scalar(&[&e0, &e1, &e2]).unwrap();
                assert!((got - cp.eval(&[i, j, k])).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn truncate_error_equals_norm_of_dropped_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = [4usize, 3, 5];
    let cp = random_cp(&mut rng, &shape, 4);
    let kept = cp.truncate(2).unwrap();

    // Oracle: the dropped part is the difference of the two reconstructions.
    let full = naive_reconstruct(&cp, &shape);
    let part = naive_reconstruct(&kept, &shape);
    let dropped_norm = full.frobenius_distance(&part).unwrap();

    let err = cp
        .reconstruct(&shape)
        .unwrap()
        .frobenius_distance(&kept.reconstruct(&shape).unwrap())
        .unwrap();
    assert!((err - dropped_norm).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    // Multilinearity: contracting with αu+βv equals α·contract(u) + β·contract(v).
    #[test]
    fn contraction_is_multilinear(seed in 0u64..1_000_000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [3usize, 4, 2];
        let t = random_tensor(&mut rng, &shape);
        let u = random_unit(&mut rng, 4);
        let v = random_unit(&mut rng, 4);
        let w = random_unit(&mut rng, 2);

        let combo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = t
            .contract(&[ModeArg::Identity, ModeArg::Vector(&combo), ModeArg::Vector(&w)])
            .unwrap();
        let with_u = t
            .contract(&[ModeArg::Identity, ModeArg::Vector(&u), ModeArg::Vector(&w)])
            .unwrap();
        let with_v = t
            .contract(&[ModeArg::Identity, ModeArg::Vector(&v), ModeArg::Vector(&w)])
            .unwrap();
        for i in 0..3 {
            let rhs = alpha * with_u.data()[i] + beta * with_v.data()[i];
            prop_assert!((lhs.data()[i] - rhs).abs() < 1e-10);
        }
    }

    // Reconstructing a constructed CP form matches the naive oracle entrywise.
    #[test]
    fn reconstruct_round_trips_against_oracle(seed in 0u64..1_000_000, rank in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [3usize, 3, 4];
        let cp = random_cp(&mut rng, &shape, rank);
        let fast = cp.reconstruct(&shape).unwrap();
        let slow = naive_reconstruct(&cp, &shape);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    // Tensor text serialization round-trips exactly.
    #[test]
    fn tensor_io_round_trip(seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&mut rng, &[2, 3, 2]);
        let back = tensor_core::io::tensor_from_str(&tensor_core::io::tensor_to_string(&t)).unwrap();
        prop_assert_eq!(t, back);
    }
}
