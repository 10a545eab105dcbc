//! Synthetic low-rank tensor and MDP generators.
//!
//! Reward tensors come straight from a random unit-factor CP form. Valid
//! transition tensors are produced by iterating normalize → decompose at 2r
//! → truncate to r until normalization no longer moves the tensor, which in
//! practice converges to a conditional-distribution tensor that is close to
//! rank r.

use cp_decomp::{decompose, DecompConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rand::SeedableRng;
use tensor_core::{CPForm, DenseTensor};

use crate::mdp::TabularMDP;
use crate::seeds::mix;
use crate::{MarlError, Result};

/// Configuration for tensor generation.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub shape: Vec<usize>,
    pub rank: usize,
    /// Component weights; defaults to all ones.
    pub weights: Vec<f64>,
    pub seed: u64,
    /// Stop the normalize loop once `‖Normalize(T) - T‖_F` falls below this.
    pub normalize_tolerance: f64,
    pub normalize_max_iters: usize,
    /// Solver settings for the decompositions inside the normalize loop.
    pub decomp: DecompConfig,
}

impl GenConfig {
    pub fn new(shape: Vec<usize>, rank: usize, seed: u64) -> Self {
        Self {
            shape,
            rank,
            weights: vec![1.0; rank],
            seed,
            normalize_tolerance: 1e-3,
            normalize_max_iters: 100,
            decomp: DecompConfig::default(),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.rank, "one weight per component");
        self.weights = weights;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(MarlError::InvalidConfig("rank must be >= 1".into()));
        }
        if self.weights.len() != self.rank {
            return Err(MarlError::InvalidConfig(
                "weights length must equal rank".into(),
            ));
        }
        if !(self.normalize_tolerance > 0.0) {
            return Err(MarlError::InvalidConfig(
                "normalize tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `count` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Random CP form with the configured weights: every factor is a standard
/// normal draw scaled to unit norm.
pub fn generate_cp(cfg: &GenConfig) -> Result<CPForm> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factors: Vec<Vec<Vec<f64>>> = cfg
        .shape
        .iter()
        .map(|&d| (0..cfg.rank).map(|_| random_unit(&mut rng, d)).collect())
        .collect();
    Ok(CPForm::new(cfg.weights.clone(), factors)?)
}

/// Variant of [`generate_cp`] whose factors are orthonormal across
/// components within each mode (requires `rank ≤ min d_i`); used by the
/// recovery benchmarks.
pub fn generate_orthonormal_cp(cfg: &GenConfig) -> Result<CPForm> {
    cfg.validate()?;
    if cfg.shape.iter().any(|&d| d < cfg.rank) {
        return Err(MarlError::InvalidConfig(format!(
            "orthonormal factors need rank {} <= every dimension of {:?}",
            cfg.rank, cfg.shape
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factors: Vec<Vec<Vec<f64>>> = cfg
        .shape
        .iter()
        .map(|&d| orthonormal_vectors(&mut rng, d, cfg.rank))
        .collect();
    Ok(CPForm::new(cfg.weights.clone(), factors)?)
}

/// Materialized tensor of [`generate_cp`]; exact CP-rank ≤ `cfg.rank` by
/// construction.
pub fn generate_tensor(cfg: &GenConfig) -> Result<DenseTensor> {
    Ok(generate_cp(cfg)?.reconstruct(&cfg.shape)?)
}

/// Generates a valid transition tensor (last-mode slices are probability
/// distributions) that is within `cfg.normalize_tolerance` of a rank-r
/// tensor, by alternating normalization with decompose-at-2r / truncate-to-r.
///
/// Fails with the final residual if the loop does not converge; callers may
/// retry with a fresh seed.
pub fn generate_transition_tensor(cfg: &GenConfig) -> Result<DenseTensor> {
    cfg.validate()?;
    let mut t = generate_tensor(cfg)?;
    let mut residual = f64::INFINITY;
    for iteration in 0..cfg.normalize_max_iters {
        let normalized = normalize_last_mode(&t);
        residual = normalized.frobenius_distance(&t)?;
        if residual <= cfg.normalize_tolerance {
            return Ok(normalized);
        }
        let decomp_cfg = cfg
            .decomp
            .clone()
            .with_rank(2 * cfg.rank)
            .with_seed(mix(cfg.seed, &[0x6e, iteration as u64]));
        let cp = decompose(&normalized, &decomp_cfg)?;
        t = cp.truncate(cfg.rank)?.reconstruct(&cfg.shape)?;
    }
    Err(MarlError::NormalizeLoopDiverged {
        residual,
        iterations: cfg.normalize_max_iters,
    })
}

/// Clamps negatives to zero and rescales every last-mode slice to sum to 1;
/// slices with no positive mass become uniform.
pub fn normalize_last_mode(t: &DenseTensor) -> DenseTensor {
    let last = *t.shape().last().expect("non-scalar tensor");
    let mut data = t.data().to_vec();
    for chunk in data.chunks_mut(last) {
        let mut sum = 0.0;
        for x in chunk.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
            sum += *x;
        }
        if sum > 0.0 {
            for x in chunk.iter_mut() {
                *x /= sum;
            }
        } else {
            let uniform = 1.0 / last as f64;
            chunk.fill(uniform);
        }
    }
    DenseTensor::new(t.shape().to_vec(), data).expect("finite normalized tensor")
}

/// Retries transition generation with derived seeds; the normalize loop
/// occasionally stalls for an unlucky draw.
fn generate_transition_with_retries(base: GenConfig, attempts: usize) -> Result<DenseTensor> {
    let mut last_err = None;
    for attempt in 0..attempts {
        let mut cfg = base.clone();
        cfg.seed = mix(base.seed, &[0x7e, attempt as u64]);
        match generate_transition_tensor(&cfg) {
            Ok(t) => return Ok(t),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Experiment-1 MDP: 20 states, 3 agents with 10 actions each (20000
/// state-action pairs), rank-5 transition tensor, rank-5 reward tensor with
/// weights linspace(0.1, 1).
pub fn build_experiment1_mdp(seed: u64, discount: f64) -> Result<TabularMDP> {
    let shape = vec![20, 10, 10, 10, 20];
    let mut tcfg = GenConfig::new(shape, 5, mix(seed, &[1]));
    tcfg.decomp = experiment_decomp_defaults();
    let transition = generate_transition_with_retries(tcfg, 5)?;

    let rcfg = GenConfig::new(vec![20, 10, 10, 10], 5, mix(seed, &[2]))
        .with_weights(linspace(0.1, 1.0, 5));
    let reward = generate_tensor(&rcfg)?;
    TabularMDP::new(transition, reward, discount)
}

/// Degenerate-state MDP: 16 states in 4 groups of 4, 3 agents with 20
/// actions each (128000 state-action pairs). All states in a group share
/// one rank-1 transition block and one rank-1 reward slice, so the full
/// reward tensor has rank at most 4.
pub fn build_degenerate_mdp(seed: u64, discount: f64) -> Result<TabularMDP> {
    const STATES: usize = 16;
    const GROUPS: usize = 4;
    const GROUP_SIZE: usize = STATES / GROUPS;
    const ACTIONS: usize = 20;

    let mut transition = DenseTensor::zeros(vec![STATES, ACTIONS, ACTIONS, ACTIONS, STATES]);
    let mut reward = DenseTensor::zeros(vec![STATES, ACTIONS, ACTIONS, ACTIONS]);
    let block_len = ACTIONS * ACTIONS * ACTIONS * STATES;
    let slice_len = ACTIONS * ACTIONS * ACTIONS;

    for group in 0..GROUPS {
        let mut tcfg = GenConfig::new(
            vec![1, ACTIONS, ACTIONS, ACTIONS, STATES],
            1,
            mix(seed, &[3, group as u64]),
        );
        tcfg.decomp = experiment_decomp_defaults();
        let block = generate_transition_with_retries(tcfg, 5)?;

        let rcfg = GenConfig::new(
            vec![ACTIONS, ACTIONS, ACTIONS],
            1,
            mix(seed, &[4, group as u64]),
        );
        let slice = generate_tensor(&rcfg)?;

        for member in 0..GROUP_SIZE {
            let state = group * GROUP_SIZE + member;
            transition.data_mut()[state * block_len..(state + 1) * block_len]
                .copy_from_slice(block.data());
            reward.data_mut()[state * slice_len..(state + 1) * slice_len]
                .copy_from_slice(slice.data());
        }
    }
    TabularMDP::new(transition, reward, discount)
}

/// Solver settings for the decompositions inside MDP construction. The
/// normalize loop only needs each fit to be accurate relative to its
/// tolerance, not to the library's full polish, so the caps are tighter.
pub fn experiment_decomp_defaults() -> DecompConfig {
    DecompConfig {
        rank: 1,
        power_tolerance: 1e-8,
        power_max_iters: 200,
        altmin_max_sweeps: 100,
        altmin_tolerance: 1e-7,
        seed: 0,
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if len > 0.0 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

fn orthonormal_vectors(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    while vectors.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        // Re-orthogonalize twice for numerical safety.
        for _ in 0..2 {
            for prev in &vectors {
                let proj: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (x, p) in v.iter_mut().zip(prev) {
                    *x -= proj * p;
                }
            }
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 {
            vectors.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    vectors
}
