//! Model-based agents: experience store, transition/reward estimators, and
//! planning on the estimated MDP.
//!
//! Three estimators are compared. The baseline uses maximum-likelihood
//! transition counts and mean-fills unseen rewards. The full-CP agent
//! decomposes the normalized count tensor over the whole state-action space
//! and completes the reward tensor under the visitation mask. The
//! Tesseract-style agent instead decomposes each (state, next-state) action
//! slice and completes each state's reward slice on its own.

use cp_decomp::{complete, decompose, DecompConfig, ObservationMask};
use tensor_core::DenseTensor;

use crate::mdp::{policy_improvement, Policy, TabularMDP};
use crate::{MarlError, Result};

/// Which estimator an agent runs, with its decomposition ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    /// Maximum-likelihood transitions, mean-filled rewards.
    Baseline,
    /// One CP decomposition of the full transition tensor at `rank_t` and
    /// one masked completion of the full reward tensor at `rank_r`.
    FullCp { rank_t: usize, rank_r: usize },
    /// Per-(s, s') action-space decompositions and per-state reward
    /// completions, all at `rank`.
    Tesseract { rank: usize },
}

impl AgentKind {
    /// Stable identifier used in metrics output.
    pub fn name(&self) -> String {
        match self {
            AgentKind::Baseline => "baseline".into(),
            AgentKind::FullCp { rank_t, rank_r } if rank_t == rank_r => {
                format!("full-cp-r{rank_t}")
            }
            AgentKind::FullCp { rank_t, rank_r } => format!("full-cp-rt{rank_t}-rr{rank_r}"),
            AgentKind::Tesseract { rank } => format!("tesseract-r{rank}"),
        }
    }
}

/// Agent configuration: estimator kind, solver settings (rank and seed are
/// overridden per fit), planning cap, and an optional post-completion clamp
/// on reward magnitudes (off by default; completion blow-ups are reproduced,
/// not hidden).
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub decomp: DecompConfig,
    pub n_improvement_iter: usize,
    pub value_clamp: Option<f64>,
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        Self {
            kind,
            decomp: DecompConfig::default(),
            n_improvement_iter: 10,
            value_clamp: None,
        }
    }
}

/// Transition counts, last-observed rewards, and the visitation mask
/// gathered while acting in the environment.
#[derive(Debug, Clone)]
pub struct ExperienceStore {
    n_states: usize,
    joint_actions: usize,
    counts: DenseTensor,
    rewards: DenseTensor,
    mask: DenseTensor,
    unique_visited: usize,
}

impl ExperienceStore {
    pub fn new(n_states: usize, action_dims: &[usize]) -> Self {
        let mut tshape = Vec::with_capacity(action_dims.len() + 2);
        tshape.push(n_states);
        tshape.extend_from_slice(action_dims);
        let mut rshape = tshape.clone();
        tshape.push(n_states);
        let _ = rshape.pop();
        let mut reward_shape = vec![n_states];
        reward_shape.extend_from_slice(action_dims);
        Self {
            n_states,
            joint_actions: action_dims.iter().product(),
            counts: DenseTensor::zeros(tshape),
            rewards: DenseTensor::zeros(reward_shape.clone()),
            mask: DenseTensor::zeros(reward_shape),
            unique_visited: 0,
        }
    }

    /// Records one transition: increments the (s, a, s') count, overwrites
    /// the (deterministic) reward, and marks (s, a) as visited.
    pub fn record(&mut self, state: usize, action: usize, reward: f64, next_state: usize) {
        let sa = state * self.joint_actions + action;
        self.counts.data_mut()[sa * self.n_states + next_state] += 1.0;
        self.rewards.data_mut()[sa] = reward;
        if self.mask.data()[sa] == 0.0 {
            self.mask.data_mut()[sa] = 1.0;
            self.unique_visited += 1;
        }
    }

    pub fn counts(&self) -> &DenseTensor {
        &self.counts
    }

    pub fn rewards(&self) -> &DenseTensor {
        &self.rewards
    }

    pub fn mask(&self) -> &DenseTensor {
        &self.mask
    }

    /// Number of distinct (state, joint-action) pairs seen so far.
    pub fn unique_visited(&self) -> usize {
        self.unique_visited
    }

    pub fn total_count(&self) -> f64 {
        self.counts.data().iter().sum()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn joint_actions(&self) -> usize {
        self.joint_actions
    }
}

/// Estimated MDP model with a provenance tag for logging.
#[derive(Debug, Clone)]
pub struct ModelEstimate {
    pub transition: DenseTensor,
    pub reward: DenseTensor,
    pub provenance: String,
    /// Non-fatal fitting events (e.g. a completion that failed and was
    /// replaced by a zero estimate).
    pub notes: Vec<String>,
}

/// Maximum-likelihood transition estimate: every (s, a) slice divided by its
/// count sum; never-visited slices become uniform 1/S.
pub fn normalize_counts(counts: &DenseTensor) -> DenseTensor {
    let n_states = *counts.shape().last().expect("transition counts");
    let mut data = counts.data().to_vec();
    let uniform = 1.0 / n_states as f64;
    for chunk in data.chunks_mut(n_states) {
        let sum: f64 = chunk.iter().sum();
        if sum > 0.0 {
            for x in chunk.iter_mut() {
                *x /= sum;
            }
        } else {
            chunk.fill(uniform);
        }
    }
    DenseTensor::new(counts.shape().to_vec(), data).expect("finite normalized counts")
}

/// Clamps negatives to zero and rescales every next-state slice to sum 1;
/// slices left with no positive mass fall back to uniform.
pub fn renormalize_transition(estimate: &mut DenseTensor) {
    let n_states = *estimate.shape().last().expect("transition estimate");
    let uniform = 1.0 / n_states as f64;
    for chunk in estimate.data_mut().chunks_mut(n_states) {
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
            chunk.fill(uniform);
        }
    }
}

/// Baseline estimator: maximum-likelihood transitions; observed rewards kept
/// as-is and unobserved entries filled with the mean of the observed values
/// (0 when nothing is observed).
pub fn baseline_model(store: &ExperienceStore) -> ModelEstimate {
    let transition = normalize_counts(store.counts());
    let observed = store.unique_visited() as f64;
    let mean = if observed > 0.0 {
        store
            .rewards()
            .data()
            .iter()
            .zip(store.mask().data())
            .map(|(r, m)| r * m)
            .sum::<f64>()
            / observed
    } else {
        0.0
    };
    let reward_data: Vec<f64> = store
        .rewards()
        .data()
        .iter()
        .zip(store.mask().data())
        .map(|(&r, &m)| if m == 1.0 { r } else { mean })
        .collect();
    let reward = DenseTensor::new(store.rewards().shape().to_vec(), reward_data)
        .expect("finite reward estimate");
    ModelEstimate {
        transition,
        reward,
        provenance: "baseline".into(),
        notes: Vec::new(),
    }
}

/// Full state-action CP estimator: decompose the normalized count tensor at
/// `rank_t`, re-normalize the reconstruction, and complete the reward tensor
/// at `rank_r` under the visitation mask.
pub fn full_cp_model(store: &ExperienceStore, cfg: &AgentConfig, seed: u64) -> Result<ModelEstimate> {
    let AgentKind::FullCp { rank_t, rank_r } = cfg.kind else {
        return Err(MarlError::InvalidConfig(
            "full_cp_model requires a FullCp agent kind".into(),
        ));
    };
    let mut notes = Vec::new();

    let normalized = normalize_counts(store.counts());
    let tcfg = cfg.decomp.clone().with_rank(rank_t).with_seed(seed);
    let cp = decompose(&normalized, &tcfg)?;
    let mut transition = cp.reconstruct(normalized.shape())?;
    renormalize_transition(&mut transition);

    let rcfg = cfg.decomp.clone().with_rank(rank_r).with_seed(seed ^ 0x5eed);
    let reward = complete_reward_tensor(
        store.rewards(),
        store.mask(),
        &rcfg,
        cfg.value_clamp,
        &mut notes,
    );

    Ok(ModelEstimate {
        transition,
        reward,
        provenance: format!("full-cp({rank_t}, {rank_r})"),
        notes,
    })
}

/// Tesseract-style estimator: for every (s, s') pair, decompose the
/// A_1×...×A_n slice of the normalized counts at `rank` and reassemble; for
/// every state, complete the reward slice under that state's mask. States
/// with no observed rewards keep a zero slice.
pub fn tesseract_model(
    store: &ExperienceStore,
    cfg: &AgentConfig,
    seed: u64,
) -> Result<ModelEstimate> {
    let AgentKind::Tesseract { rank } = cfg.kind else {
        return Err(MarlError::InvalidConfig(
            "tesseract_model requires a Tesseract agent kind".into(),
        ));
    };
    let mut notes = Vec::new();
    let n_states = store.n_states();
    let joint = store.joint_actions();

    let normalized = normalize_counts(store.counts());
    let n_modes = normalized.order();
    let mut transition = DenseTensor::zeros(normalized.shape().to_vec());
    for s in 0..n_states {
        for s2 in 0..n_states {
            let slice = normalized.fix_modes(&[(0, s), (n_modes - 1, s2)])?;
            let fitted = if slice.frobenius_norm() == 0.0 {
                // An all-zero slice is already exactly representable.
                slice
            } else {
                let scfg = cfg
                    .decomp
                    .clone()
                    .with_rank(rank)
                    .with_seed(crate::seeds::mix(seed, &[s as u64, s2 as u64]));
                decompose(&slice, &scfg)?.reconstruct(slice.shape())?
            };
            // Scatter back: entries for fixed (s, s') sit at stride S.
            let base = s * joint * n_states + s2;
            let dst = transition.data_mut();
            for (a, &value) in fitted.data().iter().enumerate() {
                dst[base + a * n_states] = value;
            }
        }
    }
    renormalize_transition(&mut transition);

    let mut reward = DenseTensor::zeros(store.rewards().shape().to_vec());
    for s in 0..n_states {
        let reward_slice = store.rewards().fix_modes(&[(0, s)])?;
        let mask_slice = store.mask().fix_modes(&[(0, s)])?;
        let rcfg = cfg
            .decomp
            .clone()
            .with_rank(rank)
            .with_seed(crate::seeds::mix(seed, &[0x4e, s as u64]));
        let fitted = complete_reward_tensor(
            &reward_slice,
            &mask_slice,
            &rcfg,
            cfg.value_clamp,
            &mut notes,
        );
        reward.data_mut()[s * joint..(s + 1) * joint].copy_from_slice(fitted.data());
    }

    Ok(ModelEstimate {
        transition,
        reward,
        provenance: format!("tesseract({rank})"),
        notes,
    })
}

/// Fits the model matching the agent kind.
pub fn fit_model(store: &ExperienceStore, cfg: &AgentConfig, seed: u64) -> Result<ModelEstimate> {
    match cfg.kind {
        AgentKind::Baseline => Ok(baseline_model(store)),
        AgentKind::FullCp { .. } => full_cp_model(store, cfg, seed),
        AgentKind::Tesseract { .. } => tesseract_model(store, cfg, seed),
    }
}

/// Masked reward completion with the degenerate cases resolved: no observed
/// entries or an all-zero observation yields a zero tensor, and a completion
/// failure is logged and replaced by zeros rather than aborting training.
fn complete_reward_tensor(
    rewards: &DenseTensor,
    mask: &DenseTensor,
    cfg: &DecompConfig,
    value_clamp: Option<f64>,
    notes: &mut Vec<String>,
) -> DenseTensor {
    let zeros = || DenseTensor::zeros(rewards.shape().to_vec());
    let observed_any = mask.data().iter().any(|&m| m != 0.0);
    if !observed_any {
        return zeros();
    }
    let masked_norm = rewards
        .entrywise_multiply(mask)
        .map(|m| m.frobenius_norm())
        .unwrap_or(0.0);
    if masked_norm == 0.0 {
        // Every observed reward is exactly zero.
        return zeros();
    }
    let mask = match ObservationMask::new(mask.clone()) {
        Ok(m) => m,
        Err(e) => {
            notes.push(format!("invalid reward mask: {e}"));
            return zeros();
        }
    };
    match complete(rewards, &mask, cfg).and_then(|cp| Ok(cp.reconstruct(rewards.shape())?)) {
        Ok(mut estimate) => {
            if let Some(clamp) = value_clamp {
                for x in estimate.data_mut() {
                    *x = x.clamp(-clamp, clamp);
                }
            }
            estimate
        }
        Err(e) => {
            notes.push(format!("reward completion failed: {e}"));
            zeros()
        }
    }
}

/// Plans on the estimated MDP: policy improvement warm-started from the
/// current policy, capped at `n_improvement_iter` rounds. A zero cap returns
/// the input policy unchanged.
pub fn plan(
    model: &ModelEstimate,
    policy: &Policy,
    discount: f64,
    n_improvement_iter: usize,
) -> Result<Policy> {
    if n_improvement_iter == 0 {
        return Ok(policy.clone());
    }
    let mdp = TabularMDP::new(model.transition.clone(), model.reward.clone(), discount)?;
    Ok(policy_improvement(&mdp, policy, n_improvement_iter)?.policy)
}

/// Builds `Σ_s e_s ⊗ R_s` from per-state slices; the reassembled tensor's
/// first mode indexes the slices.
pub fn assemble_per_state(slices: &[DenseTensor]) -> Result<DenseTensor> {
    let first = slices.first().ok_or_else(|| {
        MarlError::InvalidConfig("assemble_per_state needs at least one slice".into())
    })?;
    let slice_shape = first.shape().to_vec();
    let mut shape = vec![slices.len()];
    shape.extend_from_slice(&slice_shape);
    let mut out = DenseTensor::zeros(shape);
    let len = first.len();
    for (s, slice) in slices.iter().enumerate() {
        if slice.shape() != slice_shape {
            return Err(MarlError::Tensor(tensor_core::TensorError::ShapeMismatch {
                a: slice_shape,
                b: slice.shape().to_vec(),
            }));
        }
        out.data_mut()[s * len..(s + 1) * len].copy_from_slice(slice.data());
    }
    Ok(out)
}
