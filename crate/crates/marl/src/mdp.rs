//! Tabular multi-agent MDP environment with exact policy evaluation and
//! policy improvement.
//!
//! The transition function is a dense tensor of shape S×A_1×...×A_n×S and
//! the reward a tensor of shape S×A_1×...×A_n; a joint action is a flat
//! index into A_1×...×A_n in the same row-major order as the tensors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use rand::SeedableRng;
use tensor_core::DenseTensor;

use crate::{MarlError, Result};

/// Tolerance for transition-slice normalization checks.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Entries above this negative floor are clamped to zero at construction.
pub const NEGATIVE_CLAMP: f64 = -1e-12;
/// A state counts as improvable when some action beats its value by more
/// than this.
pub const IMPROVEMENT_TOL: f64 = 1e-9;
/// Acceptable Bellman residual for an exact policy evaluation.
pub const EVALUATION_RESIDUAL_TOL: f64 = 1e-9;

/// Finite multi-agent MDP with dense transition and reward tensors.
#[derive(Debug, Clone)]
pub struct TabularMDP {
    n_states: usize,
    action_dims: Vec<usize>,
    joint_actions: usize,
    transition: DenseTensor,
    reward: DenseTensor,
    discount: f64,
}

impl TabularMDP {
    /// Validates shapes, the discount, and that every (s, a) slice of the
    /// transition tensor is a probability distribution: entries ≥ 0 (values
    /// above [`NEGATIVE_CLAMP`] are clamped to zero) summing to 1 within
    /// [`NORMALIZATION_TOL`].
    pub fn new(transition: DenseTensor, reward: DenseTensor, discount: f64) -> Result<Self> {
        if !(0.0 < discount && discount < 1.0) {
            return Err(MarlError::BadDiscount(discount));
        }
        let tshape = transition.shape().to_vec();
        if tshape.len() < 3 {
            return Err(MarlError::InvalidMdp(format!(
                "transition tensor must be at least order 3, got shape {tshape:?}"
            )));
        }
        let n_states = tshape[0];
        if *tshape.last().unwrap() != n_states {
            return Err(MarlError::InvalidMdp(format!(
                "first and last transition modes must both be the state count, got {tshape:?}"
            )));
        }
        let action_dims = tshape[1..tshape.len() - 1].to_vec();
        let expected_reward: Vec<usize> = tshape[..tshape.len() - 1].to_vec();
        if reward.shape() != expected_reward {
            return Err(MarlError::InvalidMdp(format!(
                "reward shape {:?} does not match state-action shape {expected_reward:?}",
                reward.shape()
            )));
        }
        let joint_actions: usize = action_dims.iter().product();

        let mut transition = transition;
        {
            let data = transition.data_mut();
            for (slice_idx, chunk) in data.chunks_mut(n_states).enumerate() {
                let mut sum = 0.0;
                for (next, value) in chunk.iter_mut().enumerate() {
                    if *value < 0.0 {
                        if *value < NEGATIVE_CLAMP {
                            return Err(MarlError::NegativeProbability {
                                state: slice_idx / joint_actions,
                                action: slice_idx % joint_actions,
                                next,
                                value: *value,
                            });
                        }
                        *value = 0.0;
                    }
                    sum += *value;
                }
                if (sum - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(MarlError::SliceNotNormalized {
                        state: slice_idx / joint_actions,
                        action: slice_idx % joint_actions,
                        sum,
                    });
                }
            }
        }

        Ok(Self {
            n_states,
            action_dims,
            joint_actions,
            transition,
            reward,
            discount,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn action_dims(&self) -> &[usize] {
        &self.action_dims
    }

    /// Size of the joint action space ∏ A_i.
    pub fn joint_actions(&self) -> usize {
        self.joint_actions
    }

    /// Total number of state-action pairs S·∏A_i.
    pub fn state_action_pairs(&self) -> usize {
        self.n_states * self.joint_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn transition(&self) -> &DenseTensor {
        &self.transition
    }

    pub fn reward(&self) -> &DenseTensor {
        &self.reward
    }

    /// Next-state distribution for one state-action pair (contiguous slice).
    pub fn transition_slice(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.joint_actions + action) * self.n_states;
        &self.transition.data()[base..base + self.n_states]
    }

    pub fn reward_at(&self, state: usize, action: usize) -> f64 {
        self.reward.data()[state * self.joint_actions + action]
    }

    /// Samples `s' ~ T(·|s, a)` and returns it with the deterministic reward.
    pub fn step<R: Rng>(&self, state: usize, action: usize, rng: &mut R) -> (usize, f64) {
        let slice = self.transition_slice(state, action);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = self.n_states - 1;
        for (i, &p) in slice.iter().enumerate() {
            acc += p;
            if u < acc {
                next = i;
                break;
            }
        }
        (next, self.reward_at(state, action))
    }
}

/// Deterministic policy: one joint action per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(actions: Vec<usize>, joint_actions: usize) -> Result<Self> {
        for (state, &action) in actions.iter().enumerate() {
            if action >= joint_actions {
                return Err(MarlError::PolicyOutOfRange {
                    state,
                    action,
                    joint_actions,
                });
            }
        }
        Ok(Self { actions })
    }

    /// Uniformly random joint action for every state.
    pub fn random(n_states: usize, joint_actions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actions = (0..n_states)
            .map(|_| rng.gen_range(0..joint_actions))
            .collect();
        Self { actions }
    }

    pub fn action(&self, state: usize) -> usize {
        self.actions[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn n_states(&self) -> usize {
        self.actions.len()
    }
}

/// Q-values over all state-action pairs.
#[derive(Debug, Clone)]
pub struct QTable {
    values: Vec<f64>,
    joint_actions: usize,
}

impl QTable {
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.joint_actions + action]
    }

    /// Greedy action and its value; ties break toward the lowest index.
    pub fn argmax(&self, state: usize) -> (usize, f64) {
        let row = &self.values[state * self.joint_actions..(state + 1) * self.joint_actions];
        let mut best = 0;
        let mut best_value = row[0];
        for (a, &q) in row.iter().enumerate().skip(1) {
            if q > best_value {
                best = a;
                best_value = q;
            }
        }
        (best, best_value)
    }
}

/// State values V^π.
pub type ValueTable = Vec<f64>;

/// Exact policy evaluation: solves `(I - γ P_π) V = R_π` directly, then
/// fills `Q(s,a) = R(s,a) + γ Σ_{s'} T(s'|s,a) V(s')`.
pub fn evaluate_policy(mdp: &TabularMDP, policy: &Policy) -> Result<(QTable, ValueTable)> {
    let s_count = mdp.n_states();
    if policy.n_states() != s_count {
        return Err(MarlError::InvalidMdp(format!(
            "policy covers {} states, MDP has {s_count}",
            policy.n_states()
        )));
    }
    let gamma = mdp.discount();

    // System matrix I - γ P_π and right-hand side R_π.
    let mut a = vec![0.0; s_count * s_count];
    let mut b = vec![0.0; s_count];
    for s in 0..s_count {
        let action = policy.action(s);
        let row = mdp.transition_slice(s, action);
        for (s2, &p) in row.iter().enumerate() {
            a[s * s_count + s2] = -gamma * p;
        }
        a[s * s_count + s] += 1.0;
        b[s] = mdp.reward_at(s, action);
    }
    let v = solve_linear(a, s_count, b)?;

    // Bellman residual check.
    let mut residual: f64 = 0.0;
    for s in 0..s_count {
        let action = policy.action(s);
        let row = mdp.transition_slice(s, action);
        let mut rhs = mdp.reward_at(s, action);
        for (s2, &p) in row.iter().enumerate() {
            rhs += gamma * p * v[s2];
        }
        residual = residual.max((v[s] - rhs).abs());
    }
    if residual > EVALUATION_RESIDUAL_TOL {
        return Err(MarlError::EvaluationResidual { residual });
    }

    let joint = mdp.joint_actions();
    let mut q = vec![0.0; s_count * joint];
    for s in 0..s_count {
        for action in 0..joint {
            let row = mdp.transition_slice(s, action);
            let mut value = mdp.reward_at(s, action);
            for (s2, &p) in row.iter().enumerate() {
                if p != 0.0 {
                    value += gamma * p * v[s2];
                }
            }
            q[s * joint + action] = value;
        }
    }
    Ok((
        QTable {
            values: q,
            joint_actions: joint,
        },
        v,
    ))
}

/// One batch of policy improvement plus its evaluation artifacts.
#[derive(Debug, Clone)]
pub struct ImprovementOutcome {
    pub policy: Policy,
    pub q: QTable,
    pub values: ValueTable,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates evaluation and greedy improvement: every state whose best
/// Q-value beats its current value by more than [`IMPROVEMENT_TOL`] switches
/// to the argmax action (lowest index on ties). Stops when no state is
/// improvable or after `max_iters` improvement rounds.
pub fn policy_improvement(
    mdp: &TabularMDP,
    start: &Policy,
    max_iters: usize,
) -> Result<ImprovementOutcome> {
    let mut policy = start.clone();
    let (mut q, mut values) = evaluate_policy(mdp, &policy)?;
    let mut iterations = 0;
    let mut converged = improvable_states(&q, &values).is_empty();

    while !converged && iterations < max_iters {
        let improvable = improvable_states(&q, &values);
        if improvable.is_empty() {
            converged = true;
            break;
        }
        let mut actions = policy.actions().to_vec();
        for s in improvable {
            actions[s] = q.argmax(s).0;
        }
        policy = Policy::new(actions, mdp.joint_actions())?;
        let (new_q, new_values) = evaluate_policy(mdp, &policy)?;
        q = new_q;
        values = new_values;
        iterations += 1;
        converged = improvable_states(&q, &values).is_empty();
    }

    Ok(ImprovementOutcome {
        policy,
        q,
        values,
        iterations,
        converged,
    })
}

fn improvable_states(q: &QTable, values: &ValueTable) -> Vec<usize> {
    (0..values.len())
        .filter(|&s| q.argmax(s).1 > values[s] + IMPROVEMENT_TOL)
        .collect()
}

/// Optimal policy by policy improvement from a seeded random start, run to
/// convergence. The iteration cap S·∏A_i is the theoretical bound on the
/// number of improvement rounds.
pub fn optimal_policy(mdp: &TabularMDP, seed: u64) -> Result<ImprovementOutcome> {
    let start = Policy::random(mdp.n_states(), mdp.joint_actions(), seed);
    let cap = mdp.n_states() * mdp.joint_actions();
    let outcome = policy_improvement(mdp, &start, cap)?;
    if !outcome.converged {
        return Err(MarlError::InvalidMdp(
            "policy improvement failed to converge within the theoretical bound".into(),
        ));
    }
    Ok(outcome)
}

fn solve_linear(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Result<Vec<f64>> {
    // Gaussian elimination with partial pivoting; the system matrix
    // I - γ P_π is strictly diagonally dominant for γ < 1.
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col] == 0.0 {
            return Err(MarlError::LinearSolve(format!(
                "zero pivot in column {col}"
            )));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] * inv;
            if factor != 0.0 {
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// Uniform categorical sampler over joint actions.
pub fn uniform_joint_action<R: Rng>(joint_actions: usize, rng: &mut R) -> usize {
    rand::distributions::Uniform::new(0, joint_actions).sample(rng)
}
