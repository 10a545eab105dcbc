//! End-to-end training loop for the synthetic-MDP experiments: ε-greedy
//! exploration, periodic model refits and replanning, metric tracking over
//! seeded repetitions, and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cp_decomp::DecompConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tensor_core::DenseTensor;

use crate::agents::{fit_model, plan, AgentConfig, AgentKind, ExperienceStore};
use crate::gen::{build_degenerate_mdp, build_experiment1_mdp};
use crate::mdp::{optimal_policy, uniform_joint_action, Policy, TabularMDP};
use crate::seeds::mix;
use crate::{MarlError, Result};

// Stream tags for deriving independent RNG seeds.
const STREAM_MDP: u64 = 1;
const STREAM_OPT: u64 = 2;
const STREAM_OPT_EVAL: u64 = 3;
const STREAM_TRAIN: u64 = 4;
const STREAM_EVAL: u64 = 5;
const STREAM_POLICY: u64 = 6;
const STREAM_FIT: u64 = 7;

/// Which synthetic MDP an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    /// 20 states, 3 agents × 10 actions, rank-5 transition and reward.
    Rank5,
    /// 16 states in 4 degenerate groups, 3 agents × 20 actions.
    Degenerate,
}

impl ExperimentId {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "rank5" => Ok(ExperimentId::Rank5),
            "degenerate" => Ok(ExperimentId::Degenerate),
            other => Err(MarlError::Parse(format!(
                "unknown experiment `{other}` (expected rank5 or degenerate)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::Rank5 => "rank5",
            ExperimentId::Degenerate => "degenerate",
        }
    }
}

/// Full experiment configuration; see [`ExperimentConfig::defaults`] for the
/// per-experiment agent rosters and hyperparameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub agents: Vec<AgentKind>,
    pub n_episodes: usize,
    /// Models are refit and the policy replanned every `n_train` episodes.
    pub n_train: usize,
    pub episode_length: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub discount: f64,
    pub n_improvement_iter: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    /// Greedy evaluation episodes per checkpoint.
    pub eval_episodes: usize,
    /// Greedy rollouts used to estimate the optimal return for regret
    /// normalization.
    pub optimal_rollouts: usize,
    /// Optional clamp on completed reward magnitudes (off by default).
    pub value_clamp: Option<f64>,
    /// Solver settings for agent model fits (rank and seed are set per fit).
    pub decomp: DecompConfig,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId) -> Self {
        let agents = match experiment {
            ExperimentId::Rank5 => vec![
                AgentKind::Baseline,
                AgentKind::FullCp { rank_t: 3, rank_r: 3 },
                AgentKind::FullCp { rank_t: 5, rank_r: 5 },
                AgentKind::FullCp {
                    rank_t: 10,
                    rank_r: 10,
                },
                AgentKind::Tesseract { rank: 1 },
                AgentKind::Tesseract { rank: 5 },
            ],
            ExperimentId::Degenerate => vec![
                AgentKind::Baseline,
                AgentKind::FullCp { rank_t: 4, rank_r: 4 },
                AgentKind::FullCp { rank_t: 8, rank_r: 8 },
                AgentKind::Tesseract { rank: 1 },
                AgentKind::Tesseract { rank: 4 },
            ],
        };
        Self {
            experiment,
            agents,
            n_episodes: 200,
            n_train: 10,
            episode_length: 100,
            eps_start: 0.9,
            eps_end: 0.1,
            discount: 0.9,
            n_improvement_iter: 10,
            repetitions: 20,
            base_seed: 20240 + experiment as u64,
            eval_episodes: 5,
            optimal_rollouts: 1000,
            value_clamp: None,
            decomp: harness_decomp_defaults(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(MarlError::InvalidConfig("empty agent roster".into()));
        }
        if self.n_train == 0 || self.n_episodes % self.n_train != 0 {
            return Err(MarlError::InvalidConfig(format!(
                "n_train {} must divide n_episodes {}",
                self.n_train, self.n_episodes
            )));
        }
        for eps in [self.eps_start, self.eps_end] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(MarlError::InvalidConfig(format!("epsilon {eps} outside [0, 1]")));
            }
        }
        if self.repetitions == 0 {
            return Err(MarlError::InvalidConfig("repetitions must be >= 1".into()));
        }
        if !(0.0 < self.discount && self.discount < 1.0) {
            return Err(MarlError::BadDiscount(self.discount));
        }
        if self.episode_length == 0 || self.eval_episodes == 0 || self.optimal_rollouts == 0 {
            return Err(MarlError::InvalidConfig(
                "episode_length, eval_episodes, and optimal_rollouts must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Applies one `key = value` override from a config file.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| MarlError::Parse(format!("bad {what} value `{value}`"));
        match key {
            "experiment" => self.experiment = ExperimentId::parse(value)?,
            "agents" => self.agents = parse_agent_list(value)?,
            "n_episodes" => self.n_episodes = value.parse().map_err(|_| bad(key))?,
            "n_train" => self.n_train = value.parse().map_err(|_| bad(key))?,
            "episode_length" => self.episode_length = value.parse().map_err(|_| bad(key))?,
            "eps_start" => self.eps_start = value.parse().map_err(|_| bad(key))?,
            "eps_end" => self.eps_end = value.parse().map_err(|_| bad(key))?,
            "discount" => self.discount = value.parse().map_err(|_| bad(key))?,
            "n_improvement_iter" => {
                self.n_improvement_iter = value.parse().map_err(|_| bad(key))?
            }
            "repetitions" => self.repetitions = value.parse().map_err(|_| bad(key))?,
            "base_seed" => self.base_seed = value.parse().map_err(|_| bad(key))?,
            "eval_episodes" => self.eval_episodes = value.parse().map_err(|_| bad(key))?,
            "optimal_rollouts" => self.optimal_rollouts = value.parse().map_err(|_| bad(key))?,
            "value_clamp" => {
                self.value_clamp = if value == "off" || value == "none" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad(key))?)
                }
            }
            "power_tolerance" => self.decomp.power_tolerance = value.parse().map_err(|_| bad(key))?,
            "power_max_iters" => self.decomp.power_max_iters = value.parse().map_err(|_| bad(key))?,
            "altmin_max_sweeps" => {
                self.decomp.altmin_max_sweeps = value.parse().map_err(|_| bad(key))?
            }
            "altmin_tolerance" => {
                self.decomp.altmin_tolerance = value.parse().map_err(|_| bad(key))?
            }
            other => return Err(MarlError::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` config file over the given defaults.
    /// `#` starts a comment.
    pub fn from_text(text: &str, defaults: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = defaults;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(MarlError::Parse(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Human-readable record of every configuration field.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let agents: Vec<String> = self.agents.iter().map(|a| a.name()).collect();
        let _ = writeln!(out, "experiment = {}", self.experiment.name());
        let _ = writeln!(out, "agents = {}", agents.join(" "));
        let _ = writeln!(out, "n_episodes = {}", self.n_episodes);
        let _ = writeln!(out, "n_train = {}", self.n_train);
        let _ = writeln!(out, "episode_length = {}", self.episode_length);
        let _ = writeln!(out, "eps_start = {}", self.eps_start);
        let _ = writeln!(out, "eps_end = {}", self.eps_end);
        let _ = writeln!(out, "discount = {}", self.discount);
        let _ = writeln!(out, "n_improvement_iter = {}", self.n_improvement_iter);
        let _ = writeln!(out, "repetitions = {}", self.repetitions);
        let _ = writeln!(out, "base_seed = {}", self.base_seed);
        let _ = writeln!(out, "eval_episodes = {}", self.eval_episodes);
        let _ = writeln!(out, "optimal_rollouts = {}", self.optimal_rollouts);
        let _ = writeln!(
            out,
            "value_clamp = {}",
            self.value_clamp.map_or("off".into(), |c| c.to_string())
        );
        let _ = writeln!(out, "power_tolerance = {}", self.decomp.power_tolerance);
        let _ = writeln!(out, "power_max_iters = {}", self.decomp.power_max_iters);
        let _ = writeln!(out, "altmin_max_sweeps = {}", self.decomp.altmin_max_sweeps);
        let _ = writeln!(out, "altmin_tolerance = {}", self.decomp.altmin_tolerance);
        out
    }
}

/// Solver settings used by the harness for agent model fits. Model estimates
/// are refit every few episodes from noisy counts, so per-fit polish below
/// these tolerances does not change the tracked metrics.
pub fn harness_decomp_defaults() -> DecompConfig {
    DecompConfig {
        rank: 1,
        power_tolerance: 1e-7,
        power_max_iters: 200,
        altmin_max_sweeps: 100,
        altmin_tolerance: 1e-7,
        seed: 0,
    }
}

fn parse_agent_list(text: &str) -> Result<Vec<AgentKind>> {
    let mut agents = Vec::new();
    for token in text.split([' ', ',']).filter(|t| !t.is_empty()) {
        agents.push(parse_agent_kind(token)?);
    }
    if agents.is_empty() {
        return Err(MarlError::Parse("empty agent list".into()));
    }
    Ok(agents)
}

/// Agent grammar: `baseline`, `full-cp:R`, `full-cp:RT:RR`, `tesseract:R`.
pub fn parse_agent_kind(token: &str) -> Result<AgentKind> {
    let mut parts = token.split(':');
    let head = parts.next().unwrap_or("");
    let ranks: Vec<&str> = parts.collect();
    let parse_rank = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| MarlError::Parse(format!("bad rank `{s}` in agent `{token}`")))
    };
    match (head, ranks.as_slice()) {
        ("baseline", []) => Ok(AgentKind::Baseline),
        ("full-cp", [r]) => {
            let r = parse_rank(r)?;
            Ok(AgentKind::FullCp { rank_t: r, rank_r: r })
        }
        ("full-cp", [rt, rr]) => Ok(AgentKind::FullCp {
            rank_t: parse_rank(rt)?,
            rank_r: parse_rank(rr)?,
        }),
        ("tesseract", [r]) => Ok(AgentKind::Tesseract {
            rank: parse_rank(r)?,
        }),
        _ => Err(MarlError::Parse(format!("unknown agent spec `{token}`"))),
    }
}

/// Linear ε schedule from `eps_start` at episode 1 to `eps_end` at the final
/// episode, clamped to the endpoint interval.
pub fn epsilon(episode: usize, cfg: &ExperimentConfig) -> f64 {
    let lo = cfg.eps_start.min(cfg.eps_end);
    let hi = cfg.eps_start.max(cfg.eps_end);
    if cfg.n_episodes <= 1 {
        return cfg.eps_end.clamp(lo, hi);
    }
    let t = (episode.saturating_sub(1)) as f64 / (cfg.n_episodes - 1) as f64;
    (cfg.eps_start + (cfg.eps_end - cfg.eps_start) * t).clamp(lo, hi)
}

/// One training episode: ε-greedy actions from a uniformly sampled start
/// state, recording every transition in the store.
pub fn run_episode(
    mdp: &TabularMDP,
    policy: &Policy,
    eps: f64,
    episode_length: usize,
    store: &mut ExperienceStore,
    rng: &mut ChaCha8Rng,
) {
    let mut state = rng.gen_range(0..mdp.n_states());
    for _ in 0..episode_length {
        let action = if rng.gen::<f64>() < eps {
            uniform_joint_action(mdp.joint_actions(), rng)
        } else {
            policy.action(state)
        };
        let (next, reward) = mdp.step(state, action, rng);
        store.record(state, action, reward, next);
        state = next;
    }
}

/// Mean undiscounted total reward of greedy rollouts; no store updates.
pub fn evaluate(
    mdp: &TabularMDP,
    policy: &Policy,
    episodes: usize,
    episode_length: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = rng.gen_range(0..mdp.n_states());
        for _ in 0..episode_length {
            let (next, reward) = mdp.step(state, policy.action(state), rng);
            total += reward;
            state = next;
        }
    }
    total / episodes as f64
}

/// Metrics at one training checkpoint.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub episode: usize,
    pub agent: String,
    /// Test-time mean episodic reward minus the optimal policy's estimated
    /// return (0 is optimal).
    pub regret: f64,
    /// Sum of squared errors of the reward estimate over all entries.
    pub reward_sse: f64,
    /// Mean squared error of the transition estimate over all entries.
    pub transition_mse: f64,
    /// Cumulative distinct (state, joint action) pairs visited.
    pub unique_visited: usize,
}

/// All checkpoint metrics of one repetition.
#[derive(Debug, Clone)]
pub struct MetricsLog {
    pub repetition: usize,
    pub mdp_seed: u64,
    pub optimal_return: f64,
    pub rows: Vec<MetricsRow>,
    /// Non-fatal fitting events (completion failures and the like).
    pub events: Vec<String>,
}

/// Builds the experiment MDP for one repetition.
pub fn build_mdp(cfg: &ExperimentConfig, repetition: usize) -> Result<(TabularMDP, u64)> {
    let seed = mix(cfg.base_seed, &[STREAM_MDP, repetition as u64]);
    let mdp = match cfg.experiment {
        ExperimentId::Rank5 => build_experiment1_mdp(seed, cfg.discount)?,
        ExperimentId::Degenerate => build_degenerate_mdp(seed, cfg.discount)?,
    };
    Ok((mdp, seed))
}

/// Trains every agent in the roster for one repetition and logs metrics at
/// each retraining checkpoint.
pub fn run_repetition(
    cfg: &ExperimentConfig,
    repetition: usize,
    dump_dir: Option<&Path>,
) -> Result<MetricsLog> {
    let rep = repetition as u64;
    let (mdp, mdp_seed) = build_mdp(cfg, repetition)?;

    let optimal = optimal_policy(&mdp, mix(cfg.base_seed, &[STREAM_OPT, rep]))?;
    let mut opt_rng =
        ChaCha8Rng::seed_from_u64(mix(cfg.base_seed, &[STREAM_OPT_EVAL, rep]));
    let optimal_return = evaluate(
        &mdp,
        &optimal.policy,
        cfg.optimal_rollouts,
        cfg.episode_length,
        &mut opt_rng,
    );

    let mut rows = Vec::new();
    let mut events = Vec::new();
    for (agent_idx, kind) in cfg.agents.iter().enumerate() {
        let ai = agent_idx as u64;
        let name = kind.name();
        let agent_cfg = AgentConfig {
            kind: *kind,
            decomp: cfg.decomp.clone(),
            n_improvement_iter: cfg.n_improvement_iter,
            value_clamp: cfg.value_clamp,
        };
        let mut store = ExperienceStore::new(mdp.n_states(), mdp.action_dims());
        let mut train_rng =
            ChaCha8Rng::seed_from_u64(mix(cfg.base_seed, &[STREAM_TRAIN, rep, ai]));
        let mut eval_rng =
            ChaCha8Rng::seed_from_u64(mix(cfg.base_seed, &[STREAM_EVAL, rep, ai]));
        let mut policy = Policy::random(
            mdp.n_states(),
            mdp.joint_actions(),
            mix(cfg.base_seed, &[STREAM_POLICY, rep, ai]),
        );

        let mut last_model = None;
        for episode in 1..=cfg.n_episodes {
            run_episode(
                &mdp,
                &policy,
                epsilon(episode, cfg),
                cfg.episode_length,
                &mut store,
                &mut train_rng,
            );
            if episode % cfg.n_train != 0 {
                continue;
            }
            let fit_seed = mix(cfg.base_seed, &[STREAM_FIT, rep, ai, episode as u64]);
            let model = fit_model(&store, &agent_cfg, fit_seed)?;
            for note in &model.notes {
                events.push(format!("rep {repetition} {name} episode {episode}: {note}"));
            }
            policy = plan(&model, &policy, cfg.discount, cfg.n_improvement_iter)?;
            let test_return = evaluate(
                &mdp,
                &policy,
                cfg.eval_episodes,
                cfg.episode_length,
                &mut eval_rng,
            );
            rows.push(MetricsRow {
                episode,
                agent: name.clone(),
                regret: test_return - optimal_return,
                reward_sse: sum_squared_error(&model.reward, mdp.reward()),
                transition_mse: mean_squared_error(&model.transition, mdp.transition()),
                unique_visited: store.unique_visited(),
            });
            last_model = Some(model);
        }

        if let (Some(dir), Some(model)) = (dump_dir, last_model) {
            let agent_dir = dir.join(format!("rep{repetition}")).join(&name);
            fs::create_dir_all(&agent_dir)?;
            tensor_core::io::write_tensor(&agent_dir.join("transition.txt"), &model.transition)
                .map_err(|e| MarlError::Parse(e.to_string()))?;
            tensor_core::io::write_tensor(&agent_dir.join("reward.txt"), &model.reward)
                .map_err(|e| MarlError::Parse(e.to_string()))?;
        }
    }

    Ok(MetricsLog {
        repetition,
        mdp_seed,
        optimal_return,
        rows,
        events,
    })
}

/// Runs every repetition (in parallel when cores allow) and returns the
/// per-repetition logs in order.
pub fn run_experiment(cfg: &ExperimentConfig, dump_dir: Option<&Path>) -> Result<Vec<MetricsLog>> {
    cfg.validate()?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, rep, dump_dir))
        .collect()
}

pub const CSV_HEADER: &str = "episode,agent,regret,reward_sse,transition_mse,unique_visited";

/// Renders one repetition's metrics as CSV.
pub fn metrics_to_csv(log: &MetricsLog) -> String {
    let mut out = String::with_capacity(64 * (log.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &log.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.episode, row.agent, row.regret, row.reward_sse, row.transition_mse,
            row.unique_visited
        );
    }
    out
}

/// Means across repetitions per (agent, episode), in roster and episode
/// order; `unique_visited` becomes a fractional mean.
pub fn mean_metrics_csv(cfg: &ExperimentConfig, logs: &[MetricsLog]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let reps = logs.len() as f64;
    let checkpoints: Vec<usize> = (1..=cfg.n_episodes / cfg.n_train)
        .map(|k| k * cfg.n_train)
        .collect();
    for kind in &cfg.agents {
        let name = kind.name();
        for &episode in &checkpoints {
            let mut regret = 0.0;
            let mut sse = 0.0;
            let mut mse = 0.0;
            let mut unique = 0.0;
            for log in logs {
                let row = log
                    .rows
                    .iter()
                    .find(|r| r.agent == name && r.episode == episode)
                    .expect("complete metrics grid");
                regret += row.regret;
                sse += row.reward_sse;
                mse += row.transition_mse;
                unique += row.unique_visited as f64;
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                episode,
                name,
                regret / reps,
                sse / reps,
                mse / reps,
                unique / reps
            );
        }
    }
    out
}

/// Writes `metrics_run{i}.csv` per repetition, `metrics_mean.csv`, and
/// `manifest.txt` into `out_dir`.
pub fn write_outputs(cfg: &ExperimentConfig, logs: &[MetricsLog], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    for log in logs {
        fs::write(
            out_dir.join(format!("metrics_run{}.csv", log.repetition)),
            metrics_to_csv(log),
        )?;
    }
    fs::write(out_dir.join("metrics_mean.csv"), mean_metrics_csv(cfg, logs))?;

    let mut manifest = cfg.manifest();
    manifest.push('\n');
    for log in logs {
        let _ = writeln!(
            manifest,
            "rep {} mdp_seed = {} optimal_return = {}",
            log.repetition, log.mdp_seed, log.optimal_return
        );
    }
    let events: Vec<&String> = logs.iter().flat_map(|l| l.events.iter()).collect();
    if !events.is_empty() {
        manifest.push_str("\nevents:\n");
        for event in events {
            let _ = writeln!(manifest, "  {event}");
        }
    }
    fs::write(out_dir.join("manifest.txt"), manifest)?;
    Ok(())
}

fn sum_squared_error(estimate: &DenseTensor, truth: &DenseTensor) -> f64 {
    estimate
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn mean_squared_error(estimate: &DenseTensor, truth: &DenseTensor) -> f64 {
    sum_squared_error(estimate, truth) / truth.len() as f64
}
