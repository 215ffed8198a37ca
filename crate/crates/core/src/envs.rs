//! Simulated mean-field MDPs with a central controller.
//!
//! Two families are provided:
//!
//! * [`GaussianDriftParams`]: `N` agents in `R^d` pulled toward their empirical
//!   mean and pushed by an action-dependent drift. Rewards are a sigmoid of the
//!   population mean.
//! * [`DiscreteChainParams`]: agents on a small lattice `{0, …, |S|−1}` with
//!   per-agent transition matrices per action. The mean-field state is the
//!   histogram of a population of `M` units; observations are either the units
//!   themselves (`population = None`, so `M = N`) or `N` i.i.d. draws from the
//!   histogram. States embed into `R^1` at `s · separation`, optionally with
//!   Gaussian jitter.
//!
//! Randomness always flows through [`stream_rng`], so a batch is a pure
//! function of `(seed, record index)`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::fqi::{Batch, GreedyPolicy, TransitionRecord};
use crate::kernels::{ActionId, AgentSample};

/// Counter-based stream: the `stream`-th independent ChaCha8 stream under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counts of population units per lattice state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistogramState(Vec<u32>);

impl HistogramState {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        contract!(!counts.is_empty(), "histogram needs at least one state");
        contract!(counts.iter().any(|&c| c > 0), "histogram must hold at least one unit");
        Ok(HistogramState(counts))
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn n_states(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn fractions(&self) -> Vec<f64> {
        let t = self.total() as f64;
        self.0.iter().map(|&c| c as f64 / t).collect()
    }

    /// Every histogram of `total` units over `n_states` states, in lexicographic
    /// order of the count vectors.
    pub fn all(n_states: usize, total: u32) -> Vec<HistogramState> {
        fn rec(prefix: &mut Vec<u32>, left: u32, slots: usize, out: &mut Vec<HistogramState>) {
            if slots == 1 {
                prefix.push(left);
                out.push(HistogramState(prefix.clone()));
                prefix.pop();
                return;
            }
            for c in 0..=left {
                prefix.push(c);
                rec(prefix, left - c, slots - 1, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n_states >= 1 && total >= 1 {
            rec(&mut Vec::with_capacity(n_states), total, n_states, &mut out);
        }
        out
    }
}

impl std::fmt::Display for HistogramState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDriftParams {
    pub dim: usize,
    /// One drift vector per action.
    pub drift: Vec<Vec<f64>>,
    /// Coupling of each agent toward the empirical mean, in `[0, 1)`.
    pub pull: f64,
    pub noise_std: f64,
    pub reward_weights: Vec<f64>,
    /// One offset per action.
    pub reward_offsets: Vec<f64>,
    #[serde(default)]
    pub init_mean: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub init_std: f64,
}

fn one() -> f64 {
    1.0
}

fn default_separation() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub action: ActionId,
    pub counts: Vec<u32>,
    pub reward: f64,
}

/// Reward as a function of `(action, population histogram)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RewardModel {
    /// Explicit values for every `(action, histogram)` of the population.
    Table { entries: Vec<RewardEntry> },
    /// `clamp(offset_a + Σ_s weight[a][s] · fraction_s, 0, r_max)`.
    Affine { offsets: Vec<f64>, weights: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiscreteInit {
    /// Histogram drawn uniformly among all histograms of the population.
    UniformHistogram,
    /// Each unit independently drawn from `probs`.
    IidUnits { probs: Vec<f64> },
    Fixed { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteChainParams {
    pub n_states: usize,
    /// `transitions[a][s][s']`, row-stochastic per action.
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: RewardModel,
    pub init: DiscreteInit,
    /// Population size `M` when observations are sampled; `None` observes the
    /// `N` agents themselves.
    #[serde(default)]
    pub population: Option<u32>,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub jitter_std: f64,
}

impl DiscreteChainParams {
    /// Every row of every transition matrix is one-hot.
    pub fn is_deterministic(&self) -> bool {
        self.deterministic_map().is_some()
    }

    /// `map[a][s]` = successor of state `s` under action `a`, for deterministic chains.
    pub fn deterministic_map(&self) -> Option<Vec<Vec<usize>>> {
        self.transitions
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| {
                        let ones: Vec<usize> = row
                            .iter()
                            .enumerate()
                            .filter(|(_, &p)| p == 1.0)
                            .map(|(j, _)| j)
                            .collect();
                        let zeros = row.iter().filter(|&&p| p == 0.0).count();
                        (ones.len() == 1 && zeros + 1 == row.len()).then(|| ones[0])
                    })
                    .collect()
            })
            .collect()
    }

    pub fn coordinate(&self, state: usize) -> f64 {
        state as f64 * self.separation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum EnvKind {
    GaussianDrift(GaussianDriftParams),
    DiscreteChain(DiscreteChainParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    #[serde(flatten)]
    pub kind: EnvKind,
    pub n_agents: usize,
    pub r_max: f64,
    pub gamma: f64,
    pub seed: u64,
    /// Additive Gaussian reward noise; noisy rewards are clamped to `[0, r_max]`.
    #[serde(default)]
    pub reward_noise_std: f64,
}

impl EnvSpec {
    pub fn q_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }
}

/// A mean-field state: the observed sample plus, for discrete chains, the
/// population histogram that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub sample: Arc<AgentSample>,
    pub population: Option<HistogramState>,
}

/// How `collect_batch` picks each record's action.
#[derive(Debug, Clone, Copy)]
pub enum ActionPolicy<'a> {
    UniformRandom,
    Fixed(ActionId),
    Greedy(&'a GreedyPolicy),
}

/// A validated environment.
#[derive(Debug, Clone)]
pub struct Env {
    spec: EnvSpec,
    rewards: Option<HashMap<(usize, Vec<u32>), f64>>,
    det_map: Option<Vec<Vec<usize>>>,
    histograms: Vec<HistogramState>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Env {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        if spec.n_agents == 0 {
            return Err(config_err("n_agents must be at least 1"));
        }
        if !(spec.r_max.is_finite() && spec.r_max > 0.0) {
            return Err(config_err("r_max must be positive and finite"));
        }
        if !(spec.gamma >= 0.0 && spec.gamma < 1.0) {
            return Err(config_err(format!("gamma must lie in [0, 1), got {}", spec.gamma)));
        }
        if !(spec.reward_noise_std >= 0.0 && spec.reward_noise_std.is_finite()) {
            return Err(config_err("reward_noise_std must be nonnegative"));
        }
        let mut env = Env { spec, rewards: None, det_map: None, histograms: Vec::new() };
        match env.spec.kind.clone() {
            EnvKind::GaussianDrift(p) => Self::validate_drift(&p)?,
            EnvKind::DiscreteChain(p) => env.prepare_chain(&p)?,
        }
        Ok(env)
    }

    fn validate_drift(p: &GaussianDriftParams) -> Result<()> {
        if p.dim == 0 {
            return Err(config_err("dim must be at least 1"));
        }
        if p.drift.is_empty() || p.drift.iter().any(|d| d.len() != p.dim) {
            return Err(config_err("drift needs one dim-length vector per action"));
        }
        if p.reward_offsets.len() != p.drift.len() {
            return Err(config_err("reward_offsets needs one entry per action"));
        }
        if p.reward_weights.len() != p.dim {
            return Err(config_err("reward_weights must have length dim"));
        }
        if !(0.0..1.0).contains(&p.pull) {
            return Err(config_err("pull must lie in [0, 1)"));
        }
        if !(p.noise_std >= 0.0 && p.init_std >= 0.0) {
            return Err(config_err("noise_std and init_std must be nonnegative"));
        }
        if let Some(m) = &p.init_mean {
            if m.len() != p.dim {
                return Err(config_err("init_mean must have length dim"));
            }
        }
        let finite = p
            .drift
            .iter()
            .flatten()
            .chain(&p.reward_weights)
            .chain(&p.reward_offsets)
            .chain(p.init_mean.iter().flatten())
            .chain([&p.pull, &p.noise_std, &p.init_std])
            .all(|v| v.is_finite());
        if !finite {
            return Err(config_err("drift parameters must be finite"));
        }
        Ok(())
    }

    fn prepare_chain(&mut self, p: &DiscreteChainParams) -> Result<()> {
        let s = p.n_states;
        if s == 0 {
            return Err(config_err("n_states must be at least 1"));
        }
        if p.transitions.is_empty() {
            return Err(config_err("at least one action is required"));
        }
        for (a, rows) in p.transitions.iter().enumerate() {
            if rows.len() != s || rows.iter().any(|r| r.len() != s) {
                return Err(config_err(format!("transition matrix for action {a} must be {s}x{s}")));
            }
            for row in rows {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(config_err(format!("transition rows for action {a} must be stochastic")));
                }
            }
        }
        if !(p.separation.is_finite() && p.separation > 0.0) {
            return Err(config_err("separation must be positive"));
        }
        if !(p.jitter_std >= 0.0 && p.jitter_std.is_finite()) {
            return Err(config_err("jitter_std must be nonnegative"));
        }
        let units = self.population_size(p);
        if units == 0 {
            return Err(config_err("population must be at least 1"));
        }
        match &p.init {
            DiscreteInit::UniformHistogram => {}
            DiscreteInit::IidUnits { probs } => {
                let sum: f64 = probs.iter().sum();
                if probs.len() != s || probs.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(config_err("init probs must be a distribution over states"));
                }
            }
            DiscreteInit::Fixed { counts } => {
                if counts.len() != s || counts.iter().sum::<u32>() != units {
                    return Err(config_err(format!(
                        "fixed init counts must cover {s} states and sum to the population {units}"
                    )));
                }
            }
        }
        let n_actions = p.transitions.len();
        self.histograms = HistogramState::all(s, units);
        match &p.rewards {
            RewardModel::Table { entries } => {
                let mut table = HashMap::new();
                for e in entries {
                    if !(e.reward >= 0.0 && e.reward <= self.spec.r_max) {
                        return Err(config_err(format!("table reward {} outside [0, r_max]", e.reward)));
                    }
                    table.insert((e.action.index(), e.counts.clone()), e.reward);
                }
                for a in 0..n_actions {
                    for h in &self.histograms {
                        if !table.contains_key(&(a, h.counts().to_vec())) {
                            return Err(config_err(format!("reward table misses action {a}, histogram ({h})")));
                        }
                    }
                }
                self.rewards = Some(table);
            }
            RewardModel::Affine { offsets, weights } => {
                if offsets.len() != n_actions || weights.len() != n_actions || weights.iter().any(|w| w.len() != s) {
                    return Err(config_err("affine reward needs one offset and one weight row per action"));
                }
                if offsets.iter().chain(weights.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err(config_err("affine reward parameters must be finite"));
                }
            }
        }
        self.det_map = p.deterministic_map();
        Ok(())
    }

    fn population_size(&self, p: &DiscreteChainParams) -> u32 {
        p.population.unwrap_or(self.spec.n_agents as u32)
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn n_actions(&self) -> usize {
        match &self.spec.kind {
            EnvKind::GaussianDrift(p) => p.drift.len(),
            EnvKind::DiscreteChain(p) => p.transitions.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.spec.kind {
            EnvKind::GaussianDrift(p) => p.dim,
            EnvKind::DiscreteChain(_) => 1,
        }
    }

    pub fn q_max(&self) -> f64 {
        self.spec.q_max()
    }

    pub fn chain(&self) -> Option<&DiscreteChainParams> {
        match &self.spec.kind {
            EnvKind::DiscreteChain(p) => Some(p),
            EnvKind::GaussianDrift(_) => None,
        }
    }

    /// Population size of a discrete chain.
    pub fn population(&self) -> Option<u32> {
        self.chain().map(|p| self.population_size(p))
    }

    /// All population histograms of a discrete chain.
    pub fn histograms(&self) -> &[HistogramState] {
        &self.histograms
    }

    /// Successor histogram under a deterministic chain, `None` otherwise.
    pub fn next_histogram(&self, h: &HistogramState, action: ActionId) -> Option<HistogramState> {
        let map = self.det_map.as_ref()?.get(action.index())?;
        let mut next = vec![0u32; h.n_states()];
        for (s, &c) in h.counts().iter().enumerate() {
            next[map[s]] += c;
        }
        Some(HistogramState(next))
    }

    /// Expected (noise-free) reward of a discrete chain.
    pub fn chain_reward(&self, action: ActionId, h: &HistogramState) -> Result<f64> {
        let p = self
            .chain()
            .ok_or_else(|| Error::Unsupported("histogram rewards need a discrete chain".into()))?;
        contract!(action.index() < self.n_actions(), "action {action} out of range");
        contract!(h.n_states() == p.n_states, "histogram has the wrong number of states");
        match &p.rewards {
            RewardModel::Table { .. } => self
                .rewards
                .as_ref()
                .and_then(|t| t.get(&(action.index(), h.counts().to_vec())).copied())
                .ok_or_else(|| Error::Contract(format!("no reward for action {action}, histogram ({h})"))),
            RewardModel::Affine { offsets, weights } => {
                let a = action.index();
                let v = offsets[a]
                    + weights[a].iter().zip(h.fractions()).map(|(w, f)| w * f).sum::<f64>();
                Ok(v.clamp(0.0, self.spec.r_max))
            }
        }
    }

    /// Draws `N` i.i.d. initial observations (and the latent histogram, for chains).
    pub fn reset(&self, rng: &mut impl Rng) -> Result<EnvState> {
        self.reset_inner(rng, None)
    }

    /// [`Self::reset`] with observation draws taken from a separate stream.
    pub fn reset_split(&self, latent: &mut impl Rng, obs: &mut impl Rng) -> Result<EnvState> {
        self.reset_inner(latent, Some(obs))
    }

    fn reset_inner(&self, rng: &mut dyn RngCore, obs: Option<&mut dyn RngCore>) -> Result<EnvState> {
        match &self.spec.kind {
            EnvKind::GaussianDrift(p) => {
                let n = self.spec.n_agents;
                let mut coords = Vec::with_capacity(n * p.dim);
                for _ in 0..n {
                    for k in 0..p.dim {
                        let mean = p.init_mean.as_ref().map_or(0.0, |m| m[k]);
                        let z: f64 = StandardNormal.sample(rng);
                        coords.push(mean + p.init_std * z);
                    }
                }
                Ok(EnvState {
                    sample: Arc::new(AgentSample::from_flat(p.dim, coords)?),
                    population: None,
                })
            }
            EnvKind::DiscreteChain(p) => {
                let h = match &p.init {
                    DiscreteInit::UniformHistogram => {
                        self.histograms[rng.random_range(0..self.histograms.len())].clone()
                    }
                    DiscreteInit::IidUnits { probs } => {
                        let mut counts = vec![0u32; p.n_states];
                        for _ in 0..self.population_size(p) {
                            counts[categorical(probs, rng)] += 1;
                        }
                        HistogramState(counts)
                    }
                    DiscreteInit::Fixed { counts } => HistogramState(counts.clone()),
                };
                match obs {
                    Some(o) => self.observe(p, h, o),
                    None => self.observe(p, h, rng),
                }
            }
        }
    }

    fn observe(&self, p: &DiscreteChainParams, h: HistogramState, rng: &mut dyn RngCore) -> Result<EnvState> {
        let jitter = |rng: &mut dyn rand::RngCore| -> f64 {
            if p.jitter_std > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                p.jitter_std * z
            } else {
                0.0
            }
        };
        let mut coords = Vec::with_capacity(self.spec.n_agents);
        match p.population {
            None => {
                for (s, &c) in h.counts().iter().enumerate() {
                    for _ in 0..c {
                        coords.push(p.coordinate(s) + jitter(rng));
                    }
                }
            }
            Some(m) => {
                for _ in 0..self.spec.n_agents {
                    let mut unit = rng.random_range(0..m);
                    let mut s = 0;
                    while unit >= h.counts()[s] {
                        unit -= h.counts()[s];
                        s += 1;
                    }
                    coords.push(p.coordinate(s) + jitter(rng));
                }
            }
        }
        Ok(EnvState {
            sample: Arc::new(AgentSample::from_flat(1, coords)?),
            population: Some(h),
        })
    }

    fn noisy_reward(&self, mean_reward: f64, rng: &mut dyn RngCore) -> f64 {
        if self.spec.reward_noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            (mean_reward + self.spec.reward_noise_std * z).clamp(0.0, self.spec.r_max)
        } else {
            mean_reward
        }
    }

    /// One controlled transition of the whole population.
    pub fn step(&self, state: &EnvState, action: ActionId, rng: &mut impl Rng) -> Result<(f64, EnvState)> {
        self.step_inner(state, action, rng, None)
    }

    /// [`Self::step`] with observation draws taken from a separate stream.
    pub fn step_split(
        &self,
        state: &EnvState,
        action: ActionId,
        latent: &mut impl Rng,
        obs: &mut impl Rng,
    ) -> Result<(f64, EnvState)> {
        self.step_inner(state, action, latent, Some(obs))
    }

    fn step_inner(
        &self,
        state: &EnvState,
        action: ActionId,
        rng: &mut dyn RngCore,
        obs: Option<&mut dyn RngCore>,
    ) -> Result<(f64, EnvState)> {
        contract!(
            action.index() < self.n_actions(),
            "action {action} out of range for {} actions",
            self.n_actions()
        );
        match &self.spec.kind {
            EnvKind::GaussianDrift(p) => {
                let sample = &state.sample;
                contract!(
                    sample.len() == self.spec.n_agents && sample.dim() == p.dim,
                    "sample shape does not match the environment"
                );
                let mean = sample.mean();
                let a = action.index();
                let score = p.reward_weights.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>()
                    + p.reward_offsets[a];
                let reward = self.noisy_reward(self.spec.r_max * sigmoid(score), rng);
                let mut next = Vec::with_capacity(sample.as_flat().len());
                for s in sample.states() {
                    for k in 0..p.dim {
                        let noise = if p.noise_std > 0.0 {
                            let z: f64 = StandardNormal.sample(rng);
                            p.noise_std * z
                        } else {
                            0.0
                        };
                        next.push((1.0 - p.pull) * s[k] + p.pull * mean[k] + p.drift[a][k] + noise);
                    }
                }
                Ok((
                    reward,
                    EnvState { sample: Arc::new(AgentSample::from_flat(p.dim, next)?), population: None },
                ))
            }
            EnvKind::DiscreteChain(p) => {
                let h = state
                    .population
                    .as_ref()
                    .ok_or_else(|| Error::Contract("discrete state is missing its histogram".into()))?;
                contract!(
                    h.n_states() == p.n_states && h.total() == self.population_size(p),
                    "histogram does not match the population"
                );
                let reward = self.noisy_reward(self.chain_reward(action, h)?, rng);
                let next = match self.next_histogram(h, action) {
                    Some(next) => next,
                    None => {
                        let rows = &p.transitions[action.index()];
                        let mut counts = vec![0u32; p.n_states];
                        for (s, &c) in h.counts().iter().enumerate() {
                            for _ in 0..c {
                                counts[categorical(&rows[s], rng)] += 1;
                            }
                        }
                        HistogramState(counts)
                    }
                };
                let next = match obs {
                    Some(o) => self.observe(p, next, o)?,
                    None => self.observe(p, next, rng)?,
                };
                Ok((reward, next))
            }
        }
    }

    /// Transition from an observed sample alone. Available when the sample
    /// determines the mean-field state: drift environments, and chains that
    /// observe their own agents without jitter.
    pub fn step_sample(&self, sample: &AgentSample, action: ActionId, rng: &mut impl Rng) -> Result<(f64, AgentSample)> {
        let population = match self.chain() {
            None => None,
            Some(p) if p.population.is_none() && p.jitter_std == 0.0 => {
                contract!(sample.len() == self.spec.n_agents, "sample length must equal n_agents");
                Some(crate::oracle::lift_sample(sample, p)?)
            }
            Some(_) => {
                return Err(Error::Unsupported(
                    "sampled or jittered observations do not determine the chain state".into(),
                ))
            }
        };
        let state = EnvState { sample: Arc::new(sample.clone()), population };
        let (r, next) = self.step(&state, action, rng)?;
        Ok((r, Arc::unwrap_or_clone(next.sample)))
    }

    /// One record: fresh reset, policy action, one step.
    ///
    /// Latent dynamics and actions use stream `2·index` of `seed`; observation
    /// draws use stream `2·index + 1`. Records at different `N` under one seed
    /// therefore share their latent trajectories.
    pub fn collect_record(&self, seed: u64, index: u64, policy: ActionPolicy<'_>) -> Result<TransitionRecord> {
        let mut rng = stream_rng(seed, 2 * index);
        let mut obs = stream_rng(seed, 2 * index + 1);
        let state = self.reset_split(&mut rng, &mut obs)?;
        let action = match policy {
            ActionPolicy::UniformRandom => ActionId(rng.random_range(0..self.n_actions())),
            ActionPolicy::Fixed(a) => a,
            ActionPolicy::Greedy(pi) => pi.greedy_action(&state.sample)?,
        };
        let (reward, next) = self.step_split(&state, action, &mut rng, &mut obs)?;
        Ok(TransitionRecord {
            sample: state.sample,
            action,
            reward,
            next_sample: next.sample,
        })
    }
}

fn categorical(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws `n` i.i.d. transition records under the sampling distribution
/// "fresh reset, then `policy`". Records are generated in parallel, each from
/// its own stream, and returned in index order.
pub fn collect_batch(env: &Env, n: usize, policy: ActionPolicy<'_>, seed: u64) -> Result<Batch> {
    contract!(n >= 1, "batch size must be at least 1");
    if let ActionPolicy::Fixed(a) = policy {
        contract!(a.index() < env.n_actions(), "fixed action {a} out of range");
    }
    let records = (0..n as u64)
        .into_par_iter()
        .map(|i| env.collect_record(seed, i, policy))
        .collect::<Result<Vec<_>>>()?;
    Batch::new(records, env.spec().r_max, env.spec().gamma, env.n_actions())
}

/// Convenience: initial observations for `spec`, drawn from `rng`.
pub fn env_reset(spec: &EnvSpec, rng: &mut impl Rng) -> Result<AgentSample> {
    let env = Env::new(spec.clone())?;
    Ok(Arc::unwrap_or_clone(env.reset(rng)?.sample))
}

/// Convenience wrapper around [`Env::step_sample`].
pub fn env_step(spec: &EnvSpec, sample: &AgentSample, action: ActionId, rng: &mut impl Rng) -> Result<(f64, AgentSample)> {
    Env::new(spec.clone())?.step_sample(sample, action, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn drift_spec(pull: f64, noise: f64) -> EnvSpec {
        EnvSpec {
            kind: EnvKind::GaussianDrift(GaussianDriftParams {
                dim: 2,
                drift: vec![vec![0.5, 0.0], vec![-0.5, 0.25]],
                pull,
                noise_std: noise,
                reward_weights: vec![1.0, -0.5],
                reward_offsets: vec![0.0, 0.3],
                init_mean: None,
                init_std: 1.0,
            }),
            n_agents: 6,
            r_max: 2.0,
            gamma: 0.9,
            seed: 11,
            reward_noise_std: 0.0,
        }
    }

    fn chain_spec(transitions: Vec<Vec<Vec<f64>>>, init: DiscreteInit, n: usize) -> EnvSpec {
        EnvSpec {
            kind: EnvKind::DiscreteChain(DiscreteChainParams {
                n_states: 2,
                transitions,
                rewards: RewardModel::Affine {
                    offsets: vec![0.1, 0.6],
                    weights: vec![vec![0.0, 0.8], vec![0.2, -0.4]],
                },
                init,
                population: None,
                separation: 3.0,
                jitter_std: 0.0,
            }),
            n_agents: n,
            r_max: 1.0,
            gamma: 0.9,
            seed: 5,
            reward_noise_std: 0.0,
        }
    }

    fn identity() -> Vec<Vec<Vec<f64>>> {
        vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2]
    }

    #[test]
    fn histogram_enumeration_matches_stars_and_bars() {
        assert_eq!(HistogramState::all(2, 4).len(), 5);
        assert_eq!(HistogramState::all(3, 4).len(), 15);
        assert_eq!(HistogramState::all(4, 3).len(), 20);
    }

    #[test]
    fn reset_is_reproducible() {
        let spec = drift_spec(0.2, 0.1);
        let a = env_reset(&spec, &mut stream_rng(1, 0)).unwrap();
        let b = env_reset(&spec, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);

        let fixed = chain_spec(identity(), DiscreteInit::Fixed { counts: vec![3, 0] }, 3);
        let s = env_reset(&fixed, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(s.as_flat(), &[0.0, 0.0, 0.0]);

        let single = chain_spec(identity(), DiscreteInit::UniformHistogram, 1);
        assert_eq!(env_reset(&single, &mut stream_rng(1, 0)).unwrap().len(), 1);
    }

    #[test]
    fn degenerate_drift_moves_each_agent() {
        let spec = drift_spec(0.0, 0.0);
        let sample = AgentSample::from_states(&[vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let mut spec2 = spec.clone();
        spec2.n_agents = 2;
        let (_, next) = env_step(&spec2, &sample, ActionId(1), &mut stream_rng(0, 0)).unwrap();
        let expected = AgentSample::from_states(&[vec![-0.5, 1.25], vec![1.5, -0.75]]).unwrap();
        assert_eq!(next, expected);
        assert!(env_step(&spec2, &sample, ActionId(2), &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn identity_chain_keeps_sample() {
        let spec = chain_spec(identity(), DiscreteInit::UniformHistogram, 3);
        let sample = AgentSample::from_scalars(&[0.0, 3.0, 3.0]).unwrap();
        let (r, next) = env_step(&spec, &sample, ActionId(0), &mut stream_rng(0, 0)).unwrap();
        assert_eq!(next, sample);
        // offset 0.1 + 0.8 * 2/3
        assert!((r - (0.1 + 0.8 * 2.0 / 3.0)).abs() < 1e-15);
        let off_lattice = AgentSample::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        assert!(env_step(&spec, &off_lattice, ActionId(0), &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn rewards_are_exchangeable() {
        let spec = drift_spec(0.3, 0.2);
        let env = Env::new(spec).unwrap();
        let mut rng = stream_rng(9, 0);
        for _ in 0..20 {
            let state = env.reset(&mut rng).unwrap();
            let mut rows: Vec<Vec<f64>> = state.sample.states().map(<[f64]>::to_vec).collect();
            rows.shuffle(&mut rng);
            let permuted = AgentSample::from_states(&rows).unwrap();
            let (r1, n1) = env.step_sample(&state.sample, ActionId(0), &mut stream_rng(3, 3)).unwrap();
            let (r2, n2) = env.step_sample(&permuted, ActionId(0), &mut stream_rng(3, 3)).unwrap();
            assert_eq!(r1.to_bits(), r2.to_bits());
            assert_eq!(n1, n2);
        }
    }

    #[test]
    fn collect_batch_examples() {
        let env = Env::new(drift_spec(0.1, 0.1)).unwrap();
        let b = collect_batch(&env, 3, ActionPolicy::UniformRandom, 42).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.records().iter().all(|r| r.sample.len() == 6 && r.next_sample.len() == 6));
        let fixed = collect_batch(&env, 10, ActionPolicy::Fixed(ActionId(0)), 42).unwrap();
        assert!(fixed.records().iter().all(|r| r.action == ActionId(0)));
        let again = collect_batch(&env, 3, ActionPolicy::UniformRandom, 42).unwrap();
        assert_eq!(b, again);
        assert!(collect_batch(&env, 0, ActionPolicy::UniformRandom, 42).is_err());
    }

    #[test]
    fn rewards_stay_in_bounds() {
        let mut spec = drift_spec(0.2, 0.5);
        spec.reward_noise_std = 0.5;
        let env = Env::new(spec).unwrap();
        let mut rng = stream_rng(2, 0);
        let mut state = env.reset(&mut rng).unwrap();
        for i in 0..2000 {
            let (r, next) = env.step(&state, ActionId(i % 2), &mut rng).unwrap();
            assert!((0.0..=2.0).contains(&r));
            state = next;
        }
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        let mut s = drift_spec(1.0, 0.0);
        assert!(matches!(Env::new(s.clone()), Err(Error::Config(_))));
        s = drift_spec(0.1, 0.0);
        s.gamma = 1.0;
        assert!(matches!(Env::new(s), Err(Error::Config(_))));
        let bad_rows = vec![vec![vec![0.5, 0.2], vec![0.0, 1.0]]];
        assert!(Env::new(chain_spec(bad_rows, DiscreteInit::UniformHistogram, 2)).is_err());
        let fixed = chain_spec(identity(), DiscreteInit::Fixed { counts: vec![1, 1] }, 3);
        assert!(Env::new(fixed).is_err());
    }

    #[test]
    fn sampled_observations_draw_from_population() {
        let mut spec = chain_spec(identity(), DiscreteInit::Fixed { counts: vec![4, 0] }, 7);
        if let EnvKind::DiscreteChain(p) = &mut spec.kind {
            p.population = Some(4);
            p.jitter_std = 0.1;
        }
        let env = Env::new(spec).unwrap();
        let s = env.reset(&mut stream_rng(0, 0)).unwrap();
        assert_eq!(s.sample.len(), 7);
        assert_eq!(s.population.as_ref().unwrap().counts(), &[4, 0]);
        assert!(s.sample.as_flat().iter().all(|x| x.abs() < 1.0));
        assert!(env.step_sample(&s.sample, ActionId(0), &mut stream_rng(0, 0)).is_err());
    }
}
