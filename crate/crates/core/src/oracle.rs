//! Exact ground truth for deterministic discrete chains.
//!
//! With one-hot per-agent transitions, the population histogram evolves
//! deterministically, so the mean-field MDP over histograms is a finite
//! deterministic MDP and `Q*` follows from plain value iteration.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::{DiscreteChainParams, Env, HistogramState};
use crate::error::{contract, Error, Result};
use crate::fqi::argmax;
use crate::kernels::{ActionId, AgentSample, Config};
use crate::regression::QModel;

/// Histogram of a sample whose states all sit exactly on the lattice.
pub fn lift_sample(sample: &AgentSample, params: &DiscreteChainParams) -> Result<HistogramState> {
    contract!(sample.dim() == 1, "lattice samples are one-dimensional");
    let tol = 1e-9 * params.separation;
    let mut counts = vec![0u32; params.n_states];
    for s in sample.states() {
        let pos = s[0] / params.separation;
        let idx = pos.round();
        contract!(
            idx >= 0.0 && (idx as usize) < params.n_states && (s[0] - idx * params.separation).abs() <= tol,
            "state {} is not a lattice point",
            s[0]
        );
        counts[idx as usize] += 1;
    }
    HistogramState::new(counts)
}

/// Reachable histograms with an index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableSet {
    states: Vec<HistogramState>,
    index: HashMap<HistogramState, usize>,
}

impl ReachableSet {
    fn from_states(mut states: Vec<HistogramState>) -> Self {
        states.sort();
        let index = states.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        ReachableSet { states, index }
    }

    pub fn states(&self) -> &[HistogramState] {
        &self.states
    }
    pub fn len(&self) -> usize {
        self.states.len()
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    pub fn index_of(&self, h: &HistogramState) -> Option<usize> {
        self.index.get(h).copied()
    }
}

fn successor(map: &[Vec<usize>], h: &HistogramState, action: usize) -> HistogramState {
    let mut next = vec![0u32; h.n_states()];
    for (s, &c) in h.counts().iter().enumerate() {
        next[map[action][s]] += c;
    }
    HistogramState::new(next).expect("successor keeps every unit")
}

/// BFS closure of `inits` under every action.
pub fn enumerate_from(params: &DiscreteChainParams, inits: &[HistogramState]) -> Result<ReachableSet> {
    let map = params.deterministic_map().ok_or_else(|| {
        Error::Unsupported("exact enumeration needs deterministic transitions".into())
    })?;
    contract!(!inits.is_empty(), "need at least one initial histogram");
    let mut seen: HashMap<HistogramState, ()> = HashMap::new();
    let mut queue = VecDeque::new();
    for h in inits {
        contract!(h.n_states() == params.n_states, "initial histogram has the wrong number of states");
        if seen.insert(h.clone(), ()).is_none() {
            queue.push_back(h.clone());
        }
    }
    while let Some(h) = queue.pop_front() {
        for a in 0..map.len() {
            let next = successor(&map, &h, a);
            if seen.insert(next.clone(), ()).is_none() {
                queue.push_back(next);
            }
        }
    }
    Ok(ReachableSet::from_states(seen.into_keys().collect()))
}

/// BFS closure of a single initial histogram.
pub fn enumerate_configs(params: &DiscreteChainParams, init: &HistogramState) -> Result<ReachableSet> {
    enumerate_from(params, std::slice::from_ref(init))
}

/// Exact `Q*` over a finite set of histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTable {
    pub states: Vec<HistogramState>,
    /// `q_values[state][action]`.
    pub q_values: Vec<Vec<f64>>,
    pub gamma: f64,
    pub r_max: f64,
    /// Sup-norm change of every value-iteration sweep.
    pub sweep_deltas: Vec<f64>,
}

impl OracleTable {
    pub fn n_actions(&self) -> usize {
        self.q_values.first().map_or(0, Vec::len)
    }

    pub fn q_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    pub fn index_of(&self, h: &HistogramState) -> Option<usize> {
        self.states.iter().position(|s| s == h)
    }

    pub fn q(&self, h: &HistogramState, action: ActionId) -> Option<f64> {
        self.index_of(h).and_then(|i| self.q_values[i].get(action.index()).copied())
    }

    pub fn max_q(&self) -> f64 {
        self.q_values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn tie_tol(&self) -> f64 {
        1e-9 * self.q_max()
    }

    /// Actions within tie tolerance of the best at state `i`.
    pub fn optimal_actions(&self, i: usize) -> Vec<usize> {
        let row = &self.q_values[i];
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..row.len()).filter(|&a| best - row[a] <= self.tie_tol()).collect()
    }

    /// Smallest gap between the best and second-best action over all states;
    /// infinite with a single action.
    pub fn min_action_gap(&self) -> f64 {
        self.q_values
            .iter()
            .map(|row| {
                let mut sorted = row.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                if sorted.len() < 2 {
                    f64::INFINITY
                } else {
                    sorted[0] - sorted[1]
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `‖Q − TQ‖∞` under `env`.
    pub fn bellman_residual(&self, env: &Env) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, h) in self.states.iter().enumerate() {
            for a in 0..self.n_actions() {
                let next = env
                    .next_histogram(h, ActionId(a))
                    .ok_or_else(|| Error::Unsupported("oracle needs deterministic transitions".into()))?;
                let j = self
                    .index_of(&next)
                    .ok_or_else(|| Error::Contract("oracle table is not closed under transitions".into()))?;
                let best = self.q_values[j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let t = env.chain_reward(ActionId(a), h)? + self.gamma * best;
                worst = worst.max((self.q_values[i][a] - t).abs());
            }
        }
        Ok(worst)
    }

    /// CSV with columns `histogram,action,q_star`; histogram counts are
    /// space-separated.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["histogram", "action", "q_star"])?;
        for (h, row) in self.states.iter().zip(&self.q_values) {
            for (a, q) in row.iter().enumerate() {
                w.write_record([h.to_string(), a.to_string(), q.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Value iteration `Q ← r + γ·max_a' Q(a', next)` until the sweep change is at
/// most `tol`.
pub fn exact_value_iteration(reachable: &ReachableSet, env: &Env, tol: f64) -> Result<OracleTable> {
    if env.chain().is_none() {
        return Err(Error::Unsupported("the oracle only covers discrete chains".into()));
    }
    if env.spec().reward_noise_std != 0.0 {
        return Err(Error::Unsupported("the oracle needs noise-free rewards".into()));
    }
    contract!(tol > 0.0, "tolerance must be positive");
    let n_actions = env.n_actions();
    let gamma = env.spec().gamma;
    let mut rewards = vec![vec![0.0; n_actions]; reachable.len()];
    let mut next = vec![vec![0usize; n_actions]; reachable.len()];
    for (i, h) in reachable.states().iter().enumerate() {
        for a in 0..n_actions {
            rewards[i][a] = env.chain_reward(ActionId(a), h)?;
            let succ = env
                .next_histogram(h, ActionId(a))
                .ok_or_else(|| Error::Unsupported("the oracle needs deterministic transitions".into()))?;
            next[i][a] = reachable
                .index_of(&succ)
                .ok_or_else(|| Error::Contract(format!("successor ({succ}) of ({h}) is not in the reachable set")))?;
        }
    }

    let mut q = vec![vec![0.0; n_actions]; reachable.len()];
    let mut sweep_deltas = Vec::new();
    loop {
        let best: Vec<f64> = q
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut delta: f64 = 0.0;
        let updated: Vec<Vec<f64>> = (0..q.len())
            .map(|i| {
                (0..n_actions)
                    .map(|a| {
                        let v = rewards[i][a] + gamma * best[next[i][a]];
                        delta = delta.max((v - q[i][a]).abs());
                        v
                    })
                    .collect()
            })
            .collect();
        q = updated;
        sweep_deltas.push(delta);
        if delta <= tol {
            break;
        }
        if sweep_deltas.len() >= 1_000_000 {
            return Err(Error::Numerical {
                message: "value iteration did not converge".into(),
                size: reachable.len(),
                jitter: 0.0,
            });
        }
    }
    Ok(OracleTable {
        states: reachable.states().to_vec(),
        q_values: q,
        gamma,
        r_max: env.spec().r_max,
        sweep_deltas,
    })
}

/// Reachable set from every histogram the chain can be reset to, then `Q*`.
pub fn solve_chain(env: &Env, tol: f64) -> Result<OracleTable> {
    let params = env
        .chain()
        .ok_or_else(|| Error::Unsupported("the oracle only covers discrete chains".into()))?;
    let inits: Vec<HistogramState> = match &params.init {
        crate::envs::DiscreteInit::Fixed { counts } => vec![HistogramState::new(counts.clone())?],
        _ => env.histograms().to_vec(),
    };
    let reachable = enumerate_from(params, &inits)?;
    exact_value_iteration(&reachable, env, tol)
}

/// Maps a histogram to lattice observations, one per population unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeEncoding {
    pub n_states: usize,
    pub separation: f64,
}

impl LatticeEncoding {
    pub fn from_params(params: &DiscreteChainParams) -> Self {
        LatticeEncoding { n_states: params.n_states, separation: params.separation }
    }

    pub fn sample(&self, h: &HistogramState) -> Result<AgentSample> {
        contract!(h.n_states() == self.n_states, "histogram does not match the encoding");
        let coords = h
            .counts()
            .iter()
            .enumerate()
            .flat_map(|(s, &c)| std::iter::repeat_n(s as f64 * self.separation, c as usize))
            .collect();
        AgentSample::from_flat(1, coords)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub sup_err: f64,
    pub mean_err: f64,
    /// Fraction of histograms whose greedy action is optimal for the oracle.
    pub argmax_agreement: f64,
    pub n_configs: usize,
}

/// Compares a model against `Q*` over every `(action, histogram)` of the table.
pub fn compare_q(model: &QModel, oracle: &OracleTable, encoding: &LatticeEncoding) -> Result<CompareReport> {
    contract!(model.dim() == 1, "model must be trained on one-dimensional lattice states");
    let n_actions = oracle.n_actions();
    let mut sup_err: f64 = 0.0;
    let mut total = 0.0;
    let mut agree = 0usize;
    for (i, h) in oracle.states.iter().enumerate() {
        let sample = Arc::new(encoding.sample(h)?);
        let values: Vec<f64> = (0..n_actions)
            .map(|a| model.predict(&Config::new(ActionId(a), sample.clone())))
            .collect::<Result<_>>()?;
        for (v, q) in values.iter().zip(&oracle.q_values[i]) {
            let e = (v - q).abs();
            sup_err = sup_err.max(e);
            total += e;
        }
        if oracle.optimal_actions(i).contains(&argmax(&values)) {
            agree += 1;
        }
    }
    Ok(CompareReport {
        sup_err,
        mean_err: total / (oracle.states.len() * n_actions) as f64,
        argmax_agreement: agree as f64 / oracle.states.len() as f64,
        n_configs: oracle.states.len() * n_actions,
    })
}
