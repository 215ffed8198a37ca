//! Built-in environments used by the default configuration and the
//! acceptance suite.

use crate::envs::{
    DiscreteChainParams, DiscreteInit, EnvKind, EnvSpec, GaussianDriftParams, RewardEntry, RewardModel,
};
use crate::kernels::ActionId;

/// Rewards of the two-state chain over a population of four units, indexed by
/// the number of units in state 1. Every histogram has a reward gap of at
/// least 0.3 between its two actions.
const CHAIN_REWARDS: [[f64; 2]; 5] = [[0.0, 0.4], [0.3, 0.7], [0.6, 0.2], [0.9, 0.5], [1.0, 0.7]];

/// Base kernel bandwidth assumed by the reference chain's lattice spacing.
pub const REFERENCE_BANDWIDTH: f64 = 1.0;

fn chain_table() -> RewardModel {
    let mut entries = Vec::new();
    for (k, row) in CHAIN_REWARDS.iter().enumerate() {
        for (a, &reward) in row.iter().enumerate() {
            entries.push(RewardEntry {
                action: ActionId(a),
                counts: vec![4 - k as u32, k as u32],
                reward,
            });
        }
    }
    RewardModel::Table { entries }
}

fn chain_params(population: Option<u32>, jitter_std: f64) -> DiscreteChainParams {
    DiscreteChainParams {
        n_states: 2,
        // action 0 collapses every agent onto state 0; action 1 flips states
        transitions: vec![
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ],
        rewards: chain_table(),
        init: DiscreteInit::UniformHistogram,
        population,
        separation: 3.0 * REFERENCE_BANDWIDTH,
        jitter_std,
    }
}

/// Deterministic two-state chain, four agents observed exactly, γ = 0.9.
pub fn reference_chain() -> EnvSpec {
    EnvSpec {
        kind: EnvKind::DiscreteChain(chain_params(None, 0.0)),
        n_agents: 4,
        r_max: 1.0,
        gamma: 0.9,
        seed: 2024,
        reward_noise_std: 0.0,
    }
}

/// The reference chain's mean-field dynamics over a four-unit population,
/// observed through `n_agents` i.i.d. draws jittered by `0.2σ`.
pub fn noisy_chain(n_agents: usize) -> EnvSpec {
    EnvSpec {
        kind: EnvKind::DiscreteChain(chain_params(Some(4), 0.2 * REFERENCE_BANDWIDTH)),
        n_agents,
        ..reference_chain()
    }
}

/// Two-dimensional drift environment with standard-normal resets.
pub fn reference_drift() -> EnvSpec {
    EnvSpec {
        kind: EnvKind::GaussianDrift(GaussianDriftParams {
            dim: 2,
            drift: vec![vec![0.5, 0.0], vec![-0.5, 0.0], vec![0.0, 0.5]],
            pull: 0.3,
            noise_std: 0.1,
            reward_weights: vec![1.0, -0.5],
            reward_offsets: vec![0.0, 0.2, -0.2],
            init_mean: None,
            init_std: 1.0,
        }),
        n_agents: 16,
        r_max: 1.0,
        gamma: 0.9,
        seed: 7,
        reward_noise_std: 0.0,
    }
}
