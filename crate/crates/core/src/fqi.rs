//! Mean-field fitted Q-iteration.
//!
//! Given a batch `{(s_i, a_i, r_i, s'_i)}` the driver repeats, for
//! `k = 0..κ`:
//!
//! ```text
//! y_{i,k}   = r_i + γ · max_a Q̂_k(a, s'_i)
//! Q_{k+1}   = kernel ridge fit of y_{·,k} on the configurations (a_i, s_i)
//! Q̂_{k+1}  = min(Q_{k+1}, q_max)
//! ```
//!
//! The support Gram and one support × next-sample Gram per action are built
//! once, before the loop; the ridge system is factored once as well since the
//! support and `λ` never change.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::kernels::{self, ActionId, AgentSample, BaseKernelSpec, Config, EmbeddingKernelSpec};
use crate::regression::{QModel, RidgeSolver, Truncation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub sample: Arc<AgentSample>,
    pub action: ActionId,
    pub reward: f64,
    pub next_sample: Arc<AgentSample>,
}

/// The dataset consumed by [`run_mffqi`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    records: Vec<TransitionRecord>,
    r_max: f64,
    gamma: f64,
    n_actions: usize,
}

impl Batch {
    pub fn new(records: Vec<TransitionRecord>, r_max: f64, gamma: f64, n_actions: usize) -> Result<Self> {
        contract!(!records.is_empty(), "batch must hold at least one record");
        contract!(r_max.is_finite() && r_max > 0.0, "r_max must be positive and finite");
        contract!((0.0..1.0).contains(&gamma), "gamma must lie in [0, 1), got {gamma}");
        contract!(n_actions >= 1, "at least one action is required");
        let n_agents = records[0].sample.len();
        let dim = records[0].sample.dim();
        for (i, r) in records.iter().enumerate() {
            contract!(
                r.sample.len() == n_agents && r.next_sample.len() == n_agents,
                "record {i} does not have {n_agents} agents in both samples"
            );
            contract!(
                r.sample.dim() == dim && r.next_sample.dim() == dim,
                "record {i} has the wrong state dimension"
            );
            contract!(r.reward.is_finite() && r.reward <= r_max, "record {i} reward {} exceeds r_max", r.reward);
            contract!(r.action.index() < n_actions, "record {i} action {} out of range", r.action);
        }
        Ok(Batch { records, r_max, gamma, n_actions })
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }
    pub fn len(&self) -> usize {
        self.records.len()
    }
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn n_agents(&self) -> usize {
        self.records[0].sample.len()
    }
    pub fn dim(&self) -> usize {
        self.records[0].sample.dim()
    }
    pub fn q_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    /// Configurations `(a_i, s_i)`, the regression inputs.
    pub fn support_configs(&self) -> Vec<Config> {
        self.records
            .iter()
            .map(|r| Config::new(r.action, r.sample.clone()))
            .collect()
    }

    /// Configurations `(a, s'_i)` for a fixed action.
    pub fn next_configs(&self, action: ActionId) -> Vec<Config> {
        self.records
            .iter()
            .map(|r| Config::new(action, r.next_sample.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialQ {
    #[default]
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FqiConfig {
    pub kappa: usize,
    pub lambda: f64,
    pub base: BaseKernelSpec,
    pub emb: EmbeddingKernelSpec,
    #[serde(default)]
    pub initial_q: InitialQ,
    #[serde(default)]
    pub truncation: Truncation,
    /// Reuse precomputed Gram matrices across iterations.
    #[serde(default = "yes")]
    pub use_cache: bool,
}

fn yes() -> bool {
    true
}

impl FqiConfig {
    pub fn new(kappa: usize, lambda: f64, base: BaseKernelSpec, emb: EmbeddingKernelSpec) -> Self {
        FqiConfig {
            kappa,
            lambda,
            base,
            emb,
            initial_q: InitialQ::Zero,
            truncation: Truncation::Upper,
            use_cache: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        contract!(self.kappa >= 1, "kappa must be at least 1");
        contract!(self.lambda.is_finite() && self.lambda > 0.0, "lambda must be positive and finite");
        if let InitialQ::Constant(c) = self.initial_q {
            contract!(c.is_finite(), "initial constant must be finite");
        }
        self.emb.validate()
    }
}

/// Gram matrices shared by every iteration over one batch.
#[derive(Debug, Clone)]
pub struct GramCache {
    pub support_gram: DMatrix<f64>,
    /// `next_grams[a][(i, j)] = K((a_i, s_i), (a, s'_j))`.
    pub next_grams: Vec<DMatrix<f64>>,
    solver: RidgeSolver,
}

impl GramCache {
    pub fn build(batch: &Batch, base: &BaseKernelSpec, emb: &EmbeddingKernelSpec, lambda: f64) -> Result<Self> {
        emb.validate()?;
        let support = batch.support_configs();
        let support_emb = kernels::embed_all(&support, base);
        let support_gram = kernels::symmetric_gram(&support_emb, base, emb);
        let next_grams = (0..batch.n_actions())
            .map(|a| {
                let next = batch.next_configs(ActionId(a));
                let next_emb = kernels::embed_all(&next, base);
                kernels::gram_from_embedded(&support_emb, &next_emb, base, emb)
            })
            .collect();
        let solver = RidgeSolver::new(&support_gram, lambda)?;
        Ok(GramCache { support_gram, next_grams, solver })
    }

    pub fn solver(&self) -> &RidgeSolver {
        &self.solver
    }
}

/// Predictions of `q` at `(a, s'_i)` for every action, `[a][i]`.
fn next_values(batch: &Batch, q: &QModel, cache: Option<&GramCache>) -> Result<Vec<Vec<f64>>> {
    (0..batch.n_actions())
        .map(|a| match cache {
            Some(c) => Ok(q.predict_cached(&c.next_grams[a])),
            None => batch
                .records()
                .iter()
                .map(|r| q.predict(&Config::new(ActionId(a), r.next_sample.clone())))
                .collect(),
        })
        .collect()
}

fn targets_from_values(batch: &Batch, values: &[Vec<f64>]) -> Vec<f64> {
    batch
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut best = values[0][i];
            for v in values.iter().skip(1) {
                if v[i] > best {
                    best = v[i];
                }
            }
            r.reward + batch.gamma() * best
        })
        .collect()
}

fn check_cache(batch: &Batch, q: &QModel, cache: &GramCache) -> Result<()> {
    contract!(
        cache.next_grams.len() == batch.n_actions(),
        "cache covers {} actions, batch has {}",
        cache.next_grams.len(),
        batch.n_actions()
    );
    for g in &cache.next_grams {
        contract!(
            g.nrows() == q.support().len() && g.ncols() == batch.len(),
            "cache shape {}x{} does not match model support {} x batch {}",
            g.nrows(),
            g.ncols(),
            q.support().len(),
            batch.len()
        );
    }
    Ok(())
}

/// Bellman targets `r_i + γ · max_a q(a, s'_i)`.
pub fn compute_targets(batch: &Batch, q: &QModel, cache: Option<&GramCache>) -> Result<Vec<f64>> {
    if let Some(c) = cache {
        check_cache(batch, q, c)?;
    }
    Ok(targets_from_values(batch, &next_values(batch, q, cache)?))
}

fn support_model(batch: &Batch, cfg: &FqiConfig, alpha: Vec<f64>) -> Result<QModel> {
    QModel::new(batch.support_configs(), alpha, cfg.base, cfg.emb, batch.q_max(), cfg.truncation)
}

/// One iteration: targets from `q_prev`, ridge refit on the batch support.
///
/// With a cache, its factored system (built for the cache's `λ`) is used.
pub fn fqi_step(batch: &Batch, q_prev: &QModel, cfg: &FqiConfig, cache: Option<&GramCache>) -> Result<QModel> {
    cfg.validate()?;
    let targets = compute_targets(batch, q_prev, cache)?;
    let y = DVector::from_vec(targets);
    let alpha = match cache {
        Some(c) => c.solver.solve(&y)?,
        None => {
            let support = batch.support_configs();
            let gram = kernels::cross_gram(&support, &support, &cfg.base, &cfg.emb)?;
            RidgeSolver::new(&gram, cfg.lambda)?.solve(&y)?
        }
    };
    support_model(batch, cfg, alpha.iter().copied().collect())
}

/// Greedy policy with respect to a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyPolicy {
    pub model: QModel,
    pub n_actions: usize,
}

impl GreedyPolicy {
    pub fn new(model: QModel, n_actions: usize) -> Result<Self> {
        contract!(n_actions >= 1, "at least one action is required");
        Ok(GreedyPolicy { model, n_actions })
    }

    /// Action values for every action.
    pub fn values(&self, sample: &Arc<AgentSample>) -> Result<Vec<f64>> {
        (0..self.n_actions)
            .map(|a| self.model.predict(&Config::new(ActionId(a), sample.clone())))
            .collect()
    }

    /// `argmax_a Q̂(a, sample)`, lowest index on ties.
    pub fn greedy_action(&self, sample: &Arc<AgentSample>) -> Result<ActionId> {
        Ok(ActionId(argmax(&self.values(sample)?)))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Free-function form of [`GreedyPolicy::greedy_action`].
pub fn greedy_action(policy: &GreedyPolicy, sample: &Arc<AgentSample>) -> Result<ActionId> {
    policy.greedy_action(sample)
}

/// Root-mean-square Bellman residual of `q` on `batch`, evaluated with the
/// (truncated) model on both sides.
pub fn bellman_residual(q: &QModel, batch: &Batch) -> Result<f64> {
    let values = next_values(batch, q, None)?;
    let targets = targets_from_values(batch, &values);
    let mut acc = 0.0;
    for (r, t) in batch.records().iter().zip(&targets) {
        let fitted = q.predict(&Config::new(r.action, r.sample.clone()))?;
        acc += (fitted - t) * (fitted - t);
    }
    Ok((acc / batch.len() as f64).sqrt())
}

/// Bookkeeping for iteration `k → k+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    /// Index `k + 1` of the model produced.
    pub iteration: usize,
    /// `(1/n) Σ (Q̂_{k+1}(ω̂_i) − y_{i,k})²`.
    pub fit_residual: f64,
    /// `‖y_k − y_{k−1}‖∞`, absent at `k = 0`.
    pub target_delta: Option<f64>,
    /// `‖Q̂_k − Q̂_{k−1}‖∞` over all `(a, s'_i)` queries, absent at `k = 0`.
    pub q_delta: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    pub iterations: Vec<IterationStats>,
    pub gram_build_s: f64,
    pub total_s: f64,
    pub jitter: f64,
}

#[derive(Debug, Clone)]
pub struct FqiRun {
    pub model: QModel,
    pub policy: GreedyPolicy,
    pub diagnostics: Diagnostics,
}

/// Runs κ iterations of mean-field fitted Q-iteration.
pub fn run_mffqi(batch: &Batch, cfg: &FqiConfig) -> Result<FqiRun> {
    run_mffqi_observed(batch, cfg, |_, _| Ok(()))
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// [`run_mffqi`] with a callback receiving `(k, Q̂_k)` after every refit.
pub fn run_mffqi_observed(
    batch: &Batch,
    cfg: &FqiConfig,
    mut observer: impl FnMut(usize, &QModel) -> Result<()>,
) -> Result<FqiRun> {
    cfg.validate()?;
    let start = Instant::now();
    let cache = if cfg.use_cache {
        Some(GramCache::build(batch, &cfg.base, &cfg.emb, cfg.lambda)?)
    } else {
        None
    };
    let gram_build_s = start.elapsed().as_secs_f64();
    let q_max = batch.q_max();
    let n = batch.len();

    let mut values: Vec<Vec<f64>> = match cfg.initial_q {
        InitialQ::Zero => vec![vec![0.0; n]; batch.n_actions()],
        InitialQ::Constant(c) => vec![vec![cfg.truncation.apply(c, q_max); n]; batch.n_actions()],
    };
    let mut model = support_model(batch, cfg, vec![0.0; n])?;
    let mut prev: Option<(Vec<Vec<f64>>, Vec<f64>)> = None;
    let mut stats = Vec::with_capacity(cfg.kappa);
    let mut jitter = 0.0;

    for k in 0..cfg.kappa {
        let t0 = Instant::now();
        let targets = targets_from_values(batch, &values);
        let y = DVector::from_vec(targets.clone());
        let alpha = match &cache {
            Some(c) => {
                jitter = c.solver.jitter();
                c.solver.solve(&y)?
            }
            None => {
                let support = batch.support_configs();
                let gram = kernels::cross_gram(&support, &support, &cfg.base, &cfg.emb)?;
                let solver = RidgeSolver::new(&gram, cfg.lambda)?;
                jitter = solver.jitter();
                solver.solve(&y)?
            }
        };
        model = model.with_alpha(alpha.iter().copied().collect())?;

        let fitted: Vec<f64> = match &cache {
            Some(c) => model.predict_cached(&c.support_gram),
            None => model.predict_batch(model.support(), None)?,
        };
        let fit_residual = fitted
            .iter()
            .zip(&targets)
            .map(|(f, t)| (f - t) * (f - t))
            .sum::<f64>()
            / n as f64;

        let (target_delta, q_delta) = match &prev {
            Some((prev_values, prev_targets)) => (
                Some(
                    targets
                        .iter()
                        .zip(prev_targets)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max),
                ),
                Some(sup_diff(&values, prev_values)),
            ),
            None => (None, None),
        };
        let next = next_values(batch, &model, cache.as_ref())?;
        prev = Some((std::mem::replace(&mut values, next), targets));

        stats.push(IterationStats {
            iteration: k + 1,
            fit_residual,
            target_delta,
            q_delta,
            elapsed_s: t0.elapsed().as_secs_f64(),
        });
        observer(k + 1, &model)?;
    }

    let policy = GreedyPolicy::new(model.clone(), batch.n_actions())?;
    Ok(FqiRun {
        model,
        policy,
        diagnostics: Diagnostics {
            iterations: stats,
            gram_build_s,
            total_s: start.elapsed().as_secs_f64(),
            jitter,
        },
    })
}

/// The model a run starts from, as a support-shaped zero model (constant
/// initial values are only used through the first targets).
pub fn zero_model(batch: &Batch, cfg: &FqiConfig) -> Result<QModel> {
    support_model(batch, cfg, vec![0.0; batch.len()])
}

/// Resolves kernel hyperparameters with the median heuristics where unset.
pub fn resolve_kernels(batch: &Batch, bandwidth: Option<f64>, tau: Option<f64>, linear: bool) -> Result<(BaseKernelSpec, EmbeddingKernelSpec)> {
    let sigma = match bandwidth {
        Some(b) => b,
        None => kernels::median_bandwidth(
            batch.records().iter().flat_map(|r| [r.sample.as_ref(), r.next_sample.as_ref()]),
        ),
    };
    let base = BaseKernelSpec::new(sigma)?;
    if linear {
        return Ok((base, EmbeddingKernelSpec::Linear));
    }
    let tau = match tau {
        Some(t) => t,
        None => kernels::median_tau(&batch.support_configs(), &base),
    };
    Ok((base, EmbeddingKernelSpec::gaussian(tau)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::AgentSample;

    fn sample(xs: &[f64]) -> Arc<AgentSample> {
        Arc::new(AgentSample::from_scalars(xs).unwrap())
    }

    fn record(xs: &[f64], a: usize, r: f64, next: &[f64]) -> TransitionRecord {
        TransitionRecord { sample: sample(xs), action: ActionId(a), reward: r, next_sample: sample(next) }
    }

    fn kernels() -> (BaseKernelSpec, EmbeddingKernelSpec) {
        (BaseKernelSpec::new(1.0).unwrap(), EmbeddingKernelSpec::gaussian(0.5).unwrap())
    }

    fn small_batch(gamma: f64, rewards: [f64; 3]) -> Batch {
        Batch::new(
            vec![
                record(&[0.0, 0.0], 0, rewards[0], &[0.0, 3.0]),
                record(&[0.0, 3.0], 1, rewards[1], &[3.0, 3.0]),
                record(&[3.0, 3.0], 0, rewards[2], &[0.0, 0.0]),
            ],
            1.0,
            gamma,
            2,
        )
        .unwrap()
    }

    #[test]
    fn batch_validation() {
        assert!(Batch::new(vec![], 1.0, 0.9, 2).is_err());
        assert!(Batch::new(vec![record(&[0.0], 0, 2.0, &[0.0])], 1.0, 0.9, 2).is_err());
        assert!(Batch::new(vec![record(&[0.0], 2, 0.0, &[0.0])], 1.0, 0.9, 2).is_err());
        assert!(Batch::new(vec![record(&[0.0], 0, 0.0, &[0.0, 1.0])], 1.0, 0.9, 2).is_err());
        assert!(Batch::new(vec![record(&[0.0], 0, 0.0, &[0.0])], 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn targets_reduce_to_rewards() {
        let (b, e) = kernels();
        let batch = small_batch(0.0, [0.1, 0.2, 0.3]);
        let q = QModel::new(batch.support_configs(), vec![1.0, 2.0, 3.0], b, e, batch.q_max(), Truncation::Upper).unwrap();
        assert_eq!(compute_targets(&batch, &q, None).unwrap(), vec![0.1, 0.2, 0.3]);

        let batch = small_batch(0.9, [0.1, 0.2, 0.3]);
        let zero = QModel::zero(batch.support_configs(), b, e, batch.q_max(), Truncation::Upper).unwrap();
        assert_eq!(compute_targets(&batch, &zero, None).unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn target_takes_max_over_actions() {
        // single-support models whose prediction is α·K; pick the support equal
        // to the query for action 1 so K = 1 there and tiny for action 0
        let (b, e) = kernels();
        let next = sample(&[0.0]);
        let batch = Batch::new(vec![record(&[5.0], 1, 0.5, &[0.0])], 1.0, 0.9, 2).unwrap();
        let support = vec![Config::new(ActionId(1), next.clone())];
        let q = QModel::new(support, vec![3.0], b, e, 10.0, Truncation::Upper).unwrap();
        let values: Vec<f64> = (0..2)
            .map(|a| q.predict(&Config::new(ActionId(a), next.clone())).unwrap())
            .collect();
        assert!(values[0] < 3.0 && values[1] == 3.0);
        let t = compute_targets(&batch, &q, None).unwrap();
        assert!((t[0] - (0.5 + 0.9 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_are_a_fixed_point() {
        let (b, e) = kernels();
        let batch = small_batch(0.9, [0.0; 3]);
        let cfg = FqiConfig::new(3, 1e-3, b, e);
        let zero = zero_model(&batch, &cfg).unwrap();
        let next = fqi_step(&batch, &zero, &cfg, None).unwrap();
        assert!(next.alpha().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn single_record_step() {
        let (b, e) = kernels();
        let batch = Batch::new(vec![record(&[0.0], 0, 0.7, &[1.0])], 1.0, 0.5, 1).unwrap();
        let cfg = FqiConfig::new(1, 0.25, b, e);
        let zero = zero_model(&batch, &cfg).unwrap();
        let m = fqi_step(&batch, &zero, &cfg, None).unwrap();
        assert!((m.alpha()[0] - 0.7 / (1.0 + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn one_iteration_with_gamma_zero_is_krr_on_rewards() {
        let (b, e) = kernels();
        let batch = small_batch(0.0, [0.1, 0.5, 0.9]);
        let cfg = FqiConfig::new(1, 1e-3, b, e);
        let run = run_mffqi(&batch, &cfg).unwrap();
        let support = batch.support_configs();
        let gram = kernels::cross_gram(&support, &support, &b, &e).unwrap();
        let alpha = crate::regression::fit_krr(&crate::regression::RidgeProblem {
            gram,
            targets: DVector::from_row_slice(&[0.1, 0.5, 0.9]),
            lambda: 1e-3,
        })
        .unwrap();
        for (x, y) in run.model.alpha().iter().zip(alpha.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cached_and_uncached_runs_agree_bitwise() {
        let (b, e) = kernels();
        let batch = small_batch(0.8, [0.3, 0.9, 0.1]);
        let mut cfg = FqiConfig::new(6, 1e-4, b, e);
        let cached = run_mffqi(&batch, &cfg).unwrap();
        cfg.use_cache = false;
        let direct = run_mffqi(&batch, &cfg).unwrap();
        assert_eq!(cached.model, direct.model);
        for (x, y) in cached.diagnostics.iterations.iter().zip(&direct.diagnostics.iterations) {
            assert_eq!(x.fit_residual.to_bits(), y.fit_residual.to_bits());
            assert_eq!(x.target_delta, y.target_delta);
            assert_eq!(x.q_delta, y.q_delta);
        }
    }

    #[test]
    fn greedy_examples() {
        let (b, e) = kernels();
        let s = sample(&[0.0]);
        let single = QModel::zero(vec![Config::new(ActionId(0), s.clone())], b, e, 10.0, Truncation::Upper).unwrap();
        let pi = GreedyPolicy::new(single.clone(), 1).unwrap();
        assert_eq!(pi.greedy_action(&sample(&[4.0])).unwrap(), ActionId(0));
        let tie = GreedyPolicy::new(single, 3).unwrap();
        assert_eq!(tie.greedy_action(&s).unwrap(), ActionId(0));

        // support (0, s) with α = 0.2 and (1, s) with α = 0.7: at s the
        // cross-action kernel is exp(-2/(2·0.25)) so values are ≈ (0.2, 0.7)
        let support = vec![Config::new(ActionId(0), s.clone()), Config::new(ActionId(1), s.clone())];
        let m = QModel::new(support, vec![0.2, 0.7], b, e, 10.0, Truncation::Upper).unwrap();
        let pi = GreedyPolicy::new(m, 2).unwrap();
        let v = pi.values(&s).unwrap();
        let cross = (-4f64).exp();
        assert!((v[0] - (0.2 + 0.7 * cross)).abs() < 1e-12);
        assert!((v[1] - (0.7 + 0.2 * cross)).abs() < 1e-12);
        assert_eq!(pi.greedy_action(&s).unwrap(), ActionId(1));
    }

    #[test]
    fn bellman_residual_examples() {
        let (b, e) = kernels();
        let zeros = small_batch(0.9, [0.0; 3]);
        let q = QModel::zero(zeros.support_configs(), b, e, zeros.q_max(), Truncation::Upper).unwrap();
        assert_eq!(bellman_residual(&q, &zeros).unwrap(), 0.0);
        let ones = small_batch(0.9, [1.0; 3]);
        assert_eq!(bellman_residual(&q, &ones).unwrap(), 1.0);

        let rewards = small_batch(0.0, [0.2, 0.6, 0.4]);
        let run = run_mffqi(&rewards, &FqiConfig::new(1, 1e-10, b, e)).unwrap();
        assert!(bellman_residual(&run.model, &rewards).unwrap() <= 1e-3);
    }

    #[test]
    fn diagnostics_shape() {
        let (b, e) = kernels();
        let batch = small_batch(0.9, [0.3, 0.9, 0.1]);
        let run = run_mffqi(&batch, &FqiConfig::new(4, 1e-3, b, e)).unwrap();
        let it = &run.diagnostics.iterations;
        assert_eq!(it.len(), 4);
        assert!(it[0].target_delta.is_none() && it[1].target_delta.is_some());
        for s in &it[1..] {
            assert!(s.target_delta.unwrap() <= 0.9 * s.q_delta.unwrap() + 1e-12);
        }
    }
}
