//! Kernel ridge regression over mean embeddings.
//!
//! The regularised least-squares problem
//!
//! ```text
//! min_f (1/n) Σ (f(μ_i) − y_i)² + λ‖f‖²_{H(K)}
//! ```
//!
//! has the representer solution `f = Σ α_i K(·, μ_i)` with
//! `α = (G + nλI)⁻¹ y`. The `1/n` factors of the empirical covariance operator
//! and of the cross-covariance term cancel, so `λ` keeps the same meaning
//! across batch sizes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::kernels::{BaseKernelSpec, Config, Embedded, EmbeddingKernelSpec};

/// Relative jitter levels tried, in order, when the ridge system fails to factor.
const JITTER_LADDER: [f64; 7] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7];
const JITTER_MAX: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub gram: DMatrix<f64>,
    pub targets: DVector<f64>,
    pub lambda: f64,
}

/// Objective `(1/n)‖Gα − y‖² + λ·αᵀGα` of the representer problem.
pub fn ridge_objective(gram: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64, alpha: &DVector<f64>) -> f64 {
    let n = targets.len() as f64;
    let fitted = gram * alpha;
    let loss = (&fitted - targets).norm_squared() / n;
    loss + lambda * alpha.dot(&fitted)
}

/// Factored ridge system `G + nλI (+ jitter)`, reusable across target vectors.
#[derive(Debug, Clone)]
pub struct RidgeSolver {
    system: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl RidgeSolver {
    pub fn new(gram: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        let n = gram.nrows();
        contract!(n >= 1 && gram.is_square(), "gram must be square and nonempty, got {}x{}", n, gram.ncols());
        contract!(lambda.is_finite() && lambda > 0.0, "lambda must be positive and finite, got {lambda}");
        contract!(gram.iter().all(|v| v.is_finite()), "gram contains non-finite entries");
        let scale = gram.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in (i + 1)..n {
                contract!(
                    (gram[(i, j)] - gram[(j, i)]).abs() <= 1e-12 * scale,
                    "gram is not symmetric at ({i}, {j})"
                );
            }
        }

        let mean_diag = gram.trace() / n as f64;
        let mut base = gram.clone();
        for i in 0..n {
            base[(i, i)] += n as f64 * lambda;
        }
        let mut last = 0.0;
        for eps in JITTER_LADDER.into_iter().chain(std::iter::once(JITTER_MAX)) {
            let jitter = eps * mean_diag;
            let mut system = base.clone();
            for i in 0..n {
                system[(i, i)] += jitter;
            }
            last = jitter;
            if let Some(factor) = Cholesky::new(system.clone()) {
                return Ok(RidgeSolver { system, factor, jitter });
            }
        }
        Err(Error::Numerical {
            message: "ridge system is not positive definite after jitter escalation".into(),
            size: n,
            jitter: last,
        })
    }

    /// Diagonal jitter that had to be added on top of `nλ`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn size(&self) -> usize {
        self.system.nrows()
    }

    /// Solves for `α`, with two rounds of iterative refinement, and checks the
    /// normwise backward error `‖Aα − y‖∞ / (‖A‖∞‖α‖∞ + ‖y‖∞)`.
    pub fn solve(&self, targets: &DVector<f64>) -> Result<DVector<f64>> {
        contract!(
            targets.len() == self.size(),
            "target length {} does not match system size {}",
            targets.len(),
            self.size()
        );
        contract!(targets.iter().all(|v| v.is_finite()), "targets contain non-finite values");
        let mut alpha = self.factor.solve(targets);
        for _ in 0..2 {
            let residual = targets - &self.system * &alpha;
            alpha += self.factor.solve(&residual);
        }
        let err = self.backward_error(&alpha, targets);
        if !(err <= RESIDUAL_TOL) {
            return Err(Error::Numerical {
                message: format!("ridge solve backward error {err:e} exceeds {RESIDUAL_TOL:e}"),
                size: self.size(),
                jitter: self.jitter,
            });
        }
        Ok(alpha)
    }

    pub fn backward_error(&self, alpha: &DVector<f64>, targets: &DVector<f64>) -> f64 {
        let residual = targets - &self.system * alpha;
        let row_norm = self
            .system
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let denom = row_norm * alpha.amax() + targets.amax();
        if denom == 0.0 {
            0.0
        } else {
            residual.amax() / denom
        }
    }
}

/// Closed-form representer coefficients `α = (G + nλI)⁻¹ y`.
pub fn fit_krr(problem: &RidgeProblem) -> Result<DVector<f64>> {
    contract!(
        problem.targets.len() == problem.gram.nrows(),
        "targets length {} does not match gram size {}",
        problem.targets.len(),
        problem.gram.nrows()
    );
    RidgeSolver::new(&problem.gram, problem.lambda)?.solve(&problem.targets)
}

/// How predictions are capped against `q_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Raw `Q^λ`.
    Off,
    /// `min(Q^λ, q_max)`.
    #[default]
    Upper,
    /// `clamp(Q^λ, −q_max, q_max)`.
    Symmetric,
}

impl Truncation {
    #[inline]
    pub fn apply(self, raw: f64, q_max: f64) -> f64 {
        match self {
            Truncation::Off => raw,
            Truncation::Upper => raw.min(q_max),
            Truncation::Symmetric => raw.clamp(-q_max, q_max),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct QModelData {
    support: Vec<Config>,
    alpha: Vec<f64>,
    base: BaseKernelSpec,
    emb: EmbeddingKernelSpec,
    q_max: f64,
    truncation: Truncation,
}

/// A fitted kernel-ridge action-value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QModelData", into = "QModelData")]
pub struct QModel {
    support: Vec<Config>,
    alpha: Vec<f64>,
    base: BaseKernelSpec,
    emb: EmbeddingKernelSpec,
    q_max: f64,
    truncation: Truncation,
    support_norms: Vec<f64>,
}

impl TryFrom<QModelData> for QModel {
    type Error = Error;
    fn try_from(d: QModelData) -> Result<Self> {
        QModel::new(d.support, d.alpha, d.base, d.emb, d.q_max, d.truncation)
    }
}

impl From<QModel> for QModelData {
    fn from(m: QModel) -> Self {
        QModelData {
            support: m.support,
            alpha: m.alpha,
            base: m.base,
            emb: m.emb,
            q_max: m.q_max,
            truncation: m.truncation,
        }
    }
}

impl QModel {
    pub fn new(
        support: Vec<Config>,
        alpha: Vec<f64>,
        base: BaseKernelSpec,
        emb: EmbeddingKernelSpec,
        q_max: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        contract!(!support.is_empty(), "model support must be nonempty");
        contract!(
            alpha.len() == support.len(),
            "alpha length {} does not match support size {}",
            alpha.len(),
            support.len()
        );
        contract!(alpha.iter().all(|a| a.is_finite()), "alpha contains non-finite values");
        contract!(q_max.is_finite() && q_max > 0.0, "q_max must be positive and finite");
        emb.validate()?;
        let dim = support[0].sample.dim();
        contract!(
            support.iter().all(|c| c.sample.dim() == dim),
            "support configs must share one state dimension"
        );
        let support_norms = support
            .par_iter()
            .map(|c| Embedded::new(c, &base).norm_sq)
            .collect();
        Ok(QModel { support, alpha, base, emb, q_max, truncation, support_norms })
    }

    /// The identically-zero model on `support`.
    pub fn zero(
        support: Vec<Config>,
        base: BaseKernelSpec,
        emb: EmbeddingKernelSpec,
        q_max: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![0.0; n], base, emb, q_max, truncation)
    }

    /// Same support and kernels, new coefficients.
    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        contract!(alpha.len() == self.alpha.len(), "alpha length mismatch");
        contract!(alpha.iter().all(|a| a.is_finite()), "alpha contains non-finite values");
        Ok(QModel { alpha, ..self.clone() })
    }

    pub fn support(&self) -> &[Config] {
        &self.support
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn base(&self) -> &BaseKernelSpec {
        &self.base
    }
    pub fn emb(&self) -> &EmbeddingKernelSpec {
        &self.emb
    }
    pub fn q_max(&self) -> f64 {
        self.q_max
    }
    pub fn truncation(&self) -> Truncation {
        self.truncation
    }
    pub fn dim(&self) -> usize {
        self.support[0].sample.dim()
    }

    /// Untruncated `Σ α_i K(μ_query, μ_i)`.
    pub fn predict_raw(&self, query: &Config) -> Result<f64> {
        contract!(
            query.sample.dim() == self.dim(),
            "query dimension {} does not match model dimension {}",
            query.sample.dim(),
            self.dim()
        );
        let q = Embedded::new(query, &self.base);
        let mut raw = 0.0;
        for ((cfg, &norm), &a) in self.support.iter().zip(&self.support_norms).zip(&self.alpha) {
            let s = Embedded { config: cfg, norm_sq: norm };
            raw += a * s.kernel(&q, &self.base, &self.emb);
        }
        Ok(raw)
    }

    pub fn predict(&self, query: &Config) -> Result<f64> {
        Ok(self.truncation.apply(self.predict_raw(query)?, self.q_max))
    }

    /// Support × queries cross-Gram in the layout expected by [`Self::predict_batch`].
    pub fn query_gram(&self, queries: &[Config]) -> Result<DMatrix<f64>> {
        for q in queries {
            contract!(q.sample.dim() == self.dim(), "query dimension mismatch");
        }
        let rows: Vec<Embedded<'_>> = self
            .support
            .iter()
            .zip(&self.support_norms)
            .map(|(config, &norm_sq)| Embedded { config, norm_sq })
            .collect();
        let cols = crate::kernels::embed_all(queries, &self.base);
        Ok(crate::kernels::gram_from_embedded(&rows, &cols, &self.base, &self.emb))
    }

    /// Batched [`Self::predict`]. With `cache`, entry `(i, j)` must hold
    /// `K(support_i, queries_j)` and each query costs `n_support` multiply-adds.
    pub fn predict_batch(&self, queries: &[Config], cache: Option<&DMatrix<f64>>) -> Result<Vec<f64>> {
        match cache {
            Some(g) => {
                contract!(
                    g.nrows() == self.support.len() && g.ncols() == queries.len(),
                    "cache shape {}x{} does not match {}x{}",
                    g.nrows(),
                    g.ncols(),
                    self.support.len(),
                    queries.len()
                );
                Ok(self.predict_cached(g))
            }
            None => queries.par_iter().map(|q| self.predict(q)).collect(),
        }
    }

    pub(crate) fn predict_cached(&self, gram: &DMatrix<f64>) -> Vec<f64> {
        gram.column_iter()
            .map(|col| {
                let mut raw = 0.0;
                for (a, k) in self.alpha.iter().zip(col.iter()) {
                    raw += a * k;
                }
                self.truncation.apply(raw, self.q_max)
            })
            .collect()
    }
}
