//! Two-level kernels on mean-field configurations.
//!
//! The base kernel `k` acts on individual (action, state) pairs:
//!
//! ```text
//! k((a, s), (a', s')) = 1{a = a'} · exp(−‖s − s'‖² / (2σ²))
//! ```
//!
//! An empirical configuration `δ_a × p̂_s` is embedded as the average of kernel
//! sections over its `N` observed states, so every quantity on embeddings
//! (inner products, MMD, the second-level kernel `K`) reduces to Gram sums over
//! the raw samples. Nothing is ever materialised in feature space.
//!
//! Samples are sorted lexicographically when they are built, and Gram sums
//! always run in that order, so permuting the agents of a sample changes no
//! result bit.

use std::cmp::Ordering;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Index of a central action, in `[0, |A|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Deserialize)]
struct RawSample {
    dim: usize,
    coords: Vec<f64>,
}

/// A bag of `N` agent states in `R^d`, stored in canonical (sorted) order.
///
/// The stored order is an implementation detail: two samples holding the same
/// multiset of states compare equal and have identical storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample")]
pub struct AgentSample {
    dim: usize,
    coords: Vec<f64>,
}

impl TryFrom<RawSample> for AgentSample {
    type Error = Error;

    fn try_from(raw: RawSample) -> Result<Self> {
        AgentSample::from_flat(raw.dim, raw.coords)
    }
}

fn cmp_states(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl AgentSample {
    /// Builds a sample from `N·d` row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        contract!(dim >= 1, "state dimension must be at least 1");
        contract!(
            !coords.is_empty() && coords.len() % dim == 0,
            "sample needs a nonempty whole number of {dim}-dimensional states, got {} coordinates",
            coords.len()
        );
        contract!(
            coords.iter().all(|c| c.is_finite()),
            "sample contains a non-finite coordinate"
        );
        // -0.0 and 0.0 sort apart under total_cmp; normalise so they embed alike
        let coords: Vec<f64> = coords
            .into_iter()
            .map(|c| if c == 0.0 { 0.0 } else { c })
            .collect();
        let mut rows: Vec<&[f64]> = coords.chunks_exact(dim).collect();
        rows.sort_by(|a, b| cmp_states(a, b));
        let sorted = rows.concat();
        Ok(AgentSample { dim, coords: sorted })
    }

    pub fn from_states<S: AsRef<[f64]>>(states: &[S]) -> Result<Self> {
        contract!(!states.is_empty(), "sample must hold at least one state");
        let dim = states[0].as_ref().len();
        contract!(
            states.iter().all(|s| s.as_ref().len() == dim),
            "all states in a sample must share one dimension"
        );
        let coords = states.iter().flat_map(|s| s.as_ref().iter().copied()).collect();
        Self::from_flat(dim, coords)
    }

    /// One-dimensional sample from scalar states.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major canonical coordinates.
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinate-wise mean of the states, accumulated in canonical order.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for s in self.states() {
            for (a, x) in acc.iter_mut().zip(s) {
                *a += x;
            }
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// A state-action configuration `δ_a × p̂_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub action: ActionId,
    pub sample: Arc<AgentSample>,
}

impl Config {
    pub fn new(action: ActionId, sample: Arc<AgentSample>) -> Self {
        Config { action, sample }
    }

    fn canonical_cmp(&self, other: &Config) -> Ordering {
        self.action
            .cmp(&other.action)
            .then(self.sample.len().cmp(&other.sample.len()))
            .then_with(|| cmp_states(self.sample.as_flat(), other.sample.as_flat()))
    }
}

/// Gaussian bandwidth of the base kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBandwidth")]
pub struct BaseKernelSpec {
    bandwidth: f64,
}

#[derive(Deserialize)]
struct RawBandwidth {
    bandwidth: f64,
}

impl TryFrom<RawBandwidth> for BaseKernelSpec {
    type Error = Error;
    fn try_from(raw: RawBandwidth) -> Result<Self> {
        BaseKernelSpec::new(raw.bandwidth)
    }
}

impl BaseKernelSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Config(format!(
                "base kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(BaseKernelSpec { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Upper bound ϱ on `k(u, u)`.
    pub fn bound(&self) -> f64 {
        1.0
    }

    fn scale(&self) -> f64 {
        1.0 / (2.0 * self.bandwidth * self.bandwidth)
    }
}

/// Second-level kernel `K` on mean embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EmbeddingKernelSpec {
    /// `K(μ_x, μ_y) = ⟨μ_x, μ_y⟩`.
    Linear,
    /// `K(μ_x, μ_y) = exp(−‖μ_x − μ_y‖² / (2τ²))`.
    GaussianOnMmd { tau: f64 },
}

impl EmbeddingKernelSpec {
    pub fn gaussian(tau: f64) -> Result<Self> {
        let spec = EmbeddingKernelSpec::GaussianOnMmd { tau };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EmbeddingKernelSpec::Linear => Ok(()),
            EmbeddingKernelSpec::GaussianOnMmd { tau } if tau.is_finite() && tau > 0.0 => Ok(()),
            EmbeddingKernelSpec::GaussianOnMmd { tau } => Err(Error::Config(format!(
                "embedding kernel tau must be positive and finite, got {tau}"
            ))),
        }
    }

    /// Upper bound ς on `K(μ, μ)` given a base kernel bounded by ϱ = 1.
    pub fn bound(&self) -> f64 {
        1.0
    }

    /// Hölder constants `(L, h)` with `‖K(·, μ_x) − K(·, μ_y)‖ ≤ L·‖μ_x − μ_y‖^h`.
    ///
    /// For the Gaussian variant this also bounds `|K(x, z) − K(y, z)|` with
    /// `L = 1/τ`, since `exp(−u²/(2τ²))` is `(e^{−1/2}/τ)`-Lipschitz in `u`.
    pub fn holder_constants(&self) -> (f64, f64) {
        match *self {
            EmbeddingKernelSpec::Linear => (1.0, 1.0),
            EmbeddingKernelSpec::GaussianOnMmd { tau } => (1.0 / tau, 1.0),
        }
    }

    /// Evaluates `K` from the three embedding inner products.
    #[inline]
    pub(crate) fn from_inners(&self, aa: f64, bb: f64, ab: f64) -> f64 {
        match *self {
            EmbeddingKernelSpec::Linear => ab,
            EmbeddingKernelSpec::GaussianOnMmd { tau } => {
                (-mmd_from_inners(aa, bb, ab) / (2.0 * tau * tau)).exp()
            }
        }
    }
}

#[inline]
fn mmd_from_inners(aa: f64, bb: f64, ab: f64) -> f64 {
    (aa + bb - 2.0 * ab).max(0.0)
}

#[inline]
fn gaussian(x: &[f64], y: &[f64], scale: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 * scale).exp()
}

/// Base kernel on a pair of (action, state) points.
pub fn base_kernel_eval(
    x: (ActionId, &[f64]),
    y: (ActionId, &[f64]),
    spec: &BaseKernelSpec,
) -> Result<f64> {
    contract!(
        x.1.len() == y.1.len(),
        "state dimension mismatch: {} vs {}",
        x.1.len(),
        y.1.len()
    );
    contract!(
        x.1.iter().chain(y.1).all(|v| v.is_finite()),
        "non-finite state coordinate"
    );
    if x.0 != y.0 {
        return Ok(0.0);
    }
    Ok(gaussian(x.1, y.1, spec.scale()))
}

fn check_pair(a: &Config, b: &Config) -> Result<()> {
    contract!(
        a.sample.dim() == b.sample.dim(),
        "state dimension mismatch: {} vs {}",
        a.sample.dim(),
        b.sample.dim()
    );
    Ok(())
}

/// `⟨μ_A, μ_B⟩` without argument checks.
fn inner_unchecked(a: &Config, b: &Config, spec: &BaseKernelSpec) -> f64 {
    if a.action != b.action {
        return 0.0;
    }
    let (first, second) = match a.canonical_cmp(b) {
        Ordering::Greater => (b, a),
        Ordering::Less => (a, b),
        Ordering::Equal => return self_inner(&a.sample, spec),
    };
    let scale = spec.scale();
    let mut total = 0.0;
    for x in first.sample.states() {
        for y in second.sample.states() {
            total += gaussian(x, y, scale);
        }
    }
    total / (first.sample.len() as f64 * second.sample.len() as f64)
}

/// `‖μ_A‖²`, summing the strict upper triangle once.
fn self_inner(sample: &AgentSample, spec: &BaseKernelSpec) -> f64 {
    let scale = spec.scale();
    let n = sample.len();
    let mut off = 0.0;
    for i in 0..n {
        let x = sample.state(i);
        for j in (i + 1)..n {
            off += gaussian(x, sample.state(j), scale);
        }
    }
    (n as f64 + 2.0 * off) / (n as f64 * n as f64)
}

/// Inner product of two empirical mean embeddings in `H(k)`.
pub fn embedding_inner(a: &Config, b: &Config, spec: &BaseKernelSpec) -> Result<f64> {
    check_pair(a, b)?;
    Ok(inner_unchecked(a, b, spec))
}

/// Squared MMD `‖μ_A − μ_B‖²`, clamped below at zero.
pub fn mmd_sq(a: &Config, b: &Config, spec: &BaseKernelSpec) -> Result<f64> {
    check_pair(a, b)?;
    Ok(mmd_from_inners(
        inner_unchecked(a, a, spec),
        inner_unchecked(b, b, spec),
        inner_unchecked(a, b, spec),
    ))
}

/// Second-level kernel `K(μ_A, μ_B)`.
pub fn embedding_kernel_eval(
    a: &Config,
    b: &Config,
    base: &BaseKernelSpec,
    emb: &EmbeddingKernelSpec,
) -> Result<f64> {
    check_pair(a, b)?;
    Ok(Embedded::new(a, base).kernel(&Embedded::new(b, base), base, emb))
}

/// A configuration with its squared embedding norm precomputed.
#[derive(Debug, Clone)]
pub struct Embedded<'a> {
    pub config: &'a Config,
    pub norm_sq: f64,
}

impl<'a> Embedded<'a> {
    pub fn new(config: &'a Config, base: &BaseKernelSpec) -> Self {
        Embedded {
            config,
            norm_sq: inner_unchecked(config, config, base),
        }
    }

    /// `K` against another embedded configuration. Dimensions are not checked.
    #[inline]
    pub fn kernel(&self, other: &Embedded<'_>, base: &BaseKernelSpec, emb: &EmbeddingKernelSpec) -> f64 {
        let ab = inner_unchecked(self.config, other.config, base);
        emb.from_inners(self.norm_sq, other.norm_sq, ab)
    }

    pub fn mmd_sq(&self, other: &Embedded<'_>, base: &BaseKernelSpec) -> f64 {
        let ab = inner_unchecked(self.config, other.config, base);
        mmd_from_inners(self.norm_sq, other.norm_sq, ab)
    }
}

pub(crate) fn embed_all<'a>(configs: &'a [Config], base: &BaseKernelSpec) -> Vec<Embedded<'a>> {
    configs.par_iter().map(|c| Embedded::new(c, base)).collect()
}

fn check_dims(configs: &[Config], dim: usize) -> Result<()> {
    for c in configs {
        contract!(
            c.sample.dim() == dim,
            "state dimension mismatch: {} vs {dim}",
            c.sample.dim()
        );
    }
    Ok(())
}

/// Gram matrix `G[i, j] = K(rows[i], cols[j])`.
///
/// Entries are computed independently (in parallel) and each one runs the
/// same sequential sum as [`embedding_kernel_eval`], so the result is
/// bit-identical to element-wise evaluation.
pub fn cross_gram(
    rows: &[Config],
    cols: &[Config],
    base: &BaseKernelSpec,
    emb: &EmbeddingKernelSpec,
) -> Result<DMatrix<f64>> {
    contract!(!rows.is_empty() && !cols.is_empty(), "cross_gram needs nonempty inputs");
    emb.validate()?;
    let dim = rows[0].sample.dim();
    check_dims(rows, dim)?;
    check_dims(cols, dim)?;
    let er = embed_all(rows, base);
    if std::ptr::eq(rows, cols) {
        return Ok(symmetric_gram(&er, base, emb));
    }
    let ec = embed_all(cols, base);
    Ok(gram_from_embedded(&er, &ec, base, emb))
}

pub(crate) fn gram_from_embedded(
    rows: &[Embedded<'_>],
    cols: &[Embedded<'_>],
    base: &BaseKernelSpec,
    emb: &EmbeddingKernelSpec,
) -> DMatrix<f64> {
    let data: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|r| cols.iter().map(|c| r.kernel(c, base, emb)).collect())
        .collect();
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| data[i][j])
}

/// Square Gram over one set; the kernel is exactly symmetric so only the upper
/// triangle is evaluated.
pub(crate) fn symmetric_gram(
    items: &[Embedded<'_>],
    base: &BaseKernelSpec,
    emb: &EmbeddingKernelSpec,
) -> DMatrix<f64> {
    let n = items.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| items[i].kernel(&items[j], base, emb)).collect())
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        if i <= j {
            upper[i][j - i]
        } else {
            upper[j][i - j]
        }
    })
}

const HEURISTIC_POOL: usize = 1000;

fn strided<T>(items: &[T], max: usize) -> impl Iterator<Item = &T> {
    let stride = items.len().div_ceil(max).max(1);
    items.iter().step_by(stride)
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Median of the nonzero pairwise distances between all observed states.
///
/// Pools at most 1000 states (an even stride through the pool); falls back to
/// 1.0 when every state coincides.
pub fn median_bandwidth<'a>(samples: impl IntoIterator<Item = &'a AgentSample>) -> f64 {
    let pool: Vec<&[f64]> = samples.into_iter().flat_map(|s| s.states()).collect();
    let picked: Vec<&[f64]> = strided(&pool, HEURISTIC_POOL).copied().collect();
    let mut dists = Vec::new();
    for i in 0..picked.len() {
        for j in (i + 1)..picked.len() {
            let d2: f64 = picked[i]
                .iter()
                .zip(picked[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 > 0.0 {
                dists.push(d2.sqrt());
            }
        }
    }
    median(dists).unwrap_or(1.0)
}

/// Median of the nonzero pairwise MMDs between configurations (at most 200,
/// strided); falls back to 1.0.
pub fn median_tau(configs: &[Config], base: &BaseKernelSpec) -> f64 {
    let picked: Vec<Config> = strided(configs, 200).cloned().collect();
    let emb = embed_all(&picked, base);
    let dists: Vec<f64> = (0..emb.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let emb = &emb;
            ((i + 1)..emb.len()).map(move |j| emb[i].mmd_sq(&emb[j], base))
        })
        .filter(|&m| m > 0.0)
        .map(f64::sqrt)
        .collect();
    median(dists).unwrap_or(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(action: usize, states: &[f64]) -> Config {
        Config::new(ActionId(action), Arc::new(AgentSample::from_scalars(states).unwrap()))
    }

    fn sigma() -> BaseKernelSpec {
        BaseKernelSpec::new(1.0).unwrap()
    }

    #[test]
    fn base_kernel_examples() {
        let s = sigma();
        assert_eq!(base_kernel_eval((ActionId(0), &[1.0]), (ActionId(0), &[1.0]), &s).unwrap(), 1.0);
        assert_eq!(base_kernel_eval((ActionId(0), &[1.0]), (ActionId(1), &[1.0]), &s).unwrap(), 0.0);
        let far = 2f64.sqrt();
        let v = base_kernel_eval((ActionId(0), &[0.0]), (ActionId(0), &[far]), &s).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!(base_kernel_eval((ActionId(0), &[0.0]), (ActionId(0), &[0.0, 1.0]), &s).is_err());
    }

    #[test]
    fn sample_rejects_bad_input() {
        assert!(AgentSample::from_scalars(&[]).is_err());
        assert!(AgentSample::from_scalars(&[f64::NAN]).is_err());
        assert!(AgentSample::from_flat(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(AgentSample::from_states(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn negative_zero_is_canonicalised() {
        assert_eq!(
            AgentSample::from_scalars(&[-0.0, 1.0]).unwrap(),
            AgentSample::from_scalars(&[1.0, 0.0]).unwrap()
        );
    }

    #[test]
    fn inner_examples() {
        let s = sigma();
        let far = 2f64.sqrt();
        assert_eq!(embedding_inner(&cfg(0, &[0.3]), &cfg(0, &[0.3]), &s).unwrap(), 1.0);
        assert_eq!(embedding_inner(&cfg(0, &[0.3]), &cfg(1, &[0.3]), &s).unwrap(), 0.0);
        // hand sum over the 1x2 Gram: (1 + e^-1) / 2
        let v = embedding_inner(&cfg(0, &[0.0]), &cfg(0, &[0.0, far]), &s).unwrap();
        assert!((v - 0.683_939_720_585_721).abs() < 1e-12);
    }

    #[test]
    fn mmd_examples() {
        let s = sigma();
        let far = 2f64.sqrt();
        assert_eq!(mmd_sq(&cfg(0, &[1.0, 2.0, 3.0]), &cfg(0, &[3.0, 1.0, 2.0]), &s).unwrap(), 0.0);
        let v = mmd_sq(&cfg(0, &[0.0]), &cfg(0, &[far]), &s).unwrap();
        assert!((v - 1.264_241_117_657_115).abs() < 1e-12);
        assert_eq!(mmd_sq(&cfg(0, &[0.0]), &cfg(1, &[0.0]), &s).unwrap(), 2.0);
    }

    #[test]
    fn embedding_kernel_examples() {
        let s = sigma();
        let a = cfg(0, &[0.5, -1.0]);
        let gauss = EmbeddingKernelSpec::gaussian(0.7).unwrap();
        assert_eq!(embedding_kernel_eval(&a, &a, &s, &gauss).unwrap(), 1.0);
        let single = cfg(0, &[0.5]);
        assert_eq!(
            embedding_kernel_eval(&single, &single, &s, &EmbeddingKernelSpec::Linear).unwrap(),
            1.0
        );
        // differing actions on singletons: mmd_sq = 2 = 2τ² with τ = 1
        let unit = EmbeddingKernelSpec::gaussian(1.0).unwrap();
        let v = embedding_kernel_eval(&cfg(0, &[0.0]), &cfg(1, &[0.0]), &s, &unit).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!(EmbeddingKernelSpec::gaussian(0.0).is_err());
        assert!(BaseKernelSpec::new(-1.0).is_err());
    }

    #[test]
    fn cross_gram_examples() {
        let s = sigma();
        let e = EmbeddingKernelSpec::gaussian(0.5).unwrap();
        let c = cfg(1, &[0.1, 0.4]);
        let g = cross_gram(std::slice::from_ref(&c), std::slice::from_ref(&c), &s, &e).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        let pair = vec![c.clone(), c.clone()];
        let g = cross_gram(&pair, &pair, &s, &e).unwrap();
        assert!(g.iter().all(|&v| v == 1.0));
        assert!(cross_gram(&[], &pair, &s, &e).is_err());

        let rows = vec![cfg(0, &[0.0, 1.0]), cfg(1, &[2.0]), cfg(0, &[-1.0, 0.5, 3.0])];
        let cols = vec![cfg(0, &[0.2]), cfg(1, &[2.0, 2.5]), cfg(0, &[1.0, -1.0])];
        let g = cross_gram(&rows, &cols, &s, &e).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let direct = embedding_kernel_eval(&rows[i], &cols[j], &s, &e).unwrap();
                assert_eq!(g[(i, j)].to_bits(), direct.to_bits());
            }
        }
        let sym = cross_gram(&rows, &rows, &s, &e).unwrap();
        let copy = rows.clone();
        let full = cross_gram(&rows, &copy, &s, &e).unwrap();
        assert_eq!(sym, full);
    }

    #[test]
    fn median_heuristics() {
        let a = AgentSample::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        // distances 1, 3, 2
        assert_eq!(median_bandwidth([&a]), 2.0);
        let same = AgentSample::from_scalars(&[4.0, 4.0]).unwrap();
        assert_eq!(median_bandwidth([&same]), 1.0);
        let configs = vec![cfg(0, &[0.0]), cfg(0, &[0.0])];
        assert_eq!(median_tau(&configs, &sigma()), 1.0);
    }

    fn arb_states() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 1..12)
    }

    proptest! {
        #[test]
        fn permutation_is_bit_exact(xs in arb_states(), ys in arb_states(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = xs.clone();
            shuffled.shuffle(&mut rng);
            let s = sigma();
            let a = cfg(0, &xs);
            let a2 = cfg(0, &shuffled);
            let b = cfg(0, &ys);
            prop_assert_eq!(
                embedding_inner(&a, &b, &s).unwrap().to_bits(),
                embedding_inner(&a2, &b, &s).unwrap().to_bits()
            );
            prop_assert_eq!(
                embedding_inner(&a, &b, &s).unwrap().to_bits(),
                embedding_inner(&b, &a2, &s).unwrap().to_bits()
            );
        }

        #[test]
        fn mmd_axioms(xs in arb_states(), ys in arb_states(), bw in 0.1f64..3.0) {
            let s = BaseKernelSpec::new(bw).unwrap();
            let a = cfg(0, &xs);
            let b = cfg(0, &ys);
            let ab = mmd_sq(&a, &b, &s).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(mmd_sq(&a, &a, &s).unwrap(), 0.0);
            prop_assert_eq!(ab.to_bits(), mmd_sq(&b, &a, &s).unwrap().to_bits());
            prop_assert!(embedding_inner(&a, &b, &s).unwrap() <= 1.0 + 1e-15);
        }
    }
}
