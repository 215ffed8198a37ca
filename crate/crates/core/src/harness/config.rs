//! Experiment configuration: a JSON document with dotted-path overrides.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "experiment": "sweep_agents",
//!   "env": { "kind": "discrete_chain", "params": { ... }, "n_agents": 4,
//!            "r_max": 1.0, "gamma": 0.9, "seed": 2024 },
//!   "fqi": { "kappa": 100, "lambda": 1e-6, "bandwidth": 1.0, "tau": null,
//!            "embedding": "gaussian_on_mmd", "initial_q": "zero",
//!            "truncation": "upper", "use_cache": true },
//!   "batch_size": 200,
//!   "grids": { "n_agents": [4, 8, 16, 32, 64], "batch_sizes": [], "kappas": [], "exponents": [] },
//!   "seeds": [0, 1, 2, 3, 4],
//!   "output": null
//! }
//! ```
//!
//! `bandwidth` and `tau` fall back to the median heuristics when `null`. An
//! empty `seeds` list means `[env.seed]`. A run manifest is itself a valid
//! config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::envs::{Env, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::fqi::{resolve_kernels, Batch, FqiConfig, InitialQ};
use crate::harness::reference::{noisy_chain, reference_chain, reference_drift, REFERENCE_BANDWIDTH};
use crate::regression::Truncation;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Train,
    OracleCompare,
    SweepAgents,
    SweepBatch,
    Convergence,
    Concentration,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::OracleCompare => "oracle_compare",
            ExperimentKind::SweepAgents => "sweep_agents",
            ExperimentKind::SweepBatch => "sweep_batch",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Concentration => "concentration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingChoice {
    #[default]
    GaussianOnMmd,
    Linear,
}

/// FQI settings with kernel hyperparameters left open until a batch is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FqiSettings {
    pub kappa: usize,
    pub lambda: f64,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub embedding: EmbeddingChoice,
    #[serde(default)]
    pub initial_q: InitialQ,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default = "yes")]
    pub use_cache: bool,
}

fn yes() -> bool {
    true
}

impl FqiSettings {
    pub fn resolve(&self, batch: &Batch) -> Result<FqiConfig> {
        let (base, emb) = resolve_kernels(
            batch,
            self.bandwidth,
            self.tau,
            self.embedding == EmbeddingChoice::Linear,
        )?;
        let cfg = FqiConfig {
            kappa: self.kappa,
            lambda: self.lambda,
            base,
            emb,
            initial_q: self.initial_q,
            truncation: self.truncation,
            use_cache: self.use_cache,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub n_agents: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub kappas: Vec<usize>,
    /// Exponents `a` of the coupled grid `n = round(N^a)`.
    pub exponents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConcentrationSettings {
    pub resamples: usize,
    /// `N_ref = reference_factor · max(N)`.
    pub reference_factor: usize,
}

impl Default for ConcentrationSettings {
    fn default() -> Self {
        ConcentrationSettings { resamples: 200, reference_factor: 100 }
    }
}

fn default_plateau() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub env: EnvSpec,
    pub fqi: FqiSettings,
    /// Records per batch wherever `n` is not swept.
    pub batch_size: usize,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Iteration whose error serves as the plateau of the convergence curve.
    #[serde(default = "default_plateau")]
    pub plateau_kappa: usize,
    #[serde(default = "default_tol")]
    pub oracle_tol: f64,
    #[serde(default)]
    pub concentration: ConcentrationSettings,
    /// Fill the `wall_clock_s` column; off keeps results byte-reproducible.
    #[serde(default)]
    pub record_wall_clock: bool,
}

impl ExperimentConfig {
    /// Built-in configuration for `kind` on the reference environments.
    pub fn reference(kind: ExperimentKind) -> Self {
        let env = match kind {
            ExperimentKind::SweepAgents => noisy_chain(4),
            ExperimentKind::Concentration => reference_drift(),
            _ => reference_chain(),
        };
        let seeds = match kind {
            ExperimentKind::SweepAgents | ExperimentKind::SweepBatch => vec![0, 1, 2, 3, 4],
            _ => Vec::new(),
        };
        let grids = match kind {
            ExperimentKind::SweepAgents => Grids { n_agents: vec![4, 8, 16, 32, 64], ..Grids::default() },
            ExperimentKind::SweepBatch => Grids {
                batch_sizes: vec![25, 50, 100, 200],
                exponents: vec![2.0, 2.5, 3.0, 3.5],
                ..Grids::default()
            },
            ExperimentKind::Convergence => Grids { kappas: (0..=30).collect(), ..Grids::default() },
            ExperimentKind::Concentration => Grids { n_agents: vec![8, 16, 32, 64, 128, 256], ..Grids::default() },
            _ => Grids::default(),
        };
        let bandwidth = match kind {
            ExperimentKind::Concentration => None,
            _ => Some(REFERENCE_BANDWIDTH),
        };
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: kind,
            env,
            fqi: FqiSettings {
                kappa: 100,
                lambda: 1e-6,
                bandwidth,
                tau: None,
                embedding: EmbeddingChoice::GaussianOnMmd,
                initial_q: InitialQ::Zero,
                truncation: Truncation::Upper,
                use_cache: true,
            },
            batch_size: 200,
            grids,
            seeds,
            output: None,
            plateau_kappa: default_plateau(),
            oracle_tol: default_tol(),
            concentration: ConcentrationSettings::default(),
            record_wall_clock: false,
        }
    }

    /// Reads `path` (a config or a run manifest), forces `experiment` to
    /// `kind`, applies `overrides` and validates. Without a path the
    /// reference configuration is used.
    pub fn load(path: Option<&Path>, kind: ExperimentKind, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", p.display())))?;
                match v {
                    Value::Object(mut m) if m.contains_key("manifest_version") => m
                        .remove("config")
                        .ok_or_else(|| Error::Config("manifest has no config".into()))?,
                    other => other,
                }
            }
            None => serde_json::to_value(Self::reference(kind))?,
        };
        set_path(&mut value, "experiment", Value::String(kind.name().into()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!("unsupported schema_version {}", self.schema_version));
        }
        Env::new(self.env.clone())?;
        if self.fqi.kappa == 0 {
            return fail("fqi.kappa must be at least 1".into());
        }
        if !(self.fqi.lambda.is_finite() && self.fqi.lambda > 0.0) {
            return fail("fqi.lambda must be positive".into());
        }
        for (name, v) in [("bandwidth", self.fqi.bandwidth), ("tau", self.fqi.tau)] {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return fail(format!("fqi.{name} must be positive"));
                }
            }
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        let mut seen = HashSet::new();
        if !self.seeds.iter().all(|s| seen.insert(*s)) {
            return fail("seeds must be distinct".into());
        }
        let g = &self.grids;
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { fail(format!("grids.{what} must be nonempty")) };
        match self.experiment {
            ExperimentKind::SweepAgents | ExperimentKind::Concentration => need(!g.n_agents.is_empty(), "n_agents")?,
            ExperimentKind::SweepBatch => need(!g.batch_sizes.is_empty(), "batch_sizes")?,
            ExperimentKind::Convergence => need(!g.kappas.is_empty(), "kappas")?,
            _ => {}
        }
        if g.n_agents.contains(&0) || g.batch_sizes.contains(&0) {
            return fail("grid values must be positive".into());
        }
        if g.exponents.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return fail("grids.exponents must be positive".into());
        }
        if self.experiment == ExperimentKind::Concentration {
            let c = &self.concentration;
            if c.resamples < 2 || c.reference_factor == 0 {
                return fail("concentration needs at least 2 resamples and a positive reference_factor".into());
            }
        }
        Ok(())
    }

    /// The seeds a run iterates over.
    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.env.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn is_chain(&self) -> bool {
        matches!(self.env.kind, EnvKind::DiscreteChain(_))
    }
}

/// Applies one `dotted.path=value` override. The value is parsed as JSON and
/// taken as a plain string when that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form path=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(root, path.trim(), value)
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let bad = || Error::Config(format!("cannot set `{path}`"));
    if path.is_empty() {
        return Err(bad());
    }
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(m) => {
                if last {
                    m.insert(part.to_string(), value);
                    return Ok(());
                }
                m.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(a) => {
                let idx: usize = part.parse().map_err(|_| bad())?;
                let slot = a.get_mut(idx).ok_or_else(bad)?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad()),
        };
    }
    Err(bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_configs_validate() {
        for kind in [
            ExperimentKind::Train,
            ExperimentKind::OracleCompare,
            ExperimentKind::SweepAgents,
            ExperimentKind::SweepBatch,
            ExperimentKind::Convergence,
            ExperimentKind::Concentration,
        ] {
            ExperimentConfig::reference(kind).validate().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::reference(ExperimentKind::SweepAgents);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_by_dotted_path() {
        let cfg = ExperimentConfig::load(
            None,
            ExperimentKind::Train,
            &["fqi.kappa=7".into(), "batch_size=6".into(), "seeds=[3,4]".into(), "fqi.tau=0.5".into()],
        )
        .unwrap();
        assert_eq!(cfg.fqi.kappa, 7);
        assert_eq!(cfg.batch_size, 6);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.fqi.tau, Some(0.5));
    }

    #[test]
    fn array_index_override() {
        let mut v = serde_json::json!({"grids": {"n_agents": [1, 2, 3]}});
        apply_override(&mut v, "grids.n_agents.1=9").unwrap();
        assert_eq!(v["grids"]["n_agents"][1], 9);
        assert!(apply_override(&mut v, "grids.n_agents.7=9").is_err());
        assert!(apply_override(&mut v, "no_equals_sign").is_err());
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let e = ExperimentConfig::load(None, ExperimentKind::Train, &["seeds=[1,1]".into()]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn empty_grid_rejected() {
        let e = ExperimentConfig::load(None, ExperimentKind::SweepAgents, &["grids.n_agents=[]".into()]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn missing_file_is_config_error() {
        let e = ExperimentConfig::load(Some(Path::new("/nonexistent/c.json")), ExperimentKind::Train, &[]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn empty_seeds_use_env_seed() {
        let cfg = ExperimentConfig::reference(ExperimentKind::Train);
        assert_eq!(cfg.seed_list(), vec![cfg.env.seed]);
    }
}
