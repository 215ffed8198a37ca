//! Self-describing JSON container for batches and fitted models.
//!
//! Floats use the shortest round-trip encoding, so writing and reading back
//! is lossless and writing the same value twice yields identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::error::{contract, Error, Result};
use crate::fqi::{Batch, TransitionRecord};
use crate::kernels::{ActionId, AgentSample, BaseKernelSpec, Config, EmbeddingKernelSpec};
use crate::regression::{QModel, Truncation};

pub const FORMAT: &str = "mffqi-container";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerKind {
    Batch,
    Model,
}

#[derive(Serialize, Deserialize)]
struct Envelope<H, P> {
    format: String,
    version: u32,
    kind: ContainerKind,
    header: H,
    payload: P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchHeader {
    pub dim: usize,
    pub n_agents: usize,
    pub n_records: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub r_max: f64,
    /// Generating environment, when known.
    pub env: Option<EnvSpec>,
    pub seed: Option<u64>,
}

/// Record `i` occupies `states[i·N·d .. (i+1)·N·d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BatchPayload {
    actions: Vec<usize>,
    rewards: Vec<f64>,
    states: Vec<f64>,
    next_states: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub dim: usize,
    pub n_support: usize,
    pub q_max: f64,
    pub truncation: Truncation,
    pub base: BaseKernelSpec,
    pub emb: EmbeddingKernelSpec,
}

/// Support configuration `i` holds `lengths[i]` agents starting at
/// `offsets[i]·d` in `states`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelPayload {
    actions: Vec<usize>,
    lengths: Vec<usize>,
    states: Vec<f64>,
    alpha: Vec<f64>,
}

fn to_writer<T: Serialize>(out: impl Write, value: &T) -> Result<()> {
    let mut w = BufWriter::new(out);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_envelope<H: DeserializeOwned, P: DeserializeOwned>(path: &Path, kind: ContainerKind) -> Result<(H, P)> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open container {}: {e}", path.display())))?;
    let env: Envelope<H, P> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Config(format!("{} is not a valid container: {e}", path.display())))?;
    if env.format != FORMAT || env.version != VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported container {} v{}",
            path.display(),
            env.format,
            env.version
        )));
    }
    if env.kind != kind {
        return Err(Error::Config(format!("{}: expected a {kind:?} container", path.display())));
    }
    Ok((env.header, env.payload))
}

pub fn write_batch(out: impl Write, batch: &Batch, env: Option<&EnvSpec>, seed: Option<u64>) -> Result<()> {
    let recs = batch.records();
    let header = BatchHeader {
        dim: batch.dim(),
        n_agents: batch.n_agents(),
        n_records: batch.len(),
        n_actions: batch.n_actions(),
        gamma: batch.gamma(),
        r_max: batch.r_max(),
        env: env.cloned(),
        seed,
    };
    let payload = BatchPayload {
        actions: recs.iter().map(|r| r.action.index()).collect(),
        rewards: recs.iter().map(|r| r.reward).collect(),
        states: recs.iter().flat_map(|r| r.sample.as_flat().iter().copied()).collect(),
        next_states: recs.iter().flat_map(|r| r.next_sample.as_flat().iter().copied()).collect(),
    };
    to_writer(out, &Envelope { format: FORMAT.into(), version: VERSION, kind: ContainerKind::Batch, header, payload })
}

pub fn save_batch(path: &Path, batch: &Batch, env: Option<&EnvSpec>, seed: Option<u64>) -> Result<()> {
    write_batch(File::create(path)?, batch, env, seed)
}

pub fn load_batch(path: &Path) -> Result<(Batch, BatchHeader)> {
    let (h, p): (BatchHeader, BatchPayload) = read_envelope(path, ContainerKind::Batch)?;
    let width = h.n_agents * h.dim;
    contract!(width > 0, "batch header has zero-sized samples");
    contract!(
        p.actions.len() == h.n_records
            && p.rewards.len() == h.n_records
            && p.states.len() == h.n_records * width
            && p.next_states.len() == h.n_records * width,
        "batch payload does not match its header"
    );
    let records = (0..h.n_records)
        .map(|i| {
            let span = i * width..(i + 1) * width;
            Ok(TransitionRecord {
                sample: Arc::new(AgentSample::from_flat(h.dim, p.states[span.clone()].to_vec())?),
                action: ActionId(p.actions[i]),
                reward: p.rewards[i],
                next_sample: Arc::new(AgentSample::from_flat(h.dim, p.next_states[span].to_vec())?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let batch = Batch::new(records, h.r_max, h.gamma, h.n_actions)?;
    Ok((batch, h))
}

pub fn write_model(out: impl Write, model: &QModel) -> Result<()> {
    let support = model.support();
    let header = ModelHeader {
        dim: model.dim(),
        n_support: support.len(),
        q_max: model.q_max(),
        truncation: model.truncation(),
        base: *model.base(),
        emb: *model.emb(),
    };
    let payload = ModelPayload {
        actions: support.iter().map(|c| c.action.index()).collect(),
        lengths: support.iter().map(|c| c.sample.len()).collect(),
        states: support.iter().flat_map(|c| c.sample.as_flat().iter().copied()).collect(),
        alpha: model.alpha().to_vec(),
    };
    to_writer(out, &Envelope { format: FORMAT.into(), version: VERSION, kind: ContainerKind::Model, header, payload })
}

pub fn save_model(path: &Path, model: &QModel) -> Result<()> {
    write_model(File::create(path)?, model)
}

pub fn load_model(path: &Path) -> Result<QModel> {
    let (h, p): (ModelHeader, ModelPayload) = read_envelope(path, ContainerKind::Model)?;
    contract!(
        p.actions.len() == h.n_support && p.lengths.len() == h.n_support && p.alpha.len() == h.n_support,
        "model payload does not match its header"
    );
    contract!(
        p.lengths.iter().sum::<usize>() * h.dim == p.states.len(),
        "model states do not match the recorded sample lengths"
    );
    let mut offset = 0;
    let mut support = Vec::with_capacity(h.n_support);
    for (a, &len) in p.actions.iter().zip(&p.lengths) {
        let end = offset + len * h.dim;
        let sample = AgentSample::from_flat(h.dim, p.states[offset..end].to_vec())?;
        support.push(Config::new(ActionId(*a), Arc::new(sample)));
        offset = end;
    }
    QModel::new(support, p.alpha, h.base, h.emb, h.q_max, h.truncation)
}
