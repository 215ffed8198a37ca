//! The experiment suite. Every operation returns [`ResultRow`]s and is a pure
//! function of its configuration; jobs run in parallel and are merged in
//! `(grid value, seed)` order.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::envs::{collect_batch, stream_rng, ActionPolicy, DiscreteInit, Env, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::fqi::{bellman_residual, run_mffqi, run_mffqi_observed, zero_model, Batch, FqiConfig, FqiRun, InitialQ};
use crate::harness::config::ExperimentConfig;
use crate::kernels::{median_bandwidth, ActionId, BaseKernelSpec, Config, Embedded};
use crate::oracle::{compare_q, solve_chain, CompareReport, LatticeEncoding, OracleTable};
use crate::regression::QModel;

pub const RESULTS_HEADER: [&str; 9] =
    ["experiment", "seed", "n_agents", "batch_size", "kappa", "lambda", "metric", "value", "wall_clock_s"];
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// Seed offset of the held-out batch used when no oracle exists.
const HELD_OUT_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: Option<u64>,
    pub n_agents: Option<usize>,
    pub batch_size: Option<usize>,
    pub kappa: Option<usize>,
    pub lambda: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub wall_clock_s: Option<f64>,
}

impl ResultRow {
    fn new(experiment: &str, metric: impl Into<String>, value: f64) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            seed: None,
            n_agents: None,
            batch_size: None,
            kappa: None,
            lambda: None,
            metric: metric.into(),
            value,
            wall_clock_s: None,
        }
    }
}

/// Common coordinates of the rows one job emits.
#[derive(Debug, Clone, Copy, Default)]
struct Key {
    seed: Option<u64>,
    n_agents: Option<usize>,
    batch_size: Option<usize>,
    kappa: Option<usize>,
    lambda: Option<f64>,
    wall_clock_s: Option<f64>,
}

impl Key {
    fn row(&self, experiment: &str, metric: impl Into<String>, value: f64) -> ResultRow {
        ResultRow {
            seed: self.seed,
            n_agents: self.n_agents,
            batch_size: self.batch_size,
            kappa: self.kappa,
            lambda: self.lambda,
            wall_clock_s: self.wall_clock_s,
            ..ResultRow::new(experiment, metric, value)
        }
    }
}

/// Writes the fixed header followed by `rows` (RFC 4180 quoting).
pub fn write_results(out: impl Write, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Spearman rank correlation, with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `exp` of the least-squares slope of `ln(excess)` against `κ`, over the
/// points whose excess is positive. `None` with fewer than two such points.
pub fn geometric_decay_rate(points: &[(usize, f64)], floor: f64) -> Option<f64> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > floor)
        .map(|&(k, e)| (k as f64, e.ln()))
        .collect();
    if kept.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    Some(ols_slope(&x, &y).exp())
}

/// Scores models either against the exact oracle (deterministic chains) or
/// by their Bellman residual on a held-out batch.
pub struct Evaluator {
    oracle: Option<(OracleTable, LatticeEncoding)>,
    held_out: Option<Batch>,
}

impl Evaluator {
    pub fn new(spec: &EnvSpec, held_out_size: usize, seed: u64, tol: f64) -> Result<Self> {
        let env = Env::new(spec.clone())?;
        match env.chain() {
            Some(p) if p.is_deterministic() => Ok(Evaluator {
                oracle: Some((solve_chain(&env, tol)?, LatticeEncoding::from_params(p))),
                held_out: None,
            }),
            _ => Ok(Evaluator {
                oracle: None,
                held_out: Some(collect_batch(&env, held_out_size, ActionPolicy::UniformRandom, seed ^ HELD_OUT_SALT)?),
            }),
        }
    }

    pub fn oracle(&self) -> Option<&OracleTable> {
        self.oracle.as_ref().map(|(t, _)| t)
    }

    /// `sup_err` with an oracle, `heldout_bellman_residual` otherwise.
    pub fn primary_metric(&self) -> &'static str {
        if self.oracle.is_some() {
            "sup_err"
        } else {
            "heldout_bellman_residual"
        }
    }

    pub fn compare(&self, model: &QModel) -> Option<Result<CompareReport>> {
        self.oracle.as_ref().map(|(t, enc)| compare_q(model, t, enc))
    }

    pub fn primary(&self, model: &QModel) -> Result<f64> {
        match (&self.oracle, &self.held_out) {
            (Some((t, enc)), _) => Ok(compare_q(model, t, enc)?.sup_err),
            (None, Some(b)) => bellman_residual(model, b),
            (None, None) => unreachable!("evaluator without oracle or held-out batch"),
        }
    }

    pub fn metrics(&self, model: &QModel) -> Result<Vec<(&'static str, f64)>> {
        match self.compare(model) {
            Some(r) => {
                let r = r?;
                Ok(vec![("sup_err", r.sup_err), ("mean_err", r.mean_err), ("argmax_agreement", r.argmax_agreement)])
            }
            None => Ok(vec![("heldout_bellman_residual", self.primary(model)?)]),
        }
    }

    /// Primary metric of the constant function `c` (already truncated).
    fn primary_constant(&self, c: f64) -> f64 {
        match (&self.oracle, &self.held_out) {
            (Some((t, _)), _) => t.q_values.iter().flatten().map(|q| (c - q).abs()).fold(0.0, f64::max),
            (None, Some(b)) => constant_bellman_residual(c, b),
            (None, None) => unreachable!("evaluator without oracle or held-out batch"),
        }
    }
}

fn constant_bellman_residual(c: f64, batch: &Batch) -> f64 {
    let g = batch.gamma();
    let acc: f64 = batch.records().iter().map(|r| (c - r.reward - g * c).powi(2)).sum();
    (acc / batch.len() as f64).sqrt()
}

fn with_agents(spec: &EnvSpec, n_agents: usize) -> EnvSpec {
    EnvSpec { n_agents, ..spec.clone() }
}

/// Collects `n` records under `seed` and fits MF-FQI.
pub fn train_on(spec: &EnvSpec, cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<(Batch, FqiConfig, FqiRun)> {
    let env = Env::new(spec.clone())?;
    let batch = collect_batch(&env, n, ActionPolicy::UniformRandom, seed)?;
    let fqi = cfg.fqi.resolve(&batch)?;
    let run = run_mffqi(&batch, &fqi)?;
    Ok((batch, fqi, run))
}

fn clock(cfg: &ExperimentConfig, t0: Instant) -> Option<f64> {
    cfg.record_wall_clock.then(|| t0.elapsed().as_secs_f64())
}

pub struct TrainOutcome {
    pub batch: Batch,
    pub fqi: FqiConfig,
    pub run: FqiRun,
    pub rows: Vec<ResultRow>,
}

/// Fits one model, on `batch` when given and on a freshly collected batch
/// under the first seed otherwise.
pub fn train(cfg: &ExperimentConfig, batch: Option<Batch>) -> Result<TrainOutcome> {
    let t0 = Instant::now();
    let seed = cfg.seed_list()[0];
    let batch = match batch {
        Some(b) => b,
        None => collect_batch(&Env::new(cfg.env.clone())?, cfg.batch_size, ActionPolicy::UniformRandom, seed)?,
    };
    let fqi = cfg.fqi.resolve(&batch)?;
    let run = run_mffqi(&batch, &fqi)?;
    let key = Key {
        seed: Some(seed),
        n_agents: Some(batch.n_agents()),
        batch_size: Some(batch.len()),
        kappa: Some(fqi.kappa),
        lambda: Some(fqi.lambda),
        wall_clock_s: clock(cfg, t0),
    };
    let last = run.diagnostics.iterations.last().map_or(0.0, |s| s.fit_residual);
    let rows = vec![
        key.row("train", "bellman_residual", bellman_residual(&run.model, &batch)?),
        key.row("train", "fit_residual", last),
        key.row("train", "jitter", run.diagnostics.jitter),
    ];
    Ok(TrainOutcome { batch, fqi, run, rows })
}

/// Scores a saved model against the oracle or a held-out batch, plus its
/// Bellman residual on `batch` when given.
pub fn evaluate(cfg: &ExperimentConfig, model: &QModel, batch: Option<&Batch>) -> Result<Vec<ResultRow>> {
    let seed = cfg.seed_list()[0];
    let eval = Evaluator::new(&cfg.env, cfg.batch_size, seed, cfg.oracle_tol)?;
    let key = Key { seed: Some(seed), n_agents: Some(cfg.env.n_agents), ..Key::default() };
    let mut rows: Vec<ResultRow> = eval
        .metrics(model)?
        .into_iter()
        .map(|(m, v)| key.row("evaluate", m, v))
        .collect();
    if let Some(b) = batch {
        rows.push(key.row("evaluate", "bellman_residual", bellman_residual(model, b)?));
    }
    Ok(rows)
}

pub struct OracleOutcome {
    pub oracle: OracleTable,
    /// One report per seed, in seed order.
    pub reports: Vec<(u64, CompareReport)>,
    pub rows: Vec<ResultRow>,
}

/// Trains on the reference chain and compares against exact value iteration.
pub fn oracle_compare(cfg: &ExperimentConfig) -> Result<OracleOutcome> {
    let env = Env::new(cfg.env.clone())?;
    if !env.chain().is_some_and(|p| p.is_deterministic()) {
        return Err(Error::Unsupported("oracle comparison needs a deterministic discrete chain".into()));
    }
    let oracle = solve_chain(&env, cfg.oracle_tol)?;
    let encoding = LatticeEncoding::from_params(env.chain().expect("checked above"));
    let jobs = cfg
        .seed_list()
        .into_par_iter()
        .map(|seed| {
            let t0 = Instant::now();
            let (_, fqi, run) = train_on(&cfg.env, cfg, cfg.batch_size, seed)?;
            let report = compare_q(&run.model, &oracle, &encoding)?;
            let key = Key {
                seed: Some(seed),
                n_agents: Some(cfg.env.n_agents),
                batch_size: Some(cfg.batch_size),
                kappa: Some(fqi.kappa),
                lambda: Some(fqi.lambda),
                wall_clock_s: clock(cfg, t0),
            };
            let rows = vec![
                key.row("oracle_compare", "sup_err", report.sup_err),
                key.row("oracle_compare", "mean_err", report.mean_err),
                key.row("oracle_compare", "argmax_agreement", report.argmax_agreement),
                key.row("oracle_compare", "sup_err_over_q_max", report.sup_err / oracle.q_max()),
            ];
            Ok(((seed, report), rows))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![
        ResultRow::new("oracle_compare", "q_max", oracle.q_max()),
        ResultRow::new("oracle_compare", "min_action_gap", oracle.min_action_gap()),
        ResultRow::new("oracle_compare", "n_configs", (oracle.states.len() * oracle.n_actions()) as f64),
    ];
    let mut reports = Vec::new();
    for (rep, r) in jobs {
        reports.push(rep);
        rows.extend(r);
    }
    Ok(OracleOutcome { oracle, reports, rows })
}

/// One `(N, n)` grid point under every seed: per-seed rows, then mean and
/// standard deviation of the primary metric. Returns the rows and the mean.
fn grid_point_jobs(
    cfg: &ExperimentConfig,
    experiment: &str,
    prefix: &str,
    points: &[(usize, usize)],
) -> Result<(Vec<ResultRow>, Vec<f64>)> {
    let seeds = cfg.seed_list();
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let t0 = Instant::now();
            let (n_agents, n) = points[p];
            let spec = with_agents(&cfg.env, n_agents);
            let (_, fqi, run) = train_on(&spec, cfg, n, seed)?;
            let eval = Evaluator::new(&spec, n, seed, cfg.oracle_tol)?;
            let metrics = eval.metrics(&run.model)?;
            let primary = eval.primary(&run.model)?;
            let key = Key {
                seed: Some(seed),
                n_agents: Some(n_agents),
                batch_size: Some(n),
                kappa: Some(fqi.kappa),
                lambda: Some(fqi.lambda),
                wall_clock_s: clock(cfg, t0),
            };
            let rows: Vec<ResultRow> =
                metrics.into_iter().map(|(m, v)| key.row(experiment, format!("{prefix}{m}"), v)).collect();
            Ok((p, eval.primary_metric(), primary, rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut means = Vec::with_capacity(points.len());
    for (p, &(n_agents, n)) in points.iter().enumerate() {
        let group: Vec<_> = results.iter().filter(|r| r.0 == p).collect();
        let values: Vec<f64> = group.iter().map(|r| r.2).collect();
        for r in &group {
            rows.extend(r.3.iter().cloned());
        }
        let (mean, std) = mean_std(&values);
        let metric = group[0].1;
        let key = Key {
            n_agents: Some(n_agents),
            batch_size: Some(n),
            kappa: Some(cfg.fqi.kappa),
            lambda: Some(cfg.fqi.lambda),
            ..Key::default()
        };
        rows.push(key.row(experiment, format!("{prefix}{metric}_mean"), mean));
        rows.push(key.row(experiment, format!("{prefix}{metric}_std"), std));
        means.push(mean);
    }
    Ok((rows, means))
}

/// Error versus the number of observed agents `N` at fixed batch size.
pub fn sweep_agents(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let grid = &cfg.grids.n_agents;
    let points: Vec<(usize, usize)> = grid.iter().map(|&n_agents| (n_agents, cfg.batch_size)).collect();
    let (mut rows, means) = grid_point_jobs(cfg, "sweep_agents", "", &points)?;
    if grid.len() >= 2 {
        let x: Vec<f64> = grid.iter().map(|&v| v as f64).collect();
        rows.push(ResultRow::new("sweep_agents", "spearman_rho", spearman(&x, &means)));
    }
    Ok(rows)
}

/// Error versus batch size `n` at fixed `N`, then along `n = round(N^a)`.
pub fn sweep_batch(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let n_agents = cfg.env.n_agents;
    let grid = &cfg.grids.batch_sizes;
    let points: Vec<(usize, usize)> = grid.iter().map(|&n| (n_agents, n)).collect();
    let (mut rows, means) = grid_point_jobs(cfg, "sweep_batch", "", &points)?;
    if grid.len() >= 2 {
        let x: Vec<f64> = grid.iter().map(|&v| v as f64).collect();
        rows.push(ResultRow::new("sweep_batch", "spearman_rho", spearman(&x, &means)));
    }
    if !cfg.grids.exponents.is_empty() {
        let coupled: Vec<(usize, usize)> = cfg
            .grids
            .exponents
            .iter()
            .map(|&a| (n_agents, ((n_agents as f64).powf(a).round() as usize).max(1)))
            .collect();
        for (&a, &(_, n)) in cfg.grids.exponents.iter().zip(&coupled) {
            let key = Key { n_agents: Some(n_agents), batch_size: Some(n), ..Key::default() };
            rows.push(key.row("sweep_batch", "coupled_exponent", a));
        }
        let (coupled_rows, _) = grid_point_jobs(cfg, "sweep_batch", "coupled_", &coupled)?;
        rows.extend(coupled_rows);
    }
    Ok(rows)
}

/// Error and empirical Bellman residual after each `κ` of the grid, with the
/// fitted geometric decay rate of `error − plateau`.
pub fn convergence_curve(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let kappas: BTreeSet<usize> = cfg.grids.kappas.iter().copied().collect();
    let k_max = kappas.iter().copied().max().unwrap_or(0).max(cfg.plateau_kappa).max(1);
    let seeds = cfg.seed_list();
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let env = Env::new(cfg.env.clone())?;
            let batch = collect_batch(&env, cfg.batch_size, ActionPolicy::UniformRandom, seed)?;
            let mut fqi = cfg.fqi.resolve(&batch)?;
            fqi.kappa = k_max;
            let eval = Evaluator::new(&cfg.env, cfg.batch_size, seed, cfg.oracle_tol)?;
            let metric = eval.primary_metric();
            let key = |k: usize| Key {
                seed: Some(seed),
                n_agents: Some(cfg.env.n_agents),
                batch_size: Some(cfg.batch_size),
                kappa: Some(k),
                lambda: Some(fqi.lambda),
                wall_clock_s: None,
            };

            let mut curve: Vec<(usize, f64, f64)> = Vec::new();
            if kappas.contains(&0) {
                let (err, br) = match fqi.initial_q {
                    InitialQ::Zero => {
                        let m = zero_model(&batch, &fqi)?;
                        (eval.primary(&m)?, bellman_residual(&m, &batch)?)
                    }
                    InitialQ::Constant(c) => {
                        let c = fqi.truncation.apply(c, batch.q_max());
                        (eval.primary_constant(c), constant_bellman_residual(c, &batch))
                    }
                };
                curve.push((0, err, br));
            }
            let mut plateau = f64::NAN;
            run_mffqi_observed(&batch, &fqi, |k, model| {
                let want = kappas.contains(&k);
                if want || k == cfg.plateau_kappa {
                    let err = eval.primary(model)?;
                    if k == cfg.plateau_kappa {
                        plateau = err;
                    }
                    if want {
                        curve.push((k, err, bellman_residual(model, &batch)?));
                    }
                }
                Ok(())
            })?;

            let mut rows = Vec::new();
            for &(k, err, br) in &curve {
                rows.push(key(k).row("convergence", metric, err));
                rows.push(key(k).row("convergence", "bellman_residual", br));
            }
            let excess: Vec<(usize, f64)> =
                curve.iter().filter(|c| c.0 >= 1).map(|&(k, e, _)| (k, e - plateau)).collect();
            let rate = geometric_decay_rate(&excess, 1e-9 * batch.q_max()).unwrap_or(0.0);
            rows.push(key(cfg.plateau_kappa).row("convergence", "plateau", plateau));
            let fit_key = Key { kappa: None, ..key(0) };
            rows.push(fit_key.row("convergence", "decay_rate", rate));
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

fn iid_reset(spec: &EnvSpec) -> bool {
    match &spec.kind {
        EnvKind::GaussianDrift(_) => true,
        EnvKind::DiscreteChain(p) => matches!(p.init, DiscreteInit::IidUnits { .. }) && p.population.is_none(),
    }
}

/// Monte Carlo mean of `MMD(sample_N, reference)` per `N`, against one large
/// reference sample of size `reference_factor · max(N)`, with the log–log slope.
pub fn concentration_curve(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if !iid_reset(&cfg.env) {
        return Err(Error::Unsupported(
            "concentration needs i.i.d. agent resets (drift env, or a chain with iid_units init and no population)"
                .into(),
        ));
    }
    let grid = &cfg.grids.n_agents;
    let n_max = *grid.iter().max().expect("validated nonempty");
    let n_ref = cfg.concentration.reference_factor * n_max;
    let resamples = cfg.concentration.resamples;
    let mut rows = Vec::new();
    for seed in cfg.seed_list() {
        let ref_env = Env::new(with_agents(&cfg.env, n_ref))?;
        let reference = ref_env.reset(&mut stream_rng(seed, u64::MAX))?.sample;
        let base = match cfg.fqi.bandwidth {
            Some(b) => BaseKernelSpec::new(b)?,
            None => BaseKernelSpec::new(median_bandwidth([reference.as_ref()]))?,
        };
        let ref_cfg = Config::new(ActionId(0), reference);
        let ref_emb = Embedded::new(&ref_cfg, &base);
        let mut log_n = Vec::new();
        let mut log_mmd = Vec::new();
        for (gi, &n) in grid.iter().enumerate() {
            let t0 = Instant::now();
            let env = Env::new(with_agents(&cfg.env, n))?;
            let mmds = (0..resamples as u64)
                .into_par_iter()
                .map(|r| {
                    let sample = env.reset(&mut stream_rng(seed, ((gi as u64) << 32) | r))?.sample;
                    let c = Config::new(ActionId(0), sample);
                    Ok(Embedded::new(&c, &base).mmd_sq(&ref_emb, &base).sqrt())
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean, std) = mean_std(&mmds);
            let key = Key { seed: Some(seed), n_agents: Some(n), wall_clock_s: clock(cfg, t0), ..Key::default() };
            rows.push(key.row("concentration", "mmd_mean", mean));
            rows.push(key.row("concentration", "mmd_stderr", std / (resamples as f64).sqrt()));
            log_n.push((n as f64).ln());
            log_mmd.push(mean.ln());
        }
        let key = Key { seed: Some(seed), n_agents: Some(n_ref), ..Key::default() };
        rows.push(key.row("concentration", "bandwidth", base.bandwidth()));
        if grid.len() >= 2 {
            rows.push(key.row("concentration", "slope", ols_slope(&log_n, &log_mmd)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_results(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,seed,n_agents,batch_size,kappa,lambda,metric,value,wall_clock_s\n"
        );
    }

    #[test]
    fn empty_options_serialize_as_empty_fields() {
        let mut buf = Vec::new();
        let row = ResultRow { seed: Some(3), lambda: Some(1e-6), ..ResultRow::new("x", "m, quoted", 0.5) };
        write_results(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "x,3,,,,1e-6,\"m, quoted\",0.5,");
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]), -1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]), 1.0);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.5, 0.4, 0.45, 0.3, 0.2]);
        assert!((r - (-0.9)).abs() < 1e-12);
    }

    #[test]
    fn decay_rate_recovers_geometric_sequence() {
        let pts: Vec<(usize, f64)> = (1..=20).map(|k| (k, 3.0 * 0.8f64.powi(k as i32))).collect();
        assert!((geometric_decay_rate(&pts, 0.0).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(geometric_decay_rate(&[(1, 0.0), (2, 0.0)], 0.0), None);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
