//! The optimisation loop and its baselines.
//!
//! Every run starts from `n_init` uniform random inputs. Model-based
//! strategies then, each round, pick a tree decomposition, refit the
//! additive GP on the normalized inputs and standardized outputs, and query
//! the grid maximiser of the additive acquisition.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{AcquisitionFamily, AcquisitionSpec, BetaSchedule};
use crate::benchmarks::{Objective, Sense};
use crate::decomposition::{sample_random_tree, Component, Decomposition};
use crate::error::{Error, Result};
use crate::gp::{self, Dataset, FitOptions};
use crate::kernel::KernelParams;
use crate::optimizer::{maximize_additive, DomainSpec, MaximizeOptions};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Rducb,
    RandomSearch,
    FixedTree,
    MlTree,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Rducb => "rducb",
            Strategy::RandomSearch => "random-search",
            Strategy::FixedTree => "fixed-tree",
            Strategy::MlTree => "ml-tree",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rducb" => Ok(Strategy::Rducb),
            "random-search" => Ok(Strategy::RandomSearch),
            "fixed-tree" => Ok(Strategy::FixedTree),
            "ml-tree" => Ok(Strategy::MlTree),
            _ => Err(Error::invalid(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Number of tree edges: `max(⌊d/5⌋, 1)`, capped at `d − 1`.
pub fn edges_for_dim(d: usize) -> usize {
    (d / 5).max(1).min(d.saturating_sub(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRule {
    Auto,
    Fixed(usize),
}

impl EdgeRule {
    pub fn resolve(&self, d: usize) -> usize {
        match *self {
            EdgeRule::Auto => edges_for_dim(d),
            EdgeRule::Fixed(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub budget: usize,
    pub n_init: usize,
    pub edges: EdgeRule,
    pub acquisition: AcquisitionFamily,
    pub beta: BetaSchedule,
    pub grid_size: usize,
    pub refine: bool,
    pub memory_cap_mb: f64,
    pub seed: u64,
    /// Restricts the initial design to a sub-box (raw coordinates).
    pub init_box: Option<Vec<(f64, f64)>>,
    /// Record wall-clock per round; off keeps traces byte-reproducible.
    pub timing: bool,
    /// ml-tree: rounds between structure updates.
    pub learn_interval: usize,
    /// ml-tree: edge-toggle proposals per update.
    pub learn_proposals: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Rducb,
            budget: 100,
            n_init: 10,
            edges: EdgeRule::Auto,
            acquisition: AcquisitionFamily::AddUcb,
            beta: BetaSchedule::Standard,
            grid_size: 100,
            refine: false,
            memory_cap_mb: 1024.0,
            seed: 0,
            init_box: None,
            timing: false,
            learn_interval: 15,
            learn_proposals: 100,
        }
    }
}

impl RunConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_init < 1 {
            return Err(Error::invalid("n_init must be at least 1"));
        }
        if self.budget < self.n_init {
            return Err(Error::invalid(format!("budget {} is below n_init {}", self.budget, self.n_init)));
        }
        let e = self.edges.resolve(d);
        if d == 0 || e > d - 1 {
            return Err(Error::invalid(format!("E = {e} outside [0, {}]", d.saturating_sub(1))));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("grid_size must be at least 2"));
        }
        if let BetaSchedule::Constant(b) = self.beta {
            if !(b >= 0.0) {
                return Err(Error::invalid("β must be non-negative"));
            }
        }
        if let Some(b) = &self.init_box {
            if b.len() != d || b.iter().any(|(lo, hi)| !(lo <= hi)) {
                return Err(Error::invalid("init_box must give lo ≤ hi for every dimension"));
            }
        }
        if self.learn_interval == 0 {
            return Err(Error::invalid("learn_interval must be positive"));
        }
        Ok(())
    }
}

/// Independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InitDesign = 1,
    Tree = 2,
    Fit = 3,
    StructureSearch = 4,
    RandomSearch = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based sub-seed for `(master, stream, index)`.
pub fn stream_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ stream as u64) ^ index)
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Bo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub phase: Phase,
    /// Compact form (`1,2;3`), absent for rounds without a model.
    pub decomposition: Option<String>,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_y: f64,
    pub inst_regret: Option<f64>,
    pub best_regret: Option<f64>,
    pub wall_ms: f64,
    /// Exploration weight used this round (add-ucb rounds only).
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub seed: u64,
    pub d: usize,
    pub records: Vec<RoundRecord>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_best_regret(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.best_regret)
    }

    pub fn final_best_y(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_y)
    }
}

#[derive(Debug, Error)]
#[error("run failed at round {round}: {source}")]
pub struct RunFailure {
    pub round: usize,
    #[source]
    pub source: Error,
    /// Rounds completed before the failure.
    pub partial: RegretTrace,
}

/// Running state of one optimisation run.
struct Run<'a> {
    obj: &'a mut dyn Objective,
    cfg: &'a RunConfig,
    bounds: Vec<(f64, f64)>,
    trace: RegretTrace,
    raw: Vec<(Vec<f64>, f64)>,
    best: Option<f64>,
}

impl<'a> Run<'a> {
    fn new(obj: &'a mut dyn Objective, cfg: &'a RunConfig) -> Self {
        let bounds = obj.bounds().to_vec();
        let d = bounds.len();
        Self { obj, cfg, bounds, trace: RegretTrace { seed: cfg.seed, d, records: Vec::new() }, raw: Vec::new(), best: None }
    }

    fn fail(&self, source: Error) -> RunFailure {
        RunFailure { round: self.trace.len() + 1, source, partial: self.trace.clone() }
    }

    fn sense(&self) -> Sense {
        self.obj.sense()
    }

    fn better(&self, a: f64, b: f64) -> bool {
        match self.sense() {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }

    fn regret(&self, y: f64) -> Option<f64> {
        self.obj.known_optimum().map(|opt| match self.sense() {
            Sense::Minimize => y - opt,
            Sense::Maximize => opt - y,
        })
    }

    fn evaluate(&mut self, x: Vec<f64>, phase: Phase, decomposition: Option<String>, beta: Option<f64>, started: Instant) -> Result<()> {
        let y = self.obj.evaluate(&x)?;
        if !y.is_finite() {
            return Err(Error::BlackBox { message: format!("objective returned {y}"), output: String::new() });
        }
        let best_y = match self.best {
            Some(b) if !self.better(y, b) => b,
            _ => y,
        };
        self.best = Some(best_y);
        let wall_ms = if self.cfg.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        self.trace.records.push(RoundRecord {
            round: self.trace.records.len() + 1,
            phase,
            decomposition,
            x: x.clone(),
            y,
            best_y,
            inst_regret: self.regret(y),
            best_regret: self.regret(best_y),
            wall_ms,
            beta,
        });
        self.raw.push((x, y));
        Ok(())
    }

    fn uniform_point<R: Rng>(&self, rng: &mut R, region: &[(f64, f64)]) -> Vec<f64> {
        region
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }

    fn initial_design(&mut self) -> Result<(), RunFailure> {
        let mut rng = stream_rng(self.cfg.seed, Stream::InitDesign, 0);
        let region = self.cfg.init_box.clone().unwrap_or_else(|| self.bounds.clone());
        for _ in 0..self.cfg.n_init {
            let started = Instant::now();
            let x = self.uniform_point(&mut rng, &region);
            self.evaluate(x, Phase::Init, None, None, started).map_err(|e| self.fail(e))?;
        }
        Ok(())
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect()
    }

    fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(v, &(lo, hi))| (lo + v * (hi - lo)).clamp(lo, hi))
            .collect()
    }

    /// Normalized inputs and standardized outputs, signed so larger is better.
    fn model_data(&self) -> Result<Dataset> {
        let sign = match self.sense() {
            Sense::Minimize => -1.0,
            Sense::Maximize => 1.0,
        };
        let z: Vec<f64> = self.raw.iter().map(|(_, y)| sign * y).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        Dataset::new(
            self.raw.iter().map(|(x, _)| self.normalize(x)).collect(),
            z.iter().map(|v| (v - mean) / sd).collect(),
        )
    }
}

fn grid_domain(cfg: &RunConfig, d: usize) -> Result<DomainSpec> {
    DomainSpec::unit(d, cfg.grid_size)
}

/// Moves a grid suggestion that coincides with an observed input to the
/// nearest unvisited grid cell: one coordinate shifted by the smallest
/// offset, trying dimensions in order and the lower neighbour first.
pub fn avoid_duplicate(indices: &[usize], grid: usize, visited: &dyn Fn(&[usize]) -> bool) -> Vec<usize> {
    if !visited(indices) {
        return indices.to_vec();
    }
    for r in 1..grid {
        for k in 0..indices.len() {
            for up in [false, true] {
                let Some(v) = (if up { indices[k].checked_add(r) } else { indices[k].checked_sub(r) }) else { continue };
                if v >= grid {
                    continue;
                }
                let mut cand = indices.to_vec();
                cand[k] = v;
                if !visited(&cand) {
                    return cand;
                }
            }
        }
    }
    indices.to_vec()
}

/// Edge-toggle search for a higher-likelihood tree, starting from `start`.
fn learn_tree<R: Rng>(data: &Dataset, start: &Decomposition, params: &KernelParams, proposals: usize, rng: &mut R) -> Result<Decomposition> {
    let d = start.dim();
    let mut current = start.clone();
    let mut current_lml = gp::log_marginal_likelihood(data, &current, params)?.0;
    if d < 2 {
        return Ok(current);
    }
    for _ in 0..proposals {
        let a = rng.random_range(1..=d);
        let mut b = rng.random_range(1..d);
        if b >= a {
            b += 1;
        }
        let edge = (a.min(b), a.max(b));
        let mut edges: Vec<(usize, usize)> = current.edges().collect();
        if let Some(pos) = edges.iter().position(|&e| e == edge) {
            edges.remove(pos);
        } else {
            let mut uf = UnionFind::new(d);
            for &(p, q) in &edges {
                uf.union(p - 1, q - 1);
            }
            if uf.connected(edge.0 - 1, edge.1 - 1) {
                continue;
            }
            edges.push(edge);
        }
        let cand = Decomposition::from_edges(d, &edges)?;
        if let Ok((lml, _)) = gp::log_marginal_likelihood(data, &cand, params) {
            if lml > current_lml {
                current = cand;
                current_lml = lml;
            }
        }
    }
    Ok(current)
}

/// Runs the configured strategy against `objective`.
pub fn run(config: &RunConfig, objective: &mut dyn Objective) -> Result<RegretTrace, RunFailure> {
    let d = objective.dim();
    let empty = || RegretTrace { seed: config.seed, d, records: Vec::new() };
    if let Err(e) = config.validate(d) {
        return Err(RunFailure { round: 0, source: e, partial: empty() });
    }
    let mut run = Run::new(objective, config);
    run.initial_design()?;
    match config.strategy {
        Strategy::RandomSearch => random_rounds(&mut run)?,
        _ => model_rounds(&mut run)?,
    }
    Ok(run.trace)
}

fn random_rounds(run: &mut Run<'_>) -> Result<(), RunFailure> {
    let mut rng = stream_rng(run.cfg.seed, Stream::RandomSearch, 0);
    let bounds = run.bounds.clone();
    for _ in run.cfg.n_init..run.cfg.budget {
        let started = Instant::now();
        let x = run.uniform_point(&mut rng, &bounds);
        run.evaluate(x, Phase::Bo, None, None, started).map_err(|e| run.fail(e))?;
    }
    Ok(())
}

fn model_rounds(run: &mut Run<'_>) -> Result<(), RunFailure> {
    let cfg = run.cfg;
    let d = run.bounds.len();
    let e = cfg.edges.resolve(d);
    let domain = grid_domain(cfg, d).map_err(|err| run.fail(err))?;
    let max_opts = MaximizeOptions { refine: cfg.refine, memory_cap_mb: cfg.memory_cap_mb };
    let mut warm: Option<KernelParams> = None;
    let mut tree: Option<Decomposition> = None;

    for t in cfg.n_init + 1..=cfg.budget {
        let started = Instant::now();
        let mut step = || -> Result<(Vec<f64>, Decomposition, Option<f64>)> {
            let data = run.model_data()?;
            let g = match cfg.strategy {
                Strategy::Rducb => sample_random_tree(d, e, &mut stream_rng(cfg.seed, Stream::Tree, t as u64))?,
                Strategy::FixedTree => match &tree {
                    Some(g) => g.clone(),
                    None => sample_random_tree(d, e, &mut stream_rng(cfg.seed, Stream::Tree, t as u64))?,
                },
                Strategy::MlTree => {
                    let since = t - cfg.n_init - 1;
                    let current = tree.clone().unwrap_or_else(|| Decomposition::separable(d));
                    if since.is_multiple_of(cfg.learn_interval) {
                        let params = match &warm {
                            Some(p) => p.clone(),
                            None => {
                                let opts = FitOptions { warm_start: None, ..FitOptions::default() };
                                gp::fit(&data, &current, &opts, &mut stream_rng(cfg.seed, Stream::Fit, t as u64))?
                                    .params()
                                    .clone()
                            }
                        };
                        let mut rng = stream_rng(cfg.seed, Stream::StructureSearch, t as u64);
                        learn_tree(&data, &current, &params, cfg.learn_proposals, &mut rng)?
                    } else {
                        current
                    }
                }
                Strategy::RandomSearch => unreachable!("handled separately"),
            };
            let opts = FitOptions { warm_start: warm.clone(), ..FitOptions::default() };
            let model = gp::fit(&data, &g, &opts, &mut stream_rng(cfg.seed, Stream::Fit, t as u64))?;

            let incumbent = data
                .outputs()
                .iter()
                .enumerate()
                .fold(0, |bi, (i, v)| if *v > data.outputs()[bi] { i } else { bi });
            let spec = AcquisitionSpec {
                family: cfg.acquisition,
                beta: cfg.beta,
                incumbent: Some(data.inputs()[incumbent].clone()),
            };
            let beta = match cfg.acquisition {
                AcquisitionFamily::AddUcb => Some(cfg.beta.at(t)?),
                AcquisitionFamily::AddEi => None,
            };
            let best = maximize_additive(&model, &spec, t, &domain, &max_opts)?;
            let grids = domain.grids();
            let visited = |idx: &[usize]| {
                let u: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| grids[k][i]).collect();
                data.inputs().contains(&u)
            };
            let u = if visited(&best.indices) {
                let idx = avoid_duplicate(&best.indices, cfg.grid_size, &visited);
                idx.iter().enumerate().map(|(k, &i)| grids[k][i]).collect()
            } else {
                best.x.clone()
            };
            warm = Some(model.params().clone());
            Ok((u, g, beta))
        };
        let (u, g, beta) = step().map_err(|err| run.fail(err))?;
        let x = run.denormalize(&u);
        let label = g.to_string();
        tree = Some(g);
        run.evaluate(x, Phase::Bo, Some(label), beta, started).map_err(|err| run.fail(err))?;
    }
    Ok(())
}

/// The main loop with a fresh random tree every round.
pub fn rducb(config: &RunConfig, objective: &mut dyn Objective) -> Result<RegretTrace, RunFailure> {
    let cfg = RunConfig { strategy: Strategy::Rducb, ..config.clone() };
    run(&cfg, objective)
}

/// Runs one of the baseline strategies.
pub fn baseline(config: &RunConfig, strategy: Strategy, objective: &mut dyn Objective) -> Result<RegretTrace, RunFailure> {
    let cfg = RunConfig { strategy, ..config.clone() };
    run(&cfg, objective)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub round: usize,
    pub mean_best_regret: f64,
    pub stderr_best_regret: f64,
    pub n_seeds: usize,
}

/// Per-round mean and standard error (sample std / √n) of the best regret.
/// Traces without a known optimum are summarised by their best value instead.
pub fn aggregate(traces: &[RegretTrace]) -> Result<Vec<SummaryRow>> {
    let first = traces.first().ok_or_else(|| Error::invalid("no traces to aggregate"))?;
    let len = first.len();
    if traces.iter().any(|t| t.len() != len) {
        return Err(Error::invalid("traces have different lengths"));
    }
    let use_regret = traces.iter().all(|t| t.records.iter().all(|r| r.best_regret.is_some()));
    let n = traces.len();
    Ok((0..len)
        .map(|i| {
            let vals: Vec<f64> = traces
                .iter()
                .map(|t| {
                    let r = &t.records[i];
                    if use_regret {
                        r.best_regret.expect("checked")
                    } else {
                        r.best_y
                    }
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                var.sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { round: first.records[i].round, mean_best_regret: mean, stderr_best_regret: stderr, n_seeds: n }
        })
        .collect())
}

/// Whether `c` lies in the decomposition serialized in a trace record.
pub fn record_has_component(record: &RoundRecord, d: usize, c: &Component) -> bool {
    record
        .decomposition
        .as_deref()
        .and_then(|s| Decomposition::parse(d, s).ok())
        .is_some_and(|g| g.contains(c))
}
