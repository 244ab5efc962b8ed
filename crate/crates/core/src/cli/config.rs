//! Experiment files.
//!
//! An experiment file is TOML: a few top-level keys plus one `[[run]]` table
//! per configuration. Every key except `name` and `benchmark` has a default,
//! and unknown keys are rejected.
//!
//! ```toml
//! format_version = 1
//! output_dir = "results"
//! seeds = "1..5"            # or [1, 2, 3]
//!
//! [[run]]
//! name = "stybtang-10"
//! benchmark = "stybtang"
//! d = 10
//! budget = 30
//! ```

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionFamily, BetaSchedule};
use crate::benchmarks::{Benchmark, ExternalObjective, Objective, Sense, DEFAULT_TIMEOUT};
use crate::engine::{EdgeRule, RunConfig, Strategy};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Inclusive `a..b`, a single seed, or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    let bad = || Error::Config(format!("invalid seed list `{s}` (expected `a..b`, `n` or `a,b,c`)"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds: Vec<u64> = s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedList {
    List(Vec<u64>),
    Range(String),
}

impl SeedList {
    pub fn resolve(&self) -> Result<Vec<u64>> {
        match self {
            SeedList::List(v) if v.is_empty() => Err(Error::Config("seed list is empty".into())),
            SeedList::List(v) => Ok(v.clone()),
            SeedList::Range(s) => parse_seeds(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Auto,
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgesValue {
    Count(usize),
    Keyword(Keyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaValue {
    Constant(f64),
    Keyword(Keyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    /// A synthetic benchmark name, or `external`.
    pub benchmark: String,
    pub d: Option<usize>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_edges")]
    pub edges: EdgesValue,
    #[serde(default = "default_acquisition")]
    pub acquisition: AcquisitionFamily,
    #[serde(default = "default_beta")]
    pub beta: BetaValue,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub refine: bool,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_mb: f64,
    pub init_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_learn_interval")]
    pub learn_interval: usize,
    #[serde(default = "default_learn_proposals")]
    pub learn_proposals: usize,
    /// External black boxes only.
    pub command: Option<Vec<String>>,
    pub bounds: Option<Vec<[f64; 2]>>,
    pub sense: Option<Sense>,
    pub optimum: Option<f64>,
    pub timeout_s: Option<f64>,
}

fn default_strategy() -> Strategy {
    Strategy::Rducb
}
fn default_budget() -> usize {
    RunConfig::default().budget
}
fn default_n_init() -> usize {
    RunConfig::default().n_init
}
fn default_edges() -> EdgesValue {
    EdgesValue::Keyword(Keyword::Auto)
}
fn default_acquisition() -> AcquisitionFamily {
    AcquisitionFamily::AddUcb
}
fn default_beta() -> BetaValue {
    BetaValue::Keyword(Keyword::Standard)
}
fn default_grid() -> usize {
    RunConfig::default().grid_size
}
fn default_memory_cap() -> f64 {
    RunConfig::default().memory_cap_mb
}
fn default_learn_interval() -> usize {
    RunConfig::default().learn_interval
}
fn default_learn_proposals() -> usize {
    RunConfig::default().learn_proposals
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub format_version: u32,
    pub output_dir: Option<PathBuf>,
    pub seeds: Option<SeedList>,
    pub jobs: Option<usize>,
    #[serde(rename = "run")]
    pub runs: Vec<RunSection>,
}

/// What to optimise in a run.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Synthetic { name: String, d: usize },
    External { name: String, command: Vec<String>, bounds: Vec<(f64, f64)>, sense: Sense, optimum: Option<f64>, timeout: Duration },
}

impl ObjectiveSpec {
    pub fn instantiate(&self) -> Result<Box<dyn Objective>> {
        match self {
            ObjectiveSpec::Synthetic { name, d } => Ok(Box::new(Benchmark::new(name, *d)?)),
            ObjectiveSpec::External { name, command, bounds, sense, optimum, timeout } => Ok(Box::new(ExternalObjective::new(
                name,
                command,
                bounds.clone(),
                *sense,
                *optimum,
                *timeout,
            )?)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ObjectiveSpec::Synthetic { d, .. } => *d,
            ObjectiveSpec::External { bounds, .. } => bounds.len(),
        }
    }
}

/// A run section with every default filled in and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub name: String,
    pub objective: ObjectiveSpec,
    pub config: RunConfig,
}

impl RunSection {
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let ctx = |msg: String| Error::Config(format!("run `{}`: {msg}", self.name));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(ctx("name must be a non-empty plain file name".into()));
        }
        let objective = if self.benchmark == "external" {
            let command = self.command.clone().filter(|c| !c.is_empty()).ok_or_else(|| ctx("external benchmark needs `command`".into()))?;
            let bounds: Vec<(f64, f64)> =
                self.bounds.as_ref().ok_or_else(|| ctx("external benchmark needs `bounds`".into()))?.iter().map(|b| (b[0], b[1])).collect();
            if let Some(d) = self.d {
                if d != bounds.len() {
                    return Err(ctx(format!("d = {d} but {} bounds given", bounds.len())));
                }
            }
            let timeout = match self.timeout_s {
                Some(s) if s > 0.0 && s.is_finite() => Duration::from_secs_f64(s),
                Some(s) => return Err(ctx(format!("timeout_s must be positive, got {s}"))),
                None => DEFAULT_TIMEOUT,
            };
            ObjectiveSpec::External {
                name: self.name.clone(),
                command,
                bounds,
                sense: self.sense.unwrap_or(Sense::Minimize),
                optimum: self.optimum,
                timeout,
            }
        } else {
            for (key, set) in [
                ("command", self.command.is_some()),
                ("bounds", self.bounds.is_some()),
                ("sense", self.sense.is_some()),
                ("optimum", self.optimum.is_some()),
                ("timeout_s", self.timeout_s.is_some()),
            ] {
                if set {
                    return Err(ctx(format!("`{key}` only applies to external benchmarks")));
                }
            }
            let d = self.d.ok_or_else(|| ctx("missing `d`".into()))?;
            Benchmark::new(&self.benchmark, d).map_err(|e| ctx(e.to_string()))?;
            ObjectiveSpec::Synthetic { name: self.benchmark.clone(), d }
        };
        let config = RunConfig {
            strategy: self.strategy,
            budget: self.budget,
            n_init: self.n_init,
            edges: match self.edges {
                EdgesValue::Count(e) => EdgeRule::Fixed(e),
                EdgesValue::Keyword(Keyword::Auto) => EdgeRule::Auto,
                EdgesValue::Keyword(k) => return Err(ctx(format!("edges must be `auto` or a count, got `{k:?}`"))),
            },
            acquisition: self.acquisition,
            beta: match self.beta {
                BetaValue::Constant(b) => BetaSchedule::Constant(b),
                BetaValue::Keyword(Keyword::Standard) => BetaSchedule::Standard,
                BetaValue::Keyword(k) => return Err(ctx(format!("beta must be `standard` or a number, got `{k:?}`"))),
            },
            grid_size: self.grid_size,
            refine: self.refine,
            memory_cap_mb: self.memory_cap_mb,
            seed: 0,
            init_box: self.init_box.as_ref().map(|b| b.iter().map(|v| (v[0], v[1])).collect()),
            timing: self.timing,
            learn_interval: self.learn_interval,
            learn_proposals: self.learn_proposals,
        };
        config.validate(objective.dim()).map_err(|e| ctx(e.to_string()))?;
        Ok(ResolvedRun { name: self.name.clone(), objective, config })
    }
}

impl ResolvedRun {
    /// The section that reproduces this run, with every default written out.
    pub fn to_section(&self) -> RunSection {
        let c = &self.config;
        let mut s = RunSection {
            name: self.name.clone(),
            benchmark: String::new(),
            d: Some(self.objective.dim()),
            strategy: c.strategy,
            budget: c.budget,
            n_init: c.n_init,
            edges: match c.edges {
                EdgeRule::Auto => EdgesValue::Keyword(Keyword::Auto),
                EdgeRule::Fixed(e) => EdgesValue::Count(e),
            },
            acquisition: c.acquisition,
            beta: match c.beta {
                BetaSchedule::Standard => BetaValue::Keyword(Keyword::Standard),
                BetaSchedule::Constant(b) => BetaValue::Constant(b),
            },
            grid_size: c.grid_size,
            refine: c.refine,
            memory_cap_mb: c.memory_cap_mb,
            init_box: c.init_box.as_ref().map(|b| b.iter().map(|&(lo, hi)| [lo, hi]).collect()),
            timing: c.timing,
            learn_interval: c.learn_interval,
            learn_proposals: c.learn_proposals,
            command: None,
            bounds: None,
            sense: None,
            optimum: None,
            timeout_s: None,
        };
        match &self.objective {
            ObjectiveSpec::Synthetic { name, .. } => s.benchmark = name.clone(),
            ObjectiveSpec::External { command, bounds, sense, optimum, timeout, .. } => {
                s.benchmark = "external".into();
                s.command = Some(command.clone());
                s.bounds = Some(bounds.iter().map(|&(lo, hi)| [lo, hi]).collect());
                s.sense = Some(*sense);
                s.optimum = *optimum;
                s.timeout_s = Some(timeout.as_secs_f64());
            }
        }
        s
    }
}

/// A parsed experiment: runs, seeds and output location.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub runs: Vec<ResolvedRun>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ExperimentFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.runs.is_empty() {
            return Err(Error::Config("no [[run]] sections".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for r in &file.runs {
            if !names.insert(r.name.as_str()) {
                return Err(Error::Config(format!("duplicate run name `{}`", r.name)));
            }
        }
        Ok(file)
    }

    /// Resolves defaults; explicit arguments override the file.
    pub fn resolve(&self, seeds: Option<Vec<u64>>, output_dir: Option<PathBuf>, jobs: Option<usize>) -> Result<Experiment> {
        let runs = self.runs.iter().map(RunSection::resolve).collect::<Result<Vec<_>>>()?;
        let seeds = match seeds {
            Some(s) => s,
            None => self.seeds.as_ref().map(SeedList::resolve).transpose()?.unwrap_or_else(|| vec![0]),
        };
        if seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        let jobs = jobs.or(self.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let output_dir = output_dir.or_else(|| self.output_dir.clone()).unwrap_or_else(|| PathBuf::from("rducb-output"));
        Ok(Experiment { runs, seeds, output_dir, jobs })
    }
}

impl Experiment {
    /// The fully resolved experiment as an experiment file.
    pub fn to_file(&self) -> ExperimentFile {
        ExperimentFile {
            format_version: FORMAT_VERSION,
            output_dir: Some(self.output_dir.clone()),
            seeds: Some(SeedList::List(self.seeds.clone())),
            jobs: Some(self.jobs),
            runs: self.runs.iter().map(ResolvedRun::to_section).collect(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.to_file()).map_err(|e| Error::Config(e.to_string()))
    }
}
