//! Bayesian optimisation with additive Gaussian processes over randomly
//! sampled tree decompositions.

pub mod acquisition;
pub mod benchmarks;
pub mod cli;
pub mod decomposition;
pub mod engine;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod optimizer;
pub mod union_find;

pub use acquisition::{beta, AcquisitionFamily, AcquisitionSpec, BetaSchedule};
pub use benchmarks::{eval_benchmark, known_optimum, Benchmark, ExternalObjective, Objective, Sense};
pub use decomposition::{sample_random_tree, Component, Decomposition, ValidationError};
pub use engine::{aggregate, baseline, rducb, RegretTrace, RoundRecord, RunConfig, Strategy};
pub use error::{Error, Result};
pub use gp::{fit, log_marginal_likelihood, Dataset, FitOptions, GpModel};
pub use kernel::{additive_kernel, gram_matrix, information_gain, KernelParams};
pub use optimizer::{brute_force_max, maximize_additive, DomainSpec, MaximizeOptions, Maximum};
