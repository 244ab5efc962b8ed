//! Additive acquisition functions: a sum of per-component terms, each
//! depending only on the component's own coordinates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::decomposition::Component;
use crate::error::{Error, Result};
use crate::gp::GpModel;

/// `β_t = ½ ln(2t)`.
pub fn beta(t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("round index must be at least 1"));
    }
    Ok(0.5 * (2.0 * t as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionFamily {
    #[serde(rename = "add-ucb")]
    AddUcb,
    #[serde(rename = "add-ei")]
    AddEi,
}

impl std::str::FromStr for AcquisitionFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add-ucb" => Ok(Self::AddUcb),
            "add-ei" => Ok(Self::AddEi),
            _ => Err(Error::invalid(format!("unknown acquisition `{s}` (expected add-ucb or add-ei)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaSchedule {
    /// `½ ln(2t)`
    Standard,
    Constant(f64),
}

impl BetaSchedule {
    pub fn at(&self, t: usize) -> Result<f64> {
        match *self {
            BetaSchedule::Standard => beta(t),
            BetaSchedule::Constant(b) if b >= 0.0 => Ok(b),
            BetaSchedule::Constant(b) => Err(Error::invalid(format!("β must be non-negative, got {b}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    pub family: AcquisitionFamily,
    pub beta: BetaSchedule,
    /// Best observed input so far; required by add-ei.
    pub incumbent: Option<Vec<f64>>,
}

impl AcquisitionSpec {
    pub fn ucb() -> Self {
        Self { family: AcquisitionFamily::AddUcb, beta: BetaSchedule::Standard, incumbent: None }
    }

    pub fn ucb_with_beta(b: f64) -> Self {
        Self { family: AcquisitionFamily::AddUcb, beta: BetaSchedule::Constant(b), incumbent: None }
    }

    pub fn ei(incumbent: Vec<f64>) -> Self {
        Self { family: AcquisitionFamily::AddEi, beta: BetaSchedule::Standard, incumbent: Some(incumbent) }
    }
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected-improvement term for a component with posterior `(mean, sd)`
/// against the incumbent's component mean.
pub fn ei_term(mean: f64, sd: f64, incumbent_mean: f64) -> f64 {
    let diff = mean - incumbent_mean;
    if sd <= 0.0 {
        return diff.max(0.0);
    }
    let z = diff / sd;
    diff * norm_cdf(z) + sd * norm_pdf(z)
}

/// Evaluates component terms from precomputed posterior moments. Shared by
/// the pointwise and the table-building paths.
#[derive(Debug, Clone, Copy)]
pub(crate) enum TermRule {
    Ucb { beta: f64 },
    Ei { incumbent_mean: f64 },
}

impl TermRule {
    pub(crate) fn for_component(model: &GpModel, c: &Component, spec: &AcquisitionSpec, t: usize) -> Result<Self> {
        match spec.family {
            AcquisitionFamily::AddUcb => Ok(TermRule::Ucb { beta: spec.beta.at(t)? }),
            AcquisitionFamily::AddEi => {
                let inc = spec
                    .incumbent
                    .as_ref()
                    .ok_or_else(|| Error::invalid("add-ei requires an incumbent"))?;
                if inc.len() != model.decomposition().dim() {
                    return Err(Error::invalid("incumbent has the wrong dimension"));
                }
                let (m, _) = model.posterior_component(c, &c.project(inc))?;
                Ok(TermRule::Ei { incumbent_mean: m })
            }
        }
    }

    #[inline]
    pub(crate) fn apply(&self, mean: f64, var: f64) -> f64 {
        match *self {
            TermRule::Ucb { beta } => mean + beta * var.sqrt(),
            TermRule::Ei { incumbent_mean } => ei_term(mean, var.sqrt(), incumbent_mean),
        }
    }
}

/// Acquisition term of component `c` at component coordinates `xc`.
pub fn component_term(model: &GpModel, c: &Component, xc: &[f64], spec: &AcquisitionSpec, t: usize) -> Result<f64> {
    let rule = TermRule::for_component(model, c, spec, t)?;
    let (m, v) = model.posterior_component(c, xc)?;
    Ok(rule.apply(m, v))
}

/// Sum of [`component_term`] over every component of the model's decomposition.
pub fn total_acquisition(model: &GpModel, x: &[f64], spec: &AcquisitionSpec, t: usize) -> Result<f64> {
    if x.len() != model.decomposition().dim() {
        return Err(Error::invalid(format!("expected {} coordinates, got {}", model.decomposition().dim(), x.len())));
    }
    let mut total = 0.0;
    for c in model.decomposition().components() {
        total += component_term(model, c, &c.project(x), spec, t)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::Decomposition;
    use crate::gp::Dataset;
    use crate::kernel::KernelParams;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64, d: usize, t: usize, edges: &[(usize, usize)]) -> GpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = (0..t).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let ys = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = Decomposition::from_edges(d, edges).unwrap();
        let p = KernelParams::new((0..d).map(|_| rng.random_range(0.1..0.8)).collect(), 1e-3).unwrap();
        GpModel::new(Dataset::new(xs, ys).unwrap(), g, p).unwrap()
    }

    #[test]
    fn beta_values() {
        assert_relative_eq!(beta(1).unwrap(), 0.34657, epsilon = 1e-5);
        assert_relative_eq!(beta(8).unwrap(), 1.38629, epsilon = 1e-5);
        assert_relative_eq!(beta(8).unwrap(), 0.5 * 16f64.ln(), max_relative = 1e-15);
        for t in 1..500 {
            assert!(beta(t + 1).unwrap() > beta(t).unwrap());
        }
        assert!(beta(0).is_err());
    }

    #[test]
    fn ucb_prior_term_is_beta() {
        let model = GpModel::prior(Decomposition::separable(2), KernelParams::uniform(2, 0.5, 1e-3).unwrap()).unwrap();
        let v = component_term(&model, &Component::single(1), &[0.3], &AcquisitionSpec::ucb(), 4).unwrap();
        assert_relative_eq!(v, beta(4).unwrap(), max_relative = 1e-15);
        let total = total_acquisition(&model, &[0.3, 0.9], &AcquisitionSpec::ucb(), 4).unwrap();
        assert_relative_eq!(total, 2.0 * beta(4).unwrap(), max_relative = 1e-15);
    }

    #[test]
    fn ei_closed_forms() {
        assert_relative_eq!(ei_term(0.4, 1.0, 0.4), 0.39894, epsilon = 1e-5);
        assert_eq!(ei_term(-0.2, 0.0, 0.1), 0.0);
        assert_relative_eq!(ei_term(0.5, 0.0, 0.1), 0.4, max_relative = 1e-15);
        assert!(ei_term(0.1, 1e-9, 0.5) < 1e-12);
    }

    #[test]
    fn zero_beta_gives_posterior_mean() {
        let model = random_model(1, 4, 12, &[(1, 2), (3, 4)]);
        let x = [0.2, 0.4, 0.6, 0.8];
        let a = total_acquisition(&model, &x, &AcquisitionSpec::ucb_with_beta(0.0), 5).unwrap();
        assert_relative_eq!(a, model.posterior(&x).0, epsilon = 1e-8);
    }

    #[test]
    fn total_equals_component_sum() {
        let model = random_model(9, 3, 9, &[(2, 3)]);
        let x = [0.1, 0.7, 0.35];
        let spec = AcquisitionSpec::ucb();
        let sum: f64 = model
            .decomposition()
            .components()
            .iter()
            .map(|c| component_term(&model, c, &c.project(&x), &spec, 12).unwrap())
            .sum();
        assert_eq!(total_acquisition(&model, &x, &spec, 12).unwrap(), sum);
    }

    #[test]
    fn ei_needs_incumbent() {
        let model = random_model(2, 2, 5, &[]);
        let spec = AcquisitionSpec { family: AcquisitionFamily::AddEi, beta: BetaSchedule::Standard, incumbent: None };
        assert!(total_acquisition(&model, &[0.5, 0.5], &spec, 3).is_err());
        let spec = AcquisitionSpec::ei(vec![0.1, 0.2]);
        assert!(total_acquisition(&model, &[0.5, 0.5], &spec, 3).unwrap() >= 0.0);
    }

    #[test]
    fn negative_constant_beta_rejected() {
        assert!(BetaSchedule::Constant(-1.0).at(3).is_err());
        assert_eq!(BetaSchedule::Constant(2.0).at(3).unwrap(), 2.0);
    }
}
