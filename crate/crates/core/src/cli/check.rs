//! Property checks exposed as `rducb check <name>`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acquisition::AcquisitionSpec;
use crate::decomposition::{edge_frequencies, sample_random_tree, Decomposition};
use crate::error::Result;
use crate::gp::{self, Dataset, FitOptions};
use crate::kernel::{gram_matrix, information_gain, KernelParams};
use crate::optimizer::{brute_force_max, maximize_additive, DomainSpec, MaximizeOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub lines: Vec<String>,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "  {l}")?;
        }
        write!(f, "{}: {}", self.name, if self.passed { "PASS" } else { "FAIL" })
    }
}

/// Every edge's sampling frequency against `2E/(d(d−1))` with a 4σ binomial band.
pub fn edge_uniformity(d: usize, e: usize, samples: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs = edge_frequencies(d, e, samples, &mut rng)?;
    let p = 2.0 * e as f64 / (d * (d - 1)) as f64;
    let band = 4.0 * (p * (1.0 - p) / samples as f64).sqrt();
    let mut lines = vec![format!("d = {d}, E = {e}, samples = {samples}, expected {p:.6}, band ±{band:.6}")];
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for (&(a, b), &f) in &freqs {
        let dev = (f - p).abs();
        worst = worst.max(dev);
        let ok = dev <= band;
        passed &= ok;
        lines.push(format!("edge ({a},{b}): {f:.6}{}", if ok { "" } else { "  outside band" }));
    }
    lines.push(format!("max |freq - expected| = {worst:.6}"));
    Ok(CheckReport { name: "edge-uniformity".into(), passed, lines })
}

/// Information gain under a random tree kernel against the full-pairwise
/// kernel on the same points and lengthscales.
pub fn infogain(d: usize, points: usize, trials: usize, seed: u64) -> Result<CheckReport> {
    const SIGMA_N: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = Decomposition::full_pairwise(d);
    let (mut held, mut strict, mut omitted) = (0, 0, 0);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..trials {
        let e = if d > 1 { rng.random_range(1..d) } else { 0 };
        let tree = sample_random_tree(d, e, &mut rng)?;
        let xs: Vec<Vec<f64>> = (0..points).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let params = KernelParams::new((0..d).map(|_| rng.random_range(0.1..1.0)).collect(), SIGMA_N * SIGMA_N)?;
        let ig_tree = information_gain(&gram_matrix(&tree, &params, &xs), SIGMA_N)?;
        let ig_full = information_gain(&gram_matrix(&full, &params, &xs), SIGMA_N)?;
        worst_excess = worst_excess.max(ig_tree - ig_full);
        if ig_tree <= ig_full + 1e-9 {
            held += 1;
        }
        if tree.num_edges() < d * (d - 1) / 2 {
            omitted += 1;
            if ig_tree < ig_full {
                strict += 1;
            }
        }
    }
    let strict_ok = omitted == 0 || strict as f64 >= 0.95 * omitted as f64;
    let passed = held == trials && strict_ok;
    let lines = vec![
        format!("d = {d}, points = {points}, trials = {trials}, σ_n = {SIGMA_N}"),
        format!("gain(tree) ≤ gain(full) + 1e-9 in {held}/{trials}"),
        format!("strict where the tree omits a pair: {strict}/{omitted} (need ≥ 95%)"),
        format!("max gain(tree) - gain(full) = {worst_excess:.3e}"),
    ];
    Ok(CheckReport { name: "infogain".into(), passed, lines })
}

/// Message-passing maxima against exhaustive enumeration on random small
/// instances with fitted models.
pub fn mp_exactness(trials: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut value_ok, mut arg_ok) = (0, 0);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let d = rng.random_range(1..=4);
        let grid = rng.random_range(2..=15);
        let e = rng.random_range(0..d);
        let tree = sample_random_tree(d, e, &mut rng)?;
        let t_data = rng.random_range(0..=12);
        let xs: Vec<Vec<f64>> = (0..t_data).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let ys: Vec<f64> = (0..t_data).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = if t_data == 0 {
            gp::GpModel::prior(tree, KernelParams::uniform(d, 0.3, 1e-3)?)?
        } else {
            let data = Dataset::new(xs.clone(), ys)?;
            gp::fit(&data, &tree, &FitOptions::default(), &mut rng)?
        };
        let round = rng.random_range(1..=50);
        let spec = if t_data > 0 && rng.random_bool(0.3) {
            AcquisitionSpec::ei(xs[rng.random_range(0..t_data)].clone())
        } else {
            AcquisitionSpec::ucb()
        };
        let domain = DomainSpec::unit(d, grid)?;
        let mp = maximize_additive(&model, &spec, round, &domain, &MaximizeOptions::default())?;
        let bf = brute_force_max(&model, &spec, round, &domain)?;
        let diff = (mp.value - bf.value).abs();
        worst = worst.max(diff);
        let v_ok = diff <= 1e-10;
        let a_ok = mp.indices == bf.indices;
        value_ok += v_ok as usize;
        arg_ok += a_ok as usize;
        if !(v_ok && a_ok) && failures.len() < 5 {
            failures.push(format!(
                "trial {trial}: d = {d}, G = {grid}, g = {}: mp {:?} = {} vs brute force {:?} = {}",
                model.decomposition(),
                mp.indices,
                mp.value,
                bf.indices,
                bf.value
            ));
        }
    }
    let mut lines = vec![
        format!("values within 1e-10: {value_ok}/{trials}"),
        format!("argmax identical: {arg_ok}/{trials}"),
        format!("max |mp - brute force| = {worst:.3e}"),
    ];
    lines.extend(failures);
    Ok(CheckReport { name: "mp-exactness".into(), passed: value_ok == trials && arg_ok == trials, lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_checks_pass() {
        assert!(edge_uniformity(5, 2, 20_000, 1).unwrap().passed);
        assert!(infogain(3, 6, 10, 2).unwrap().passed);
        assert!(mp_exactness(10, 3).unwrap().passed);
    }

    #[test]
    fn report_format() {
        let r = CheckReport { name: "x".into(), passed: false, lines: vec!["a".into()] };
        assert_eq!(r.to_string(), "  a\nx: FAIL");
    }
}
