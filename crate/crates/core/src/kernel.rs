//! Squared-exponential sub-kernels and their additive combination.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::decomposition::{Component, Decomposition};
use crate::error::{Error, Result};

/// Jitter added once to the diagonal when a factorization fails.
pub const JITTER: f64 = 1e-8;

/// `exp(x)` for `x ≤ 0`, branch-free so that loops over it vectorize.
/// Within a few ulp of `f64::exp`; inputs below −708 return `exp(−708)`.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 · 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    let x = x.max(-708.0);
    let shifted = x * std::f64::consts::LOG2_E + SHIFT;
    let k = shifted - SHIFT;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor series to degree 13 on |r| ≤ ln2/2
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let scale = f64::from_bits((shifted.to_bits().wrapping_add(1023)) << 52);
    p * scale
}

/// One lengthscale per input dimension, shared by every component that
/// touches that dimension, plus the observation noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("lengthscale must be positive, got {l}")));
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_variance}")));
        }
        Ok(Self { lengthscales, noise_variance })
    }

    pub fn uniform(d: usize, lengthscale: f64, noise_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; d], noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[ln θ_1, .., ln θ_d, ln σ_n²]`
    pub fn to_log_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log_vec(v: &[f64]) -> Self {
        let (ls, noise) = v.split_at(v.len() - 1);
        Self {
            lengthscales: ls.iter().map(|l| l.exp()).collect(),
            noise_variance: noise[0].exp(),
        }
    }
}

/// `exp(-½ Σ_i (x_i - x'_i)² / θ_i²)` over a component's coordinates.
pub fn se_component(xc: &[f64], yc: &[f64], theta: &[f64]) -> Result<f64> {
    if xc.len() != yc.len() || xc.len() != theta.len() || xc.is_empty() {
        return Err(Error::invalid(format!(
            "sub-kernel length mismatch: {} / {} / {}",
            xc.len(),
            yc.len(),
            theta.len()
        )));
    }
    Ok(se_unchecked(xc.iter().zip(yc).zip(theta).map(|((a, b), t)| (a - b) / t)))
}

#[inline]
fn se_unchecked(scaled_diffs: impl Iterator<Item = f64>) -> f64 {
    let r2: f64 = scaled_diffs.map(|z| z * z).sum();
    (-0.5 * r2).exp()
}

/// Sub-kernel of one component evaluated on full-length input vectors.
#[inline]
pub(crate) fn component_value(c: &Component, theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
    se_unchecked(c.dims().iter().map(|&i| (x[i - 1] - y[i - 1]) / theta[i - 1]))
}

/// `k^g(x, x') = Σ_c k_c(x_c, x'_c)`.
pub fn additive_kernel(g: &Decomposition, params: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = g.dim();
    if x.len() != d || y.len() != d || params.dim() != d {
        return Err(Error::invalid(format!(
            "expected inputs of length {d}, got {} and {} (θ has {})",
            x.len(),
            y.len(),
            params.dim()
        )));
    }
    let mut total = 0.0;
    for c in g.components() {
        let theta: Vec<f64> = c.dims().iter().map(|&i| params.lengthscales[i - 1]).collect();
        total += se_component(&c.project(x), &c.project(y), &theta)?;
    }
    Ok(total)
}

/// Gram matrix of one component's sub-kernel over the rows of `xs`.
pub fn component_gram(c: &Component, params: &KernelParams, xs: &[Vec<f64>]) -> DMatrix<f64> {
    let t = xs.len();
    let mut k = DMatrix::zeros(t, t);
    for a in 0..t {
        k[(a, a)] = 1.0;
        for b in 0..a {
            let v = component_value(c, &params.lengthscales, &xs[a], &xs[b]);
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    k
}

/// `K_t`: the additive kernel evaluated on all pairs of inputs.
pub fn gram_matrix(g: &Decomposition, params: &KernelParams, xs: &[Vec<f64>]) -> DMatrix<f64> {
    let t = xs.len();
    let m = g.len() as f64;
    let mut k = DMatrix::zeros(t, t);
    for a in 0..t {
        k[(a, a)] = m;
        for b in 0..a {
            let v: f64 = g
                .components()
                .iter()
                .map(|c| component_value(c, &params.lengthscales, &xs[a], &xs[b]))
                .sum();
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    k
}

/// `½ ln det(I + σ_n⁻² K)`, the mutual information between noisy
/// observations and the latent function at the points behind `K`.
pub fn information_gain(k: &DMatrix<f64>, sigma_n: f64) -> Result<f64> {
    if !(sigma_n.is_finite() && sigma_n > 0.0) {
        return Err(Error::invalid(format!("σ_n must be positive, got {sigma_n}")));
    }
    if !k.is_square() {
        return Err(Error::InvalidMatrix(format!("not square: {}×{}", k.nrows(), k.ncols())));
    }
    if k.is_empty() {
        return Ok(0.0);
    }
    let scale = k.amax().max(1.0);
    let asym = (k - k.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::InvalidMatrix(format!("not symmetric (max deviation {asym:e})")));
    }
    let eig = SymmetricEigen::new(k.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-8 * scale {
        return Err(Error::InvalidMatrix(format!("not positive semi-definite (eigenvalue {min:e})")));
    }
    let s2 = sigma_n * sigma_n;
    Ok(0.5 * eig.eigenvalues.iter().map(|&l| (l.max(0.0) / s2).ln_1p()).sum::<f64>())
}
