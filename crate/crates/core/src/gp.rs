//! Additive Gaussian-process regression: exact posterior, component
//! posteriors, and type-II maximum likelihood for the kernel parameters.

use std::cell::RefCell;
use std::f64::consts::PI;

use multiversion::multiversion;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::decomposition::{Component, Decomposition};
use crate::error::{Error, Result};
use crate::kernel::{component_value, exp_nonpos, KernelParams, JITTER};

/// Observed pairs `(x_i, y_i)`. Inputs are expected in the normalized domain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::invalid(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let mut ds = Dataset::default();
        for (x, y) in inputs.into_iter().zip(outputs) {
            ds.push(x, y)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if let Some(first) = self.inputs.first() {
            if first.len() != x.len() {
                return Err(Error::invalid(format!("input of length {} in a {}-d dataset", x.len(), first.len())));
            }
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in dataset"));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Squared coordinate differences for every pair `a > b`, per dimension,
/// packed column by column. Reused across likelihood evaluations during a fit.
struct PairCache {
    t: usize,
    /// Per-dimension squared differences over pairs `a > b`, ordered column
    /// by column (`b` outer) to match the lower triangle's storage.
    sq: Vec<Vec<f64>>,
    /// Buffers reused across likelihood evaluations.
    scratch: RefCell<Scratch>,
}

#[derive(Default)]
struct Scratch {
    /// Packed sub-kernel values of every component.
    packed: Vec<Vec<f64>>,
    sum: Vec<f64>,
    w: Vec<f64>,
}

impl PairCache {
    fn new(xs: &[Vec<f64>], d: usize) -> Self {
        let t = xs.len();
        let npairs = t * t.saturating_sub(1) / 2;
        let mut sq = vec![Vec::with_capacity(npairs); d];
        for b in 0..t {
            for a in b + 1..t {
                for (j, col) in sq.iter_mut().enumerate() {
                    let z = xs[a][j] - xs[b][j];
                    col.push(z * z);
                }
            }
        }
        PairCache { t, sq, scratch: RefCell::new(Scratch::default()) }
    }

    /// Fills `scratch.packed` with every component's sub-kernel values and
    /// returns the Gram matrix with only its lower triangle filled.
    fn gram(&self, g: &Decomposition, theta: &[f64], scratch: &mut Scratch) -> DMatrix<f64> {
        let t = self.t;
        let npairs = t * t.saturating_sub(1) / 2;
        let Scratch { packed, sum, .. } = scratch;
        packed.resize_with(g.len(), Vec::new);
        sum.clear();
        sum.resize(npairs, 0.0);
        let inv = |j: usize| 0.5 / (theta[j - 1] * theta[j - 1]);
        for (c, kc) in g.components().iter().zip(packed.iter_mut()) {
            kc.clear();
            match c.dims() {
                [j] => {
                    kc.resize(npairs, 0.0);
                    fill_se1(kc, &self.sq[j - 1], inv(*j));
                }
                [i, j] => {
                    kc.resize(npairs, 0.0);
                    fill_se2(kc, &self.sq[i - 1], inv(*i), &self.sq[j - 1], inv(*j));
                }
                dims => kc.extend(
                    (0..npairs).map(|p| exp_nonpos(-dims.iter().map(|&j| self.sq[j - 1][p] * inv(j)).sum::<f64>())),
                ),
            }
            for (acc, v) in sum.iter_mut().zip(kc.iter()) {
                *acc += v;
            }
        }
        let mut k = DMatrix::zeros(t, t);
        let diag = g.len() as f64;
        let mut p = 0;
        for b in 0..t {
            let col = &mut k.as_mut_slice()[b * t..(b + 1) * t];
            col[b] = diag;
            let n = t - b - 1;
            col[b + 1..].copy_from_slice(&sum[p..p + n]);
            p += n;
        }
        k
    }
}

#[multiversion(targets("x86_64+avx2", "x86_64+avx512f"))]
fn fill_se1(out: &mut [f64], sq: &[f64], w: f64) {
    for (o, s) in out.iter_mut().zip(sq) {
        *o = exp_nonpos(-s * w);
    }
}

#[multiversion(targets("x86_64+avx2", "x86_64+avx512f"))]
fn fill_se2(out: &mut [f64], sq1: &[f64], w1: f64, sq2: &[f64], w2: f64) {
    for ((o, s1), s2) in out.iter_mut().zip(sq1).zip(sq2) {
        *o = exp_nonpos(-(s1 * w1 + s2 * w2));
    }
}

/// Cholesky of `K + σ²I`, retried once with extra jitter. Reads only the
/// lower triangle of `k`.
fn factorize(mut k: DMatrix<f64>, noise: f64) -> Result<Cholesky<f64, Dyn>> {
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    match Cholesky::new(k.clone()) {
        Some(c) => Ok(c),
        None => {
            for i in 0..k.nrows() {
                k[(i, i)] += JITTER;
            }
            Cholesky::new(k).ok_or_else(|| Error::Numerical("K + σ²I not positive definite after jitter".into()))
        }
    }
}

/// `Σ a_i b_i` with four independent partial sums.
#[inline]
fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Σ a_i b_i c_i` with four independent partial sums.
#[inline]
fn dot3_unrolled(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let n = a.len().min(b.len()).min(c.len());
    let (a, b, c) = (&a[..n], &b[..n], &c[..n]);
    let mut acc = [0.0; 4];
    let m = n - n % 4;
    for i in (0..m).step_by(4) {
        for j in 0..4 {
            acc[j] += a[i + j] * b[i + j] * c[i + j];
        }
    }
    let tail: f64 = (m..n).map(|i| a[i] * b[i] * c[i]).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Inverse of a lower-triangular matrix, built column by column.
#[multiversion(targets("x86_64+avx2", "x86_64+avx512f"))]
fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let t = l.nrows();
    let ls = l.as_slice();
    let mut m = DMatrix::zeros(t, t);
    let mut x = vec![0.0; t];
    for j in 0..t {
        let x = &mut x[..t - j];
        x.fill(0.0);
        x[0] = 1.0;
        for k in j..t {
            let xk = x[k - j] / ls[k * t + k];
            x[k - j] = xk;
            if xk != 0.0 {
                let lcol = &ls[k * t + k + 1..(k + 1) * t];
                for (xi, li) in x[k - j + 1..].iter_mut().zip(lcol) {
                    *xi -= xk * li;
                }
            }
        }
        m.as_mut_slice()[j * t + j..(j + 1) * t].copy_from_slice(x);
    }
    m
}

/// Lower triangle of `(L Lᵀ)⁻¹` from the Cholesky factor `L`.
#[multiversion(targets("x86_64+avx2", "x86_64+avx512f"))]
fn spd_inverse_lower(l: &DMatrix<f64>) -> DMatrix<f64> {
    let t = l.nrows();
    let m = lower_inverse(l);
    // (K⁻¹)_ab = Σ_{k ≥ a} M_ka M_kb for a ≥ b
    let ms = m.as_slice();
    let mut inv = DMatrix::zeros(t, t);
    for b in 0..t {
        for a in b..t {
            let ca = &ms[a * t + a..(a + 1) * t];
            let cb = &ms[b * t + a..(b + 1) * t];
            inv[(a, b)] = dot_unrolled(ca, cb);
        }
    }
    inv
}

#[multiversion(targets("x86_64+avx2", "x86_64+avx512f"))]
fn lengthscale_gradient(g: &Decomposition, packed: &[Vec<f64>], w: &[f64], sq: &[Vec<f64>], theta: &[f64], grad: &mut [f64]) {
    for (c, kc) in g.components().iter().zip(packed) {
        for &j in c.dims() {
            // off-diagonal pairs appear twice in the trace, cancelling the ½
            grad[j - 1] += dot3_unrolled(w, kc, &sq[j - 1]) / (theta[j - 1] * theta[j - 1]);
        }
    }
}

fn lml_cached(cache: &PairCache, y: &DVector<f64>, g: &Decomposition, params: &KernelParams) -> Result<(f64, Vec<f64>)> {
    let t = cache.t;
    let theta = &params.lengthscales;
    let mut scratch = cache.scratch.borrow_mut();
    let k = cache.gram(g, theta, &mut scratch);
    let chol = factorize(k, params.noise_variance)?;
    let alpha = chol.solve(y);
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let value = -0.5 * y.dot(&alpha) - 0.5 * logdet - 0.5 * t as f64 * (2.0 * PI).ln();

    // W = ααᵀ - (K + σ²I)⁻¹; dL/dp = ½ tr(W ∂K/∂p)
    let kinv = spd_inverse_lower(chol.l_dirty());
    let d = theta.len();
    let mut grad = vec![0.0; d + 1];
    let Scratch { packed, w: w_pairs, .. } = &mut *scratch;
    w_pairs.clear();
    for b in 0..t {
        let col = &kinv.as_slice()[b * t + b + 1..(b + 1) * t];
        for (a, kv) in (b + 1..t).zip(col) {
            w_pairs.push(alpha[a] * alpha[b] - kv);
        }
    }
    lengthscale_gradient(g, packed, w_pairs, &cache.sq, theta, &mut grad);
    let trace_w: f64 = (0..t).map(|a| alpha[a] * alpha[a] - kinv[(a, a)]).sum();
    grad[d] = 0.5 * params.noise_variance * trace_w;
    Ok((value, grad))
}

/// Log marginal likelihood `ln p(y | X, θ, σ_n²)` and its gradient with
/// respect to `[ln θ_1, .., ln θ_d, ln σ_n²]`.
pub fn log_marginal_likelihood(dataset: &Dataset, g: &Decomposition, params: &KernelParams) -> Result<(f64, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::invalid("log marginal likelihood of an empty dataset"));
    }
    check_dims(dataset, g, params)?;
    let cache = PairCache::new(dataset.inputs(), g.dim());
    let y = DVector::from_column_slice(dataset.outputs());
    lml_cached(&cache, &y, g, params)
}

fn check_dims(dataset: &Dataset, g: &Decomposition, params: &KernelParams) -> Result<()> {
    let d = g.dim();
    if params.dim() != d {
        return Err(Error::invalid(format!("{} lengthscales for {d} dimensions", params.dim())));
    }
    if let Some(x) = dataset.inputs().first() {
        if x.len() != d {
            return Err(Error::invalid(format!("inputs have {} coordinates, decomposition has {d}", x.len())));
        }
    }
    Ok(())
}

/// Hyperparameter search settings. Parameters live in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Total number of starts, including the warm start when present.
    pub restarts: usize,
    pub max_steps: usize,
    pub grad_tol: f64,
    pub log_lengthscale_bounds: (f64, f64),
    pub log_noise_bounds: (f64, f64),
    /// Range random starts draw log-lengthscales from.
    pub random_start_lengthscales: (f64, f64),
    /// Previous round's optimum; used as the first start.
    pub warm_start: Option<KernelParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_steps: 200,
            grad_tol: 1e-5,
            log_lengthscale_bounds: (1e-3f64.ln(), 1e3f64.ln()),
            log_noise_bounds: (1e-6f64.ln(), 0.0),
            random_start_lengthscales: (0.05f64.ln(), 2f64.ln()),
            warm_start: None,
        }
    }
}

impl FitOptions {
    /// Start used when no warm start is available.
    pub fn default_start(d: usize) -> KernelParams {
        KernelParams { lengthscales: vec![0.3; d], noise_variance: 1e-3 }
    }

    fn clamp(&self, p: &mut [f64]) {
        let d = p.len() - 1;
        for v in &mut p[..d] {
            *v = v.clamp(self.log_lengthscale_bounds.0, self.log_lengthscale_bounds.1);
        }
        p[d] = p[d].clamp(self.log_noise_bounds.0, self.log_noise_bounds.1);
    }

    fn bounds(&self, i: usize, d: usize) -> (f64, f64) {
        if i < d {
            self.log_lengthscale_bounds
        } else {
            self.log_noise_bounds
        }
    }
}

/// Gradient with components that point out of the box at active bounds removed.
fn projected(grad: &[f64], p: &[f64], opts: &FitOptions) -> Vec<f64> {
    let d = p.len() - 1;
    grad.iter()
        .enumerate()
        .map(|(i, &g)| {
            let (lo, hi) = opts.bounds(i, d);
            if (p[i] <= lo && g < 0.0) || (p[i] >= hi && g > 0.0) {
                0.0
            } else {
                g
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Box-constrained ascent from `start`: quasi-Newton (L-BFGS) directions,
/// projected onto the box, with an Armijo backtracking line search.
fn ascend(
    objective: &dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    start: Vec<f64>,
    opts: &FitOptions,
) -> Result<(Vec<f64>, f64)> {
    const MEMORY: usize = 8;
    let mut x = start;
    opts.clamp(&mut x);
    let (mut fx, mut gx) = objective(&x)?;
    let mut hist: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    for _ in 0..opts.max_steps {
        let pg = projected(&gx, &x, opts);
        let pg_norm = dot(&pg, &pg).sqrt();
        if pg_norm < opts.grad_tol {
            break;
        }
        // two-loop recursion on the ascent problem (minimising -f)
        let mut q: Vec<f64> = pg.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y) in hist.iter().rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push((a, rho));
        }
        let gamma = match hist.last() {
            Some((s, y)) => dot(s, y) / dot(y, y),
            None => 1.0 / pg.iter().fold(1.0f64, |m, v| m.max(v.abs())),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y), (a, rho)) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir = projected(&q, &x, opts);
        if dot(&dir, &pg) <= 0.0 {
            hist.clear();
            let scale = 1.0 / pg.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            dir = pg.iter().map(|v| v * scale).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            opts.clamp(&mut cand);
            let moved: Vec<f64> = cand.iter().zip(&x).map(|(c, xi)| c - xi).collect();
            let predicted = dot(&gx, &moved);
            if predicted <= 0.0 {
                step *= 0.5;
                continue;
            }
            if let Ok((fc, gc)) = objective(&cand) {
                if fc >= fx + 1e-4 * predicted {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        // curvature pair for minimising -f: y = -(g_new - g_old)
        let y: Vec<f64> = gnew.iter().zip(&gx).map(|(a, b)| b - a).collect();
        let improvement = fnew - fx;
        if dot(&s, &y) > 1e-12 {
            hist.push((s, y));
            if hist.len() > MEMORY {
                hist.remove(0);
            }
        }
        x = xn;
        fx = fnew;
        gx = gnew;
        if improvement <= 2.2e-9 * fx.abs().max(1.0) {
            break;
        }
    }
    Ok((x, fx))
}

/// Fits kernel parameters by maximising the log marginal likelihood from
/// several starts and returns the model at the best optimum found.
pub fn fit<R: Rng + ?Sized>(dataset: &Dataset, g: &Decomposition, options: &FitOptions, rng: &mut R) -> Result<GpModel> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot fit a GP to an empty dataset"));
    }
    let d = g.dim();
    let first = options.warm_start.clone().unwrap_or_else(|| FitOptions::default_start(d));
    check_dims(dataset, g, &first)?;

    let cache = PairCache::new(dataset.inputs(), d);
    let y = DVector::from_column_slice(dataset.outputs());
    let objective = |p: &[f64]| lml_cached(&cache, &y, g, &KernelParams::from_log_vec(p));

    let mut starts = vec![first.to_log_vec()];
    let (lo, hi) = options.random_start_lengthscales;
    for _ in 1..options.restarts.max(1) {
        let mut p: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
        p.push(rng.random_range(options.log_noise_bounds.0..=(-2.0f64).max(options.log_noise_bounds.0)));
        starts.push(p);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut last_err = None;
    for s in starts {
        match ascend(&objective, s, options) {
            Ok((p, v)) => {
                if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                    best = Some((p, v));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (p, _) = best.ok_or_else(|| Error::Fit(format!("all restarts failed: {}", last_err.map(|e| e.to_string()).unwrap_or_default())))?;
    GpModel::new(dataset.clone(), g.clone(), KernelParams::from_log_vec(&p))
}

/// A conditioned additive GP. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    dataset: Dataset,
    decomposition: Decomposition,
    params: KernelParams,
    /// Lower Cholesky factor of `K_t + σ_n² I` (plus jitter if it was needed).
    chol: Option<Cholesky<f64, Dyn>>,
    /// `(K_t + σ_n² I)⁻¹ y_t`
    weights: DVector<f64>,
    /// Inverse of the Cholesky factor, for batched variances.
    factor_inverse: Option<DMatrix<f64>>,
}

impl GpModel {
    /// Conditions the GP on `dataset` with fixed parameters.
    pub fn new(dataset: Dataset, decomposition: Decomposition, params: KernelParams) -> Result<Self> {
        check_dims(&dataset, &decomposition, &params)?;
        if dataset.is_empty() {
            return Ok(Self { dataset, decomposition, params, chol: None, weights: DVector::zeros(0), factor_inverse: None });
        }
        let cache = PairCache::new(dataset.inputs(), decomposition.dim());
        let k = cache.gram(&decomposition, &params.lengthscales, &mut Scratch::default());
        let chol = factorize(k, params.noise_variance)?;
        let weights = chol.solve(&DVector::from_column_slice(dataset.outputs()));
        let factor_inverse = Some(lower_inverse(chol.l_dirty()));
        Ok(Self { dataset, decomposition, params, chol: Some(chol), weights, factor_inverse })
    }

    /// GP prior: no observations.
    pub fn prior(decomposition: Decomposition, params: KernelParams) -> Result<Self> {
        Self::new(Dataset::default(), decomposition, params)
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `L Lᵀ`, the factorized matrix.
    pub fn factorized_matrix(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| {
            let l = c.l();
            &l * l.transpose()
        })
    }

    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        log_marginal_likelihood(&self.dataset, &self.decomposition, &self.params).map(|(v, _)| v)
    }

    fn quad_form(&self, k: DVector<f64>) -> f64 {
        match &self.chol {
            Some(c) => {
                let v = c.l_dirty().solve_lower_triangular(&k).expect("non-singular factor");
                v.norm_squared()
            }
            None => 0.0,
        }
    }

    /// Posterior mean and variance of `f(x)`.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let theta = &self.params.lengthscales;
        let k = DVector::from_iterator(
            self.dataset.len(),
            self.dataset.inputs().iter().map(|xi| {
                self.decomposition
                    .components()
                    .iter()
                    .map(|c| component_value(c, theta, x, xi))
                    .sum::<f64>()
            }),
        );
        let mean = if k.is_empty() { 0.0 } else { k.dot(&self.weights) };
        let prior = self.decomposition.len() as f64;
        let var = (prior - self.quad_form(k)).max(0.0);
        (mean, var)
    }

    fn component_kvec(&self, c: &Component, xc: &[f64]) -> DVector<f64> {
        let theta = &self.params.lengthscales;
        DVector::from_iterator(
            self.dataset.len(),
            self.dataset.inputs().iter().map(|xi| {
                let r2: f64 = c
                    .dims()
                    .iter()
                    .zip(xc)
                    .map(|(&j, v)| {
                        let z = (v - xi[j - 1]) / theta[j - 1];
                        z * z
                    })
                    .sum();
                (-0.5 * r2).exp()
            }),
        )
    }

    /// Posterior of one component's sub-function at the component coordinates `xc`.
    pub fn posterior_component(&self, c: &Component, xc: &[f64]) -> Result<(f64, f64)> {
        if !self.decomposition.contains(c) {
            return Err(Error::invalid(format!("component {{{c}}} is not in the decomposition")));
        }
        if xc.len() != c.len() {
            return Err(Error::invalid(format!("component {{{c}}} needs {} coordinates, got {}", c.len(), xc.len())));
        }
        let k = self.component_kvec(c, xc);
        let mean = if k.is_empty() { 0.0 } else { k.dot(&self.weights) };
        let var = (1.0 - self.quad_form(k)).max(0.0);
        Ok((mean, var))
    }

    /// Component posterior at many points at once; `points` holds component
    /// coordinates. Returns means and variances in the same order.
    pub fn posterior_component_batch(&self, c: &Component, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.decomposition.contains(c) {
            return Err(Error::invalid(format!("component {{{c}}} is not in the decomposition")));
        }
        let n = points.len();
        let t = self.dataset.len();
        if t == 0 {
            return Ok((vec![0.0; n], vec![1.0; n]));
        }
        let theta = &self.params.lengthscales;
        let mut kc = DMatrix::zeros(t, n);
        for (col, p) in points.iter().enumerate() {
            if p.len() != c.len() {
                return Err(Error::invalid("component coordinate length mismatch"));
            }
            for (row, xi) in self.dataset.inputs().iter().enumerate() {
                let r2: f64 = c
                    .dims()
                    .iter()
                    .zip(p)
                    .map(|(&j, v)| {
                        let z = (v - xi[j - 1]) / theta[j - 1];
                        z * z
                    })
                    .sum();
                kc[(row, col)] = (-0.5 * r2).exp();
            }
        }
        let means: Vec<f64> = (0..n).map(|col| kc.column(col).dot(&self.weights)).collect();
        let linv = self.factor_inverse.as_ref().expect("non-empty dataset has a factor");
        let v = linv * &kc;
        let vars = (0..n).map(|col| (1.0 - v.column(col).norm_squared()).max(0.0)).collect();
        Ok((means, vars))
    }
}
