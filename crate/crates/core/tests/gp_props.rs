use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use rducb::kernel::component_gram;
use rducb::{additive_kernel, fit, gram_matrix, sample_random_tree, Dataset, Decomposition, FitOptions, GpModel, KernelParams};

fn random_points(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..d).map(|_| rng.random()).collect()).collect()
}

fn random_model(seed: u64, d: usize, t: usize) -> GpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = rng.random_range(0..d);
    let g = sample_random_tree(d, e, &mut rng).unwrap();
    let xs = random_points(&mut rng, t, d);
    let ys = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
    let params = KernelParams::new((0..d).map(|_| rng.random_range(0.1..1.5)).collect(), rng.random_range(1e-4..0.1)).unwrap();
    GpModel::new(Dataset::new(xs, ys).unwrap(), g, params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn component_means_sum_to_full_mean(seed in any::<u64>(), d in 1usize..6, t in 0usize..15) {
        let model = random_model(seed, d, t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..5 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let (mean, var) = model.posterior(&x);
            let mut sum = 0.0;
            let mut var_sum = 0.0;
            for c in model.decomposition().components() {
                let (m, v) = model.posterior_component(c, &c.project(&x)).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
                sum += m;
                var_sum += v;
            }
            prop_assert!((sum - mean).abs() <= 1e-8 * (1.0 + mean.abs()));
            // component variances ignore cross-covariances, which are ≤ 0 after conditioning only in sum
            prop_assert!(var_sum >= var - 1e-9);
        }
    }

    #[test]
    fn posterior_variance_below_prior(seed in any::<u64>(), d in 1usize..6, t in 1usize..15) {
        let model = random_model(seed, d, t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for _ in 0..5 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let prior = additive_kernel(model.decomposition(), model.params(), &x, &x).unwrap();
            let (_, var) = model.posterior(&x);
            prop_assert!(var >= 0.0);
            prop_assert!(var <= prior + 1e-9);
        }
    }

    #[test]
    fn lml_gradient_matches_central_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let g = sample_random_tree(d, rng.random_range(0..d), &mut rng).unwrap();
        let xs = random_points(&mut rng, 5, d);
        let ys = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = Dataset::new(xs, ys).unwrap();
        let mut logp: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5f64..0.5)).collect();
        logp.push(rng.random_range(-6.0f64..-1.0));
        let (_, grad) = rducb::log_marginal_likelihood(&data, &g, &KernelParams::from_log_vec(&logp)).unwrap();
        let h = 1e-5;
        for i in 0..=d {
            let mut up = logp.clone();
            let mut down = logp.clone();
            up[i] += h;
            down[i] -= h;
            let fu = rducb::log_marginal_likelihood(&data, &g, &KernelParams::from_log_vec(&up)).unwrap().0;
            let fd = rducb::log_marginal_likelihood(&data, &g, &KernelParams::from_log_vec(&down)).unwrap().0;
            let fdiff = (fu - fd) / (2.0 * h);
            let rel = (grad[i] - fdiff).abs() / grad[i].abs().max(fdiff.abs()).max(1e-3);
            prop_assert!(rel < 1e-4, "component {i}: analytic {} vs fd {fdiff}", grad[i]);
        }
    }
}

#[test]
fn refit_on_permuted_rows_gives_same_posterior() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let g = sample_random_tree(d, 1, &mut rng).unwrap();
        let xs = random_points(&mut rng, 12, d);
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x[0]).sin() + x[1] * x[2]).collect();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.reverse();
        order.swap(2, 7);
        let xp = order.iter().map(|&i| xs[i].clone()).collect();
        let yp = order.iter().map(|&i| ys[i]).collect();
        let a = fit(&Dataset::new(xs, ys).unwrap(), &g, &FitOptions::default(), &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = fit(&Dataset::new(xp, yp).unwrap(), &g, &FitOptions::default(), &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let (ma, va) = a.posterior(&x);
            let (mb, vb) = b.posterior(&x);
            assert!((ma - mb).abs() < 1e-8, "seed {seed}: {ma} vs {mb}");
            assert!((va - vb).abs() < 1e-8, "seed {seed}: {va} vs {vb}");
        }
    }
}

/// Draws outputs from a zero-mean additive GP with known lengthscales and
/// checks that fitting recovers them.
#[test]
fn fitted_lengthscales_recover_the_generating_ones() {
    let d = 4;
    let truth = [0.3, 0.5, 0.8, 0.4];
    let noise = 1e-4;
    let g = Decomposition::from_edges(d, &[(1, 2), (3, 4)]).unwrap();
    let params = KernelParams::new(truth.to_vec(), noise).unwrap();
    let mut recovered = 0;
    let mut report = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let xs = random_points(&mut rng, 60, d);
        let mut k = gram_matrix(&g, &params, &xs);
        for i in 0..60 {
            k[(i, i)] += noise;
        }
        let l = k.cholesky().expect("SPD").l();
        let mut z = DVector::zeros(60);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let y = &l * z;
        let data = Dataset::new(xs, y.iter().copied().collect()).unwrap();
        let model = fit(&data, &g, &FitOptions::default(), &mut rng).unwrap();
        let errs: Vec<f64> = model.params().lengthscales.iter().zip(&truth).map(|(a, b)| (a.ln() - b.ln()).abs()).collect();
        if errs.iter().all(|&e| e <= 0.5) {
            recovered += 1;
        }
        report.push(format!("seed {seed}: {:?}", model.params().lengthscales));
    }
    assert!(recovered >= 7, "recovered in {recovered}/10 seeds\n{}", report.join("\n"));
}

#[test]
fn gram_is_sum_of_component_grams() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 5;
    let g = sample_random_tree(d, 3, &mut rng).unwrap();
    let params = KernelParams::new(vec![0.2, 0.4, 0.6, 0.8, 1.0], 0.01).unwrap();
    let xs = random_points(&mut rng, 9, d);
    let full = gram_matrix(&g, &params, &xs);
    let mut sum = DMatrix::zeros(9, 9);
    for c in g.components() {
        sum += component_gram(c, &params, &xs);
    }
    assert!((full - sum).amax() < 1e-14);
}
