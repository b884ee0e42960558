use hmvae_core::analysis::marginal_importance_estimate;
use hmvae_core::distributions::{gaussian_log_pdf, logistic_log_pdf, LogisticDiag};
use hmvae_core::math::{log_sum_exp, logit};
use hmvae_core::model::{
    draw_noise, elbo_estimate, elbo_with_noise, generate_one, recognize_one, Architecture, ModelParams,
};
use hmvae_core::rng::{self, Stream};
use hmvae_core::Matrix;

/// Glorot weights with every bias and the prior jittered, so no term is trivially zero.
fn random_model(arch: &Architecture, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(arch, seed);
    let mut r = rng::stream(seed, Stream::Evaluation, 42);
    let mut jitter = |v: &mut [f64], scale: f64| {
        for x in v {
            *x += scale * rng::standard_normal(&mut r);
        }
    };
    jitter(&mut p.recognition.hidden.bias, 0.3);
    jitter(&mut p.recognition.output.bias, 0.3);
    jitter(&mut p.generation.hidden.bias, 0.3);
    jitter(&mut p.generation.output.bias, 0.3);
    jitter(&mut p.prior.center, 0.5);
    jitter(&mut p.prior.log_scale, 0.3);
    p
}

/// `log ∫ p(x | h) p(h) dh` for one latent unit, integrating over the prior
/// quantile `u` with `h = c + s·logit(u)` on a midpoint grid.
fn quadrature_log_evidence(p: &ModelParams, x: &[f64], points: usize) -> f64 {
    let c = p.prior.center[0];
    let s = p.prior.scale(0);
    let terms: Vec<f64> = (0..points)
        .map(|i| {
            let u = (i as f64 + 0.5) / points as f64;
            gaussian_log_pdf(x, &generate_one(p, &[c + s * logit(u)]).unwrap()).unwrap()
        })
        .collect();
    log_sum_exp(&terms) - (points as f64).ln()
}

#[test]
fn bound_lies_below_quadrature_evidence() {
    let arch = Architecture::new(1, 1, 4, 4);
    let samples = 100_000;
    let chunks = 100;
    for seed in 0..10 {
        let p = random_model(&arch, seed);
        let x = Matrix::from_vec(1, 1, vec![0.7 - 0.3 * seed as f64]).unwrap();
        let exact = quadrature_log_evidence(&p, x.row(0), 200_000);
        let noise = draw_noise(1, 1, samples, seed);
        let per = samples / chunks;
        let means: Vec<f64> = (0..chunks)
            .map(|c| {
                let idx: Vec<usize> = (c * per..(c + 1) * per).collect();
                elbo_with_noise(&x, &p, &noise.select_rows(&idx)).unwrap().elbo
            })
            .collect();
        let mean = means.iter().sum::<f64>() / chunks as f64;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (chunks - 1) as f64;
        let se = (var / chunks as f64).sqrt();
        assert!(mean <= exact + 3.0 * se, "seed {seed}: elbo {mean} > log p(x) {exact} (se {se})");
        let full = elbo_estimate(&x, &p, samples, seed).unwrap().elbo;
        assert!((full - mean).abs() <= 1e-12 * mean.abs().max(1.0) * samples as f64);
    }
}

#[test]
fn estimator_variance_shrinks_as_one_over_m() {
    let arch = Architecture::new(3, 2, 5, 5);
    let mut p = random_model(&arch, 9);
    // a narrow posterior keeps log-weights light-tailed, so sample variances are stable
    p.recognition.output.bias[2..].fill(-1.5);
    let x = Matrix::from_vec(1, 3, vec![0.4, -1.0, 0.2]).unwrap();
    let variance = |m: usize| {
        let v: Vec<f64> = (0..2000).map(|s| elbo_estimate(&x, &p, m, s).unwrap().elbo).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (v.len() - 1) as f64
    };
    let ratio = variance(1) / variance(10);
    assert!((7.0..14.0).contains(&ratio), "variance ratio {ratio}");
}

fn literal_logistic(h: &[f64], p: &LogisticDiag) -> f64 {
    h.iter()
        .enumerate()
        .map(|(k, &hk)| {
            let s = p.log_scale[k].exp();
            let z = (hk - p.center[k]) / s;
            -z - s.ln() - 2.0 * (1.0 + (-z).exp()).ln()
        })
        .sum()
}

#[test]
fn single_sample_bound_is_the_expanded_log_density_sum() {
    let arch = Architecture::new(5, 3, 6, 7);
    let mut worst: f64 = 0.0;
    for t in 0..100u64 {
        let p = random_model(&arch, 1000 + t);
        let mut r = rng::stream(t, Stream::Evaluation, 7);
        let x: Vec<f64> = (0..5).map(|_| rng::standard_normal(&mut r)).collect();
        let eps: Vec<f64> = (0..3).map(|_| 0.02 + 0.96 * rng::open_uniform(&mut r)).collect();
        let q = recognize_one(&p, &x).unwrap();
        let h: Vec<f64> = (0..3).map(|k| q.center[k] + logit(eps[k]) * q.scale(k)).collect();
        let g = generate_one(&p, &h).unwrap();

        let log_lik: f64 = (0..5)
            .map(|d| {
                let sigma = g.log_sigma[d].exp();
                -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - (x[d] - g.mean[d]).powi(2) / (2.0 * sigma * sigma)
            })
            .sum();
        let expanded = log_lik + literal_logistic(&h, &p.prior) - literal_logistic(&h, &q);

        let composed = gaussian_log_pdf(&x, &g).unwrap() + logistic_log_pdf(&h, &p.prior).unwrap().iter().sum::<f64>()
            - logistic_log_pdf(&h, &q).unwrap().iter().sum::<f64>();
        let from_model = elbo_with_noise(
            &Matrix::from_vec(1, 5, x.clone()).unwrap(),
            &p,
            &Matrix::from_vec(1, 3, eps).unwrap(),
        )
        .unwrap()
        .elbo;
        worst = worst.max((expanded - composed).abs()).max((expanded - from_model).abs());
    }
    assert!(worst < 1e-10, "max abs difference {worst}");
}

/// `log p(x | h_0 = v)` for a two-unit model, integrating `h_1` over its prior quantile.
fn quadrature_marginal(p: &ModelParams, v: f64, x: &[f64], points: usize) -> f64 {
    let c = p.prior.center[1];
    let s = p.prior.scale(1);
    let terms: Vec<f64> = (0..points)
        .map(|i| {
            let u = (i as f64 + 0.5) / points as f64;
            gaussian_log_pdf(x, &generate_one(p, &[v, c + s * logit(u)]).unwrap()).unwrap()
        })
        .collect();
    log_sum_exp(&terms) - (points as f64).ln()
}

#[test]
fn importance_marginal_agrees_with_quadrature() {
    let arch = Architecture::new(3, 2, 4, 6);
    for seed in 0..5 {
        let p = random_model(&arch, 50 + seed);
        let x = [0.3, -0.2, 0.9];
        let v = 0.5 - 0.4 * seed as f64;
        let exact = quadrature_marginal(&p, v, &x, 100_000);
        let est = marginal_importance_estimate(&p, 0, v, &x, 20_000, seed).unwrap();
        let err = (est.log_value - exact).abs();
        assert!(err < 4.0 * est.relative_std_error + 1e-9, "seed {seed}: |Δ| = {err}, rse {}", est.relative_std_error);
    }
}

#[test]
fn importance_error_shrinks_as_one_over_root_m() {
    let arch = Architecture::new(3, 2, 4, 6);
    let p = random_model(&arch, 77);
    let x = [0.1, 0.4, -0.6];
    let small = marginal_importance_estimate(&p, 0, 0.2, &x, 5_000, 1).unwrap().relative_std_error;
    let large = marginal_importance_estimate(&p, 0, 0.2, &x, 80_000, 1).unwrap().relative_std_error;
    let ratio = small / large;
    assert!((3.0..5.3).contains(&ratio), "ratio {ratio}, expected about 4");
}
