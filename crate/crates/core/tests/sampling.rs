mod common;

use common::{empirical_quantile, linear_fixture, mean_var, rng, simpson, Flat, Gaussian, PriorOnly, QuadratureCdf};
use hinge_ewa::bench::{fit_method, FitSettings, LassoCache, Method};
use hinge_ewa::gibbs::log_target;
use hinge_ewa::prior::sample_prior;
use hinge_ewa::samplers::{lmc_run, mala_run, posterior_mean, SamplerConfig};
use hinge_ewa::seeds::{stream, streams};
use hinge_ewa::simulation::{gen_labels, gen_truth, ScenarioSpec, Setting};
use hinge_ewa::{GibbsConfig, GibbsTarget, LabeledDataset, LossKind, PriorConfig};

fn sampler(h: f64, n_iter: usize, burn_in: usize, seed: u64) -> SamplerConfig {
    SamplerConfig {
        step_size: h,
        n_iter,
        burn_in,
        seed,
        ..SamplerConfig::default()
    }
}

#[test]
fn prior_draws_follow_the_quadrature_cdf() {
    let cfg = PriorConfig::default();
    let cdf = QuadratureCdf::prior(cfg.tau, 200.0, 400_000);
    let mut r = rng(21);
    let mut xs: Vec<f64> = (0..200).flat_map(|_| sample_prior(&cfg, 100, &mut r).unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.at(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value
    assert!(ks < 1.63 / n.sqrt(), "KS statistic {ks}");
}

#[test]
fn prior_variance_is_tau_squared() {
    for tau in [0.5, 1.0, 2.0] {
        let num = simpson(|b| b * b * (tau * tau + b * b).powi(-2), -1e4, 1e4, 4_000_000);
        let den = simpson(|b| (tau * tau + b * b).powi(-2), -1e4, 1e4, 4_000_000);
        assert!((num / den - tau * tau).abs() < 1e-3 * tau * tau, "quadrature {}", num / den);

        let cfg = PriorConfig::new(tau, 1e6).unwrap();
        let mut r = rng(22);
        let xs: Vec<f64> = (0..5_000).flat_map(|_| sample_prior(&cfg, 100, &mut r).unwrap()).collect();
        let (_, v) = mean_var(&xs);
        assert!((v / (tau * tau) - 1.0).abs() < 0.15, "tau {tau}: sample variance {v}");
    }
}

/// Non-separable two-feature data with large entries, so the hinge
/// pseudo-posterior is concentrated well inside [-3, 3]^2.
fn two_d_fixture() -> (LabeledDataset, GibbsConfig) {
    let data = linear_fixture(20, &[1.0, -0.5], 3.0, &[3, 11], 5);
    let cfg = GibbsConfig {
        lambda: 20.0,
        loss: LossKind::Hinge,
        prior: PriorConfig::default(),
    };
    (data, cfg)
}

/// Posterior mean and the mass outside [-3, 3]^2 by midpoint quadrature on
/// [-8, 8]^2.
fn quadrature_posterior_mean(data: &LabeledDataset, cfg: &GibbsConfig) -> ([f64; 2], f64) {
    let (lim, step) = (8.0, 0.01);
    let m = (2.0 * lim / step) as usize;
    let mut logs = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let b = [-lim + (i as f64 + 0.5) * step, -lim + (j as f64 + 0.5) * step];
            logs.push((b, log_target(&b, data, cfg).unwrap()));
        }
    }
    let top = logs.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m0, mut m1, mut outside) = (0.0, 0.0, 0.0, 0.0);
    for (b, l) in &logs {
        let w = (l - top).exp();
        z += w;
        m0 += w * b[0];
        m1 += w * b[1];
        if b[0].abs() > 3.0 || b[1].abs() > 3.0 {
            outside += w;
        }
    }
    ([m0 / z, m1 / z], outside / z)
}

#[test]
fn mala_matches_quadrature_posterior_mean() {
    let (data, cfg) = two_d_fixture();
    let (exact, outside) = quadrature_posterior_mean(&data, &cfg);
    assert!(outside < 1e-3, "posterior mass outside the box: {outside}");
    let target = GibbsTarget::new(&data, cfg).unwrap();
    let chain = mala_run(&target, &[0.0, 0.0], &sampler(0.05, 200_000, 20_000, 31)).unwrap();
    let est = posterior_mean(&chain).unwrap();
    for k in 0..2 {
        assert!((est[k] - exact[k]).abs() < 0.05, "coordinate {k}: {} vs {}", est[k], exact[k]);
    }
    assert!(chain.acceptance_rate > 0.3 && chain.acceptance_rate < 0.7);
}

#[test]
fn prior_only_mala_quantiles_match_quadrature() {
    let cfg = PriorConfig::default();
    let cdf = QuadratureCdf::prior(cfg.tau, 200.0, 400_000);
    let target = PriorOnly { d: 1, cfg };
    let chain = mala_run(&target, &[0.0], &sampler(0.5, 400_000, 20_000, 32)).unwrap();
    let mut xs: Vec<f64> = chain.post_burn_in().iter().map(|b| b[0]).collect();
    xs.sort_by(f64::total_cmp);
    for p in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let (est, exact) = (empirical_quantile(&xs, p), cdf.quantile(p));
        assert!((est - exact).abs() < 0.05, "quantile {p}: {est} vs {exact}");
    }
}

#[test]
fn mala_chi_square_goodness_of_fit_on_gaussian() {
    // equiprobable N(0, 1) bins
    let edges = [-1.2816, -0.8416, -0.5244, -0.2533, 0.0, 0.2533, 0.5244, 0.8416, 1.2816];
    let chain = mala_run(&Gaussian(1), &[0.0], &sampler(1.0, 201_000, 1_000, 33)).unwrap();
    let mut counts = [0usize; 10];
    let thinned: Vec<f64> = chain.post_burn_in().iter().step_by(20).map(|b| b[0]).collect();
    for x in &thinned {
        counts[edges.iter().filter(|&&e| *x > e).count()] += 1;
    }
    let expected = thinned.len() as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // chi-square with 9 degrees of freedom, 0.999 quantile
    assert!(chi2 < 27.88, "chi2 {chi2}, counts {counts:?}");
}

#[test]
fn lmc_increments_have_variance_2h() {
    let h = 0.01;
    let chain = lmc_run(&Flat(3), &[0.0; 3], &sampler(h, 50_000, 1, 34)).unwrap();
    let incs: Vec<f64> = chain.samples.windows(2).flat_map(|w| (0..3).map(move |k| w[1][k] - w[0][k])).collect();
    let (m, v) = mean_var(&incs);
    assert!(m.abs() < 0.005, "mean increment {m}");
    assert!((v / (2.0 * h) - 1.0).abs() < 0.03, "increment variance {v}");
    assert!(chain.step_size_trace.iter().all(|&s| s == h));
}

#[test]
fn lmc_on_gaussian_has_unit_variance() {
    let chain = lmc_run(&Gaussian(2), &[0.0; 2], &sampler(0.05, 200_000, 2_000, 35)).unwrap();
    for k in 0..2 {
        let xs: Vec<f64> = chain.post_burn_in().iter().map(|b| b[k]).collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 0.1, "mean {m}");
        assert!((0.9..=1.1).contains(&v), "variance {v}");
    }
}

#[test]
fn chains_are_reproducible_from_the_seed() {
    let (data, cfg) = two_d_fixture();
    let target = GibbsTarget::new(&data, cfg).unwrap();
    let a = mala_run(&target, &[0.0, 0.0], &sampler(0.05, 3_000, 500, 7)).unwrap();
    let b = mala_run(&target, &[0.0, 0.0], &sampler(0.05, 3_000, 500, 7)).unwrap();
    let c = mala_run(&target, &[0.0, 0.0], &sampler(0.05, 3_000, 500, 8)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.samples, c.samples);
    let l1 = lmc_run(&target, &[0.0, 0.0], &sampler(1e-3, 3_000, 500, 7)).unwrap();
    let l2 = lmc_run(&target, &[0.0, 0.0], &sampler(1e-3, 3_000, 500, 7)).unwrap();
    assert_eq!(l1, l2);
}

#[test]
fn adapted_mala_on_the_small_scenario_accepts_about_half() {
    let spec = ScenarioSpec::new(Setting::I, 1, 50, 100, 10, 9).unwrap();
    let truth = gen_truth(&spec, &mut stream(9, &[streams::TRUTH])).unwrap();
    let train = gen_labels(&truth, &spec, &mut stream(9, &[streams::TRAIN_LABELS])).unwrap();
    let fit = fit_method(Method::HMala, &train, &FitSettings::default(), 9, &mut LassoCache::default()).unwrap();
    let acc = fit.chain.unwrap().acceptance_rate;
    assert!((0.35..=0.65).contains(&acc), "acceptance {acc}");
}

#[test]
fn step_size_is_frozen_after_burn_in() {
    let (data, cfg) = two_d_fixture();
    let target = GibbsTarget::new(&data, cfg).unwrap();
    let chain = mala_run(&target, &[0.0, 0.0], &sampler(1.0, 5_000, 2_000, 36)).unwrap();
    let after = &chain.step_size_trace[2_000..];
    assert!(after.iter().all(|&h| h == after[0]));
    assert!(chain.step_size_trace[0] != after[0]);
}
