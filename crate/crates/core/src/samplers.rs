//! Langevin samplers: the unadjusted recursion (LMC) and its
//! Metropolis-adjusted version (MALA).
//!
//! Both move along `+h * grad log p`, i.e. they ascend the log-density.
//! The MALA proposal density is
//! `q(x' | x) ∝ exp(-|x' - x - h grad log p(x)|^2 / (4h))`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::LogDensityTarget;
use crate::model::CoefVector;

/// MALA adapts its step every this many burn-in iterations.
pub const ADAPT_INTERVAL: usize = 100;
const ADAPT_BAND: f64 = 0.05;
const ADAPT_UP: f64 = 1.1;
const ADAPT_DOWN: f64 = 0.9;
/// Retries of a single LMC step (each halving `h`) before staying put.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub step_size: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    /// Step-size adaptation during burn-in (MALA only).
    pub adapt: bool,
    pub target_acceptance: f64,
    pub thin: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-3,
            n_iter: 30_000,
            burn_in: 5_000,
            adapt: true,
            target_acceptance: 0.5,
            thin: 1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "need burn_in < n_iter, got {} and {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            )));
        }
        Ok(())
    }
}

/// Default LMC step when no tuned MALA step is available.
pub fn default_lmc_step(d: usize) -> f64 {
    1e-5 / d.max(1) as f64
}

/// LMC runs with a smaller step than the adapted MALA step.
pub fn lmc_step_from_mala(mala_step: f64) -> f64 {
    0.1 * mala_step
}

/// Output of one sampler run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Stored iterates, one every `thin` iterations.
    pub samples: Vec<Vec<f64>>,
    /// Number of leading entries of `samples` that belong to burn-in.
    pub burn_in: usize,
    /// Post-burn-in acceptance rate; 1.0 for LMC.
    pub acceptance_rate: f64,
    /// Step size used at each iteration.
    pub step_size_trace: Vec<f64>,
    pub seed: u64,
}

impl Chain {
    pub fn post_burn_in(&self) -> &[Vec<f64>] {
        &self.samples[self.burn_in.min(self.samples.len())..]
    }

    pub fn final_step_size(&self) -> f64 {
        self.step_size_trace.last().copied().unwrap_or(f64::NAN)
    }
}

fn check_init<T: LogDensityTarget + ?Sized>(
    target: &T,
    init: &[f64],
    cfg: &SamplerConfig,
) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    if init.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            actual: init.len(),
        });
    }
    let mut grad = vec![0.0; init.len()];
    let lp = target.log_density_and_gradient(init, &mut grad)?;
    if !lp.is_finite() {
        return Err(Error::NonFinite("log-density at the initial point".into()));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient at the initial point".into()));
    }
    Ok((lp, grad))
}

fn stored_burn_in(cfg: &SamplerConfig) -> usize {
    cfg.burn_in / cfg.thin
}

fn fill_normal<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for e in out.iter_mut() {
        *e = rng.sample(StandardNormal);
    }
}

/// Unadjusted Langevin: `x <- x + h grad log p(x) + sqrt(2h) E`.
///
/// A step that lands outside the support (or on a non-finite density) is
/// discarded and retried with half the step; the reduced step applies to
/// that iteration only.
pub fn lmc_run<T: LogDensityTarget + ?Sized>(
    target: &T,
    init: &[f64],
    cfg: &SamplerConfig,
) -> Result<Chain> {
    let (_, mut grad) = check_init(target, init, cfg)?;
    let d = init.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = init.to_vec();
    let mut prop = vec![0.0; d];
    let mut prop_grad = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut samples = Vec::with_capacity(cfg.n_iter / cfg.thin);
    let mut trace = Vec::with_capacity(cfg.n_iter);

    for t in 1..=cfg.n_iter {
        let mut h = cfg.step_size;
        for attempt in 0..=MAX_HALVINGS {
            fill_normal(&mut rng, &mut noise);
            let s = (2.0 * h).sqrt();
            for i in 0..d {
                prop[i] = x[i] + h * grad[i] + s * noise[i];
            }
            let lp = target.log_density_and_gradient(&prop, &mut prop_grad)?;
            if lp.is_finite() && prop_grad.iter().all(|g| g.is_finite()) {
                std::mem::swap(&mut x, &mut prop);
                std::mem::swap(&mut grad, &mut prop_grad);
                break;
            }
            if attempt < MAX_HALVINGS {
                h *= 0.5;
            }
        }
        trace.push(h);
        if t % cfg.thin == 0 {
            samples.push(x.clone());
        }
    }

    Ok(Chain {
        samples,
        burn_in: stored_burn_in(cfg),
        acceptance_rate: 1.0,
        step_size_trace: trace,
        seed: cfg.seed,
    })
}

/// `log q(to | from)` up to a constant.
pub fn log_transition_density(to: &[f64], from: &[f64], grad_from: &[f64], h: f64) -> f64 {
    let sq: f64 = to
        .iter()
        .zip(from)
        .zip(grad_from)
        .map(|((t, f), g)| {
            let r = t - f - h * g;
            r * r
        })
        .sum();
    -sq / (4.0 * h)
}

/// Log of the Metropolis-Hastings acceptance probability, at most 0.
pub fn mala_log_acceptance(
    log_density_current: f64,
    log_density_proposal: f64,
    log_q_forward: f64,
    log_q_reverse: f64,
) -> f64 {
    if log_density_proposal == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let numerator = log_density_proposal + log_q_reverse;
    let denominator = log_density_current + log_q_forward;
    if numerator >= denominator {
        0.0
    } else {
        numerator - denominator
    }
}

pub fn acceptance_probability(
    log_density_current: f64,
    log_density_proposal: f64,
    log_q_forward: f64,
    log_q_reverse: f64,
) -> f64 {
    mala_log_acceptance(
        log_density_current,
        log_density_proposal,
        log_q_forward,
        log_q_reverse,
    )
    .exp()
}

/// Metropolis-adjusted Langevin.
///
/// With `cfg.adapt`, every [`ADAPT_INTERVAL`] burn-in iterations the step is
/// scaled by 1.1 when the acceptance rate over the last interval exceeds the
/// target by more than 0.05, and by 0.9 when it falls short by more than
/// 0.05. The step is frozen after burn-in.
pub fn mala_run<T: LogDensityTarget + ?Sized>(
    target: &T,
    init: &[f64],
    cfg: &SamplerConfig,
) -> Result<Chain> {
    let (mut lp, mut grad) = check_init(target, init, cfg)?;
    let d = init.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = init.to_vec();
    let mut prop = vec![0.0; d];
    let mut prop_grad = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut samples = Vec::with_capacity(cfg.n_iter / cfg.thin);
    let mut trace = Vec::with_capacity(cfg.n_iter);
    let mut h = cfg.step_size;
    let mut window_accepted = 0usize;
    let mut post_accepted = 0usize;

    for t in 1..=cfg.n_iter {
        fill_normal(&mut rng, &mut noise);
        let s = (2.0 * h).sqrt();
        for i in 0..d {
            prop[i] = x[i] + h * grad[i] + s * noise[i];
        }
        let prop_lp = target.log_density_and_gradient(&prop, &mut prop_grad)?;
        let accepted = if prop_lp.is_finite() && prop_grad.iter().all(|g| g.is_finite()) {
            // forward residual is exactly sqrt(2h) * noise
            let log_q_forward = -0.5 * noise.iter().map(|e| e * e).sum::<f64>();
            let log_q_reverse = log_transition_density(&x, &prop, &prop_grad, h);
            let log_alpha = mala_log_acceptance(lp, prop_lp, log_q_forward, log_q_reverse);
            log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha
        } else {
            false
        };
        if accepted {
            std::mem::swap(&mut x, &mut prop);
            std::mem::swap(&mut grad, &mut prop_grad);
            lp = prop_lp;
            window_accepted += 1;
            if t > cfg.burn_in {
                post_accepted += 1;
            }
        }
        trace.push(h);

        if t % ADAPT_INTERVAL == 0 {
            if cfg.adapt && t <= cfg.burn_in {
                let rate = window_accepted as f64 / ADAPT_INTERVAL as f64;
                if rate > cfg.target_acceptance + ADAPT_BAND {
                    h *= ADAPT_UP;
                } else if rate < cfg.target_acceptance - ADAPT_BAND {
                    h *= ADAPT_DOWN;
                }
            }
            window_accepted = 0;
        }
        if t % cfg.thin == 0 {
            samples.push(x.clone());
        }
    }

    Ok(Chain {
        samples,
        burn_in: stored_burn_in(cfg),
        acceptance_rate: post_accepted as f64 / (cfg.n_iter - cfg.burn_in) as f64,
        step_size_trace: trace,
        seed: cfg.seed,
    })
}

/// Runs adaptive MALA for `iters` burn-in iterations and returns the tuned step.
pub fn tune_mala_step<T: LogDensityTarget + ?Sized>(
    target: &T,
    init: &[f64],
    initial_step: f64,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let cfg = SamplerConfig {
        step_size: initial_step,
        n_iter: iters + 1,
        burn_in: iters,
        adapt: true,
        thin: iters + 1,
        seed,
        ..SamplerConfig::default()
    };
    Ok(mala_run(target, init, &cfg)?.final_step_size())
}

/// Coordinate-wise mean of the post-burn-in samples.
pub fn posterior_mean(chain: &Chain) -> Result<CoefVector> {
    let post = chain.post_burn_in();
    let first = post.first().ok_or_else(|| {
        Error::InvalidConfig("chain has no post-burn-in samples".into())
    })?;
    let mut mean = vec![0.0; first.len()];
    for s in post {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    let k = post.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    CoefVector::new(mean)
}

/// A uniformly drawn post-burn-in sample.
pub fn sample_classifier<R: Rng + ?Sized>(chain: &Chain, rng: &mut R) -> Result<CoefVector> {
    let post = chain.post_burn_in();
    if post.is_empty() {
        return Err(Error::InvalidConfig(
            "chain has no post-burn-in samples".into(),
        ));
    }
    CoefVector::new(post[rng.random_range(0..post.len())].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) struct Gaussian;

    impl LogDensityTarget for Gaussian {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, b: &[f64]) -> f64 {
            -0.5 * b[0] * b[0]
        }
        fn gradient(&self, b: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![-b[0]])
        }
    }

    /// Density 1 on [-1, 1].
    struct Box1;

    impl LogDensityTarget for Box1 {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, b: &[f64]) -> f64 {
            if b[0].abs() <= 1.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        fn gradient(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
    }

    fn chain(samples: Vec<Vec<f64>>, burn_in: usize) -> Chain {
        Chain {
            samples,
            burn_in,
            acceptance_rate: 1.0,
            step_size_trace: vec![],
            seed: 0,
        }
    }

    #[test]
    fn posterior_mean_cases() {
        let c = chain(vec![vec![1.0, 0.0], vec![3.0, 0.0]], 0);
        assert_eq!(posterior_mean(&c).unwrap().as_slice(), &[2.0, 0.0]);
        let c = chain(vec![vec![1.0], vec![3.0], vec![7.0]], 2);
        assert_eq!(posterior_mean(&c).unwrap().as_slice(), &[7.0]);
        let c = chain(vec![vec![1.0]], 1);
        assert!(posterior_mean(&c).is_err());
    }

    #[test]
    fn sample_classifier_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = chain(vec![vec![5.0], vec![1.0]], 1);
        assert_eq!(sample_classifier(&c, &mut rng).unwrap().as_slice(), &[1.0]);
        let c = chain(vec![vec![1.0], vec![2.0], vec![3.0]], 1);
        for _ in 0..100 {
            let b = sample_classifier(&c, &mut rng).unwrap();
            assert!(c.post_burn_in().iter().any(|s| s.as_slice() == b.as_slice()));
        }
    }

    #[test]
    fn sample_classifier_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = chain(vec![vec![0.0], vec![1.0]], 0);
        let ones = (0..10_000)
            .filter(|_| sample_classifier(&c, &mut rng).unwrap()[0] == 1.0)
            .count();
        assert!((ones as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn acceptance_probability_bounds() {
        assert_eq!(acceptance_probability(0.0, 0.0, 0.0, 0.0), 1.0);
        assert_eq!(acceptance_probability(-3.0, -1.0, -2.0, -2.5), 1.0);
        let p = acceptance_probability(0.0, -1.0, 0.0, 0.0);
        assert!((p - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(acceptance_probability(0.0, f64::NEG_INFINITY, 0.0, 0.0), 0.0);
    }

    #[test]
    fn degenerate_proposal_is_accepted_surely() {
        // zero noise and zero gradient: proposal equals the current point
        let x = [0.4, -1.0];
        let g = [0.0, 0.0];
        let h = 0.01;
        let fwd = log_transition_density(&x, &x, &g, h);
        let rev = log_transition_density(&x, &x, &g, h);
        assert_eq!(fwd, 0.0);
        assert_eq!(acceptance_probability(-2.0, -2.0, fwd, rev), 1.0);
    }

    #[test]
    fn invalid_configs() {
        let bad = SamplerConfig {
            step_size: 0.0,
            ..SamplerConfig::default()
        };
        assert!(lmc_run(&Gaussian, &[0.0], &bad).is_err());
        let bad = SamplerConfig {
            burn_in: 10,
            n_iter: 10,
            ..SamplerConfig::default()
        };
        assert!(mala_run(&Gaussian, &[0.0], &bad).is_err());
        assert!(mala_run(&Box1, &[2.0], &SamplerConfig::default()).is_err());
        assert!(mala_run(&Gaussian, &[0.0, 1.0], &SamplerConfig::default()).is_err());
    }

    #[test]
    fn lmc_rolls_back_support_exits() {
        let cfg = SamplerConfig {
            step_size: 0.5,
            n_iter: 2_000,
            burn_in: 100,
            seed: 4,
            ..SamplerConfig::default()
        };
        let c = lmc_run(&Box1, &[0.0], &cfg).unwrap();
        assert!(c.samples.iter().all(|s| s[0].abs() <= 1.0));
        assert!(c.step_size_trace.iter().any(|&h| h < 0.5));
        assert_eq!(c.acceptance_rate, 1.0);
    }

    #[test]
    fn mala_never_leaves_support_and_freezes_step() {
        let cfg = SamplerConfig {
            step_size: 0.5,
            n_iter: 5_000,
            burn_in: 1_000,
            seed: 8,
            ..SamplerConfig::default()
        };
        let c = mala_run(&Box1, &[0.0], &cfg).unwrap();
        assert!(c.samples.iter().all(|s| s[0].abs() <= 1.0));
        let frozen = c.step_size_trace[cfg.burn_in];
        assert!(c.step_size_trace[cfg.burn_in..].iter().all(|&h| h == frozen));
        assert!((0.0..=1.0).contains(&c.acceptance_rate));
    }

    #[test]
    fn thinning_counts() {
        let cfg = SamplerConfig {
            n_iter: 1_000,
            burn_in: 250,
            thin: 10,
            ..SamplerConfig::default()
        };
        let c = lmc_run(&Gaussian, &[0.0], &cfg).unwrap();
        assert_eq!(c.samples.len(), 100);
        assert_eq!(c.burn_in, 25);
        assert_eq!(c.step_size_trace.len(), 1_000);
    }
}
