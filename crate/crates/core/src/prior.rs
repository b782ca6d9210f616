//! Heavy-tailed sparsity prior `pi(beta) ∝ prod_i (tau^2 + beta_i^2)^-2`
//! restricted to the l1 ball of radius `c1`.

use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of whole-vector redraws in [`sample_prior`].
pub const REJECTION_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Scale of each coordinate.
    pub tau: f64,
    /// Radius of the l1 ball carrying the prior.
    pub c1: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { tau: 1.0, c1: 1e6 }
    }
}

impl PriorConfig {
    pub fn new(tau: f64, c1: f64) -> Result<Self> {
        let cfg = Self { tau, c1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if self.c1.is_nan() || self.c1 <= 0.0 {
            return Err(Error::InvalidConfig(format!("c1 must be positive, got {}", self.c1)));
        }
        Ok(())
    }

    /// Warning text when the theoretical condition `c1 > 2 d tau` fails.
    pub fn dimension_warning(&self, d: usize) -> Option<String> {
        let bound = 2.0 * d as f64 * self.tau;
        (self.c1 <= bound).then(|| {
            format!(
                "c1 = {} does not exceed 2 * d * tau = {}; the risk bounds assume it does",
                self.c1, bound
            )
        })
    }

    pub fn in_support(&self, beta: &[f64]) -> bool {
        l1_norm(beta) <= self.c1
    }
}

pub(crate) fn l1_norm(beta: &[f64]) -> f64 {
    beta.iter().map(|v| v.abs()).sum()
}

/// `-2 sum_i log(tau^2 + beta_i^2)`, or `-inf` outside the l1 ball.
pub fn log_prior_unnormalized(beta: &[f64], cfg: &PriorConfig) -> f64 {
    if !cfg.in_support(beta) {
        return f64::NEG_INFINITY;
    }
    let t2 = cfg.tau * cfg.tau;
    -2.0 * beta.iter().map(|b| (t2 + b * b).ln()).sum::<f64>()
}

/// Component `i` is `-4 beta_i / (tau^2 + beta_i^2)`.
pub fn grad_log_prior(beta: &[f64], cfg: &PriorConfig) -> Result<Vec<f64>> {
    let mut out = vec![0.0; beta.len()];
    grad_log_prior_into(beta, cfg, &mut out)?;
    Ok(out)
}

pub(crate) fn grad_log_prior_into(beta: &[f64], cfg: &PriorConfig, out: &mut [f64]) -> Result<()> {
    let l1 = l1_norm(beta);
    if l1 > cfg.c1 {
        return Err(Error::OutsideSupport {
            l1_norm: l1,
            radius: cfg.c1,
        });
    }
    let t2 = cfg.tau * cfg.tau;
    for (g, &b) in out.iter_mut().zip(beta) {
        *g = -4.0 * b / (t2 + b * b);
    }
    Ok(())
}

/// Draws from the prior by rejection from the untruncated product law.
///
/// Each coordinate of the untruncated prior is `tau / sqrt(3)` times a
/// Student t variate with 3 degrees of freedom, since the t(3) density is
/// proportional to `(1 + t^2 / 3)^-2`.
pub fn sample_prior<R: Rng + ?Sized>(cfg: &PriorConfig, d: usize, rng: &mut R) -> Result<Vec<f64>> {
    cfg.validate()?;
    if d == 0 {
        return Err(Error::InvalidConfig("d must be at least 1".into()));
    }
    let t3 = StudentT::new(3.0).expect("3 degrees of freedom is valid");
    let scale = cfg.tau / 3f64.sqrt();
    let mut beta = vec![0.0; d];
    for _ in 0..REJECTION_BUDGET {
        for b in beta.iter_mut() {
            *b = scale * t3.sample(rng);
        }
        if cfg.in_support(&beta) {
            return Ok(beta);
        }
    }
    Err(Error::RejectionBudget {
        attempts: REJECTION_BUDGET,
    })
}
