//! Gibbs pseudo-posterior `exp(-lambda * risk(beta)) * pi(beta)` over linear
//! classifiers, exposed to the samplers as a log-density with gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hinge_loss, logistic_loss, LabeledDataset};
use crate::prior::{grad_log_prior_into, log_prior_unnormalized, PriorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Hinge,
    Logistic,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::Hinge => f.write_str("hinge"),
            LossKind::Logistic => f.write_str("logistic"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    /// Inverse temperature multiplying the empirical risk.
    pub lambda: f64,
    pub loss: LossKind,
    pub prior: PriorConfig,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            loss: LossKind::Hinge,
            prior: PriorConfig::default(),
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        self.prior.validate()
    }
}

/// An unnormalized log-density on `R^d` with a (sub)gradient.
///
/// `gradient` is only called where `log_density` is finite.
pub trait LogDensityTarget {
    fn dim(&self) -> usize;

    fn log_density(&self, beta: &[f64]) -> f64;

    fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>>;

    /// Log-density at `beta`, writing the gradient into `grad` when the
    /// density is finite. `grad` is left untouched otherwise.
    fn log_density_and_gradient(&self, beta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let lp = self.log_density(beta);
        if lp.is_finite() {
            grad.copy_from_slice(&self.gradient(beta)?);
        }
        Ok(lp)
    }
}

/// The pseudo-posterior for a fixed sample.
#[derive(Debug, Clone, Copy)]
pub struct GibbsTarget<'a> {
    data: &'a LabeledDataset,
    cfg: GibbsConfig,
}

impl<'a> GibbsTarget<'a> {
    pub fn new(data: &'a LabeledDataset, cfg: GibbsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { data, cfg })
    }

    pub fn config(&self) -> &GibbsConfig {
        &self.cfg
    }

    pub fn data(&self) -> &LabeledDataset {
        self.data
    }

    fn risk_from_margins(&self, margins: &[f64]) -> f64 {
        let loss = match self.cfg.loss {
            LossKind::Hinge => hinge_loss,
            LossKind::Logistic => logistic_loss,
        };
        margins.iter().map(|&m| loss(m)).sum::<f64>() / margins.len() as f64
    }

    /// Adds `-lambda * grad(risk)` to `out`.
    fn add_risk_gradient(&self, margins: &[f64], out: &mut [f64]) {
        let scale = self.cfg.lambda / self.data.n() as f64;
        for ((x, &y), &m) in self.data.rows().zip(self.data.labels()).zip(margins) {
            // derivative of the loss w.r.t. the margin, negated
            let w = match self.cfg.loss {
                LossKind::Hinge => {
                    if m < 1.0 {
                        1.0
                    } else {
                        continue;
                    }
                }
                LossKind::Logistic => 1.0 / (1.0 + m.exp()),
            };
            let c = scale * w * y;
            for (o, xi) in out.iter_mut().zip(x) {
                *o += c * xi;
            }
        }
    }
}

impl LogDensityTarget for GibbsTarget<'_> {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn log_density(&self, beta: &[f64]) -> f64 {
        let lp = log_prior_unnormalized(beta, &self.cfg.prior);
        if !lp.is_finite() {
            return lp;
        }
        let margins = self.data.margins_unchecked(beta);
        -self.cfg.lambda * self.risk_from_margins(&margins) + lp
    }

    fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; beta.len()];
        let lp = self.log_density_and_gradient(beta, &mut g)?;
        if !lp.is_finite() {
            // reports the support violation
            grad_log_prior_into(beta, &self.cfg.prior, &mut g)?;
            return Err(Error::NonFinite("log-target at gradient query".into()));
        }
        Ok(g)
    }

    fn log_density_and_gradient(&self, beta: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.data.check_dim(beta.len())?;
        let lp = log_prior_unnormalized(beta, &self.cfg.prior);
        if !lp.is_finite() {
            return Ok(lp);
        }
        let margins = self.data.margins_unchecked(beta);
        grad_log_prior_into(beta, &self.cfg.prior, grad)?;
        self.add_risk_gradient(&margins, grad);
        Ok(-self.cfg.lambda * self.risk_from_margins(&margins) + lp)
    }
}

/// `-lambda * risk(beta) + log pi(beta)`, up to an additive constant.
pub fn log_target(beta: &[f64], data: &LabeledDataset, cfg: &GibbsConfig) -> Result<f64> {
    data.check_dim(beta.len())?;
    Ok(GibbsTarget::new(data, *cfg)?.log_density(beta))
}

/// Gradient of [`log_target`]. At a hinge kink (margin exactly 1) the point
/// contributes nothing.
pub fn grad_log_target(beta: &[f64], data: &LabeledDataset, cfg: &GibbsConfig) -> Result<Vec<f64>> {
    data.check_dim(beta.len())?;
    GibbsTarget::new(data, *cfg)?.gradient(beta)
}
