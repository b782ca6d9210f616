//! Run configuration shared by the command-line tool, and the on-disk model
//! file.
//!
//! A [`RunConfig`] is stored as JSON. Every field is optional in the file;
//! missing fields take their default values.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchmarkConfig, ChainSummary, FitSettings, InitRule, Method, StepRule, Summary};
use crate::error::{Error, Result};
use crate::io::StandardizationStats;
use crate::lasso::{LassoConfig, PenaltyGrid};
use crate::model::{CoefVector, LabeledDataset};
use crate::prior::PriorConfig;
use crate::samplers::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub lambda: f64,
    pub logit_lambda: f64,
    pub tau: f64,
    pub c1: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    /// 0 picks the thinning from `max_stored`.
    pub thin: usize,
    pub max_stored: usize,
    /// Initial MALA step; 0 means `1/d`.
    pub step_size: f64,
    pub adapt: bool,
    pub target_acceptance: f64,
    /// Fixed LMC step; `None` tunes it with a short MALA pilot.
    pub lmc_step: Option<f64>,
    pub pilot_iters: usize,
    pub lmc_init: InitRule,
    pub mala_init: InitRule,
    pub summary: Summary,
    pub lasso_folds: usize,
    pub lasso_max_iter: usize,
    pub lasso_tol: f64,
    pub lasso_grid_size: usize,
    pub lasso_min_ratio: f64,
    /// Explicit penalty grid, overriding the automatic one.
    pub lasso_grid: Option<Vec<f64>>,
    pub fit_intercept: bool,
    pub standardize: bool,
    pub train_fraction: f64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitSettings::default();
        let lasso = LassoConfig::default();
        let (grid_size, min_ratio) = match lasso.penalty_grid {
            PenaltyGrid::Auto { count, min_ratio } => (count, min_ratio),
            PenaltyGrid::Explicit(_) => unreachable!("default grid is automatic"),
        };
        Self {
            method: Method::HLmc,
            lambda: fit.lambda,
            logit_lambda: fit.logit_lambda,
            tau: fit.prior.tau,
            c1: fit.prior.c1,
            n_iter: fit.sampler.n_iter,
            burn_in: fit.sampler.burn_in,
            thin: fit.sampler.thin,
            max_stored: fit.max_stored,
            step_size: fit.sampler.step_size,
            adapt: fit.sampler.adapt,
            target_acceptance: fit.sampler.target_acceptance,
            lmc_step: None,
            pilot_iters: fit.pilot_iters,
            lmc_init: fit.lmc_init,
            mala_init: fit.mala_init,
            summary: fit.summary,
            lasso_folds: lasso.folds,
            lasso_max_iter: lasso.max_iter,
            lasso_tol: lasso.tol,
            lasso_grid_size: grid_size,
            lasso_min_ratio: min_ratio,
            lasso_grid: None,
            fit_intercept: lasso.fit_intercept,
            standardize: true,
            train_fraction: 0.7,
            seed: 0,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        log::debug!("read configuration from {}", path.display());
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }

    pub fn lasso_config(&self) -> LassoConfig {
        LassoConfig {
            penalty_grid: match &self.lasso_grid {
                Some(g) => PenaltyGrid::Explicit(g.clone()),
                None => PenaltyGrid::Auto {
                    count: self.lasso_grid_size,
                    min_ratio: self.lasso_min_ratio,
                },
            },
            max_iter: self.lasso_max_iter,
            tol: self.lasso_tol,
            folds: self.lasso_folds,
            fit_intercept: self.fit_intercept,
        }
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            lambda: self.lambda,
            logit_lambda: self.logit_lambda,
            prior: PriorConfig {
                tau: self.tau,
                c1: self.c1,
            },
            sampler: SamplerConfig {
                step_size: self.step_size,
                n_iter: self.n_iter,
                burn_in: self.burn_in,
                adapt: self.adapt,
                target_acceptance: self.target_acceptance,
                thin: self.thin,
                seed: self.seed,
            },
            max_stored: self.max_stored,
            lmc_step: match self.lmc_step {
                Some(h) => StepRule::Fixed(h),
                None => StepRule::Auto,
            },
            pilot_iters: self.pilot_iters,
            lmc_init: self.lmc_init,
            mala_init: self.mala_init,
            summary: self.summary,
            lasso: self.lasso_config(),
        }
    }

    pub fn benchmark_config(&self, test_size: usize, record_time: bool) -> BenchmarkConfig {
        BenchmarkConfig {
            fit: self.fit_settings(),
            test_size,
            record_time,
        }
    }

    /// Checks every field that has a constraint.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.logit_lambda > 0.0 && self.logit_lambda.is_finite()) {
            return bad(format!("logit_lambda must be positive, got {}", self.logit_lambda));
        }
        PriorConfig {
            tau: self.tau,
            c1: self.c1,
        }
        .validate()?;
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return bad(format!("step_size must be nonnegative, got {}", self.step_size));
        }
        if let Some(h) = self.lmc_step {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("lmc_step must be positive, got {h}"));
            }
        }
        let mut sampler = self.fit_settings().sampler;
        sampler.step_size = sampler.step_size.max(f64::MIN_POSITIVE);
        sampler.thin = sampler.thin.max(1);
        sampler.validate()?;
        if self.max_stored == 0 {
            return bad("max_stored must be at least 1".into());
        }
        if self.pilot_iters == 0 && self.lmc_step.is_none() {
            return bad("pilot_iters must be at least 1 when the LMC step is tuned".into());
        }
        self.lasso_config().validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }
}

pub const MODEL_FORMAT: &str = "hinge-ewa-model";
pub const MODEL_VERSION: u32 = 1;

/// A fitted classifier as written by `fit` and read by `predict`.
///
/// Predictions are `sign(<beta, z> + intercept)` where `z` is the feature
/// row after applying `standardization` (when present).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub feature_names: Vec<String>,
    pub beta: CoefVector,
    pub intercept: f64,
    pub standardization: Option<StandardizationStats>,
    pub chain: Option<ChainSummary>,
    pub lasso_penalty: Option<f64>,
    pub train_misclassification: f64,
    pub config: RunConfig,
}

impl ModelFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if m.format != MODEL_FORMAT {
            return Err(Error::InvalidConfig(format!("not a model file (format {:?})", m.format)));
        }
        if m.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                m.version
            )));
        }
        if m.feature_names.len() != m.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: m.beta.len(),
                actual: m.feature_names.len(),
            });
        }
        if let Some(s) = &m.standardization {
            if s.mean.len() != m.beta.len() || s.sd.len() != m.beta.len() {
                return Err(Error::InvalidConfig("standardization length differs from beta".into()));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }

    /// Labels in {-1, +1} for every row of `data`.
    pub fn predict(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        data.check_dim(self.beta.len())?;
        data.rows()
            .map(|x| {
                let z;
                let x = match &self.standardization {
                    Some(s) => {
                        z = s.apply_row(x);
                        &z[..]
                    }
                    None => x,
                };
                let score = crate::model::dot(&self.beta, x) + self.intercept;
                Ok(if score >= 0.0 { 1.0 } else { -1.0 })
            })
            .collect()
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}
