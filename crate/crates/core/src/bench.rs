//! Fitting the five compared methods and the replicated benchmark harness.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{GibbsConfig, GibbsTarget, LossKind};
use crate::io::{split_indices, StandardizationStats};
use crate::lasso::{cv_select, LassoConfig, LassoFit};
use crate::model::{misclassification_rate, CoefVector, LabeledDataset};
use crate::prior::PriorConfig;
use crate::samplers::{
    lmc_run, lmc_step_from_mala, mala_run, posterior_mean, sample_classifier, tune_mala_step, Chain,
    SamplerConfig,
};
use crate::seeds::{derive_seed, stream, streams};
use crate::simulation::{gen_sample, gen_truth, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "H_LMC")]
    HLmc,
    #[serde(rename = "H_MALA")]
    HMala,
    #[serde(rename = "Logit_LMC")]
    LogitLmc,
    #[serde(rename = "Logit_MALA")]
    LogitMala,
    #[serde(rename = "Lasso")]
    Lasso,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::LogitLmc,
        Method::HLmc,
        Method::LogitMala,
        Method::HMala,
        Method::Lasso,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::HLmc => "H_LMC",
            Method::HMala => "H_MALA",
            Method::LogitLmc => "Logit_LMC",
            Method::LogitMala => "Logit_MALA",
            Method::Lasso => "Lasso",
        }
    }

    pub fn loss(&self) -> Option<LossKind> {
        match self {
            Method::HLmc | Method::HMala => Some(LossKind::Hinge),
            Method::LogitLmc | Method::LogitMala => Some(LossKind::Logistic),
            Method::Lasso => None,
        }
    }

    pub fn is_lmc(&self) -> bool {
        matches!(self, Method::HLmc | Method::LogitLmc)
    }

    fn index(&self) -> u64 {
        *self as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "hlmc" => Ok(Method::HLmc),
            "hmala" => Ok(Method::HMala),
            "logitlmc" => Ok(Method::LogitLmc),
            "logitmala" => Ok(Method::LogitMala),
            "lasso" => Ok(Method::Lasso),
            _ => Err(Error::InvalidConfig(format!("unknown method {s:?}"))),
        }
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut methods: Vec<Method> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods given".into()));
    }
    Ok(methods)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// A tenth of the step found by a short adaptive MALA pilot run.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    Zero,
    /// The cross-validated logistic Lasso fit.
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summary {
    PosteriorMean,
    /// One sample drawn uniformly from the post-burn-in chain.
    Draw,
}

/// Everything needed to fit any of the five methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Inverse temperature for the hinge pseudo-posterior.
    pub lambda: f64,
    /// Inverse temperature for the logistic pseudo-posterior.
    pub logit_lambda: f64,
    pub prior: PriorConfig,
    /// Chain length, burn-in, thinning; `step_size` is MALA's initial step.
    pub sampler: SamplerConfig,
    /// Thinning is chosen to keep at most this many stored floats per chain
    /// when `sampler.thin` is 0.
    pub max_stored: usize,
    pub lmc_step: StepRule,
    pub pilot_iters: usize,
    pub lmc_init: InitRule,
    pub mala_init: InitRule,
    pub summary: Summary,
    pub lasso: LassoConfig,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            logit_lambda: 1.0,
            prior: PriorConfig::default(),
            sampler: SamplerConfig {
                step_size: 0.0,
                thin: 0,
                ..SamplerConfig::default()
            },
            max_stored: 4_000_000,
            lmc_step: StepRule::Auto,
            pilot_iters: 2_000,
            lmc_init: InitRule::Lasso,
            mala_init: InitRule::Zero,
            summary: Summary::PosteriorMean,
            lasso: LassoConfig::default(),
        }
    }
}

impl FitSettings {
    /// Sampler settings for dimension `d`, resolving the automatic fields.
    pub fn sampler_for(&self, d: usize, seed: u64) -> SamplerConfig {
        let mut cfg = self.sampler;
        if cfg.step_size <= 0.0 {
            cfg.step_size = default_mala_step(d);
        }
        if cfg.thin == 0 {
            cfg.thin = (cfg.n_iter * d).div_ceil(self.max_stored.max(1)).max(1);
        }
        cfg.seed = seed;
        cfg
    }

    pub fn gibbs(&self, loss: LossKind) -> GibbsConfig {
        GibbsConfig {
            lambda: match loss {
                LossKind::Hinge => self.lambda,
                LossKind::Logistic => self.logit_lambda,
            },
            loss,
            prior: self.prior,
        }
    }
}

/// Initial MALA step before adaptation.
pub fn default_mala_step(d: usize) -> f64 {
    1.0 / d.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub acceptance_rate: f64,
    pub step_size: f64,
    pub stored_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl ChainSummary {
    fn of(chain: &Chain, thin: usize) -> Self {
        Self {
            acceptance_rate: chain.acceptance_rate,
            step_size: chain.final_step_size(),
            stored_samples: chain.samples.len(),
            burn_in: chain.burn_in,
            thin,
        }
    }
}

/// A fitted linear classifier `sign(<beta, x> + intercept)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub method: Method,
    pub beta: CoefVector,
    pub intercept: f64,
    pub chain: Option<ChainSummary>,
    pub lasso_penalty: Option<f64>,
}

impl FittedModel {
    pub fn misclassification_rate(&self, data: &LabeledDataset) -> Result<f64> {
        if self.intercept == 0.0 {
            return misclassification_rate(&self.beta, data);
        }
        let lasso = LassoFit {
            beta: self.beta.clone(),
            intercept: self.intercept,
            penalty: f64::NAN,
            objective: f64::NAN,
            iterations: 0,
            converged: true,
        };
        lasso.misclassification_rate(data)
    }
}

/// Per-fit cache of the cross-validated Lasso, shared by the Lasso method
/// and the Lasso-initialized chains.
#[derive(Debug, Default)]
pub struct LassoCache(Option<LassoFit>);

impl LassoCache {
    fn get(&mut self, train: &LabeledDataset, settings: &FitSettings, seed: u64) -> Result<&LassoFit> {
        if self.0.is_none() {
            let mut rng = stream(seed, &[streams::LASSO_CV]);
            let report = cv_select(train, &settings.lasso, &mut rng)?;
            self.0 = Some(report.fit);
        }
        Ok(self.0.as_ref().expect("just filled"))
    }
}

/// Fits one method on `train`. `seed` identifies the replication; the
/// streams used inside are derived from it.
pub fn fit_method(
    method: Method,
    train: &LabeledDataset,
    settings: &FitSettings,
    seed: u64,
    cache: &mut LassoCache,
) -> Result<FittedModel> {
    let Some(loss) = method.loss() else {
        let fit = cache.get(train, settings, seed)?;
        return Ok(FittedModel {
            method,
            beta: fit.beta.clone(),
            intercept: fit.intercept,
            chain: None,
            lasso_penalty: Some(fit.penalty),
        });
    };

    let d = train.d();
    let target = GibbsTarget::new(train, settings.gibbs(loss))?;
    let init_rule = if method.is_lmc() {
        settings.lmc_init
    } else {
        settings.mala_init
    };
    let mut init = match init_rule {
        InitRule::Zero => vec![0.0; d],
        InitRule::Lasso => cache.get(train, settings, seed)?.beta.to_vec(),
    };
    if !settings.prior.in_support(&init) {
        log::warn!("{method}: initial point outside the prior support, starting at zero");
        init = vec![0.0; d];
    }

    let mut cfg = settings.sampler_for(d, derive_seed(seed, &[streams::SAMPLER, method.index()]));
    let chain = if method.is_lmc() {
        cfg.step_size = match settings.lmc_step {
            StepRule::Fixed(h) => h,
            StepRule::Auto => {
                let pilot_seed = derive_seed(seed, &[streams::PILOT, method.index()]);
                let mala_step = tune_mala_step(
                    &target,
                    &init,
                    settings.sampler_for(d, 0).step_size,
                    settings.pilot_iters,
                    pilot_seed,
                )?;
                lmc_step_from_mala(mala_step)
            }
        };
        lmc_run(&target, &init, &cfg)?
    } else {
        mala_run(&target, &init, &cfg)?
    };

    let beta = match settings.summary {
        Summary::PosteriorMean => posterior_mean(&chain)?,
        Summary::Draw => {
            let mut rng = stream(seed, &[streams::DRAW, method.index()]);
            sample_classifier(&chain, &mut rng)?
        }
    };
    Ok(FittedModel {
        method,
        beta,
        intercept: 0.0,
        chain: Some(ChainSummary::of(&chain, cfg.thin)),
        lasso_penalty: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub fit: FitSettings,
    /// Rows of the independent test set drawn per replication.
    pub test_size: usize,
    /// Record wall-clock seconds in the results (makes output non-reproducible).
    pub record_time: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            fit: FitSettings::default(),
            test_size: 2_000,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub scenario: String,
    pub method: Method,
    pub replication: usize,
    pub seed: u64,
    /// Test misclassification in percent; `None` when the fit failed.
    pub misclassification_pct: Option<f64>,
    pub error: Option<String>,
    pub acceptance_rate: Option<f64>,
    pub step_size: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario: String,
    pub method: Method,
    pub mean_pct: f64,
    pub sd_pct: f64,
    /// Successful replications.
    pub reps: usize,
    pub failed: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub cells: Vec<CellSummary>,
    pub records: Vec<ReplicationRecord>,
}

impl BenchmarkResult {
    pub fn cell(&self, scenario: &str, method: Method) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.method == method)
    }

    fn from_records(records: Vec<ReplicationRecord>) -> Self {
        let mut keys: Vec<(String, Method)> = Vec::new();
        for r in &records {
            if !keys.iter().any(|(s, m)| *s == r.scenario && *m == r.method) {
                keys.push((r.scenario.clone(), r.method));
            }
        }
        let cells = keys
            .into_iter()
            .map(|(scenario, method)| {
                let rs: Vec<&ReplicationRecord> = records
                    .iter()
                    .filter(|r| r.scenario == scenario && r.method == method)
                    .collect();
                let values: Vec<f64> = rs.iter().filter_map(|r| r.misclassification_pct).collect();
                let (mean_pct, sd_pct) = mean_sd(&values);
                CellSummary {
                    scenario,
                    method,
                    mean_pct,
                    sd_pct,
                    reps: values.len(),
                    failed: rs.len() - values.len(),
                    seconds: rs.iter().map(|r| r.seconds).sum(),
                }
            })
            .collect();
        Self { cells, records }
    }

    /// `scenario,method,mean_pct,sd_pct,reps,seconds`; seconds is left empty
    /// unless timing was recorded.
    pub fn write_summary_csv<W: Write>(&self, writer: W, with_time: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario", "method", "mean_pct", "sd_pct", "reps", "seconds"])?;
        for c in &self.cells {
            w.write_record([
                c.scenario.clone(),
                c.method.to_string(),
                format!("{:.4}", c.mean_pct),
                format!("{:.4}", c.sd_pct),
                c.reps.to_string(),
                if with_time {
                    format!("{:.3}", c.seconds)
                } else {
                    String::new()
                },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_records_csv<W: Write>(&self, writer: W, with_time: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "scenario",
            "method",
            "replication",
            "seed",
            "misclassification_pct",
            "acceptance_rate",
            "step_size",
            "seconds",
            "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.scenario.clone(),
                r.method.to_string(),
                r.replication.to_string(),
                r.seed.to_string(),
                opt(r.misclassification_pct),
                opt(r.acceptance_rate),
                opt(r.step_size),
                if with_time {
                    format!("{:.3}", r.seconds)
                } else {
                    String::new()
                },
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean and sample standard deviation (divisor `k - 1`; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k - 1.0)).sqrt())
}

/// Fits every method on `train`, scores on `test`, never aborting on a
/// single method's failure.
fn evaluate_methods(
    scenario: &str,
    replication: usize,
    seed: u64,
    methods: &[Method],
    train: &LabeledDataset,
    test: &LabeledDataset,
    settings: &FitSettings,
) -> Vec<ReplicationRecord> {
    let mut cache = LassoCache::default();
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = fit_method(method, train, settings, seed, &mut cache)
                .and_then(|fit| Ok((fit.misclassification_rate(test)?, fit)));
            let seconds = start.elapsed().as_secs_f64();
            match outcome {
                Ok((rate, fit)) => ReplicationRecord {
                    scenario: scenario.to_string(),
                    method,
                    replication,
                    seed,
                    misclassification_pct: Some(100.0 * rate),
                    error: None,
                    acceptance_rate: fit.chain.as_ref().map(|c| c.acceptance_rate),
                    step_size: fit.chain.as_ref().map(|c| c.step_size),
                    seconds,
                },
                Err(e) => {
                    log::warn!("{scenario} rep {replication} {method}: {e}");
                    ReplicationRecord {
                        scenario: scenario.to_string(),
                        method,
                        replication,
                        seed,
                        misclassification_pct: None,
                        error: Some(e.to_string()),
                        acceptance_rate: None,
                        step_size: None,
                        seconds,
                    }
                }
            }
        })
        .collect()
}

/// Seed of replication `rep` of a scenario.
pub fn replication_seed(spec: &ScenarioSpec, rep: usize) -> u64 {
    derive_seed(spec.seed, &[rep as u64])
}

/// One replication: fresh truth, training sample and independent test sample.
pub fn run_replication(
    spec: &ScenarioSpec,
    rep: usize,
    methods: &[Method],
    cfg: &BenchmarkConfig,
) -> Result<Vec<ReplicationRecord>> {
    let seed = replication_seed(spec, rep);
    let truth = gen_truth(spec, &mut stream(seed, &[streams::TRUTH]))?;
    let train = crate::simulation::gen_labels(&truth, spec, &mut stream(seed, &[streams::TRAIN_LABELS]))?;
    let mut test_rng = stream(seed, &[streams::TEST_DESIGN]);
    let test = gen_sample(&truth.beta_star, spec, cfg.test_size, &mut test_rng)?;
    Ok(evaluate_methods(&spec.name(), rep, seed, methods, &train, &test, &cfg.fit))
}

/// Runs `replications` independent replications of every scenario.
///
/// Replications run in parallel; each derives all its randomness from
/// `(scenario seed, replication index)`.
pub fn run_benchmark(
    scenarios: &[ScenarioSpec],
    methods: &[Method],
    replications: usize,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkResult> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    if cfg.test_size == 0 {
        return Err(Error::InvalidConfig("test size must be at least 1".into()));
    }
    for s in scenarios {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..replications).map(move |r| (s, r)))
        .collect();
    let per_job: Vec<Vec<ReplicationRecord>> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let spec = &scenarios[s];
            run_replication(spec, r, methods, cfg).unwrap_or_else(|e| {
                methods
                    .iter()
                    .map(|&method| ReplicationRecord {
                        scenario: spec.name(),
                        method,
                        replication: r,
                        seed: replication_seed(spec, r),
                        misclassification_pct: None,
                        error: Some(e.to_string()),
                        acceptance_rate: None,
                        step_size: None,
                        seconds: 0.0,
                    })
                    .collect()
            })
        })
        .collect();
    Ok(BenchmarkResult::from_records(per_job.into_iter().flatten().collect()))
}

/// Repeated random train/test splits of one dataset, standardizing each
/// split with its training statistics.
pub fn run_split_benchmark(
    name: &str,
    data: &LabeledDataset,
    methods: &[Method],
    splits: usize,
    train_fraction: f64,
    seed: u64,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkResult> {
    if splits == 0 {
        return Err(Error::InvalidConfig("splits must be at least 1".into()));
    }
    // fail fast on degenerate sizes
    split_indices(data.n(), train_fraction, &mut stream(seed, &[]))?;
    let per_split: Vec<Vec<ReplicationRecord>> = (0..splits)
        .into_par_iter()
        .map(|k| -> Result<Vec<ReplicationRecord>> {
            let split_seed = derive_seed(seed, &[k as u64]);
            let (tr, te) = split_indices(
                data.n(),
                train_fraction,
                &mut stream(split_seed, &[streams::SPLIT]),
            )?;
            let train_raw = data.subset(&tr)?;
            let stats = StandardizationStats::fit(&train_raw);
            let train = stats.apply(&train_raw)?;
            let test = stats.apply(&data.subset(&te)?)?;
            Ok(evaluate_methods(name, k, split_seed, methods, &train, &test, &cfg.fit))
        })
        .collect::<Result<_>>()?;
    Ok(BenchmarkResult::from_records(per_split.into_iter().flatten().collect()))
}
