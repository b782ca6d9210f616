//! Synthetic scenarios (settings I and II with label flips and additive
//! noise) and the theoretical rate calculator.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, sign_label, CoefVector, LabeledDataset};

/// Probability that `Z = -1` in the switch variants.
pub const FLIP_PROBABILITY: f64 = 0.1;
/// Standard deviation of the nonzero true coefficients.
pub const BETA_STAR_SD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    /// `Y = sign(X beta* + N) Z`
    I,
    /// `Y = Z (2B - 1)`, `B ~ Bernoulli(1 / (1 + exp(-(X beta* + N))))`
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub setting: Setting,
    /// 1 to 4.
    pub variant: u8,
    pub n: usize,
    pub d: usize,
    pub s0: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(setting: Setting, variant: u8, n: usize, d: usize, s0: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            setting,
            variant,
            n,
            d,
            s0,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.variant) {
            return Err(Error::InvalidConfig(format!("variant must be 1-4, got {}", self.variant)));
        }
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidConfig("n and d must be positive".into()));
        }
        if self.s0 == 0 {
            return Err(Error::InvalidConfig("s0 must be at least 1".into()));
        }
        if self.s0 > self.d {
            return Err(Error::InvalidConfig(format!("s0 = {} exceeds d = {}", self.s0, self.d)));
        }
        Ok(())
    }

    /// Whether labels are multiplied by a random sign flip `Z`.
    pub fn has_flip(&self) -> bool {
        matches!((self.setting, self.variant), (_, 4) | (Setting::I, 3) | (Setting::II, 2))
    }

    /// Whether `N ~ N(0, 1)` is added to the linear score.
    pub fn has_noise(&self) -> bool {
        matches!((self.setting, self.variant), (_, 4) | (Setting::I, 2) | (Setting::II, 3))
    }

    pub fn name(&self) -> String {
        format!("{}.{}", self.setting_label(), self.variant)
    }

    fn setting_label(&self) -> &'static str {
        match self.setting {
            Setting::I => "I",
            Setting::II => "II",
        }
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={},d={},s0={})", self.name(), self.n, self.d, self.s0)
    }
}

/// Parses `"I.1"` .. `"II.4"` into a setting and variant.
pub fn parse_scenario_name(s: &str) -> Result<(Setting, u8)> {
    let (setting, variant) = s
        .split_once('.')
        .ok_or_else(|| Error::InvalidConfig(format!("scenario {s:?} is not of the form I.1")))?;
    let setting = match setting.trim() {
        "I" | "1" => Setting::I,
        "II" | "2" => Setting::II,
        other => return Err(Error::InvalidConfig(format!("unknown setting {other:?}"))),
    };
    let variant = u8::from_str(variant.trim())
        .ok()
        .filter(|v| (1..=4).contains(v))
        .ok_or_else(|| Error::InvalidConfig(format!("unknown variant in {s:?}")))?;
    Ok((setting, variant))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub beta_star: CoefVector,
    /// Sorted indices of the nonzero coefficients.
    pub support: Vec<usize>,
    /// Training design, labelled noiselessly by `sign(X beta*)`.
    pub dataset: LabeledDataset,
}

/// `n x d` matrix of iid standard normals, row-major.
pub fn gen_design<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<f64> {
    (0..n * d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gen_truth<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<SyntheticTruth> {
    spec.validate()?;
    let mut support = sample_indices(rng, spec.d, spec.s0).into_vec();
    support.sort_unstable();
    let coef = Normal::new(0.0, BETA_STAR_SD).expect("valid normal");
    let mut beta = vec![0.0; spec.d];
    for &j in &support {
        beta[j] = coef.sample(rng);
    }
    let features = gen_design(spec.n, spec.d, rng);
    let labels = features
        .chunks_exact(spec.d)
        .map(|x| sign_label(dot(x, &beta)))
        .collect();
    Ok(SyntheticTruth {
        beta_star: CoefVector::new(beta)?,
        support,
        dataset: LabeledDataset::new(features, labels, spec.d)?,
    })
}

/// Labels for a design under the scenario's noise model.
pub fn label_design<R: Rng + ?Sized>(
    features: Vec<f64>,
    beta_star: &[f64],
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<LabeledDataset> {
    let d = beta_star.len();
    let labels = features
        .chunks_exact(d)
        .map(|x| {
            let mut u = dot(x, beta_star);
            if spec.has_noise() {
                u += rng.sample::<f64, _>(StandardNormal);
            }
            let base = match spec.setting {
                Setting::I => sign_label(u),
                Setting::II => {
                    let p = 1.0 / (1.0 + (-u).exp());
                    if rng.random::<f64>() < p {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            let z = if spec.has_flip() && rng.random::<f64>() < FLIP_PROBABILITY {
                -1.0
            } else {
                1.0
            };
            base * z
        })
        .collect();
    LabeledDataset::new(features, labels, d)
}

pub fn gen_labels<R: Rng + ?Sized>(
    truth: &SyntheticTruth,
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<LabeledDataset> {
    label_design(truth.dataset.features().to_vec(), &truth.beta_star, spec, rng)
}

/// A fresh sample of `n` rows from the scenario with the same `beta*`.
pub fn gen_sample<R: Rng + ?Sized>(
    beta_star: &[f64],
    spec: &ScenarioSpec,
    n: usize,
    rng: &mut R,
) -> Result<LabeledDataset> {
    let features = gen_design(n, beta_star.len(), rng);
    label_design(features, beta_star, spec, rng)
}

/// Shape of a gene-expression style stand-in dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandInSpec {
    pub n_pos: usize,
    pub n_neg: usize,
    pub d: usize,
    /// Leading features whose mean differs between classes.
    pub informative: usize,
    /// Class mean of an informative feature is `+shift / 2` or `-shift / 2`.
    pub shift: f64,
}

impl StandInSpec {
    /// 52 positive and 50 negative rows, 6033 features.
    pub fn prostate_geometry() -> Self {
        Self {
            n_pos: 52,
            n_neg: 50,
            d: 6033,
            informative: 50,
            shift: 1.0,
        }
    }
}

/// Two-class Gaussian data: positives first, then negatives, features iid
/// `N(0, 1)` apart from the shifted informative block.
pub fn gen_stand_in<R: Rng + ?Sized>(spec: &StandInSpec, rng: &mut R) -> Result<LabeledDataset> {
    if spec.d == 0 || spec.n_pos == 0 || spec.n_neg == 0 || spec.informative > spec.d {
        return Err(Error::InvalidConfig(format!("bad stand-in shape {spec:?}")));
    }
    if !spec.shift.is_finite() {
        return Err(Error::InvalidConfig("stand-in shift must be finite".into()));
    }
    let n = spec.n_pos + spec.n_neg;
    let mut features = gen_design(n, spec.d, rng);
    let mut labels = Vec::with_capacity(n);
    for (i, row) in features.chunks_exact_mut(spec.d).enumerate() {
        let y = if i < spec.n_pos { 1.0 } else { -1.0 };
        for v in &mut row[..spec.informative] {
            *v += y * spec.shift / 2.0;
        }
        labels.push(y);
    }
    let names = (1..=spec.d).map(|j| format!("g{j}")).collect();
    LabeledDataset::new(features, labels, spec.d)?.with_feature_names(names)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Slow,
    Fast,
    Noiseless,
    SlowKnownS,
    FastKnownS,
}

impl FromStr for RateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "slow" => Ok(Self::Slow),
            "fast" => Ok(Self::Fast),
            "noiseless" => Ok(Self::Noiseless),
            "slow_known_s" => Ok(Self::SlowKnownS),
            "fast_known_s" => Ok(Self::FastKnownS),
            other => Err(Error::InvalidConfig(format!("unknown rate kind {other:?}"))),
        }
    }
}

fn check_rate_domain(n: usize, d: usize, s_star: usize, eps: f64) -> Result<()> {
    if s_star == 0 || s_star > n || n >= d {
        return Err(Error::InvalidConfig(format!(
            "rate bounds need 1 <= s* <= n < d, got s* = {s_star}, n = {n}, d = {d}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidConfig(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Excess-risk remainder of the oracle inequalities with all universal
/// constants set to 1 (diagnostics only).
pub fn rate_bound(n: usize, d: usize, s_star: usize, eps: f64, kind: RateKind) -> Result<f64> {
    check_rate_domain(n, d, s_star, eps)?;
    let (n, d, s) = (n as f64, d as f64, s_star as f64);
    let log_inv_eps = (1.0 / eps).ln();
    let log_ratio = (n * d.sqrt() / s).ln();
    let log_de = (d * std::f64::consts::E / s).ln();
    Ok(match kind {
        RateKind::Slow => s * log_ratio.sqrt() / n.sqrt() + log_inv_eps / (n * (n * d).ln()).sqrt(),
        RateKind::Fast | RateKind::Noiseless => (s * log_ratio + log_inv_eps) / n,
        RateKind::SlowKnownS => (s * log_de).sqrt() / n.sqrt() + log_inv_eps / (n * s * log_de).sqrt(),
        RateKind::FastKnownS => (s * log_de + log_inv_eps) / n,
    })
}

/// Tuning values under which each bound holds (margin constant set to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPreset {
    pub lambda: f64,
    pub tau: f64,
}

pub fn theory_preset(n: usize, d: usize, s_star: usize, kind: RateKind) -> Result<TheoryPreset> {
    check_rate_domain(n, d, s_star, 0.5)?;
    let (n, d, s) = (n as f64, d as f64, s_star as f64);
    let margin_c = 1.0;
    Ok(match kind {
        RateKind::Slow => TheoryPreset {
            lambda: (n * (n * d).ln()).sqrt(),
            tau: 1.0 / (n * d.sqrt()),
        },
        RateKind::Fast => TheoryPreset {
            lambda: 2.0 * n / (3.0 * margin_c + 2.0),
            tau: 1.0 / (n * d.sqrt()),
        },
        RateKind::Noiseless => TheoryPreset {
            lambda: 2.0 * n / 5.0,
            tau: 1.0 / (n * d),
        },
        RateKind::SlowKnownS => TheoryPreset {
            lambda: (n * s * (d * std::f64::consts::E / s).ln()).sqrt(),
            tau: s / (n * d.sqrt()),
        },
        RateKind::FastKnownS => TheoryPreset {
            lambda: 2.0 * n / (3.0 * margin_c + 2.0),
            tau: s / (n * d.sqrt()),
        },
    })
}
