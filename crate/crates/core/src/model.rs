//! Labeled data, linear classifiers and their empirical risks.
//!
//! Labels are stored as `f64` values that are exactly `-1.0` or `+1.0`, and
//! the design matrix is dense and row-major.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sample of `n` labeled points in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    d: usize,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset from a row-major `n x d` feature buffer.
    pub fn new(features: Vec<f64>, labels: Vec<f64>, d: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::InvalidDataset("d must be at least 1".into()));
        }
        if features.len() != n * d {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} entries, expected {} x {}",
                features.len(),
                n,
                d
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidDataset(format!(
                "label {} at row {} is not -1 or +1",
                labels[i], i
            )));
        }
        if let Some(k) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                k / d,
                k % d
            )));
        }
        let feature_names = (1..=d).map(|j| format!("x{j}")).collect();
        Ok(Self {
            features,
            labels,
            n,
            d,
            feature_names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Self::new(rows.concat(), labels, d)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Self {
            features,
            labels,
            n: indices.len(),
            d: self.d,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Replaces the labels, keeping the design.
    pub fn relabel(&self, labels: Vec<f64>) -> Result<Self> {
        Self::new(self.features.clone(), labels, self.d)
            .and_then(|ds| ds.with_feature_names(self.feature_names.clone()))
    }

    /// Replaces the design, keeping labels and names.
    pub(crate) fn with_features(&self, features: Vec<f64>) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.d)
            .and_then(|ds| ds.with_feature_names(self.feature_names.clone()))
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: len,
            });
        }
        Ok(())
    }

    /// Margins `y_i * <beta, x_i>`.
    pub fn margins(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(beta.len())?;
        Ok(self.margins_unchecked(beta))
    }

    pub(crate) fn margins_unchecked(&self, beta: &[f64]) -> Vec<f64> {
        self.rows()
            .zip(&self.labels)
            .map(|(x, y)| y * dot(x, beta))
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Coefficients of a linear classifier `x -> sign(<beta, x>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefVector(Vec<f64>);

impl CoefVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient vector".into()));
        }
        Ok(Self(coefficients))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }
}

impl Deref for CoefVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The three empirical risks of a coefficient vector on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub zero_one: f64,
    pub hinge: f64,
    pub logistic: f64,
}

impl RiskReport {
    pub fn evaluate(beta: &[f64], data: &LabeledDataset) -> Result<Self> {
        let m = data.margins(beta)?;
        Ok(Self {
            zero_one: mean_by(&m, zero_one_loss),
            hinge: mean_by(&m, hinge_loss),
            logistic: mean_by(&m, logistic_loss),
        })
    }
}

fn mean_by(margins: &[f64], loss: impl Fn(f64) -> f64) -> f64 {
    margins.iter().map(|&m| loss(m)).sum::<f64>() / margins.len() as f64
}

/// `1{m < 0}`: a zero margin counts as correct.
#[inline]
pub fn zero_one_loss(margin: f64) -> f64 {
    if margin < 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub fn hinge_loss(margin: f64) -> f64 {
    (1.0 - margin).max(0.0)
}

/// `log(1 + exp(-m))` without overflow for large `|m|`.
#[inline]
pub fn logistic_loss(margin: f64) -> f64 {
    (-margin).max(0.0) + (-margin.abs()).exp().ln_1p()
}

/// Fraction of strictly negative margins.
pub fn zero_one_risk(beta: &[f64], data: &LabeledDataset) -> Result<f64> {
    Ok(mean_by(&data.margins(beta)?, zero_one_loss))
}

pub fn hinge_risk(beta: &[f64], data: &LabeledDataset) -> Result<f64> {
    Ok(mean_by(&data.margins(beta)?, hinge_loss))
}

pub fn logistic_risk(beta: &[f64], data: &LabeledDataset) -> Result<f64> {
    Ok(mean_by(&data.margins(beta)?, logistic_loss))
}

/// Predicted label; a tie at zero goes to `+1`.
pub fn predict(beta: &[f64], x: &[f64]) -> Result<f64> {
    if beta.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            actual: x.len(),
        });
    }
    Ok(sign_label(dot(beta, x)))
}

#[inline]
pub(crate) fn sign_label(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn predict_all(beta: &[f64], data: &LabeledDataset) -> Result<Vec<f64>> {
    data.check_dim(beta.len())?;
    Ok(data.rows().map(|x| sign_label(dot(beta, x))).collect())
}

/// Fraction of points whose predicted label differs from the observed one.
pub fn misclassification_rate(beta: &[f64], test: &LabeledDataset) -> Result<f64> {
    let predicted = predict_all(beta, test)?;
    let wrong = predicted
        .iter()
        .zip(test.labels())
        .filter(|(p, y)| p != y)
        .count();
    Ok(wrong as f64 / test.n() as f64)
}
