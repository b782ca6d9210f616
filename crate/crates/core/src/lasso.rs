//! l1-penalized logistic regression fitted by accelerated proximal gradient,
//! with K-fold cross-validation over a penalty path.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, logistic_loss, sign_label, CoefVector, LabeledDataset};

/// Proximal operator of `t * |.|`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyGrid {
    /// `count` log-spaced values from the smallest all-zero penalty down to
    /// `min_ratio` times it.
    Auto { count: usize, min_ratio: f64 },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub penalty_grid: PenaltyGrid,
    pub max_iter: usize,
    /// Relative objective decrease (and KKT residual) at which to stop.
    pub tol: f64,
    pub folds: usize,
    /// Unpenalized intercept.
    pub fit_intercept: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            penalty_grid: PenaltyGrid::Auto {
                count: 50,
                min_ratio: 1e-4,
            },
            max_iter: 1_000,
            tol: 1e-6,
            folds: 10,
            fit_intercept: false,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be at least 2".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("need tol > 0 and max_iter > 0".into()));
        }
        match &self.penalty_grid {
            PenaltyGrid::Auto { count, min_ratio } => {
                if *count == 0 || !(*min_ratio > 0.0 && *min_ratio <= 1.0) {
                    return Err(Error::InvalidConfig("bad automatic penalty grid".into()));
                }
            }
            PenaltyGrid::Explicit(grid) => {
                if grid.is_empty() || grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
                    return Err(Error::InvalidConfig("penalties must be positive".into()));
                }
                if grid.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::InvalidConfig(
                        "penalty grid must be strictly descending".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Concrete grid for `data`.
    pub fn grid_for(&self, data: &LabeledDataset) -> Vec<f64> {
        match &self.penalty_grid {
            PenaltyGrid::Explicit(g) => g.clone(),
            PenaltyGrid::Auto { count, min_ratio } => {
                let top = lambda_max(data, self.fit_intercept).max(f64::MIN_POSITIVE);
                if *count == 1 {
                    return vec![top];
                }
                let step = min_ratio.ln() / (*count - 1) as f64;
                (0..*count).map(|k| top * (step * k as f64).exp()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: CoefVector,
    pub intercept: f64,
    pub penalty: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        sign_label(dot(&self.beta, x) + self.intercept)
    }

    pub fn misclassification_rate(&self, data: &LabeledDataset) -> Result<f64> {
        data.check_dim(self.beta.len())?;
        let wrong = data
            .rows()
            .zip(data.labels())
            .filter(|(x, &y)| self.predict(x) != y)
            .count();
        Ok(wrong as f64 / data.n() as f64)
    }
}

/// Smooth part: mean logistic loss, with gradient.
struct Smooth<'a> {
    data: &'a LabeledDataset,
    intercept: bool,
    margins: Vec<f64>,
}

impl<'a> Smooth<'a> {
    fn new(data: &'a LabeledDataset, intercept: bool) -> Self {
        Self {
            data,
            intercept,
            margins: vec![0.0; data.n()],
        }
    }

    /// Parameter layout: `d` coefficients, then the intercept if fitted.
    fn value(&mut self, p: &[f64]) -> f64 {
        let d = self.data.d();
        let b = if self.intercept { p[d] } else { 0.0 };
        let mut total = 0.0;
        for ((m, x), y) in self.margins.iter_mut().zip(self.data.rows()).zip(self.data.labels()) {
            *m = y * (dot(x, &p[..d]) + b);
            total += logistic_loss(*m);
        }
        total / self.data.n() as f64
    }

    /// Gradient at the point of the last `value` call.
    fn gradient(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let d = self.data.d();
        let inv_n = 1.0 / self.data.n() as f64;
        for ((x, &y), &m) in self.data.rows().zip(self.data.labels()).zip(&self.margins) {
            let c = -inv_n * y / (1.0 + m.exp());
            for (g, xi) in out[..d].iter_mut().zip(x) {
                *g += c * xi;
            }
            if self.intercept {
                out[d] += c;
            }
        }
    }
}

fn l1(p: &[f64]) -> f64 {
    p.iter().map(|v| v.abs()).sum()
}

/// Largest KKT violation of the penalized problem.
pub fn kkt_residual(grad: &[f64], beta: &[f64], penalty: f64) -> f64 {
    grad.iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g + penalty * b.signum()).abs()
            } else {
                (g.abs() - penalty).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Gradient of the mean logistic loss (no penalty) at `beta`, intercept `b`.
pub fn logistic_gradient(data: &LabeledDataset, beta: &[f64], intercept: Option<f64>) -> Vec<f64> {
    let mut p = beta.to_vec();
    if let Some(b) = intercept {
        p.push(b);
    }
    let mut s = Smooth::new(data, intercept.is_some());
    s.value(&p);
    let mut g = vec![0.0; p.len()];
    s.gradient(&mut g);
    g
}

/// Smallest penalty for which the zero vector is optimal.
pub fn lambda_max(data: &LabeledDataset, fit_intercept: bool) -> f64 {
    let intercept = fit_intercept.then(|| {
        let pos = data.labels().iter().filter(|&&y| y > 0.0).count() as f64;
        let frac = (pos / data.n() as f64).clamp(1e-12, 1.0 - 1e-12);
        (frac / (1.0 - frac)).ln()
    });
    let zeros = vec![0.0; data.d()];
    let g = logistic_gradient(data, &zeros, intercept);
    g[..data.d()].iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Minimizes `mean logistic loss + penalty * |beta|_1`.
pub fn logistic_lasso_fit(data: &LabeledDataset, penalty: f64, cfg: &LassoConfig) -> Result<LassoFit> {
    fit_from(data, penalty, cfg, None)
}

/// As [`logistic_lasso_fit`], started from `warm` when given.
pub fn fit_from(
    data: &LabeledDataset,
    penalty: f64,
    cfg: &LassoConfig,
    warm: Option<&LassoFit>,
) -> Result<LassoFit> {
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::InvalidConfig(format!("penalty must be positive, got {penalty}")));
    }
    let d = data.d();
    let dim = d + usize::from(cfg.fit_intercept);
    let mut x = vec![0.0; dim];
    let mut lipschitz = 1.0;
    if let Some(w) = warm {
        data.check_dim(w.beta.len())?;
        x[..d].copy_from_slice(&w.beta);
        if cfg.fit_intercept {
            x[d] = w.intercept;
        }
    }

    let mut smooth = Smooth::new(data, cfg.fit_intercept);
    let objective = |f: f64, p: &[f64]| f + penalty * l1(&p[..d]);
    let mut obj_x = objective(smooth.value(&x), &x);
    if !obj_x.is_finite() {
        return Err(Error::NonFinite("lasso objective at the starting point".into()));
    }

    let mut y = x.clone();
    let mut t_momentum = 1.0f64;
    let mut grad = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut grad_x = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        let f_y = smooth.value(&y);
        smooth.gradient(&mut grad);

        lipschitz *= 0.9;
        let obj_z = loop {
            let step = 1.0 / lipschitz;
            for j in 0..dim {
                let v = y[j] - step * grad[j];
                z[j] = if j < d { soft_threshold(v, step * penalty) } else { v };
            }
            let f_z = smooth.value(&z);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for j in 0..dim {
                let diff = z[j] - y[j];
                lin += grad[j] * diff;
                sq += diff * diff;
            }
            if f_z <= f_y + lin + 0.5 * lipschitz * sq + 1e-15 * f_y.abs() {
                break objective(f_z, &z);
            }
            lipschitz *= 2.0;
            if !lipschitz.is_finite() {
                return Err(Error::NonFinite("lasso line search".into()));
            }
        };
        if !obj_z.is_finite() {
            return Err(Error::NonFinite("lasso objective".into()));
        }

        if obj_z > obj_x {
            // momentum overshoot: restart from the current iterate
            t_momentum = 1.0;
            y.copy_from_slice(&x);
            continue;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_momentum * t_momentum).sqrt());
        let beta_mom = (t_momentum - 1.0) / t_next;
        for j in 0..dim {
            y[j] = z[j] + beta_mom * (z[j] - x[j]);
        }
        t_momentum = t_next;
        let rel = (obj_x - obj_z) / obj_x.abs().max(f64::MIN_POSITIVE);
        std::mem::swap(&mut x, &mut z);
        obj_x = obj_z;

        if rel < cfg.tol {
            smooth.value(&x);
            smooth.gradient(&mut grad_x);
            let mut kkt = kkt_residual(&grad_x[..d], &x[..d], penalty);
            if cfg.fit_intercept {
                kkt = kkt.max(grad_x[d].abs());
            }
            if kkt <= cfg.tol {
                converged = true;
                break;
            }
        }
    }
    let intercept = if cfg.fit_intercept { x[d] } else { 0.0 };
    x.truncate(d);
    Ok(LassoFit {
        beta: CoefVector::new(x)?,
        intercept,
        penalty,
        objective: obj_x,
        iterations,
        converged,
    })
}

/// Fits every penalty of `grid` in order, warm-starting each from the last.
pub fn fit_path(data: &LabeledDataset, grid: &[f64], cfg: &LassoConfig) -> Result<Vec<LassoFit>> {
    let mut fits: Vec<LassoFit> = Vec::with_capacity(grid.len());
    for &p in grid {
        let fit = fit_from(data, p, cfg, fits.last())?;
        fits.push(fit);
    }
    Ok(fits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<f64>,
    /// Mean validation misclassification per penalty.
    pub cv_error: Vec<f64>,
    pub folds_used: usize,
    pub selected_penalty: f64,
    pub fit: LassoFit,
}

/// Picks the penalty with the smallest mean validation misclassification
/// (ties go to the larger penalty) and refits on all of `data`.
pub fn cv_select<R: Rng + ?Sized>(data: &LabeledDataset, cfg: &LassoConfig, rng: &mut R) -> Result<CvReport> {
    cfg.validate()?;
    if data.n() < cfg.folds {
        return Err(Error::InvalidConfig(format!(
            "{} rows cannot be split into {} folds",
            data.n(),
            cfg.folds
        )));
    }
    let grid = cfg.grid_for(data);
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.shuffle(rng);
    let mut fold_of = vec![0usize; data.n()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % cfg.folds;
    }

    let per_fold: Vec<Option<Vec<f64>>> = (0..cfg.folds)
        .into_par_iter()
        .map(|k| -> Result<Option<Vec<f64>>> {
            let train_idx: Vec<usize> = (0..data.n()).filter(|&i| fold_of[i] != k).collect();
            let valid_idx: Vec<usize> = (0..data.n()).filter(|&i| fold_of[i] == k).collect();
            let train = data.subset(&train_idx)?;
            let first = train.labels()[0];
            if train.labels().iter().all(|&y| y == first) {
                log::warn!("fold {k}: training part has a single class; skipped");
                return Ok(None);
            }
            let valid = data.subset(&valid_idx)?;
            let fits = fit_path(&train, &grid, cfg)?;
            fits.iter()
                .map(|f| f.misclassification_rate(&valid))
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect::<Result<Vec<_>>>()?;

    let used: Vec<&Vec<f64>> = per_fold.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::DegenerateFolds);
    }
    let cv_error: Vec<f64> = (0..grid.len())
        .map(|j| used.iter().map(|e| e[j]).sum::<f64>() / used.len() as f64)
        .collect();
    // grid is descending, so the first minimum is the largest penalty
    let mut best = 0;
    for j in 1..grid.len() {
        if cv_error[j] < cv_error[best] {
            best = j;
        }
    }
    let path = fit_path(data, &grid[..=best], cfg)?;
    let fit = path.into_iter().last().expect("non-empty path");
    Ok(CvReport {
        selected_penalty: grid[best],
        grid,
        cv_error,
        folds_used: used.len(),
        fit,
    })
}
