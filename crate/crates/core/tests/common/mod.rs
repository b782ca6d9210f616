#![allow(dead_code)]

use hinge_ewa::prior::{grad_log_prior, log_prior_unnormalized};
use hinge_ewa::{LabeledDataset, LogDensityTarget, PriorConfig, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal in every coordinate.
pub struct Gaussian(pub usize);

impl LogDensityTarget for Gaussian {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density(&self, beta: &[f64]) -> f64 {
        -0.5 * beta.iter().map(|b| b * b).sum::<f64>()
    }
    fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(beta.iter().map(|b| -b).collect())
    }
}

/// Constant density on all of R^d.
pub struct Flat(pub usize);

impl LogDensityTarget for Flat {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; beta.len()])
    }
}

/// The prior alone as a sampling target.
pub struct PriorOnly {
    pub d: usize,
    pub cfg: PriorConfig,
}

impl LogDensityTarget for PriorOnly {
    fn dim(&self) -> usize {
        self.d
    }
    fn log_density(&self, beta: &[f64]) -> f64 {
        log_prior_unnormalized(beta, &self.cfg)
    }
    fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        grad_log_prior(beta, &self.cfg)
    }
}

/// Rows with iid `N(0, scale^2)` entries labelled by `sign(<x, w>)`, with
/// the labels of `flips` rows reversed.
pub fn linear_fixture(n: usize, w: &[f64], scale: f64, flips: &[usize], seed: u64) -> LabeledDataset {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            w.iter()
                .map(|_| scale * r.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        })
        .collect();
    let labels = rows
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let s: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let y = if s >= 0.0 { 1.0 } else { -1.0 };
            if flips.contains(&i) {
                -y
            } else {
                y
            }
        })
        .collect();
    LabeledDataset::from_rows(&rows, labels).unwrap()
}

/// Composite Simpson rule on `[a, b]` with `m` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    assert!(m.is_multiple_of(2));
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// CDF of the one-dimensional prior density `(tau^2 + b^2)^-2` on
/// `[-limit, limit]`, tabulated by cumulative Simpson sums.
pub struct QuadratureCdf {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl QuadratureCdf {
    pub fn prior(tau: f64, limit: f64, cells: usize) -> Self {
        let f = |b: f64| (tau * tau + b * b).powi(-2);
        let h = 2.0 * limit / cells as f64;
        let mut grid = vec![-limit];
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for k in 0..cells {
            let a = -limit + k as f64 * h;
            acc += simpson(f, a, a + h, 4);
            grid.push(a + h);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self { grid, cdf }
    }

    pub fn at(&self, x: f64) -> f64 {
        match self.grid.iter().position(|&g| g >= x) {
            None => 1.0,
            Some(0) => 0.0,
            Some(k) => {
                let t = (x - self.grid[k - 1]) / (self.grid[k] - self.grid[k - 1]);
                self.cdf[k - 1] + t * (self.cdf[k] - self.cdf[k - 1])
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let k = self.cdf.iter().position(|&c| c >= p).unwrap();
        let t = (p - self.cdf[k - 1]) / (self.cdf[k] - self.cdf[k - 1]);
        self.grid[k - 1] + t * (self.grid[k] - self.grid[k - 1])
    }
}

pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}
