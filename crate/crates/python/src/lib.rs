//! Python bindings for `hinge_ewa`.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hinge_ewa::bench::{fit_method, parse_methods, run_benchmark, LassoCache};
use hinge_ewa::config::RunConfig;
use hinge_ewa::gibbs::{GibbsConfig, GibbsTarget, LogDensityTarget, LossKind};
use hinge_ewa::io::{load_csv, standardize, write_csv};
use hinge_ewa::lasso::{cv_select, LassoConfig};
use hinge_ewa::model::{self, LabeledDataset};
use hinge_ewa::prior::{self, PriorConfig};
use hinge_ewa::samplers::{lmc_run, mala_run, posterior_mean, Chain, SamplerConfig};
use hinge_ewa::seeds::{stream, streams};
use hinge_ewa::simulation::{self, parse_scenario_name, RateKind, ScenarioSpec};
use hinge_ewa::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for hinge_ewa::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse_loss(loss: &str) -> PyResult<LossKind> {
    match loss {
        "hinge" => Ok(LossKind::Hinge),
        "logistic" => Ok(LossKind::Logistic),
        _ => Err(PyValueError::new_err(format!("loss must be 'hinge' or 'logistic', got {loss:?}"))),
    }
}

fn parse_config(config: Option<&str>) -> PyResult<RunConfig> {
    let cfg: RunConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => RunConfig::default(),
    };
    cfg.validate().py_err()?;
    Ok(cfg)
}

/// Labelled rows with labels in {-1, +1}.
#[pyclass(name = "Dataset", module = "hinge_ewa_py", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: LabeledDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Self> {
        let inner = LabeledDataset::from_rows(&features, labels).py_err()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_csv(path).py_err()?,
        })
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        write_csv(&self.inner, path).py_err()
    }

    /// Copy with every feature centered and scaled by its own statistics.
    fn standardized(&self) -> PyResult<Self> {
        let (inner, _) = standardize(&self.inner, &self.inner).py_err()?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<f64> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

#[pyclass(name = "Chain", module = "hinge_ewa_py")]
struct PyChain {
    inner: Chain,
}

#[pymethods]
impl PyChain {
    #[getter]
    fn samples(&self) -> Vec<Vec<f64>> {
        self.inner.samples.clone()
    }

    #[getter]
    fn burn_in(&self) -> usize {
        self.inner.burn_in
    }

    #[getter]
    fn acceptance_rate(&self) -> f64 {
        self.inner.acceptance_rate
    }

    #[getter]
    fn step_size_trace(&self) -> Vec<f64> {
        self.inner.step_size_trace.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Mean of the samples after burn-in.
    fn posterior_mean(&self) -> PyResult<Vec<f64>> {
        Ok(posterior_mean(&self.inner).py_err()?.into_inner())
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

/// The pseudo-posterior `exp(-lam * risk(beta)) * prior(beta)` on a dataset.
#[pyclass(name = "GibbsPosterior", module = "hinge_ewa_py")]
struct PyGibbs {
    data: LabeledDataset,
    cfg: GibbsConfig,
}

impl PyGibbs {
    fn sampler(n_iter: usize, burn_in: usize, step_size: f64, seed: u64, thin: usize, adapt: bool) -> SamplerConfig {
        SamplerConfig {
            step_size,
            n_iter,
            burn_in,
            adapt,
            thin,
            seed,
            ..SamplerConfig::default()
        }
    }
}

#[pymethods]
impl PyGibbs {
    #[new]
    #[pyo3(signature = (data, lam = 1.0, tau = 1.0, c1 = 1e6, loss = "hinge"))]
    fn new(data: &PyDataset, lam: f64, tau: f64, c1: f64, loss: &str) -> PyResult<Self> {
        let cfg = GibbsConfig {
            lambda: lam,
            loss: parse_loss(loss)?,
            prior: PriorConfig::new(tau, c1).py_err()?,
        };
        cfg.validate().py_err()?;
        Ok(Self {
            data: data.inner.clone(),
            cfg,
        })
    }

    fn log_density(&self, beta: Vec<f64>) -> PyResult<f64> {
        Ok(GibbsTarget::new(&self.data, self.cfg).py_err()?.log_density(&beta))
    }

    fn gradient(&self, beta: Vec<f64>) -> PyResult<Vec<f64>> {
        GibbsTarget::new(&self.data, self.cfg).py_err()?.gradient(&beta).py_err()
    }

    /// Unadjusted Langevin chain from `init` (zeros by default).
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (step_size, n_iter = 30000, burn_in = 5000, seed = 0, init = None, thin = 1))]
    fn lmc(
        &self,
        py: Python<'_>,
        step_size: f64,
        n_iter: usize,
        burn_in: usize,
        seed: u64,
        init: Option<Vec<f64>>,
        thin: usize,
    ) -> PyResult<PyChain> {
        let init = init.unwrap_or_else(|| vec![0.0; self.data.d()]);
        let cfg = Self::sampler(n_iter, burn_in, step_size, seed, thin, false);
        let chain = py.detach(|| {
            let target = GibbsTarget::new(&self.data, self.cfg)?;
            lmc_run(&target, &init, &cfg)
        });
        Ok(PyChain { inner: chain.py_err()? })
    }

    /// Metropolis-adjusted chain; the step adapts during burn-in when `adapt`.
    #[pyo3(signature = (step_size, n_iter = 30000, burn_in = 5000, seed = 0, init = None, thin = 1, adapt = true))]
    #[allow(clippy::too_many_arguments)]
    fn mala(
        &self,
        py: Python<'_>,
        step_size: f64,
        n_iter: usize,
        burn_in: usize,
        seed: u64,
        init: Option<Vec<f64>>,
        thin: usize,
        adapt: bool,
    ) -> PyResult<PyChain> {
        let init = init.unwrap_or_else(|| vec![0.0; self.data.d()]);
        let cfg = Self::sampler(n_iter, burn_in, step_size, seed, thin, adapt);
        let chain = py.detach(|| {
            let target = GibbsTarget::new(&self.data, self.cfg)?;
            mala_run(&target, &init, &cfg)
        });
        Ok(PyChain { inner: chain.py_err()? })
    }
}

#[pyfunction]
fn zero_one_risk(beta: Vec<f64>, data: &PyDataset) -> PyResult<f64> {
    model::zero_one_risk(&beta, &data.inner).py_err()
}

#[pyfunction]
fn hinge_risk(beta: Vec<f64>, data: &PyDataset) -> PyResult<f64> {
    model::hinge_risk(&beta, &data.inner).py_err()
}

#[pyfunction]
fn logistic_risk(beta: Vec<f64>, data: &PyDataset) -> PyResult<f64> {
    model::logistic_risk(&beta, &data.inner).py_err()
}

#[pyfunction]
fn predict(beta: Vec<f64>, x: Vec<f64>) -> PyResult<f64> {
    model::predict(&beta, &x).py_err()
}

#[pyfunction]
fn misclassification_rate(beta: Vec<f64>, data: &PyDataset) -> PyResult<f64> {
    model::misclassification_rate(&beta, &data.inner).py_err()
}

#[pyfunction]
#[pyo3(signature = (beta, tau = 1.0, c1 = 1e6))]
fn log_prior(beta: Vec<f64>, tau: f64, c1: f64) -> PyResult<f64> {
    let cfg = PriorConfig::new(tau, c1).py_err()?;
    Ok(prior::log_prior_unnormalized(&beta, &cfg))
}

#[pyfunction]
#[pyo3(signature = (beta, tau = 1.0, c1 = 1e6))]
fn grad_log_prior(beta: Vec<f64>, tau: f64, c1: f64) -> PyResult<Vec<f64>> {
    let cfg = PriorConfig::new(tau, c1).py_err()?;
    prior::grad_log_prior(&beta, &cfg).py_err()
}

#[pyfunction]
#[pyo3(signature = (d, tau = 1.0, c1 = 1e6, seed = 0))]
fn sample_prior(d: usize, tau: f64, c1: f64, seed: u64) -> PyResult<Vec<f64>> {
    let cfg = PriorConfig::new(tau, c1).py_err()?;
    prior::sample_prior(&cfg, d, &mut stream(seed, &[])).py_err()
}

#[pyfunction]
fn soft_threshold(z: f64, t: f64) -> f64 {
    hinge_ewa::lasso::soft_threshold(z, t)
}

/// Cross-validated logistic Lasso; returns a dict with the path scores and
/// the refitted coefficients.
#[pyfunction]
#[pyo3(signature = (data, folds = 10, seed = 0, fit_intercept = false))]
fn lasso_cv<'py>(
    py: Python<'py>,
    data: &PyDataset,
    folds: usize,
    seed: u64,
    fit_intercept: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = LassoConfig {
        folds,
        fit_intercept,
        ..LassoConfig::default()
    };
    let report = py
        .detach(|| cv_select(&data.inner, &cfg, &mut stream(seed, &[streams::LASSO_CV])))
        .py_err()?;
    let out = PyDict::new(py);
    out.set_item("grid", report.grid)?;
    out.set_item("cv_error", report.cv_error)?;
    out.set_item("folds_used", report.folds_used)?;
    out.set_item("selected_penalty", report.selected_penalty)?;
    out.set_item("beta", report.fit.beta.into_inner())?;
    out.set_item("intercept", report.fit.intercept)?;
    Ok(out)
}

/// `(train, test, beta_star)` for a scenario such as "I.3".
#[pyfunction]
#[pyo3(signature = (scenario, n = 50, d = 100, s0 = 10, seed = 0, test_size = 2000))]
fn simulate(
    scenario: &str,
    n: usize,
    d: usize,
    s0: usize,
    seed: u64,
    test_size: usize,
) -> PyResult<(PyDataset, PyDataset, Vec<f64>)> {
    let (setting, variant) = parse_scenario_name(scenario).py_err()?;
    let spec = ScenarioSpec::new(setting, variant, n, d, s0, seed).py_err()?;
    let truth = simulation::gen_truth(&spec, &mut stream(seed, &[streams::TRUTH])).py_err()?;
    let train = simulation::gen_labels(&truth, &spec, &mut stream(seed, &[streams::TRAIN_LABELS])).py_err()?;
    let test = simulation::gen_sample(
        &truth.beta_star,
        &spec,
        test_size,
        &mut stream(seed, &[streams::TEST_DESIGN]),
    )
    .py_err()?;
    Ok((
        PyDataset { inner: train },
        PyDataset { inner: test },
        truth.beta_star.into_inner(),
    ))
}

#[pyfunction]
#[pyo3(signature = (n, d, s_star, eps = 0.05, kind = "slow"))]
fn rate_bound(n: usize, d: usize, s_star: usize, eps: f64, kind: &str) -> PyResult<f64> {
    let kind: RateKind = kind.parse().py_err()?;
    simulation::rate_bound(n, d, s_star, eps, kind).py_err()
}

/// Fits one method. `config` is a JSON run configuration; its `method` is
/// replaced by `method` when given.
#[pyfunction]
#[pyo3(signature = (data, method = None, config = None, seed = None))]
fn fit<'py>(
    py: Python<'py>,
    data: &PyDataset,
    method: Option<&str>,
    config: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = parse_config(config)?;
    if let Some(m) = method {
        cfg.method = m.parse().py_err()?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let settings = cfg.fit_settings();
    let fitted = py
        .detach(|| fit_method(cfg.method, &data.inner, &settings, cfg.seed, &mut LassoCache::default()))
        .py_err()?;
    let out = PyDict::new(py);
    out.set_item("method", fitted.method.name())?;
    out.set_item("train_misclassification", fitted.misclassification_rate(&data.inner).py_err()?)?;
    out.set_item("beta", fitted.beta.into_inner())?;
    out.set_item("intercept", fitted.intercept)?;
    if let Some(c) = fitted.chain {
        out.set_item("acceptance_rate", c.acceptance_rate)?;
        out.set_item("step_size", c.step_size)?;
    }
    out.set_item("lasso_penalty", fitted.lasso_penalty)?;
    Ok(out)
}

/// Scenario benchmark; returns one dict per (scenario, method) cell.
#[pyfunction(name = "bench")]
#[pyo3(signature = (scenarios, methods = "h-lmc,lasso", reps = 30, n = 50, d = 100, s0 = 10, test_size = 2000, config = None))]
#[allow(clippy::too_many_arguments)]
fn run_bench<'py>(
    py: Python<'py>,
    scenarios: Vec<String>,
    methods: &str,
    reps: usize,
    n: usize,
    d: usize,
    s0: usize,
    test_size: usize,
    config: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = parse_config(config)?;
    let methods = parse_methods(methods).py_err()?;
    let specs = scenarios
        .iter()
        .map(|s| {
            let (setting, variant) = parse_scenario_name(s)?;
            ScenarioSpec::new(setting, variant, n, d, s0, cfg.seed)
        })
        .collect::<hinge_ewa::Result<Vec<_>>>()
        .py_err()?;
    let bcfg = cfg.benchmark_config(test_size, false);
    let result = py.detach(|| run_benchmark(&specs, &methods, reps, &bcfg)).py_err()?;
    result
        .cells
        .iter()
        .map(|c| {
            let row = PyDict::new(py);
            row.set_item("scenario", &c.scenario)?;
            row.set_item("method", c.method.name())?;
            row.set_item("mean_pct", c.mean_pct)?;
            row.set_item("sd_pct", c.sd_pct)?;
            row.set_item("reps", c.reps)?;
            row.set_item("failed", c.failed)?;
            Ok(row)
        })
        .collect()
}

#[pymodule]
fn hinge_ewa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyChain>()?;
    m.add_class::<PyGibbs>()?;
    m.add_function(wrap_pyfunction!(zero_one_risk, m)?)?;
    m.add_function(wrap_pyfunction!(hinge_risk, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_risk, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(misclassification_rate, m)?)?;
    m.add_function(wrap_pyfunction!(log_prior, m)?)?;
    m.add_function(wrap_pyfunction!(grad_log_prior, m)?)?;
    m.add_function(wrap_pyfunction!(sample_prior, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(lasso_cv, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(rate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
