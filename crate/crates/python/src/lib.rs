//! Python module `quadvar`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use quadvar_core::rates::{self, Exponent};
use quadvar_core::simulate::{self, EmpiricalStats};
use quadvar_core::tvbound::TvBoundEvaluator;
use quadvar_core::{cumulants, CumulantReport, SamplerConfig, TvBoundConfig};

fn err(e: quadvar_core::Error) -> PyErr {
    if e.is_numeric() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn exponent(raw: &str) -> PyResult<Exponent> {
    raw.parse().map_err(err)
}

/// Covariance function of a stationary Gaussian sequence with `rho(0) = 1`.
#[pyclass(name = "CovarianceModel", frozen)]
pub struct CovarianceModel {
    inner: quadvar_core::CovarianceModel,
}

#[pymethods]
impl CovarianceModel {
    #[staticmethod]
    fn fgn(hurst: f64) -> PyResult<Self> {
        let inner = quadvar_core::CovarianceModel::fgn(hurst).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn iid() -> Self {
        Self {
            inner: quadvar_core::CovarianceModel::iid(),
        }
    }

    #[staticmethod]
    fn tabulated(values: Vec<f64>) -> PyResult<Self> {
        let inner = quadvar_core::CovarianceModel::tabulated(values).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (hurst, beta, negative = false))]
    fn log_power(hurst: f64, beta: f64, negative: bool) -> PyResult<Self> {
        let inner = quadvar_core::CovarianceModel::log_power(hurst, beta, negative).map_err(err)?;
        Ok(Self { inner })
    }

    /// Covariance of the log-modulated spectral density, tabulated up to `k_max`.
    #[staticmethod]
    fn spectral(hurst: f64, beta: f64, k_max: usize) -> PyResult<Self> {
        let density = quadvar_core::SpectralDensity::log_modulated(hurst, beta).map_err(err)?;
        let inner = quadvar_core::CovarianceModel::from_spectral(&density, k_max).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    fn rho(&self, k: i64) -> f64 {
        self.inner.rho(k)
    }

    fn autocovariances(&self, len: usize) -> Vec<f64> {
        self.inner.autocovariances(len)
    }

    fn __repr__(&self) -> String {
        format!("CovarianceModel({})", self.inner.id())
    }
}

fn report_dict<'py>(py: Python<'py>, r: &CumulantReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("v_n", r.v_n)?;
    d.set_item("kappa3", r.kappa3)?;
    d.set_item("kappa3_lower", r.kappa3_lower)?;
    d.set_item("kappa3_upper", r.kappa3_upper)?;
    d.set_item("kappa4", r.kappa4)?;
    d.set_item("kappa4_bound", r.kappa4_bound)?;
    d.set_item("domination_ratio", r.domination_ratio)?;
    d.set_item("s32", r.s32)?;
    d.set_item("s43", r.s43)?;
    Ok(d)
}

/// Exact cumulants of `F_n` for every `n` up to `max_n`.
#[pyclass(name = "CumulantEngine", frozen)]
pub struct CumulantEngine {
    inner: quadvar_core::CumulantEngine,
}

impl CumulantEngine {
    fn check(&self, n: usize) -> PyResult<()> {
        if n == 0 || n > self.inner.max_n() {
            return Err(PyValueError::new_err(format!("n must lie in 1..={}", self.inner.max_n())));
        }
        Ok(())
    }
}

#[pymethods]
impl CumulantEngine {
    #[new]
    fn new(model: &CovarianceModel, max_n: usize) -> PyResult<Self> {
        if max_n == 0 {
            return Err(PyValueError::new_err("max_n must be positive"));
        }
        Ok(Self {
            inner: quadvar_core::CumulantEngine::new(&model.inner, max_n),
        })
    }

    fn variance_vn(&self, n: usize) -> PyResult<f64> {
        self.check(n)?;
        Ok(self.inner.variance_vn(n))
    }

    fn kappa3(&self, n: usize) -> PyResult<f64> {
        self.check(n)?;
        Ok(self.inner.kappa3(n))
    }

    fn kappa4(&self, n: usize) -> PyResult<f64> {
        self.check(n)?;
        Ok(self.inner.kappa4(n))
    }

    fn kappa3_bounds(&self, n: usize) -> PyResult<(f64, f64)> {
        self.check(n)?;
        Ok(self.inner.kappa3_bounds(n))
    }

    fn domination_ratio(&self, n: usize) -> PyResult<f64> {
        self.check(n)?;
        self.inner.domination_ratio(n).map_err(err)
    }

    fn report<'py>(&self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyDict>> {
        self.check(n)?;
        report_dict(py, &self.inner.report(n))
    }
}

#[pyfunction]
fn kappa3_exact(model: &CovarianceModel, n: usize) -> PyResult<f64> {
    CumulantEngine::new(model, n)?.kappa3(n)
}

#[pyfunction]
fn kappa4_exact(model: &CovarianceModel, n: usize) -> PyResult<f64> {
    CumulantEngine::new(model, n)?.kappa4(n)
}

/// Rate regime of `(H, beta)`; exponents accept fractions such as `"2/3"`.
#[pyfunction]
fn classify_rate<'py>(py: Python<'py>, hurst: &str, beta: &str) -> PyResult<Bound<'py, PyDict>> {
    let regime = rates::classify_rate(exponent(hurst)?, exponent(beta)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("regime", regime.case.id())?;
    d.set_item("M_n", regime.formula.map(|f| f.to_string()))?;
    d.set_item("v_n_converges", regime.v_n_converges)?;
    Ok(d)
}

/// `(n, |kappa3| / M_n)` rows with the band factor and log-log slope.
#[pyfunction]
fn commensurability_scan<'py>(
    py: Python<'py>,
    model: &CovarianceModel,
    hurst: &str,
    beta: &str,
    n_grid: Vec<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let scan = rates::commensurability_scan(&model.inner, exponent(hurst)?, exponent(beta)?, &n_grid).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("regime", scan.regime.case.id())?;
    d.set_item("rows", scan.rows.iter().map(|r| (r.n, r.kappa3, r.m_n, r.ratio)).collect::<Vec<_>>())?;
    d.set_item("band_factor", scan.band_factor)?;
    d.set_item("slope", scan.slope)?;
    Ok(d)
}

/// `F_n` for `paths` exact Gaussian paths of length `n`.
#[pyfunction]
#[pyo3(signature = (model, n, paths, seed, workers = 1))]
fn sample_fn(py: Python<'_>, model: &CovarianceModel, n: usize, paths: usize, seed: u64, workers: usize) -> PyResult<Vec<f64>> {
    let cfg = SamplerConfig::new(model.inner.clone(), n, paths, seed).with_workers(workers);
    py.detach(|| simulate::sample_fn_values(&cfg)).map_err(err)
}

fn stats_dict<'py>(py: Python<'py>, s: &EmpiricalStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("samples", s.samples)?;
    d.set_item("mean", s.mean)?;
    d.set_item("variance", s.variance)?;
    d.set_item("kappa3", s.kappa3)?;
    d.set_item("kappa4", s.kappa4)?;
    d.set_item("se_mean", s.se_mean)?;
    d.set_item("se_variance", s.se_variance)?;
    d.set_item("se_kappa3", s.se_kappa3)?;
    d.set_item("se_kappa4", s.se_kappa4)?;
    d.set_item("ks_distance", s.ks_distance)?;
    Ok(d)
}

/// Mean, variance, third and fourth cumulants with jackknife standard errors.
#[pyfunction]
fn empirical_stats<'py>(py: Python<'py>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    stats_dict(py, &simulate::empirical_stats(&values).map_err(err)?)
}

/// Finite-grid approximation of the second-chaos limit of `F_n` for `H > 3/4`.
#[pyclass(name = "RosenblattApproximant", frozen)]
pub struct RosenblattApproximant {
    inner: simulate::RosenblattApproximant,
}

#[pymethods]
impl RosenblattApproximant {
    #[new]
    #[pyo3(signature = (hurst, half_size = 256))]
    fn new(py: Python<'_>, hurst: f64, half_size: usize) -> PyResult<Self> {
        let inner = py
            .detach(|| simulate::build_rosenblatt_default(hurst, half_size))
            .map_err(err)?;
        Ok(Self { inner })
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn cumulant(&self, p: u32) -> PyResult<f64> {
        if p < 2 {
            return Err(PyValueError::new_err("cumulant order must be at least 2"));
        }
        Ok(self.inner.cumulant(p))
    }

    fn kappa3(&self) -> f64 {
        self.inner.kappa3()
    }

    fn kappa4(&self) -> f64 {
        self.inner.kappa4()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn gaussian_variance(&self) -> f64 {
        self.inner.gaussian_variance
    }

    fn sample(&self, py: Python<'_>, count: usize, seed: u64) -> Vec<f64> {
        py.detach(|| self.inner.sample(count, seed))
    }
}

/// `(T1, T2, T3, bound)` of the total-variation bound at each `n`.
#[pyfunction]
#[pyo3(signature = (hurst, beta, n_grid, alpha = 0.5, c_finf = 1.0))]
fn tv_bound(
    py: Python<'_>,
    hurst: f64,
    beta: f64,
    n_grid: Vec<usize>,
    alpha: f64,
    c_finf: f64,
) -> PyResult<Vec<(usize, f64, f64, f64, f64)>> {
    let max_n = n_grid.iter().copied().max().unwrap_or(0);
    let mut cfg = TvBoundConfig::new(hurst, beta).with_alpha(alpha);
    cfg.c_finf = c_finf;
    let terms = py
        .detach(|| TvBoundEvaluator::new(cfg, max_n.max(8))?.scan(&n_grid))
        .map_err(err)?;
    Ok(terms.iter().map(|t| (t.n, t.t1, t.t2, t.t3, t.bound(c_finf))).collect())
}

#[pyfunction]
fn geometric_grid(start: usize, stop: usize, factor: usize) -> PyResult<Vec<usize>> {
    if start == 0 || factor < 2 {
        return Err(PyValueError::new_err("need start >= 1 and factor >= 2"));
    }
    Ok(cumulants::geometric_grid(start, stop, factor))
}

#[pymodule]
fn quadvar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<CovarianceModel>()?;
    m.add_class::<CumulantEngine>()?;
    m.add_class::<RosenblattApproximant>()?;
    m.add_function(wrap_pyfunction!(kappa3_exact, m)?)?;
    m.add_function(wrap_pyfunction!(kappa4_exact, m)?)?;
    m.add_function(wrap_pyfunction!(classify_rate, m)?)?;
    m.add_function(wrap_pyfunction!(commensurability_scan, m)?)?;
    m.add_function(wrap_pyfunction!(sample_fn, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_stats, m)?)?;
    m.add_function(wrap_pyfunction!(tv_bound, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_grid, m)?)?;
    Ok(())
}
