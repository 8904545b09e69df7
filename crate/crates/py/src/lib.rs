//! Python bindings: weight vectors, laws, bounds, exact tails, simulation and
//! the verification campaigns.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tailsand::bounds::{self, MomentMode};
use tailsand::harness::{self, SandwichConfig};
use tailsand::montecarlo::{self, Representation};
use tailsand::{
    oracle, special, weight_stats, Distribution as Law, Error, WeightVector as Weights,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NumericFailure { .. } | Error::IllConditioned { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Positive, finite summand weights.
#[pyclass(name = "WeightVector", frozen, from_py_object, module = "pytailsand")]
#[derive(Clone)]
struct PyWeightVector(Weights);

#[pymethods]
impl PyWeightVector {
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        Weights::new(values).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("WeightVector([{}])", self.0)
    }
}

/// Law of each summand: exponential, gamma(shape) or laplace.
#[pyclass(name = "Distribution", frozen, from_py_object, module = "pytailsand")]
#[derive(Clone)]
struct PyDistribution(Law);

#[pymethods]
impl PyDistribution {
    #[new]
    #[pyo3(signature = (kind, shape=None))]
    fn new(kind: &str, shape: Option<f64>) -> PyResult<Self> {
        parse_law(kind, shape).map(Self)
    }

    #[staticmethod]
    fn exponential() -> Self {
        Self(Law::Exponential)
    }

    #[staticmethod]
    fn laplace() -> Self {
        Self(Law::Laplace)
    }

    #[staticmethod]
    fn gamma(shape: f64) -> PyResult<Self> {
        Law::gamma(shape).map(Self).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn __repr__(&self) -> String {
        format!("Distribution({})", self.0)
    }
}

fn parse_law(kind: &str, shape: Option<f64>) -> PyResult<Law> {
    match (kind.to_ascii_lowercase().as_str(), shape) {
        ("exponential", None) => Ok(Law::Exponential),
        ("laplace", None) => Ok(Law::Laplace),
        ("gamma", Some(s)) => Law::gamma(s).map_err(to_py),
        ("gamma", None) => Err(PyValueError::new_err("gamma needs a shape")),
        (k, Some(_)) if k == "exponential" || k == "laplace" => {
            Err(PyValueError::new_err("shape only applies to gamma"))
        }
        (k, _) => Err(PyValueError::new_err(format!("unknown distribution '{k}'"))),
    }
}

#[derive(FromPyObject)]
enum WeightsArg {
    Vector(PyWeightVector),
    List(Vec<f64>),
}

impl WeightsArg {
    fn get(self) -> PyResult<Weights> {
        match self {
            WeightsArg::Vector(w) => Ok(w.0),
            WeightsArg::List(v) => Weights::new(v).map_err(to_py),
        }
    }
}

#[derive(FromPyObject)]
enum LawArg {
    Law(PyDistribution),
    Name(String),
}

impl LawArg {
    fn get(self) -> PyResult<Law> {
        match self {
            LawArg::Law(d) => Ok(d.0),
            LawArg::Name(n) => parse_law(&n, None),
        }
    }
}

#[pyclass(name = "BoundValue", frozen, get_all, module = "pytailsand")]
struct PyBoundValue {
    value: f64,
    log_value: f64,
    kind: &'static str,
    valid: bool,
}

impl From<bounds::BoundValue> for PyBoundValue {
    fn from(b: bounds::BoundValue) -> Self {
        Self {
            value: b.value,
            log_value: b.log_value,
            kind: b.kind.as_str(),
            valid: b.valid,
        }
    }
}

#[pymethods]
impl PyBoundValue {
    fn __repr__(&self) -> String {
        format!(
            "BoundValue({}={:e}, valid={})",
            self.kind, self.value, self.valid
        )
    }
}

#[pyclass(name = "MCEstimate", frozen, get_all, module = "pytailsand")]
struct PyMCEstimate {
    p_hat: f64,
    stderr: f64,
    ci_low: f64,
    ci_high: f64,
    n: u64,
    hits: u64,
    method: &'static str,
    seed: u64,
    tilt_theta: f64,
}

impl From<montecarlo::MCEstimate> for PyMCEstimate {
    fn from(e: montecarlo::MCEstimate) -> Self {
        Self {
            p_hat: e.p_hat,
            stderr: e.stderr,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            n: e.n,
            hits: e.hits,
            method: e.method.as_str(),
            seed: e.seed,
            tilt_theta: e.tilt_theta,
        }
    }
}

#[pymethods]
impl PyMCEstimate {
    fn __repr__(&self) -> String {
        format!(
            "MCEstimate(p_hat={:e}, stderr={:e}, ci=[{:e}, {:e}], method={})",
            self.p_hat, self.stderr, self.ci_low, self.ci_high, self.method
        )
    }
}

#[pyfunction(name = "weight_stats")]
fn py_weight_stats<'py>(
    py: Python<'py>,
    w: WeightsArg,
    dist: LawArg,
) -> PyResult<Bound<'py, PyDict>> {
    let s = weight_stats(&w.get()?, dist.get()?);
    let d = PyDict::new(py);
    d.set_item("sigma", s.sigma)?;
    d.set_item("a_max", s.a_max)?;
    d.set_item("alpha_sym", s.alpha_sym)?;
    d.set_item("alpha_exp", s.alpha_exp)?;
    d.set_item("l1", s.l1)?;
    d.set_item("l2", s.l2)?;
    d.set_item("mean_s", s.mean_s)?;
    Ok(d)
}

#[pyfunction]
fn h_closed(u: f64) -> PyResult<f64> {
    special::h_closed(u).map_err(to_py)
}

#[pyfunction]
fn h_sup(u: f64) -> PyResult<f64> {
    special::h_sup(u).map(|h| h.value).map_err(to_py)
}

/// Lower and upper tail bounds at `t` for the law's sandwich, as a pair.
#[pyfunction]
fn sandwich_bounds(dist: LawArg, w: WeightsArg, t: f64) -> PyResult<(PyBoundValue, PyBoundValue)> {
    let (lo, hi) = harness::sandwich_bounds(dist.get()?, &w.get()?, t).map_err(to_py)?;
    Ok((lo.into(), hi.into()))
}

#[pyfunction]
fn janson_upper(w: WeightsArg, t: f64) -> PyResult<PyBoundValue> {
    let s = weight_stats(&w.get()?, Law::Exponential);
    bounds::janson_upper(t, &s).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn janson_lower(w: WeightsArg, t: f64) -> PyResult<PyBoundValue> {
    let s = weight_stats(&w.get()?, Law::Exponential);
    bounds::janson_lower(t, &s).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn laplace_upper(w: WeightsArg, t: f64) -> PyResult<PyBoundValue> {
    let s = weight_stats(&w.get()?, Law::Laplace);
    bounds::laplace_upper(t, &s).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn laplace_lower(w: WeightsArg, t: f64) -> PyResult<PyBoundValue> {
    let s = weight_stats(&w.get()?, Law::Laplace);
    bounds::laplace_lower(t, &s).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn generic_upper(dist: LawArg, w: WeightsArg, t: f64) -> PyResult<PyBoundValue> {
    bounds::generic_upper(dist.get()?, &w.get()?, t)
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn generic_lower(dist: LawArg, w: WeightsArg, t: f64, p_ge_mean: f64) -> PyResult<PyBoundValue> {
    bounds::generic_lower(dist.get()?, &w.get()?, t, p_ge_mean)
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn pz_bound(c: f64) -> PyResult<f64> {
    bounds::pz_bound(c).map_err(to_py)
}

#[pyfunction]
fn r_function(dist: LawArg, v: f64) -> PyResult<f64> {
    bounds::r_function(dist.get()?, v).map_err(to_py)
}

#[pyfunction]
fn s_inequality_upper(t: f64, p_ge_mean: f64) -> PyResult<PyBoundValue> {
    bounds::s_inequality_upper(t, p_ge_mean)
        .map(Into::into)
        .map_err(to_py)
}

/// `(lower, upper)` bounds on `(E|S|^p)^{1/p}`; mode is "proof_derived" or "paper".
#[pyfunction]
#[pyo3(signature = (p, w, mode="proof_derived"))]
fn moment_bounds(p: f64, w: WeightsArg, mode: &str) -> PyResult<(f64, f64)> {
    let mode = match mode {
        "proof_derived" => MomentMode::ProofDerived,
        "paper" => MomentMode::Paper,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    let b = bounds::moment_bounds(p, &w.get()?, mode).map_err(to_py)?;
    Ok((b.lower, b.upper))
}

/// `(value, source)` for `P(S > threshold)`.
#[pyfunction]
fn exact_tail(dist: LawArg, w: WeightsArg, threshold: f64) -> PyResult<(f64, &'static str)> {
    let e = oracle::exact_tail(dist.get()?, &w.get()?, threshold).map_err(to_py)?;
    Ok((e.value, e.source.as_str()))
}

#[pyfunction]
fn cf_tail_inversion(dist: LawArg, w: WeightsArg, threshold: f64) -> PyResult<f64> {
    oracle::cf_tail_inversion(dist.get()?, &w.get()?, threshold).map_err(to_py)
}

#[pyfunction]
fn laplace_abs_moment(w: WeightsArg, p: f64) -> PyResult<f64> {
    oracle::laplace_abs_moment(&w.get()?, p).map_err(to_py)
}

#[pyfunction]
fn p_ge_mean(dist: LawArg, w: WeightsArg) -> PyResult<f64> {
    oracle::p_ge_mean(dist.get()?, &w.get()?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (dist, w, n, seed, representation="direct"))]
fn sample_sum(
    dist: LawArg,
    w: WeightsArg,
    n: usize,
    seed: u64,
    representation: &str,
) -> PyResult<Vec<f64>> {
    let repr = match representation {
        "direct" => Representation::Direct,
        "gaussian_mixture" => Representation::GaussianMixture,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown representation '{other}'"
            )))
        }
    };
    montecarlo::sample_sum(dist.get()?, &w.get()?, n, seed, repr).map_err(to_py)
}

#[pyfunction]
fn mc_tail(
    dist: LawArg,
    w: WeightsArg,
    threshold: f64,
    n: usize,
    seed: u64,
) -> PyResult<PyMCEstimate> {
    montecarlo::mc_tail(dist.get()?, &w.get()?, threshold, n, seed)
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn is_tail(
    dist: LawArg,
    w: WeightsArg,
    threshold: f64,
    n: usize,
    seed: u64,
) -> PyResult<PyMCEstimate> {
    montecarlo::is_tail(dist.get()?, &w.get()?, threshold, n, seed)
        .map(Into::into)
        .map_err(to_py)
}

/// `(statistic, p_value)` of the two-sample Kolmogorov–Smirnov test.
#[pyfunction]
fn ks_two_sample(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = montecarlo::ks_two_sample(&x, &y).map_err(to_py)?;
    Ok((r.statistic, r.p_value))
}

fn json_to_py<'py>(py: Python<'py>, text: String) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Sandwich rows as a list of dicts.
#[pyfunction]
fn sandwich_report<'py>(
    py: Python<'py>,
    dist: LawArg,
    instances: usize,
    t_grid: Vec<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SandwichConfig::new(dist.get()?, instances, t_grid, seed);
    let rows = py
        .detach(|| harness::sandwich_report(&cfg))
        .map_err(to_py)?;
    let text = serde_json::to_string(&rows).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, text)
}

/// Property-suite report as a dict.
#[pyfunction]
fn property_suite(py: Python<'_>, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    let report = py.detach(|| harness::property_suite(seed));
    let text = serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, text)
}

#[pymodule]
fn pytailsand(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeightVector>()?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyBoundValue>()?;
    m.add_class::<PyMCEstimate>()?;
    m.add_function(wrap_pyfunction!(py_weight_stats, m)?)?;
    m.add_function(wrap_pyfunction!(h_closed, m)?)?;
    m.add_function(wrap_pyfunction!(h_sup, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(janson_upper, m)?)?;
    m.add_function(wrap_pyfunction!(janson_lower, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_upper, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_lower, m)?)?;
    m.add_function(wrap_pyfunction!(generic_upper, m)?)?;
    m.add_function(wrap_pyfunction!(generic_lower, m)?)?;
    m.add_function(wrap_pyfunction!(pz_bound, m)?)?;
    m.add_function(wrap_pyfunction!(r_function, m)?)?;
    m.add_function(wrap_pyfunction!(s_inequality_upper, m)?)?;
    m.add_function(wrap_pyfunction!(moment_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(exact_tail, m)?)?;
    m.add_function(wrap_pyfunction!(cf_tail_inversion, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_abs_moment, m)?)?;
    m.add_function(wrap_pyfunction!(p_ge_mean, m)?)?;
    m.add_function(wrap_pyfunction!(sample_sum, m)?)?;
    m.add_function(wrap_pyfunction!(mc_tail, m)?)?;
    m.add_function(wrap_pyfunction!(is_tail, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich_report, m)?)?;
    m.add_function(wrap_pyfunction!(property_suite, m)?)?;
    Ok(())
}
