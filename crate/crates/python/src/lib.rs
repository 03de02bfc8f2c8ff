use cbe_core::asymptotics as asy;
use cbe_core::exact_transform as ex;
use cbe_core::montecarlo as mc;
use cbe_core::specfun::QuadratureSpec;
use cbe_core::tilt;
use cbe_core::validate::{run_all, Fault, ValidateOptions};
use cbe_core::CbeError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: CbeError) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Circular Jacobi ensemble parameters (N, beta, delta).
#[pyclass(frozen, get_all, skip_from_py_object, module = "cbe")]
#[derive(Clone)]
struct EnsembleParams {
    n: usize,
    beta: f64,
    delta: f64,
}

impl EnsembleParams {
    fn core(&self) -> ex::EnsembleParams {
        ex::EnsembleParams { n: self.n, beta: self.beta, delta: self.delta }
    }
}

#[pymethods]
impl EnsembleParams {
    #[new]
    #[pyo3(signature = (n, beta, delta = 0.0))]
    fn new(n: usize, beta: f64, delta: f64) -> PyResult<Self> {
        let p = ex::EnsembleParams::new(n, beta, delta).map_err(py_err)?;
        Ok(Self { n: p.n, beta: p.beta, delta: p.delta })
    }

    /// Derivative `order` (0..=3) of ln E[exp(z X_N)] at real z > -(1 + 2 delta).
    #[pyo3(signature = (z, order = 0))]
    fn log_laplace(&self, z: f64, order: u32) -> PyResult<f64> {
        ex::log_laplace_real(&self.core(), z, order).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("EnsembleParams(n={}, beta={}, delta={})", self.n, self.beta, self.delta)
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "cbe")]
#[derive(Clone)]
struct TiltSolution {
    h: f64,
    lambda_: f64,
    a: f64,
    v: f64,
    legendre: f64,
}

#[pymethods]
impl TiltSolution {
    fn __repr__(&self) -> String {
        format!(
            "TiltSolution(h={}, lambda_={}, a={}, v={}, legendre={})",
            self.h, self.lambda_, self.a, self.v, self.legendre
        )
    }
}

impl From<tilt::TiltSolution> for TiltSolution {
    fn from(t: tilt::TiltSolution) -> Self {
        Self { h: t.h, lambda_: t.lambda, a: t.a, v: t.v, legendre: t.legendre }
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "cbe")]
#[derive(Clone)]
struct DeviationEstimate {
    probability: f64,
    log_probability: f64,
    prefactor: f64,
    exponent: f64,
    method: &'static str,
    quality: &'static str,
}

#[pymethods]
impl DeviationEstimate {
    fn __repr__(&self) -> String {
        format!(
            "DeviationEstimate(method={}, probability={:e}, quality={})",
            self.method, self.probability, self.quality
        )
    }
}

impl From<asy::DeviationEstimate> for DeviationEstimate {
    fn from(e: asy::DeviationEstimate) -> Self {
        Self {
            probability: e.probability,
            log_probability: e.log_probability,
            prefactor: e.prefactor,
            exponent: e.exponent,
            method: e.method.as_str(),
            quality: e.quality.as_str(),
        }
    }
}

#[pyclass(frozen, get_all, module = "cbe")]
struct LargeDevExpansion {
    l0: f64,
    l1_star: f64,
    l2_star: Option<f64>,
    rate: f64,
    bound: DeviationEstimate,
    residual: Option<f64>,
}

#[pyclass(frozen, get_all, module = "cbe")]
struct SampleBatch {
    values: Vec<f64>,
    log_weights: Option<Vec<f64>>,
    chain_lengths: Vec<usize>,
    seed: u64,
    acceptance_rate: f64,
    proposal_scale: f64,
    ill_tuned: bool,
}

#[pymethods]
impl SampleBatch {
    fn __len__(&self) -> usize {
        self.values.len()
    }

    fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[pyfunction]
fn solve_tilt(n: usize, beta: f64, a: f64) -> PyResult<TiltSolution> {
    tilt::solve_tilt(n, beta, a).map(Into::into).map_err(py_err)
}

/// Returns (regime, rationale).
#[pyfunction]
fn classify_regime(n: usize, beta: f64, a: f64) -> (&'static str, String) {
    let c = tilt::classify_regime(n, beta, a);
    (c.tag.as_str(), c.rationale)
}

/// Tail estimate P[X_N >= x] by a named method.
#[pyfunction]
fn estimate(n: usize, beta: f64, x: f64, method: &str) -> PyResult<DeviationEstimate> {
    let spec = QuadratureSpec::default();
    let nf = n as f64;
    let r = match method {
        "clt" => asy::estimate_clt_tail(nf, beta, x),
        "small_moderate" => asy::estimate_small_moderate(nf, beta, x, &spec),
        "true_moderate" => asy::estimate_true_moderate(nf, beta, x, &spec),
        "simplified" => asy::estimate_simplified(nf, beta, x, &spec),
        "scheme" => tilt::scheme_estimate(n, beta, x),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown method {other:?}; use clt, small_moderate, true_moderate, simplified or scheme"
            )))
        }
    };
    r.map(Into::into).map_err(py_err)
}

#[pyfunction]
fn large_dev(n: usize, beta: f64, alpha0: f64) -> PyResult<LargeDevExpansion> {
    let e = asy::large_dev(n, beta, alpha0).map_err(py_err)?;
    Ok(LargeDevExpansion {
        l0: e.l0,
        l1_star: e.l1_star,
        l2_star: e.l2_star,
        rate: e.rate,
        bound: e.bound.into(),
        residual: e.residual,
    })
}

#[pyfunction]
fn theta(x: f64) -> PyResult<f64> {
    asy::theta(x).map_err(py_err)
}

#[pyfunction]
fn theta_inv(y: f64) -> PyResult<f64> {
    asy::theta_inv(y).map_err(py_err)
}

/// Returns (x, theta_inv, rate, hko_rate).
#[pyfunction]
fn rate_curve_row(x: f64, beta: f64) -> PyResult<(f64, f64, f64, f64)> {
    let r = asy::rate_curve_row(x, beta).map_err(py_err)?;
    Ok((r.x, r.theta_inv, r.rate, r.hko_rate))
}

#[pyfunction]
fn kolmogorov_bound(n: usize, beta: f64, delta: f64) -> PyResult<f64> {
    asy::kolmogorov_bound(n, beta, delta).map_err(py_err)
}

#[pyfunction]
fn kolmogorov_distance_exact(n: usize, beta: f64, delta: f64) -> PyResult<f64> {
    asy::kolmogorov_distance_exact(n, beta, delta, &QuadratureSpec::default()).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (params, samples = 10_000, burn = 1_000, thin = 1, chains = 1, seed = 0, proposal_scale = None))]
fn mcmc_sample(
    py: Python<'_>,
    params: &EnsembleParams,
    samples: usize,
    burn: usize,
    thin: usize,
    chains: usize,
    seed: u64,
    proposal_scale: Option<f64>,
) -> PyResult<SampleBatch> {
    let cfg = mc::McConfig {
        n_samples: samples,
        n_burn: burn,
        thinning: thin,
        proposal_scale,
        n_chains: chains,
        seed,
        threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let p = params.core();
    let b = py.detach(|| mc::mcmc_sample_with(&p, &cfg)).map_err(py_err)?;
    Ok(SampleBatch {
        values: b.values,
        log_weights: b.log_weights,
        chain_lengths: b.chain_lengths,
        seed: b.seed,
        acceptance_rate: b.acceptance_rate,
        proposal_scale: b.proposal_scale,
        ill_tuned: b.ill_tuned,
    })
}

/// Importance-sampled P[X_N >= a] under the exponential tilt.
/// Returns (probability, std_error, n_effective).
#[pyfunction]
#[pyo3(signature = (n, beta, a, samples = 20_000, seed = 0))]
fn tail_estimate_tilted(py: Python<'_>, n: usize, beta: f64, a: f64, samples: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
    let cfg = mc::McConfig { n_samples: samples, seed, ..Default::default() };
    let t = py.detach(|| mc::tail_estimate_tilted(n, beta, a, &cfg)).map_err(py_err)?;
    Ok((t.probability, t.std_error, t.n_effective))
}

#[pyfunction]
#[pyo3(signature = (n, beta, delta, a, grid_points = 16))]
fn brute_force_tail(n: usize, beta: f64, delta: f64, a: f64, grid_points: usize) -> PyResult<f64> {
    mc::brute_force_tail(n, beta, delta, a, grid_points).map_err(py_err)
}

/// Run the validation battery; returns (id, name, status, measured) per check.
#[pyfunction]
#[pyo3(signature = (quick = true, seed = 0, inject_fault = false))]
fn validate(py: Python<'_>, quick: bool, seed: u64, inject_fault: bool) -> Vec<(u32, &'static str, &'static str, String)> {
    let opts = ValidateOptions {
        quick,
        seed,
        fault: inject_fault.then_some(Fault::ComparisonSign),
        ..Default::default()
    };
    py.detach(|| run_all(&opts))
        .into_iter()
        .map(|r| (r.id, r.name, r.status(), r.measured))
        .collect()
}

#[pymodule]
fn cbe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<EnsembleParams>()?;
    m.add_class::<TiltSolution>()?;
    m.add_class::<DeviationEstimate>()?;
    m.add_class::<LargeDevExpansion>()?;
    m.add_class::<SampleBatch>()?;
    m.add_function(wrap_pyfunction!(solve_tilt, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(large_dev, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(theta_inv, m)?)?;
    m.add_function(wrap_pyfunction!(rate_curve_row, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_bound, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_distance_exact, m)?)?;
    m.add_function(wrap_pyfunction!(mcmc_sample, m)?)?;
    m.add_function(wrap_pyfunction!(tail_estimate_tilted, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_tail, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
