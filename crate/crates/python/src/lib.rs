//! Python bindings. Results come back as plain dicts; orders are lists of
//! 0-based user indices, first decoded first.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dpc_precoding as core;
use dpc_precoding::bench::{instance_to_json, parse_instance};
use dpc_precoding::{PrecodingOrder, RelaxationParams, SolveError};

fn solve_err(e: SolveError) -> PyErr {
    match e {
        SolveError::Model(m) => PyValueError::new_err(m.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn order_from(inst: &core::ProblemInstance, order: Option<Vec<usize>>) -> PyResult<PrecodingOrder> {
    let order = match order {
        Some(o) => PrecodingOrder::new(o).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => PrecodingOrder::identity(inst.num_users()),
    };
    if order.len() != inst.num_users() {
        return Err(PyValueError::new_err(format!(
            "order has {} entries, instance has {} users",
            order.len(),
            inst.num_users()
        )));
    }
    Ok(order)
}

#[pyclass(name = "ProblemInstance", frozen, module = "dpc_precoding_py")]
struct PyInstance {
    inner: core::ProblemInstance,
}

#[pymethods]
impl PyInstance {
    #[new]
    fn new(channels: Vec<Vec<Complex64>>, rate_targets: Vec<f64>) -> PyResult<Self> {
        core::ProblemInstance::new(channels, rate_targets)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// I.i.d. Rayleigh channels with equal targets `rate` (bits).
    #[staticmethod]
    fn sample(num_users: usize, num_tx_antennas: usize, rate: f64, seed: u64) -> PyResult<Self> {
        core::sample_rayleigh_instance(num_users, num_tx_antennas, rate, seed)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_instance(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        instance_to_json(&self.inner)
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.num_users()
    }

    #[getter]
    fn num_tx_antennas(&self) -> usize {
        self.inner.num_tx_antennas()
    }

    #[getter]
    fn rate_targets(&self) -> Vec<f64> {
        self.inner.rate_targets().to_vec()
    }

    #[getter]
    fn channels(&self) -> Vec<Vec<Complex64>> {
        self.inner.channels().to_vec()
    }

    fn with_rate_targets(&self, rate_targets: Vec<f64>) -> PyResult<Self> {
        self.inner
            .with_rate_targets(rate_targets)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "ProblemInstance(num_users={}, num_tx_antennas={}, rate_targets={:?})",
            self.inner.num_users(),
            self.inner.num_tx_antennas(),
            self.inner.rate_targets()
        )
    }
}

fn fixed_dict<'py>(
    py: Python<'py>,
    sol: &core::FixedOrderSolution,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("order", sol.order.as_slice().to_vec())?;
    d.set_item("powers", sol.powers.powers().to_vec())?;
    d.set_item("rates", sol.achieved_rates.clone())?;
    d.set_item("sum_power", sol.sum_power())?;
    Ok(d)
}

fn verdict_name(v: core::Verdict) -> &'static str {
    match v {
        core::Verdict::Optimal => "Optimal",
        core::Verdict::NotOptimal => "NotOptimal",
        core::Verdict::TimeSharingBoundary => "TimeSharingBoundary",
    }
}

/// Closed-form powers for a decoding order (identity if omitted).
#[pyfunction]
#[pyo3(signature = (instance, order=None))]
fn solve_fixed_order<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    order: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyDict>> {
    let order = order_from(&instance.inner, order)?;
    let sol = core::solve_fixed_order(&instance.inner, &order).map_err(solve_err)?;
    fixed_dict(py, &sol)
}

/// Multipliers by order position; `unit` is "nats" or "bits".
#[pyfunction]
#[pyo3(signature = (instance, order=None, unit="nats"))]
fn lagrange_multipliers(
    instance: &PyInstance,
    order: Option<Vec<usize>>,
    unit: &str,
) -> PyResult<Vec<f64>> {
    let unit = match unit {
        "nats" => core::RateUnit::Nats,
        "bits" => core::RateUnit::Bits,
        other => return Err(PyValueError::new_err(format!("unknown unit `{other}`"))),
    };
    let order = order_from(&instance.inner, order)?;
    let sol = core::solve_fixed_order(&instance.inner, &order).map_err(solve_err)?;
    Ok(core::lagrange_multipliers_in(&instance.inner, &sol, unit))
}

#[pyfunction]
#[pyo3(signature = (instance, order=None, tie_tol=core::certificate::DEFAULT_TIE_TOL))]
fn certify<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    order: Option<Vec<usize>>,
    tie_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let order = order_from(&instance.inner, order)?;
    let sol = core::solve_fixed_order(&instance.inner, &order).map_err(solve_err)?;
    let cert = core::certify(&core::lagrange_multipliers(&instance.inner, &sol), tie_tol);
    let d = fixed_dict(py, &sol)?;
    d.set_item("multipliers", cert.multipliers)?;
    d.set_item("verdict", verdict_name(cert.verdict))?;
    d.set_item("tie_positions", cert.tie_positions)?;
    Ok(d)
}

/// Global optimum over all orders including time-sharing. Raises
/// RuntimeError if the dual does not converge.
#[pyfunction]
#[pyo3(signature = (instance, tol=None, max_iters=None))]
fn ellipsoid_solve<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut params = RelaxationParams::default();
    if let Some(t) = tol {
        params.tol = t;
    }
    if let Some(n) = max_iters {
        params.max_iters = n;
    }
    let inst = &instance.inner;
    let sol = py
        .detach(|| core::ellipsoid_solve(inst, &params))
        .map_err(solve_err)?;
    let d = PyDict::new(py);
    d.set_item("sum_power", sol.sum_power)?;
    d.set_item("powers", sol.powers.powers().to_vec())?;
    d.set_item("rates", sol.achieved_rates)?;
    d.set_item("multipliers", sol.multipliers)?;
    d.set_item("order", sol.order.into_vec())?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("dual_value", sol.dual_value)?;
    d.set_item("dual_gap_bound", sol.dual_gap_bound)?;
    match sol.time_sharing {
        Some(ts) => {
            let t = PyDict::new(py);
            t.set_item(
                "orders",
                ts.orders
                    .into_iter()
                    .map(PrecodingOrder::into_vec)
                    .collect::<Vec<_>>(),
            )?;
            t.set_item("weights", ts.weights)?;
            d.set_item("time_sharing", t)?;
        }
        None => d.set_item("time_sharing", py.None())?,
    }
    Ok(d)
}

#[pyfunction]
fn exhaustive_search<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyDict>> {
    let inst = &instance.inner;
    let (_, sol) = py
        .detach(|| core::exhaustive_search(inst))
        .map_err(solve_err)?;
    fixed_dict(py, &sol)
}

/// Multiplier-resorting heuristic from `initial` (identity if omitted).
#[pyfunction]
#[pyo3(signature = (instance, initial=None, max_iters=None))]
fn heuristic_search<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    initial: Option<Vec<usize>>,
    max_iters: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let inst = &instance.inner;
    let start = order_from(inst, initial)?;
    let cap =
        max_iters.unwrap_or_else(|| core::ordering::default_heuristic_iters(inst.num_users()));
    let (_, sol, cert, trace) = core::heuristic_search(inst, &start, cap).map_err(solve_err)?;
    let d = fixed_dict(py, &sol)?;
    d.set_item("verdict", verdict_name(cert.verdict))?;
    d.set_item("termination", trace.termination.as_str())?;
    d.set_item("iterations", trace.iterations())?;
    d.set_item(
        "visited",
        trace
            .visited
            .into_iter()
            .map(PrecodingOrder::into_vec)
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Downlink beamformers and powers for the fixed-order solution of `order`.
#[pyfunction]
#[pyo3(signature = (instance, order=None))]
fn mac_to_bc<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    order: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyDict>> {
    let inst = &instance.inner;
    let order = order_from(inst, order)?;
    let sol = core::solve_fixed_order(inst, &order).map_err(solve_err)?;
    let dl = core::mac_to_bc(inst, &order, &sol.powers).map_err(solve_err)?;
    let d = PyDict::new(py);
    d.set_item("order", order.into_vec())?;
    d.set_item("uplink_powers", sol.powers.powers().to_vec())?;
    d.set_item("beamformers", dl.beams.beamformers.clone())?;
    d.set_item("downlink_powers", dl.beams.downlink_powers.clone())?;
    d.set_item("sum_power", dl.beams.sum_power())?;
    d.set_item("sinrs", dl.sinrs)?;
    Ok(d)
}

/// Whether `powers` support `targets` (instance targets if omitted) on every user subset.
#[pyfunction]
#[pyo3(signature = (instance, powers, targets=None, tol=1e-9))]
fn capacity_region_check(
    instance: &PyInstance,
    powers: Vec<f64>,
    targets: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<bool> {
    let inst = &instance.inner;
    let powers =
        core::PowerAllocation::new(powers).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let targets = targets.unwrap_or_else(|| inst.rate_targets().to_vec());
    core::capacity_region_check(inst, &powers, &targets, tol)
        .map(|c| c.is_feasible())
        .map_err(solve_err)
}

#[pymodule]
fn dpc_precoding_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(solve_fixed_order, m)?)?;
    m.add_function(wrap_pyfunction!(lagrange_multipliers, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(ellipsoid_solve, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_search, m)?)?;
    m.add_function(wrap_pyfunction!(heuristic_search, m)?)?;
    m.add_function(wrap_pyfunction!(mac_to_bc, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_region_check, m)?)?;
    Ok(())
}
