//! Python bindings: exact accounting helpers, the decision rules, whole runs,
//! offline verification, sweeps and hitting-time estimates.
//!
//! Prices are integer ticks and money is integer quanta. Gravity centers and
//! other rationals cross the boundary as `fractions.Fraction`. Structured
//! results (summaries, phases, verdicts) come back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;

use hti::artifacts::{simulate_to_dir, PhaseRow};
use hti::price::{Direction, HittingSummary};
use hti::sweep::SweepGrid;
use hti::{cloud, dominance, pnl, Error, RationalPrice, RunConfig};

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Config(_) | Error::OffGrid { .. } | Error::InvalidOrder(_) | Error::Toml(_) => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Round-trips any serializable value through JSON into Python objects.
fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_side(side: &str) -> PyResult<hti::Side> {
    match side.to_ascii_lowercase().as_str() {
        "buy" | "b" => Ok(hti::Side::Buy),
        "sell" | "s" => Ok(hti::Side::Sell),
        other => Err(PyValueError::new_err(format!("side must be 'buy' or 'sell', got {other:?}"))),
    }
}

fn rational_from_py(value: &Bound<'_, PyAny>) -> PyResult<RationalPrice> {
    if let Ok(tick) = value.extract::<i64>() {
        return Ok(RationalPrice::from_tick(tick));
    }
    let numerator: i128 = value.getattr("numerator")?.extract()?;
    let denominator: i128 = value.getattr("denominator")?.extract()?;
    if denominator == 0 {
        return Err(PyValueError::new_err("zero denominator"));
    }
    Ok(RationalPrice::new(numerator, denominator))
}

fn rational_to_py<'py>(py: Python<'py>, value: RationalPrice) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((value.numerator(), value.denominator()))
}

fn load_config(config: Option<&str>, seed: Option<u64>) -> PyResult<RunConfig> {
    let mut config = match config {
        None => RunConfig::default(),
        Some(text) => RunConfig::from_toml_str(text).map_err(to_py_err)?,
    };
    if let Some(seed) = seed {
        config.run.master_seed = seed;
    }
    Ok(config)
}

/// A fill: `Order(id, time, side, price, quantity)` with `side` "buy" or "sell".
#[pyclass(name = "Order", frozen, from_py_object)]
#[derive(Clone)]
struct PyOrder {
    inner: hti::Order,
}

#[pymethods]
impl PyOrder {
    #[new]
    fn new(id: u64, time: u64, side: &str, price: i64, quantity: u64) -> PyResult<Self> {
        let inner = hti::Order::new(id, time, parse_side(side)?, price, quantity).map_err(to_py_err)?;
        Ok(PyOrder { inner })
    }

    #[getter]
    fn id(&self) -> u64 {
        self.inner.id
    }

    #[getter]
    fn time(&self) -> u64 {
        self.inner.time
    }

    #[getter]
    fn side(&self) -> String {
        self.inner.side.to_string()
    }

    #[getter]
    fn price(&self) -> i64 {
        self.inner.price
    }

    #[getter]
    fn quantity(&self) -> u64 {
        self.inner.quantity
    }

    #[getter]
    fn sign(&self) -> i64 {
        self.inner.sign()
    }

    fn __repr__(&self) -> String {
        let o = &self.inner;
        format!("Order(id={}, time={}, side='{}', price={}, quantity={})", o.id, o.time, o.side, o.price, o.quantity)
    }
}

fn orders(list: Vec<PyOrder>) -> Vec<hti::Order> {
    list.into_iter().map(|o| o.inner).collect()
}

/// +1 for a sell, -1 for a buy.
#[pyfunction]
fn side_sign(side: &str) -> PyResult<i64> {
    Ok(parse_side(side)?.sign())
}

/// Mark-to-market PnL, in quanta, as the signed sum of fills plus the open
/// position valued at `price`.
#[pyfunction]
fn pnl_direct(orders_: Vec<PyOrder>, price: i64) -> i128 {
    pnl::pnl_direct(&orders(orders_), price).0
}

#[pyfunction]
fn pnl_via_position(orders_: Vec<PyOrder>, price: i64) -> i128 {
    pnl::pnl_via_position(&orders(orders_), price).0
}

/// Realized, unrealized and total PnL from lot matching ("fifo" or "lifo").
#[pyfunction]
#[pyo3(signature = (orders_, price, method = "fifo"))]
fn pnl_decomposed<'py>(py: Python<'py>, orders_: Vec<PyOrder>, price: i64, method: &str) -> PyResult<Bound<'py, PyDict>> {
    let method = match method.to_ascii_lowercase().as_str() {
        "fifo" => pnl::MatchMethod::Fifo,
        "lifo" => pnl::MatchMethod::Lifo,
        other => return Err(PyValueError::new_err(format!("method must be 'fifo' or 'lifo', got {other:?}"))),
    };
    let (matches, unmatched) = pnl::match_lots(&orders(orders_), method);
    let b = pnl::pnl_decomposed(&matches, &unmatched, price);
    let out = PyDict::new(py);
    out.set_item("realized", b.realized.0)?;
    out.set_item("unrealized", b.unrealized.0)?;
    out.set_item("total", b.total.0)?;
    out.set_item("matches", to_python(py, &matches)?)?;
    out.set_item("unmatched", to_python(py, &unmatched)?)?;
    Ok(out)
}

/// Quantity-weighted mean fill price as a `Fraction`, or None without fills.
#[pyfunction]
fn gravity_center<'py>(py: Python<'py>, orders_: Vec<PyOrder>) -> PyResult<Option<Bound<'py, PyAny>>> {
    cloud::CloudStats::from_fills(&orders(orders_))
        .gravity_center()
        .map(|c| rational_to_py(py, c))
        .transpose()
}

/// The larger of `x`, `y` for sign +1, the smaller for -1.
#[pyfunction]
fn minmax<'py>(py: Python<'py>, sign: i64, x: &Bound<'py, PyAny>, y: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    check_sign(sign)?;
    rational_to_py(py, dominance::minmax(sign, rational_from_py(x)?, rational_from_py(y)?))
}

fn check_sign(sign: i64) -> PyResult<()> {
    if sign == 1 || sign == -1 {
        Ok(())
    } else {
        Err(PyValueError::new_err("sign must be +1 or -1"))
    }
}

/// `sign * (gravity - price) > tau`; False while the gravity center is None.
#[pyfunction]
fn delay_eligible(price: i64, gravity: Option<&Bound<'_, PyAny>>, sign: i64, tau: i64) -> PyResult<bool> {
    check_sign(sign)?;
    let gravity = gravity.map(rational_from_py).transpose()?;
    Ok(dominance::delay_eligible(price, gravity, sign, tau))
}

/// `sign * (price - minmax(sign, gravity_now, gravity_at_delay)) > gamma`.
#[pyfunction]
fn execution_ready(
    price: i64,
    gravity_now: &Bound<'_, PyAny>,
    gravity_at_delay: &Bound<'_, PyAny>,
    sign: i64,
    gamma: i64,
) -> PyResult<bool> {
    check_sign(sign)?;
    Ok(dominance::execution_ready(
        price,
        rational_from_py(gravity_now)?,
        rational_from_py(gravity_at_delay)?,
        sign,
        gamma,
    ))
}

/// Default configuration as TOML text.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_toml_string()
}

/// Runs one replication. `config` is TOML text (None for the defaults).
/// Returns a dict with summary, phases, delayed orders, pending orders,
/// verdicts, `passed`, and the tick series when `record_ticks` is set.
#[pyfunction]
#[pyo3(signature = (config = None, seed = None, replication = 0, record_ticks = false))]
fn run_simulation<'py>(
    py: Python<'py>,
    config: Option<&str>,
    seed: Option<u64>,
    replication: u64,
    record_ticks: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let config = load_config(config, seed)?;
    let options = hti::RunOptions { record_ticks, ..hti::RunOptions::default() };
    let report = py
        .detach(|| hti::run_simulation(&config, replication, &options))
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("seed", report.seed)?;
    out.set_item("passed", report.passed())?;
    out.set_item("summary", to_python(py, &report.summary)?)?;
    let phases: Vec<PhaseRow> = report.phases.iter().map(PhaseRow::from).collect();
    out.set_item("phases", to_python(py, &phases)?)?;
    out.set_item("delayed_orders", to_python(py, &report.records)?)?;
    out.set_item("pending", to_python(py, &report.pending)?)?;
    out.set_item("verdicts", to_python(py, &report.verdicts)?)?;
    if record_ticks {
        let ticks = PyList::empty(py);
        for t in &report.ticks {
            ticks.append((t.time, t.price_ticks, t.pnl_s_quanta, t.pnl_sstar_quanta, t.diff_quanta))?;
        }
        out.set_item("ticks", ticks)?;
    }
    Ok(out)
}

/// Runs one replication and writes its run directory. Returns the summary.
#[pyfunction]
#[pyo3(signature = (out_dir, config = None, seed = None, replication = 0))]
fn simulate<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    config: Option<&str>,
    seed: Option<u64>,
    replication: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let config = load_config(config, seed)?;
    let report = py
        .detach(|| simulate_to_dir(&config, replication, &out_dir))
        .map_err(to_py_err)?;
    to_python(py, &report.summary)
}

/// Re-audits a run directory from its files. Returns a list of verdict dicts.
#[pyfunction]
fn verify_run<'py>(py: Python<'py>, run_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let verdicts = py.detach(|| hti::verify_run(&run_dir)).map_err(to_py_err)?;
    to_python(py, &verdicts)
}

/// Parameter sweep, e.g. `grid="tau=10,25;queue_cap=1,3"`. One dict per
/// cell and replication.
#[pyfunction]
#[pyo3(signature = (grid, config = None, seed = None))]
fn sweep<'py>(py: Python<'py>, grid: &str, config: Option<&str>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let config = load_config(config, seed)?;
    let grid: SweepGrid = grid.parse().map_err(to_py_err)?;
    let rows = py.detach(|| hti::sweep::sweep(&config, &grid)).map_err(to_py_err)?;
    to_python(py, &rows)
}

/// First-passage times of the configured price process to strictly beyond
/// `start ± xi`. `direction` is "above" or "below"; `start` defaults to the
/// grid center.
#[pyfunction]
#[pyo3(signature = (xi, samples, config = None, direction = "above", cap = 10_000_000, start = None, seed = None))]
#[allow(clippy::too_many_arguments)]
fn estimate_hitting_time<'py>(
    py: Python<'py>,
    xi: i64,
    samples: u64,
    config: Option<&str>,
    direction: &str,
    cap: u64,
    start: Option<i64>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let config = load_config(config, seed)?;
    let direction = match direction.to_ascii_lowercase().as_str() {
        "above" => Direction::Above,
        "below" => Direction::Below,
        other => return Err(PyValueError::new_err(format!("direction must be 'above' or 'below', got {other:?}"))),
    };
    let price = config.price.clone();
    let start = start.unwrap_or((price.grid_min + price.grid_max) / 2);
    let seed = config.run.master_seed;
    let summary: HittingSummary = py
        .detach(|| hti::estimate_hitting_time(&price, start, xi, direction, samples, cap, seed))
        .map_err(to_py_err)?;
    to_python(py, &summary)
}

#[pymodule]
fn htiedge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOrder>()?;
    m.add_function(wrap_pyfunction!(side_sign, m)?)?;
    m.add_function(wrap_pyfunction!(pnl_direct, m)?)?;
    m.add_function(wrap_pyfunction!(pnl_via_position, m)?)?;
    m.add_function(wrap_pyfunction!(pnl_decomposed, m)?)?;
    m.add_function(wrap_pyfunction!(gravity_center, m)?)?;
    m.add_function(wrap_pyfunction!(minmax, m)?)?;
    m.add_function(wrap_pyfunction!(delay_eligible, m)?)?;
    m.add_function(wrap_pyfunction!(execution_ready, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_hitting_time, m)?)?;
    Ok(())
}
