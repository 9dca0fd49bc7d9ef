//! Python bindings for the `hsrlink` simulator.

use hsrlink::channel::{sir_db, ScenarioGeometry, TapState};
use hsrlink::dfo::{multiplication_count as count, DfoMethod};
use hsrlink::harness::{self, MetricsRecord, SimConfig, SimContext};
use hsrlink::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: hsrlink::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<DfoMethod> {
    match name {
        "proposed" => Ok(DfoMethod::Proposed),
        "es" => Ok(DfoMethod::ExhaustiveSearch),
        _ => Err(PyValueError::new_err(format!("unknown DFO method '{name}'"))),
    }
}

fn method_name(m: DfoMethod) -> &'static str {
    match m {
        DfoMethod::Proposed => "proposed",
        DfoMethod::ExhaustiveSearch => "es",
    }
}

fn record_dict<'py>(py: Python<'py>, r: &MetricsRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("snr_db", r.snr_db)?;
    d.set_item("position_m", r.position_m)?;
    d.set_item("estimator", r.estimator.name())?;
    d.set_item("dfo_method", method_name(r.dfo_method))?;
    d.set_item("dfo_rel_err_mean", r.dfo_rel_err_mean)?;
    d.set_item("dfo_rel_err_p95", r.dfo_rel_err_p95)?;
    d.set_item("mse_db", r.mse_db)?;
    d.set_item("ber", r.ber)?;
    d.set_item("tp_bits_per_symbol", r.tp_bits_per_symbol)?;
    d.set_item("mult_count", r.mult_count)?;
    d.set_item("drops_used", r.drops_used)?;
    d.set_item("ci95_mse_db", r.ci95_mse_db)?;
    Ok(d)
}

/// Simulation configuration plus the derived grid, pilots and delay basis.
#[pyclass(module = "pyhsrlink")]
struct Simulator {
    ctx: SimContext,
}

#[pymethods]
impl Simulator {
    /// Build from a TOML document; an empty string gives the defaults.
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        let config = SimConfig::from_toml_str(toml).map_err(err)?;
        let ctx = SimContext::new(&config).map_err(err)?;
        Ok(Self { ctx })
    }

    #[getter]
    fn max_dfo_hz(&self) -> f64 {
        self.ctx.max_dfo_hz
    }

    #[getter]
    fn drops(&self) -> usize {
        self.ctx.config.drops
    }

    fn to_toml(&self) -> PyResult<String> {
        self.ctx.config.to_toml_string().map_err(err)
    }

    fn positions(&self) -> PyResult<Vec<f64>> {
        harness::resolve_positions(&self.ctx.config).map_err(err)
    }

    /// Full sweep as a list of dicts keyed by CSV column.
    fn sweep<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let config = self.ctx.config.clone();
        let records = py.detach(|| harness::sweep(&config)).map_err(err)?;
        records.iter().map(|r| record_dict(py, r)).collect()
    }

    /// Full sweep rendered as CSV text.
    fn sweep_csv(&self, py: Python<'_>) -> PyResult<String> {
        let config = self.ctx.config.clone();
        let records = py.detach(|| harness::sweep(&config)).map_err(err)?;
        Ok(harness::to_csv_string(&records))
    }

    /// One Monte Carlo drop; per-estimator metrics are `None` when the estimator failed.
    fn run_drop<'py>(&self, py: Python<'py>, snr_db: f64, position_m: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let cell = self.ctx.prepare_cell(snr_db, position_m).map_err(err)?;
        let m = py.detach(|| self.ctx.run_drop(&cell, seed)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("seed", m.seed)?;
        d.set_item("true_dfos", m.true_dfos.clone())?;
        d.set_item("f_hat", m.f_hat.clone())?;
        d.set_item("dfo_rel_err", m.dfo_rel_err)?;
        d.set_item("mult_count", m.mult_count)?;
        let per = PyDict::new(py);
        for (e, metrics) in &m.estimators {
            let v = match metrics {
                Some(x) => {
                    let s = PyDict::new(py);
                    s.set_item("nmse", x.nmse)?;
                    s.set_item("bit_errors", x.bit_errors)?;
                    s.set_item("bits", x.bits)?;
                    s.set_item("blocks_ok", x.blocks_ok)?;
                    s.set_item("blocks", x.blocks)?;
                    s.into_any()
                }
                None => py.None().into_bound(py),
            };
            per.set_item(e.name(), v)?;
        }
        d.set_item("estimators", per)?;
        Ok(d)
    }
}

/// Maximum Doppler offset `v fc / c` for the default geometry with overrides.
#[pyfunction]
#[pyo3(signature = (speed_mps = None, carrier_hz = None))]
fn max_dfo(speed_mps: Option<f64>, carrier_hz: Option<f64>) -> f64 {
    let mut g = ScenarioGeometry::default();
    if let Some(v) = speed_mps {
        g.speed_mps = v;
    }
    if let Some(f) = carrier_hz {
        g.carrier_hz = f;
    }
    g.max_dfo()
}

/// Track position where the two RRH powers differ by 3 dB.
#[pyfunction]
#[pyo3(signature = (pathloss_exponent = 2.0))]
fn find_p3db(pathloss_exponent: f64) -> PyResult<f64> {
    harness::find_p3db(&ScenarioGeometry::default(), pathloss_exponent).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (method_name, m = 2, n = 4, f_max = 900.0, step = 2.0))]
fn multiplication_count(method_name: &str, m: usize, n: usize, f_max: f64, step: f64) -> PyResult<f64> {
    Ok(count(method(method_name)?, m, n, f_max, step))
}

/// Signal-to-ICI ratio (dB) of co-located taps with the given powers and DFOs.
#[pyfunction]
#[pyo3(signature = (powers, dfos_hz, used_subcarriers = None))]
fn sir(powers: Vec<f64>, dfos_hz: Vec<f64>, used_subcarriers: Option<usize>) -> PyResult<f64> {
    if powers.len() != dfos_hz.len() {
        return Err(PyValueError::new_err("powers and dfos_hz differ in length"));
    }
    let grid = SimConfig::default().resource_grid().map_err(err)?;
    let taps: Vec<TapState> = powers
        .iter()
        .zip(&dfos_hz)
        .map(|(&p, &f)| TapState {
            gain: Complex64::new(p.sqrt(), 0.0),
            delay_samples: 0,
            dfo_hz: f,
            rician_k: f64::INFINITY,
        })
        .collect();
    sir_db(&taps, &grid, used_subcarriers.unwrap_or(grid.used_count)).map_err(err)
}

#[pymodule]
fn pyhsrlink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulator>()?;
    m.add_function(wrap_pyfunction!(max_dfo, m)?)?;
    m.add_function(wrap_pyfunction!(find_p3db, m)?)?;
    m.add_function(wrap_pyfunction!(multiplication_count, m)?)?;
    m.add_function(wrap_pyfunction!(sir, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER)?;
    Ok(())
}
