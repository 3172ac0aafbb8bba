//! Python bindings: calibrate profiles, sample retention maps, sweep the
//! supply and evaluate CIM workloads.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;

use cryo_edram::array::{array_stats, sample_array};
use cryo_edram::calibrate::{calibrate_profile, residual_report, TargetSet};
use cryo_edram::cim::{cim_energy, compare_temperatures, load_workload, resnet18, WorkloadSpec};
use cryo_edram::dvs::{default_grid, optimal_vdd, vdd_sweep, Objective};
use cryo_edram::refresh::{error_rate, min_refresh_period, RefreshPolicy};
use cryo_edram::{retention_time, ThermalOperatingPoint};

create_exception!(cryo_edram, CryoEdramError, PyException);

fn err(e: cryo_edram::Error) -> PyErr {
    CryoEdramError::new_err(e.to_string())
}

/// Serializable value to nested dicts and lists.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = toml::Value::try_from(value).map_err(|e| CryoEdramError::new_err(e.to_string()))?;
    convert(py, &v)
}

fn convert<'py>(py: Python<'py>, v: &toml::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        toml::Value::String(s) => s.into_pyobject(py)?.into_any(),
        toml::Value::Integer(i) => i.into_pyobject(py)?.into_any(),
        toml::Value::Float(f) => f.into_pyobject(py)?.into_any(),
        toml::Value::Boolean(b) => b.into_pyobject(py)?.to_owned().into_any(),
        toml::Value::Datetime(d) => d.to_string().into_pyobject(py)?.into_any(),
        toml::Value::Array(a) => {
            let items = a.iter().map(|x| convert(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        toml::Value::Table(t) => {
            let d = PyDict::new(py);
            for (k, x) in t {
                d.set_item(k, convert(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn op(t: f64, vdd: f64) -> PyResult<ThermalOperatingPoint> {
    ThermalOperatingPoint::new(t, vdd).map_err(err)
}

fn workload(text: Option<&str>) -> PyResult<WorkloadSpec> {
    match text {
        Some(s) => load_workload(s).map_err(err),
        None => Ok(resnet18()),
    }
}

/// Sampled retention times of one array, in seconds.
#[pyclass(frozen, module = "cryo_edram")]
struct RetentionMap {
    inner: cryo_edram::RetentionMap,
}

#[pymethods]
impl RetentionMap {
    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols
    }

    /// Row-major nested list.
    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.retention.chunks(self.inner.cols).map(<[f64]>::to_vec).collect()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f64> {
        if row >= self.inner.rows || col >= self.inner.cols {
            return Err(pyo3::exceptions::PyIndexError::new_err((row, col)));
        }
        Ok(self.inner.get(row, col))
    }

    /// Mean, std, min, max, cv and the Anderson–Darling statistic.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &array_stats(&self.inner))
    }

    #[pyo3(signature = (guard = 1.0))]
    fn min_refresh_period(&self, guard: f64) -> PyResult<f64> {
        min_refresh_period(&self.inner, guard).map_err(err)
    }

    /// Fraction of cells whose retention is shorter than `period`.
    fn error_rate(&self, period: f64) -> f64 {
        error_rate(&self.inner, period)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("RetentionMap(rows={}, cols={})", self.inner.rows, self.inner.cols)
    }
}

/// Calibrated parameter set.
#[pyclass(frozen, module = "cryo_edram")]
struct Profile {
    inner: cryo_edram::Profile,
}

#[pymethods]
impl Profile {
    /// Fit a profile to an anchor document, or to the bundled anchors.
    #[staticmethod]
    #[pyo3(signature = (targets = None))]
    fn calibrate(py: Python<'_>, targets: Option<&str>) -> PyResult<Self> {
        let set = match targets {
            Some(s) => TargetSet::from_toml_str(s).map_err(err)?,
            None => TargetSet::bundled(),
        };
        let inner = py.detach(|| calibrate_profile(&set)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: cryo_edram::Profile::from_toml_str(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        std::fs::write(&path, self.to_toml()?)
            .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
    }

    /// Parameters no anchor constrained.
    #[getter]
    fn defaulted(&self) -> Vec<String> {
        self.inner.defaulted.clone()
    }

    /// Residuals against the profile's own anchors, or against `targets`.
    #[pyo3(signature = (targets = None))]
    fn residuals<'py>(&self, py: Python<'py>, targets: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
        let r = match targets {
            Some(s) => {
                let set = TargetSet::from_toml_str(s).map_err(err)?;
                py.detach(|| residual_report(&self.inner, &set)).map_err(err)?
            }
            None => self.inner.residuals.clone(),
        };
        to_py(py, &r)
    }

    /// Retention of the nominal cell, s (infinite past the horizon).
    #[pyo3(signature = (temperature, vdd = None))]
    fn nominal_retention(&self, temperature: f64, vdd: Option<f64>) -> PyResult<f64> {
        let p = &self.inner;
        let o = op(temperature, vdd.unwrap_or(p.device.vdd_nominal))?;
        Ok(retention_time(&p.cell, &p.device, &o).map_err(err)?.seconds_or_inf())
    }

    #[pyo3(signature = (temperature, vdd = None, seed = None))]
    fn sample_array(
        &self,
        py: Python<'_>,
        temperature: f64,
        vdd: Option<f64>,
        seed: Option<u64>,
    ) -> PyResult<RetentionMap> {
        let p = &self.inner;
        let cfg = match seed {
            Some(s) => p.array_config_seeded(s),
            None => p.array_config(),
        };
        let o = op(temperature, vdd.unwrap_or(p.device.vdd_nominal))?;
        let inner = py.detach(|| sample_array(&cfg, &o)).map_err(err)?;
        Ok(RetentionMap { inner })
    }

    /// One record per supply: retention statistics and power.
    #[pyo3(signature = (temperature, grid = None))]
    fn sweep<'py>(
        &self,
        py: Python<'py>,
        temperature: f64,
        grid: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let grid = grid.unwrap_or_else(default_grid);
        let p = &self.inner;
        let pts = py
            .detach(|| vdd_sweep(&p.array_config(), &p.models(), temperature, &grid))
            .map_err(err)?;
        to_py(py, &pts)
    }

    /// Cheapest supply on the grid; `objective` is "retention" or "dynamic".
    #[pyo3(signature = (temperature, objective = "retention", grid = None))]
    fn optimal_vdd<'py>(
        &self,
        py: Python<'py>,
        temperature: f64,
        objective: &str,
        grid: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let obj = match objective {
            "retention" => Objective::MinRetentionPower,
            "dynamic" => Objective::MinDynamicPower,
            other => {
                return Err(pyo3::exceptions::PyValueError::new_err(format!(
                    "objective must be 'retention' or 'dynamic', got '{other}'"
                )))
            }
        };
        let grid = grid.unwrap_or_else(default_grid);
        let p = &self.inner;
        let best = py
            .detach(|| {
                vdd_sweep(&p.array_config(), &p.models(), temperature, &grid)
                    .and_then(|pts| optimal_vdd(&pts, obj))
            })
            .map_err(err)?;
        to_py(py, &best)
    }

    /// Energy report for one inference at one temperature.
    #[pyo3(signature = (temperature, vdd = None, workload_toml = None))]
    fn cim<'py>(
        &self,
        py: Python<'py>,
        temperature: f64,
        vdd: Option<f64>,
        workload_toml: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let w = workload(workload_toml)?;
        let p = &self.inner;
        let o = op(temperature, vdd.unwrap_or(p.device.vdd_nominal))?;
        let cfg = p.array_config();
        let r = py
            .detach(|| {
                let policy = RefreshPolicy::full_yield(&sample_array(&cfg, &o)?);
                cim_energy(&w, &cfg, &p.models(), &o, &policy)
            })
            .map_err(err)?;
        to_py(py, &r)
    }

    /// Reports at 300 K and 4.2 K with their ratios.
    #[pyo3(signature = (workload_toml = None))]
    fn compare_temperatures<'py>(
        &self,
        py: Python<'py>,
        workload_toml: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let w = workload(workload_toml)?;
        let p = &self.inner;
        let c = py
            .detach(|| compare_temperatures(&w, &p.array_config(), &p.models()))
            .map_err(err)?;
        to_py(py, &c)
    }

    fn __repr__(&self) -> String {
        format!(
            "Profile(rows={}, cols={}, residuals={})",
            self.inner.array.rows,
            self.inner.array.cols,
            self.inner.residuals.len()
        )
    }
}

#[pymodule]
#[pyo3(name = "cryo_edram")]
fn cryo_edram_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("CryoEdramError", m.py().get_type::<CryoEdramError>())?;
    m.add_class::<Profile>()?;
    m.add_class::<RetentionMap>()?;
    Ok(())
}
