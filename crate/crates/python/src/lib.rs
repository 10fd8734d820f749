//! Python bindings: the layout translation surface plus whole-run
//! execution. Structured results come back as JSON strings so the Python
//! side stays one `json.loads` away from plain dicts.

use eccsim::geometry::{ModuleGeometry, TimingParams};
use eccsim::harness::{self, RunConfig};
use eccsim::layout::{LayoutMode, RegionConfig, Rw};
use eccsim::workload::{self, GenSpec, TraceKind};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_rw(rw: &str) -> PyResult<Rw> {
    match rw {
        "read" | "r" | "R" => Ok(Rw::Read),
        "write" | "w" | "W" => Ok(Rw::Write),
        other => Err(PyValueError::new_err(format!(
            "rw must be read or write, got `{other}`"
        ))),
    }
}

/// Physical shape of the simulated ECC DIMM.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Geometry {
    inner: ModuleGeometry,
}

#[pymethods]
impl Geometry {
    #[new]
    #[pyo3(signature = (rows_per_bank=16, banks=8, data_chips=8, ecc_chips=1, lines_per_row=64))]
    fn new(
        rows_per_bank: u32,
        banks: u32,
        data_chips: u32,
        ecc_chips: u32,
        lines_per_row: u32,
    ) -> PyResult<Self> {
        let inner = ModuleGeometry {
            rows_per_bank,
            banks,
            data_chips,
            ecc_chips,
            lines_per_row,
            ..ModuleGeometry::desk()
        };
        inner.validate().map_err(value_err)?;
        Ok(Geometry { inner })
    }

    /// The 8GB module shape (2^18 rows per bank).
    #[staticmethod]
    fn full_size() -> Self {
        Geometry {
            inner: ModuleGeometry::full_size(),
        }
    }

    #[getter]
    fn baseline_pages(&self) -> u64 {
        self.inner.baseline_pages()
    }

    #[getter]
    fn slice_count(&self) -> u32 {
        self.inner.slice_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Geometry(rows_per_bank={}, banks={}, chips={})",
            self.inner.rows_per_bank,
            self.inner.banks,
            self.inner.total_chips()
        )
    }
}

/// A layout mode plus boundary: the address-translation surface.
#[pyclass(frozen)]
struct Region {
    inner: RegionConfig,
}

#[pymethods]
impl Region {
    #[new]
    #[pyo3(signature = (mode, boundary_pages=None, geometry=None))]
    fn new(mode: &str, boundary_pages: Option<u64>, geometry: Option<Geometry>) -> PyResult<Self> {
        let mode: LayoutMode = mode.parse().map_err(value_err)?;
        let geometry = geometry.map_or_else(ModuleGeometry::desk, |g| g.inner);
        let boundary = boundary_pages.unwrap_or(match mode {
            LayoutMode::BaselineSecded => 0,
            _ => geometry.baseline_pages(),
        });
        Ok(Region {
            inner: RegionConfig::new(mode, boundary, geometry).map_err(value_err)?,
        })
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.name()
    }

    #[getter]
    fn boundary_pages(&self) -> u64 {
        self.inner.boundary_pages
    }

    #[getter]
    fn capacity_pages(&self) -> u64 {
        self.inner.capacity_pages()
    }

    #[getter]
    fn extra_pages(&self) -> u64 {
        self.inner.extra_pages()
    }

    #[getter]
    fn capacity_lines(&self) -> u64 {
        self.inner.capacity_lines()
    }

    /// Chip left out of wrap slot `slot` (inter-wrap layout).
    fn ignored_chip(&self, slot: u32) -> PyResult<u32> {
        if slot > self.inner.geometry.banks {
            return Err(PyValueError::new_err(format!("slot {slot} out of range")));
        }
        Ok(self.inner.ignored_chip(slot))
    }

    /// Footprint of one cache line as a JSON string.
    fn locate_json(&self, line: u64) -> PyResult<String> {
        let footprint = self.inner.locate(line).map_err(value_err)?;
        serde_json::to_string(&footprint).map_err(value_err)
    }

    /// Ordered device operations for a read or write, as a JSON string.
    fn plan_json(&self, line: u64, rw: &str) -> PyResult<String> {
        let plan = self
            .inner
            .plan_access(line, parse_rw(rw)?)
            .map_err(value_err)?;
        serde_json::to_string(&plan).map_err(value_err)
    }

    /// Number of device operations a request expands into.
    fn op_count(&self, line: u64, rw: &str) -> PyResult<usize> {
        Ok(self
            .inner
            .plan_access(line, parse_rw(rw)?)
            .map_err(value_err)?
            .ops
            .len())
    }

    /// Baseline lines whose chip-8 columns compose an extra-region line.
    fn translate_extra(&self, line: u64) -> PyResult<[u64; 8]> {
        self.inner.translate_extra(line).map_err(value_err)
    }

    /// The line-oriented translation text the CLI prints.
    fn translate_text(&self, line: u64) -> PyResult<String> {
        harness::translate_text(&self.inner, line).map_err(value_err)
    }

    /// Capacity summary and address-range map as a JSON string.
    fn capacity_json(&self) -> PyResult<String> {
        serde_json::to_string(&harness::capacity_report(&self.inner)).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Region(mode={}, boundary_pages={}, capacity_pages={})",
            self.inner.mode,
            self.inner.boundary_pages,
            self.inner.capacity_pages()
        )
    }
}

/// Run one simulation from a TOML configuration string; returns the JSON
/// report.
#[pyfunction]
fn run_toml(config: &str) -> PyResult<String> {
    let config = RunConfig::from_toml(config).map_err(value_err)?;
    let artifacts = harness::run(&config).map_err(value_err)?;
    Ok(artifacts.report.to_json())
}

/// Run one simulation from a TOML configuration file; returns the JSON
/// report.
#[pyfunction]
fn run_config_file(path: &str) -> PyResult<String> {
    let config = RunConfig::from_path(std::path::Path::new(path)).map_err(value_err)?;
    let artifacts = harness::run(&config).map_err(value_err)?;
    Ok(artifacts.report.to_json())
}

/// Generate a synthetic trace; returns the trace text.
#[pyfunction]
#[pyo3(signature = (kind="kv", ops=100_000, pages=144, seed=1, zipf_exponent=0.99, read_fraction=0.95, mpki=40.0))]
#[allow(clippy::too_many_arguments)]
fn gen_trace(
    kind: &str,
    ops: u64,
    pages: u64,
    seed: u64,
    zipf_exponent: f64,
    read_fraction: f64,
    mpki: f64,
) -> PyResult<String> {
    let kind: TraceKind = kind.parse().map_err(value_err)?;
    let spec = GenSpec {
        kind,
        ops,
        pages,
        lines_per_page: 64,
        zipf_exponent,
        read_fraction,
        mpki,
        seed,
    };
    Ok(workload::format_trace(
        &workload::gen_trace(&spec).map_err(value_err)?,
    ))
}

/// MPKI of a trace text and whether it classifies as memory-intensive.
#[pyfunction]
fn classify_trace(text: &str) -> PyResult<(f64, bool)> {
    let trace = workload::parse_trace(text.as_bytes()).map_err(value_err)?;
    Ok((
        workload::mpki(&trace),
        workload::classify_mpki(&trace, None),
    ))
}

/// The pinned DDR3-1333 timing table as a JSON string.
#[pyfunction]
fn ddr3_timing_json() -> PyResult<String> {
    serde_json::to_string(&TimingParams::ddr3_1333()).map_err(value_err)
}

#[pymodule]
fn pyeccsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Geometry>()?;
    m.add_class::<Region>()?;
    m.add_function(wrap_pyfunction!(run_toml, m)?)?;
    m.add_function(wrap_pyfunction!(run_config_file, m)?)?;
    m.add_function(wrap_pyfunction!(gen_trace, m)?)?;
    m.add_function(wrap_pyfunction!(classify_trace, m)?)?;
    m.add_function(wrap_pyfunction!(ddr3_timing_json, m)?)?;
    Ok(())
}
