//! Python bindings: `elan.Analysis` plus a few free functions.
//!
//! Structured results (graph dumps, profiles, rankings, evaluations) cross
//! the boundary as JSON and are decoded with the stdlib `json` module, so
//! Python sees plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use elan_core::evaluation::evaluate as evaluate_model;
use elan_core::frontend::pretty_print;
use elan_core::likelihood::dempster_shafer_combine;
use elan_core::profiler::{load_inputs, profile, ProfileData, DEFAULT_STEP_LIMIT};
use elan_core::ranker::{normalize_warnings, rank, to_json, TieBreak, WarningFormat};
use elan_core::synth::{generate, CallPolicy, SynthConfig};
use elan_core::{build_sdg, parse_program, BranchModel, Engine, ModelKind, Program, Sdg, VertexId};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

fn model_kind(name: &str) -> PyResult<ModelKind> {
    name.parse().map_err(err)
}

/// A parsed program with its dependence graph.
#[pyclass(frozen, module = "elan")]
struct Analysis {
    program: Program,
    sdg: Sdg,
}

impl Analysis {
    fn start(&self, start: Option<&str>) -> PyResult<Option<VertexId>> {
        start.map(|f| self.sdg.entry_of(f).map_err(err)).transpose()
    }

    fn check(&self, v: u32) -> PyResult<VertexId> {
        if (v as usize) < self.sdg.len() {
            Ok(VertexId(v))
        } else {
            Err(err(format!("no vertex {v}")))
        }
    }

    fn profile_data(&self, inputs: &str, step_limit: u64) -> PyResult<ProfileData> {
        let inputs = load_inputs(inputs).map_err(|e| err(format!("bad inputs: {e}")))?;
        profile(&self.program, &self.sdg, &inputs, step_limit).map_err(err)
    }
}

#[pymethods]
impl Analysis {
    #[new]
    #[pyo3(signature = (source, file = "<input>"))]
    fn new(source: &str, file: &str) -> PyResult<Self> {
        let program = parse_program(source, file).map_err(err)?;
        let sdg = build_sdg(&program);
        Ok(Analysis { program, sdg })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| err(format!("cannot read {path}: {e}")))?;
        Self::new(&source, path)
    }

    #[getter]
    fn file(&self) -> &str {
        self.sdg.file()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.sdg.len()
    }

    #[getter]
    fn functions(&self) -> Vec<String> {
        self.sdg.functions().iter().map(|f| f.name.to_string()).collect()
    }

    #[getter]
    fn control_points(&self) -> Vec<u32> {
        self.sdg.control_points().into_iter().map(|v| v.0).collect()
    }

    #[getter]
    fn diagnostics(&self) -> Vec<String> {
        self.sdg.diagnostics().to_vec()
    }

    fn __len__(&self) -> usize {
        self.sdg.len()
    }

    fn __repr__(&self) -> String {
        format!("Analysis(file={:?}, vertices={})", self.sdg.file(), self.sdg.len())
    }

    fn pretty(&self) -> String {
        pretty_print(&self.program)
    }

    /// Vertex reported for a source line of this file.
    fn vertex_at(&self, line: u32) -> PyResult<u32> {
        self.sdg.vertex_at(self.sdg.file(), line).map(|v| v.0).map_err(err)
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.sdg.to_json())
    }

    fn to_dot(&self) -> String {
        self.sdg.to_dot()
    }

    #[pyo3(signature = (vertex, model = "simple", start = None))]
    fn likelihood(&self, py: Python<'_>, vertex: u32, model: &str, start: Option<&str>) -> PyResult<f64> {
        let (v, kind, s) = (self.check(vertex)?, model_kind(model)?, self.start(start)?);
        py.detach(|| Engine::new(&self.sdg, BranchModel::new(kind)).execution_likelihood(v, s))
            .map(|r| r.likelihood)
            .map_err(err)
    }

    #[pyo3(signature = (line, model = "simple", start = None))]
    fn likelihood_at(&self, py: Python<'_>, line: u32, model: &str, start: Option<&str>) -> PyResult<f64> {
        let v = self.vertex_at(line)?;
        self.likelihood(py, v, model, start)
    }

    /// Likelihoods in the order of `vertices`; all vertices when omitted.
    #[pyo3(signature = (vertices = None, model = "simple", start = None))]
    fn batch_likelihood(
        &self,
        py: Python<'_>,
        vertices: Option<Vec<u32>>,
        model: &str,
        start: Option<&str>,
    ) -> PyResult<Vec<f64>> {
        let ids = match vertices {
            Some(vs) => vs.into_iter().map(|v| self.check(v)).collect::<PyResult<Vec<_>>>()?,
            None => self.sdg.vertices().iter().map(|v| v.id).collect(),
        };
        let (kind, s) = (model_kind(model)?, self.start(start)?);
        let results =
            py.detach(|| Engine::new(&self.sdg, BranchModel::new(kind)).batch_likelihood(&ids, s)).map_err(err)?;
        Ok(results.into_iter().map(|r| r.likelihood).collect())
    }

    /// Ranks warnings given as gcc-style lines or a JSON array.
    #[pyo3(signature = (warnings, model = "simple", start = None, tiebreak = "location"))]
    fn rank<'py>(
        &self,
        py: Python<'py>,
        warnings: &str,
        model: &str,
        start: Option<&str>,
        tiebreak: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let tie = match tiebreak {
            "location" => TieBreak::Location,
            "severity" => TieBreak::Severity,
            other => return Err(err(format!("unknown tiebreak '{other}'"))),
        };
        let (kind, s) = (model_kind(model)?, self.start(start)?);
        let records = normalize_warnings(warnings, WarningFormat::detect(warnings)).records;
        let ranked = py
            .detach(|| rank(&Engine::new(&self.sdg, BranchModel::new(kind)), &records, s, tie, false))
            .map_err(err)?;
        to_py(py, &to_json(&ranked))
    }

    /// Runs the reference interpreter on an inputs file's JSON text.
    #[pyo3(signature = (inputs, step_limit = DEFAULT_STEP_LIMIT))]
    fn profile<'py>(&self, py: Python<'py>, inputs: &str, step_limit: u64) -> PyResult<Bound<'py, PyAny>> {
        let data = py.detach(|| self.profile_data(inputs, step_limit))?;
        to_py(py, &data.to_json(&self.sdg))
    }

    /// Compares predicted and measured likelihood over the control points.
    #[pyo3(signature = (inputs, model = "simple", step_limit = DEFAULT_STEP_LIMIT))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        inputs: &str,
        model: &str,
        step_limit: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let kind = model_kind(model)?;
        let eval = py.detach(|| {
            let data = self.profile_data(inputs, step_limit)?;
            let cps = self.sdg.control_points();
            let predicted: Vec<(VertexId, f64)> = Engine::new(&self.sdg, BranchModel::new(kind))
                .batch_likelihood(&cps, None)
                .map_err(err)?
                .into_iter()
                .map(|r| (r.vertex, r.likelihood))
                .collect();
            let measured: Vec<(VertexId, f64)> = cps.iter().map(|&v| (v, data.fraction(v))).collect();
            evaluate_model(kind.as_str(), &predicted, &measured).map_err(err)
        })?;
        to_py(py, &serde_json::to_value(eval).map_err(err)?)
    }
}

/// Dempster-Shafer combination of two branch probabilities.
#[pyfunction(name = "dempster_shafer_combine")]
fn combine(p: f64, q: f64) -> PyResult<f64> {
    dempster_shafer_combine(p, q).map_err(err)
}

/// Random MicroC program source.
#[pyfunction]
#[pyo3(signature = (seed, functions = 3, statements = 6, max_depth = 3, loops = false, switches = true))]
fn generate_program(
    seed: u64,
    functions: usize,
    statements: usize,
    max_depth: usize,
    loops: bool,
    switches: bool,
) -> String {
    let cfg = SynthConfig {
        functions,
        statements,
        max_depth,
        loops,
        switches,
        calls: CallPolicy::Many,
        max_control_points: None,
    };
    generate(&cfg, seed)
}

#[pymodule]
fn elan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Analysis>()?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    m.add_function(wrap_pyfunction!(generate_program, m)?)?;
    Ok(())
}
