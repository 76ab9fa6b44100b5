//! Python bindings: curvature evaluation, barrier checks, flow runs and scenarios.

use std::path::PathBuf;

use fmcf_core::barriers::{self, BallSpec, StripSpec, POSITIVITY_SAMPLES};
use fmcf_core::curvature::{self, SetEvaluator};
use fmcf_core::flow::{self, StopCondition};
use fmcf_core::{scenarios, Error, Vec2};
use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pythonize::pythonize;

create_exception!(fmcf, AccuracyError, PyRuntimeError, "Adaptive quadrature ran out of subdivisions.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Accuracy { .. } => AccuracyError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn order(s: f64) -> PyResult<curvature::FracOrder> {
    curvature::FracOrder::new(s).map_err(py_err)
}

fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    Ok(pythonize(py, v).map_err(|e| PyValueError::new_err(e.to_string()))?.unbind())
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone, Copy)]
struct FracOrder(curvature::FracOrder);

#[pymethods]
impl FracOrder {
    #[new]
    fn new(s: f64) -> PyResult<Self> {
        Ok(FracOrder(order(s)?))
    }

    #[getter]
    fn value(&self) -> f64 {
        self.0.get()
    }

    /// True outside the range where the quadrature is tuned.
    #[getter]
    fn degraded(&self) -> bool {
        self.0.is_degraded()
    }

    fn __float__(&self) -> f64 {
        self.0.get()
    }

    fn __repr__(&self) -> String {
        format!("FracOrder({})", self.0.get())
    }
}

#[pyclass(from_py_object)]
#[derive(Clone, Copy)]
struct QuadConfig(curvature::QuadConfig);

#[pymethods]
impl QuadConfig {
    #[new]
    #[pyo3(signature = (rel_tol=None, abs_tol=None, near_field_radius_factor=None, truncation_radius=None, max_subdivisions=None))]
    fn new(rel_tol: Option<f64>, abs_tol: Option<f64>, near_field_radius_factor: Option<f64>, truncation_radius: Option<f64>, max_subdivisions: Option<usize>) -> PyResult<Self> {
        let d = curvature::QuadConfig::default();
        let q = curvature::QuadConfig {
            rel_tol: rel_tol.unwrap_or(d.rel_tol),
            abs_tol: abs_tol.unwrap_or(d.abs_tol),
            near_field_radius_factor: near_field_radius_factor.unwrap_or(d.near_field_radius_factor),
            truncation_radius: truncation_radius.unwrap_or(d.truncation_radius),
            max_subdivisions: max_subdivisions.unwrap_or(d.max_subdivisions),
        };
        q.validate().map_err(py_err)?;
        Ok(QuadConfig(q))
    }

    #[getter]
    fn rel_tol(&self) -> f64 {
        self.0.rel_tol
    }

    #[getter]
    fn abs_tol(&self) -> f64 {
        self.0.abs_tol
    }

    #[getter]
    fn near_field_radius_factor(&self) -> f64 {
        self.0.near_field_radius_factor
    }

    #[getter]
    fn truncation_radius(&self) -> f64 {
        self.0.truncation_radius
    }

    #[getter]
    fn max_subdivisions(&self) -> usize {
        self.0.max_subdivisions
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

fn quad(q: Option<QuadConfig>) -> curvature::QuadConfig {
    q.map(|q| q.0).unwrap_or_default()
}

#[pyclass(from_py_object)]
#[derive(Clone)]
struct FlowConfig(flow::FlowConfig);

#[pymethods]
impl FlowConfig {
    #[new]
    #[pyo3(signature = (target_spacing=None, cfl=None, pinch_factor=None, max_steps=None, snapshot_stride=None, max_retries=None, stability_factor=None, checkpoints=None, quad=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        target_spacing: Option<f64>,
        cfl: Option<f64>,
        pinch_factor: Option<f64>,
        max_steps: Option<usize>,
        snapshot_stride: Option<usize>,
        max_retries: Option<usize>,
        stability_factor: Option<f64>,
        checkpoints: Option<Vec<f64>>,
        quad: Option<QuadConfig>,
    ) -> PyResult<Self> {
        let d = flow::FlowConfig::default();
        let c = flow::FlowConfig {
            target_spacing: target_spacing.unwrap_or(d.target_spacing),
            cfl: cfl.unwrap_or(d.cfl),
            pinch_factor: pinch_factor.unwrap_or(d.pinch_factor),
            max_steps: max_steps.unwrap_or(d.max_steps),
            snapshot_stride: snapshot_stride.unwrap_or(d.snapshot_stride),
            max_retries: max_retries.unwrap_or(d.max_retries),
            stability_factor: stability_factor.unwrap_or(d.stability_factor),
            checkpoints: checkpoints.unwrap_or_default(),
            quad: quad.map(|q| q.0).unwrap_or(d.quad),
            refinement: None,
        };
        c.validate().map_err(py_err)?;
        Ok(FlowConfig(c))
    }

    #[getter]
    fn target_spacing(&self) -> f64 {
        self.0.target_spacing
    }

    #[getter]
    fn cfl(&self) -> f64 {
        self.0.cfl
    }

    #[getter]
    fn max_steps(&self) -> usize {
        self.0.max_steps
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

fn flow_config(c: Option<FlowConfig>) -> flow::FlowConfig {
    c.map(|c| c.0).unwrap_or_default()
}

/// Closed polygon, counterclockwise around the set it encloses.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct ClosedCurve(fmcf_core::ClosedCurve);

#[pymethods]
impl ClosedCurve {
    #[new]
    fn new(points: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(ClosedCurve(fmcf_core::ClosedCurve::new(points.into_iter().map(Vec2::from).collect()).map_err(py_err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (radius, n, center=(0.0, 0.0)))]
    fn circle(radius: f64, n: usize, center: (f64, f64)) -> PyResult<Self> {
        Ok(ClosedCurve(fmcf_core::ClosedCurve::circle(center.into(), radius, n).map_err(py_err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (a, b, n, center=(0.0, 0.0)))]
    fn ellipse(a: f64, b: f64, n: usize, center: (f64, f64)) -> PyResult<Self> {
        Ok(ClosedCurve(fmcf_core::ClosedCurve::ellipse(center.into(), a, b, n).map_err(py_err)?))
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.0.nodes().iter().map(|p| (p.x, p.y)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.0.area()
    }

    #[getter]
    fn signed_area(&self) -> f64 {
        self.0.signed_area()
    }

    #[getter]
    fn perimeter(&self) -> f64 {
        self.0.perimeter()
    }

    fn is_simple(&self) -> bool {
        self.0.is_simple()
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        self.0.contains(p.into())
    }

    fn reversed(&self) -> Self {
        ClosedCurve(self.0.reversed())
    }

    fn translated(&self, d: (f64, f64)) -> Self {
        ClosedCurve(self.0.translated(d.into()))
    }

    fn rotated(&self, angle: f64) -> Self {
        ClosedCurve(self.0.rotated(angle))
    }

    fn scaled(&self, k: f64) -> Self {
        ClosedCurve(self.0.scaled(k))
    }

    fn __repr__(&self) -> String {
        format!("ClosedCurve(<{} nodes>, area={})", self.0.len(), self.0.area())
    }
}

fn curves(fronts: &[ClosedCurve]) -> Vec<fmcf_core::ClosedCurve> {
    fronts.iter().map(|c| c.0.clone()).collect()
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone, Copy)]
struct CurvatureResult {
    value: f64,
    error_estimate: f64,
    near_field_share: f64,
    tail_correction: f64,
    degraded: bool,
}

#[pymethods]
impl CurvatureResult {
    fn __repr__(&self) -> String {
        format!("CurvatureResult(value={}, error_estimate={})", self.value, self.error_estimate)
    }
}

impl From<fmcf_core::CurvatureResult> for CurvatureResult {
    fn from(r: fmcf_core::CurvatureResult) -> Self {
        CurvatureResult { value: r.value, error_estimate: r.error_estimate, near_field_share: r.near_field_share, tail_correction: r.tail_correction, degraded: r.degraded }
    }
}

#[pyfunction]
#[pyo3(signature = (curve, node_index, s, quad=None))]
fn curve_curvature(py: Python<'_>, curve: &ClosedCurve, node_index: usize, s: f64, quad: Option<QuadConfig>) -> PyResult<CurvatureResult> {
    if node_index >= curve.0.len() {
        return Err(PyIndexError::new_err(format!("node {node_index} out of range for {} nodes", curve.0.len())));
    }
    let s = order(s)?;
    let q = self::quad(quad);
    py.detach(|| curvature::curve_curvature(&curve.0, node_index, s, &q)).map(Into::into).map_err(py_err)
}

/// Curvature at every node of every front, the other fronts contributing as part of the set.
#[pyfunction]
#[pyo3(signature = (fronts, s, quad=None))]
fn set_curvature(py: Python<'_>, fronts: Vec<ClosedCurve>, s: f64, quad: Option<QuadConfig>) -> PyResult<Vec<Vec<CurvatureResult>>> {
    let s = order(s)?;
    let q = self::quad(quad);
    let fronts = curves(&fronts);
    let all = py.detach(|| SetEvaluator::new(&fronts).all(s, &q));
    all.into_iter().map(|f| f.into_iter().map(|r| r.map(Into::into).map_err(py_err)).collect()).collect()
}

/// Curvature of `{|y| < profile(x)}` for the strip `epsilon + (2/π) arctan(delta x²)`, at `(t, profile(t))`.
#[pyfunction]
#[pyo3(signature = (epsilon, delta, t, s, quad=None))]
fn strip_curvature(epsilon: f64, delta: f64, t: f64, s: f64, quad: Option<QuadConfig>) -> PyResult<CurvatureResult> {
    let region = StripSpec::new(epsilon, delta).map_err(py_err)?.region();
    curvature::graph_region_curvature(&region, t, order(s)?, &self::quad(quad)).map(Into::into).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (s, n=2, quad=None))]
fn omega_bar(s: f64, n: usize, quad: Option<QuadConfig>) -> PyResult<f64> {
    curvature::omega_bar(n, order(s)?, &self::quad(quad)).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (a, s, n=2))]
fn slab_curvature(a: f64, s: f64, n: usize) -> PyResult<f64> {
    curvature::slab_curvature(a, n, order(s)?).map_err(py_err)
}

#[pyfunction]
fn classical_curvature(curve: &ClosedCurve, node_index: usize) -> PyResult<f64> {
    if node_index >= curve.0.len() {
        return Err(PyIndexError::new_err(format!("node {node_index} out of range for {} nodes", curve.0.len())));
    }
    Ok(curvature::classical_curvature(&curve.0, node_index))
}

#[pyfunction]
fn ball_extinction_time(r0: f64, s: f64) -> PyResult<f64> {
    barriers::ball_extinction_time(&BallSpec::planar(r0).map_err(py_err)?, order(s)?).map_err(py_err)
}

#[pyfunction]
fn ball_radius_at(r0: f64, t: f64, s: f64) -> PyResult<f64> {
    barriers::ball_radius_at(&BallSpec::planar(r0).map_err(py_err)?, t, order(s)?).map_err(py_err)
}

/// Report of the strip positivity check as a dict.
#[pyfunction]
#[pyo3(signature = (epsilon, delta, s, samples=POSITIVITY_SAMPLES, quad=None))]
fn verify_strip_positivity(py: Python<'_>, epsilon: f64, delta: f64, s: f64, samples: usize, quad: Option<QuadConfig>) -> PyResult<Py<PyAny>> {
    let spec = StripSpec::new(epsilon, delta).map_err(py_err)?;
    let s = order(s)?;
    let q = self::quad(quad);
    let report = py.detach(|| barriers::verify_strip_positivity(&spec, s, samples, &q)).map_err(py_err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (s, quad=None))]
fn choose_neckpinch_params(py: Python<'_>, s: f64, quad: Option<QuadConfig>) -> PyResult<Py<PyAny>> {
    let s = order(s)?;
    let q = self::quad(quad);
    let params = py.detach(|| barriers::choose_neckpinch_params(2, s, &q)).map_err(py_err)?;
    to_py(py, &params)
}

/// Initial dumbbell of the neckpinch scenario and the flow configuration it is meant for.
#[pyfunction]
#[pyo3(signature = (s, config=None))]
fn dumbbell(py: Python<'_>, s: f64, config: Option<FlowConfig>) -> PyResult<(ClosedCurve, FlowConfig)> {
    let s = order(s)?;
    let base = flow_config(config);
    py.detach(|| {
        let params = barriers::choose_neckpinch_params(2, s, &base.quad)?;
        let cfg = scenarios::neckpinch_flow_config(&params, &base);
        Ok((ClosedCurve(scenarios::build_dumbbell(&params, cfg.target_spacing)?), FlowConfig(cfg)))
    })
    .map_err(py_err)
}

#[pyfunction]
fn inclusion_check(inner: &ClosedCurve, outer: &ClosedCurve, tol: f64) -> bool {
    flow::inclusion_check(&inner.0, &outer.0, tol)
}

#[pyclass(frozen, skip_from_py_object)]
struct Trajectory(flow::Trajectory);

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.snapshots.iter().map(|s| s.time).collect()
    }

    fn __len__(&self) -> usize {
        self.0.snapshots.len()
    }

    /// Fronts of snapshot `k`.
    fn fronts(&self, k: usize) -> PyResult<Vec<ClosedCurve>> {
        let snap = self.0.snapshots.get(k).ok_or_else(|| PyIndexError::new_err(format!("snapshot {k} out of range")))?;
        Ok(snap.fronts.iter().cloned().map(ClosedCurve).collect())
    }

    /// Node curvatures of snapshot `k`, one list per front; empty when not evaluated.
    fn curvature(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
        let snap = self.0.snapshots.get(k).ok_or_else(|| PyIndexError::new_err(format!("snapshot {k} out of range")))?;
        Ok(snap.curvature.clone())
    }

    #[getter]
    fn events(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.events)
    }

    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &flow::summarize(&self.0))
    }

    /// Writes `time,front_id,node_index,x,y,H_s` rows.
    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        flow::write_trajectory_csv(&self.0, std::io::BufWriter::new(file)).map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (fronts, s, config=None, t_max=f64::INFINITY, stop_on_all_extinct=true, stop_on_first_pinch=false))]
fn run_flow(py: Python<'_>, fronts: Vec<ClosedCurve>, s: f64, config: Option<FlowConfig>, t_max: f64, stop_on_all_extinct: bool, stop_on_first_pinch: bool) -> PyResult<Trajectory> {
    let s = order(s)?;
    let cfg = flow_config(config);
    let fronts = curves(&fronts);
    let stop = StopCondition { max_time: t_max, on_all_extinct: stop_on_all_extinct, on_first_pinch: stop_on_first_pinch };
    py.detach(|| flow::run_flow(&fronts, s, &cfg, &stop)).map(Trajectory).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (r0, s, config=None))]
fn scenario_shrinking_circle(py: Python<'_>, r0: f64, s: f64, config: Option<FlowConfig>) -> PyResult<Py<PyAny>> {
    let s = order(s)?;
    let cfg = flow_config(config);
    let report = py.detach(|| scenarios::scenario_shrinking_circle(r0, s, &cfg)).map_err(py_err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (s, config=None))]
fn scenario_neckpinch(py: Python<'_>, s: f64, config: Option<FlowConfig>) -> PyResult<Py<PyAny>> {
    let s = order(s)?;
    let cfg = flow_config(config);
    let report = py.detach(|| scenarios::scenario_neckpinch(s, &cfg)).map_err(py_err)?;
    to_py(py, &report)
}

#[pymodule]
pub fn fmcf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AccuracyError", m.py().get_type::<AccuracyError>())?;
    m.add_class::<FracOrder>()?;
    m.add_class::<QuadConfig>()?;
    m.add_class::<FlowConfig>()?;
    m.add_class::<ClosedCurve>()?;
    m.add_class::<CurvatureResult>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(curve_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(set_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(strip_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(omega_bar, m)?)?;
    m.add_function(wrap_pyfunction!(slab_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(classical_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(ball_extinction_time, m)?)?;
    m.add_function(wrap_pyfunction!(ball_radius_at, m)?)?;
    m.add_function(wrap_pyfunction!(verify_strip_positivity, m)?)?;
    m.add_function(wrap_pyfunction!(choose_neckpinch_params, m)?)?;
    m.add_function(wrap_pyfunction!(dumbbell, m)?)?;
    m.add_function(wrap_pyfunction!(inclusion_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_flow, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_shrinking_circle, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_neckpinch, m)?)?;
    Ok(())
}
