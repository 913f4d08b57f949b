//! Python bindings for perfcity: model validation, city layout, the
//! history buffer and view cursor, the wire codec, the workload generator
//! and replay, and an embedded server.

use std::collections::BTreeMap;
use std::net::SocketAddr;

use perfcity_core::harness::{self, TraceFile, WorkloadSpec};
use perfcity_core::history::{self, CursorMode, WindowRange};
use perfcity_core::ingest::{self, CallEvent, ControlAction, MetricFrame, WireRecord};
use perfcity_core::layout::{self, ColorScale};
use perfcity_core::model::{self, ClassInfo, ModelRecord, SystemModel};
use perfcity_core::service::{self, ServerConfig, ServerHandle};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

/// `(window_index, window_start_ms, counts)`.
type FrameTuple = (u64, u64, BTreeMap<String, u64>);
/// `(x, z, width, depth)`.
type RectTuple = (f64, f64, f64, f64);

create_exception!(perfcity, PerfCityError, PyException, "Base class of perfcity errors.");
create_exception!(perfcity, ModelError, PerfCityError);
create_exception!(perfcity, DecodeError, PerfCityError);
create_exception!(perfcity, HistoryError, PerfCityError);
create_exception!(perfcity, LayoutError, PerfCityError);
create_exception!(perfcity, HarnessError, PerfCityError);
create_exception!(perfcity, ServiceError, PerfCityError);

fn model_err(e: model::ModelError) -> PyErr {
    ModelError::new_err(e.to_string())
}

fn history_err(e: history::HistoryError) -> PyErr {
    HistoryError::new_err(e.to_string())
}

fn harness_err(e: harness::HarnessError) -> PyErr {
    HarnessError::new_err(e.to_string())
}

fn service_err(e: service::ServiceError) -> PyErr {
    ServiceError::new_err(e.to_string())
}

fn model_record(json: &str) -> PyResult<ModelRecord> {
    serde_json::from_str(json).map_err(|e| ModelError::new_err(format!("bad model record: {e}")))
}

fn range_tuple(r: Option<WindowRange>) -> Option<(u64, u64)> {
    r.map(|r| (r.oldest, r.newest))
}

/// A validated system model.
#[pyclass(module = "perfcity", name = "Model", frozen)]
struct PyModel {
    inner: SystemModel,
}

#[pymethods]
impl PyModel {
    /// Validates a model record given as JSON.
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        let inner = model::validate_model(&model_record(json)?).map_err(model_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.inner.revision()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, class_id: &str) -> bool {
        self.inner.contains(class_id)
    }

    /// Class ids in depth-first package order.
    fn class_order(&self) -> Vec<String> {
        model::class_order(&self.inner)
    }

    /// `(name, package_path, num_methods, num_attributes)` for one class.
    fn class_info(&self, class_id: &str) -> Option<(String, Vec<String>, u64, u64)> {
        self.inner
            .class(class_id)
            .map(|c| (c.name.clone(), c.package_path.clone(), c.num_methods, c.num_attributes))
    }

    /// Returns the model that replaces this one; its revision is one higher.
    fn apply_update(&self, json: &str) -> PyResult<Self> {
        let inner = model::apply_model_update(&self.inner, &model_record(json)?).map_err(model_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner.to_record()).expect("model records serialize")
    }

    fn __repr__(&self) -> String {
        format!("Model(classes={}, revision={})", self.inner.len(), self.inner.revision())
    }
}

/// Validates a model record given as JSON.
#[pyfunction]
fn validate_model(json: &str) -> PyResult<PyModel> {
    PyModel::from_json(json)
}

/// Encoding parameters for buildings and colors.
#[pyclass(module = "perfcity", name = "LayoutConfig", frozen)]
struct PyLayoutConfig {
    inner: layout::LayoutConfig,
}

#[pymethods]
impl PyLayoutConfig {
    #[new]
    #[pyo3(signature = (*, unit_height=None, min_height=None, unit_area=None, min_side=None, margin=None, district_pad=None, color_ref=None, color_scale=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        unit_height: Option<f64>,
        min_height: Option<f64>,
        unit_area: Option<f64>,
        min_side: Option<f64>,
        margin: Option<f64>,
        district_pad: Option<f64>,
        color_ref: Option<u64>,
        color_scale: Option<&str>,
    ) -> PyResult<Self> {
        let d = layout::LayoutConfig::default();
        let inner = layout::LayoutConfig {
            unit_height: unit_height.unwrap_or(d.unit_height),
            min_height: min_height.unwrap_or(d.min_height),
            unit_area: unit_area.unwrap_or(d.unit_area),
            min_side: min_side.unwrap_or(d.min_side),
            margin: margin.unwrap_or(d.margin),
            district_pad: district_pad.unwrap_or(d.district_pad),
            color_ref: color_ref.unwrap_or(d.color_ref),
            color_scale: match color_scale {
                Some(s) => s.parse::<ColorScale>().map_err(|e| LayoutError::new_err(e.to_string()))?,
                None => d.color_scale,
            },
        };
        inner.validate().map_err(|e| LayoutError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    fn __repr__(&self) -> String {
        format!("LayoutConfig({})", self.to_json())
    }
}

fn config_or_default(cfg: Option<&PyLayoutConfig>) -> layout::LayoutConfig {
    cfg.map(|c| c.inner).unwrap_or_default()
}

/// A laid-out city.
#[pyclass(module = "perfcity", name = "Scene", frozen)]
struct PyScene {
    inner: layout::CityScene,
}

#[pymethods]
impl PyScene {
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        let inner = layout::scene_parse(json).map_err(|e| LayoutError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn model_revision(&self) -> u64 {
        self.inner.model_revision
    }

    /// `(x, z, width, depth)` of the ground covered by the city.
    #[getter]
    fn extent(&self) -> RectTuple {
        let e = self.inner.extent;
        (e.x, e.z, e.width, e.depth)
    }

    /// `{class_id: (x, z, side, height)}` for every building.
    fn buildings(&self) -> BTreeMap<String, (f64, f64, f64, f64)> {
        self.inner.buildings().map(|b| (b.class_id.clone(), (b.x, b.z, b.side, b.height))).collect()
    }

    /// `(package_path, depth_level, (x, z, width, depth))` for every district, root first.
    fn districts(&self) -> Vec<(Vec<String>, u32, RectTuple)> {
        self.inner
            .root
            .walk()
            .into_iter()
            .map(|d| {
                let b = d.bounds;
                (d.package_path.clone(), d.depth_level, (b.x, b.z, b.width, b.depth))
            })
            .collect()
    }

    /// Copy scaled so the longer ground edge has length `scale`.
    fn normalized(&self, scale: f64) -> Self {
        Self { inner: self.inner.normalized(scale) }
    }

    fn to_json(&self) -> String {
        layout::scene_serialize(&self.inner)
    }
}

#[pyfunction]
#[pyo3(signature = (model, config=None))]
fn layout_city(model: &PyModel, config: Option<&PyLayoutConfig>) -> PyScene {
    PyScene { inner: layout::layout_city(&model.inner, &config_or_default(config)) }
}

/// `(height, side)` of the building for a class with the given metrics.
#[pyfunction]
#[pyo3(signature = (num_methods, num_attributes, config=None))]
fn building_dimensions(num_methods: u64, num_attributes: u64, config: Option<&PyLayoutConfig>) -> (f64, f64) {
    let class = ClassInfo {
        id: String::new(),
        name: String::new(),
        package_path: vec![],
        num_methods,
        num_attributes,
    };
    layout::building_dimensions(&class, &config_or_default(config))
}

/// `(intensity, "#rrggbb")` for a per-window call count.
#[pyfunction]
#[pyo3(signature = (count, config=None))]
fn color_for(count: u64, config: Option<&PyLayoutConfig>) -> (f64, String) {
    let c = layout::color_for(count, &config_or_default(config));
    (c.intensity, c.hex())
}

/// Bounded history of frames, oldest evicted first.
#[pyclass(module = "perfcity", name = "HistoryBuffer")]
struct PyHistory {
    inner: history::HistoryBuffer,
}

#[pymethods]
impl PyHistory {
    #[new]
    #[pyo3(signature = (capacity=history::DEFAULT_HISTORY_CAPACITY))]
    fn new(capacity: usize) -> PyResult<Self> {
        Ok(Self { inner: history::HistoryBuffer::new(capacity).map_err(history_err)? })
    }

    /// Appends a frame; returns the evicted window index, if any.
    #[pyo3(signature = (window_index, window_start_ms, counts))]
    fn push_frame(&mut self, window_index: u64, window_start_ms: u64, counts: BTreeMap<String, u64>) -> PyResult<Option<u64>> {
        let frame = MetricFrame { window_index, window_start_ms, counts };
        let evicted = self.inner.push_frame(frame).map_err(history_err)?;
        Ok(evicted.map(|f| f.window_index))
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    #[getter]
    fn total_pushed(&self) -> u64 {
        self.inner.total_pushed()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(oldest, newest)` buffered window indices, or None when empty.
    fn range(&self) -> Option<(u64, u64)> {
        range_tuple(self.inner.range())
    }

    /// Buffered frames as `(window_index, window_start_ms, counts)`, oldest first.
    fn frames(&self) -> Vec<FrameTuple> {
        self.inner.frames().map(|f| (f.window_index, f.window_start_ms, f.counts.clone())).collect()
    }
}

/// Live or paused position within the history.
#[pyclass(module = "perfcity", name = "ViewCursor")]
struct PyCursor {
    inner: history::ViewCursor,
}

fn parse_action(action: &str) -> PyResult<ControlAction> {
    match action {
        "pause" => Ok(ControlAction::Pause),
        "resume" => Ok(ControlAction::Resume),
        "seek" => Ok(ControlAction::Seek),
        other => Err(PyValueError::new_err(format!("unknown action `{other}`"))),
    }
}

#[pymethods]
impl PyCursor {
    /// A live cursor at the newest frame of `history`.
    #[new]
    fn new(history: &PyHistory) -> Self {
        Self { inner: history::ViewCursor::live(history.inner.range()) }
    }

    /// Applies `pause`, `resume` or `seek` (with `arg`). A failed action
    /// leaves the cursor unchanged.
    #[pyo3(signature = (action, history, arg=None))]
    fn apply(&mut self, action: &str, history: &PyHistory, arg: Option<u64>) -> PyResult<()> {
        let next = self.inner.set_cursor(parse_action(action)?, arg, history.inner.range()).map_err(history_err)?;
        self.inner = next;
        Ok(())
    }

    /// Re-anchors the cursor after `history` changed.
    fn sync(&mut self, history: &PyHistory) {
        self.inner.sync(history.inner.range());
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            CursorMode::Live => "live",
            CursorMode::Paused => "paused",
        }
    }

    #[getter]
    fn position(&self) -> Option<u64> {
        self.inner.position
    }
}

/// `(rows, columns, cells)` of the time-by-class scatter at the cursor.
#[pyfunction]
fn scatter_matrix(history: &PyHistory, order: Vec<String>, cursor: &PyCursor) -> (Vec<String>, Vec<u64>, Vec<Vec<u64>>) {
    let m = history::scatter_matrix(&history.inner, &order, &cursor.inner);
    (m.rows, m.columns, m.cells)
}

/// Aggregates `(class_id, count, timestamp_ms)` events into frames.
/// Returns `(frames, tally)` with frames as `(window_index, window_start_ms, counts)`.
#[pyfunction]
#[pyo3(signature = (events, model, window_ms=ingest::DEFAULT_WINDOW_MS))]
fn window_aggregate<'py>(
    py: Python<'py>,
    events: Vec<(String, u64, u64)>,
    model: &PyModel,
    window_ms: u64,
) -> PyResult<(Vec<FrameTuple>, Bound<'py, PyDict>)> {
    if window_ms == 0 {
        return Err(PyValueError::new_err("window_ms must be positive"));
    }
    let events = events.into_iter().map(|(id, count, ts)| CallEvent::new(id, count, ts));
    let agg = ingest::window_aggregate(events, window_ms, &model.inner);
    let tally = PyDict::new(py);
    tally.set_item("late_events", agg.tally.late_events)?;
    tally.set_item("late_calls", agg.tally.late_calls)?;
    tally.set_item("unknown_events", agg.tally.unknown_events)?;
    tally.set_item("unknown_calls", agg.tally.unknown_calls)?;
    let frames = agg.frames.into_iter().map(|f| (f.window_index, f.window_start_ms, f.counts)).collect();
    Ok((frames, tally))
}

fn kind(record: &WireRecord) -> &'static str {
    match record {
        WireRecord::Model(_) => "model",
        WireRecord::Event(_) => "event",
        WireRecord::Frame(_) => "frame",
        WireRecord::Control(_) => "control",
    }
}

/// Decodes one wire line. Returns `(kind, canonical_line)`.
#[pyfunction]
fn decode_record(line: &str) -> PyResult<(&'static str, String)> {
    let record = ingest::decode_record(line).map_err(|e| DecodeError::new_err(e.to_string()))?;
    Ok((kind(&record), ingest::encode_record(&record)))
}

/// Encodes a call event as a wire line.
#[pyfunction]
fn encode_event(class_id: String, count: u64, timestamp_ms: u64) -> PyResult<String> {
    if count == 0 {
        return Err(PyValueError::new_err("count must be at least 1"));
    }
    Ok(ingest::encode_record(&WireRecord::Event(CallEvent::new(class_id, count, timestamp_ms))))
}

/// A recorded workload: a model plus time-ordered events.
#[pyclass(module = "perfcity", name = "Trace", frozen)]
struct PyTrace {
    inner: TraceFile,
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: TraceFile::parse(text).map_err(harness_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn model_json(&self) -> String {
        serde_json::to_string(&self.inner.model).expect("model records serialize")
    }

    /// Events as `(class_id, count, timestamp_ms)`.
    fn events(&self) -> Vec<(String, u64, u64)> {
        self.inner.events.iter().map(|e| (e.class_id.clone(), e.count, e.timestamp_ms)).collect()
    }

    /// Calls per class over the whole trace.
    fn totals(&self) -> BTreeMap<String, u64> {
        self.inner.totals()
    }

    #[getter]
    fn duration_ms(&self) -> u64 {
        self.inner.duration_ms()
    }

    fn __len__(&self) -> usize {
        self.inner.events.len()
    }
}

/// Generates a seeded trace from a workload spec given as JSON.
#[pyfunction]
fn generate_workload(spec_json: &str) -> PyResult<PyTrace> {
    let spec = WorkloadSpec::from_json(spec_json).map_err(harness_err)?;
    Ok(PyTrace { inner: harness::generate_workload(&spec).map_err(harness_err)? })
}

/// A random model record as JSON.
#[pyfunction]
#[pyo3(signature = (classes, max_depth=3, seed=0))]
fn random_model(classes: usize, max_depth: usize, seed: u64) -> String {
    serde_json::to_string(&harness::random_model(classes, max_depth, seed)).expect("model records serialize")
}

/// Streams `trace` to an ingest address in real time scaled by `speed`.
/// Returns `(records_sent, wall_seconds)`.
#[pyfunction]
#[pyo3(signature = (trace, target, speed=1.0))]
fn replay(py: Python<'_>, trace: &PyTrace, target: &str, speed: f64) -> PyResult<(u64, f64)> {
    let report = py.detach(|| harness::replay(&trace.inner, target, speed)).map_err(harness_err)?;
    Ok((report.records_sent, report.wall_time.as_secs_f64()))
}

/// An embedded server with its own runtime.
#[pyclass(module = "perfcity", name = "Server")]
struct PyServer {
    runtime: tokio::runtime::Runtime,
    handle: Option<ServerHandle>,
}

impl PyServer {
    fn handle(&self) -> PyResult<&ServerHandle> {
        self.handle.as_ref().ok_or_else(|| ServiceError::new_err("server is stopped"))
    }
}

fn parse_addr(s: &str) -> PyResult<SocketAddr> {
    s.parse().map_err(|e| PyValueError::new_err(format!("bad address `{s}`: {e}")))
}

#[pymethods]
impl PyServer {
    #[new]
    #[pyo3(signature = (ingest="127.0.0.1:7070", serve="127.0.0.1:7071", window_ms=ingest::DEFAULT_WINDOW_MS, history=history::DEFAULT_HISTORY_CAPACITY, layout=None, scale=None))]
    fn new(
        py: Python<'_>,
        ingest: &str,
        serve: &str,
        window_ms: u64,
        history: usize,
        layout: Option<&PyLayoutConfig>,
        scale: Option<f64>,
    ) -> PyResult<Self> {
        let d = ServerConfig::default();
        let cfg = ServerConfig {
            ingest_address: parse_addr(ingest)?,
            client_address: parse_addr(serve)?,
            window_ms,
            history_capacity: history,
            layout: config_or_default(layout),
            scale: scale.unwrap_or(d.scale),
        };
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| ServiceError::new_err(e.to_string()))?;
        let handle = py.detach(|| runtime.block_on(service::run_server(cfg))).map_err(service_err)?;
        Ok(Self { runtime, handle: Some(handle) })
    }

    #[getter]
    fn ingest_addr(&self) -> PyResult<String> {
        Ok(self.handle()?.ingest_addr().to_string())
    }

    #[getter]
    fn client_url(&self) -> PyResult<String> {
        Ok(self.handle()?.client_url())
    }

    /// Installs a model record (JSON); returns the new revision.
    fn load_model(&self, py: Python<'_>, json: &str) -> PyResult<u64> {
        let record = model_record(json)?;
        let handle = self.handle()?;
        let result = py.detach(|| self.runtime.block_on(handle.load_model(record))).map_err(service_err)?;
        result.map_err(model_err)
    }

    /// Snapshot of server counters plus buffered frames.
    fn status<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let handle = self.handle()?;
        let s = py.detach(|| self.runtime.block_on(handle.status())).map_err(service_err)?;
        let out = PyDict::new(py);
        out.set_item("model_revision", s.model_revision)?;
        out.set_item("events_accepted", s.events_accepted)?;
        out.set_item("frames_emitted", s.frames_emitted)?;
        out.set_item("open_window", s.open_window)?;
        out.set_item("dropped_events", s.tally.events())?;
        out.set_item("history_range", range_tuple(s.history.range()))?;
        let frames: Vec<_> = s.history.frames().map(|f| (f.window_index, f.window_start_ms, f.counts.clone())).collect();
        out.set_item("frames", frames)?;
        Ok(out)
    }

    /// Flushes the open window and stops. Returns the flushed frame, if any.
    fn shutdown(&mut self, py: Python<'_>) -> Option<FrameTuple> {
        let handle = self.handle.take()?;
        let last = py.detach(|| self.runtime.block_on(handle.shutdown()));
        last.map(|f| (f.window_index, f.window_start_ms, f.counts))
    }
}

#[pymodule]
fn perfcity(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("PerfCityError", py.get_type::<PerfCityError>())?;
    m.add("ModelError", py.get_type::<ModelError>())?;
    m.add("DecodeError", py.get_type::<DecodeError>())?;
    m.add("HistoryError", py.get_type::<HistoryError>())?;
    m.add("LayoutError", py.get_type::<LayoutError>())?;
    m.add("HarnessError", py.get_type::<HarnessError>())?;
    m.add("ServiceError", py.get_type::<ServiceError>())?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyLayoutConfig>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyHistory>()?;
    m.add_class::<PyCursor>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyServer>()?;
    m.add_function(wrap_pyfunction!(validate_model, m)?)?;
    m.add_function(wrap_pyfunction!(layout_city, m)?)?;
    m.add_function(wrap_pyfunction!(building_dimensions, m)?)?;
    m.add_function(wrap_pyfunction!(color_for, m)?)?;
    m.add_function(wrap_pyfunction!(scatter_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(window_aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(decode_record, m)?)?;
    m.add_function(wrap_pyfunction!(encode_event, m)?)?;
    m.add_function(wrap_pyfunction!(generate_workload, m)?)?;
    m.add_function(wrap_pyfunction!(random_model, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add("DEFAULT_WINDOW_MS", ingest::DEFAULT_WINDOW_MS)?;
    m.add("DEFAULT_HISTORY_CAPACITY", history::DEFAULT_HISTORY_CAPACITY)?;
    Ok(())
}
