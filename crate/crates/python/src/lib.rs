//! Python bindings: graphs, generation, SPARQL text, evaluation, metrics and
//! QALD files.

use std::path::PathBuf;

use eventqa_core::dataset_io::{self, DatasetEntry, QaldDocument};
use eventqa_core::evaluator;
use eventqa_core::fixture;
use eventqa_core::generator::{self, GeneratorConfig};
use eventqa_core::kg::{self, ntriples, GraphModel, SchemaConfig};
use eventqa_core::metrics;
use eventqa_core::query::SemanticQuery;
use eventqa_core::sparql;
use eventqa_core::translator::{self, MappingTable};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

pub fn parse_model(name: &str) -> PyResult<GraphModel> {
    match name {
        "reified" => Ok(GraphModel::Reified),
        "direct" => Ok(GraphModel::Direct),
        other => Err(value_err(format!("unknown graph model {other:?}, expected \"reified\" or \"direct\""))),
    }
}

fn model_name(m: GraphModel) -> &'static str {
    match m {
        GraphModel::Reified => "reified",
        GraphModel::Direct => "direct",
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn fraction<'py>(py: Python<'py>, r: &num_rational::BigRational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((r.to_string(),))
}

/// A loaded knowledge graph.
#[pyclass(name = "KnowledgeGraph", module = "eventqa", frozen)]
pub struct PyGraph {
    inner: kg::KnowledgeGraph,
}

#[pymethods]
impl PyGraph {
    /// Reads N-Triples files (gzipped or plain). `schema` is `eventkg`,
    /// `dbpedia` or a TOML file.
    #[staticmethod]
    #[pyo3(signature = (paths, schema = "eventkg", lenient = false))]
    fn from_ntriples(paths: Vec<PathBuf>, schema: &str, lenient: bool) -> PyResult<Self> {
        let schema = SchemaConfig::load(schema).map_err(value_err)?;
        let mode = if lenient { ntriples::ParseMode::Lenient } else { ntriples::ParseMode::Strict };
        let mut triples = Vec::new();
        for p in &paths {
            let more = ntriples::read_file(p, mode).map_err(|e| PyIOError::new_err(format!("{}: {e}", p.display())))?;
            triples.extend(more);
        }
        let inner = kg::build_graph(triples, &schema).map_err(value_err)?;
        Ok(PyGraph { inner })
    }

    /// The bundled synthetic graph. `seed` and `events` pick another instance.
    #[staticmethod]
    #[pyo3(signature = (model = "reified", seed = None, events = None))]
    fn fixture(model: &str, seed: Option<u64>, events: Option<usize>) -> PyResult<Self> {
        let model = parse_model(model)?;
        let toy = match (seed, events) {
            (None, None) => fixture::toy(),
            (s, e) => fixture::toy_with(s.unwrap_or(fixture::TOY_SEED), e.unwrap_or(500)),
        };
        Ok(PyGraph { inner: toy.graph(model) })
    }

    #[getter]
    fn model(&self) -> &'static str {
        model_name(self.inner.model())
    }

    #[getter]
    fn triple_count(&self) -> usize {
        self.inner.triple_count()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn relation_count(&self) -> usize {
        self.inner.relations().len()
    }

    #[getter]
    fn digest(&self) -> &str {
        self.inner.digest()
    }

    fn events(&self) -> Vec<String> {
        self.inner.events().iter().map(|n| n.to_string()).collect()
    }

    fn entities(&self) -> Vec<String> {
        self.inner.entities().iter().map(|n| n.to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!("KnowledgeGraph(model={:?}, triples={}, nodes={})", self.model(), self.triple_count(), self.node_count())
    }
}

/// A semantic query over one graph model.
#[pyclass(name = "Query", module = "eventqa", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyQuery {
    inner: SemanticQuery,
}

#[pymethods]
impl PyQuery {
    #[staticmethod]
    #[pyo3(signature = (text, model = "reified"))]
    fn parse(text: &str, model: &str) -> PyResult<Self> {
        let inner = sparql::parse(text, parse_model(model)?).map_err(value_err)?;
        Ok(PyQuery { inner })
    }

    /// SPARQL text without PREFIX lines.
    #[getter]
    fn sparql(&self) -> PyResult<String> {
        Ok(sparql::emit(&self.inner).map_err(value_err)?.text)
    }

    /// SPARQL text with the PREFIX lines it needs.
    fn sparql_with_prologue(&self) -> PyResult<String> {
        Ok(sparql::emit(&self.inner).map_err(value_err)?.with_prologue())
    }

    #[getter]
    fn qtype(&self) -> String {
        self.inner.qtype().to_string()
    }

    #[getter]
    fn model(&self) -> &'static str {
        model_name(self.inner.model())
    }

    #[getter]
    fn relation_count(&self) -> usize {
        self.inner.relation_count()
    }

    #[getter]
    fn has_constraint(&self) -> bool {
        self.inner.constraint().is_some()
    }

    fn element_set(&self) -> Vec<String> {
        self.inner.element_set().into_iter().collect()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner)
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("Query({:?})", self.sparql()?))
    }
}

/// Identity links between the reified and direct graphs.
#[pyclass(name = "MappingTable", module = "eventqa", frozen)]
pub struct PyMappings {
    inner: MappingTable,
}

#[pymethods]
impl PyMappings {
    #[new]
    fn new(links: Vec<(String, String)>) -> Self {
        PyMappings { inner: MappingTable::from_links(links.iter().map(|(a, b)| (a.as_str(), b.as_str()))) }
    }

    #[staticmethod]
    #[pyo3(signature = (path, predicate = eventqa_core::vocab::OWL_SAME_AS))]
    fn from_ntriples(path: PathBuf, predicate: &str) -> PyResult<Self> {
        let inner = MappingTable::from_ntriples(&path, predicate).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyMappings { inner })
    }

    /// Links recorded in a reified graph.
    #[staticmethod]
    fn from_graph(graph: &PyGraph) -> Self {
        PyMappings { inner: MappingTable::from_graph(&graph.inner) }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A QALD dataset held in memory.
#[pyclass(name = "Dataset", module = "eventqa")]
pub struct PyDataset {
    inner: QaldDocument,
}

#[pymethods]
impl PyDataset {
    /// Numbers the queries 1, 2, ... in order.
    #[staticmethod]
    #[pyo3(signature = (queries, dataset_id = dataset_io::DEFAULT_DATASET_ID))]
    fn from_queries(queries: Vec<PyRef<'_, PyQuery>>, dataset_id: &str) -> PyResult<Self> {
        let entries = queries
            .iter()
            .enumerate()
            .map(|(i, q)| DatasetEntry::from_query((i + 1).to_string(), &q.inner))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        Ok(PyDataset { inner: QaldDocument { dataset_id: dataset_id.to_string(), entries } })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let inner = dataset_io::read_qald(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn loads(text: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: dataset_io::read_qald_str(text).map_err(value_err)? })
    }

    fn dumps(&self) -> PyResult<String> {
        dataset_io::qald_string(&self.inner.entries, &self.inner.dataset_id).map_err(value_err)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        dataset_io::write_qald(&self.inner.entries, &self.inner.dataset_id, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn dataset_id(&self) -> &str {
        &self.inner.dataset_id
    }

    fn ids(&self) -> Vec<String> {
        self.inner.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// `(id, Query)` pairs for the reified-side queries.
    fn queries(&self) -> PyResult<Vec<(String, PyQuery)>> {
        self.inner
            .entries
            .iter()
            .map(|e| Ok((e.id.clone(), PyQuery { inner: e.query().map_err(|err| value_err(format!("{}: {err}", e.id)))? })))
            .collect()
    }

    /// Stores each query's answers over `graph`.
    fn set_answers(&mut self, graph: &PyGraph) -> PyResult<()> {
        for e in &mut self.inner.entries {
            let q = e.query().map_err(value_err)?;
            e.answers = Some(evaluator::evaluate(&graph.inner, &q).map_err(value_err)?);
        }
        Ok(())
    }

    /// Answers stored for `id`, or `None`.
    fn answers<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
        let e = self.inner.entries.iter().find(|e| e.id == id).ok_or_else(|| value_err(format!("no query {id:?}")))?;
        e.answers.as_ref().map(|a| json_to_py(py, a)).transpose()
    }

    fn set_verbalization(&mut self, id: &str, language: &str, text: &str) -> PyResult<()> {
        let e = self.inner.entries.iter_mut().find(|e| e.id == id).ok_or_else(|| value_err(format!("no query {id:?}")))?;
        e.verbalizations.insert(language.to_string(), text.to_string());
        Ok(())
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }
}

fn queries_of(qs: &[PyRef<'_, PyQuery>]) -> Vec<SemanticQuery> {
    qs.iter().map(|q| q.inner.clone()).collect()
}

/// Generates `n` distinct queries over `graph`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (graph, n, seed = 42, max_relations = 2, temporal_probability = 0.5, type_weights = None, jobs = None))]
fn generate(
    py: Python<'_>,
    graph: &PyGraph,
    n: usize,
    seed: u64,
    max_relations: usize,
    temporal_probability: f64,
    type_weights: Option<[f64; 3]>,
    jobs: Option<usize>,
) -> PyResult<Vec<PyQuery>> {
    let mut config = GeneratorConfig::with_seed(seed);
    config.max_relations = max_relations;
    config.temporal_constraint_probability = temporal_probability;
    if let Some(w) = type_weights {
        config.type_weights = w;
    }
    let kg = &graph.inner;
    let qs = py.detach(|| generator::generate_dataset(kg, n, &config, jobs)).map_err(value_err)?;
    Ok(qs.into_iter().map(|inner| PyQuery { inner }).collect())
}

/// Answers as a dict with a `kind` of `boolean`, `bindings` or `count`.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, graph: &PyGraph, query: &PyQuery) -> PyResult<Bound<'py, PyAny>> {
    let a = evaluator::evaluate(&graph.inner, &query.inner).map_err(value_err)?;
    json_to_py(py, &a)
}

/// Rewrites a reified query into the direct model. Raises `ValueError`
/// when some part has no counterpart.
#[pyfunction]
#[pyo3(signature = (query, mappings, target = None))]
fn translate(query: &PyQuery, mappings: &PyMappings, target: Option<&PyGraph>) -> PyResult<PyQuery> {
    let inner = translator::translate(&query.inner, &mappings.inner, target.map(|t| &t.inner)).map_err(value_err)?;
    Ok(PyQuery { inner })
}

/// Mean relation count, as an exact `Fraction`.
#[pyfunction]
fn complexity<'py>(py: Python<'py>, queries: Vec<PyRef<'_, PyQuery>>) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &metrics::complexity(&queries_of(&queries)).map_err(value_err)?)
}

/// One minus the mean pairwise similarity, as an exact `Fraction`.
#[pyfunction]
fn query_diversity<'py>(py: Python<'py>, queries: Vec<PyRef<'_, PyQuery>>) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &metrics::query_diversity(&queries_of(&queries)).map_err(value_err)?)
}

#[pyfunction]
fn text_diversity(texts: Vec<String>) -> PyResult<f64> {
    metrics::text_diversity(&texts).map_err(value_err)
}

#[pymodule]
fn eventqa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyQuery>()?;
    m.add_class::<PyMappings>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(translate, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_function(wrap_pyfunction!(query_diversity, m)?)?;
    m.add_function(wrap_pyfunction!(text_diversity, m)?)?;
    Ok(())
}
