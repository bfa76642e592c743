//! QALD JSON reading and writing, VoID metadata and IRI lists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::AnswerSet;
use crate::kg::{GraphModel, KnowledgeGraph, Literal, Term};
use crate::metrics::{dataset_stats, DatasetStats};
use crate::query::{QueryType, SemanticQuery};
use crate::sparql::{self, SparqlError, SparqlText};
use crate::vocab;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed dataset at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("invalid entry {id}: {reason}")]
    InvalidEntry { id: String, reason: String },
}

/// Provenance of a generated entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated: Option<String>,
    /// The term the projected variable was generated from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<ResultTerm>,
}

impl EntryMetadata {
    fn is_empty(&self) -> bool {
        self.seed_trace.is_none() && self.generated.is_none() && self.binding.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub sparql_eventkg: SparqlText,
    pub sparql_dbpedia: Option<SparqlText>,
    /// Language tag → question text.
    pub verbalizations: BTreeMap<String, String>,
    pub answers: Option<AnswerSet>,
    pub metadata: EntryMetadata,
}

impl DatasetEntry {
    /// Builds an entry from a query, keeping its trace digest and original
    /// binding.
    pub fn from_query(id: impl Into<String>, q: &SemanticQuery) -> Result<Self, SparqlError> {
        let binding = q.target().and_then(|v| v.bound_to.as_ref()).map(ResultTerm::from_term);
        Ok(DatasetEntry {
            id: id.into(),
            sparql_eventkg: sparql::emit(q)?,
            sparql_dbpedia: None,
            verbalizations: BTreeMap::new(),
            answers: None,
            metadata: EntryMetadata { seed_trace: q.trace().map(|t| t.digest()), generated: None, binding },
        })
    }

    /// Parses the main query and reattaches the recorded binding.
    pub fn query(&self) -> Result<SemanticQuery, SparqlError> {
        let q = sparql::parse(&self.sparql_eventkg.text, self.sparql_eventkg.model)?;
        Ok(match self.metadata.binding.as_ref().and_then(|b| b.to_term()) {
            Some(t) => q.with_target_binding(t),
            None => q,
        })
    }

    pub fn dbpedia_query(&self) -> Option<Result<SemanticQuery, SparqlError>> {
        self.sparql_dbpedia.as_ref().map(|s| sparql::parse(&s.text, s.model))
    }
}

// ------------------------------------------------------------ wire format

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultTerm {
    #[serde(rename = "type")]
    pub kind: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
    #[serde(default, rename = "xml:lang", skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl ResultTerm {
    pub fn from_term(t: &Term) -> Self {
        let plain = |kind: &str, value: &str| ResultTerm { kind: kind.into(), value: value.into(), datatype: None, lang: None };
        match t {
            Term::Iri { value } => plain("uri", value),
            Term::Blank { value } => plain("bnode", value),
            Term::Literal { value: l } => ResultTerm {
                kind: "literal".into(),
                value: l.lexical().into(),
                datatype: l.datatype().map(str::to_string),
                lang: l.language().map(str::to_string),
            },
        }
    }

    pub fn to_term(&self) -> Option<Term> {
        Some(match self.kind.as_str() {
            "uri" => Term::iri(&self.value),
            "bnode" => Term::blank(&self.value),
            "literal" | "typed-literal" => Term::literal(match (&self.datatype, &self.lang) {
                (_, Some(lang)) => Literal::lang(&self.value, lang),
                (Some(dt), None) => Literal::typed(&self.value, dt),
                (None, None) => Literal::plain(&self.value),
            }),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Head {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Results {
    bindings: Vec<BTreeMap<String, ResultTerm>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WireAnswer {
    head: Head,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boolean: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    results: Option<Results>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WireQuestion {
    language: String,
    string: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WireQuery {
    sparql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<GraphModel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum WireId {
    Text(String),
    Number(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WireEntry {
    id: WireId,
    #[serde(default)]
    question: Vec<WireQuestion>,
    query: WireQuery,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    query_dbpedia: Option<WireQuery>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    answers: Vec<WireAnswer>,
    #[serde(default, skip_serializing_if = "EntryMetadata::is_empty")]
    metadata: EntryMetadata,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WireDatasetId {
    id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WireDocument {
    dataset: WireDatasetId,
    questions: Vec<WireEntry>,
}

pub const DEFAULT_DATASET_ID: &str = "event-qa";

fn answer_to_wire(a: &AnswerSet) -> WireAnswer {
    match a {
        AnswerSet::Boolean { value } => WireAnswer { head: Head { vars: vec![] }, boolean: Some(*value), results: None },
        AnswerSet::Bindings { variable, values } => WireAnswer {
            head: Head { vars: vec![variable.clone()] },
            boolean: None,
            results: Some(Results {
                bindings: values.iter().map(|v| BTreeMap::from([(variable.clone(), ResultTerm::from_term(v))])).collect(),
            }),
        },
        AnswerSet::Count { value } => WireAnswer {
            head: Head { vars: vec!["count".into()] },
            boolean: None,
            results: Some(Results {
                bindings: vec![BTreeMap::from([(
                    "count".to_string(),
                    ResultTerm::from_term(&Term::literal(Literal::typed(value.to_string(), vocab::XSD_INTEGER))),
                )])],
            }),
        },
    }
}

/// COUNT answers are told apart from SELECT answers by the query head.
fn answer_from_wire(w: &WireAnswer, qtype: Option<QueryType>) -> Result<AnswerSet, String> {
    if let Some(b) = w.boolean {
        return Ok(AnswerSet::Boolean { value: b });
    }
    let results = w.results.as_ref().ok_or("answer has neither boolean nor results")?;
    let variable = w.head.vars.first().cloned().unwrap_or_default();
    let is_count = match qtype {
        Some(t) => t == QueryType::Count,
        None => variable == "count" && results.bindings.len() == 1,
    };
    if is_count {
        let term = results.bindings.first().and_then(|b| b.get(&variable)).ok_or("count answer without a value")?;
        let value = term.value.parse::<u64>().map_err(|_| format!("count {:?} is not a non-negative integer", term.value))?;
        return Ok(AnswerSet::Count { value });
    }
    let mut values = BTreeSet::new();
    for b in &results.bindings {
        if let Some(t) = b.get(&variable) {
            values.insert(t.to_term().ok_or_else(|| format!("unknown term type {:?}", t.kind))?);
        }
    }
    Ok(AnswerSet::Bindings { variable, values })
}

fn query_type_of(text: &str) -> Option<QueryType> {
    let head = text.trim_start().to_ascii_uppercase();
    if head.starts_with("ASK") {
        Some(QueryType::Ask)
    } else if head.contains("COUNT(") || head.contains("COUNT (") {
        Some(QueryType::Count)
    } else if head.starts_with("SELECT") || head.starts_with("PREFIX") {
        Some(QueryType::Select)
    } else {
        None
    }
}

/// Files without a model tag are read as reified when they use statement
/// patterns.
fn guess_model(text: &str) -> GraphModel {
    if text.contains("sem:roleType") || text.contains(vocab::SEM_ROLE_TYPE) {
        GraphModel::Reified
    } else {
        GraphModel::Direct
    }
}

fn to_wire(e: &DatasetEntry) -> WireEntry {
    WireEntry {
        id: WireId::Text(e.id.clone()),
        question: e.verbalizations.iter().map(|(l, s)| WireQuestion { language: l.clone(), string: s.clone() }).collect(),
        query: WireQuery { sparql: e.sparql_eventkg.text.clone(), model: Some(e.sparql_eventkg.model) },
        query_dbpedia: e.sparql_dbpedia.as_ref().map(|s| WireQuery { sparql: s.text.clone(), model: Some(s.model) }),
        answers: e.answers.iter().map(answer_to_wire).collect(),
        metadata: e.metadata.clone(),
    }
}

fn from_wire(w: WireEntry, index: usize) -> Result<DatasetEntry, DatasetError> {
    let id = match w.id {
        WireId::Text(s) => s,
        WireId::Number(n) => n.to_string(),
    };
    let schema = |reason: String| DatasetError::Schema { path: format!("questions[{index}]"), reason };
    let text_of = |q: WireQuery| {
        let model = q.model.unwrap_or_else(|| guess_model(&q.sparql));
        SparqlText { text: q.sparql, model }
    };
    let qtype = query_type_of(&w.query.sparql);
    let answers = match w.answers.first() {
        None => None,
        Some(a) => Some(answer_from_wire(a, qtype).map_err(schema)?),
    };
    let mut verbalizations = BTreeMap::new();
    for q in w.question {
        verbalizations.insert(q.language, q.string);
    }
    Ok(DatasetEntry {
        id,
        sparql_eventkg: text_of(w.query),
        sparql_dbpedia: w.query_dbpedia.map(text_of),
        verbalizations,
        answers,
        metadata: w.metadata,
    })
}

pub fn validate_entries(entries: &[DatasetEntry]) -> Result<(), DatasetError> {
    let mut ids = BTreeSet::new();
    for e in entries {
        let bad = |reason: &str| Err(DatasetError::InvalidEntry { id: e.id.clone(), reason: reason.into() });
        if !ids.insert(&e.id) {
            return bad("duplicate id");
        }
        if e.verbalizations.values().any(|t| t.trim().is_empty()) {
            return bad("empty verbalization");
        }
        if let (Some(a), Some(t)) = (&e.answers, query_type_of(&e.sparql_eventkg.text)) {
            let ok = matches!(
                (a, t),
                (AnswerSet::Boolean { .. }, QueryType::Ask)
                    | (AnswerSet::Bindings { .. }, QueryType::Select)
                    | (AnswerSet::Count { .. }, QueryType::Count)
            );
            if !ok {
                return bad("answer kind does not match the query type");
            }
        }
    }
    Ok(())
}

pub fn write_qald_to<W: Write>(entries: &[DatasetEntry], dataset_id: &str, mut out: W) -> Result<(), DatasetError> {
    validate_entries(entries)?;
    let doc = WireDocument { dataset: WireDatasetId { id: dataset_id.into() }, questions: entries.iter().map(to_wire).collect() };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn qald_string(entries: &[DatasetEntry], dataset_id: &str) -> Result<String, DatasetError> {
    let mut buf = Vec::new();
    write_qald_to(entries, dataset_id, &mut buf)?;
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

pub fn write_qald(entries: &[DatasetEntry], dataset_id: &str, path: &Path) -> Result<(), DatasetError> {
    let text = qald_string(entries, dataset_id)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// A parsed document: the dataset id plus its entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaldDocument {
    pub dataset_id: String,
    pub entries: Vec<DatasetEntry>,
}

pub fn read_qald_str(text: &str) -> Result<QaldDocument, DatasetError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: WireDocument = serde_path_to_error::deserialize(de).map_err(|e| DatasetError::Schema {
        path: e.path().to_string(),
        reason: e.inner().to_string(),
    })?;
    let entries = doc.questions.into_iter().enumerate().map(|(i, w)| from_wire(w, i)).collect::<Result<_, _>>()?;
    Ok(QaldDocument { dataset_id: doc.dataset.id, entries })
}

pub fn read_qald_from<R: Read>(mut input: R) -> Result<QaldDocument, DatasetError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    read_qald_str(&text)
}

pub fn read_qald(path: &Path) -> Result<QaldDocument, DatasetError> {
    read_qald_str(&std::fs::read_to_string(path)?)
}

/// Parses every entry's main query; failures stay attached to their entry.
pub fn parse_queries(entries: &[DatasetEntry]) -> Vec<(String, Result<SemanticQuery, SparqlError>)> {
    entries.iter().map(|e| (e.id.clone(), e.query())).collect()
}

// ------------------------------------------------------------------- VoID

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoidSummary {
    pub dataset_iri: String,
    pub title: String,
    pub license: String,
    pub questions: usize,
    pub source_triples: usize,
    pub events: usize,
    pub entities: usize,
    pub predicates: usize,
    pub source_digest: String,
}

impl VoidSummary {
    pub fn new(entries: usize, stats: &DatasetStats, kg: Option<&KnowledgeGraph>) -> Self {
        let (events, entities, predicates) = stats.counts();
        VoidSummary {
            dataset_iri: "urn:eventqa:dataset".into(),
            title: "Event-centric question answering benchmark".into(),
            license: "https://creativecommons.org/licenses/by/4.0/".into(),
            questions: entries,
            source_triples: kg.map_or(0, KnowledgeGraph::triple_count),
            events,
            entities,
            predicates,
            source_digest: kg.map(|k| k.digest().to_string()).unwrap_or_default(),
        }
    }
}

fn turtle_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn emit_void(s: &VoidSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@prefix void: <http://rdfs.org/ns/void#> .");
    let _ = writeln!(out, "@prefix dcterms: <http://purl.org/dc/terms/> .");
    let _ = writeln!(out, "@prefix xsd: <{}> .", vocab::XSD);
    let _ = writeln!(out, "@prefix eqa: <urn:eventqa:vocab#> .");
    let _ = writeln!(out);
    let _ = writeln!(out, "<{}> a void:Dataset ;", s.dataset_iri);
    let _ = writeln!(out, "  dcterms:title {} ;", turtle_string(&s.title));
    let _ = writeln!(out, "  dcterms:license <{}> ;", s.license);
    let _ = writeln!(out, "  eqa:questions \"{}\"^^xsd:integer ;", s.questions);
    let _ = writeln!(out, "  void:entities \"{}\"^^xsd:integer ;", s.events + s.entities);
    let _ = writeln!(out, "  eqa:events \"{}\"^^xsd:integer ;", s.events);
    let _ = writeln!(out, "  eqa:entities \"{}\"^^xsd:integer ;", s.entities);
    let _ = writeln!(out, "  void:properties \"{}\"^^xsd:integer ;", s.predicates);
    let _ = writeln!(out, "  eqa:sourceTriples \"{}\"^^xsd:integer ;", s.source_triples);
    let _ = writeln!(out, "  eqa:sourceDigest {} .", turtle_string(&s.source_digest));
    out
}

// ------------------------------------------------------------------ lists

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportLists {
    pub predicates: Vec<String>,
    pub events: Vec<String>,
    pub entities: Vec<String>,
}

pub const PREDICATES_FILE: &str = "predicates.txt";
pub const EVENTS_FILE: &str = "events.txt";
pub const ENTITIES_FILE: &str = "entities.txt";

impl ExportLists {
    pub fn from_stats(stats: &DatasetStats) -> Self {
        ExportLists {
            predicates: stats.predicates.iter().cloned().collect(),
            events: stats.events.iter().cloned().collect(),
            entities: stats.entities.iter().cloned().collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, items) in [(PREDICATES_FILE, &self.predicates), (EVENTS_FILE, &self.events), (ENTITIES_FILE, &self.entities)] {
            let mut text = String::new();
            for i in items {
                text.push_str(i);
                text.push('\n');
            }
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

/// Statistics over the entries whose main query parses.
pub fn entries_stats(entries: &[DatasetEntry], kg: Option<&KnowledgeGraph>) -> DatasetStats {
    let queries: Vec<SemanticQuery> = entries.iter().filter_map(|e| e.query().ok()).collect();
    dataset_stats(&queries, kg)
}

pub fn export_lists(entries: &[DatasetEntry], kg: Option<&KnowledgeGraph>) -> ExportLists {
    ExportLists::from_stats(&entries_stats(entries, kg))
}
