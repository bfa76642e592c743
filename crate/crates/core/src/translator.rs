//! Rewrites reified-model queries into direct-model (DBpedia) queries.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::ntriples::{self, ParseMode};
use crate::kg::{GraphModel, KnowledgeGraph, Literal, NodeId, Provenance, Term};
use crate::query::{
    QueryError, QueryGraph, QueryRelation, QueryTerm, SemanticQuery, TemporalAnchor, TemporalConstraint, Variable,
};
use crate::temporal::TimeValue;
use crate::vocab;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslationError {
    #[error("query is not in the reified model")]
    NotReified,
    #[error("no identity link for {0}")]
    UnmappedEntity(String),
    #[error("role type {0} has no direct-model predicate")]
    MissingRoleType(String),
    #[error("no time predicate for {0} in the target graph")]
    UnmappedTemporal(String),
    #[error("pattern {0} has no match in the target graph")]
    NotInTarget(String),
    #[error(transparent)]
    Invalid(#[from] QueryError),
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error(transparent)]
    NTriples(#[from] ntriples::NTriplesError),
    #[error("bad temporal candidates file: {0}")]
    Config(String),
}

/// Candidate predicates for begin and end time stamps, in priority order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalCandidates {
    pub begin: Vec<String>,
    pub end: Vec<String>,
}

impl Default for TemporalCandidates {
    fn default() -> Self {
        TemporalCandidates {
            begin: vec![vocab::DBP_YEAR.into(), vocab::DBO_DATE.into(), vocab::DBO_START_DATE.into()],
            end: vec![vocab::DBP_YEAR.into(), vocab::DBO_DATE.into(), vocab::DBO_END_DATE.into()],
        }
    }
}

impl TemporalCandidates {
    /// Reads `begin = [...]` and `end = [...]` from TOML. Prefixed names
    /// such as `dbp:year` are expanded.
    pub fn from_toml_str(text: &str) -> Result<Self, MappingError> {
        let raw: TemporalCandidates = toml::from_str(text).map_err(|e| MappingError::Config(e.to_string()))?;
        let expand = |v: Vec<String>| -> Vec<String> { v.into_iter().map(|p| vocab::expand(&p)).collect() };
        let c = TemporalCandidates { begin: expand(raw.begin), end: expand(raw.end) };
        if c.begin.is_empty() || c.end.is_empty() {
            return Err(MappingError::Config("candidate lists must not be empty".into()));
        }
        Ok(c)
    }
}

/// EventKG resource → DBpedia resource.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingTable {
    same_as: BTreeMap<String, String>,
    targets: BTreeSet<String>,
    pub temporal: TemporalCandidates,
}

fn pick(links: &BTreeSet<String>) -> Option<&String> {
    links.iter().find(|l| l.starts_with(vocab::DBR)).or(links.iter().next())
}

impl MappingTable {
    /// Builds a functional table from identity links; a DBpedia resource
    /// wins over other targets, ties go to the smallest IRI.
    pub fn from_links<'a>(links: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut all: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (s, o) in links {
            all.entry(s.to_string()).or_default().insert(o.to_string());
        }
        let same_as: BTreeMap<String, String> =
            all.iter().filter_map(|(s, ts)| pick(ts).map(|t| (s.clone(), t.clone()))).collect();
        let targets = same_as.values().cloned().collect();
        MappingTable { same_as, targets, temporal: TemporalCandidates::default() }
    }

    pub fn from_graph(kg: &KnowledgeGraph) -> Self {
        Self::from_links(kg.same_as_links().map(|(n, t)| (n.as_str(), t)))
    }

    /// Reads identity links from an N-Triples file; every triple whose
    /// predicate is `same_as_predicate` counts.
    pub fn from_ntriples(path: &Path, same_as_predicate: &str) -> Result<Self, MappingError> {
        let triples = ntriples::read_file(path, ParseMode::Strict)?;
        let pairs: Vec<(String, String)> = triples
            .iter()
            .filter(|t| t.predicate == same_as_predicate)
            .filter_map(|t| Some((t.subject.as_iri()?.to_string(), t.object.as_iri()?.to_string())))
            .collect();
        Ok(Self::from_links(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))))
    }

    pub fn with_temporal(mut self, temporal: TemporalCandidates) -> Self {
        self.temporal = temporal;
        self
    }

    pub fn len(&self) -> usize {
        self.same_as.len()
    }

    pub fn is_empty(&self) -> bool {
        self.same_as.is_empty()
    }

    pub fn get(&self, iri: &str) -> Option<&str> {
        self.same_as.get(iri).map(String::as_str)
    }

    /// A node identifier in the target vocabulary: already a target, or
    /// linked to one.
    pub fn resolve(&self, iri: &str) -> Result<String, TranslationError> {
        if self.targets.contains(iri) || iri.starts_with(vocab::DBR) {
            return Ok(iri.to_string());
        }
        self.get(iri).map(str::to_string).ok_or_else(|| TranslationError::UnmappedEntity(iri.to_string()))
    }
}

fn direct_predicate(p: &str) -> bool {
    p.starts_with(vocab::DBO) || p.starts_with(vocab::DBP)
}

fn map_term(t: &QueryTerm, m: &MappingTable) -> Result<QueryTerm, TranslationError> {
    Ok(match t {
        QueryTerm::Node(n) => QueryTerm::Node(m.resolve(n)?),
        other => other.clone(),
    })
}

fn describe(r: &QueryRelation) -> String {
    let t = |t: &QueryTerm| match t {
        QueryTerm::Node(n) => vocab::abbreviate(n),
        QueryTerm::Literal(l) => l.to_ntriples(),
        QueryTerm::Var(v) => format!("?{v}"),
    };
    format!("{} {} {}", t(&r.subject), vocab::abbreviate(&r.predicate), t(&r.object))
}

/// Whether some relation of `target` could match the pattern on its own.
fn pattern_occurs(target: &KnowledgeGraph, r: &QueryRelation) -> bool {
    let fixed = |t: &QueryTerm, v: &Term| match t {
        QueryTerm::Node(n) => v.as_iri() == Some(n.as_str()),
        QueryTerm::Literal(l) => v.as_literal() == Some(l),
        QueryTerm::Var(_) => true,
    };
    target.relations_with_predicate(&r.predicate).iter().any(|&i| {
        let rel = target.relation_at(i);
        rel.provenance == Provenance::Direct
            && fixed(&r.subject, &Term::from_node(&rel.subject))
            && fixed(&r.object, &rel.object.to_term())
    })
}

fn has_time(target: &KnowledgeGraph, node: &str, predicate: &str) -> bool {
    let id = NodeId::new(node);
    let Some(pos) = target.node_position(node) else { return false };
    target.adjacency_at(pos).iter().any(|&i| {
        let r = target.relation_at(i);
        r.subject == id && r.predicate == predicate && r.is_literal()
    })
}

pub fn translate(
    q: &SemanticQuery,
    m: &MappingTable,
    target: Option<&KnowledgeGraph>,
) -> Result<SemanticQuery, TranslationError> {
    if q.model() != GraphModel::Reified {
        return Err(TranslationError::NotReified);
    }
    let mut relations = Vec::new();
    for r in q.graph().relations() {
        if r.predicate == vocab::SEM_BEGIN || r.predicate == vocab::SEM_END {
            relations.push(translate_time_fact(r, m, target)?);
            continue;
        }
        if !direct_predicate(&r.predicate) {
            return Err(TranslationError::MissingRoleType(r.predicate.clone()));
        }
        let out = QueryRelation::new(map_term(&r.subject, m)?, r.predicate.clone(), map_term(&r.object, m)?, Provenance::Direct);
        relations.push(out);
    }
    let variables: Vec<Variable> = q
        .graph()
        .variables()
        .iter()
        .map(|v| {
            let bound_to = v.bound_to.as_ref().and_then(|b| match b.as_iri() {
                Some(iri) => m.resolve(iri).ok().map(Term::iri),
                None => Some(b.clone()),
            });
            Variable { bound_to, ..v.clone() }
        })
        .collect();

    let constraint = match q.constraint() {
        None => None,
        Some(c) => Some(translate_constraint(q, c, m, &variables, target)?),
    };
    if let Some(t) = target {
        if let Some(r) = relations.iter().find(|r| !pattern_occurs(t, r)) {
            return Err(TranslationError::NotInTarget(describe(r)));
        }
    }
    let graph = QueryGraph::new(relations, variables, BTreeSet::new())?;
    Ok(SemanticQuery::new(graph, q.qtype(), constraint, GraphModel::Direct)?)
}

fn name_of(t: &QueryTerm) -> String {
    match t {
        QueryTerm::Node(n) => n.clone(),
        QueryTerm::Var(v) => format!("?{v}"),
        QueryTerm::Literal(l) => l.to_ntriples(),
    }
}

/// A time stamp in the graph is restated on the first candidate predicate
/// that carries the same value in the target. Year-style predicates take
/// the year as an integer.
fn translate_time_fact(
    r: &QueryRelation,
    m: &MappingTable,
    target: Option<&KnowledgeGraph>,
) -> Result<QueryRelation, TranslationError> {
    let subject = map_term(&r.subject, m)?;
    let candidates = if r.predicate == vocab::SEM_END { &m.temporal.end } else { &m.temporal.begin };
    for p in candidates {
        let object = match &r.object {
            QueryTerm::Literal(l) if vocab::local_name(p) == "year" => match TimeValue::from_literal(l) {
                Some(v) => QueryTerm::Literal(Literal::integer(v.start.year() as i64)),
                None => continue,
            },
            other => other.clone(),
        };
        let out = QueryRelation::new(subject.clone(), p.clone(), object, Provenance::Direct);
        if target.is_none_or(|t| pattern_occurs(t, &out)) {
            return Ok(out);
        }
    }
    Err(TranslationError::UnmappedTemporal(name_of(&subject)))
}

/// A relation anchor moves to the relation's subject; the predicate becomes
/// the first candidate present on the anchor in the target graph.
fn translate_constraint(
    q: &SemanticQuery,
    c: &TemporalConstraint,
    m: &MappingTable,
    variables: &[Variable],
    target: Option<&KnowledgeGraph>,
) -> Result<TemporalConstraint, TranslationError> {
    let anchor_term = match &c.anchor {
        TemporalAnchor::Node(t) => t.clone(),
        TemporalAnchor::Relation(i) => q.graph().relations()[*i].subject.clone(),
    };
    let anchor = map_term(&anchor_term, m)?;
    let is_end = vocab::local_name(&c.predicate).to_lowercase().contains("end");
    let candidates = if is_end { &m.temporal.end } else { &m.temporal.begin };
    let probe_node = match &anchor {
        QueryTerm::Node(n) => Some(n.clone()),
        QueryTerm::Var(v) => variables.iter().find(|x| &x.name == v).and_then(|x| x.bound_to.as_ref()?.as_iri().map(str::to_string)),
        QueryTerm::Literal(_) => None,
    };
    let name = name_of(&anchor);
    let predicate = match (target, &probe_node) {
        (Some(t), Some(node)) => candidates.iter().find(|p| has_time(t, node, p)),
        (Some(t), None) => candidates.iter().find(|p| !t.relations_with_predicate(p).is_empty()),
        (None, _) => candidates.first(),
    }
    .ok_or(TranslationError::UnmappedTemporal(name))?
    .clone();
    let variable = if vocab::local_name(&predicate) == "year" { "year" } else { "time" };
    Ok(TemporalConstraint {
        anchor: TemporalAnchor::Node(anchor),
        predicate,
        variable: variable.to_string(),
        mode: c.mode,
        start: c.start.clone(),
        end: c.end.clone(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub total: usize,
    pub translated: usize,
    pub failures: Vec<(String, String)>,
}

pub fn translate_dataset(
    queries: &[(String, SemanticQuery)],
    m: &MappingTable,
    target: Option<&KnowledgeGraph>,
) -> (Vec<(String, SemanticQuery)>, TranslationReport) {
    let mut out = Vec::new();
    let mut report = TranslationReport { total: queries.len(), ..Default::default() };
    for (id, q) in queries {
        match translate(q, m, target) {
            Ok(t) => out.push((id.clone(), t)),
            Err(e) => report.failures.push((id.clone(), e.to_string())),
        }
    }
    report.translated = out.len();
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{evaluate, AnswerSet};
    use crate::fixture;
    use crate::kg::Literal;
    use crate::sparql;
    use crate::vocab::*;

    fn league_with_mirror() -> (KnowledgeGraph, KnowledgeGraph) {
        (fixture::league_graph(), fixture::league_mirror())
    }

    const LEAGUE: &str = fixture::LEAGUE_QUERY;

    #[test]
    fn league_query_becomes_direct_patterns() {
        let (src, _) = league_with_mirror();
        let m = MappingTable::from_graph(&src);
        let q = sparql::parse(LEAGUE, GraphModel::Reified).unwrap();
        let t = translate(&q, &m, None).unwrap();
        let text = sparql::emit(&t).unwrap().text;
        assert!(text.contains("  ?event dbo:country dbr:Uruguay .\n"), "{text}");
        assert!(text.contains("  ?event dbo:soccerLeagueWinner dbr:Peñarol .\n"), "{text}");
        assert!(!text.contains("sem:") && !text.contains("rdf:subject"));
    }

    #[test]
    fn answers_are_preserved_on_a_mirror() {
        let (src, dst) = league_with_mirror();
        let m = MappingTable::from_graph(&src);
        let q = sparql::parse(LEAGUE, GraphModel::Reified).unwrap();
        let t = translate(&q, &m, Some(&dst)).unwrap();
        let rename = |a: AnswerSet| match a {
            AnswerSet::Bindings { variable, values } => AnswerSet::Bindings {
                variable,
                values: values.into_iter().map(|v| Term::iri(m.resolve(v.as_iri().unwrap()).unwrap())).collect(),
            },
            other => other,
        };
        assert_eq!(rename(evaluate(&src, &q).unwrap()), evaluate(&dst, &t).unwrap());
    }

    #[test]
    fn begin_stamp_rebases_onto_year() {
        let (src, dst) = league_with_mirror();
        let m = MappingTable::from_graph(&src);
        let text = "ASK WHERE {
  ?relation1 rdf:object ?entity1 .
  ?relation1 rdf:subject ?entity2 .
  ?relation1 sem:roleType dbo:country .

  ?entity1 owl:sameAs dbr:Uruguay .
  ?entity2 owl:sameAs dbr:1973_Uruguayan_Primera_División .

  ?relation1 sem:hasBeginTimeStamp ?time .
  FILTER ( ?time > \"1972\"^^xsd:integer)
}
";
        let q = sparql::parse(text, GraphModel::Reified).unwrap();
        let t = translate(&q, &m, Some(&dst)).unwrap();
        let c = t.constraint().unwrap();
        assert_eq!(c.predicate, DBP_YEAR);
        assert_eq!(c.variable, "year");
        assert_eq!(c.anchor, TemporalAnchor::Node(QueryTerm::Node(format!("{DBR}1973_Uruguayan_Primera_División"))));
        assert_eq!(evaluate(&dst, &t).unwrap(), AnswerSet::Boolean { value: true });
    }

    #[test]
    fn time_fact_moves_to_a_matching_candidate() {
        let (src, dst) = league_with_mirror();
        let m = MappingTable::from_graph(&src);
        let fact = |lex: &str| {
            let r = QueryRelation::new(
                QueryTerm::Node(fixture::LEAGUE_1973.into()),
                vocab::SEM_BEGIN,
                QueryTerm::Literal(Literal::typed(lex, XSD_DATE)),
                Provenance::Reified,
            );
            SemanticQuery::new(QueryGraph::new(vec![r], vec![], BTreeSet::new()).unwrap(), crate::query::QueryType::Ask, None, GraphModel::Reified).unwrap()
        };
        let t = translate(&fact("1973-03-01"), &m, Some(&dst)).unwrap();
        let r = &t.graph().relations()[0];
        assert_eq!(r.predicate, DBP_YEAR);
        assert_eq!(r.object, QueryTerm::Literal(Literal::integer(1973)));
        assert_eq!(evaluate(&dst, &t).unwrap(), AnswerSet::Boolean { value: true });
        let l73 = format!("{DBR}1973_Uruguayan_Primera_División");
        assert_eq!(translate(&fact("1980-01-01"), &m, Some(&dst)), Err(TranslationError::UnmappedTemporal(l73)));
    }

    #[test]
    fn unmapped_entity_is_named() {
        let src = fixture::league_graph();
        let m = MappingTable::from_links(std::iter::empty());
        let r = QueryRelation::new(
            QueryTerm::Node(fixture::LEAGUE_1973.into()),
            format!("{DBO}country"),
            QueryTerm::Node(fixture::URUGUAY.into()),
            Provenance::Reified,
        );
        let q = SemanticQuery::new(QueryGraph::new(vec![r], vec![], BTreeSet::new()).unwrap(), crate::query::QueryType::Ask, None, GraphModel::Reified).unwrap();
        assert_eq!(translate(&q, &m, Some(&src)), Err(TranslationError::UnmappedEntity(fixture::LEAGUE_1973.into())));
    }

    #[test]
    fn direct_queries_are_rejected() {
        let q = sparql::parse("ASK WHERE {\n  dbr:A dbo:p dbr:B .\n}\n", GraphModel::Direct).unwrap();
        assert_eq!(translate(&q, &MappingTable::default(), None), Err(TranslationError::NotReified));
    }

    #[test]
    fn dataset_report_counts_failures() {
        let (src, dst) = league_with_mirror();
        let m = MappingTable::from_graph(&src);
        let (out, report) = translate_dataset(&fixture::translation_cases(), &m, Some(&dst));
        assert_eq!((report.total, report.translated, report.failures.len()), (10, 7, 3));
        assert_eq!(out.len(), 7);
        let failed: Vec<&str> = report.failures.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(failed, ["gap-entity", "gap-role", "gap-target"]);
        assert!(report.failures[0].1.contains("entity_nowhere"));
        assert!(report.failures[1].1.contains("P17"));
        assert!(report.failures[2].1.contains("location"));
        assert_eq!(translate_dataset(&[], &m, None).1, TranslationReport::default());
    }

    #[test]
    fn candidates_from_toml() {
        let c = TemporalCandidates::from_toml_str("begin = [\"dbo:startDate\"]\nend = [\"dbo:endDate\"]\n").unwrap();
        assert_eq!(c.begin, vec![DBO_START_DATE.to_string()]);
        assert!(TemporalCandidates::from_toml_str("begin = []\nend = []\n").is_err());
    }

    #[test]
    fn mapping_prefers_dbpedia() {
        let m = MappingTable::from_links([("http://e/x", "http://www.wikidata.org/entity/Q1"), ("http://e/x", "http://dbpedia.org/resource/X")]);
        assert_eq!(m.get("http://e/x"), Some("http://dbpedia.org/resource/X"));
    }
}
