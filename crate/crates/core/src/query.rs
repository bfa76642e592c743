//! Query graphs, temporal constraints and semantic queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kg::{GraphModel, KnowledgeGraph, Literal, NodeId, NodeKind, Provenance, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("ASK queries cannot contain variables")]
    AskWithVariables,
    #[error("{qtype} queries need exactly one variable, found {found}")]
    VariableCount { qtype: QueryType, found: usize },
    #[error("duplicate variable ?{0}")]
    DuplicateVariable(String),
    #[error("variable ?{0} is used but not declared")]
    UndeclaredVariable(String),
    #[error("variable ?{0} does not occur in the query graph")]
    UnusedVariable(String),
    #[error("relation subject cannot be a literal")]
    LiteralSubject,
    #[error("bridged identifier {0} is not a node of the query graph")]
    UnknownBridge(String),
    #[error("query graph is not connected")]
    Disconnected,
    #[error("invalid temporal constraint: {0}")]
    InvalidConstraint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QueryType {
    Ask,
    Select,
    Count,
}

impl QueryType {
    pub const ALL: [QueryType; 3] = [QueryType::Ask, QueryType::Select, QueryType::Count];
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryType::Ask => "ASK",
            QueryType::Select => "SELECT",
            QueryType::Count => "COUNT",
        })
    }
}

/// What a variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Event,
    Entity,
    Literal,
}

impl VarKind {
    pub fn default_name(self) -> &'static str {
        match self {
            VarKind::Event => "event",
            VarKind::Entity => "entity",
            VarKind::Literal => "value",
        }
    }

    pub fn for_node(kind: NodeKind) -> Self {
        match kind {
            NodeKind::Event => VarKind::Event,
            NodeKind::Entity => VarKind::Entity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// The graph element the variable replaced, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_to: Option<Term>,
}

impl Variable {
    pub fn new(name: impl Into<String>, kind: VarKind) -> Self {
        Variable { name: name.into(), kind, bound_to: None }
    }

    pub fn binds_literal(&self) -> bool {
        self.kind == VarKind::Literal
    }
}

/// A position in a query relation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryTerm {
    Node(String),
    Literal(Literal),
    Var(String),
}

impl QueryTerm {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            QueryTerm::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_node(&self) -> Option<&str> {
        match self {
            QueryTerm::Node(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRelation {
    pub subject: QueryTerm,
    pub predicate: String,
    pub object: QueryTerm,
    pub form: Provenance,
    /// Id of the knowledge-graph relation this pattern was taken from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl QueryRelation {
    pub fn new(subject: QueryTerm, predicate: impl Into<String>, object: QueryTerm, form: Provenance) -> Self {
        QueryRelation { subject, predicate: predicate.into(), object, form, source: None }
    }

    fn sort_key(&self) -> (&str, &QueryTerm, &QueryTerm, Provenance) {
        (&self.predicate, &self.subject, &self.object, self.form)
    }

    /// The canonical pattern order: predicate, then subject, then object.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }

    pub fn terms(&self) -> [&QueryTerm; 2] {
        [&self.subject, &self.object]
    }
}

/// A sub-graph of the knowledge graph in which at most a few elements are
/// replaced by variables.
///
/// Relations are kept in canonical order (predicate, subject, object), which
/// is also the order in which they are written as SPARQL. Bridged nodes are
/// external identifiers that the reified dialect reaches through an identity
/// link rather than naming directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGraph {
    relations: Vec<QueryRelation>,
    variables: Vec<Variable>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    bridged: BTreeSet<String>,
}

impl QueryGraph {
    pub fn new(
        mut relations: Vec<QueryRelation>,
        variables: Vec<Variable>,
        bridged: BTreeSet<String>,
    ) -> Result<Self, QueryError> {
        relations.sort_by(QueryRelation::canonical_cmp);
        let mut names = BTreeSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(QueryError::DuplicateVariable(v.name.clone()));
            }
        }
        let mut used = BTreeSet::new();
        let mut nodes = BTreeSet::new();
        for r in &relations {
            if matches!(r.subject, QueryTerm::Literal(_)) {
                return Err(QueryError::LiteralSubject);
            }
            for t in r.terms() {
                match t {
                    QueryTerm::Var(v) => {
                        if !names.contains(v.as_str()) {
                            return Err(QueryError::UndeclaredVariable(v.clone()));
                        }
                        used.insert(v.as_str());
                    }
                    QueryTerm::Node(n) => {
                        nodes.insert(n.as_str());
                    }
                    QueryTerm::Literal(_) => {}
                }
            }
        }
        if let Some(v) = variables.iter().find(|v| !used.contains(v.name.as_str())) {
            return Err(QueryError::UnusedVariable(v.name.clone()));
        }
        if let Some(b) = bridged.iter().find(|b| !nodes.contains(b.as_str())) {
            return Err(QueryError::UnknownBridge(b.clone()));
        }
        let graph = QueryGraph { relations, variables, bridged };
        if !graph.is_connected() {
            return Err(QueryError::Disconnected);
        }
        Ok(graph)
    }

    pub fn empty() -> Self {
        QueryGraph { relations: Vec::new(), variables: Vec::new(), bridged: BTreeSet::new() }
    }

    pub fn relations(&self) -> &[QueryRelation] {
        &self.relations
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn bridged(&self) -> &BTreeSet<String> {
        &self.bridged
    }

    pub fn is_bridged(&self, iri: &str) -> bool {
        self.bridged.contains(iri)
    }

    /// Concrete node identifiers.
    pub fn nodes(&self) -> BTreeSet<&str> {
        self.relations.iter().flat_map(|r| r.terms()).filter_map(QueryTerm::as_node).collect()
    }

    pub fn literals(&self) -> BTreeSet<&Literal> {
        self.relations
            .iter()
            .filter_map(|r| match &r.object {
                QueryTerm::Literal(l) => Some(l),
                _ => None,
            })
            .collect()
    }

    /// Relations whose object is a node or a node variable.
    pub fn node_relations(&self) -> impl Iterator<Item = &QueryRelation> {
        self.relations.iter().filter(move |r| !self.is_literal_position(&r.object))
    }

    /// Relations whose object is a literal or a literal variable.
    pub fn literal_relations(&self) -> impl Iterator<Item = &QueryRelation> {
        self.relations.iter().filter(move |r| self.is_literal_position(&r.object))
    }

    fn is_literal_position(&self, t: &QueryTerm) -> bool {
        match t {
            QueryTerm::Literal(_) => true,
            QueryTerm::Var(v) => self.variable(v).is_some_and(Variable::binds_literal),
            QueryTerm::Node(_) => false,
        }
    }

    /// Number of relation positions occupied by `term`, in the undirected view.
    pub fn degree(&self, term: &QueryTerm) -> usize {
        self.relations.iter().flat_map(|r| r.terms()).filter(|t| *t == term).count()
    }

    pub fn contains_term(&self, term: &QueryTerm) -> bool {
        self.degree(term) > 0
    }

    pub fn is_connected(&self) -> bool {
        if self.relations.len() <= 1 {
            return true;
        }
        // union-find over the terms
        let mut ids: BTreeMap<&QueryTerm, usize> = BTreeMap::new();
        for t in self.relations.iter().flat_map(|r| r.terms()) {
            let n = ids.len();
            ids.entry(t).or_insert(n);
        }
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in &self.relations {
            let a = find(&mut parent, ids[&r.subject]);
            let b = find(&mut parent, ids[&r.object]);
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        (0..parent.len()).all(|i| find(&mut parent, i) == root)
    }

    /// True when some concrete node or variable binding is an event of `kg`.
    /// Bridged identifiers are resolved through the graph's identity links.
    pub fn has_event(&self, kg: &KnowledgeGraph) -> bool {
        let concrete = self.nodes().into_iter().any(|n| {
            if self.is_bridged(n) {
                kg.nodes_same_as(n).iter().any(|&i| kg.kind_at(i) == NodeKind::Event)
            } else {
                kg.is_event(&NodeId::new(n))
            }
        });
        concrete
            || self.variables.iter().any(|v| {
                v.kind == VarKind::Event
                    || v.bound_to.as_ref().and_then(Term::node_id).is_some_and(|n| kg.is_event(&n))
            })
    }

    fn strip_provenance(&mut self) {
        for r in &mut self.relations {
            r.source = None;
        }
        for v in &mut self.variables {
            v.bound_to = None;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalMode {
    Within,
    After,
    Before,
}

impl TemporalMode {
    pub const ALL: [TemporalMode; 3] = [TemporalMode::Within, TemporalMode::After, TemporalMode::Before];
}

/// What a temporal constraint reads its time value from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalAnchor {
    /// A time stamp attached to a node (or node variable) of the query graph.
    Node(QueryTerm),
    /// The validity time of the reified relation at this position.
    Relation(usize),
}

/// Restricts a time value reached from the query graph: `within` keeps
/// values inside `[start, end]`, `after` values strictly later than `start`,
/// `before` values strictly earlier than `end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalConstraint {
    pub anchor: TemporalAnchor,
    pub predicate: String,
    pub variable: String,
    pub mode: TemporalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Literal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Literal>,
}

impl TemporalConstraint {
    fn validate(&self, graph: &QueryGraph) -> Result<(), QueryError> {
        let bad = |m: &str| Err(QueryError::InvalidConstraint(m.to_string()));
        match (self.mode, &self.start, &self.end) {
            (TemporalMode::Within, Some(_), Some(_)) => {}
            (TemporalMode::After, Some(_), None) => {}
            (TemporalMode::Before, None, Some(_)) => {}
            (TemporalMode::Within, _, _) => return bad("within needs both bounds"),
            (TemporalMode::After, _, _) => return bad("after takes a start bound only"),
            (TemporalMode::Before, _, _) => return bad("before takes an end bound only"),
        }
        if graph.variable(&self.variable).is_some() {
            return bad("filter variable collides with a query variable");
        }
        match &self.anchor {
            TemporalAnchor::Relation(i) => match graph.relations.get(*i) {
                Some(r) if r.form == Provenance::Reified => {}
                Some(_) => return bad("relation anchors must be reified relations"),
                None => return bad("relation anchor out of range"),
            },
            TemporalAnchor::Node(t @ (QueryTerm::Node(_) | QueryTerm::Var(_))) => {
                if !graph.contains_term(t) {
                    return bad("anchor node is not part of the query graph");
                }
            }
            TemporalAnchor::Node(QueryTerm::Literal(_)) => return bad("anchor must be a node"),
        }
        Ok(())
    }
}

/// The record of random decisions behind a generated query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: u64,
    pub stream_index: u64,
    pub attempts: u32,
    pub query_type: QueryType,
    pub event: String,
    pub seed_relation: String,
    /// Relations added by the walk, in order.
    pub walk: Vec<String>,
    pub variable: Option<String>,
    pub constraint: Option<TemporalMode>,
}

impl SeedTrace {
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("trace serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticQuery {
    graph: QueryGraph,
    qtype: QueryType,
    constraint: Option<TemporalConstraint>,
    model: GraphModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace: Option<SeedTrace>,
}

impl SemanticQuery {
    pub fn new(
        graph: QueryGraph,
        qtype: QueryType,
        constraint: Option<TemporalConstraint>,
        model: GraphModel,
    ) -> Result<Self, QueryError> {
        let n = graph.variables.len();
        match qtype {
            QueryType::Ask if n > 0 => return Err(QueryError::AskWithVariables),
            QueryType::Select | QueryType::Count if n != 1 => {
                return Err(QueryError::VariableCount { qtype, found: n })
            }
            _ => {}
        }
        if let Some(c) = &constraint {
            c.validate(&graph)?;
        }
        Ok(SemanticQuery { graph, qtype, constraint, model, trace: None })
    }

    pub fn with_trace(mut self, trace: SeedTrace) -> Self {
        self.trace = Some(trace);
        self
    }

    pub fn graph(&self) -> &QueryGraph {
        &self.graph
    }

    pub fn qtype(&self) -> QueryType {
        self.qtype
    }

    pub fn constraint(&self) -> Option<&TemporalConstraint> {
        self.constraint.as_ref()
    }

    pub fn model(&self) -> GraphModel {
        self.model
    }

    pub fn trace(&self) -> Option<&SeedTrace> {
        self.trace.as_ref()
    }

    /// The projected variable of SELECT and COUNT queries.
    pub fn target(&self) -> Option<&Variable> {
        self.graph.variables.first()
    }

    /// Records the term the projected variable was taken from. No effect on
    /// ASK queries.
    pub fn with_target_binding(mut self, term: Term) -> Self {
        if let Some(v) = self.graph.variables.first_mut() {
            v.bound_to = Some(term);
        }
        self
    }

    /// The same query without its temporal constraint.
    pub fn without_constraint(&self) -> SemanticQuery {
        SemanticQuery { constraint: None, ..self.clone() }
    }

    /// Drops everything that records where the query came from (source
    /// relation ids, original bindings, the seed trace), keeping only what
    /// its SPARQL text can express.
    pub fn without_provenance(&self) -> SemanticQuery {
        let mut q = self.clone();
        q.graph.strip_provenance();
        q.trace = None;
        q
    }

    /// Complexity: the number of relations in the query graph. Patterns
    /// added only to support a temporal filter are not part of the graph.
    pub fn relation_count(&self) -> usize {
        self.graph.relations.len()
    }

    /// Concrete node identifiers, predicates and literal lexical forms.
    /// Variables are not elements.
    pub fn element_set(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for r in &self.graph.relations {
            out.insert(r.predicate.clone());
            for t in r.terms() {
                match t {
                    QueryTerm::Node(n) => {
                        out.insert(n.clone());
                    }
                    QueryTerm::Literal(l) => {
                        out.insert(l.lexical().to_string());
                    }
                    QueryTerm::Var(_) => {}
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::*;

    fn node(s: &str) -> QueryTerm {
        QueryTerm::Node(format!("{DBR}{s}"))
    }

    fn gp_graph(var: bool) -> QueryGraph {
        let ev = if var { QueryTerm::Var("event".into()) } else { node("2002_German_Grand_Prix") };
        let vars = if var { vec![Variable::new("event", VarKind::Event)] } else { vec![] };
        QueryGraph::new(
            vec![
                QueryRelation::new(ev.clone(), format!("{DBO}secondTeam"), node("Williams_Grand_Prix_Engineering"), Provenance::Direct),
                QueryRelation::new(ev, format!("{DBO}fastestDriverTeam"), node("Scuderia_Ferrari"), Provenance::Direct),
            ],
            vars,
            BTreeSet::new(),
        )
        .unwrap()
    }

    #[test]
    fn relations_are_canonically_ordered() {
        let g = gp_graph(true);
        assert_eq!(g.relations()[0].predicate, format!("{DBO}fastestDriverTeam"));
    }

    #[test]
    fn ask_and_select_variable_rules() {
        assert_eq!(
            SemanticQuery::new(gp_graph(true), QueryType::Ask, None, GraphModel::Direct).unwrap_err(),
            QueryError::AskWithVariables
        );
        assert_eq!(
            SemanticQuery::new(gp_graph(false), QueryType::Count, None, GraphModel::Direct).unwrap_err(),
            QueryError::VariableCount { qtype: QueryType::Count, found: 0 }
        );
        SemanticQuery::new(gp_graph(false), QueryType::Ask, None, GraphModel::Direct).unwrap();
        SemanticQuery::new(gp_graph(true), QueryType::Select, None, GraphModel::Direct).unwrap();
    }

    #[test]
    fn relation_counts() {
        let q = SemanticQuery::new(gp_graph(true), QueryType::Count, None, GraphModel::Direct).unwrap();
        assert_eq!(q.relation_count(), 2);
        let empty = SemanticQuery::new(QueryGraph::empty(), QueryType::Ask, None, GraphModel::Direct).unwrap();
        assert_eq!(empty.relation_count(), 0);
        let single = QueryGraph::new(
            vec![QueryRelation::new(node("a"), format!("{DBO}p"), node("b"), Provenance::Direct)],
            vec![],
            BTreeSet::new(),
        )
        .unwrap();
        let q = SemanticQuery::new(single, QueryType::Ask, None, GraphModel::Direct).unwrap();
        assert_eq!(q.relation_count(), 1);
    }

    #[test]
    fn element_set_of_gp_graph() {
        let q = SemanticQuery::new(gp_graph(true), QueryType::Select, None, GraphModel::Direct).unwrap();
        let expected: BTreeSet<String> = [
            format!("{DBR}Scuderia_Ferrari"),
            format!("{DBR}Williams_Grand_Prix_Engineering"),
            format!("{DBO}fastestDriverTeam"),
            format!("{DBO}secondTeam"),
        ]
        .into_iter()
        .collect();
        assert_eq!(q.element_set(), expected);
    }

    #[test]
    fn element_set_with_only_variables_is_predicates() {
        let g = QueryGraph::new(
            vec![QueryRelation::new(
                QueryTerm::Var("event".into()),
                format!("{DBO}p"),
                QueryTerm::Var("event".into()),
                Provenance::Direct,
            )],
            vec![Variable::new("event", VarKind::Event)],
            BTreeSet::new(),
        )
        .unwrap();
        let q = SemanticQuery::new(g, QueryType::Select, None, GraphModel::Direct).unwrap();
        assert_eq!(q.element_set(), [format!("{DBO}p")].into_iter().collect());
    }

    #[test]
    fn element_set_ignores_variable_names() {
        let g = |name: &str| {
            QueryGraph::new(
                vec![
                    QueryRelation::new(QueryTerm::Var(name.into()), format!("{DBO}a"), node("x"), Provenance::Direct),
                    QueryRelation::new(QueryTerm::Var(name.into()), format!("{DBO}b"), node("y"), Provenance::Direct),
                ],
                vec![Variable::new(name, VarKind::Event)],
                BTreeSet::new(),
            )
            .unwrap()
        };
        let a = SemanticQuery::new(g("event"), QueryType::Select, None, GraphModel::Direct).unwrap();
        let b = SemanticQuery::new(g("other"), QueryType::Select, None, GraphModel::Direct).unwrap();
        assert_eq!(a.element_set(), b.element_set());
    }

    #[test]
    fn rejects_disconnected_graphs() {
        let err = QueryGraph::new(
            vec![
                QueryRelation::new(node("a"), format!("{DBO}p"), node("b"), Provenance::Direct),
                QueryRelation::new(node("c"), format!("{DBO}p"), node("d"), Provenance::Direct),
            ],
            vec![],
            BTreeSet::new(),
        )
        .unwrap_err();
        assert_eq!(err, QueryError::Disconnected);
    }

    #[test]
    fn connectivity_survives_removing_either_relation() {
        let g = gp_graph(true);
        for skip in 0..2 {
            let rest: Vec<_> = g.relations().iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, r)| r.clone()).collect();
            assert_eq!(rest.len(), 1);
            assert_eq!(rest[0].subject, QueryTerm::Var("event".into()));
        }
    }

    #[test]
    fn constraint_bounds_follow_mode() {
        let mk = |mode, start: Option<Literal>, end: Option<Literal>| {
            SemanticQuery::new(
                gp_graph(true),
                QueryType::Count,
                Some(TemporalConstraint {
                    anchor: TemporalAnchor::Node(QueryTerm::Var("event".into())),
                    predicate: DBP_YEAR.into(),
                    variable: "year".into(),
                    mode,
                    start,
                    end,
                }),
                GraphModel::Direct,
            )
        };
        assert!(mk(TemporalMode::After, Some(Literal::integer(2001)), None).is_ok());
        assert!(mk(TemporalMode::After, Some(Literal::integer(2001)), Some(Literal::integer(2003))).is_err());
        assert!(mk(TemporalMode::Within, Some(Literal::integer(2001)), None).is_err());
        assert!(mk(TemporalMode::Before, Some(Literal::integer(2001)), None).is_err());
        // non-temporal bounds are caught at evaluation time
        assert!(mk(TemporalMode::Before, None, Some(Literal::plain("soon"))).is_ok());
    }
}
