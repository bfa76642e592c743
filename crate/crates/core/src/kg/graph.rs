use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::schema::SchemaConfig;
use super::term::{Literal, NodeId, Term, Triple};
use crate::temporal::TimeValue;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("statement {statement} is missing its {missing}")]
    DanglingReification { statement: String, missing: String },
    #[error("unknown node {0}")]
    UnknownNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Direct,
    Reified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Event,
    Entity,
}

/// Which graph model a dump (and the queries over it) follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphModel {
    /// Statements reified as resources (EventKG style).
    Reified,
    /// Plain subject-predicate-object triples (DBpedia style).
    Direct,
}

impl fmt::Display for GraphModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphModel::Reified => "reified",
            GraphModel::Direct => "direct",
        })
    }
}

impl std::str::FromStr for GraphModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reified" => Ok(GraphModel::Reified),
            "direct" => Ok(GraphModel::Direct),
            other => Err(format!("unknown graph model {other:?} (expected reified or direct)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationObject {
    Node(NodeId),
    Literal(Literal),
}

impl RelationObject {
    pub fn as_node(&self) -> Option<&NodeId> {
        match self {
            RelationObject::Node(n) => Some(n),
            RelationObject::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            RelationObject::Literal(l) => Some(l),
            RelationObject::Node(_) => None,
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            RelationObject::Node(n) => Term::from_node(n),
            RelationObject::Literal(l) => Term::literal(l.clone()),
        }
    }
}

/// One edge of the graph. Reified relations keep the IRI of the statement
/// node they were folded from as their id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    pub subject: NodeId,
    pub predicate: String,
    pub object: RelationObject,
    pub valid_from: Option<Literal>,
    pub valid_to: Option<Literal>,
    pub provenance: Provenance,
}

impl Relation {
    pub fn is_literal(&self) -> bool {
        matches!(self.object, RelationObject::Literal(_))
    }

    /// Node endpoints: the subject, plus the object when it is a node.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        std::iter::once(&self.subject).chain(self.object.as_node())
    }

    pub fn touches(&self, node: &NodeId) -> bool {
        self.nodes().any(|n| n == node)
    }

    pub fn has_blank_endpoint(&self) -> bool {
        self.nodes().any(NodeId::is_blank)
    }
}

/// Stable id of a direct relation: a digest of its N-Triples form.
pub fn direct_relation_id(subject: &Term, predicate: &str, object: &Term) -> String {
    let mut h = Sha256::new();
    h.update(subject.to_ntriples().as_bytes());
    h.update(b"\t");
    h.update(predicate.as_bytes());
    h.update(b"\t");
    h.update(object.to_ntriples().as_bytes());
    let digest = h.finalize();
    format!("urn:eventqa:rel:{}", hex::encode(&digest[..12]))
}

#[derive(Debug, Clone)]
struct NodeEntry {
    id: NodeId,
    kind: NodeKind,
    relations: Vec<usize>,
}

/// Immutable, indexed knowledge graph: event and entity nodes, node-to-node
/// relations and node-to-literal relations, with labels and identity links
/// kept in side indexes.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    schema: SchemaConfig,
    nodes: Vec<NodeEntry>,
    node_index: HashMap<NodeId, usize>,
    events: Vec<NodeId>,
    entities: Vec<NodeId>,
    relations: Vec<Relation>,
    relation_index: HashMap<String, usize>,
    by_predicate: HashMap<String, Vec<usize>>,
    labels: HashMap<NodeId, BTreeMap<String, BTreeSet<String>>>,
    same_as: HashMap<NodeId, BTreeSet<String>>,
    same_as_rev: HashMap<String, Vec<usize>>,
    triple_count: usize,
    ignored_triples: usize,
    digest: String,
}

#[derive(Default)]
struct StatementParts {
    subject: Vec<Term>,
    object: Vec<Term>,
    role: Vec<String>,
    begin: Vec<Literal>,
    end: Vec<Literal>,
}

/// Builds a graph from parsed triples.
///
/// Typing triples (any predicate used by an event marker) classify nodes and
/// are not kept as relations. Identity links go to the same-as index. With
/// a reified schema, statement nodes are folded into single relations.
pub fn build_graph<I>(triples: I, schema: &SchemaConfig) -> Result<KnowledgeGraph, GraphError>
where
    I: IntoIterator<Item = Triple>,
{
    let mut hasher = Sha256::new();
    let mut triple_count = 0usize;
    let mut typed_events: BTreeSet<NodeId> = BTreeSet::new();
    let mut same_as: HashMap<NodeId, BTreeSet<String>> = HashMap::new();
    let mut statements: BTreeMap<String, StatementParts> = BTreeMap::new();
    let mut pending: Vec<Triple> = Vec::new();

    for t in triples {
        triple_count += 1;
        hasher.update(t.to_ntriples().as_bytes());
        hasher.update(b"\n");

        if schema.is_type_predicate(&t.predicate) {
            if let (Some(node), Some(value)) = (t.subject.node_id(), t.object.as_iri()) {
                if schema.is_event_marker(&t.predicate, value) {
                    typed_events.insert(node);
                }
            }
            continue;
        }
        if t.predicate == schema.same_as {
            if let (Some(node), Some(target)) = (t.subject.node_id(), t.object.as_iri()) {
                same_as.entry(node).or_default().insert(target.to_string());
                continue;
            }
        }
        if let Some(r) = &schema.reify {
            let key = match &t.subject {
                Term::Iri { value } => Some(value.clone()),
                Term::Blank { value } => Some(format!("_:{value}")),
                Term::Literal { .. } => None,
            };
            if let Some(key) = key {
                if t.predicate == r.subject {
                    statements.entry(key).or_default().subject.push(t.object);
                    continue;
                } else if t.predicate == r.object {
                    statements.entry(key).or_default().object.push(t.object);
                    continue;
                } else if t.predicate == r.role {
                    if let Some(role) = t.object.as_iri() {
                        statements.entry(key).or_default().role.push(role.to_string());
                        continue;
                    }
                }
            }
        }
        pending.push(t);
    }

    let mut ignored_triples = 0usize;
    let mut labels: HashMap<NodeId, BTreeMap<String, BTreeSet<String>>> = HashMap::new();
    let mut relations: Vec<Relation> = Vec::new();

    for t in pending {
        let Some(subject) = t.subject.node_id() else { continue };
        if let Some(parts) = statements.get_mut(subject.as_str()) {
            match t.object.as_literal() {
                Some(l) if schema.time_begin.contains(&t.predicate) => parts.begin.push(l.clone()),
                Some(l) if schema.time_end.contains(&t.predicate) => parts.end.push(l.clone()),
                _ => ignored_triples += 1,
            }
            continue;
        }
        if schema.is_label_predicate(&t.predicate) {
            if let Some(l) = t.object.as_literal() {
                labels
                    .entry(subject.clone())
                    .or_default()
                    .entry(l.language().unwrap_or("").to_string())
                    .or_default()
                    .insert(l.lexical().to_string());
            }
        }
        let object = match &t.object {
            Term::Literal { value } => RelationObject::Literal(value.clone()),
            other => RelationObject::Node(other.node_id().expect("non-literal term")),
        };
        relations.push(Relation {
            id: direct_relation_id(&t.subject, &t.predicate, &t.object),
            subject,
            predicate: t.predicate,
            object,
            valid_from: None,
            valid_to: None,
            provenance: Provenance::Direct,
        });
    }

    for (statement, mut parts) in statements {
        let missing = |what: &str| GraphError::DanglingReification {
            statement: statement.clone(),
            missing: what.to_string(),
        };
        parts.subject.sort();
        parts.object.sort();
        parts.role.sort();
        let subject = parts
            .subject
            .first()
            .and_then(Term::node_id)
            .ok_or_else(|| missing("subject"))?;
        let object = match parts.object.first().ok_or_else(|| missing("object"))? {
            Term::Literal { value } => RelationObject::Literal(value.clone()),
            other => RelationObject::Node(other.node_id().expect("non-literal term")),
        };
        let role = parts.role.first().cloned().ok_or_else(|| missing("role type"))?;
        let earliest = |mut v: Vec<Literal>| {
            v.sort();
            v.into_iter().next()
        };
        let mut valid_from = earliest(parts.begin);
        let mut valid_to = earliest(parts.end);
        if let (Some(from), Some(to)) = (&valid_from, &valid_to) {
            if let (Some(f), Some(t)) = (TimeValue::from_literal(from), TimeValue::from_literal(to)) {
                if f.start > t.end {
                    tracing::warn!(%statement, "validity interval ends before it starts; dropping it");
                    valid_from = None;
                    valid_to = None;
                }
            }
        }
        relations.push(Relation {
            id: statement,
            subject,
            predicate: role,
            object,
            valid_from,
            valid_to,
            provenance: Provenance::Reified,
        });
    }

    relations.sort_by(|a, b| a.id.cmp(&b.id));
    relations.dedup_by(|a, b| a.id == b.id);

    let mut node_ids: BTreeSet<NodeId> = typed_events.clone();
    for r in &relations {
        for n in r.nodes() {
            node_ids.insert(n.clone());
        }
    }
    let mut nodes: Vec<NodeEntry> = node_ids
        .into_iter()
        .map(|id| {
            let kind = if typed_events.contains(&id) { NodeKind::Event } else { NodeKind::Entity };
            NodeEntry { id, kind, relations: Vec::new() }
        })
        .collect();
    let node_index: HashMap<NodeId, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();

    let mut relation_index = HashMap::with_capacity(relations.len());
    let mut by_predicate: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, r) in relations.iter().enumerate() {
        relation_index.insert(r.id.clone(), i);
        by_predicate.entry(r.predicate.clone()).or_default().push(i);
        let s = node_index[&r.subject];
        nodes[s].relations.push(i);
        if let Some(o) = r.object.as_node() {
            let o = node_index[o];
            if o != s {
                nodes[o].relations.push(i);
            }
        }
    }

    let mut same_as_rev: HashMap<String, Vec<usize>> = HashMap::new();
    for (node, targets) in &same_as {
        if let Some(&idx) = node_index.get(node) {
            for t in targets {
                same_as_rev.entry(t.clone()).or_default().push(idx);
            }
        }
    }
    for v in same_as_rev.values_mut() {
        v.sort_unstable();
    }

    let events = nodes.iter().filter(|n| n.kind == NodeKind::Event).map(|n| n.id.clone()).collect();
    let entities = nodes.iter().filter(|n| n.kind == NodeKind::Entity).map(|n| n.id.clone()).collect();

    Ok(KnowledgeGraph {
        schema: schema.clone(),
        nodes,
        node_index,
        events,
        entities,
        relations,
        relation_index,
        by_predicate,
        labels,
        same_as,
        same_as_rev,
        triple_count,
        ignored_triples,
        digest: hex::encode(hasher.finalize()),
    })
}

impl KnowledgeGraph {
    pub fn schema(&self) -> &SchemaConfig {
        &self.schema
    }

    pub fn model(&self) -> GraphModel {
        if self.schema.is_reified() {
            GraphModel::Reified
        } else {
            GraphModel::Direct
        }
    }

    /// Events, sorted by IRI.
    pub fn events(&self) -> &[NodeId] {
        &self.events
    }

    /// Entities, sorted by IRI.
    pub fn entities(&self) -> &[NodeId] {
        &self.entities
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, NodeKind)> {
        self.nodes.iter().map(|n| (&n.id, n.kind))
    }

    /// All relations, sorted by id.
    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn node_relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(|r| !r.is_literal())
    }

    pub fn literal_relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(|r| r.is_literal())
    }

    pub fn relation(&self, id: &str) -> Option<&Relation> {
        self.relation_index.get(id).map(|&i| &self.relations[i])
    }

    pub fn relation_at(&self, idx: usize) -> &Relation {
        &self.relations[idx]
    }

    pub fn relation_position(&self, id: &str) -> Option<usize> {
        self.relation_index.get(id).copied()
    }

    pub fn contains_node(&self, node: &NodeId) -> bool {
        self.node_index.contains_key(node)
    }

    pub fn node_position(&self, iri: &str) -> Option<usize> {
        self.node_index.get(&NodeId::new(iri)).copied()
    }

    pub fn node_at(&self, idx: usize) -> &NodeId {
        &self.nodes[idx].id
    }

    pub fn kind_at(&self, idx: usize) -> NodeKind {
        self.nodes[idx].kind
    }

    pub fn node_kind(&self, node: &NodeId) -> Option<NodeKind> {
        self.node_index.get(node).map(|&i| self.nodes[i].kind)
    }

    pub fn is_event(&self, node: &NodeId) -> bool {
        self.node_kind(node) == Some(NodeKind::Event)
    }

    /// Every relation with `node` as subject or object, sorted by relation id.
    pub fn relations_of(&self, node: &NodeId) -> Result<Vec<&Relation>, GraphError> {
        let idx = self
            .node_index
            .get(node)
            .ok_or_else(|| GraphError::UnknownNode(node.to_string()))?;
        Ok(self.nodes[*idx].relations.iter().map(|&i| &self.relations[i]).collect())
    }

    /// Relation positions incident to the node at `idx`, ascending.
    pub fn adjacency_at(&self, idx: usize) -> &[usize] {
        &self.nodes[idx].relations
    }

    pub fn relations_with_predicate(&self, predicate: &str) -> &[usize] {
        self.by_predicate.get(predicate).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Labels of `node` across all languages, ordered by language then text.
    pub fn labels(&self, node: &NodeId) -> impl Iterator<Item = &str> {
        self.labels
            .get(node)
            .into_iter()
            .flat_map(|by_lang| by_lang.values().flat_map(|s| s.iter().map(String::as_str)))
    }

    /// Lexicographically first label in `lang` (`""` for untagged labels).
    pub fn label(&self, node: &NodeId, lang: &str) -> Option<&str> {
        self.labels.get(node)?.get(lang)?.iter().next().map(String::as_str)
    }

    /// External identifiers linked from `node`, sorted.
    pub fn same_as(&self, node: &NodeId) -> impl Iterator<Item = &str> {
        self.same_as.get(node).into_iter().flat_map(|s| s.iter().map(String::as_str))
    }

    /// Positions of nodes linked to the external identifier `iri`.
    pub fn nodes_same_as(&self, iri: &str) -> &[usize] {
        self.same_as_rev.get(iri).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn same_as_links(&self) -> impl Iterator<Item = (&NodeId, &str)> {
        self.same_as.iter().flat_map(|(n, ts)| ts.iter().map(move |t| (n, t.as_str())))
    }

    /// Number of input triples, including those folded or consumed.
    pub fn triple_count(&self) -> usize {
        self.triple_count
    }

    /// Statement-node triples that were neither parts nor time stamps.
    pub fn ignored_triples(&self) -> usize {
        self.ignored_triples
    }

    /// SHA-256 of the input, one N-Triples line per statement in input order.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}
