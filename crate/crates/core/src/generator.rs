//! Random-walk query generation.
//!
//! One query is drawn from one `(seed, stream_index)` pair: pick a query
//! type, an event, a seed relation incident to it, grow the sub-graph by a
//! random walk, place at most one variable, and maybe attach a temporal
//! constraint.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{GraphModel, KnowledgeGraph, Literal, NodeId, Provenance, Relation, RelationObject, Term};
use crate::query::{
    QueryError, QueryGraph, QueryRelation, QueryTerm, QueryType, SeedTrace, SemanticQuery, TemporalAnchor,
    TemporalConstraint, TemporalMode, VarKind, Variable,
};
use crate::temporal::{self, TimeValue};
use crate::vocab;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error("the knowledge graph has no events")]
    EmptyEventSet,
    #[error("event {0} has no relation that can seed a walk")]
    NoEligibleSeed(String),
    #[error("random walk found no new relation within {0} attempts")]
    WalkStuck(u32),
    #[error("no position in the query graph can hold a variable")]
    NoEligibleVariable,
    #[error("generation gave up after {attempts} attempts: {reason}")]
    GenerationExhausted { attempts: u64, reason: String },
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub max_relations: usize,
    /// Weights for ASK, SELECT, COUNT.
    pub type_weights: [f64; 3],
    pub temporal_constraint_probability: f64,
    pub max_attempts_per_query: u32,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_relations: 2,
            type_weights: [1.0, 1.0, 1.0],
            temporal_constraint_probability: 0.5,
            max_attempts_per_query: 100,
            rng_seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64) -> Self {
        GeneratorConfig { rng_seed: seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::InvalidConfig(m.into()));
        if self.max_relations == 0 {
            return bad("max_relations must be at least 1");
        }
        if self.type_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("type weights must be finite and non-negative");
        }
        if self.type_weights.iter().all(|w| *w == 0.0) {
            return bad("type weights must not all be zero");
        }
        if !(0.0..=1.0).contains(&self.temporal_constraint_probability) {
            return bad("temporal constraint probability must lie in [0, 1]");
        }
        if self.max_attempts_per_query == 0 {
            return bad("max_attempts_per_query must be at least 1");
        }
        Ok(())
    }
}

/// An independent random substream: same `(seed, stream_index)`, same draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        RngStream { seed, stream_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

pub fn select_query_type<R: Rng>(rng: &mut R, weights: &[f64; 3]) -> Result<QueryType, GeneratorError> {
    let dist = WeightedIndex::new(weights).map_err(|e| GeneratorError::InvalidConfig(e.to_string()))?;
    Ok(QueryType::ALL[dist.sample(rng)])
}

pub fn sample_event<R: Rng>(kg: &KnowledgeGraph, rng: &mut R) -> Result<NodeId, GeneratorError> {
    let events = kg.events();
    if events.is_empty() {
        return Err(GeneratorError::EmptyEventSet);
    }
    Ok(events[rng.random_range(0..events.len())].clone())
}

/// Relations the walk may use: no labels, no blank endpoints.
fn walkable(kg: &KnowledgeGraph, r: &Relation) -> bool {
    !kg.schema().is_label_predicate(&r.predicate) && !r.has_blank_endpoint()
}

fn walkable_incident(kg: &KnowledgeGraph, node: usize) -> Vec<usize> {
    kg.adjacency_at(node).iter().copied().filter(|&r| walkable(kg, kg.relation_at(r))).collect()
}

/// Node-to-node relations incident to `event` with an endpoint that takes
/// part in at least one other walkable relation.
pub fn eligible_seeds(kg: &KnowledgeGraph, event: &NodeId) -> Vec<usize> {
    let Some(pos) = kg.node_position(event.as_str()) else { return Vec::new() };
    walkable_incident(kg, pos)
        .into_iter()
        .filter(|&r| {
            let rel = kg.relation_at(r);
            !rel.is_literal()
                && rel.nodes().any(|n| {
                    kg.node_position(n.as_str()).is_some_and(|p| walkable_incident(kg, p).len() >= 2)
                })
        })
        .collect()
}

pub fn select_seed_relation<R: Rng>(kg: &KnowledgeGraph, event: &NodeId, rng: &mut R) -> Result<usize, GeneratorError> {
    let seeds = eligible_seeds(kg, event);
    if seeds.is_empty() {
        return Err(GeneratorError::NoEligibleSeed(event.as_str().to_string()));
    }
    Ok(seeds[rng.random_range(0..seeds.len())])
}

/// Grows a sub-graph from `seed` until it holds `max_relations` distinct
/// relations. Returns relation positions in insertion order.
pub fn random_walk_extend<R: Rng>(
    kg: &KnowledgeGraph,
    seed: usize,
    rng: &mut R,
    max_relations: usize,
    max_attempts: u32,
) -> Result<Vec<usize>, GeneratorError> {
    let mut chosen = vec![seed];
    let mut nodes: Vec<usize> = Vec::new();
    let add_nodes = |nodes: &mut Vec<usize>, r: usize| {
        for n in kg.relation_at(r).nodes() {
            let p = kg.node_position(n.as_str()).expect("relation endpoints are nodes");
            if !nodes.contains(&p) {
                nodes.push(p);
            }
        }
    };
    add_nodes(&mut nodes, seed);
    let mut attempts = 0;
    while chosen.len() < max_relations {
        if attempts >= max_attempts {
            return Err(GeneratorError::WalkStuck(max_attempts));
        }
        attempts += 1;
        let node = nodes[rng.random_range(0..nodes.len())];
        let incident = walkable_incident(kg, node);
        if incident.is_empty() {
            continue;
        }
        let r = incident[rng.random_range(0..incident.len())];
        if chosen.contains(&r) {
            continue;
        }
        chosen.push(r);
        add_nodes(&mut nodes, r);
    }
    Ok(chosen)
}

fn object_term(o: &RelationObject) -> QueryTerm {
    match o {
        RelationObject::Node(n) => QueryTerm::Node(n.as_str().to_string()),
        RelationObject::Literal(l) => QueryTerm::Literal(l.clone()),
    }
}

/// Preferred external identifier of a node: a DBpedia resource when there is
/// one, else the lexicographically first link.
pub fn preferred_same_as<'a>(kg: &'a KnowledgeGraph, node: &NodeId) -> Option<&'a str> {
    let links: Vec<&str> = kg.same_as(node).collect();
    links.iter().find(|l| l.starts_with(vocab::DBR)).or(links.first()).copied()
}

/// A variable candidate: a term of the sub-graph with its degree.
fn candidates(relations: &[QueryRelation]) -> Vec<(QueryTerm, usize)> {
    let mut degree: BTreeMap<&QueryTerm, usize> = BTreeMap::new();
    for r in relations {
        for t in r.terms() {
            *degree.entry(t).or_default() += 1;
        }
    }
    degree.into_iter().map(|(t, d)| (t.clone(), d)).collect()
}

fn redundant(kg: &KnowledgeGraph, relations: &[QueryRelation], lit: &Literal) -> bool {
    let needle = lit.lexical().to_lowercase();
    if needle.is_empty() {
        return false;
    }
    relations.iter().filter(|r| matches!(&r.object, QueryTerm::Literal(l) if l == lit)).any(|r| {
        r.subject
            .as_node()
            .is_some_and(|s| kg.labels(&NodeId::new(s)).any(|label| label.to_lowercase().contains(&needle)))
    })
}

/// Positions of the sub-graph that may become the variable of a `qtype`
/// query: not a leaf, not a literal already spelled out in an adjacent
/// label, and for COUNT not a time value.
pub fn eligible_variable_positions(kg: &KnowledgeGraph, relations: &[QueryRelation], qtype: QueryType) -> Vec<QueryTerm> {
    candidates(relations)
        .into_iter()
        .filter(|(t, degree)| {
            *degree >= 2
                && match t {
                    QueryTerm::Literal(l) => {
                        !redundant(kg, relations, l) && !(qtype == QueryType::Count && temporal::is_temporal(l))
                    }
                    QueryTerm::Node(n) => !NodeId::new(n.as_str()).is_blank(),
                    QueryTerm::Var(_) => false,
                }
        })
        .map(|(t, _)| t)
        .collect()
}

fn replace(t: &QueryTerm, from: &QueryTerm, to: &QueryTerm) -> QueryTerm {
    if t == from {
        to.clone()
    } else {
        t.clone()
    }
}

/// Turns the walked relations into a query graph with at most one variable.
/// In the reified model, concrete nodes with an identity link are written as
/// their external identifier.
pub fn allocate_variable<R: Rng>(
    kg: &KnowledgeGraph,
    walked: &[usize],
    qtype: QueryType,
    rng: &mut R,
) -> Result<QueryGraph, GeneratorError> {
    let model = kg.model();
    let mut relations: Vec<QueryRelation> = walked
        .iter()
        .map(|&i| {
            let r = kg.relation_at(i);
            let form = if model == GraphModel::Direct { Provenance::Direct } else { r.provenance };
            let mut q = QueryRelation::new(QueryTerm::Node(r.subject.as_str().to_string()), r.predicate.clone(), object_term(&r.object), form);
            q.source = Some(r.id.clone());
            q
        })
        .collect();
    relations.sort_by(QueryRelation::canonical_cmp);

    let mut variables = Vec::new();
    if qtype != QueryType::Ask {
        let eligible = eligible_variable_positions(kg, &relations, qtype);
        if eligible.is_empty() {
            return Err(GeneratorError::NoEligibleVariable);
        }
        let chosen = eligible[rng.random_range(0..eligible.len())].clone();
        let (kind, bound) = match &chosen {
            QueryTerm::Node(n) => {
                let id = NodeId::new(n.as_str());
                (VarKind::for_node(kg.node_kind(&id).expect("walked node")), Term::from_node(&id))
            }
            QueryTerm::Literal(l) => (VarKind::Literal, Term::literal(l.clone())),
            QueryTerm::Var(_) => unreachable!("sub-graph has no variables yet"),
        };
        let mut var = Variable::new(kind.default_name(), kind);
        var.bound_to = Some(bound);
        let v = QueryTerm::Var(var.name.clone());
        for r in &mut relations {
            r.subject = replace(&r.subject, &chosen, &v);
            r.object = replace(&r.object, &chosen, &v);
        }
        variables.push(var);
    }

    let mut bridged = BTreeSet::new();
    if model == GraphModel::Reified {
        let mut targets: BTreeMap<String, String> = BTreeMap::new();
        for r in &relations {
            for t in r.terms() {
                if let QueryTerm::Node(n) = t {
                    if let Some(ext) = preferred_same_as(kg, &NodeId::new(n.as_str())) {
                        targets.insert(n.clone(), ext.to_string());
                    }
                }
            }
        }
        // two nodes sharing an external identifier would collapse into one
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for ext in targets.values() {
            *seen.entry(ext.as_str()).or_default() += 1;
        }
        let targets: BTreeMap<String, String> =
            targets.iter().filter(|(_, e)| seen[e.as_str()] == 1).map(|(n, e)| (n.clone(), e.clone())).collect();
        for r in &mut relations {
            for t in [&mut r.subject, &mut r.object] {
                if let QueryTerm::Node(n) = t {
                    if let Some(ext) = targets.get(n) {
                        *n = ext.clone();
                        bridged.insert(ext.clone());
                    }
                }
            }
        }
    }
    Ok(QueryGraph::new(relations, variables, bridged)?)
}

/// A time fact reachable from the query graph but not part of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalAnchorCandidate {
    pub anchor: TemporalAnchor,
    pub predicate: String,
    pub value: Literal,
    /// The other end of the anchor's time span, when known.
    pub counterpart: Option<Literal>,
    pub is_begin: bool,
}

fn kg_node_of(graph: &QueryGraph, kg: &KnowledgeGraph, term: &QueryTerm) -> Option<NodeId> {
    match term {
        QueryTerm::Node(n) if graph.is_bridged(n) => kg.nodes_same_as(n).first().map(|&i| kg.node_at(i).clone()),
        QueryTerm::Node(n) => Some(NodeId::new(n.as_str())),
        QueryTerm::Var(v) => graph.variable(v)?.bound_to.as_ref()?.node_id(),
        QueryTerm::Literal(_) => None,
    }
}

fn node_time(kg: &KnowledgeGraph, node: &NodeId, preds: &[String], exclude: &BTreeSet<&str>) -> Vec<(String, Literal)> {
    let Some(pos) = kg.node_position(node.as_str()) else { return Vec::new() };
    let mut out = Vec::new();
    for &ri in kg.adjacency_at(pos) {
        let r = kg.relation_at(ri);
        if r.subject != *node || exclude.contains(r.id.as_str()) || !preds.contains(&r.predicate) {
            continue;
        }
        if let RelationObject::Literal(l) = &r.object {
            if temporal::is_temporal(l) {
                out.push((r.predicate.clone(), l.clone()));
            }
        }
    }
    out
}

pub fn temporal_anchor_candidates(kg: &KnowledgeGraph, graph: &QueryGraph) -> Vec<TemporalAnchorCandidate> {
    let schema = kg.schema();
    let in_graph: BTreeSet<&str> = graph.relations().iter().filter_map(|r| r.source.as_deref()).collect();
    let mut out = Vec::new();

    let mut terms: Vec<&QueryTerm> = Vec::new();
    for r in graph.relations() {
        for t in r.terms() {
            if !matches!(t, QueryTerm::Literal(_)) && !terms.contains(&t) && !graph.variable(t.as_var().unwrap_or("")).is_some_and(|v| v.kind == VarKind::Literal) {
                terms.push(t);
            }
        }
    }
    for term in terms {
        let Some(node) = kg_node_of(graph, kg, term) else { continue };
        let begins = node_time(kg, &node, &schema.time_begin, &in_graph);
        let ends = node_time(kg, &node, &schema.time_end, &in_graph);
        for (pred, value) in &begins {
            out.push(TemporalAnchorCandidate {
                anchor: TemporalAnchor::Node(term.clone()),
                predicate: pred.clone(),
                value: value.clone(),
                counterpart: ends.first().map(|(_, l)| l.clone()),
                is_begin: true,
            });
        }
        for (pred, value) in &ends {
            out.push(TemporalAnchorCandidate {
                anchor: TemporalAnchor::Node(term.clone()),
                predicate: pred.clone(),
                value: value.clone(),
                counterpart: begins.first().map(|(_, l)| l.clone()),
                is_begin: false,
            });
        }
    }
    for (i, r) in graph.relations().iter().enumerate() {
        if r.form != Provenance::Reified {
            continue;
        }
        let Some(rel) = r.source.as_deref().and_then(|id| kg.relation(id)) else { continue };
        let from = rel.valid_from.clone().filter(temporal::is_temporal);
        let to = rel.valid_to.clone().filter(temporal::is_temporal);
        if let (Some(v), Some(p)) = (&from, schema.time_begin.first()) {
            out.push(TemporalAnchorCandidate {
                anchor: TemporalAnchor::Relation(i),
                predicate: p.clone(),
                value: v.clone(),
                counterpart: to.clone(),
                is_begin: true,
            });
        }
        if let (Some(v), Some(p)) = (&to, schema.time_end.first()) {
            out.push(TemporalAnchorCandidate {
                anchor: TemporalAnchor::Relation(i),
                predicate: p.clone(),
                value: v.clone(),
                counterpart: from.clone(),
                is_begin: false,
            });
        }
    }
    out
}

/// Builds the constraint of `mode` over a candidate. The bounds always admit
/// the candidate's own value: `after` compares against the unit before the
/// span's start, `before` against the unit after its end, and `within` uses
/// the span itself.
pub fn constraint_for(c: &TemporalAnchorCandidate, mode: TemporalMode) -> Option<TemporalConstraint> {
    let v = TimeValue::from_literal(&c.value)?;
    let other = c.counterpart.as_ref().and_then(|l| TimeValue::from_literal(l).map(|t| (l, t)));
    let (start, end) = match (c.is_begin, other) {
        (true, Some((l, t))) if t.end >= v.end => (c.value.clone(), l.clone()),
        (false, Some((l, t))) if t.start <= v.start => (l.clone(), c.value.clone()),
        _ => (c.value.clone(), c.value.clone()),
    };
    let variable = if vocab::local_name(&c.predicate) == "year" { "year" } else { "time" };
    let (start, end) = match mode {
        TemporalMode::Within => (Some(start), Some(end)),
        TemporalMode::After => (Some(temporal::previous_unit(&start)?), None),
        TemporalMode::Before => (None, Some(temporal::next_unit(&end)?)),
    };
    Some(TemporalConstraint {
        anchor: c.anchor.clone(),
        predicate: c.predicate.clone(),
        variable: variable.to_string(),
        mode,
        start,
        end,
    })
}

/// With probability `p`, and when the graph reaches some time fact, draws
/// an anchor and a mode uniformly.
pub fn add_temporal_constraint<R: Rng>(
    kg: &KnowledgeGraph,
    graph: &QueryGraph,
    rng: &mut R,
    p: f64,
) -> Option<TemporalConstraint> {
    if !rng.random_bool(p) {
        return None;
    }
    let candidates = temporal_anchor_candidates(kg, graph);
    if candidates.is_empty() {
        return None;
    }
    let c = &candidates[rng.random_range(0..candidates.len())];
    let mode = TemporalMode::ALL[rng.random_range(0..3)];
    constraint_for(c, mode)
}

pub fn generate_query(kg: &KnowledgeGraph, config: &GeneratorConfig, stream_index: u64) -> Result<SemanticQuery, GeneratorError> {
    config.validate()?;
    let mut rng = RngStream::new(config.rng_seed, stream_index).rng();
    let exhausted = |attempts: u64, e: &GeneratorError| GeneratorError::GenerationExhausted { attempts, reason: e.to_string() };
    let qtype = select_query_type(&mut rng, &config.type_weights)?;
    let mut last = GeneratorError::EmptyEventSet;
    for attempt in 1..=config.max_attempts_per_query {
        let event = match sample_event(kg, &mut rng) {
            Ok(e) => e,
            Err(e) => return Err(exhausted(attempt as u64, &e)),
        };
        let step = (|| {
            let seed = select_seed_relation(kg, &event, &mut rng)?;
            let walked = random_walk_extend(kg, seed, &mut rng, config.max_relations, config.max_attempts_per_query)?;
            let graph = allocate_variable(kg, &walked, qtype, &mut rng)?;
            Ok::<_, GeneratorError>((seed, walked, graph))
        })();
        let (seed, walked, graph) = match step {
            Ok(x) => x,
            Err(e) => {
                last = e;
                continue;
            }
        };
        let constraint = add_temporal_constraint(kg, &graph, &mut rng, config.temporal_constraint_probability);
        let trace = SeedTrace {
            seed: config.rng_seed,
            stream_index,
            attempts: attempt,
            query_type: qtype,
            event: event.as_str().to_string(),
            seed_relation: kg.relation_at(seed).id.clone(),
            walk: walked[1..].iter().map(|&r| kg.relation_at(r).id.clone()).collect(),
            variable: graph.variables().first().map(|v| v.name.clone()),
            constraint: constraint.as_ref().map(|c| c.mode),
        };
        return Ok(SemanticQuery::new(graph, qtype, constraint, kg.model())?.with_trace(trace));
    }
    Err(exhausted(config.max_attempts_per_query as u64, &last))
}

/// Two queries are duplicates when they share their element set and their
/// predicate multiset.
pub fn dedup_key(q: &SemanticQuery) -> (BTreeSet<String>, Vec<String>) {
    let mut preds: Vec<String> = q.graph().relations().iter().map(|r| r.predicate.clone()).collect();
    preds.sort();
    (q.element_set(), preds)
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(f))
            .unwrap_or_else(|_| panic!("cannot start a pool of {n} threads")),
        None => f(),
    }
}

/// Generates `n` distinct queries from stream indices `0..n`. Duplicates are
/// replaced, in slot order, by queries from the following indices.
pub fn generate_dataset(
    kg: &KnowledgeGraph,
    n: usize,
    config: &GeneratorConfig,
    jobs: Option<usize>,
) -> Result<Vec<SemanticQuery>, GeneratorError> {
    config.validate()?;
    if n == 0 {
        return Err(GeneratorError::InvalidConfig("dataset size must be at least 1".into()));
    }
    let batch = |from: u64, to: u64| -> Result<Vec<SemanticQuery>, GeneratorError> {
        in_pool(jobs, || (from..to).into_par_iter().map(|i| generate_query(kg, config, i)).collect())
    };
    let mut slots: Vec<Option<SemanticQuery>> = Vec::with_capacity(n);
    let mut seen = BTreeSet::new();
    let mut pending = std::collections::VecDeque::new();
    for (i, q) in batch(0, n as u64)?.into_iter().enumerate() {
        if seen.insert(dedup_key(&q)) {
            slots.push(Some(q));
        } else {
            slots.push(None);
            pending.push_back(i);
        }
    }
    let limit = (n as u64) * 11 + 100;
    let mut next = n as u64;
    while !pending.is_empty() {
        if next >= limit {
            return Err(GeneratorError::GenerationExhausted {
                attempts: next,
                reason: format!("the graph did not yield {n} distinct queries"),
            });
        }
        let to = (next + pending.len() as u64).min(limit);
        for q in batch(next, to)? {
            if seen.insert(dedup_key(&q)) {
                let slot = pending.pop_front().expect("pending slot");
                slots[slot] = Some(q);
                if pending.is_empty() {
                    break;
                }
            }
        }
        next = to;
    }
    Ok(slots.into_iter().map(|q| q.expect("every slot filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::kg::{build_graph, SchemaConfig, Triple};
    use crate::sparql;
    use crate::vocab::*;

    fn rng(i: u64) -> ChaCha8Rng {
        RngStream::new(7, i).rng()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |s: RngStream| -> Vec<u32> {
            let mut r = s.rng();
            (0..8).map(|_| r.random()).collect()
        };
        assert_eq!(draw(RngStream::new(1, 5)), draw(RngStream::new(1, 5)));
        assert_ne!(draw(RngStream::new(1, 5)), draw(RngStream::new(1, 6)));
        assert_ne!(draw(RngStream::new(1, 5)), draw(RngStream::new(2, 5)));
    }

    #[test]
    fn config_validation() {
        let mut c = GeneratorConfig::default();
        c.validate().unwrap();
        c.type_weights = [0.0; 3];
        assert!(c.validate().is_err());
        c = GeneratorConfig { max_relations: 0, ..Default::default() };
        assert!(c.validate().is_err());
        c = GeneratorConfig { temporal_constraint_probability: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn degenerate_type_weights() {
        let mut r = rng(0);
        for _ in 0..100 {
            assert_eq!(select_query_type(&mut r, &[1.0, 0.0, 0.0]).unwrap(), QueryType::Ask);
        }
    }

    #[test]
    fn uniform_type_frequencies() {
        let mut r = rng(1);
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            let t = select_query_type(&mut r, &[1.0, 1.0, 1.0]).unwrap();
            counts[QueryType::ALL.iter().position(|x| *x == t).unwrap()] += 1;
        }
        // chi-square with 2 degrees of freedom, 99.9% quantile 13.82
        let e = n as f64 / 3.0;
        let chi: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi < 13.82, "{counts:?}");
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    fn events_kg(k: usize) -> KnowledgeGraph {
        let triples: Vec<Triple> = (0..k)
            .map(|i| Triple::iris(&format!("http://x/e{i}"), RDF_TYPE, SEM_EVENT))
            .collect();
        build_graph(triples, &SchemaConfig::eventkg()).unwrap()
    }

    #[test]
    fn event_sampling() {
        let one = events_kg(1);
        assert_eq!(sample_event(&one, &mut rng(0)).unwrap().as_str(), "http://x/e0");
        let four = events_kg(4);
        let mut r = rng(2);
        let mut counts = BTreeMap::new();
        for _ in 0..40_000 {
            *counts.entry(sample_event(&four, &mut r).unwrap()).or_insert(0usize) += 1;
        }
        for c in counts.values() {
            assert!((*c as f64 / 40_000.0 - 0.25).abs() < 0.02);
        }
        let none = build_graph(vec![Triple::iris("http://x/a", "http://x/p", "http://x/b")], &SchemaConfig::eventkg()).unwrap();
        assert_eq!(sample_event(&none, &mut rng(0)), Err(GeneratorError::EmptyEventSet));
    }

    #[test]
    fn seed_selection() {
        let gp = fixture::grand_prix_graph();
        let ev = NodeId::new(fixture::GP2002);
        let seeds = eligible_seeds(&gp, &ev);
        let fdt = seeds.iter().any(|&s| {
            let r = gp.relation_at(s);
            r.predicate == format!("{DBO}fastestDriverTeam") && r.object.as_node().unwrap().as_str() == fixture::FERRARI
        });
        assert!(fdt);
        for &s in &seeds {
            assert!(!gp.relation_at(s).is_literal());
        }

        let lonely = build_graph(
            vec![
                Triple::iris("http://x/e", RDF_TYPE, SEM_EVENT),
                Triple::iris("http://x/e", "http://x/p", "http://x/a"),
            ],
            &SchemaConfig::eventkg(),
        )
        .unwrap();
        assert_eq!(
            select_seed_relation(&lonely, &NodeId::new("http://x/e"), &mut rng(0)),
            Err(GeneratorError::NoEligibleSeed("http://x/e".into()))
        );

        let single = build_graph(
            vec![
                Triple::iris("http://x/e", RDF_TYPE, SEM_EVENT),
                Triple::iris("http://x/e", "http://x/p", "http://x/a"),
                Triple::iris("http://x/a", "http://x/q", "http://x/b"),
            ],
            &SchemaConfig::eventkg(),
        )
        .unwrap();
        for i in 0..20 {
            let s = select_seed_relation(&single, &NodeId::new("http://x/e"), &mut rng(i)).unwrap();
            assert_eq!(single.relation_at(s).predicate, "http://x/p");
        }
    }

    #[test]
    fn walk_reaches_grand_prix_path_and_respects_limits() {
        let gp = fixture::grand_prix_graph();
        let seed = gp
            .relations()
            .iter()
            .position(|r| r.subject.as_str() == fixture::GP2002 && r.predicate.ends_with("fastestDriverTeam"))
            .unwrap();
        let second = gp
            .relations()
            .iter()
            .position(|r| r.subject.as_str() == fixture::GP2002 && r.predicate.ends_with("secondTeam"))
            .unwrap();
        let mut hit = false;
        for i in 0..200 {
            let walked = random_walk_extend(&gp, seed, &mut rng(i), 2, 100).unwrap();
            assert_eq!(walked.len(), 2);
            assert_eq!(walked[0], seed);
            hit |= walked[1] == second;
        }
        assert!(hit);
        let mut r = rng(0);
        let before: u64 = r.clone().random();
        assert_eq!(random_walk_extend(&gp, seed, &mut r, 1, 100).unwrap(), vec![seed]);
        assert_eq!(r.random::<u64>(), before, "max_relations = 1 draws nothing");
    }

    #[test]
    fn walk_on_league_adds_r02() {
        let kg = fixture::league_graph();
        let seed = kg.relation_position(fixture::R01).unwrap();
        let r02 = kg.relation_position(fixture::R02).unwrap();
        for i in 0..50 {
            assert_eq!(random_walk_extend(&kg, seed, &mut rng(i), 2, 100).unwrap(), vec![seed, r02]);
        }
    }

    #[test]
    fn walk_gets_stuck_on_a_single_edge() {
        let kg = build_graph(
            vec![
                Triple::iris("http://x/e", RDF_TYPE, SEM_EVENT),
                Triple::iris("http://x/e", "http://x/p", "http://x/a"),
            ],
            &SchemaConfig::eventkg(),
        )
        .unwrap();
        assert_eq!(random_walk_extend(&kg, 0, &mut rng(0), 2, 10), Err(GeneratorError::WalkStuck(10)));
    }

    fn gp_walk(gp: &KnowledgeGraph) -> Vec<usize> {
        ["fastestDriverTeam", "secondTeam"]
            .iter()
            .map(|p| gp.relations().iter().position(|r| r.subject.as_str() == fixture::GP2002 && r.predicate.ends_with(p)).unwrap())
            .collect()
    }

    #[test]
    fn grand_prix_variable_is_the_event() {
        let gp = fixture::grand_prix_graph();
        let walked = gp_walk(&gp);
        for i in 0..20 {
            let g = allocate_variable(&gp, &walked, QueryType::Select, &mut rng(i)).unwrap();
            assert_eq!(g.variables().len(), 1);
            assert_eq!(g.variables()[0].name, "event");
            assert_eq!(g.variables()[0].bound_to, Some(Term::iri(fixture::GP2002)));
        }
        let ask = allocate_variable(&gp, &walked, QueryType::Ask, &mut rng(0)).unwrap();
        assert!(ask.variables().is_empty());
    }

    #[test]
    fn redundant_and_temporal_literals_are_ineligible() {
        let triples = vec![
            Triple::iris("http://x/gp", RDF_TYPE, DBO_EVENT),
            Triple::new(Term::iri("http://x/gp"), RDFS_LABEL, Term::literal(Literal::lang("2002 German Grand Prix", "en"))),
            Triple::new(Term::iri("http://x/gp"), DBP_YEAR, Term::literal(Literal::integer(2002))),
            Triple::new(Term::iri("http://x/other"), DBP_YEAR, Term::literal(Literal::integer(2002))),
            Triple::new(Term::iri("http://x/gp"), "http://x/code", Term::literal(Literal::plain("XQZ"))),
            Triple::new(Term::iri("http://x/other"), "http://x/code", Term::literal(Literal::plain("XQZ"))),
        ];
        let kg = build_graph(triples, &SchemaConfig::dbpedia()).unwrap();
        let rel = |s: &str, p: &str, o: Literal| {
            QueryRelation::new(QueryTerm::Node(s.into()), p, QueryTerm::Literal(o), Provenance::Direct)
        };
        let year = vec![
            rel("http://x/gp", DBP_YEAR, Literal::integer(2002)),
            rel("http://x/other", DBP_YEAR, Literal::integer(2002)),
        ];
        assert!(!eligible_variable_positions(&kg, &year, QueryType::Select).contains(&QueryTerm::Literal(Literal::integer(2002))));
        let code = vec![
            rel("http://x/gp", "http://x/code", Literal::plain("XQZ")),
            rel("http://x/other", "http://x/code", Literal::plain("XQZ")),
        ];
        assert_eq!(eligible_variable_positions(&kg, &code, QueryType::Select), vec![QueryTerm::Literal(Literal::plain("XQZ"))]);
        // a temporal literal without a matching label is eligible, except for COUNT
        let kg2 = build_graph(
            vec![
                Triple::new(Term::iri("http://x/a"), DBP_YEAR, Term::literal(Literal::integer(1999))),
                Triple::new(Term::iri("http://x/b"), DBP_YEAR, Term::literal(Literal::integer(1999))),
            ],
            &SchemaConfig::dbpedia(),
        )
        .unwrap();
        let y = vec![
            rel("http://x/a", DBP_YEAR, Literal::integer(1999)),
            rel("http://x/b", DBP_YEAR, Literal::integer(1999)),
        ];
        assert_eq!(eligible_variable_positions(&kg2, &y, QueryType::Select).len(), 1);
        assert!(eligible_variable_positions(&kg2, &y, QueryType::Count).is_empty());
    }

    #[test]
    fn after_constraint_matches_grand_prix_filter() {
        let gp = fixture::grand_prix_graph();
        let walked = gp_walk(&gp);
        let g = allocate_variable(&gp, &walked, QueryType::Count, &mut rng(0)).unwrap();
        let cands = temporal_anchor_candidates(&gp, &g);
        assert_eq!(cands.len(), 1);
        let c = constraint_for(&cands[0], TemporalMode::After).unwrap();
        assert_eq!(c.start, Some(Literal::integer(2001)));
        assert_eq!(c.variable, "year");
        let q = SemanticQuery::new(g, QueryType::Count, Some(c), GraphModel::Direct).unwrap();
        let text = sparql::emit(&q).unwrap().text;
        assert!(text.contains("  ?event dbp:year ?year .\n  FILTER ( ?year > \"2001\"^^xsd:integer)\n"), "{text}");
    }

    #[test]
    fn within_keeps_the_anchor_value() {
        let c = TemporalAnchorCandidate {
            anchor: TemporalAnchor::Relation(0),
            predicate: SEM_BEGIN.into(),
            value: Literal::typed("1973-01-01", XSD_DATE),
            counterpart: Some(Literal::typed("1973-12-31", XSD_DATE)),
            is_begin: true,
        };
        let w = constraint_for(&c, TemporalMode::Within).unwrap();
        assert_eq!(w.start, Some(Literal::typed("1973-01-01", XSD_DATE)));
        assert_eq!(w.end, Some(Literal::typed("1973-12-31", XSD_DATE)));
        let b = constraint_for(&c, TemporalMode::Before).unwrap();
        assert_eq!(b.end, Some(Literal::typed("1974-01-01", XSD_DATE)));
        assert_eq!(w.variable, "time");
    }

    #[test]
    fn no_time_facts_no_constraint() {
        let kg = fixture::league_graph();
        // the league events carry no node time stamps; relation validity exists
        let walked = vec![kg.relation_position(fixture::R01).unwrap(), kg.relation_position(fixture::R02).unwrap()];
        let g = allocate_variable(&kg, &walked, QueryType::Ask, &mut rng(0)).unwrap();
        assert!(temporal_anchor_candidates(&kg, &g).iter().all(|c| matches!(c.anchor, TemporalAnchor::Relation(_))));
        let gp = fixture::grand_prix_graph();
        let bare = vec![gp.relations().iter().position(|r| r.subject.as_str() == fixture::FERRARI).unwrap()];
        let g = allocate_variable(&gp, &bare, QueryType::Ask, &mut rng(0)).unwrap();
        for i in 0..20 {
            assert_eq!(add_temporal_constraint(&gp, &g, &mut rng(i), 1.0), None);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let kg = fixture::toy().graph(GraphModel::Reified);
        let cfg = GeneratorConfig::with_seed(42);
        let a = generate_query(&kg, &cfg, 0).unwrap();
        let b = generate_query(&kg, &cfg, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.relation_count(), 2);
    }

    #[test]
    fn golden_query_seed_42_index_0() {
        let kg = fixture::toy().graph(GraphModel::Reified);
        let q = generate_query(&kg, &GeneratorConfig::with_seed(42), 0).unwrap();
        let text = sparql::emit(&q).unwrap().text;
        assert_eq!(text, include_str!("../tests/golden/seed42_index0.rq"));
    }

    #[test]
    fn zero_events_exhausts() {
        let kg = build_graph(vec![Triple::iris("http://x/a", "http://x/p", "http://x/b")], &SchemaConfig::eventkg()).unwrap();
        match generate_query(&kg, &GeneratorConfig::default(), 0) {
            Err(GeneratorError::GenerationExhausted { reason, .. }) => assert!(reason.contains("no events")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dataset_of_one_and_parallel_equivalence() {
        let kg = fixture::toy().graph(GraphModel::Direct);
        let cfg = GeneratorConfig::with_seed(3);
        assert_eq!(generate_dataset(&kg, 1, &cfg, None).unwrap().len(), 1);
        let seq = generate_dataset(&kg, 40, &cfg, Some(1)).unwrap();
        let par = generate_dataset(&kg, 40, &cfg, Some(4)).unwrap();
        assert_eq!(seq, par);
        assert!(generate_dataset(&kg, 0, &cfg, None).is_err());
        let keys: BTreeSet<_> = seq.iter().map(dedup_key).collect();
        assert_eq!(keys.len(), 40);
    }
}
