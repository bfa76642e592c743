//! Basic-graph-pattern evaluation of semantic queries against an in-memory
//! knowledge graph, plus a naive enumerator used to check it.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{GraphModel, KnowledgeGraph, Literal, NodeId, Relation, RelationObject, Term};
use crate::query::{QueryRelation, QueryTerm, QueryType, SemanticQuery, TemporalAnchor, TemporalConstraint, TemporalMode, VarKind};
use crate::temporal::TimeValue;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("filter compares against non-temporal literal {0}")]
    TypeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnswerSet {
    Boolean { value: bool },
    Bindings { variable: String, values: BTreeSet<Term> },
    Count { value: u64 },
}

impl AnswerSet {
    pub fn is_empty(&self) -> bool {
        match self {
            AnswerSet::Boolean { value } => !value,
            AnswerSet::Bindings { values, .. } => values.is_empty(),
            AnswerSet::Count { value } => *value == 0,
        }
    }

    fn from_values(q: &SemanticQuery, values: BTreeSet<Term>, any: bool) -> Self {
        match q.qtype() {
            QueryType::Ask => AnswerSet::Boolean { value: any },
            QueryType::Select => AnswerSet::Bindings {
                variable: q.target().map(|v| v.name.clone()).unwrap_or_default(),
                values,
            },
            QueryType::Count => AnswerSet::Count { value: values.len() as u64 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value<'a> {
    Node(&'a NodeId),
    Lit(&'a Literal),
}

impl Value<'_> {
    fn to_term(self) -> Term {
        match self {
            Value::Node(n) => Term::from_node(n),
            Value::Lit(l) => Term::literal(l.clone()),
        }
    }
}

fn object_value(o: &RelationObject) -> Value<'_> {
    match o {
        RelationObject::Node(n) => Value::Node(n),
        RelationObject::Literal(l) => Value::Lit(l),
    }
}

/// Parsed filter bounds. Constants that are not time values are an error.
struct Filter<'q> {
    c: &'q TemporalConstraint,
    start: Option<TimeValue>,
    end: Option<TimeValue>,
}

impl<'q> Filter<'q> {
    fn new(c: &'q TemporalConstraint) -> Result<Self, EvalError> {
        let parse = |l: &Option<Literal>| match l {
            None => Ok(None),
            Some(l) => TimeValue::from_literal(l).map(Some).ok_or_else(|| EvalError::TypeMismatch(l.to_ntriples())),
        };
        Ok(Filter { c, start: parse(&c.start)?, end: parse(&c.end)? })
    }

    fn admits(&self, lit: &Literal) -> bool {
        let Some(t) = TimeValue::from_literal(lit) else { return false };
        match self.c.mode {
            TemporalMode::After => t.after(self.start.as_ref().unwrap()),
            TemporalMode::Before => t.before(self.end.as_ref().unwrap()),
            TemporalMode::Within => {
                t.not_before_start_of(self.start.as_ref().unwrap()) && t.not_after_end_of(self.end.as_ref().unwrap())
            }
        }
    }
}

/// Time values a constraint reads, given the anchor node or relation.
fn node_times<'a>(kg: &'a KnowledgeGraph, node: &NodeId, predicate: &str) -> Vec<&'a Literal> {
    let Some(pos) = kg.node_position(node.as_str()) else { return Vec::new() };
    kg.adjacency_at(pos)
        .iter()
        .map(|&i| kg.relation_at(i))
        .filter(|r| r.subject == *node && r.predicate == predicate)
        .filter_map(|r| r.object.as_literal())
        .collect()
}

fn relation_times<'a>(kg: &KnowledgeGraph, r: &'a Relation, predicate: &str) -> Vec<&'a Literal> {
    let schema = kg.schema();
    let mut out = Vec::new();
    if schema.time_begin.iter().any(|p| p == predicate) {
        out.extend(r.valid_from.as_ref());
    }
    if schema.time_end.iter().any(|p| p == predicate) {
        out.extend(r.valid_to.as_ref());
    }
    out
}

/// The slot a query term occupies: variables and bridged identifiers are
/// open, everything else is fixed.
fn is_slot(q: &SemanticQuery, t: &QueryTerm) -> bool {
    match t {
        QueryTerm::Var(_) => true,
        QueryTerm::Node(n) => q.graph().is_bridged(n),
        QueryTerm::Literal(_) => false,
    }
}

struct Search<'a, 'q> {
    kg: &'a KnowledgeGraph,
    q: &'q SemanticQuery,
    filter: Option<Filter<'q>>,
    /// Pattern index → static candidate relation positions.
    candidates: Vec<Vec<usize>>,
    order: Vec<usize>,
    binding: HashMap<&'q QueryTerm, Value<'a>>,
    matched: Vec<Option<usize>>,
    values: BTreeSet<Term>,
    any: bool,
}

impl<'a, 'q> Search<'a, 'q> {
    /// Whether a KG value can stand at a query position, ignoring bindings.
    fn fits(&self, t: &QueryTerm, v: Value<'a>) -> bool {
        match (t, v) {
            (QueryTerm::Node(n), Value::Node(id)) if self.q.graph().is_bridged(n) => {
                self.kg.same_as(id).any(|x| x == n)
            }
            (QueryTerm::Node(n), Value::Node(id)) => n == id.as_str(),
            (QueryTerm::Literal(l), Value::Lit(x)) => l == x,
            (QueryTerm::Var(name), v) => {
                let event_only = self.q.model() == GraphModel::Direct
                    && self.q.graph().variable(name).is_some_and(|var| var.kind == VarKind::Event);
                match v {
                    Value::Node(id) => !event_only || self.kg.is_event(id),
                    Value::Lit(_) => !event_only,
                }
            }
            _ => false,
        }
    }

    fn static_candidates(&self, p: &QueryRelation) -> Vec<usize> {
        self.kg
            .relations_with_predicate(&p.predicate)
            .iter()
            .copied()
            .filter(|&i| {
                let r = self.kg.relation_at(i);
                r.provenance == p.form && self.fits(&p.subject, Value::Node(&r.subject)) && self.fits(&p.object, object_value(&r.object))
            })
            .collect()
    }

    /// Pattern order: fewest candidates first, then always a pattern that
    /// shares a term with those already placed.
    fn plan(&mut self) {
        let rels = self.q.graph().relations();
        let mut left: Vec<usize> = (0..rels.len()).collect();
        let mut placed: BTreeSet<&QueryTerm> = BTreeSet::new();
        while !left.is_empty() {
            let joined: Vec<usize> = left.iter().copied().filter(|&i| rels[i].terms().iter().any(|t| placed.contains(t))).collect();
            let pool = if joined.is_empty() { left.clone() } else { joined };
            let best = *pool.iter().min_by_key(|&&i| (self.candidates[i].len(), i)).unwrap();
            left.retain(|&i| i != best);
            placed.extend(rels[best].terms());
            self.order.push(best);
        }
    }

    fn bind(&mut self, t: &'q QueryTerm, v: Value<'a>, added: &mut Vec<&'q QueryTerm>) -> bool {
        if !is_slot(self.q, t) {
            return true;
        }
        match self.binding.get(t) {
            Some(b) => *b == v,
            None => {
                self.binding.insert(t, v);
                added.push(t);
                true
            }
        }
    }

    fn step(&mut self, depth: usize) {
        if self.any && self.q.qtype() == QueryType::Ask {
            return;
        }
        if depth == self.order.len() {
            return self.emit();
        }
        let pi = self.order[depth];
        let p = &self.q.graph().relations()[pi];
        // narrow to the adjacency of a bound endpoint when there is one
        let bound_node = p.terms().into_iter().find_map(|t| match self.binding.get(t) {
            Some(Value::Node(n)) => Some(*n),
            _ => None,
        });
        let pool: Vec<usize> = match bound_node.and_then(|n| self.kg.node_position(n.as_str())) {
            Some(pos) => {
                let adj = self.kg.adjacency_at(pos);
                self.candidates[pi].iter().copied().filter(|i| adj.binary_search(i).is_ok()).collect()
            }
            None => self.candidates[pi].clone(),
        };
        for i in pool {
            let r = self.kg.relation_at(i);
            let mut added = Vec::new();
            let ok = self.bind(&p.subject, Value::Node(&r.subject), &mut added)
                && self.bind(&p.object, object_value(&r.object), &mut added);
            if ok {
                self.matched[pi] = Some(i);
                self.step(depth + 1);
                self.matched[pi] = None;
            }
            for t in added {
                self.binding.remove(t);
            }
        }
    }

    fn anchor_times(&self, c: &TemporalConstraint) -> Vec<&'a Literal> {
        match &c.anchor {
            TemporalAnchor::Relation(i) => match self.matched[*i] {
                Some(r) => relation_times(self.kg, self.kg.relation_at(r), &c.predicate),
                None => Vec::new(),
            },
            TemporalAnchor::Node(t) => {
                let node = match self.binding.get(t) {
                    Some(Value::Node(n)) => (*n).clone(),
                    Some(Value::Lit(_)) => return Vec::new(),
                    None => match t {
                        QueryTerm::Node(n) => NodeId::new(n.as_str()),
                        _ => return Vec::new(),
                    },
                };
                node_times(self.kg, &node, &c.predicate)
            }
        }
    }

    fn emit(&mut self) {
        if let Some(f) = &self.filter {
            if !self.anchor_times(f.c).into_iter().any(|l| f.admits(l)) {
                return;
            }
        }
        self.any = true;
        if let Some(v) = self.q.target() {
            let key = QueryTerm::Var(v.name.clone());
            if let Some(val) = self.binding.get(&key) {
                self.values.insert(val.to_term());
            }
        }
    }
}

pub fn evaluate(kg: &KnowledgeGraph, q: &SemanticQuery) -> Result<AnswerSet, EvalError> {
    let filter = q.constraint().map(Filter::new).transpose()?;
    let n = q.graph().relations().len();
    let mut s = Search {
        kg,
        q,
        filter,
        candidates: Vec::new(),
        order: Vec::new(),
        binding: HashMap::new(),
        matched: vec![None; n],
        values: BTreeSet::new(),
        any: false,
    };
    s.candidates = q.graph().relations().iter().map(|p| s.static_candidates(p)).collect();
    if n > 0 && s.candidates.iter().all(|c| !c.is_empty()) {
        s.plan();
        s.step(0);
    } else if n == 0 {
        s.emit();
    }
    let (values, any) = (s.values, s.any);
    Ok(AnswerSet::from_values(q, values, any))
}

/// Tries every assignment of every open slot over every node and literal of
/// the graph, and checks each pattern by scanning all relations.
pub fn brute_force_oracle(kg: &KnowledgeGraph, q: &SemanticQuery) -> Result<AnswerSet, EvalError> {
    let parse = |l: &Option<Literal>| match l {
        None => Ok(None),
        Some(l) => TimeValue::from_literal(l).map(Some).ok_or_else(|| EvalError::TypeMismatch(l.to_ntriples())),
    };
    let bounds = match q.constraint() {
        Some(c) => Some((c, parse(&c.start)?, parse(&c.end)?)),
        None => None,
    };

    let mut domain: Vec<Term> = kg.nodes().map(|(n, _)| Term::from_node(n)).collect();
    let mut lits: BTreeSet<&Literal> = BTreeSet::new();
    for r in kg.relations() {
        if let RelationObject::Literal(l) = &r.object {
            lits.insert(l);
        }
    }
    domain.extend(lits.into_iter().map(|l| Term::literal(l.clone())));

    let mut slots: Vec<&QueryTerm> = Vec::new();
    for p in q.graph().relations() {
        for t in p.terms() {
            if is_slot(q, t) && !slots.contains(&t) {
                slots.push(t);
            }
        }
    }

    let holds = |t: &QueryTerm, assign: &[&Term], v: &Term| -> bool {
        match slots.iter().position(|s| *s == t) {
            Some(i) => assign[i] == v,
            None => match t {
                QueryTerm::Node(n) => v.as_iri() == Some(n.as_str()),
                QueryTerm::Literal(l) => v.as_literal() == Some(l),
                QueryTerm::Var(_) => false,
            },
        }
    };
    let rel_subject = |r: &Relation| Term::from_node(&r.subject);
    let rel_object = |r: &Relation| r.object.to_term();

    // a bridged identifier ranges over the nodes linked to it
    let domains: Vec<Vec<&Term>> = slots
        .iter()
        .map(|s| match s {
            QueryTerm::Node(x) => {
                domain.iter().filter(|v| v.node_id().is_some_and(|n| kg.same_as(&n).any(|y| y == x))).collect()
            }
            _ => domain.iter().collect(),
        })
        .collect();
    let mut values = BTreeSet::new();
    let mut any = false;
    let mut idx = vec![0usize; slots.len()];
    let total: u128 = domains.iter().map(|d| d.len() as u128).product();
    for _ in 0..total {
        let assign: Vec<&Term> = idx.iter().zip(&domains).map(|(&i, d)| d[i]).collect();
        let slot_ok = slots.iter().zip(&assign).all(|(s, v)| match s {
            QueryTerm::Node(_) => true,
            QueryTerm::Var(name) => {
                let var = q.graph().variable(name).expect("declared");
                !(q.model() == GraphModel::Direct && var.kind == VarKind::Event)
                    || v.node_id().is_some_and(|n| kg.is_event(&n))
            }
            QueryTerm::Literal(_) => true,
        });
        let matches: Vec<Vec<&Relation>> = if slot_ok {
            q.graph()
                .relations()
                .iter()
                .map(|p| {
                    kg.relations()
                        .iter()
                        .filter(|r| {
                            r.predicate == p.predicate
                                && r.provenance == p.form
                                && holds(&p.subject, &assign, &rel_subject(r))
                                && holds(&p.object, &assign, &rel_object(r))
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        if slot_ok && matches.iter().all(|m| !m.is_empty()) {
            let pass = match &bounds {
                None => true,
                Some((c, start, end)) => {
                    let times: Vec<&Literal> = match &c.anchor {
                        TemporalAnchor::Relation(i) => {
                            matches[*i].iter().flat_map(|r| relation_times(kg, r, &c.predicate)).collect()
                        }
                        TemporalAnchor::Node(t) => {
                            let node = match slots.iter().position(|s| *s == t) {
                                Some(i) => assign[i].clone(),
                                None => Term::iri(t.as_node().unwrap_or_default()),
                            };
                            kg.relations()
                                .iter()
                                .filter(|r| rel_subject(r) == node && r.predicate == c.predicate)
                                .filter_map(|r| r.object.as_literal())
                                .collect()
                        }
                    };
                    times.into_iter().filter_map(TimeValue::from_literal).any(|t| match c.mode {
                        TemporalMode::After => t.start > end_of(start),
                        TemporalMode::Before => t.end < start_of(end),
                        TemporalMode::Within => t.start >= start_of(start) && t.end <= end_of(end),
                    })
                }
            };
            if pass {
                any = true;
                if let Some(v) = q.target() {
                    let i = slots.iter().position(|s| s.as_var() == Some(&v.name)).expect("target occurs");
                    values.insert(assign[i].clone());
                }
            }
        }
        // odometer increment
        for (d, dom) in idx.iter_mut().zip(&domains) {
            *d += 1;
            if *d < dom.len() {
                break;
            }
            *d = 0;
        }
    }
    Ok(AnswerSet::from_values(q, values, any || (slots.is_empty() && q.graph().relations().is_empty())))
}

fn start_of(t: &Option<TimeValue>) -> chrono::NaiveDate {
    t.expect("bound checked by mode").start
}

fn end_of(t: &Option<TimeValue>) -> chrono::NaiveDate {
    t.expect("bound checked by mode").end
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::generator::{generate_query, GeneratorConfig};
    use crate::kg::{build_graph, Provenance, SchemaConfig, Triple};
    use crate::query::{QueryGraph, Variable};
    use crate::sparql;
    use crate::vocab::*;

    const GRAND_PRIX: &str = fixture::GRAND_PRIX_QUERY;
    const LEAGUE: &str = fixture::LEAGUE_QUERY;

    fn both(kg: &KnowledgeGraph, q: &SemanticQuery) -> AnswerSet {
        let a = evaluate(kg, q).unwrap();
        assert_eq!(a, brute_force_oracle(kg, q).unwrap());
        a
    }

    #[test]
    fn grand_prix_count_is_one() {
        let kg = fixture::grand_prix_graph();
        let q = sparql::parse(GRAND_PRIX, GraphModel::Direct).unwrap();
        assert_eq!(both(&kg, &q), AnswerSet::Count { value: 1 });
        // without the filter both 2000 and 2002 have Ferrari and Williams
        assert_eq!(both(&kg, &q.without_constraint()), AnswerSet::Count { value: 2 });
    }

    #[test]
    fn league_binds_the_1973_season() {
        let kg = fixture::league_graph();
        let q = sparql::parse(LEAGUE, GraphModel::Reified).unwrap();
        match both(&kg, &q) {
            AnswerSet::Bindings { variable, values } => {
                assert_eq!(variable, "event");
                assert_eq!(values.into_iter().collect::<Vec<_>>(), vec![Term::iri(fixture::LEAGUE_1973)]);
            }
            other => panic!("{other:?}"),
        }
    }

    fn ask(s: &str, p: &str, o: &str) -> SemanticQuery {
        let r = QueryRelation::new(QueryTerm::Node(s.into()), p, QueryTerm::Node(o.into()), Provenance::Direct);
        SemanticQuery::new(QueryGraph::new(vec![r], vec![], BTreeSet::new()).unwrap(), QueryType::Ask, None, GraphModel::Direct).unwrap()
    }

    #[test]
    fn ask_present_and_absent() {
        let kg = fixture::grand_prix_graph();
        let fdt = format!("{DBO}fastestDriverTeam");
        assert_eq!(both(&kg, &ask(fixture::GP2002, &fdt, fixture::FERRARI)), AnswerSet::Boolean { value: true });
        assert_eq!(both(&kg, &ask(fixture::GP2001, &fdt, fixture::WILLIAMS)), AnswerSet::Boolean { value: false });
        assert_eq!(both(&kg, &ask("http://x/unknown", &fdt, fixture::FERRARI)), AnswerSet::Boolean { value: false });
    }

    #[test]
    fn empty_graph_selects_nothing() {
        let kg = build_graph(Vec::<Triple>::new(), &SchemaConfig::dbpedia()).unwrap();
        let r = QueryRelation::new(QueryTerm::Var("entity".into()), "http://x/p", QueryTerm::Node("http://x/o".into()), Provenance::Direct);
        let g = QueryGraph::new(vec![r], vec![Variable::new("entity", VarKind::Entity)], BTreeSet::new()).unwrap();
        let q = SemanticQuery::new(g, QueryType::Select, None, GraphModel::Direct).unwrap();
        assert!(both(&kg, &q).is_empty());
    }

    #[test]
    fn non_temporal_bound_is_a_type_mismatch() {
        let kg = fixture::grand_prix_graph();
        let mut c = sparql::parse(GRAND_PRIX, GraphModel::Direct).unwrap().constraint().unwrap().clone();
        c.start = Some(Literal::plain("Ferrari"));
        let q = sparql::parse(GRAND_PRIX, GraphModel::Direct).unwrap();
        let q = SemanticQuery::new(q.graph().clone(), q.qtype(), Some(c), GraphModel::Direct).unwrap();
        assert!(matches!(evaluate(&kg, &q), Err(EvalError::TypeMismatch(_))));
        assert!(matches!(brute_force_oracle(&kg, &q), Err(EvalError::TypeMismatch(_))));
    }

    #[test]
    fn within_on_relation_validity_admits_the_original() {
        let kg = fixture::league_graph();
        let text = "SELECT DISTINCT ?event WHERE {
  ?relation1 rdf:object ?entity1 .
  ?relation1 rdf:subject ?event .
  ?relation1 sem:roleType dbo:soccerLeagueWinner .

  ?entity1 owl:sameAs dbr:Peñarol .

  ?relation1 sem:hasBeginTimeStamp ?time .
  FILTER ( ?time >= \"1973-01-01\"^^xsd:date && ?time <= \"1973-12-31\"^^xsd:date)
}
";
        let q = sparql::parse(text, GraphModel::Reified).unwrap();
        match both(&kg, &q) {
            AnswerSet::Bindings { values, .. } => assert!(values.contains(&Term::iri(fixture::LEAGUE_1973))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn agrees_with_oracle_on_generated_queries() {
        for model in [GraphModel::Direct, GraphModel::Reified] {
            let kg = fixture::toy_with(11, 12).graph(model);
            for i in 0..60 {
                let q = generate_query(&kg, &GeneratorConfig::with_seed(5), i).unwrap();
                let a = evaluate(&kg, &q).unwrap();
                assert_eq!(a, brute_force_oracle(&kg, &q).unwrap(), "{}", sparql::emit(&q).unwrap().text);
                assert!(!evaluate(&kg, &q.without_constraint()).unwrap().is_empty());
            }
        }
    }
}
