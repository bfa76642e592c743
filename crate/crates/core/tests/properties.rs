//! Property tests over generated queries on small synthetic graphs.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use eventqa_core::dataset_io::{qald_string, read_qald_str, DatasetEntry};
use eventqa_core::evaluator::{brute_force_oracle, evaluate, AnswerSet};
use eventqa_core::fixture;
use eventqa_core::generator::{generate_query, temporal_anchor_candidates, GeneratorConfig};
use eventqa_core::kg::{build_graph, GraphModel, KnowledgeGraph, Literal, NodeId, Provenance, Term};
use eventqa_core::metrics::{complexity, query_diversity};
use eventqa_core::query::{
    QueryGraph, QueryRelation, QueryTerm, QueryType, SemanticQuery, TemporalAnchor, TemporalConstraint, TemporalMode,
    VarKind, Variable,
};
use eventqa_core::sparql;
use eventqa_core::translator::{translate, MappingTable};
use eventqa_core::vocab;
use proptest::prelude::*;

struct Graphs {
    reified: KnowledgeGraph,
    direct: KnowledgeGraph,
    links: MappingTable,
}

fn graphs() -> &'static Graphs {
    static G: OnceLock<Graphs> = OnceLock::new();
    G.get_or_init(|| {
        let toy = fixture::toy_with(77, 120);
        let reified = toy.graph(GraphModel::Reified);
        let links = MappingTable::from_graph(&reified);
        Graphs { reified, direct: toy.graph(GraphModel::Direct), links }
    })
}

fn kg(model: GraphModel) -> &'static KnowledgeGraph {
    match model {
        GraphModel::Reified => &graphs().reified,
        GraphModel::Direct => &graphs().direct,
    }
}

fn model() -> impl Strategy<Value = GraphModel> {
    prop_oneof![Just(GraphModel::Reified), Just(GraphModel::Direct)]
}

fn query(model: GraphModel, seed: u64, index: u64) -> SemanticQuery {
    generate_query(kg(model), &GeneratorConfig::with_seed(seed), index).expect("toy graph yields queries")
}

fn rename(q: &SemanticQuery, to: &str) -> SemanticQuery {
    let g = q.graph();
    let swap = |t: &QueryTerm| match t {
        QueryTerm::Var(_) => QueryTerm::Var(to.to_string()),
        other => other.clone(),
    };
    let rels = g
        .relations()
        .iter()
        .map(|r| QueryRelation { subject: swap(&r.subject), object: swap(&r.object), ..r.clone() })
        .collect();
    let vars = g.variables().iter().map(|v| Variable { name: to.to_string(), ..v.clone() }).collect();
    let constraint = q.constraint().map(|c| TemporalConstraint {
        anchor: match &c.anchor {
            TemporalAnchor::Node(t) => TemporalAnchor::Node(swap(t)),
            other => other.clone(),
        },
        ..c.clone()
    });
    let graph = QueryGraph::new(rels, vars, g.bridged().clone()).unwrap();
    SemanticQuery::new(graph, q.qtype(), constraint, q.model()).unwrap()
}

fn subset(narrow: &AnswerSet, wide: &AnswerSet) -> bool {
    match (narrow, wide) {
        (AnswerSet::Boolean { value: a }, AnswerSet::Boolean { value: b }) => !a || *b,
        (AnswerSet::Count { value: a }, AnswerSet::Count { value: b }) => a <= b,
        (AnswerSet::Bindings { values: a, .. }, AnswerSet::Bindings { values: b, .. }) => a.is_subset(b),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_indexes_are_exact(seed in any::<u64>(), events in 6usize..30, model in model()) {
        let toy = fixture::toy_with(seed, events);
        let kg = toy.graph(model);
        for (i, (node, _)) in kg.nodes().enumerate() {
            let want: Vec<usize> = (0..kg.relations().len()).filter(|&r| kg.relation_at(r).touches(node)).collect();
            prop_assert_eq!(kg.adjacency_at(i), want.as_slice());
        }
        prop_assert_eq!(kg.events().len() + kg.entities().len(), kg.node_count());
        let again = build_graph(toy.triples(model).to_vec(), &fixture::schema_for(model)).unwrap();
        prop_assert_eq!(again.digest(), kg.digest());
        prop_assert_eq!(again.relations(), kg.relations());
        prop_assert_eq!(again.events(), kg.events());
    }

    #[test]
    fn generated_queries_keep_their_shape(seed in 0u64..1000, index in 0u64..2000, model in model()) {
        let q = query(model, seed, index);
        prop_assert_eq!(&q, &query(model, seed, index));
        let g = q.graph();
        prop_assert_eq!(q.relation_count(), GeneratorConfig::default().max_relations);
        match q.qtype() {
            QueryType::Ask => prop_assert!(g.variables().is_empty()),
            _ => {
                prop_assert_eq!(g.variables().len(), 1);
                prop_assert!(g.degree(&QueryTerm::Var(g.variables()[0].name.clone())) >= 2);
            }
        }
        // each relation stays anchored to a term shared with the other
        let [a, b] = [&g.relations()[0], &g.relations()[1]];
        prop_assert!(a.terms().iter().any(|t| b.terms().contains(t)));
        prop_assert!(g.has_event(kg(model)));
    }

    #[test]
    fn element_set_ignores_variable_names(seed in 0u64..1000, index in 0u64..2000, model in model(), name in "[a-z]{1,8}") {
        let q = query(model, seed, index);
        prop_assume!(!q.graph().variables().is_empty());
        prop_assume!(q.constraint().is_none_or(|c| c.variable != name));
        let r = rename(&q, &name);
        prop_assert_eq!(q.element_set(), r.element_set());
        let other = query(model, seed, index + 1);
        prop_assert_eq!(query_diversity(&[q.clone(), other.clone()]).unwrap(), query_diversity(&[r, other]).unwrap());
    }

    #[test]
    fn sparql_round_trip_and_closure(seed in 0u64..1000, index in 0u64..2000, model in model()) {
        let q = query(model, seed, index);
        let text = sparql::emit(&q).unwrap();
        prop_assert_eq!(&text, &sparql::emit(&q.clone()).unwrap());
        let back = sparql::parse(&text.text, model).unwrap();
        prop_assert_eq!(&back, &q.without_provenance());
        prop_assert_eq!(&sparql::emit(&back).unwrap(), &text);
        prop_assert_eq!(sparql::parse(&text.with_prologue(), model).unwrap(), back);
    }

    #[test]
    fn evaluator_agrees_with_oracle_and_witness(seed in 0u64..1000, index in 0u64..2000, model in model()) {
        let kg = kg(model);
        let q = query(model, seed, index);
        prop_assert_eq!(evaluate(kg, &q).unwrap(), brute_force_oracle(kg, &q).unwrap());
        prop_assert!(!evaluate(kg, &q.without_constraint()).unwrap().is_empty());
    }

    #[test]
    fn within_never_widens(seed in 0u64..1000, index in 0u64..2000, model in model(), from in 1900i64..2020, span in 0i64..60) {
        let kg = kg(model);
        let q = query(model, seed, index).without_constraint();
        let open = evaluate(kg, &q).unwrap();
        for c in temporal_anchor_candidates(kg, q.graph()) {
            let variable = if vocab::local_name(&c.predicate) == "year" { "year" } else { "time" };
            let within = TemporalConstraint {
                anchor: c.anchor.clone(),
                predicate: c.predicate.clone(),
                variable: variable.into(),
                mode: TemporalMode::Within,
                start: Some(Literal::integer(from)),
                end: Some(Literal::integer(from + span)),
            };
            let narrowed = SemanticQuery::new(q.graph().clone(), q.qtype(), Some(within), model).unwrap();
            let got = evaluate(kg, &narrowed).unwrap();
            prop_assert!(subset(&got, &open), "{:?} widened {:?}", got, open);
        }
    }

    #[test]
    fn ask_matches_its_select_relaxation(seed in 0u64..1000, index in 0u64..4000) {
        let kg = kg(GraphModel::Direct);
        let q = query(GraphModel::Direct, seed, index).without_constraint();
        prop_assume!(q.qtype() == QueryType::Ask);
        let g = q.graph();
        let shared = g.relations()[0]
            .terms()
            .into_iter()
            .find(|t| g.relations()[1].terms().contains(t) && matches!(t, QueryTerm::Node(_)))
            .cloned();
        let Some(QueryTerm::Node(iri)) = shared else { return Ok(()) };
        let kind = kg.node_kind(&NodeId::new(iri.as_str())).map(VarKind::for_node).unwrap_or(VarKind::Entity);
        let swap = |t: &QueryTerm| if t == &QueryTerm::Node(iri.clone()) { QueryTerm::Var("x".into()) } else { t.clone() };
        let rels = g.relations().iter().map(|r| QueryRelation { subject: swap(&r.subject), object: swap(&r.object), ..r.clone() }).collect();
        let graph = QueryGraph::new(rels, vec![Variable::new("x", kind)], BTreeSet::new()).unwrap();
        let select = SemanticQuery::new(graph, QueryType::Select, None, GraphModel::Direct).unwrap();
        let AnswerSet::Bindings { values, .. } = evaluate(kg, &select).unwrap() else { panic!("select answers with bindings") };
        let AnswerSet::Boolean { value } = evaluate(kg, &q).unwrap() else { panic!("ask answers with a boolean") };
        prop_assert_eq!(value, values.contains(&Term::iri(iri.as_str())));
        if value {
            prop_assert!(!values.is_empty());
        }
    }

    #[test]
    fn translations_are_direct(seed in 0u64..1000, index in 0u64..2000) {
        let q = query(GraphModel::Reified, seed, index);
        if let Ok(t) = translate(&q, &graphs().links, Some(kg(GraphModel::Direct))) {
            prop_assert_eq!(t.model(), GraphModel::Direct);
            prop_assert!(t.graph().bridged().is_empty());
            for r in t.graph().relations() {
                prop_assert_eq!(r.form, Provenance::Direct);
                prop_assert!(!r.predicate.starts_with(vocab::SEM));
            }
            prop_assert!(!matches!(t.constraint().map(|c| &c.anchor), Some(TemporalAnchor::Relation(_))));
            let text = sparql::emit(&t).unwrap().text;
            prop_assert!(!text.contains("sem:") && !text.contains("rdf:subject") && !text.contains("owl:sameAs"));
        }
    }

    #[test]
    fn metrics_ignore_order(seed in 0u64..1000, order in Just((0u64..12).collect::<Vec<_>>()).prop_shuffle()) {
        let qs: Vec<SemanticQuery> = (0..12).map(|i| query(GraphModel::Reified, seed, i)).collect();
        let shuffled: Vec<SemanticQuery> = order.iter().map(|&i| qs[i as usize].clone()).collect();
        prop_assert_eq!(query_diversity(&qs).unwrap(), query_diversity(&shuffled).unwrap());
        prop_assert_eq!(complexity(&qs).unwrap(), complexity(&shuffled).unwrap());
    }

    #[test]
    fn qald_output_is_stable(seed in 0u64..1000, n in 1u64..15, model in model()) {
        let entries: Vec<DatasetEntry> = (0..n)
            .map(|i| {
                let q = query(model, seed, i);
                let mut e = DatasetEntry::from_query(i.to_string(), &q).unwrap();
                e.answers = Some(evaluate(kg(model), &q).unwrap());
                e
            })
            .collect();
        let text = qald_string(&entries, "p").unwrap();
        prop_assert_eq!(&text, &qald_string(&entries.clone(), "p").unwrap());
        let doc = read_qald_str(&text).unwrap();
        prop_assert_eq!(&doc.entries, &entries);
        prop_assert_eq!(qald_string(&doc.entries, &doc.dataset_id).unwrap(), text);
    }
}
