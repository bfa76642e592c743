//! Dataset complexity and diversity.
//!
//! Query similarity is a Jaccard coefficient over element sets and is kept
//! exact. Verbalization similarity is a cosine over term-frequency vectors
//! and is computed in `f64`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{KnowledgeGraph, NodeId};
use crate::query::{QueryTerm, SemanticQuery, VarKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("the dataset is empty")]
    EmptySet,
    #[error("diversity needs at least two items")]
    SingletonSet,
    #[error("no verbalizations in language {0}")]
    MissingLanguage(String),
    #[error("{language} has {found} verbalizations for {expected} queries")]
    Misaligned { language: String, found: usize, expected: usize },
}

/// Queries with their verbalizations, one list per language, aligned by
/// index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuerySet {
    pub queries: Vec<SemanticQuery>,
    pub verbalizations: BTreeMap<String, Vec<String>>,
}

impl QuerySet {
    pub fn new(queries: Vec<SemanticQuery>, verbalizations: BTreeMap<String, Vec<String>>) -> Result<Self, MetricsError> {
        for (language, texts) in &verbalizations {
            if !queries.is_empty() && texts.len() != queries.len() {
                return Err(MetricsError::Misaligned {
                    language: language.clone(),
                    found: texts.len(),
                    expected: queries.len(),
                });
            }
        }
        Ok(QuerySet { queries, verbalizations })
    }
}

fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Mean number of relations per query.
pub fn complexity(queries: &[SemanticQuery]) -> Result<BigRational, MetricsError> {
    if queries.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let total: usize = queries.iter().map(SemanticQuery::relation_count).sum();
    Ok(ratio(total, queries.len()))
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> BigRational {
    let union = a.union(b).count();
    if union == 0 {
        return BigRational::zero();
    }
    ratio(a.intersection(b).count(), union)
}

pub fn query_similarity(a: &SemanticQuery, b: &SemanticQuery) -> BigRational {
    jaccard(&a.element_set(), &b.element_set())
}

fn pairs(n: usize) -> BigInt {
    BigInt::from(n) * BigInt::from(n - 1) / BigInt::from(2)
}

/// One minus the mean Jaccard similarity over unordered pairs.
pub fn query_diversity(queries: &[SemanticQuery]) -> Result<BigRational, MetricsError> {
    match queries.len() {
        0 => return Err(MetricsError::EmptySet),
        1 => return Err(MetricsError::SingletonSet),
        _ => {}
    }
    let sets: Vec<BTreeSet<String>> = queries.iter().map(SemanticQuery::element_set).collect();
    let rows: Vec<BigRational> = (0..sets.len())
        .into_par_iter()
        .map(|i| {
            // integer numerators per denominator keep the row sum cheap
            let mut by_union: BTreeMap<usize, usize> = BTreeMap::new();
            for j in i + 1..sets.len() {
                let union = sets[i].union(&sets[j]).count();
                if union > 0 {
                    *by_union.entry(union).or_default() += sets[i].intersection(&sets[j]).count();
                }
            }
            by_union.into_iter().map(|(d, n)| ratio(n, d)).fold(BigRational::zero(), |a, b| a + b)
        })
        .collect();
    let sum = rows.into_iter().fold(BigRational::zero(), |a, b| a + b);
    Ok(BigRational::from_integer(1.into()) - sum / BigRational::from_integer(pairs(sets.len())))
}

pub type TermVector = BTreeMap<String, u32>;

/// Lowercases and splits on anything that is not a letter or digit.
pub fn tokenize(text: &str) -> TermVector {
    let mut v = TermVector::new();
    for token in text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        *v.entry(token.to_string()).or_default() += 1;
    }
    v
}

pub fn verbalization_similarity(a: &TermVector, b: &TermVector) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let dot: u64 = a.iter().filter_map(|(t, x)| b.get(t).map(|y| *x as u64 * *y as u64)).sum();
    let na: u64 = a.values().map(|x| (*x as u64).pow(2)).sum();
    let nb: u64 = b.values().map(|x| (*x as u64).pow(2)).sum();
    dot as f64 / ((na as f64) * (nb as f64)).sqrt()
}

/// One minus the mean pairwise cosine similarity of the texts.
pub fn text_diversity(texts: &[String]) -> Result<f64, MetricsError> {
    match texts.len() {
        0 => return Err(MetricsError::EmptySet),
        1 => return Err(MetricsError::SingletonSet),
        _ => {}
    }
    let vectors: Vec<TermVector> = texts.iter().map(|t| tokenize(t)).collect();
    let rows: Vec<f64> = (0..vectors.len())
        .into_par_iter()
        .map(|i| (i + 1..vectors.len()).map(|j| verbalization_similarity(&vectors[i], &vectors[j])).sum())
        .collect();
    let n = vectors.len() as f64;
    Ok(1.0 - rows.iter().sum::<f64>() / (n * (n - 1.0) / 2.0))
}

pub fn verbalization_diversity(set: &QuerySet, language: &str) -> Result<f64, MetricsError> {
    let texts = set.verbalizations.get(language).filter(|t| !t.is_empty());
    text_diversity(texts.ok_or_else(|| MetricsError::MissingLanguage(language.to_string()))?)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub events: BTreeSet<String>,
    pub entities: BTreeSet<String>,
    pub predicates: BTreeSet<String>,
    /// Predicates by number of patterns using them, most frequent first.
    pub ranking: Vec<(String, usize)>,
}

impl DatasetStats {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.events.len(), self.entities.len(), self.predicates.len())
    }
}

/// Distinct events, entities and predicates over concrete elements and
/// recorded variable bindings. With a graph at hand, nodes are classified
/// by it (following identity links for external identifiers); otherwise a
/// node is an event only when an event variable was bound to it.
pub fn dataset_stats(queries: &[SemanticQuery], kg: Option<&KnowledgeGraph>) -> DatasetStats {
    let mut stats = DatasetStats::default();
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    let is_event = |iri: &str, hint: bool| match kg {
        Some(kg) => {
            kg.is_event(&NodeId::new(iri)) || kg.nodes_same_as(iri).iter().any(|&i| kg.is_event(kg.node_at(i)))
        }
        None => hint,
    };
    for q in queries {
        let mut nodes: Vec<(String, bool)> = Vec::new();
        for r in q.graph().relations() {
            *freq.entry(r.predicate.clone()).or_default() += 1;
            stats.predicates.insert(r.predicate.clone());
            for t in r.terms() {
                if let QueryTerm::Node(n) = t {
                    nodes.push((n.clone(), false));
                }
            }
        }
        for v in q.graph().variables() {
            if let Some(iri) = v.bound_to.as_ref().and_then(|b| b.as_iri()) {
                nodes.push((iri.to_string(), v.kind == VarKind::Event));
            }
        }
        for (n, hint) in nodes {
            if is_event(&n, hint) {
                stats.events.insert(n);
            } else {
                stats.entities.insert(n);
            }
        }
    }
    stats.ranking = freq.into_iter().collect();
    stats.ranking.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::generator::{generate_dataset, GeneratorConfig};
    use crate::kg::{GraphModel, Provenance, Term};
    use crate::query::{QueryGraph, QueryRelation, QueryType, Variable};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// An ASK query whose element set is exactly {s, p, o}.
    fn q3(s: &str, p: &str, o: &str) -> SemanticQuery {
        let rel = QueryRelation::new(QueryTerm::Node(s.into()), p, QueryTerm::Node(o.into()), Provenance::Direct);
        SemanticQuery::new(QueryGraph::new(vec![rel], vec![], BTreeSet::new()).unwrap(), QueryType::Ask, None, GraphModel::Direct).unwrap()
    }

    #[test]
    fn worked_jaccard() {
        assert_eq!(jaccard(&set(&["a", "b", "c", "p", "q"]), &set(&["a", "b", "d", "p", "r"])), r(3, 7));
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), r(0, 1));
        assert_eq!(jaccard(&BTreeSet::<String>::new(), &BTreeSet::new()), r(0, 1));
    }

    #[test]
    fn worked_diversity() {
        // pairwise similarities 3/7, 0, 0
        let a = {
            let rels = vec![
                QueryRelation::new(QueryTerm::Node("a".into()), "p", QueryTerm::Node("b".into()), Provenance::Direct),
                QueryRelation::new(QueryTerm::Node("b".into()), "q", QueryTerm::Node("c".into()), Provenance::Direct),
            ];
            SemanticQuery::new(QueryGraph::new(rels, vec![], BTreeSet::new()).unwrap(), QueryType::Ask, None, GraphModel::Direct).unwrap()
        };
        let b = {
            let rels = vec![
                QueryRelation::new(QueryTerm::Node("a".into()), "p", QueryTerm::Node("b".into()), Provenance::Direct),
                QueryRelation::new(QueryTerm::Node("b".into()), "r", QueryTerm::Node("d".into()), Provenance::Direct),
            ];
            SemanticQuery::new(QueryGraph::new(rels, vec![], BTreeSet::new()).unwrap(), QueryType::Ask, None, GraphModel::Direct).unwrap()
        };
        let c = q3("x", "y", "z");
        assert_eq!(query_similarity(&a, &b), r(3, 7));
        assert_eq!(query_diversity(&[a.clone(), b, c]).unwrap(), r(6, 7));
        assert_eq!(query_diversity(&[a.clone(), a.clone()]).unwrap(), r(0, 1));
        assert_eq!(query_diversity(std::slice::from_ref(&a)), Err(MetricsError::SingletonSet));
        assert_eq!(query_diversity(&[]), Err(MetricsError::EmptySet));
    }

    #[test]
    fn worked_cosine() {
        let a = tokenize("when did the war start");
        let b = tokenize("when did the battle end");
        assert_eq!(verbalization_similarity(&a, &b), 0.6);
        let texts = vec!["when did the war start".to_string(), "when did the battle end".to_string()];
        assert_eq!(text_diversity(&texts).unwrap(), 0.4);
        assert_eq!(verbalization_similarity(&a, &a), 1.0);
        assert_eq!(verbalization_similarity(&a, &tokenize("")), 0.0);
    }

    #[test]
    fn tokenizer() {
        let t = tokenize("When did the war start?");
        assert_eq!(t.keys().collect::<Vec<_>>(), ["did", "start", "the", "war", "when"]);
        assert!(t.values().all(|c| *c == 1));
        assert_eq!(tokenize("Peñarol").into_iter().collect::<Vec<_>>(), vec![("peñarol".to_string(), 1)]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Über über")["über"], 2);
    }

    #[test]
    fn complexity_values() {
        assert_eq!(complexity(&[q3("a", "p", "b")]).unwrap(), r(1, 1));
        assert_eq!(complexity(&[]), Err(MetricsError::EmptySet));
        let kg = fixture::toy().graph(GraphModel::Reified);
        let qs = generate_dataset(&kg, 50, &GeneratorConfig::with_seed(9), None).unwrap();
        assert_eq!(complexity(&qs).unwrap(), r(2, 1));
    }

    #[test]
    fn missing_language_and_alignment() {
        let set = QuerySet::new(vec![q3("a", "p", "b")], BTreeMap::new()).unwrap();
        assert_eq!(verbalization_diversity(&set, "en"), Err(MetricsError::MissingLanguage("en".into())));
        let bad = QuerySet::new(vec![q3("a", "p", "b")], BTreeMap::from([("en".to_string(), vec![])]));
        assert!(matches!(bad, Err(MetricsError::Misaligned { .. })));
    }

    #[test]
    fn stats_by_hand() {
        let gp = fixture::grand_prix_graph();
        let fdt = "http://dbpedia.org/ontology/fastestDriverTeam";
        let second = "http://dbpedia.org/ontology/secondTeam";
        let loc = "http://dbpedia.org/ontology/location";
        let sel = {
            let rels = vec![
                QueryRelation::new(QueryTerm::Var("event".into()), fdt, QueryTerm::Node(fixture::FERRARI.into()), Provenance::Direct),
                QueryRelation::new(QueryTerm::Var("event".into()), second, QueryTerm::Node(fixture::WILLIAMS.into()), Provenance::Direct),
            ];
            let mut v = Variable::new("event", VarKind::Event);
            v.bound_to = Some(Term::iri(fixture::GP2002));
            QueryGraph::new(rels, vec![v], BTreeSet::new()).unwrap()
        };
        let q1 = SemanticQuery::new(sel, QueryType::Select, None, GraphModel::Direct).unwrap();
        let qs = vec![
            q1,
            q3(fixture::GP2002, fdt, fixture::FERRARI),
            q3(fixture::GP2001, fdt, fixture::FERRARI),
            q3(fixture::GP2001, second, fixture::MCLAREN),
            q3(fixture::FERRARI, loc, "http://dbpedia.org/resource/Maranello"),
        ];
        let s = dataset_stats(&qs, Some(&gp));
        // events: GP2002, GP2001; entities: Ferrari, Williams, McLaren, Maranello
        assert_eq!(s.counts(), (2, 4, 3));
        assert_eq!(s.ranking[0], (fdt.to_string(), 3));
        assert_eq!(s.ranking[1], (second.to_string(), 2));
        let two = vec![q3(fixture::GP2002, fdt, fixture::FERRARI), q3(fixture::GP2002, second, fixture::WILLIAMS)];
        assert_eq!(dataset_stats(&two, Some(&gp)).events.len(), 1);
    }

    fn brute_query_diversity(sets: &[BTreeSet<u8>]) -> f64 {
        let mut sum = 0.0;
        let mut n = 0.0;
        for i in 0..sets.len() {
            for j in 0..sets.len() {
                if i < j {
                    let inter = sets[i].iter().filter(|x| sets[j].contains(x)).count() as f64;
                    let mut all = sets[i].clone();
                    all.extend(sets[j].iter().copied());
                    sum += if all.is_empty() { 0.0 } else { inter / all.len() as f64 };
                    n += 1.0;
                }
            }
        }
        1.0 - sum / n
    }

    fn brute_text_diversity(texts: &[Vec<u8>]) -> f64 {
        let vec_of = |t: &Vec<u8>| {
            let mut m = BTreeMap::new();
            for w in t {
                *m.entry(*w).or_insert(0.0) += 1.0;
            }
            m
        };
        let mut sum = 0.0;
        let mut n = 0.0;
        for i in 0..texts.len() {
            for j in i + 1..texts.len() {
                let (a, b) = (vec_of(&texts[i]), vec_of(&texts[j]));
                let dot: f64 = a.iter().map(|(k, x)| x * b.get(k).unwrap_or(&0.0)).sum();
                let na: f64 = a.values().map(|x: &f64| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.values().map(|x: &f64| x * x).sum::<f64>().sqrt();
                sum += if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) };
                n += 1.0;
            }
        }
        1.0 - sum / n
    }

    fn as_query(set: &BTreeSet<u8>) -> SemanticQuery {
        // element set {s, p, o} padded with literal objects of a star
        let mut items: Vec<String> = set.iter().map(|x| format!("e{x}")).collect();
        if items.is_empty() {
            items.push("empty".into());
        }
        let hub = items[0].clone();
        let rels: Vec<QueryRelation> = if items.len() == 1 {
            vec![QueryRelation::new(QueryTerm::Node(hub.clone()), hub.clone(), QueryTerm::Node(hub.clone()), Provenance::Direct)]
        } else {
            items[1..]
                .iter()
                .map(|x| QueryRelation::new(QueryTerm::Node(hub.clone()), hub.clone(), QueryTerm::Node(x.clone()), Provenance::Direct))
                .collect()
        };
        SemanticQuery::new(QueryGraph::new(rels, vec![], BTreeSet::new()).unwrap(), QueryType::Ask, None, GraphModel::Direct).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn query_diversity_matches_pairwise_oracle(sets in prop::collection::vec(prop::collection::btree_set(0u8..30, 1..8), 2..60)) {
            let qs: Vec<SemanticQuery> = sets.iter().map(as_query).collect();
            let got = to_f64(&query_diversity(&qs).unwrap());
            prop_assert!((got - brute_query_diversity(&sets)).abs() < 1e-9);
        }

        #[test]
        fn text_diversity_matches_pairwise_oracle(texts in prop::collection::vec(prop::collection::vec(0u8..20, 0..10), 2..60)) {
            let strings: Vec<String> = texts.iter().map(|t| t.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" ")).collect();
            let got = text_diversity(&strings).unwrap();
            prop_assert!((got - brute_text_diversity(&texts)).abs() < 1e-9);
        }

        #[test]
        fn similarity_is_symmetric_reflexive_bounded(a in prop::collection::btree_set(0u8..20, 1..8), b in prop::collection::btree_set(0u8..20, 1..8)) {
            let (qa, qb) = (as_query(&a), as_query(&b));
            let s = query_similarity(&qa, &qb);
            prop_assert_eq!(s.clone(), query_similarity(&qb, &qa));
            prop_assert!(s >= r(0, 1) && s <= r(1, 1));
            prop_assert_eq!(query_similarity(&qa, &qa), r(1, 1));
            let ta = tokenize(&format!("{a:?}"));
            let tb = tokenize(&format!("{b:?}"));
            let c = verbalization_similarity(&ta, &tb);
            prop_assert!((c - verbalization_similarity(&tb, &ta)).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        }

        #[test]
        fn order_does_not_matter(sets in prop::collection::vec(prop::collection::btree_set(0u8..30, 1..6), 2..30), rot in 0usize..30) {
            let qs: Vec<SemanticQuery> = sets.iter().map(as_query).collect();
            let mut shifted = qs.clone();
            shifted.rotate_left(rot % qs.len());
            prop_assert_eq!(query_diversity(&qs).unwrap(), query_diversity(&shifted).unwrap());
        }
    }
}
