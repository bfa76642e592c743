use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use eventqa_core::dataset_io::{self, DatasetEntry, QaldDocument, VoidSummary};
use eventqa_core::evaluator::{evaluate, AnswerSet};
use eventqa_core::fixture;
use eventqa_core::generator::{generate_dataset, GeneratorConfig, GeneratorError};
use eventqa_core::kg::ntriples::{self, ParseMode};
use eventqa_core::kg::{build_graph, GraphModel, KnowledgeGraph, SchemaConfig};
use eventqa_core::metrics;
use eventqa_core::query::SemanticQuery;
use eventqa_core::sparql;
use eventqa_core::translator::{translate_dataset, MappingTable, TemporalCandidates};
use eventqa_service::AnnotationStore;
use rayon::prelude::*;
use serde_json::json;

use crate::{CliError, Command, GraphArgs, SEED_ENV};

type Result<T> = std::result::Result<T, CliError>;

fn data(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub(crate) fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::IngestCheck { graph } => ingest_check(&graph),
        Command::Generate { graph, n, seed, max_relations, temporal_probability, type_weights, dataset_id, out, jobs } => {
            let mut config = GeneratorConfig::with_seed(seed_override(seed)?);
            config.max_relations = max_relations;
            config.temporal_constraint_probability = temporal_probability;
            if let Some(w) = type_weights {
                config.type_weights = w
                    .try_into()
                    .map_err(|w: Vec<f64>| CliError::Usage(format!("--type-weights needs 3 values, got {}", w.len())))?;
            }
            check_jobs(jobs)?;
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let kg = load_graph(&graph)?;
            generate(&kg, n as usize, &config, &dataset_id, out.as_deref(), jobs)
        }
        Command::Execute { graph, dataset, write_answers, out, jobs } => {
            check_jobs(jobs)?;
            let kg = load_graph(&graph)?;
            execute(&kg, &dataset, write_answers.then(|| out.unwrap_or_else(|| dataset.clone())), jobs)
        }
        Command::Translate { dataset, mappings, link_predicate, temporal, target_kg, target_schema, report, out } => {
            let mut table = MappingTable::from_ntriples(&mappings, &link_predicate).map_err(|e| data(&mappings, e))?;
            if let Some(path) = temporal {
                let text = fs::read_to_string(&path).map_err(|e| data(&path, e))?;
                table = table.with_temporal(TemporalCandidates::from_toml_str(&text).map_err(|e| data(&path, e))?);
            }
            let target = if target_kg.is_empty() {
                None
            } else {
                let args = GraphArgs { kg: target_kg, fixture: false, schema: Some(target_schema), model: None, lenient: false };
                Some(load_graph(&args)?)
            };
            translate(&dataset, &table, target.as_ref(), report.as_deref(), out.as_deref().unwrap_or(&dataset))
        }
        Command::Metrics { dataset, langs, json } => metrics_report(&dataset, &langs, json),
        Command::Stats { dataset, graph, top, json } => {
            let kg = graph.given().map(|g| load_graph(&g)).transpose()?;
            stats(&dataset, kg.as_ref(), top, json)
        }
        Command::Export { dataset, graph, void, lists } => {
            if !void && lists.is_none() {
                return Err(CliError::Usage("export needs --void, --lists or both".into()));
            }
            let kg = graph.given().map(|g| load_graph(&g)).transpose()?;
            export(&dataset, kg.as_ref(), void, lists.as_deref())
        }
        Command::Serve { dataset, store, port, host, static_dir, langs } => serve(&dataset, &store, (host, port).into(), static_dir, &langs),
        Command::WriteFixture { out } => {
            let paths = fixture::toy().write(&out).map_err(|e| data(&out, e))?;
            for p in [paths.reified, paths.direct, paths.same_as] {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn seed_override(seed: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(seed),
    }
}

fn check_jobs(jobs: Option<usize>) -> Result<()> {
    match jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        _ => Ok(()),
    }
}

/// Resolves schema and model flags, then reads the graph.
pub fn load_graph(args: &GraphArgs) -> Result<KnowledgeGraph> {
    let model = args.model.map(GraphModel::from);
    let schema = match &args.schema {
        Some(name) => SchemaConfig::load(name).map_err(|e| CliError::Usage(format!("--schema {name}: {e}")))?,
        None => fixture::schema_for(model.unwrap_or(GraphModel::Reified)),
    };
    let model = model.unwrap_or(if schema.is_reified() { GraphModel::Reified } else { GraphModel::Direct });
    if schema.is_reified() != (model == GraphModel::Reified) {
        return Err(CliError::Usage(format!("the schema does not describe a {model:?} graph").to_lowercase()));
    }
    let triples = if args.fixture {
        fixture::toy().triples(model).to_vec()
    } else {
        if args.kg.is_empty() {
            return Err(CliError::Usage("one of --kg or --fixture is required".into()));
        }
        let mode = if args.lenient { ParseMode::Lenient } else { ParseMode::Strict };
        let mut all = Vec::new();
        for path in &args.kg {
            let reader = ntriples::open(path).map_err(|e| data(path, e))?;
            let mut it = ntriples::NTriplesReader::new(reader, mode);
            for t in it.by_ref() {
                all.push(t.map_err(|e| data(path, e))?);
            }
            if it.skipped() > 0 {
                tracing::warn!(file = %path.display(), skipped = it.skipped(), "malformed lines skipped");
            }
        }
        all
    };
    let kg = build_graph(triples, &schema).map_err(|e| CliError::Data(e.to_string()))?;
    tracing::info!(triples = kg.triple_count(), events = kg.events().len(), relations = kg.relations().len(), "graph loaded");
    Ok(kg)
}

fn ingest_check(args: &GraphArgs) -> Result<()> {
    let kg = load_graph(args)?;
    println!("model\t{}", format!("{:?}", kg.model()).to_lowercase());
    println!("triples\t{}", kg.triple_count());
    println!("ignored\t{}", kg.ignored_triples());
    println!("nodes\t{}", kg.node_count());
    println!("events\t{}", kg.events().len());
    println!("entities\t{}", kg.entities().len());
    println!("relations\t{}", kg.relations().len());
    println!("digest\t{}", kg.digest());
    Ok(())
}

fn generate(
    kg: &KnowledgeGraph,
    n: usize,
    config: &GeneratorConfig,
    dataset_id: &str,
    out: Option<&Path>,
    jobs: Option<usize>,
) -> Result<()> {
    let queries = generate_dataset(kg, n, config, jobs).map_err(|e| match e {
        GeneratorError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    })?;
    let entries = queries
        .iter()
        .enumerate()
        .map(|(i, q)| DatasetEntry::from_query((i + 1).to_string(), q))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_dataset(&entries, dataset_id, out)?;
    tracing::info!(queries = entries.len(), "dataset written");
    Ok(())
}

fn write_dataset(entries: &[DatasetEntry], dataset_id: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => dataset_io::write_qald(entries, dataset_id, path).map_err(|e| data(path, e)),
        None => {
            let text = dataset_io::qald_string(entries, dataset_id).map_err(|e| CliError::Data(e.to_string()))?;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn read_dataset(path: &Path) -> Result<QaldDocument> {
    dataset_io::read_qald(path).map_err(|e| data(path, e))
}

/// The query of an entry written for `model`.
fn query_for(path: &Path, e: &DatasetEntry, model: GraphModel) -> Result<SemanticQuery> {
    let parsed = if e.sparql_eventkg.model == model {
        Some(e.query())
    } else {
        e.dbpedia_query().filter(|_| model == GraphModel::Direct)
    };
    match parsed {
        Some(q) => q.map_err(|err| data(path, format!("question {}: {err}", e.id))),
        None => Err(data(path, format!("question {} has no query for a {model:?} graph", e.id))),
    }
}

fn summarize(a: &AnswerSet) -> String {
    match a {
        AnswerSet::Boolean { value } => value.to_string(),
        AnswerSet::Count { value } => format!("count {value}"),
        AnswerSet::Bindings { values, .. } => format!("{} bindings", values.len()),
    }
}

fn execute(kg: &KnowledgeGraph, path: &Path, write_to: Option<PathBuf>, jobs: Option<usize>) -> Result<()> {
    let mut doc = read_dataset(path)?;
    let queries = doc.entries.iter().map(|e| query_for(path, e, kg.model())).collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Data(e.to_string()))?;
    let answers: Vec<_> = pool.install(|| queries.par_iter().map(|q| evaluate(kg, q)).collect());
    let mut empty = 0;
    for (e, a) in doc.entries.iter_mut().zip(answers) {
        let a = a.map_err(|err| data(path, format!("question {}: {err}", e.id)))?;
        if a.is_empty() {
            empty += 1;
        }
        if write_to.is_none() {
            println!("{}\t{}", e.id, summarize(&a));
        }
        e.answers = Some(a);
    }
    tracing::info!(questions = doc.entries.len(), empty, "executed");
    if let Some(out) = write_to {
        write_dataset(&doc.entries, &doc.dataset_id, Some(&out))?;
    }
    Ok(())
}

fn translate(
    path: &Path,
    table: &MappingTable,
    target: Option<&KnowledgeGraph>,
    report_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut doc = read_dataset(path)?;
    let queries = doc
        .entries
        .iter()
        .map(|e| e.query().map(|q| (e.id.clone(), q)).map_err(|err| data(path, format!("question {}: {err}", e.id))))
        .collect::<Result<Vec<_>>>()?;
    let (translated, report) = translate_dataset(&queries, table, target);
    let mut by_id: BTreeMap<String, SemanticQuery> = translated.into_iter().collect();
    for e in &mut doc.entries {
        e.sparql_dbpedia = match by_id.remove(&e.id) {
            Some(q) => Some(sparql::emit(&q).map_err(|err| CliError::Data(format!("question {}: {err}", e.id)))?),
            None => None,
        };
    }
    write_dataset(&doc.entries, &doc.dataset_id, Some(out))?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
    match report_path {
        Some(p) => {
            fs::write(p, text + "\n").map_err(|e| data(p, e))?;
            println!("translated {} of {} ({} failed)", report.translated, report.total, report.failures.len());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_all(path: &Path, doc: &QaldDocument) -> Result<Vec<SemanticQuery>> {
    doc.entries
        .iter()
        .map(|e| e.query().map_err(|err| data(path, format!("question {}: {err}", e.id))))
        .collect()
}

fn metrics_report(path: &Path, langs: &[String], as_json: bool) -> Result<()> {
    let doc = read_dataset(path)?;
    let queries = parse_all(path, &doc)?;
    let complexity = metrics::complexity(&queries).ok();
    let diversity = metrics::query_diversity(&queries).ok();
    let mut verbal: Vec<(String, Option<f64>)> = Vec::new();
    for lang in langs {
        let texts: Vec<String> = doc.entries.iter().filter_map(|e| e.verbalizations.get(lang).cloned()).collect();
        verbal.push((lang.clone(), metrics::text_diversity(&texts).ok()));
    }
    if as_json {
        let value = json!({
            "questions": queries.len(),
            "complexity": complexity.as_ref().map(metrics::to_f64),
            "complexity_exact": complexity.as_ref().map(|r| r.to_string()),
            "query_diversity": diversity.as_ref().map(metrics::to_f64),
            "query_diversity_exact": diversity.as_ref().map(|r| r.to_string()),
            "verbalization_diversity": verbal.iter().cloned().collect::<BTreeMap<_, _>>(),
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("plain JSON value"));
        return Ok(());
    }
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!("{:<28}value", "metric");
    println!("{:<28}{}", "questions", queries.len());
    println!("{:<28}{}", "complexity", cell(complexity.as_ref().map(metrics::to_f64)));
    println!("{:<28}{}", "query_diversity", cell(diversity.as_ref().map(metrics::to_f64)));
    for (lang, v) in verbal {
        println!("{:<28}{}", format!("verbalization_diversity.{lang}"), cell(v));
    }
    Ok(())
}

fn stats(path: &Path, kg: Option<&KnowledgeGraph>, top: usize, as_json: bool) -> Result<()> {
    let doc = read_dataset(path)?;
    let queries = parse_all(path, &doc)?;
    let s = metrics::dataset_stats(&queries, kg);
    let (events, entities, predicates) = s.counts();
    if as_json {
        let value = json!({
            "events": events,
            "entities": entities,
            "predicates": predicates,
            "top_predicates": s.ranking.iter().take(top).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("plain JSON value"));
        return Ok(());
    }
    println!("events\t{events}");
    println!("entities\t{entities}");
    println!("predicates\t{predicates}");
    for (p, n) in s.ranking.iter().take(top) {
        println!("{n}\t{p}");
    }
    Ok(())
}

fn export(path: &Path, kg: Option<&KnowledgeGraph>, void: bool, lists: Option<&Path>) -> Result<()> {
    let doc = read_dataset(path)?;
    let queries = parse_all(path, &doc)?;
    let s = metrics::dataset_stats(&queries, kg);
    if let Some(dir) = lists {
        dataset_io::ExportLists::from_stats(&s).write(dir).map_err(|e| data(dir, e))?;
    }
    if void {
        let mut summary = VoidSummary::new(doc.entries.len(), &s, kg);
        summary.title = doc.dataset_id.clone();
        let text = dataset_io::emit_void(&summary);
        match lists {
            Some(dir) => {
                let p = dir.join("void.ttl");
                fs::write(&p, text).map_err(|e| data(&p, e))?;
            }
            None => print!("{text}"),
        }
    }
    Ok(())
}

fn serve(dataset: &Path, log: &Path, addr: std::net::SocketAddr, static_dir: Option<PathBuf>, langs: &[String]) -> Result<()> {
    let doc = read_dataset(dataset)?;
    let langs: Vec<&str> = langs.iter().map(String::as_str).collect();
    let store = AnnotationStore::open(&doc.dataset_id, doc.entries, &langs, log).map_err(|e| data(log, e))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(async move {
        let listener = eventqa_service::bind(addr).await.map_err(|e| CliError::Data(format!("{addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Data(e.to_string()))?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        eventqa_service::serve(listener, Arc::new(RwLock::new(store)), static_dir, shutdown)
            .await
            .map_err(|e| CliError::Data(e.to_string()))
    })
}
