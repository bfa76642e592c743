//! `eventqa` command line. Every command is a thin adapter over the library.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 data error.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use eventqa_core::kg::GraphModel;
use thiserror::Error;

pub use commands::load_graph;

/// Overrides `--seed` when set.
pub const SEED_ENV: &str = "EVENTQA_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "eventqa", version, about = "Generate, execute, translate and annotate event-centric query datasets")]
pub struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Reified,
    Direct,
}

impl From<ModelArg> for GraphModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Reified => GraphModel::Reified,
            ModelArg::Direct => GraphModel::Direct,
        }
    }
}

/// Where the knowledge graph comes from.
#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// N-Triples file, optionally gzipped. Repeat to merge several files.
    #[arg(long = "kg", value_name = "FILE", conflicts_with = "fixture")]
    pub kg: Vec<PathBuf>,
    /// Use the bundled synthetic graph instead of files.
    #[arg(long)]
    pub fixture: bool,
    /// `eventkg`, `dbpedia` or a TOML schema file. Defaults to the preset of `--model`.
    #[arg(long, value_name = "NAME|PATH")]
    pub schema: Option<String>,
    /// Graph model of the input. Defaults to the model of `--schema`, else reified.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a graph and print its size.
    IngestCheck {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Generate a dataset of queries.
    Generate {
        #[command(flatten)]
        graph: GraphArgs,
        /// Number of queries.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        max_relations: usize,
        /// Chance of adding a temporal constraint to a query.
        #[arg(long, default_value_t = 0.5)]
        temporal_probability: f64,
        /// Relative weights of ASK, SELECT and COUNT.
        #[arg(long, value_delimiter = ',', value_name = "ASK,SELECT,COUNT")]
        type_weights: Option<Vec<f64>>,
        #[arg(long, default_value = eventqa_core::dataset_io::DEFAULT_DATASET_ID)]
        dataset_id: String,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run every query of a dataset against a graph.
    Execute {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        dataset: PathBuf,
        /// Store the answers in the dataset.
        #[arg(long)]
        write_answers: bool,
        /// Where to write the answered dataset; defaults to `--dataset`.
        #[arg(long, requires = "write_answers")]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Rewrite reified queries into the direct model.
    Translate {
        #[arg(long)]
        dataset: PathBuf,
        /// N-Triples file of identity links.
        #[arg(long)]
        mappings: PathBuf,
        /// Predicate of the identity links.
        #[arg(long, default_value = eventqa_core::vocab::OWL_SAME_AS)]
        link_predicate: String,
        /// TOML file with begin/end time predicate candidates.
        #[arg(long)]
        temporal: Option<PathBuf>,
        /// Direct-model graph the translations must match.
        #[arg(long, value_name = "FILE")]
        target_kg: Vec<PathBuf>,
        #[arg(long, default_value = "dbpedia")]
        target_schema: String,
        /// JSON report file; printed to standard output when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Where to write the dataset with translations; defaults to `--dataset`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complexity and diversity of a dataset.
    Metrics {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "en,pt,de")]
        langs: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Distinct events, entities and predicates of a dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        /// Graph used to tell events from entities.
        #[command(flatten)]
        graph: OptionalGraphArgs,
        /// Number of most frequent predicates to list.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        json: bool,
    },
    /// VoID description and element lists.
    Export {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        graph: OptionalGraphArgs,
        /// Emit a VoID description (to standard output, or `void.ttl` under `--lists`).
        #[arg(long)]
        void: bool,
        /// Directory for the predicate, event and entity lists.
        #[arg(long, value_name = "OUTDIR")]
        lists: Option<PathBuf>,
    },
    /// Serve the annotation API.
    Serve {
        #[arg(long)]
        dataset: PathBuf,
        /// Append-only annotation log.
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory with the annotation frontend.
        #[arg(long = "static", value_name = "DIR")]
        static_dir: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "en,pt,de")]
        langs: Vec<String>,
    },
    /// Write the bundled synthetic graph as N-Triples files.
    WriteFixture {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

/// Graph flags for commands where the graph is optional.
#[derive(Debug, Clone, Args)]
pub struct OptionalGraphArgs {
    #[arg(long = "kg", value_name = "FILE", conflicts_with = "fixture")]
    pub kg: Vec<PathBuf>,
    #[arg(long)]
    pub fixture: bool,
    #[arg(long, value_name = "NAME|PATH")]
    pub schema: Option<String>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
}

impl OptionalGraphArgs {
    fn given(&self) -> Option<GraphArgs> {
        (self.fixture || !self.kg.is_empty()).then(|| GraphArgs {
            kg: self.kg.clone(),
            fixture: self.fixture,
            schema: self.schema.clone(),
            model: self.model,
            lenient: false,
        })
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(level).try_init();
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("eventqa").chain(args.iter().copied()))
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn generate_defaults() {
        let Command::Generate { n, seed, max_relations, temporal_probability, type_weights, out, .. } =
            parse(&["generate", "--fixture", "--n", "5"]).unwrap().command
        else {
            panic!("generate")
        };
        assert_eq!((n, seed, max_relations, temporal_probability), (5, 42, 2, 0.5));
        assert!(type_weights.is_none() && out.is_none());
        let Command::Generate { type_weights, .. } =
            parse(&["generate", "--fixture", "--n", "5", "--type-weights", "1,0,2"]).unwrap().command
        else {
            panic!("generate")
        };
        assert_eq!(type_weights, Some(vec![1.0, 0.0, 2.0]));
    }

    #[test]
    fn rejected_flag_combinations() {
        assert!(parse(&["generate", "--fixture", "--n", "0"]).is_err());
        assert!(parse(&["generate", "--fixture", "--kg", "a.nt", "--n", "1"]).is_err());
        assert!(parse(&["execute", "--fixture", "--dataset", "d.json", "--out", "x.json"]).is_err());
    }

    #[test]
    fn models_map_and_schemas_must_agree() {
        assert_eq!(GraphModel::from(ModelArg::Direct), GraphModel::Direct);
        let args = |schema: Option<&str>, model| GraphArgs { kg: vec![], fixture: true, schema: schema.map(str::to_string), model, lenient: false };
        assert_eq!(load_graph(&args(None, Some(ModelArg::Direct))).unwrap().model(), GraphModel::Direct);
        assert_eq!(load_graph(&args(Some("eventkg"), None)).unwrap().model(), GraphModel::Reified);
        let err = load_graph(&args(Some("dbpedia"), Some(ModelArg::Reified))).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let none = GraphArgs { fixture: false, ..args(None, None) };
        assert_eq!(load_graph(&none).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
        assert_eq!(CliError::Data(String::new()).exit_code(), 2);
    }
}
