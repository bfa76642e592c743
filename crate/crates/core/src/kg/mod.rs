//! Knowledge-graph ingestion: N-Triples parsing, schema conventions and the
//! indexed in-memory graph.

mod graph;
pub mod ntriples;
mod schema;
mod term;

pub use graph::{
    build_graph, direct_relation_id, GraphError, GraphModel, KnowledgeGraph, NodeKind, Provenance,
    Relation, RelationObject,
};
pub use schema::{ReificationPredicates, SchemaConfig, SchemaError, TypeMarker};
pub use term::{Literal, NodeId, Term, Triple};
