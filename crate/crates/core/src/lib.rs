pub mod kg;
pub mod temporal;
pub mod vocab;
pub mod query;
pub mod sparql;
pub mod fixture;
pub mod generator;
pub mod evaluator;
pub mod translator;
pub mod metrics;
pub mod dataset_io;
