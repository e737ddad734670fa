pub mod backends;
pub mod types;
pub mod curation;
pub mod genfilter;
pub mod dataset;
pub mod eval;
pub mod cli;
