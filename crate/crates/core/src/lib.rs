pub mod agents;
pub mod backend;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod mock;
pub mod pipeline;
pub mod retrieval;
