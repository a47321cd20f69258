pub mod cli;
pub mod corpus;
pub mod dispatch;
pub mod engine;
pub mod frontend;
pub mod infer;
pub mod ir;
pub mod opt;
pub mod runtime;
pub mod types;
