//! Runtime values, intrinsics, errors and execution statistics. The
//! interpreter itself lives in [`crate::engine`].

pub mod intrinsics;
pub mod literal;
pub mod value;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dispatch::DispatchError;

pub use value::{Builtins, Value};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RtError {
    #[error("{0}")]
    Method(DispatchError),
    #[error("type assertion failed: {0}")]
    TypeAssert(String),
    #[error("bounds error: {0}")]
    Bounds(String),
    #[error("integer division by zero")]
    DivideByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{0}")]
    User(String),
    #[error("field error: {0}")]
    Field(String),
    #[error("stack overflow (call depth exceeded {0})")]
    StackOverflow(usize),
    #[error("internal error: {0}")]
    Internal(String),
}

impl RtError {
    /// Stable name of the error class, used to compare runs across modes.
    pub fn class(&self) -> &'static str {
        match self {
            RtError::Method(DispatchError::Ambiguous { .. }) => "AmbiguityError",
            RtError::Method(_) => "MethodError",
            RtError::TypeAssert(_) => "TypeError",
            RtError::Bounds(_) => "BoundsError",
            RtError::DivideByZero => "DivideError",
            RtError::Domain(_) => "DomainError",
            RtError::User(_) => "ErrorException",
            RtError::Field(_) => "FieldError",
            RtError::StackOverflow(_) => "StackOverflowError",
            RtError::Internal(_) => "InternalError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RtError::Method(_) => 2,
            RtError::TypeAssert(_) | RtError::Bounds(_) => 3,
            _ => 1,
        }
    }
}

/// Counters collected while running a program.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExecStats {
    /// Array and struct creations.
    pub allocations: u64,
    /// Total cells (array elements, struct fields) allocated.
    pub allocated_cells: u64,
    /// Calls resolved by run-time dispatch.
    pub dynamic_dispatches: u64,
    /// Calls whose target was resolved ahead of time.
    pub direct_calls: u64,
    /// Specialized instances compiled (optimized and checking modes).
    pub instances_compiled: u64,
    /// Checking mode: statements whose value fell outside the inferred type,
    /// and direct calls whose target disagreed with dynamic dispatch.
    pub type_violations: u64,
    pub dispatch_violations: u64,
    pub wall_time: f64,
    /// Counts from `@probe("name")`.
    pub probes: BTreeMap<String, u64>,
}
