//! Type terms and the decision procedures over them.

mod lattice;
mod registry;
mod subtype;
mod syntax;
mod term;

pub use registry::{Alias, Registry, TypeDecl};
pub use syntax::{parse_type_expr, Binder, TypeExpr};
pub use term::{fresh_name, Kind, Name, Nominal, TupleType, Type, TypeVar};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("type `{0}` is already defined")]
    Redeclared(String),
    #[error("undefined type `{0}`")]
    MissingDecl(String),
    #[error("supertype `{supertype}` of `{name}` is not an abstract type")]
    BadSupertype { name: String, supertype: String },
    #[error("`{name}` takes {expected} parameter(s), got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("malformed type: {0}")]
    Malformed(String),
    #[error("type syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[cfg(test)]
mod tests;
