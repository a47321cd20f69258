//! Surface syntax: lexing, parsing, printing and lowering to the block IR.

pub mod ast;
pub mod lexer;
pub mod lower;
pub mod parser;
pub mod printer;

use crate::dispatch::Span;

pub use parser::{parse_expr, parse_program};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {span}: {msg}")]
pub struct SyntaxError {
    pub span: Span,
    pub msg: String,
}

impl SyntaxError {
    pub fn new(span: Span, msg: impl Into<String>) -> Self {
        SyntaxError { span, msg: msg.into() }
    }
}

#[cfg(test)]
mod tests;

/// Source of the standard prelude, loaded before every program.
pub const PRELUDE: &str = include_str!("../../prelude/base.mdl");

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{file}: {err}")]
    Syntax { file: String, err: SyntaxError },
    #[error("{0}")]
    Io(String),
    #[error("{file}: {err}")]
    Lower { file: String, err: lower::LowerError },
}

/// Parse `src` and splice in `include("path")` items, resolved relative to
/// `dir`. Each file is included at most once.
pub fn parse_with_includes(
    src: &str,
    file: &str,
    dir: Option<&std::path::Path>,
) -> Result<ast::Program, LoadError> {
    let mut seen = std::collections::HashSet::new();
    let mut items = Vec::new();
    splice(src, file, dir, &mut seen, &mut items)?;
    Ok(ast::Program { items })
}

fn splice(
    src: &str,
    file: &str,
    dir: Option<&std::path::Path>,
    seen: &mut std::collections::HashSet<std::path::PathBuf>,
    out: &mut Vec<ast::Item>,
) -> Result<(), LoadError> {
    let prog = parse_program(src).map_err(|err| LoadError::Syntax { file: file.to_string(), err })?;
    for item in prog.items {
        match item {
            ast::Item::Include(path, span) => {
                let base = dir.map(std::path::Path::to_path_buf).unwrap_or_default();
                let full = base.join(&path);
                let key = full.canonicalize().unwrap_or_else(|_| full.clone());
                if !seen.insert(key) {
                    continue;
                }
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| LoadError::Io(format!("{file}:{span}: cannot include {}: {e}", full.display())))?;
                let sub_dir = full.parent().map(std::path::Path::to_path_buf);
                splice(&text, &full.display().to_string(), sub_dir.as_deref(), seen, out)?;
            }
            other => out.push(other),
        }
    }
    Ok(())
}

/// Build a module from the prelude followed by a user program.
pub fn load(src: &str, file: &str, dir: Option<&std::path::Path>) -> Result<lower::Module, LoadError> {
    let mut prog = parse_with_includes(PRELUDE, "<prelude>", None)?;
    let user = parse_with_includes(src, file, dir)?;
    prog.items.extend(user.items);
    lower::lower(&prog).map_err(|err| LoadError::Lower { file: file.to_string(), err })
}

/// Load a program from a file on disk.
pub fn load_file(path: &std::path::Path) -> Result<lower::Module, LoadError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| LoadError::Io(format!("cannot read {}: {e}", path.display())))?;
    load(&src, &path.display().to_string(), path.parent())
}
