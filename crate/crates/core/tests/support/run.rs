//! Loading programs and running them in each mode.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mdl::corpus::{self, RunResult};
use mdl::engine::{EngineConfig, Mode};
use mdl::frontend::{self, lower::Module};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_files() -> Vec<PathBuf> {
    let files = corpus::discover(&corpus_dir()).unwrap();
    assert!(files.len() >= 6, "corpus is missing files: {files:?}");
    files
}

pub fn load(src: &str) -> Arc<Module> {
    Arc::new(frontend::load(src, "<test>", Some(&corpus_dir())).unwrap_or_else(|e| panic!("{e}\n{src}")))
}

pub fn load_corpus(name: &str) -> Arc<Module> {
    Arc::new(frontend::load_file(&corpus_dir().join(name)).unwrap_or_else(|e| panic!("{e}")))
}

pub fn run(m: &Arc<Module>, mode: Mode, entry: &str, args: &[&str]) -> RunResult {
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    corpus::run_once(m, EngineConfig::with_mode(mode), entry, &args).unwrap()
}

/// Run on a thread with room for deep interpreter recursion.
pub fn big<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> R {
    mdl::engine::with_big_stack(f)
}
