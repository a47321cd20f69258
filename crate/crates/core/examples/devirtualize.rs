//! How many call sites of the LU factorization are bound statically once
//! the argument type is known, with and without devirtualization.

use std::path::Path;
use std::sync::Arc;

use mdl::engine::{parse_argtypes, Engine, EngineConfig};
use mdl::frontend;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/lu.mdl");
    let m = Arc::new(frontend::load_file(&path).unwrap());
    for argtypes in ["(Matrix{Float64},)", "(Matrix{Rational{Int64}},)"] {
        let at = parse_argtypes(&m, argtypes).unwrap();
        for devirtualize in [true, false] {
            let mut cfg = EngineConfig::default();
            cfg.opt.devirtualize = devirtualize;
            let r = Engine::new(m.clone(), cfg).report_entry("lucompletepiv!", &at).unwrap();
            println!(
                "lucompletepiv!{argtypes} devirtualize={devirtualize}: {}/{} resolved, {} inlined, {} dynamic",
                r.resolved, r.total, r.inlined, r.dynamic
            );
        }
    }
}
