//! Mixed-type arithmetic goes through the promotion rules defined in the
//! language itself; without a rule, promotion falls back to the join.

use mdl::engine::{Engine, EngineConfig};
use mdl::frontend;

const SRC: &str = r#"
product() = 2 * 3.4
kind() = typeof(1 + 0.5)
common() = promote_type(Int64, Float64)
fallback() = promote_type(Int64, String)
"#;

fn main() {
    let m = std::sync::Arc::new(frontend::load(SRC, "<example>", None).unwrap());
    let e = Engine::new(m.clone(), EngineConfig::default());
    e.run_toplevel().unwrap();
    for f in ["product", "kind", "common", "fallback"] {
        println!("{f}() = {}", e.call(f, vec![]).unwrap().repr(&m.reg));
    }
}
