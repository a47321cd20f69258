//! Dataflow type inference finds the type instability in a bilinear form
//! whose accumulator starts as an integer.

use std::path::Path;
use std::sync::Arc;

use mdl::engine::{parse_argtypes, Engine, EngineConfig};
use mdl::frontend;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/bilinear.mdl");
    let m = Arc::new(frontend::load_file(&path).unwrap());
    let e = Engine::new(m.clone(), EngineConfig::default());
    let at = parse_argtypes(&m, "(Vector{Float64}, Matrix{Float64}, Vector{Float64})").unwrap();
    for f in ["*", "bilinear_unstable"] {
        let r = e.infer_entry(f, &at).unwrap();
        println!("{f}{} :: {}", m.reg.show(&at), m.reg.show(&r.return_type));
        let body = m.body_of(r.method.unwrap());
        for (slot, ty) in body.slots.iter().zip(&r.slot_types) {
            if let Some(name) = &slot.name {
                println!("    {name:<6} :: {}", m.reg.show(ty));
            }
        }
    }
}
