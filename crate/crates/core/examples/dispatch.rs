//! Multiple dispatch: the most specific applicable method wins, and
//! overlapping methods with no winner are reported as ambiguous.

use mdl::engine::{parse_argtypes, Engine, EngineConfig};
use mdl::frontend;

const SRC: &str = r#"
abstract Shape
type Circle <: Shape
    r::Float64
end
type Square <: Shape
    s::Float64
end

collide(a::Shape, b::Shape) = "generic"
collide(a::Circle, b::Shape) = "circle first"
collide(a::Shape, b::Square) = "square second"
"#;

fn main() {
    let m = std::sync::Arc::new(frontend::load(SRC, "<example>", None).unwrap());
    for w in m.table.warnings() {
        println!("warning: {w}");
    }
    let e = Engine::new(m.clone(), EngineConfig::default());
    for args in ["(Circle, Circle)", "(Square, Square)", "(Square, Circle)", "(Circle, Square)"] {
        let at = parse_argtypes(&m, args).unwrap();
        match e.resolve("collide", &at) {
            Ok((id, _)) => println!("collide{args} -> {}", m.reg.show(&m.table.method(id).sig)),
            Err(err) => println!("collide{args} -> {} ({err})", err.class()),
        }
    }
}
