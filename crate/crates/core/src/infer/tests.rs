use std::sync::Arc;

use super::*;
use crate::engine::{parse_argtypes, Engine, EngineConfig};
use crate::frontend;

fn infer_with(src: &str, entry: &str, argtypes: &str, widening: WideningConfig) -> (Arc<InferenceResult>, Arc<crate::frontend::lower::Module>) {
    let m = Arc::new(frontend::load(src, "<test>", None).unwrap_or_else(|e| panic!("{e}")));
    let e = Engine::new(m.clone(), EngineConfig { widening, ..EngineConfig::default() });
    let at = parse_argtypes(&m, argtypes).unwrap();
    (e.infer_entry(entry, &at).unwrap(), m)
}

fn ret(src: &str, entry: &str, argtypes: &str) -> String {
    let (r, m) = infer_with(src, entry, argtypes, WideningConfig::default());
    m.reg.show(&r.return_type)
}

#[test]
fn straight_line_arithmetic() {
    assert_eq!(ret("f(x, y) = x * y + 1", "f", "(Int64, Int64)"), "Int64");
    assert_eq!(ret("f(x, y) = x * y + 1", "f", "(Int64, Float64)"), "Float64");
    assert_eq!(ret("f(x) = x / 2", "f", "(Int64,)"), "Float64");
    assert_eq!(ret("f(x) = (x, 1.0)", "f", "(Int64,)"), "(Int64,Float64)");
    assert_eq!(ret("f(x) = x < 1 ? x : 2", "f", "(Int64,)"), "Int64");
}

#[test]
fn loop_accumulators() {
    let unstable = "function f(n)\n    s = 0\n    for i = 1:n\n        s = s + 0.5\n    end\n    s\nend";
    assert_eq!(ret(unstable, "f", "(Int64,)"), "Union(Int64,Float64)");
    let stable = "function f(n)\n    s = 0.0\n    for i = 1:n\n        s = s + i\n    end\n    s\nend";
    assert_eq!(ret(stable, "f", "(Int64,)"), "Float64");
}

#[test]
fn recursion_terminates() {
    let fact = "fact(n) = n <= 1 ? 1 : n * fact(n - 1)";
    assert_eq!(ret(fact, "fact", "(Int64,)"), "Int64");
    let mutual = "ev(n) = n == 0 ? true : od(n - 1)\nod(n) = n == 0 ? false : ev(n - 1)";
    assert_eq!(ret(mutual, "ev", "(Int64,)"), "Bool");
    // argument types grow with each call; widening must cut this off
    let (r, m) = infer_with("g(x, n) = n == 0 ? x : g((x, x), n - 1)", "g", "(Int64, Int64)", WideningConfig::default());
    assert!(r.converged);
    let t = |s: &str| m.reg.parse_type(s).unwrap();
    for reachable in ["Int64", "(Int64,Int64)", "((Int64,Int64),(Int64,Int64))"] {
        assert!(m.reg.subtype(&t(reachable), &r.return_type), "{}", m.reg.show(&r.return_type));
    }
}

#[test]
fn union_limit_widens() {
    let src = "function f(k)\n    x = 1\n    if k == 1\n        x = 1.0\n    elseif k == 2\n        x = \"s\"\n    elseif k == 3\n        x = true\n    elseif k == 4\n        x = nothing\n    end\n    x\nend";
    let (wide, m) = infer_with(src, "f", "(Int64,)", WideningConfig { max_union: 2, ..WideningConfig::default() });
    assert!(wide.widenings.unions > 0);
    assert!(!matches!(&wide.return_type, Type::Union(ms) if ms.len() > 2), "{}", m.reg.show(&wide.return_type));
    let (exact, m) = infer_with(src, "f", "(Int64,)", WideningConfig { max_union: 8, ..WideningConfig::default() });
    assert!(matches!(&exact.return_type, Type::Union(ms) if ms.len() == 5), "{}", m.reg.show(&exact.return_type));
    // whatever the limit, the widened result contains the precise one
    assert!(m.reg.subtype(&exact.return_type, &wide.return_type));
}

#[test]
fn errors_make_code_unreachable() {
    assert_eq!(ret("f(x) = error(\"no\")", "f", "(Int64,)"), "Bottom");
    let src = "function f(x)\n    if x > 0\n        return 1\n    end\n    throw(BoundsError())\nend";
    assert_eq!(ret(src, "f", "(Int64,)"), "Int64");
}

#[test]
fn call_sites_record_why_they_stay_dynamic() {
    let src = "h(x::Int64) = 1\nh(x::Float64) = 2\nh(x::Float64, y) = 3\nfunction f(n)\n    x = n > 0 ? 1 : 1.0\n    h(x) + h(n)\nend";
    let (r, _) = infer_with(src, "f", "(Int64,)", WideningConfig::default());
    let reasons: Vec<Option<Unresolved>> = r.call_sites.iter().filter(|c| &*c.fname == "h").map(|c| c.reason).collect();
    assert!(reasons.contains(&None), "{reasons:?}");
    assert!(reasons.contains(&Some(Unresolved::MultipleMatches)), "{reasons:?}");
    let (r, _) = infer_with("f(x) = nosuch(x)", "f", "(Int64,)", WideningConfig::default());
    assert_eq!(r.call_sites[0].reason, Some(Unresolved::UnknownFunction));
    let (r, _) = infer_with("k(x::String) = 1\nf(x) = k(x)", "f", "(Int64,)", WideningConfig::default());
    assert_eq!(r.call_sites.iter().find(|c| &*c.fname == "k").unwrap().reason, Some(Unresolved::NoMethod));
}

#[test]
fn static_parameters_are_bound() {
    let src = "first_of{T}(v::Array{T,1}) = zero(T)";
    assert_eq!(ret(src, "first_of", "(Vector{Float64},)"), "Float64");
    assert_eq!(ret(src, "first_of", "(Vector{Int64},)"), "Int64");
}

#[test]
fn limits_are_validated() {
    assert!(WideningConfig::default().validate().is_ok());
    assert!(WideningConfig { max_union: 0, ..WideningConfig::default() }.validate().is_err());
}
