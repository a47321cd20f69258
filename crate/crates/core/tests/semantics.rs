//! Language behaviour, checked in every mode.

mod support;

use mdl::engine::Mode;
use support::run::{big, load, run};

/// Evaluate `entry` in all three modes, require agreement, and return the
/// printed result (or the error class).
fn eval(src: &str, entry: &str, args: &[&str]) -> Result<String, String> {
    let src = src.to_string();
    let entry = entry.to_string();
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    big(move || {
        let m = load(&src);
        let a: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let results: Vec<_> = Mode::ALL.iter().map(|&mode| run(&m, mode, &entry, &a)).collect();
        for r in &results[1..] {
            assert_eq!(r.outcome, results[0].outcome, "{entry}");
            assert_eq!(r.stdout, results[0].stdout, "{entry}");
        }
        assert_eq!(results[2].violations, 0);
        results[0].outcome.clone()
    })
}

fn ok(src: &str, entry: &str) -> String {
    eval(src, entry, &[]).unwrap_or_else(|e| panic!("{entry} raised {e}"))
}

#[test]
fn arithmetic_and_promotion() {
    let src = "a() = 7 / 2\nb() = div(7, 2)\nc() = rem(-7, 2)\nd() = 2 ^ 10\ne() = 1 + 2.0\nf() = 3 == 3.0\ng() = 0.1 + 0.2\nh() = -(5)\n";
    assert_eq!(ok(src, "a"), "3.5");
    assert_eq!(ok(src, "b"), "3");
    assert_eq!(ok(src, "c"), "-1");
    assert_eq!(ok(src, "d"), "1024");
    assert_eq!(ok(src, "e"), "3.0");
    assert_eq!(ok(src, "f"), "true");
    assert_eq!(ok(src, "g"), format!("{}", 0.1f64 + 0.2));
    assert_eq!(ok(src, "h"), "-5");
    assert_eq!(eval("z() = div(1, 0)", "z", &[]), Err("DivideError".into()));
}

#[test]
fn arrays_are_column_major_and_slices_drop_scalar_dims() {
    let src = "M() = [1.0 2.0 3.0; 4.0 5.0 6.0]\nlinear() = M()[2]\nrow() = M()[1, 2:3]\ncol() = M()[1:2, 3]\nsz() = size(M()[2, 1:3])\nvsz() = size(M()[1:2, 1])\n";
    assert_eq!(ok(src, "linear"), "4.0");
    assert_eq!(ok(src, "row"), "[2.0 3.0]");
    assert_eq!(ok(src, "col"), "[3.0, 6.0]");
    assert_eq!(ok(src, "sz"), "(1, 3)");
    assert_eq!(ok(src, "vsz"), "(2,)");
    let set = "function f()\n    A = zeros(2, 2)\n    A[1:2, 2] = [5.0, 6.0]\n    A[[2, 1], 1] = [1.0, 2.0]\n    A\nend\n";
    assert_eq!(ok(set, "f"), "[2.0 5.0; 1.0 6.0]");
    assert_eq!(eval("f() = zeros(2)[3]", "f", &[]), Err("BoundsError".into()));
}

#[test]
fn control_flow() {
    let src = "function f(n)\n    s = 0\n    i = 0\n    while true\n        i += 1\n        if i > n\n            break\n        end\n        if i % 2 == 0\n            continue\n        end\n        s += i\n    end\n    s\nend\n\nfunction g()\n    s = 0\n    for x in [3, 4, 5], y = 1:2\n        s = s + x * y\n    end\n    s\nend\n";
    assert_eq!(eval(src, "f", &["10"]), Ok("25".into()));
    assert_eq!(ok(src, "g"), "36");
}

#[test]
fn try_catch_recovers() {
    let src = "function f(i)\n    try\n        [1, 2, 3][i]\n    catch\n        -1\n    end\nend\n";
    assert_eq!(eval(src, "f", &["2"]), Ok("2".into()));
    assert_eq!(eval(src, "f", &["9"]), Ok("-1".into()));
}

#[test]
fn structs_and_parametric_types() {
    let src = "type P{T}\n    x::T\n    y::T\nend\nnorm1(p::P) = abs(p.x) + abs(p.y)\nmk() = P(1, -2)\nn() = norm1(P(1.5, -2.0))\nt() = typeof(P(1, 2))\nmixed() = P(1, 2.0)\nfield() = P(1, 2).z\n";
    assert_eq!(ok(src, "mk"), "P{Int64}(1, -2)");
    assert_eq!(ok(src, "n"), "3.5");
    assert_eq!(ok(src, "t"), "P{Int64}");
    assert_eq!(eval(src, "mixed", &[]), Err("MethodError".into()));
    assert_eq!(eval(src, "field", &[]), Err("FieldError".into()));
}

#[test]
fn dispatch_picks_the_most_specific_method() {
    let src = "abstract A\ntype B <: A\nend\ntype C <: A\nend\nf(x::A, y::A) = \"AA\"\nf(x::B, y::A) = \"BA\"\nf(x::A, y::C) = \"AC\"\nbb() = f(B(), B())\ncc() = f(C(), C())\nbc() = f(B(), C())\nf(x::B, y::C) = \"BC\"\nbc2() = f(B(), C())\n";
    assert_eq!(ok(src, "bb"), "\"BA\"");
    assert_eq!(ok(src, "cc"), "\"AC\"");
    // the (B, C) method is defined before any call runs, so it is visible
    assert_eq!(ok(src, "bc"), "\"BC\"");
    let amb = "abstract A\ntype B <: A\nend\ntype C <: A\nend\nf(x::A, y::A) = 1\nf(x::B, y::A) = 2\nf(x::A, y::C) = 3\ng() = f(B(), C())\n";
    assert_eq!(eval(amb, "g", &[]), Err("AmbiguityError".into()));
}

#[test]
fn varargs_and_splatting() {
    let src = "count(xs...) = length(xs)\nfirst2(a, b, rest...) = (a, b)\nsplat() = count((1, 2, 3)...)\nnone() = count()\npair() = first2(1, 2, 3, 4)\n";
    assert_eq!(ok(src, "splat"), "3");
    assert_eq!(ok(src, "none"), "0");
    assert_eq!(ok(src, "pair"), "(1, 2)");
}

#[test]
fn output_and_probes() {
    let src = "function f()\n    println(\"a\", 1)\n    probe(\"hit\")\n    probe(\"hit\")\n    println(2.5)\n    nothing\nend\n";
    let m = load(src);
    let r = run(&m, Mode::Optimized, "f", &[]);
    assert_eq!(r.stdout, "a1\n2.5\n");
    assert_eq!(r.probes.get("hit"), Some(&2));
    assert_eq!(r.outcome, Ok("nothing".into()));
}

#[test]
fn deep_recursion_is_an_error_not_a_crash() {
    let src = "down(n) = n == 0 ? 0 : 1 + down(n - 1)\n";
    assert_eq!(eval(src, "down", &["1000"]), Ok("1000".into()));
    assert_eq!(eval(src, "down", &["1000000"]), Err("StackOverflowError".into()));
}

#[test]
fn type_values_and_queries() {
    let src = "a() = typeof(1.0)\nb() = isa(1, Number)\nc() = isa(true, Number)\nd() = typeof([1, 2])\ne() = promote_type(Int64, Float64)\nf() = typeof((1, \"s\"))\n";
    assert_eq!(ok(src, "a"), "Float64");
    assert_eq!(ok(src, "b"), "true");
    assert_eq!(ok(src, "c"), "false");
    assert_eq!(ok(src, "d"), "Array{Int64,1}");
    assert_eq!(ok(src, "e"), "Float64");
    assert_eq!(ok(src, "f"), "(Int64,String)");
}

#[test]
fn typed_locals_convert_or_fail() {
    let src = "function f(v)\n    x::Float64 = v\n    x\nend\n";
    assert_eq!(eval(src, "f", &["3"]), Ok("3.0".into()));
    assert_eq!(eval(src, "f", &["\"s\""]), Err("TypeError".into()));
}
