use super::printer::{print_program, strip_spans};
use super::*;

fn corpus_sources() -> Vec<(String, String)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mdl"))
        .map(|p| (p.display().to_string(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out.push(("<prelude>".into(), PRELUDE.to_string()));
    out
}

#[test]
fn prelude_loads() {
    let m = load("", "<test>", None).unwrap_or_else(|e| panic!("{e}"));
    assert!(m.table.has_function("+"));
}

#[test]
fn printing_round_trips_on_real_programs() {
    for (name, src) in corpus_sources() {
        let ast = parse_program(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = print_program(&ast);
        let again = parse_program(&printed).unwrap_or_else(|e| panic!("{name} reprinted: {e}\n{printed}"));
        assert_eq!(strip_spans(&ast), strip_spans(&again), "{name}");
        // printing is a fixed point after one pass
        assert_eq!(print_program(&again), printed, "{name}");
    }
}

#[test]
fn precedence_and_associativity() {
    let same = |a: &str, b: &str| {
        assert_eq!(strip_spans_expr(a), strip_spans_expr(b), "{a} vs {b}");
    };
    fn strip_spans_expr(s: &str) -> String {
        let p = parse_program(&format!("f() = {s}\n")).unwrap();
        print_program(&strip_spans(&p))
    }
    same("1 + 2 * 3", "1 + (2 * 3)");
    same("2 ^ 3 ^ 2", "2 ^ (3 ^ 2)");
    same("1 - 2 - 3", "(1 - 2) - 3");
    same("-x ^ 2", "-(x ^ 2)");
    same("a < b && c || d", "((a < b) && c) || d");
    same("x == 1 ? a : b", "(x == 1) ? a : b");
    same("1:n-1", "1:(n - 1)");
    same("A[k, ρ]'", "(A[k, ρ])'");
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_program("function f(x)\n    x +\nend\n").unwrap_err();
    assert!(err.span.line >= 2, "{err}");
    assert!(parse_program("f(x) = (1, 2").is_err());
    assert!(parse_program("type T\n  x::\nend").is_err());
    assert!(matches!(load("f(x) = y\n", "<t>", None), Err(LoadError::Lower { .. })));
}

#[test]
fn includes_are_spliced_once() {
    let dir = std::env::temp_dir().join(format!("mdl-include-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("a.mdl"), "include(\"b.mdl\")\nfa() = fb() + 1\n").unwrap();
    std::fs::write(dir.join("b.mdl"), "fb() = 41\n").unwrap();
    let m = load("include(\"a.mdl\")\ninclude(\"b.mdl\")\n", "<t>", Some(&dir)).unwrap();
    assert_eq!(m.table.methods_of("fb").len(), 1);
    assert!(load("include(\"missing.mdl\")\n", "<t>", Some(&dir)).is_err());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn lexer_handles_unicode_and_comments() {
    let toks = lexer::lex("μ += 1 # trailing\nλ ≠ 0").unwrap();
    assert!(toks.len() >= 6);
    assert!(lexer::lex("\"unterminated").is_err());
}
