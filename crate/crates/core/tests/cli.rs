//! The command-line contract: subcommands, exit codes and JSON shapes.

mod support;

use serde_json::Value as Json;
use support::run::{big, corpus_dir};

fn mdl(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["mdl".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    big(move || {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = mdl::cli::main_with(&argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    })
}

fn corpus(name: &str) -> String {
    corpus_dir().join(name).display().to_string()
}

fn scratch(name: &str, src: &str) -> String {
    let dir = std::env::temp_dir().join(format!("mdl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, src).unwrap();
    p.display().to_string()
}

#[test]
fn run_prints_output_then_value() {
    let (code, out, _) = mdl(&["run", &corpus("promotion.mdl")]);
    assert_eq!(code, 0);
    assert_eq!(out, "6.8\n");
    let f = scratch("hello.mdl", "function main(n)\n    println(\"n = \", n)\n    n * 2\nend\n");
    let (code, out, _) = mdl(&["run", &f, "21"]);
    assert_eq!((code, out.as_str()), (0, "n = 21\n42\n"));
}

#[test]
fn run_json_shape() {
    let (code, out, _) = mdl(&["run", &corpus("bilinear.mdl"), "--json", "--stats", "--mode", "dynamic"]);
    assert_eq!(code, 0);
    let doc: Json = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["entry"], "main");
    assert_eq!(doc["mode"], "dynamic");
    assert_eq!(doc["seed"], 42);
    assert_eq!(doc["value"], "11.0");
    assert!(doc["error"].is_null());
    assert_eq!(doc["exit_code"], 0);
    assert!(doc["stats"]["dynamic_dispatches"].as_u64().unwrap() > 0);
}

#[test]
fn exit_codes_follow_error_classes() {
    let f = scratch(
        "errors.mdl",
        "k(x::Int64, y) = 1\nk(x, y::Int64) = 2\nambiguous() = k(1, 1)\nnomethod() = k(\"a\", \"b\")\nbounds() = [1, 2][3]\nfunction assert()
    x::Int64 = 2.5
    x
end\nuser() = error(\"boom\")\n",
    );
    for (entry, code, class) in [
        ("nomethod", 2, "MethodError"),
        ("ambiguous", 2, "AmbiguityError"),
        ("bounds", 3, "BoundsError"),
        ("assert", 3, "TypeError"),
        ("user", 1, "ErrorException"),
    ] {
        let (got, _, err) = mdl(&["run", &f, "-e", entry]);
        assert_eq!(got, code, "{entry}: {err}");
        assert!(err.contains(class), "{entry}: {err}");
        let (_, out, _) = mdl(&["run", &f, "-e", entry, "--json"]);
        let doc: Json = serde_json::from_str(&out).unwrap();
        assert_eq!(doc["error"]["class"], class);
        assert_eq!(doc["exit_code"], code);
    }
    let (code, _, _) = mdl(&["run", "/no/such/file.mdl"]);
    assert_eq!(code, 4);
    let (code, _, _) = mdl(&["frobnicate"]);
    assert_eq!(code, 4);
    let (code, _, _) = mdl(&["run", &f, "--max-union", "0"]);
    assert_eq!(code, 4);
    let bad = scratch("bad.mdl", "function f(\n");
    let (code, _, err) = mdl(&["run", &bad]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn seeds_make_runs_reproducible() {
    let f = scratch("rand.mdl", "main() = randn(3)\n");
    let a = mdl(&["run", &f, "--seed", "7"]);
    let b = mdl(&["run", &f, "--seed", "7"]);
    let c = mdl(&["run", &f, "--seed", "8"]);
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);
    assert_eq!(mdl(&["run", &f]), mdl(&["run", &f, "--seed", "42"]));
}

#[test]
fn infer_reports_types() {
    let (code, out, _) = mdl(&[
        "infer",
        &corpus("bilinear.mdl"),
        "-e",
        "bilinear_unstable",
        "-t",
        "(Vector{Float64}, Matrix{Float64}, Vector{Float64})",
        "--json",
    ]);
    assert_eq!(code, 0);
    let doc: Json = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["return"], "Union(Int64,Float64)");
    let (code, out, _) = mdl(&["infer", &corpus("bilinear.mdl"), "-e", "bilinear_unstable", "-t", "Vector{Float64}, Matrix{Float64}, Vector{Float64}"]);
    assert_eq!(code, 0);
    assert!(out.lines().next().unwrap().ends_with(":: Union(Int64,Float64)"), "{out}");
    let (code, _, _) = mdl(&["infer", &corpus("bilinear.mdl"), "-e", "bilinear_unstable", "-t", "(String,)"]);
    assert_eq!(code, 2);
}

#[test]
fn report_counts_resolved_sites() {
    let lu = corpus("lu.mdl");
    let (code, out, _) = mdl(&["report", &lu, "-e", "lucompletepiv!", "-t", "(Matrix{Float64},)", "--json"]);
    assert_eq!(code, 0);
    let doc: Json = serde_json::from_str(&out).unwrap();
    let s = &doc["summary"];
    assert!(s["ratio"].as_f64().unwrap() >= 0.9);
    assert_eq!(
        s["total"].as_u64().unwrap(),
        s["resolved"].as_u64().unwrap() + s["dynamic"].as_u64().unwrap()
    );
    assert_eq!(doc["config"]["widening"]["max_union"], 4);
    let (_, out, _) = mdl(&["report", &lu, "-e", "lucompletepiv!", "-t", "(Matrix{Float64},)", "--json", "--no-devirt"]);
    let doc: Json = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["summary"]["resolved"], 0);
    let sites = doc["entry"]["sites"].as_array().unwrap();
    assert!(sites.iter().all(|s| s["outcome"] == "dynamic"));
    // whole-program report: runs main and lists every compiled instance
    let (code, out, _) = mdl(&["report", &corpus("generic_numbers.mdl")]);
    assert_eq!(code, 0);
    assert!(out.contains("total:"), "{out}");
}

#[test]
fn bench_validates_and_reports() {
    let lu = corpus("lu.mdl");
    let (code, _, err) = mdl(&["bench", &lu, "--variants", "lu_naive", "--sizes", "4", "--reps", "3"]);
    assert_eq!(code, 4, "{err}");
    let (code, out, _) =
        mdl(&["bench", &lu, "--variants", "lu_naive,lu_loops", "--sizes", "6,12", "--reps", "5", "--json"]);
    assert_eq!(code, 0);
    let doc: Json = serde_json::from_str(&out).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    assert!(rows.iter().all(|r| r["times"].as_array().unwrap().len() == 5));
    assert_eq!(doc["ratios"].as_array().unwrap().len(), 4);
}

#[test]
fn test_subcommand_checks_the_corpus() {
    let (code, out, _) = mdl(&["test", &corpus_dir().display().to_string()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("0 failed"));
    let f = scratch("wrong.mdl", "main() = 1\n");
    std::fs::write(f.replace(".mdl", ".expect.json"), r#"{"runs": [{"entry": "main", "value": "2"}]}"#).unwrap();
    let (code, out, _) = mdl(&["test", &f]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("FAIL"));
}
