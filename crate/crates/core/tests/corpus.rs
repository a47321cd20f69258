mod support;

use mdl::corpus::{check_file, discover, Manifest};
use mdl::engine::EngineConfig;
use support::run::{big, corpus_dir, corpus_files};

#[test]
fn every_corpus_file_meets_its_manifest() {
    for file in corpus_files() {
        let outcome = big(move || check_file(&file, EngineConfig::default()));
        let failed: Vec<_> = outcome.checks.iter().filter(|c| !c.ok).collect();
        assert!(failed.is_empty(), "{}: {failed:#?}", outcome.file);
        assert!(outcome.checks.len() >= 5, "{} has too few checks", outcome.file);
    }
}

#[test]
fn discovery_needs_a_sidecar() {
    let files = discover(&corpus_dir()).unwrap();
    assert!(files.iter().all(|f| f.with_extension("expect.json").exists()));
    for name in ["promotion", "bilinear", "outerproduct", "sqrtm_pattern", "lu", "generic_numbers"] {
        assert!(files.iter().any(|f| f.file_stem().unwrap() == name), "{name} missing");
    }
}

#[test]
fn manifests_reject_unknown_fields() {
    assert!(serde_json::from_str::<Manifest>(r#"{"runs": [{"entry": "main", "valu": "1"}]}"#).is_err());
    assert!(serde_json::from_str::<Manifest>(r#"{"run": []}"#).is_err());
    let m: Manifest = serde_json::from_str(r#"{"infer": [{"entry": "f", "argtypes": "(Int64,)", "return": "Int64"}]}"#).unwrap();
    assert_eq!(m.infer[0].return_type, "Int64");
}

#[test]
fn a_wrong_expectation_is_caught() {
    let dir = std::env::temp_dir().join(format!("mdl-corpus-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let prog = dir.join("p.mdl");
    std::fs::write(&prog, "f(x) = x + 1\ng() = [1][2]\n").unwrap();
    std::fs::write(
        dir.join("p.expect.json"),
        r#"{"runs": [{"entry": "f", "args": ["1"], "value": "3"}, {"entry": "g", "error": "MethodError"}],
            "infer": [{"entry": "f", "argtypes": "(Int64,)", "return": "Float64"}]}"#,
    )
    .unwrap();
    let out = check_file(&prog, EngineConfig::default());
    assert!(!out.passed());
    // three modes for each of the two runs, plus the inference check
    assert_eq!(out.checks.iter().filter(|c| !c.ok).count(), 7);
    std::fs::remove_dir_all(&dir).ok();
}
