//! Corpus manifests: the expectations stored next to each program in a
//! `<name>.expect.json` sidecar, and the driver that checks them.
//!
//! A manifest looks like
//!
//! ```json
//! {
//!   "runs":   [{"entry": "main", "args": ["2"], "value": "6.8"},
//!              {"entry": "bad", "error": "MethodError"}],
//!   "infer":  [{"entry": "f", "argtypes": "(Float64,)", "return": "Float64"}],
//!   "report": [{"entry": "g", "argtypes": "(Matrix{Float64},)", "min_ratio": 0.9}]
//! }
//! ```
//!
//! Every run is executed in each interpreter mode; the modes must agree
//! with each other as well as with the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{parse_argtypes, Engine, EngineConfig, Mode};
use crate::frontend::{self, lower::Module};
use crate::runtime::literal::parse_literal;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub runs: Vec<RunExpect>,
    #[serde(default)]
    pub infer: Vec<InferExpect>,
    #[serde(default)]
    pub report: Vec<ReportExpect>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunExpect {
    pub entry: String,
    /// Arguments as source literals.
    #[serde(default)]
    pub args: Vec<String>,
    /// Expected result, as printed by `mdl run`.
    pub value: Option<String>,
    /// Expected error class, e.g. `BoundsError`.
    pub error: Option<String>,
    /// Expected printed output.
    pub stdout: Option<String>,
    /// Expected `@probe` counts for this call alone.
    pub probes: Option<BTreeMap<String, u64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InferExpect {
    pub entry: String,
    pub argtypes: String,
    #[serde(rename = "return")]
    pub return_type: String,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReportExpect {
    pub entry: String,
    pub argtypes: String,
    pub min_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileOutcome {
    pub file: String,
    pub checks: Vec<Check>,
}

impl FileOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// What one call produced in one mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    /// The printed value, or the error class.
    pub outcome: Result<String, String>,
    pub stdout: String,
    pub probes: BTreeMap<String, u64>,
    pub violations: u64,
}

/// The sidecar path for a program.
pub fn manifest_path(program: &Path) -> PathBuf {
    program.with_extension("expect.json")
}

pub fn read_manifest(path: &Path) -> Result<Manifest, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Program files with a sidecar manifest: `path` itself, or the `.mdl`
/// files directly inside it.
pub fn discover(path: &Path) -> Result<Vec<PathBuf>, String> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mdl") && manifest_path(p).exists())
        .collect();
    files.sort();
    Ok(files)
}

/// Call `entry(args...)` after running the top level, on a fresh engine.
pub fn run_once(m: &Arc<Module>, cfg: EngineConfig, entry: &str, args: &[String]) -> Result<RunResult, String> {
    let vals = args.iter().map(|a| parse_literal(a)).collect::<Result<Vec<_>, _>>()?;
    let e = Engine::new(m.clone(), cfg);
    e.run_toplevel().map_err(|err| format!("top level failed: {err}"))?;
    e.take_output();
    e.reset_stats();
    e.reseed(cfg.seed);
    let outcome = e.call(entry, vals).map(|v| v.repr(&m.reg)).map_err(|err| err.class().to_string());
    let stats = e.stats();
    Ok(RunResult {
        outcome,
        stdout: e.take_output(),
        probes: stats.probes,
        violations: stats.type_violations + stats.dispatch_violations,
    })
}

/// Check one program against its manifest in every mode.
pub fn check_file(program: &Path, base: EngineConfig) -> FileOutcome {
    let file = program.display().to_string();
    let mut checks = Vec::new();
    let mut push = |name: String, ok: bool, detail: String| checks.push(Check { name, ok, detail });

    let manifest = match read_manifest(&manifest_path(program)) {
        Ok(m) => m,
        Err(e) => {
            push("manifest".into(), false, e);
            return FileOutcome { file, checks };
        }
    };
    let module = match frontend::load_file(program) {
        Ok(m) => Arc::new(m),
        Err(e) => {
            push("load".into(), false, e.to_string());
            return FileOutcome { file, checks };
        }
    };

    for run in &manifest.runs {
        let label = format!("run {}({})", run.entry, run.args.join(", "));
        let mut results = Vec::new();
        for mode in Mode::ALL {
            let cfg = EngineConfig { mode, ..base };
            match run_once(&module, cfg, &run.entry, &run.args) {
                Ok(r) => results.push((mode, r)),
                Err(e) => push(format!("{label} [{}]", mode.as_str()), false, e),
            }
        }
        let Some((_, first)) = results.first() else { continue };
        for (mode, r) in &results {
            let name = format!("{label} [{}]", mode.as_str());
            let mut problems = Vec::new();
            if r.outcome != first.outcome || r.stdout != first.stdout {
                problems.push(format!("differs from {}: {:?} vs {:?}", Mode::ALL[0].as_str(), r.outcome, first.outcome));
            }
            match (&run.value, &run.error, &r.outcome) {
                (Some(want), _, Ok(got)) if want != got => problems.push(format!("value {got}, expected {want}")),
                (Some(want), _, Err(cls)) => problems.push(format!("raised {cls}, expected value {want}")),
                (_, Some(want), Err(cls)) if want != cls => problems.push(format!("raised {cls}, expected {want}")),
                (_, Some(want), Ok(got)) => problems.push(format!("returned {got}, expected {want}")),
                _ => {}
            }
            if let Some(out) = &run.stdout {
                if *out != r.stdout {
                    problems.push(format!("printed {:?}, expected {out:?}", r.stdout));
                }
            }
            if let Some(want) = &run.probes {
                for (k, &n) in want {
                    let got = r.probes.get(k).copied().unwrap_or(0);
                    if got != n {
                        problems.push(format!("probe {k} = {got}, expected {n}"));
                    }
                }
            }
            if r.violations > 0 {
                problems.push(format!("{} checking-mode violations", r.violations));
            }
            let ok = problems.is_empty();
            let detail = if ok { format!("{:?}", r.outcome) } else { problems.join("; ") };
            push(name, ok, detail);
        }
    }

    for inf in &manifest.infer {
        let name = format!("infer {}{}", inf.entry, inf.argtypes);
        let e = Engine::new(module.clone(), base);
        let res = parse_argtypes(&module, &inf.argtypes)
            .and_then(|at| e.infer_entry(&inf.entry, &at).map_err(|err| err.to_string()));
        match res {
            Ok(r) => {
                let got = module.reg.show(&r.return_type);
                push(name, got == inf.return_type, format!("return {got}, expected {}", inf.return_type));
            }
            Err(err) => push(name, false, err),
        }
    }

    for rep in &manifest.report {
        let name = format!("report {}{}", rep.entry, rep.argtypes);
        let e = Engine::new(module.clone(), EngineConfig { mode: Mode::Optimized, ..base });
        let res = parse_argtypes(&module, &rep.argtypes)
            .and_then(|at| e.report_entry(&rep.entry, &at).map_err(|err| err.to_string()));
        match res {
            Ok(r) => {
                let ratio = r.ratio();
                let ok = rep.min_ratio.is_none_or(|min| ratio >= min);
                push(name, ok, format!("{}/{} sites resolved ({ratio:.3})", r.resolved, r.total));
            }
            Err(err) => push(name, false, err),
        }
    }

    FileOutcome { file, checks }
}
