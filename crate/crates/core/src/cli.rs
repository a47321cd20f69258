//! The `mdl` command line: run, infer, report, bench and test.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::corpus;
use crate::engine::{parse_argtypes, Engine, EngineConfig, Mode};
use crate::frontend::{self, lower::Module};
use crate::infer::WideningConfig;
use crate::opt::{FnReport, OptConfig};
use crate::runtime::literal::parse_literal;
use crate::runtime::{ExecStats, RtError};

/// Exit code for usage errors, syntax and lowering errors and missing files.
pub const EXIT_LOAD: i32 = 4;

/// Fewest benchmark repetitions accepted; medians of fewer are too noisy.
pub const MIN_REPS: usize = 5;

#[derive(Parser, Debug)]
#[command(name = "mdl", version, about = "Multiple-dispatch language: interpreter, type inference and optimizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the top level of a program, then call an entry function.
    Run {
        file: PathBuf,
        /// Arguments for the entry function, as literals (`2`, `1.5`, `[1.0, 2.0]`).
        #[arg(allow_hyphen_values = true)]
        args: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// Print execution statistics as JSON.
        #[arg(long)]
        stats: bool,
    },
    /// Show inferred types for an entry function at given argument types.
    Infer {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Show which call sites were resolved statically.
    Report {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Also print the optimized IR of the entry.
        #[arg(long)]
        ir: bool,
    },
    /// Time entry functions that take a problem size.
    Bench {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Problem sizes passed as the single argument.
        #[arg(long, value_delimiter = ',', default_values_t = vec![50, 100, 200])]
        sizes: Vec<i64>,
        /// Entry functions to compare (defaults to the entry).
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Interpreter modes to measure.
        #[arg(long, value_delimiter = ',', default_values = ["dynamic", "optimized"])]
        modes: Vec<Mode>,
        /// Repetitions per measurement; medians are reported.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Measure each (variant, mode) pair on its own thread.
        #[arg(long)]
        parallel: bool,
    },
    /// Check corpus programs against their `.expect.json` manifests.
    Test {
        /// Program files or directories (default: `corpus`).
        paths: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Entry function.
    #[arg(short = 'e', long)]
    pub entry: Option<String>,
    /// Argument types, e.g. `(Matrix{Float64},)`.
    #[arg(short = 't', long)]
    pub argtypes: Option<String>,
    #[arg(long, value_enum, default_value_t = Mode::Optimized)]
    pub mode: Mode,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub max_union: usize,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 8)]
    pub max_tuple: usize,
    /// Leave every call site dynamically dispatched.
    #[arg(long)]
    pub no_devirt: bool,
    #[arg(long)]
    pub no_inline: bool,
    /// Largest callee (in statements) that may be inlined.
    #[arg(long, default_value_t = 24)]
    pub inline_max: usize,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

impl Common {
    pub fn engine_config(&self) -> Result<EngineConfig, String> {
        let widening = WideningConfig {
            max_union: self.max_union,
            max_depth: self.max_depth,
            max_tuple: self.max_tuple,
            ..WideningConfig::default()
        };
        widening.validate()?;
        Ok(EngineConfig {
            mode: self.mode,
            widening,
            opt: OptConfig { devirtualize: !self.no_devirt, inline: !self.no_inline, inline_max: self.inline_max },
            seed: self.seed,
            ..EngineConfig::default()
        })
    }
}

/// A failed command: exit code and message.
struct Fail(i32, String);

impl From<RtError> for Fail {
    fn from(e: RtError) -> Self {
        Fail(e.exit_code(), format!("{}: {e}", e.class()))
    }
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail(EXIT_LOAD, msg.into())
}

/// Parse `args` (including the program name) and execute; returns the
/// process exit code.
pub fn main_with(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_LOAD } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, Fail> {
    match cmd {
        Command::Run { file, args, common, stats } => cmd_run(&file, &args, &common, stats, out),
        Command::Infer { file, common } => cmd_infer(&file, &common, out),
        Command::Report { file, common, ir } => cmd_report(&file, &common, ir, out),
        Command::Bench { file, common, sizes, variants, modes, reps, parallel } => {
            let spec = BenchSpec { sizes, variants, modes, reps, parallel };
            cmd_bench(&file, &common, &spec, out)
        }
        Command::Test { paths, common } => cmd_test(&paths, &common, out),
    }
}

fn load(path: &Path) -> Result<Arc<Module>, Fail> {
    frontend::load_file(path).map(Arc::new).map_err(|e| Fail(EXIT_LOAD, e.to_string()))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Fail> {
    out.write_all(text.as_bytes()).map_err(|e| Fail(1, format!("write failed: {e}")))
}

fn stats_json(s: &ExecStats) -> Json {
    serde_json::to_value(s).unwrap_or(Json::Null)
}

fn cmd_run(file: &Path, args: &[String], c: &Common, show_stats: bool, out: &mut dyn Write) -> Result<i32, Fail> {
    let cfg = c.engine_config().map_err(usage)?;
    let m = load(file)?;
    let vals = args.iter().map(|a| parse_literal(a)).collect::<Result<Vec<_>, _>>().map_err(usage)?;
    let entry = c.entry.clone().unwrap_or_else(|| "main".to_string());
    let e = Engine::new(m.clone(), cfg);
    let result = e.run_toplevel().and_then(|_| {
        e.reseed(cfg.seed);
        e.call(&entry, vals)
    });
    let printed = e.take_output();
    let stats = e.stats();
    let violations = stats.type_violations + stats.dispatch_violations;
    let (code, value, error) = match &result {
        Ok(v) => (if violations > 0 { 1 } else { 0 }, Some(v.repr(&m.reg)), None),
        Err(err) => (err.exit_code(), None, Some(err)),
    };
    if c.json {
        let mut doc = json!({
            "entry": entry,
            "mode": cfg.mode.as_str(),
            "seed": cfg.seed,
            "output": printed,
            "value": value,
            "error": error.map(|e| json!({"class": e.class(), "message": e.to_string()})),
            "exit_code": code,
        });
        if show_stats {
            doc["stats"] = stats_json(&stats);
        }
        emit(out, &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap_or_default()))?;
    } else {
        emit(out, &printed)?;
        if let Some(v) = &value {
            emit(out, &format!("{v}\n"))?;
        }
        if show_stats {
            emit(out, &format!("{}\n", serde_json::to_string_pretty(&stats_json(&stats)).unwrap_or_default()))?;
        }
    }
    if let Some(err) = error {
        return Err(Fail(code, format!("{}: {err}", err.class())));
    }
    if violations > 0 {
        return Err(Fail(1, format!("checking mode found {violations} violations")));
    }
    Ok(code)
}

fn entry_and_types(m: &Module, c: &Common) -> Result<(String, crate::types::Type), Fail> {
    let entry = c.entry.clone().ok_or_else(|| usage("an entry function is required (-e NAME)"))?;
    let at = parse_argtypes(m, c.argtypes.as_deref().unwrap_or("()")).map_err(usage)?;
    Ok((entry, at))
}

fn cmd_infer(file: &Path, c: &Common, out: &mut dyn Write) -> Result<i32, Fail> {
    let cfg = c.engine_config().map_err(usage)?;
    let m = load(file)?;
    let (entry, at) = entry_and_types(&m, c)?;
    let e = Engine::new(m.clone(), cfg);
    let (method, _) = e.resolve(&entry, &at)?;
    let r = e.infer_entry(&entry, &at)?;
    let doc = r.to_json(&m, m.body_of(method));
    if c.json {
        emit(out, &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap_or_default()))?;
    } else {
        emit(out, &infer_text(&doc))?;
    }
    Ok(0)
}

fn s(v: &Json) -> String {
    match v {
        Json::String(s) => s.clone(),
        Json::Null => "-".into(),
        other => other.to_string(),
    }
}

fn infer_text(doc: &Json) -> String {
    let mut t = String::new();
    t.push_str(&format!("{}{} :: {}\n", s(&doc["function"]), s(&doc["argtypes"]), s(&doc["return"])));
    if doc["converged"] == Json::Bool(false) {
        t.push_str("  (did not converge; widened)\n");
    }
    t.push_str("slots:\n");
    for sl in doc["slots"].as_array().into_iter().flatten() {
        t.push_str(&format!("  {:<12} :: {}\n", s(&sl["name"]), s(&sl["type"])));
    }
    t.push_str("statements:\n");
    for st in doc["statements"].as_array().into_iter().flatten() {
        t.push_str(&format!(
            "  {:>3}.{:<3} line {:<4} {} :: {}\n",
            s(&st["block"]),
            s(&st["index"]),
            s(&st["line"]),
            s(&st["op"]),
            s(&st["type"])
        ));
    }
    t.push_str("call sites:\n");
    for cs in doc["call_sites"].as_array().into_iter().flatten() {
        let how = match &cs["resolved"] {
            Json::Null => format!("dynamic ({})", s(&cs["reason"])),
            r => format!("-> {}", s(r)),
        };
        t.push_str(&format!("  {}.{} {}{} {how}\n", s(&cs["block"]), s(&cs["index"]), s(&cs["function"]), s(&cs["argtypes"])));
    }
    let w = &doc["widenings"];
    t.push_str(&format!(
        "widenings: unions {} depth {} tuples {} recursion {} too_complex {}\n",
        s(&w["unions"]),
        s(&w["depth"]),
        s(&w["tuples"]),
        s(&w["recursion"]),
        s(&w["too_complex"])
    ));
    for d in doc["diagnostics"].as_array().into_iter().flatten() {
        t.push_str(&format!("diagnostic: {}\n", s(&d["message"])));
    }
    t
}

#[derive(Serialize)]
struct Summary {
    total: usize,
    resolved: usize,
    inlined: usize,
    dynamic: usize,
    ratio: f64,
}

fn summarize<'a>(reports: impl Iterator<Item = &'a FnReport>) -> Summary {
    let mut s = Summary { total: 0, resolved: 0, inlined: 0, dynamic: 0, ratio: 1.0 };
    for r in reports {
        s.total += r.total;
        s.resolved += r.resolved;
        s.inlined += r.inlined;
        s.dynamic += r.dynamic;
    }
    if s.total > 0 {
        s.ratio = s.resolved as f64 / s.total as f64;
    }
    s
}

fn cmd_report(file: &Path, c: &Common, show_ir: bool, out: &mut dyn Write) -> Result<i32, Fail> {
    let cfg = EngineConfig { mode: Mode::Optimized, ..c.engine_config().map_err(usage)? };
    let m = load(file)?;
    let e = Engine::new(m.clone(), cfg);
    let mut functions: Vec<FnReport> = Vec::new();
    let entry_report = match &c.entry {
        Some(_) => {
            let (entry, at) = entry_and_types(&m, c)?;
            let comp = e.compile_entry(&entry, &at)?;
            if show_ir && !c.json {
                emit(out, &comp.func.display(&m.reg))?;
            }
            Some(comp.report.clone())
        }
        None => {
            // report whatever running the program compiles
            e.run_toplevel()?;
            if m.table.has_function("main") {
                e.call("main", vec![])?;
            }
            None
        }
    };
    for inst in e.instances() {
        if let Some(comp) = inst.compiled() {
            if entry_report.as_ref().is_some_and(|r| *r == comp.report) {
                continue;
            }
            functions.push(comp.report.clone());
        }
    }
    functions.sort_by(|a, b| (&a.function, &a.argtypes).cmp(&(&b.function, &b.argtypes)));
    let summary = summarize(entry_report.iter().chain(functions.iter()));
    let method_counts: std::collections::BTreeMap<String, usize> =
        m.table.functions().map(|(f, ms)| (f.to_string(), ms.len())).collect();
    let warnings = m.table.warnings().to_vec();
    if c.json {
        let doc = json!({
            "config": {
                "devirtualize": cfg.opt.devirtualize,
                "inline": cfg.opt.inline,
                "inline_max": cfg.opt.inline_max,
                "widening": cfg.widening,
            },
            "entry": entry_report,
            "functions": functions,
            "summary": summary,
            "method_counts": method_counts,
            "warnings": warnings,
        });
        emit(out, &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap_or_default()))?;
        return Ok(0);
    }
    let mut t = String::new();
    let show = |t: &mut String, r: &FnReport, detail: bool| {
        t.push_str(&format!(
            "{}{}: {} sites, {} resolved ({} inlined), {} dynamic, {} unreachable, ratio {:.3}\n",
            r.function,
            r.argtypes,
            r.total,
            r.resolved,
            r.inlined,
            r.dynamic,
            r.unreachable,
            r.ratio()
        ));
        if detail {
            for site in &r.sites {
                let how = match site.outcome {
                    crate::opt::Outcome::Dynamic => format!("dynamic: {}", site.reason.as_deref().unwrap_or("?")),
                    o => format!("{} -> {}", if o == crate::opt::Outcome::Inlined { "inlined" } else { "direct" }, site.target.as_deref().unwrap_or("?")),
                };
                t.push_str(&format!("    line {:<4} {}{}  {how}\n", site.line, site.function, site.argtypes));
            }
        }
    };
    if let Some(r) = &entry_report {
        show(&mut t, r, true);
        if !functions.is_empty() {
            t.push_str("callees compiled:\n");
        }
    }
    for r in &functions {
        show(&mut t, r, entry_report.is_none());
    }
    t.push_str(&format!(
        "total: {} sites, {} resolved ({} inlined), {} dynamic, ratio {:.3}\n",
        summary.total, summary.resolved, summary.inlined, summary.dynamic, summary.ratio
    ));
    for w in &warnings {
        t.push_str(&format!("warning: {w}\n"));
    }
    emit(out, &t)?;
    Ok(0)
}

pub struct BenchSpec {
    pub sizes: Vec<i64>,
    pub variants: Vec<String>,
    pub modes: Vec<Mode>,
    pub reps: usize,
    pub parallel: bool,
}

/// One measured (size, variant, mode) cell.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub size: i64,
    pub variant: String,
    pub mode: Mode,
    pub median_time: f64,
    pub min_time: f64,
    pub times: Vec<f64>,
    pub allocations: u64,
    pub allocated_cells: u64,
    pub dynamic_dispatches: u64,
    pub direct_calls: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRatio {
    pub variant: String,
    pub mode: Mode,
    pub from: i64,
    pub to: i64,
    pub ratio: f64,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Measure `variant(n)` for each size: one untimed warm-up call compiles
/// the instances, then `reps` timed calls from the same seed.
pub fn bench_one(m: &Arc<Module>, cfg: EngineConfig, variant: &str, sizes: &[i64], reps: usize) -> Result<Vec<BenchRow>, RtError> {
    let e = Engine::new(m.clone(), cfg);
    e.run_toplevel()?;
    let mut rows = Vec::new();
    for &n in sizes {
        e.reseed(cfg.seed);
        e.call(variant, vec![crate::runtime::Value::Int(n)])?;
        let mut times = Vec::with_capacity(reps);
        let mut last = ExecStats::default();
        for _ in 0..reps {
            e.reset_stats();
            e.reseed(cfg.seed);
            let t0 = Instant::now();
            e.call(variant, vec![crate::runtime::Value::Int(n)])?;
            times.push(t0.elapsed().as_secs_f64());
            last = e.stats();
        }
        e.take_output();
        rows.push(BenchRow {
            size: n,
            variant: variant.to_string(),
            mode: cfg.mode,
            median_time: median(&times),
            min_time: times.iter().copied().fold(f64::INFINITY, f64::min),
            times,
            allocations: last.allocations,
            allocated_cells: last.allocated_cells,
            dynamic_dispatches: last.dynamic_dispatches,
            direct_calls: last.direct_calls,
        });
    }
    Ok(rows)
}

/// t(2n)/t(n) for every size whose double was also measured.
pub fn scaling_ratios(rows: &[BenchRow]) -> Vec<ScalingRatio> {
    let mut out = Vec::new();
    for a in rows {
        for b in rows {
            if a.variant == b.variant && a.mode == b.mode && b.size == 2 * a.size && a.median_time > 0.0 {
                out.push(ScalingRatio {
                    variant: a.variant.clone(),
                    mode: a.mode,
                    from: a.size,
                    to: b.size,
                    ratio: b.median_time / a.median_time,
                });
            }
        }
    }
    out
}

fn cmd_bench(file: &Path, c: &Common, spec: &BenchSpec, out: &mut dyn Write) -> Result<i32, Fail> {
    if spec.reps < MIN_REPS {
        return Err(usage(format!("--reps must be at least {MIN_REPS}")));
    }
    if spec.sizes.is_empty() || spec.sizes.iter().any(|&n| n < 0) {
        return Err(usage("--sizes must list non-negative sizes"));
    }
    let base = c.engine_config().map_err(usage)?;
    let m = load(file)?;
    let mut variants = spec.variants.clone();
    if variants.is_empty() {
        variants.push(c.entry.clone().ok_or_else(|| usage("give an entry (-e) or --variants"))?);
    }
    let mut sizes = spec.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let jobs: Vec<(String, Mode)> =
        variants.iter().flat_map(|v| spec.modes.iter().map(move |&md| (v.clone(), md))).collect();
    let results: Vec<Result<Vec<BenchRow>, RtError>> = if spec.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(v, md)| {
                    let m = m.clone();
                    let cfg = EngineConfig { mode: *md, ..base };
                    let sizes = &sizes;
                    std::thread::Builder::new()
                        .stack_size(1 << 30)
                        .spawn_scoped(scope, move || bench_one(&m, cfg, v, sizes, spec.reps))
                        .expect("spawn bench thread")
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))).collect()
        })
    } else {
        jobs.iter().map(|(v, md)| bench_one(&m, EngineConfig { mode: *md, ..base }, v, &sizes, spec.reps)).collect()
    };
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let ratios = scaling_ratios(&rows);
    if c.json {
        let doc = json!({"seed": base.seed, "reps": spec.reps, "rows": rows, "ratios": ratios});
        emit(out, &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap_or_default()))?;
        return Ok(0);
    }
    let mut t = format!(
        "{:>6}  {:<24} {:<10} {:>12} {:>12} {:>10} {:>12} {:>10}\n",
        "size", "variant", "mode", "median_s", "min_s", "allocs", "dyn_calls", "direct"
    );
    for r in &rows {
        t.push_str(&format!(
            "{:>6}  {:<24} {:<10} {:>12.6} {:>12.6} {:>10} {:>12} {:>10}\n",
            r.size,
            r.variant,
            r.mode.as_str(),
            r.median_time,
            r.min_time,
            r.allocations,
            r.dynamic_dispatches,
            r.direct_calls
        ));
    }
    for r in &ratios {
        t.push_str(&format!("t({})/t({}) {} {}: {:.2}\n", r.to, r.from, r.variant, r.mode.as_str(), r.ratio));
    }
    emit(out, &t)?;
    Ok(0)
}

fn cmd_test(paths: &[PathBuf], c: &Common, out: &mut dyn Write) -> Result<i32, Fail> {
    let base = c.engine_config().map_err(usage)?;
    let roots = if paths.is_empty() { vec![PathBuf::from("corpus")] } else { paths.to_vec() };
    let mut files = Vec::new();
    for r in &roots {
        if !r.exists() {
            return Err(usage(format!("{} does not exist", r.display())));
        }
        files.extend(corpus::discover(r).map_err(usage)?);
    }
    let outcomes: Vec<corpus::FileOutcome> = files.iter().map(|f| corpus::check_file(f, base)).collect();
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    if c.json {
        let doc = json!({"files": outcomes, "failed": failed});
        emit(out, &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap_or_default()))?;
    } else {
        let mut t = String::new();
        for o in &outcomes {
            let bad = o.checks.iter().filter(|c| !c.ok).count();
            t.push_str(&format!("{} {} ({} checks, {} failed)\n", if bad == 0 { "PASS" } else { "FAIL" }, o.file, o.checks.len(), bad));
            for ch in o.checks.iter().filter(|c| !c.ok) {
                t.push_str(&format!("    {}: {}\n", ch.name, ch.detail));
            }
        }
        t.push_str(&format!("{} files, {} failed\n", outcomes.len(), failed));
        emit(out, &t)?;
    }
    Ok(if failed == 0 { 0 } else { 1 })
}
