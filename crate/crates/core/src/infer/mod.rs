//! Forward dataflow type inference over the block IR.
//!
//! Each function is analyzed with a worklist over its blocks; block entry
//! states hold one type per slot and are merged by join followed by
//! widening. Calls are inferred recursively per (method, argument types)
//! and memoized; recursive cycles are resolved by iterating from a
//! provisional `Bottom` return type up to a fixpoint.

mod widen;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::dispatch::{DispatchError, MethodId, Resolved};
use crate::frontend::lower::Module;
use crate::ir::{Arg, BlockId, IrFunction, Lit, Op, Terminator};
use crate::runtime::intrinsics::result_type;
use crate::runtime::value::{array_parts, Builtins};
use crate::types::{fresh_name, Name, Registry, Type, TypeVar};

pub use widen::{narrow, tuple_elems};

/// Precision limits that guarantee termination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WideningConfig {
    pub max_union: usize,
    pub max_depth: usize,
    pub max_tuple: usize,
    pub max_call_recursion: usize,
}

impl Default for WideningConfig {
    fn default() -> Self {
        WideningConfig { max_union: 4, max_depth: 3, max_tuple: 8, max_call_recursion: 3 }
    }
}

impl WideningConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_union == 0 || self.max_depth == 0 || self.max_tuple == 0 || self.max_call_recursion == 0 {
            return Err("widening limits must all be at least 1".into());
        }
        Ok(())
    }
}

/// How many times each widening rule fired.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Widenings {
    pub unions: u64,
    pub depth: u64,
    pub tuples: u64,
    pub recursion: u64,
    /// Call sites whose argument types had too many union expansions.
    pub too_complex: u64,
}

impl Widenings {
    fn add(&mut self, o: &Widenings) {
        self.unions += o.unions;
        self.depth += o.depth;
        self.tuples += o.tuples;
        self.recursion += o.recursion;
        self.too_complex += o.too_complex;
    }
}

/// Why a call site could not be bound to a single method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unresolved {
    NonLeaf,
    MultipleMatches,
    Ambiguous,
    UnknownFunction,
    NoMethod,
}

impl Unresolved {
    pub fn as_str(self) -> &'static str {
        match self {
            Unresolved::NonLeaf => "non-leaf",
            Unresolved::MultipleMatches => "multiple-matches",
            Unresolved::Ambiguous => "ambiguous",
            Unresolved::UnknownFunction => "unknown-function",
            Unresolved::NoMethod => "no-method",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CallSite {
    pub block: BlockId,
    pub stmt: usize,
    pub fname: Name,
    /// Inferred argument tuple, splats flattened.
    pub argtypes: Type,
    /// Type of each argument expression as written (splats not expanded).
    pub arg_types: Vec<Type>,
    pub matching: Vec<MethodId>,
    pub resolved: Option<Resolved>,
    pub reason: Option<Unresolved>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub block: BlockId,
    pub stmt: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct InferenceResult {
    pub name: Name,
    pub method: Option<MethodId>,
    pub argtypes: Type,
    /// Static parameter values, when the argument types determine them.
    pub witnesses: Option<Arc<[Type]>>,
    /// Join of every type a slot may hold.
    pub slot_types: Vec<Type>,
    /// Result type of each statement, indexed `[block][stmt]`; `Bottom`
    /// for statements never reached.
    pub stmt_types: Vec<Vec<Type>>,
    /// Type of the operand of each `TypeAssert`/`Convert`, keyed by position.
    pub operand_types: HashMap<(BlockId, usize), Type>,
    pub call_sites: Vec<CallSite>,
    pub return_type: Type,
    pub converged: bool,
    pub widenings: Widenings,
    pub diagnostics: Vec<Diagnostic>,
    pub reached: Vec<bool>,
}

impl InferenceResult {
    pub fn call_site(&self, block: BlockId, stmt: usize) -> Option<&CallSite> {
        self.call_sites.iter().find(|c| c.block == block && c.stmt == stmt)
    }

    /// The `code_typed`-style JSON view.
    pub fn to_json(&self, m: &Module, func: &IrFunction) -> Json {
        let reg = &m.reg;
        let show = |t: &Type| reg.show(t);
        let slots: Vec<Json> = func
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "slot": i,
                    "name": s.name,
                    "declared": s.declared.as_ref().map(show),
                    "type": show(&self.slot_types[i]),
                })
            })
            .collect();
        let mut stmts = Vec::new();
        for (b, blk) in func.blocks.iter().enumerate() {
            for (i, st) in blk.stmts.iter().enumerate() {
                stmts.push(json!({
                    "block": b,
                    "index": i,
                    "line": st.span.line,
                    "dst": st.dst,
                    "op": crate::ir::show_op(&st.op, reg),
                    "type": show(&self.stmt_types[b][i]),
                }));
            }
        }
        let sites: Vec<Json> = self
            .call_sites
            .iter()
            .map(|c| {
                json!({
                    "block": c.block,
                    "index": c.stmt,
                    "function": &*c.fname,
                    "argtypes": show(&c.argtypes),
                    "matching": c.matching.iter().map(|&id| method_label(m, id)).collect::<Vec<_>>(),
                    "resolved": c.resolved.as_ref().map(|r| method_label(m, r.method)),
                    "reason": c.reason.map(Unresolved::as_str),
                })
            })
            .collect();
        json!({
            "function": &*self.name,
            "argtypes": show(&self.argtypes),
            "return": show(&self.return_type),
            "converged": self.converged,
            "slots": slots,
            "statements": stmts,
            "call_sites": sites,
            "widenings": self.widenings,
            "diagnostics": self.diagnostics,
        })
    }
}

/// `name(sig) at line:col`, for reports.
pub fn method_label(m: &Module, id: MethodId) -> String {
    let meth = m.table.method(id);
    format!("{}{} at {}", meth.fname, m.reg.show(&meth.sig), meth.span)
}

type Key = (MethodId, Type);

struct Frame {
    key: Key,
    ret: Type,
    hit: bool,
    /// Shallowest stack frame whose provisional result this frame used.
    deps: usize,
}

const MAX_FIXPOINT_ITERS: usize = 20;
const MAX_STACK: usize = 48;
const DEFAULT_BUDGET: u64 = 4_000_000;

/// Interprocedural inference with a cache shared across queries.
pub struct Inferencer {
    pub cfg: WideningConfig,
    cache: HashMap<Key, Arc<InferenceResult>>,
    provisional: HashMap<Key, (Arc<InferenceResult>, usize)>,
    stack: Vec<Frame>,
    steps: u64,
    budget: u64,
    /// Totals over every function analyzed.
    pub totals: Widenings,
}

impl Inferencer {
    pub fn new(cfg: WideningConfig) -> Self {
        Inferencer {
            cfg,
            cache: HashMap::new(),
            provisional: HashMap::new(),
            stack: Vec::new(),
            steps: 0,
            budget: DEFAULT_BUDGET,
            totals: Widenings::default(),
        }
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    /// Infer `method` for arguments of type `argtypes` (a tuple type).
    pub fn infer(&mut self, m: &Module, method: MethodId, argtypes: &Type) -> Arc<InferenceResult> {
        let at = m.reg.canonical(argtypes);
        if self.stack.is_empty() {
            self.steps = 0;
        }
        if let Some(r) = self.cache.get(&(method, at.clone())) {
            return r.clone();
        }
        let r = self.analyze_frame(m, method, at);
        if self.stack.is_empty() {
            // anything still provisional was computed against a finished root
            let pending: Vec<_> = self.provisional.drain().collect();
            for (k, (v, _)) in pending {
                self.cache.entry(k).or_insert(v);
            }
        }
        r
    }

    /// Infer a body that is not a method (the top level).
    pub fn infer_body(&mut self, m: &Module, func: &IrFunction) -> InferenceResult {
        self.steps = 0;
        let r = self.analyze(m, func, None, Type::tuple(vec![]), None);
        let pending: Vec<_> = self.provisional.drain().collect();
        for (k, (v, _)) in pending {
            self.cache.entry(k).or_insert(v);
        }
        r
    }

    fn call_method(&mut self, m: &Module, method: MethodId, at: &Type) -> Type {
        let at = m.reg.canonical(at);
        let key = (method, at);
        if let Some(r) = self.cache.get(&key) {
            return r.return_type.clone();
        }
        if let Some((r, anc)) = self.provisional.get(&key) {
            let (ret, anc) = (r.return_type.clone(), *anc);
            self.stack[anc].hit = true;
            if let Some(top) = self.stack.last_mut() {
                top.deps = top.deps.min(anc);
            }
            return ret;
        }
        if let Some(i) = self.stack.iter().position(|f| f.key == key) {
            self.stack[i].hit = true;
            let ret = self.stack[i].ret.clone();
            if let Some(top) = self.stack.last_mut() {
                top.deps = top.deps.min(i);
            }
            return ret;
        }
        if self.steps > self.budget || self.stack.len() >= MAX_STACK {
            self.totals.too_complex += 1;
            return Type::Top;
        }
        let same = self.stack.iter().filter(|f| f.key.0 == method).count();
        if same >= self.cfg.max_call_recursion {
            let sig = m.reg.canonical(&m.table.method(method).sig);
            if sig != key.1 {
                self.totals.recursion += 1;
                return self.call_method(m, method, &sig);
            }
        }
        self.analyze_frame(m, method, key.1).return_type.clone()
    }

    fn analyze_frame(&mut self, m: &Module, method: MethodId, at: Type) -> Arc<InferenceResult> {
        let key = (method, at.clone());
        let idx = self.stack.len();
        self.stack.push(Frame { key: key.clone(), ret: Type::Bottom, hit: false, deps: idx });
        let body = m.body_of(method);
        let witnesses = if m.reg.is_leaf(&at) {
            m.reg
                .match_signature(&at, &m.table.method(method).raw_sig)
                .filter(|w| w.iter().all(|t| t.free_vars().is_empty()))
                .map(Arc::from)
        } else {
            None
        };
        let mut iters = 0;
        let result = loop {
            let mut r = self.analyze(m, body, Some(method), at.clone(), witnesses.clone());
            let f = &mut self.stack[idx];
            if !f.hit || m.reg.subtype(&r.return_type, &f.ret) {
                break r;
            }
            iters += 1;
            self.provisional.retain(|_, (_, anc)| *anc < idx);
            if iters >= MAX_FIXPOINT_ITERS {
                // give up on precision: one sound pass with an unknown return
                self.stack[idx].ret = Type::Top;
                self.stack[idx].hit = false;
                r = self.analyze(m, body, Some(method), at.clone(), witnesses.clone());
                r.return_type = Type::Top;
                r.converged = false;
                break r;
            }
            let joined = m.reg.join(&f.ret, &r.return_type);
            let mut w = Widenings::default();
            f.ret = widen::widen(&m.reg, &self.cfg, &joined, &mut w);
            f.hit = false;
            self.totals.add(&w);
        };
        let frame = self.stack.pop().expect("pushed above");
        let result = Arc::new(result);
        if frame.deps < idx {
            for (_, anc) in self.provisional.values_mut() {
                if *anc >= idx {
                    *anc = frame.deps;
                }
            }
            self.provisional.insert(key, (result.clone(), frame.deps));
            if let Some(parent) = self.stack.last_mut() {
                parent.deps = parent.deps.min(frame.deps);
            }
        } else {
            let done: Vec<Key> =
                self.provisional.iter().filter(|(_, (_, anc))| *anc >= idx).map(|(k, _)| k.clone()).collect();
            for k in done {
                let (v, _) = self.provisional.remove(&k).expect("listed above");
                self.cache.insert(k, v);
            }
            self.cache.insert(key, result.clone());
        }
        result
    }

    /// One pass of the intraprocedural worklist algorithm.
    fn analyze(
        &mut self,
        m: &Module,
        func: &IrFunction,
        method: Option<MethodId>,
        at: Type,
        witnesses: Option<Arc<[Type]>>,
    ) -> InferenceResult {
        let reg = &m.reg;
        let nslots = func.slots.len();
        let nblocks = func.blocks.len();
        let mut cx = FnCx {
            m,
            func,
            witnesses: witnesses.clone(),
            widenings: Widenings::default(),
            diagnostics: Vec::new(),
            sites: HashMap::new(),
            operand_types: HashMap::new(),
        };

        let mut entry: Vec<Option<Vec<Type>>> = vec![None; nblocks];
        let mut init = vec![Type::Bottom; nslots];
        let args = tuple_elems(reg, &at, func.nargs, func.vararg);
        for (i, t) in args.into_iter().enumerate() {
            init[i] = t;
        }
        entry[0] = Some(init);
        let mut stmt_types: Vec<Vec<Type>> =
            func.blocks.iter().map(|b| vec![Type::Bottom; b.stmts.len()]).collect();
        let mut ret = Type::Bottom;
        let mut work: BTreeSet<BlockId> = BTreeSet::from([0]);

        while let Some(b) = work.pop_first() {
            let blk = &func.blocks[b];
            let mut st = entry[b].clone().expect("queued blocks have states");
            let mut live = true;
            if let Some(h) = blk.handler {
                merge_into(reg, &self.cfg, &mut entry, &mut work, h, &st, &mut cx.widenings);
            }
            for (i, stmt) in blk.stmts.iter().enumerate() {
                self.steps += 1;
                let t = self.transfer(&mut cx, &st, b, i, &stmt.op);
                let t = widen::widen(reg, &self.cfg, &t, &mut cx.widenings);
                let prev = &stmt_types[b][i];
                if !reg.subtype(&t, prev) {
                    let j = reg.join(prev, &t);
                    stmt_types[b][i] = widen::widen(reg, &self.cfg, &j, &mut cx.widenings);
                }
                if t.is_bottom() && !matches!(stmt.op, Op::Const(_)) {
                    // this statement never completes normally
                    live = false;
                    break;
                }
                if let Some(d) = stmt.dst {
                    st[d] = t;
                    if let Some(h) = blk.handler {
                        merge_into(reg, &self.cfg, &mut entry, &mut work, h, &st, &mut cx.widenings);
                    }
                }
            }
            if !live {
                continue;
            }
            match &blk.term {
                Terminator::Goto(n) => merge_into(reg, &self.cfg, &mut entry, &mut work, *n, &st, &mut cx.widenings),
                Terminator::Branch { cond, then, els } => {
                    let c = &st[*cond];
                    if !c.is_bottom() {
                        merge_into(reg, &self.cfg, &mut entry, &mut work, *then, &st, &mut cx.widenings);
                        merge_into(reg, &self.cfg, &mut entry, &mut work, *els, &st, &mut cx.widenings);
                    }
                }
                Terminator::Return(s) => {
                    let j = reg.join(&ret, &st[*s]);
                    ret = widen::widen(reg, &self.cfg, &j, &mut cx.widenings);
                }
                Terminator::Unreachable => {}
            }
        }

        let mut slot_types = vec![Type::Bottom; nslots];
        if let Some(init) = &entry[0] {
            for i in 0..func.nargs.min(nslots) {
                slot_types[i] = init[i].clone();
            }
        }
        for (b, blk) in func.blocks.iter().enumerate() {
            for (i, stmt) in blk.stmts.iter().enumerate() {
                if let Some(d) = stmt.dst {
                    slot_types[d] = reg.join(&slot_types[d], &stmt_types[b][i]);
                }
            }
        }
        let mut call_sites: Vec<CallSite> = cx.sites.into_values().collect();
        call_sites.sort_by_key(|c| (c.block, c.stmt));
        self.totals.add(&cx.widenings);
        InferenceResult {
            name: func.name.clone(),
            method,
            argtypes: at,
            witnesses,
            slot_types,
            stmt_types,
            operand_types: cx.operand_types,
            call_sites,
            return_type: ret,
            converged: true,
            widenings: cx.widenings,
            diagnostics: cx.diagnostics,
            reached: entry.iter().map(Option::is_some).collect(),
        }
    }

    fn transfer(&mut self, cx: &mut FnCx, st: &[Type], b: BlockId, i: usize, op: &Op) -> Type {
        let m = cx.m;
        let reg = &m.reg;
        let bt = &m.builtins;
        match op {
            Op::Const(lit) => match lit {
                Lit::Int(_) => bt.int.clone(),
                Lit::Float(_) => bt.float.clone(),
                Lit::Bool(_) => bt.bool.clone(),
                Lit::Str(_) => bt.string.clone(),
                Lit::Nothing => bt.nothing.clone(),
                Lit::Type { ty, open } => match cx.close(ty, *open) {
                    Some(t) => Builtins::type_of_type(t),
                    None => any_type_value(),
                },
            },
            Op::Move(s) => st[*s].clone(),
            Op::Call { fname, .. } | Op::Invoke { fname, .. } => {
                let args: Vec<Arg> = match op {
                    Op::Call { args, .. } => args.clone(),
                    Op::Invoke { args, .. } => args.iter().map(|&s| Arg::Plain(s)).collect(),
                    _ => unreachable!(),
                };
                let at = call_argtypes(reg, st, &args);
                if at.is_bottom() {
                    return Type::Bottom;
                }
                let (t, site) = self.infer_call(cx, fname, &at);
                if let Some(reason) = site.reason {
                    if matches!(reason, Unresolved::NoMethod | Unresolved::Ambiguous | Unresolved::UnknownFunction) {
                        cx.diagnostics.push(Diagnostic {
                            block: b,
                            stmt: i,
                            message: format!(
                                "call {}{} will fail: {}",
                                fname,
                                reg.show(&at),
                                reason.as_str()
                            ),
                        });
                    }
                }
                let arg_types = args.iter().map(|a| st[a.slot()].clone()).collect();
                cx.sites.insert((b, i), CallSite { block: b, stmt: i, fname: fname.clone(), argtypes: at, arg_types, ..site });
                t
            }
            Op::Intrinsic(intr, args) => {
                let ts: Vec<Type> = args.iter().map(|&s| st[s].clone()).collect();
                result_type(*intr, &ts, reg, bt)
            }
            Op::New { ty, open, args } => {
                if args.iter().any(|&s| st[s].is_bottom()) {
                    return Type::Bottom;
                }
                match cx.close(ty, *open) {
                    Some(t) => t,
                    None => match ty.head() {
                        Some(h) => reg.partial(h, vec![]).unwrap_or(Type::Top),
                        None => Type::Top,
                    },
                }
            }
            Op::GetField(s, name) => field_type(reg, &st[*s], name),
            Op::SetField(..) => bt.nothing.clone(),
            Op::TypeAssert { src, ty, open } => {
                let input = st[*src].clone();
                cx.operand_types.insert((b, i), input.clone());
                let Some(t) = cx.close(ty, *open) else { return input };
                let out = narrow(reg, &input, &t);
                if out.is_bottom() && !input.is_bottom() {
                    cx.diagnostics.push(Diagnostic {
                        block: b,
                        stmt: i,
                        message: format!(
                            "assertion cannot hold: {} is never a {}",
                            reg.show(&input),
                            reg.show(&t)
                        ),
                    });
                }
                out
            }
            Op::Convert { src, ty, open } => {
                let input = st[*src].clone();
                cx.operand_types.insert((b, i), input.clone());
                if input.is_bottom() {
                    return Type::Bottom;
                }
                let Some(t) = cx.close(ty, *open) else { return Type::Top };
                if reg.subtype(&input, &t) {
                    input
                } else {
                    t
                }
            }
            Op::StaticParam(k) => match &cx.witnesses {
                Some(w) => Builtins::type_of_type(w[*k].clone()),
                None => {
                    let v = &cx.func.static_params[*k];
                    let upper =
                        if v.upper.free_vars().is_empty() { (*v.upper).clone() } else { Type::Top };
                    let x = TypeVar::new(fresh_name(&v.name), Type::Bottom, upper);
                    reg.canonical(&Type::exists(x.clone(), Builtins::type_of_type(x.occurrence())))
                }
            },
            Op::Tuple(args) => call_argtypes(reg, st, args),
            Op::Destructure(s, k) => element_type(reg, bt, &st[*s], *k),
            Op::Caught => bt.string.clone(),
        }
    }

    /// Result type of calling `fname` with arguments of type `at`, and the
    /// call-site record.
    fn infer_call(&mut self, cx: &mut FnCx, fname: &Name, at: &Type) -> (Type, CallSite) {
        let m = cx.m;
        let reg = &m.reg;
        let mut site = CallSite {
            block: 0,
            stmt: 0,
            fname: fname.clone(),
            argtypes: at.clone(),
            arg_types: vec![],
            matching: vec![],
            resolved: None,
            reason: None,
        };
        if !m.table.has_function(fname) {
            site.reason = Some(Unresolved::UnknownFunction);
            return (Type::Bottom, site);
        }
        if reg.is_leaf(at) {
            return match m.table.dispatch(reg, fname, at) {
                Ok(res) => {
                    site.matching = vec![res.method];
                    let t = self.call_method(m, res.method, at);
                    site.resolved = Some(res);
                    (t, site)
                }
                Err(DispatchError::Ambiguous { candidates, .. }) => {
                    site.matching = candidates;
                    site.reason = Some(Unresolved::Ambiguous);
                    (Type::Bottom, site)
                }
                Err(_) => {
                    site.reason = Some(Unresolved::NoMethod);
                    (Type::Bottom, site)
                }
            };
        }
        let matching = m.table.matching_methods(reg, fname, at);
        if matching.is_empty() {
            site.reason = Some(Unresolved::NoMethod);
            return (Type::Bottom, site);
        }
        site.reason = Some(if matching.len() == 1 { Unresolved::NonLeaf } else { Unresolved::MultipleMatches });
        site.matching = matching;
        let expansions: Vec<Type> = match at {
            Type::Union(ms) => ms.clone(),
            other => vec![other.clone()],
        };
        if expansions.len() > self.cfg.max_union {
            cx.widenings.too_complex += 1;
            return (Type::Top, site);
        }
        let mut ret = Type::Bottom;
        for e in &expansions {
            if reg.is_leaf(e) {
                if let Ok(res) = m.table.dispatch(reg, fname, e) {
                    let t = self.call_method(m, res.method, e);
                    ret = reg.join(&ret, &t);
                }
                continue;
            }
            for mth in m.table.matching_methods(reg, fname, e) {
                let sig = &m.table.method(mth).sig;
                let at_m = narrow(reg, e, sig);
                if at_m.is_bottom() {
                    continue;
                }
                let t = self.call_method(m, mth, &at_m);
                ret = reg.join(&ret, &t);
                if ret.is_top() {
                    break;
                }
            }
        }
        let ret = widen::widen(reg, &self.cfg, &ret, &mut cx.widenings);
        (ret, site)
    }
}

struct FnCx<'a> {
    m: &'a Module,
    func: &'a IrFunction,
    witnesses: Option<Arc<[Type]>>,
    widenings: Widenings,
    diagnostics: Vec<Diagnostic>,
    sites: HashMap<(BlockId, usize), CallSite>,
    operand_types: HashMap<(BlockId, usize), Type>,
}

impl FnCx<'_> {
    /// A type mentioning static parameters, with their values substituted;
    /// `None` when the values are unknown.
    fn close(&self, ty: &Type, open: bool) -> Option<Type> {
        if !open {
            return Some(ty.clone());
        }
        let w = self.witnesses.as_ref()?;
        let pairs: Vec<(Name, Type)> =
            self.func.static_params.iter().map(|v| v.name.clone()).zip(w.iter().cloned()).collect();
        Some(self.m.reg.canonical(&ty.subst_all(&pairs)))
    }
}

fn any_type_value() -> Type {
    let x = TypeVar::unbounded(fresh_name("T"));
    Type::exists(x.clone(), Builtins::type_of_type(x.occurrence()))
}

fn merge_into(
    reg: &Registry,
    cfg: &WideningConfig,
    entry: &mut [Option<Vec<Type>>],
    work: &mut BTreeSet<BlockId>,
    target: BlockId,
    st: &[Type],
    w: &mut Widenings,
) {
    match &mut entry[target] {
        None => {
            entry[target] = Some(st.to_vec());
            work.insert(target);
        }
        Some(old) => {
            let mut changed = false;
            for (o, n) in old.iter_mut().zip(st) {
                if !reg.subtype(n, o) {
                    let j = reg.join(o, n);
                    *o = widen::widen(reg, cfg, &j, w);
                    changed = true;
                }
            }
            if changed {
                work.insert(target);
            }
        }
    }
}

/// Argument tuple type of a call, with splatted arguments flattened.
fn call_argtypes(reg: &Registry, st: &[Type], args: &[Arg]) -> Type {
    let mut fixed = Vec::with_capacity(args.len());
    let mut rest: Option<Type> = None;
    for a in args {
        match *a {
            Arg::Plain(s) => {
                let t = st[s].clone();
                if t.is_bottom() {
                    return Type::Bottom;
                }
                match &mut rest {
                    Some(r) => *r = reg.join(r, &t),
                    None => fixed.push(t),
                }
            }
            Arg::Splat(s) => {
                let t = &st[s];
                if t.is_bottom() {
                    return Type::Bottom;
                }
                match splat_elems(reg, t) {
                    Ok(items) => match &mut rest {
                        Some(r) => {
                            for it in &items {
                                *r = reg.join(r, it);
                            }
                        }
                        None => fixed.extend(items),
                    },
                    Err(elt) => {
                        let r = rest.take().unwrap_or(Type::Bottom);
                        rest = Some(reg.join(&r, &elt));
                    }
                }
            }
        }
    }
    let t = match rest {
        Some(r) => Type::vararg_tuple(fixed, r),
        None => Type::tuple(fixed),
    };
    reg.canonical(&t)
}

/// The elements a splatted value contributes: exactly known, or an
/// unknown number of values of the given type.
fn splat_elems(reg: &Registry, t: &Type) -> Result<Vec<Type>, Type> {
    match t {
        Type::Tuple(tt) if tt.vararg.is_none() => Ok(tt.fixed.clone()),
        Type::Tuple(tt) => Err(reg.join_all(tt.fixed.iter().chain(tt.vararg.as_deref()))),
        Type::Union(ms) => {
            let mut acc = Type::Bottom;
            for mm in ms {
                let e = match splat_elems(reg, mm) {
                    Ok(items) => reg.join_all(items.iter()),
                    Err(e) => e,
                };
                acc = reg.join(&acc, &e);
            }
            Err(acc)
        }
        other => {
            if let Some((elt, _)) = array_parts(other) {
                if elt.free_vars().is_empty() {
                    return Err(elt.clone());
                }
            }
            match other.head().map(|h| &**h) {
                Some("UnitRange" | "StepRange" | "Range") => Err(Type::tag("Int64", vec![])),
                _ => Err(Type::Top),
            }
        }
    }
}

/// Type of `x.name` for `x` of type `t`.
fn field_type(reg: &Registry, t: &Type, name: &str) -> Type {
    match t {
        Type::Bottom => Type::Bottom,
        Type::Union(ms) => {
            let mut acc = Type::Bottom;
            for mm in ms {
                acc = reg.join(&acc, &field_type(reg, mm, name));
            }
            acc
        }
        Type::Nominal(n) => match reg.fields_of(n) {
            Some(fs) => match fs.iter().find(|(f, _)| &**f == name) {
                Some((_, ft)) if ft.free_vars().is_empty() => reg.canonical(ft),
                Some(_) => Type::Top,
                None => Type::Bottom,
            },
            None => {
                if reg.decl(&n.name).is_some_and(|d| d.kind == crate::types::Kind::Tag) {
                    Type::Bottom
                } else {
                    Type::Top
                }
            }
        },
        Type::Exists(..) => match t.unwrap_exists() {
            Type::Nominal(n) => match reg.fields_of(n) {
                Some(fs) => match fs.iter().find(|(f, _)| &**f == name) {
                    Some((_, ft)) => widen::rewrap(reg, ft, &t.binders()),
                    None => Type::Bottom,
                },
                None => Type::Top,
            },
            _ => Type::Top,
        },
        _ => Type::Top,
    }
}

/// Type of element `k` (0-based) when destructuring a value of type `t`.
fn element_type(reg: &Registry, b: &Builtins, t: &Type, k: usize) -> Type {
    match t {
        Type::Bottom => Type::Bottom,
        Type::Tuple(tt) => match tt.fixed.get(k) {
            Some(e) => e.clone(),
            None => tt.vararg.as_deref().cloned().unwrap_or(Type::Bottom),
        },
        Type::Union(ms) => {
            let mut acc = Type::Bottom;
            for mm in ms {
                acc = reg.join(&acc, &element_type(reg, b, mm, k));
            }
            acc
        }
        Type::Exists(..) => {
            let inner = element_type(reg, b, t.unwrap_exists(), k);
            widen::rewrap(reg, &inner, &t.binders())
        }
        other => {
            if let Some((elt, _)) = array_parts(other) {
                if elt.free_vars().is_empty() {
                    return elt.clone();
                }
                return Type::Top;
            }
            match other.head().map(|h| &**h) {
                Some("UnitRange" | "StepRange") => b.int.clone(),
                _ => Type::Top,
            }
        }
    }
}

#[cfg(test)]
mod tests;
