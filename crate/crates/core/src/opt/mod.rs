//! IR-to-IR optimization driven by inference results: devirtualization of
//! uniquely resolved call sites, removal of checks that inference proves
//! redundant, and inlining of small direct-call targets.

use std::rc::Rc;
use std::sync::Arc;

use serde::Serialize;

use crate::dispatch::MethodId;
use crate::frontend::lower::Module;
use crate::infer::InferenceResult;
use crate::ir::{Arg, Block, BlockId, InstId, IrFunction, Lit, Op, Slot, SlotInfo, Stmt, Terminator};
use crate::runtime::value::Builtins;
use crate::types::{Name, Type};

/// Inlined code is never nested deeper than this.
pub const MAX_INLINE_DEPTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OptConfig {
    pub devirtualize: bool,
    pub inline: bool,
    /// Largest callee, in statements, that may be inlined.
    pub inline_max: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig { devirtualize: true, inline: true, inline_max: 24 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Inlined,
    Direct,
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteReport {
    pub block: BlockId,
    pub index: usize,
    pub line: u32,
    pub function: String,
    pub argtypes: String,
    pub outcome: Outcome,
    pub target: Option<String>,
    /// Why a dynamic site was not resolved.
    pub reason: Option<String>,
}

/// Static-resolution statistics for one specialized function.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FnReport {
    pub function: String,
    pub argtypes: String,
    /// Reachable call sites in the source IR.
    pub total: usize,
    pub resolved: usize,
    pub inlined: usize,
    pub dynamic: usize,
    /// Call sites that inference proved are never reached.
    pub unreachable: usize,
    pub sites: Vec<SiteReport>,
}

impl FnReport {
    /// Fraction of call sites resolved statically; 1 for call-free code.
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.resolved as f64 / self.total as f64
        }
    }
}

/// A specialized, optimized function body.
#[derive(Debug)]
pub struct Compiled {
    pub func: IrFunction,
    /// Inferred type of every statement of `func`, `[block][stmt]`.
    pub stmt_types: Vec<Vec<Type>>,
    pub inference: Arc<InferenceResult>,
    pub report: FnReport,
    /// Deepest nesting of inlined code in `func`.
    pub inline_depth: usize,
    /// No static parameters remain unresolved.
    pub closed: bool,
    /// Contains a direct call to itself.
    pub self_recursive: bool,
}

/// What the optimizer needs from whoever owns the instances.
pub trait InstanceProvider {
    /// Instance for a resolved call target, created on demand.
    fn instance(&self, method: MethodId, argtypes: &Type, witnesses: &Arc<[Type]>) -> InstId;
    /// The optimized body of an instance, compiling it if needed; `None`
    /// while that instance is itself being compiled.
    fn compiled_for_inlining(&self, inst: InstId) -> Option<Rc<Compiled>>;
}

/// Substitute static parameter values throughout a body. Statement
/// positions are unchanged, so inference results stay aligned.
pub fn specialize(m: &Module, f: &IrFunction, witnesses: &[Type]) -> IrFunction {
    let pairs: Vec<(Name, Type)> =
        f.static_params.iter().map(|v| v.name.clone()).zip(witnesses.iter().cloned()).collect();
    let close = |t: &Type| m.reg.canonical(&t.subst_all(&pairs));
    let mut out = f.clone();
    for blk in &mut out.blocks {
        for st in &mut blk.stmts {
            match &mut st.op {
                Op::StaticParam(k) => {
                    st.op = Op::Const(Lit::Type { ty: witnesses[*k].clone(), open: false });
                }
                Op::Const(Lit::Type { ty, open }) | Op::New { ty, open, .. } | Op::TypeAssert { ty, open, .. } | Op::Convert { ty, open, .. }
                    if *open =>
                {
                    *ty = close(ty);
                    *open = false;
                }
                _ => {}
            }
        }
    }
    for s in &mut out.slots {
        if let Some(t) = &s.declared {
            s.declared = Some(close(t));
        }
    }
    out.static_params.clear();
    out
}

/// Optimize `func` (already specialized) using `inf`, whose statement
/// positions match it.
pub fn optimize(
    m: &Module,
    func: &IrFunction,
    inf: Arc<InferenceResult>,
    cfg: &OptConfig,
    provider: &dyn InstanceProvider,
    self_id: Option<InstId>,
) -> Compiled {
    let reg = &m.reg;
    let mut report = FnReport {
        function: func.name.to_string(),
        argtypes: reg.show(&inf.argtypes),
        ..FnReport::default()
    };
    let mut f = func.clone();
    let mut types: Vec<Vec<Type>> = Vec::with_capacity(f.blocks.len());
    let mut tags: Vec<Vec<Option<usize>>> = Vec::with_capacity(f.blocks.len());

    for (b, blk) in func.blocks.iter().enumerate() {
        let mut stmts = Vec::with_capacity(blk.stmts.len());
        let mut tys = Vec::with_capacity(blk.stmts.len());
        let reached = inf.reached.get(b).copied().unwrap_or(false);
        let mut direct_at = Vec::new();
        for (i, st) in blk.stmts.iter().enumerate() {
            let ty = inf.stmt_types[b][i].clone();
            if !reached {
                if matches!(st.op, Op::Call { .. }) {
                    report.unreachable += 1;
                }
                stmts.push(st.clone());
                tys.push(ty);
                continue;
            }
            match &st.op {
                Op::Call { fname, args } => {
                    let Some(site) = inf.call_site(b, i) else {
                        report.unreachable += 1;
                        stmts.push(st.clone());
                        tys.push(ty);
                        continue;
                    };
                    report.total += 1;
                    let mut sr = SiteReport {
                        block: b,
                        index: i,
                        line: st.span.line,
                        function: fname.to_string(),
                        argtypes: reg.show(&site.argtypes),
                        outcome: Outcome::Dynamic,
                        target: None,
                        reason: None,
                    };
                    let expanded = site.resolved.as_ref().and_then(|_| expand_splats(&mut f.slots, args, &site.arg_types));
                    match (&site.resolved, expanded) {
                        (Some(res), Some((pre, slots))) if cfg.devirtualize => {
                            for (s, t) in pre {
                                stmts.push(Stmt { dst: Some(s.0), op: s.1, span: st.span });
                                tys.push(t);
                            }
                            let inst = provider.instance(res.method, &site.argtypes, &res.witnesses);
                            direct_at.push((stmts.len(), report.sites.len()));
                            stmts.push(Stmt {
                                dst: st.dst,
                                op: Op::Invoke { fname: fname.clone(), method: res.method, inst, args: slots },
                                span: st.span,
                            });
                            tys.push(ty);
                            sr.outcome = Outcome::Direct;
                            sr.target = Some(crate::infer::method_label(m, res.method));
                            report.resolved += 1;
                        }
                        (Some(_), expanded) => {
                            sr.reason = Some(
                                if expanded.is_none() { "splat of unknown length" } else { "devirtualization disabled" }
                                    .to_string(),
                            );
                            stmts.push(st.clone());
                            tys.push(ty);
                            report.dynamic += 1;
                        }
                        (None, _) => {
                            sr.reason = site.reason.map(|r| r.as_str().to_string());
                            stmts.push(st.clone());
                            tys.push(ty);
                            report.dynamic += 1;
                        }
                    }
                    report.sites.push(sr);
                }
                Op::TypeAssert { src, ty: t, open: false } => {
                    let redundant =
                        inf.operand_types.get(&(b, i)).is_some_and(|o| !o.is_bottom() && reg.subtype(o, t));
                    let op = if redundant { Op::Move(*src) } else { st.op.clone() };
                    stmts.push(Stmt { dst: st.dst, op, span: st.span });
                    tys.push(ty);
                }
                Op::Convert { src, ty: t, open: false } => {
                    let operand = inf.operand_types.get(&(b, i));
                    if operand.is_some_and(|o| !o.is_bottom() && reg.subtype(o, t)) {
                        stmts.push(Stmt { dst: st.dst, op: Op::Move(*src), span: st.span });
                        tys.push(ty);
                        continue;
                    }
                    // a known conversion method becomes a direct call plus a check
                    let target = operand.filter(|o| cfg.devirtualize && reg.is_leaf(o)).and_then(|o| {
                        let at = Type::tuple(vec![Builtins::type_of_type(t.clone()), o.clone()]);
                        m.table.dispatch(reg, "convert", &at).ok().map(|r| (at, r))
                    });
                    match (target, st.dst) {
                        (Some((at, res)), Some(dst)) => {
                            let tslot = new_slot(&mut f.slots);
                            let rslot = new_slot(&mut f.slots);
                            stmts.push(Stmt {
                                dst: Some(tslot),
                                op: Op::Const(Lit::Type { ty: t.clone(), open: false }),
                                span: st.span,
                            });
                            tys.push(Builtins::type_of_type(t.clone()));
                            let inst = provider.instance(res.method, &at, &res.witnesses);
                            stmts.push(Stmt {
                                dst: Some(rslot),
                                op: Op::Invoke { fname: "convert".into(), method: res.method, inst, args: vec![tslot, *src] },
                                span: st.span,
                            });
                            tys.push(Type::Top);
                            stmts.push(Stmt {
                                dst: Some(dst),
                                op: Op::TypeAssert { src: rslot, ty: t.clone(), open: false },
                                span: st.span,
                            });
                            tys.push(ty);
                        }
                        _ => {
                            stmts.push(st.clone());
                            tys.push(ty);
                        }
                    }
                }
                _ => {
                    stmts.push(st.clone());
                    tys.push(ty);
                }
            }
        }
        let mut tg = vec![None; stmts.len()];
        for (k, idx) in direct_at {
            tg[k] = Some(idx);
        }
        f.blocks[b].stmts = stmts;
        types.push(tys);
        tags.push(tg);
    }

    let mut inline_depth = 0;
    if cfg.inline {
        for site in inline_calls(&mut f, &mut types, &tags, cfg, provider, self_id, &mut inline_depth) {
            report.sites[site].outcome = Outcome::Inlined;
            report.inlined += 1;
        }
    }

    simplify_cfg(&mut f, &mut types);

    let self_recursive = self_id.is_some_and(|me| {
        f.blocks.iter().flat_map(|b| &b.stmts).any(|s| matches!(s.op, Op::Invoke { inst, .. } if inst == me))
    });
    let closed = f.static_params.is_empty();
    Compiled { func: f, stmt_types: types, inference: inf, report, inline_depth, closed, self_recursive }
}

fn new_slot(slots: &mut Vec<SlotInfo>) -> Slot {
    slots.push(SlotInfo { name: None, declared: None });
    slots.len() - 1
}

type PreStmt = ((Slot, Op), Type);

/// Plain argument slots for a call, destructuring splats of fixed-length
/// tuples into fresh slots. `None` if some splat has unknown length.
fn expand_splats(slots: &mut Vec<SlotInfo>, args: &[Arg], arg_types: &[Type]) -> Option<(Vec<PreStmt>, Vec<Slot>)> {
    let mut pre = Vec::new();
    let mut out = Vec::with_capacity(args.len());
    for (a, t) in args.iter().zip(arg_types) {
        match *a {
            Arg::Plain(s) => out.push(s),
            Arg::Splat(s) => {
                let Type::Tuple(tt) = t else { return None };
                if tt.vararg.is_some() {
                    return None;
                }
                for (k, et) in tt.fixed.iter().enumerate() {
                    let d = new_slot(slots);
                    pre.push(((d, Op::Destructure(s, k)), et.clone()));
                    out.push(d);
                }
            }
        }
    }
    Some((pre, out))
}

/// Splice eligible direct calls; returns the report indices of the
/// inlined sites. `tags` maps statements to report sites.
fn inline_calls(
    f: &mut IrFunction,
    types: &mut Vec<Vec<Type>>,
    tags: &[Vec<Option<usize>>],
    cfg: &OptConfig,
    provider: &dyn InstanceProvider,
    self_id: Option<InstId>,
    depth_out: &mut usize,
) -> Vec<usize> {
    let mut done = Vec::new();
    let mut tags: Vec<Vec<Option<usize>>> = tags.to_vec();
    // blocks created from callees were optimized already and are skipped
    let mut foreign = vec![false; f.blocks.len()];
    let mut b = 0;
    while b < f.blocks.len() {
        if foreign[b] {
            b += 1;
            continue;
        }
        let found = f.blocks[b].stmts.iter().enumerate().find_map(|(i, st)| match &st.op {
            Op::Invoke { inst, .. } if Some(*inst) != self_id => {
                let c = provider.compiled_for_inlining(*inst)?;
                let ok = c.closed
                    && !c.self_recursive
                    && c.inline_depth < MAX_INLINE_DEPTH
                    && c.func.stmt_count() <= cfg.inline_max
                    && c.func.blocks.iter().all(|blk| blk.handler.is_none());
                ok.then_some((i, c))
            }
            _ => None,
        });
        let Some((i, callee)) = found else {
            b += 1;
            continue;
        };
        *depth_out = (*depth_out).max(callee.inline_depth + 1);
        if let Some(site) = tags[b][i] {
            done.push(site);
        }
        splice(f, types, &mut tags, &mut foreign, b, i, &callee);
        // the rest of this block moved to a continuation block at the end
        b += 1;
    }
    done
}

/// Replace the call at `blocks[b].stmts[i]` by the body of `callee`.
fn splice(
    f: &mut IrFunction,
    types: &mut Vec<Vec<Type>>,
    tags: &mut Vec<Vec<Option<usize>>>,
    foreign: &mut Vec<bool>,
    b: BlockId,
    i: usize,
    callee: &Compiled,
) {
    let call = f.blocks[b].stmts[i].clone();
    let call_ty = types[b][i].clone();
    let Op::Invoke { args, .. } = &call.op else { unreachable!() };
    let handler = f.blocks[b].handler;
    let slot_base = f.slots.len();
    for s in &callee.func.slots {
        f.slots.push(SlotInfo { name: s.name.clone(), declared: s.declared.clone() });
    }
    let block_base = f.blocks.len();
    let cont = block_base + callee.func.blocks.len();

    // caller head: statements before the call, then argument moves
    let tail: Vec<Stmt> = f.blocks[b].stmts.split_off(i + 1);
    let tail_ty: Vec<Type> = types[b].split_off(i + 1);
    let tail_tags = tags[b].split_off(i + 1);
    f.blocks[b].stmts.pop();
    types[b].pop();
    tags[b].pop();
    let arg_tys = arg_slot_types(callee);
    let nargs = callee.func.nargs;
    let fixed = if callee.func.vararg { nargs - 1 } else { nargs };
    for (k, &a) in args.iter().take(fixed).enumerate() {
        f.blocks[b].stmts.push(Stmt { dst: Some(slot_base + k), op: Op::Move(a), span: call.span });
        types[b].push(arg_tys[k].clone());
        tags[b].push(None);
    }
    if callee.func.vararg {
        let rest: Vec<Arg> = args[fixed..].iter().map(|&s| Arg::Plain(s)).collect();
        f.blocks[b].stmts.push(Stmt { dst: Some(slot_base + fixed), op: Op::Tuple(rest), span: call.span });
        types[b].push(arg_tys[fixed].clone());
        tags[b].push(None);
    }
    let old_term = std::mem::replace(&mut f.blocks[b].term, Terminator::Goto(block_base));

    for (cb, blk) in callee.func.blocks.iter().enumerate() {
        let mut stmts = Vec::with_capacity(blk.stmts.len() + 1);
        let mut tys = callee.stmt_types[cb].clone();
        for st in &blk.stmts {
            let mut op = st.op.clone();
            op.map_slots(&mut |s| s + slot_base);
            stmts.push(Stmt { dst: st.dst.map(|d| d + slot_base), op, span: st.span });
        }
        let term = match &blk.term {
            Terminator::Goto(n) => Terminator::Goto(n + block_base),
            Terminator::Branch { cond, then, els } => {
                Terminator::Branch { cond: cond + slot_base, then: then + block_base, els: els + block_base }
            }
            Terminator::Return(s) => {
                if let Some(d) = call.dst {
                    stmts.push(Stmt { dst: Some(d), op: Op::Move(s + slot_base), span: call.span });
                    tys.push(call_ty.clone());
                }
                Terminator::Goto(cont)
            }
            Terminator::Unreachable => Terminator::Unreachable,
        };
        tags.push(vec![None; stmts.len()]);
        f.blocks.push(Block { stmts, term, handler });
        types.push(tys);
        foreign.push(true);
    }
    f.blocks.push(Block { stmts: tail, term: old_term, handler });
    types.push(tail_ty);
    tags.push(tail_tags);
    foreign.push(false);
}

/// Argument slot types of a callee; each is a join over everything the
/// slot may hold, so it covers the incoming argument.
fn arg_slot_types(c: &Compiled) -> Vec<Type> {
    let n = c.func.nargs;
    let mut out: Vec<Type> = c.inference.slot_types.iter().take(n).cloned().collect();
    out.resize(n, Type::Top);
    out
}

/// Thread jumps through empty blocks, merge straight-line block chains
/// and drop blocks that can no longer be reached. `types` is kept aligned
/// with the statements.
pub fn simplify_cfg(f: &mut IrFunction, types: &mut Vec<Vec<Type>>) {
    let n = f.blocks.len();
    let forward = |f: &IrFunction, mut t: BlockId| {
        for _ in 0..n {
            match &f.blocks[t] {
                Block { stmts, term: Terminator::Goto(u), .. } if stmts.is_empty() && *u != t => t = *u,
                _ => break,
            }
        }
        t
    };
    for b in 0..n {
        let term = match f.blocks[b].term.clone() {
            Terminator::Goto(t) => Terminator::Goto(forward(f, t)),
            Terminator::Branch { cond, then, els } => Terminator::Branch { cond, then: forward(f, then), els: forward(f, els) },
            t => t,
        };
        f.blocks[b].term = term;
    }

    let preds = |f: &IrFunction| {
        let mut p = vec![0usize; f.blocks.len()];
        let live = f.reachable();
        for (b, blk) in f.blocks.iter().enumerate() {
            if !live[b] {
                continue;
            }
            for s in blk.term.successors() {
                p[s] += 1;
            }
            if let Some(h) = blk.handler {
                // handlers are entered from anywhere in their region
                p[h] += 2;
            }
        }
        p
    };
    let mut p = preds(f);
    let live = f.reachable();
    for b in 0..n {
        if !live[b] {
            continue;
        }
        loop {
            let Terminator::Goto(t) = f.blocks[b].term else { break };
            if t == b || t == 0 || p[t] != 1 || f.blocks[t].handler != f.blocks[b].handler {
                break;
            }
            let next = std::mem::replace(
                &mut f.blocks[t],
                Block { stmts: Vec::new(), term: Terminator::Unreachable, handler: None },
            );
            let next_ty = std::mem::take(&mut types[t]);
            f.blocks[b].stmts.extend(next.stmts);
            types[b].extend(next_ty);
            f.blocks[b].term = next.term;
            p[t] = 0;
        }
    }

    // renumber the live blocks
    let live = f.reachable();
    let mut map = vec![usize::MAX; n];
    let mut k = 0;
    for b in 0..n {
        if live[b] {
            map[b] = k;
            k += 1;
        }
    }
    let old_blocks = std::mem::take(&mut f.blocks);
    let old_types = std::mem::take(types);
    for ((b, mut blk), ty) in old_blocks.into_iter().enumerate().zip(old_types) {
        if !live[b] {
            continue;
        }
        blk.term = match blk.term {
            Terminator::Goto(t) => Terminator::Goto(map[t]),
            Terminator::Branch { cond, then, els } => Terminator::Branch { cond, then: map[then], els: map[els] },
            t => t,
        };
        blk.handler = blk.handler.map(|h| map[h]);
        f.blocks.push(blk);
        types.push(ty);
    }
}
