//! The interpreter: runs lowered programs in one of three modes.
//!
//! * `Dynamic` interprets the lowered bodies and dispatches every call on
//!   the run-time argument types.
//! * `Optimized` runs specialized instances: each (method, leaf argument
//!   types) pair is inferred and optimized once, then executed; resolved
//!   call sites jump straight to their target instance.
//! * `Checking` runs like `Optimized` but also re-dispatches every direct
//!   call and checks every statement's value against its inferred type.

use std::cell::{OnceCell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dispatch::{DispatchError, MethodId};
use crate::frontend::lower::Module;
use crate::infer::{InferenceResult, Inferencer, WideningConfig};
use crate::ir::{Arg, InstId, IrFunction, Lit, Op, Terminator};
use crate::opt::{self, Compiled, FnReport, InstanceProvider, OptConfig};
use crate::runtime::intrinsics::{self, new_struct, Ctx};
use crate::runtime::value::ArrayData;
use crate::runtime::{ExecStats, RtError, Value};
use crate::types::{Name, Type};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dynamic,
    #[default]
    Optimized,
    Checking,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Dynamic, Mode::Optimized, Mode::Checking];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Dynamic => "dynamic",
            Mode::Optimized => "optimized",
            Mode::Checking => "checking",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EngineConfig {
    pub mode: Mode,
    pub widening: WideningConfig,
    pub opt: OptConfig,
    pub seed: u64,
    /// Calls nested deeper than this raise a stack-overflow error.
    pub max_call_depth: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Optimized,
            widening: WideningConfig::default(),
            opt: OptConfig::default(),
            seed: 42,
            max_call_depth: 4000,
        }
    }
}

impl EngineConfig {
    pub fn with_mode(mode: Mode) -> Self {
        EngineConfig { mode, ..Self::default() }
    }
}

/// One specialization of a method (or of the top-level code).
#[derive(Debug)]
pub struct Instance {
    pub id: InstId,
    /// `None` for the top-level body.
    pub method: Option<MethodId>,
    pub fname: Name,
    pub argtypes: Type,
    pub witnesses: Arc<[Type]>,
    compiled: OnceCell<Rc<Compiled>>,
}

impl Instance {
    pub fn compiled(&self) -> Option<&Rc<Compiled>> {
        self.compiled.get()
    }
}

struct RtState {
    rng: ChaCha8Rng,
    out: String,
    stats: ExecStats,
    depth: usize,
}

pub struct Engine {
    module: Arc<Module>,
    cfg: EngineConfig,
    instances: RefCell<Vec<Rc<Instance>>>,
    by_key: RefCell<HashMap<(MethodId, Type), InstId>>,
    /// Run-time dispatch results in compiled modes: (function, argument
    /// types) to instance.
    call_cache: RefCell<HashMap<(Name, Type), Result<InstId, DispatchError>>>,
    compiling: RefCell<Vec<InstId>>,
    inferencer: RefCell<Inferencer>,
    rt: RefCell<RtState>,
    toplevel: RefCell<Option<InstId>>,
}

impl Engine {
    pub fn new(module: Arc<Module>, cfg: EngineConfig) -> Self {
        Engine {
            module,
            cfg,
            instances: RefCell::new(Vec::new()),
            by_key: RefCell::new(HashMap::new()),
            call_cache: RefCell::new(HashMap::new()),
            compiling: RefCell::new(Vec::new()),
            inferencer: RefCell::new(Inferencer::new(cfg.widening)),
            rt: RefCell::new(RtState {
                rng: ChaCha8Rng::seed_from_u64(cfg.seed),
                out: String::new(),
                stats: ExecStats::default(),
                depth: 0,
            }),
            toplevel: RefCell::new(None),
        }
    }

    pub fn module(&self) -> &Arc<Module> {
        &self.module
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn stats(&self) -> ExecStats {
        self.rt.borrow().stats.clone()
    }

    pub fn reset_stats(&self) {
        self.rt.borrow_mut().stats = ExecStats::default();
    }

    /// Reseed the random number generator.
    pub fn reseed(&self, seed: u64) {
        self.rt.borrow_mut().rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Everything printed so far; clears the buffer.
    pub fn take_output(&self) -> String {
        std::mem::take(&mut self.rt.borrow_mut().out)
    }

    pub fn instances(&self) -> Vec<Rc<Instance>> {
        self.instances.borrow().clone()
    }

    /// Run the top-level statements.
    pub fn run_toplevel(&self) -> Result<Value, RtError> {
        let start = Instant::now();
        let r = match self.cfg.mode {
            Mode::Dynamic => {
                let f = &self.module.toplevel;
                self.exec(f, vec![Value::Nothing; f.slots.len()], &[], None)
            }
            _ => {
                let id = self.toplevel_instance();
                self.invoke_instance(id, Vec::new())
            }
        };
        self.rt.borrow_mut().stats.wall_time += start.elapsed().as_secs_f64();
        r
    }

    fn toplevel_instance(&self) -> InstId {
        if let Some(id) = *self.toplevel.borrow() {
            return id;
        }
        let id = self.push_instance(None, "__toplevel__".into(), Type::tuple(vec![]), Arc::from(vec![]));
        *self.toplevel.borrow_mut() = Some(id);
        id
    }

    /// Call the generic function `fname` with `args`, dispatching on their
    /// run-time types.
    pub fn call(&self, fname: &str, args: Vec<Value>) -> Result<Value, RtError> {
        let start = Instant::now();
        let r = self.call_generic(fname, args);
        self.rt.borrow_mut().stats.wall_time += start.elapsed().as_secs_f64();
        r
    }

    /// The instance `fname` would run for arguments of the given leaf
    /// types, compiled.
    pub fn compile_for(&self, fname: &str, argtypes: &Type) -> Result<Rc<Compiled>, RtError> {
        let m = &self.module;
        let at = m.reg.canonical(argtypes);
        let res = m.table.dispatch(&m.reg, fname, &at).map_err(RtError::Method)?;
        let id = self.instance(res.method, &at, &res.witnesses);
        Ok(self.compiled(id))
    }

    /// Compile an instance of a specific method at possibly non-leaf
    /// argument types, without registering it for execution.
    pub fn compile_detached(&self, method: MethodId, argtypes: &Type) -> Compiled {
        let m = &self.module;
        let inf = self.inferencer.borrow_mut().infer(m, method, argtypes);
        let raw = m.body_of(method);
        let func = match &inf.witnesses {
            Some(w) => opt::specialize(m, raw, w),
            None => raw.clone(),
        };
        opt::optimize(m, &func, inf, &self.cfg.opt, self, None)
    }

    /// The method `fname` dispatches to for `argtypes`, which may be
    /// abstract; the most specific applicable method is chosen.
    pub fn resolve(&self, fname: &str, argtypes: &Type) -> Result<(MethodId, Type), RtError> {
        let m = &self.module;
        let at = m.reg.canonical(argtypes);
        let res = m.table.dispatch(&m.reg, fname, &at).map_err(RtError::Method)?;
        Ok((res.method, at))
    }

    /// Inference result for a call of `fname` with arguments of `argtypes`.
    pub fn infer_entry(&self, fname: &str, argtypes: &Type) -> Result<Arc<InferenceResult>, RtError> {
        let (method, at) = self.resolve(fname, argtypes)?;
        Ok(self.inferencer.borrow_mut().infer(&self.module, method, &at))
    }

    /// The optimized body of `fname` specialized at `argtypes`.
    pub fn compile_entry(&self, fname: &str, argtypes: &Type) -> Result<Rc<Compiled>, RtError> {
        let (method, at) = self.resolve(fname, argtypes)?;
        if self.module.reg.is_leaf(&at) {
            self.compile_for(fname, &at)
        } else {
            Ok(Rc::new(self.compile_detached(method, &at)))
        }
    }

    /// Static-resolution report for `fname` specialized at `argtypes`.
    pub fn report_entry(&self, fname: &str, argtypes: &Type) -> Result<FnReport, RtError> {
        Ok(self.compile_entry(fname, argtypes)?.report.clone())
    }

    fn push_instance(&self, method: Option<MethodId>, fname: Name, argtypes: Type, witnesses: Arc<[Type]>) -> InstId {
        let mut insts = self.instances.borrow_mut();
        let id = insts.len();
        insts.push(Rc::new(Instance { id, method, fname, argtypes, witnesses, compiled: OnceCell::new() }));
        id
    }

    /// Compile an instance if needed.
    pub fn compiled(&self, id: InstId) -> Rc<Compiled> {
        let inst = self.instances.borrow()[id].clone();
        if let Some(c) = inst.compiled.get() {
            return c.clone();
        }
        self.compiling.borrow_mut().push(id);
        let c = self.compile(&inst);
        self.compiling.borrow_mut().pop();
        self.rt.borrow_mut().stats.instances_compiled += 1;
        inst.compiled.get_or_init(|| Rc::new(c)).clone()
    }

    fn compile(&self, inst: &Instance) -> Compiled {
        let m = &self.module;
        match inst.method {
            None => {
                let inf = Arc::new(self.inferencer.borrow_mut().infer_body(m, &m.toplevel));
                opt::optimize(m, &m.toplevel, inf, &self.cfg.opt, self, Some(inst.id))
            }
            Some(method) => {
                let inf = self.inferencer.borrow_mut().infer(m, method, &inst.argtypes);
                let raw = m.body_of(method);
                let closed = inst.witnesses.iter().all(|w| w.free_vars().is_empty());
                let func = if closed && inst.witnesses.len() == raw.static_params.len() {
                    opt::specialize(m, raw, &inst.witnesses)
                } else {
                    raw.clone()
                };
                opt::optimize(m, &func, inf, &self.cfg.opt, self, Some(inst.id))
            }
        }
    }

    fn call_generic(&self, fname: &str, args: Vec<Value>) -> Result<Value, RtError> {
        let m = &*self.module;
        let b = &m.builtins;
        let at = Type::tuple(args.iter().map(|v| v.typeof_(b)).collect());
        self.rt.borrow_mut().stats.dynamic_dispatches += 1;
        match self.cfg.mode {
            Mode::Dynamic => {
                let res = m.table.dispatch(&m.reg, fname, &at).map_err(RtError::Method)?;
                let f = m.body_of(res.method);
                let frame = bind_args(f, args);
                self.exec(f, frame, &res.witnesses, None)
            }
            _ => {
                let key = (Name::from(fname), at);
                let cached = self.call_cache.borrow().get(&key).cloned();
                let id = match cached {
                    Some(r) => r.map_err(RtError::Method)?,
                    None => {
                        let r = m
                            .table
                            .dispatch(&m.reg, fname, &key.1)
                            .map(|res| self.instance(res.method, &key.1, &res.witnesses));
                        self.call_cache.borrow_mut().insert(key, r.clone());
                        r.map_err(RtError::Method)?
                    }
                };
                self.invoke_instance(id, args)
            }
        }
    }

    fn invoke_instance(&self, id: InstId, args: Vec<Value>) -> Result<Value, RtError> {
        let c = self.compiled(id);
        let frame = bind_args(&c.func, args);
        let types = if self.cfg.mode == Mode::Checking { Some(&c.stmt_types[..]) } else { None };
        if c.closed {
            self.exec(&c.func, frame, &[], types)
        } else {
            let w = self.instances.borrow()[id].witnesses.clone();
            self.exec(&c.func, frame, &w, types)
        }
    }

    fn exec(
        &self,
        f: &IrFunction,
        mut frame: Vec<Value>,
        witnesses: &[Type],
        types: Option<&[Vec<Type>]>,
    ) -> Result<Value, RtError> {
        {
            let mut rt = self.rt.borrow_mut();
            if rt.depth >= self.cfg.max_call_depth {
                return Err(RtError::StackOverflow(self.cfg.max_call_depth));
            }
            rt.depth += 1;
        }
        let r = self.exec_blocks(f, &mut frame, witnesses, types);
        self.rt.borrow_mut().depth -= 1;
        r
    }

    fn exec_blocks(
        &self,
        f: &IrFunction,
        frame: &mut [Value],
        witnesses: &[Type],
        types: Option<&[Vec<Type>]>,
    ) -> Result<Value, RtError> {
        let mut b = 0;
        let mut caught = String::new();
        'blocks: loop {
            let blk = &f.blocks[b];
            for (i, st) in blk.stmts.iter().enumerate() {
                match self.step(f, frame, &st.op, witnesses, &caught) {
                    Ok(v) => {
                        if let Some(tys) = types {
                            self.check_value(&v, &tys[b][i]);
                        }
                        if let Some(d) = st.dst {
                            frame[d] = v;
                        }
                    }
                    Err(e) => match blk.handler {
                        Some(h) if catchable(&e) => {
                            caught = format!("{}: {}", e.class(), e);
                            b = h;
                            continue 'blocks;
                        }
                        _ => return Err(e),
                    },
                }
            }
            match &blk.term {
                Terminator::Goto(n) => b = *n,
                Terminator::Branch { cond, then, els } => match &frame[*cond] {
                    Value::Bool(true) => b = *then,
                    Value::Bool(false) => b = *els,
                    other => {
                        let e = RtError::TypeAssert(format!(
                            "non-boolean ({}) used in boolean context",
                            self.module.reg.show(&other.typeof_(&self.module.builtins))
                        ));
                        match blk.handler {
                            Some(h) => {
                                caught = format!("{}: {}", e.class(), e);
                                b = h;
                            }
                            None => return Err(e),
                        }
                    }
                },
                Terminator::Return(s) => return Ok(std::mem::replace(&mut frame[*s], Value::Nothing)),
                Terminator::Unreachable => return Err(RtError::Internal("reached unreachable code".into())),
            }
        }
    }

    fn check_value(&self, v: &Value, ty: &Type) {
        if ty.is_top() {
            return;
        }
        let m = &self.module;
        let t = v.typeof_(&m.builtins);
        if &t != ty && !m.reg.subtype(&t, ty) {
            self.rt.borrow_mut().stats.type_violations += 1;
        }
    }

    fn resolve_type(&self, f: &IrFunction, ty: &Type, open: bool, witnesses: &[Type]) -> Result<Type, RtError> {
        if !open {
            return Ok(ty.clone());
        }
        if witnesses.len() < f.static_params.len() {
            return Err(RtError::Internal("static parameter values unavailable".into()));
        }
        let pairs: Vec<(Name, Type)> =
            f.static_params.iter().map(|v| v.name.clone()).zip(witnesses.iter().cloned()).collect();
        Ok(self.module.reg.canonical(&ty.subst_all(&pairs)))
    }

    fn collect_args(&self, frame: &[Value], args: &[Arg]) -> Result<Vec<Value>, RtError> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            match *a {
                Arg::Plain(s) => out.push(frame[s].clone()),
                Arg::Splat(s) => splat_into(&frame[s], &mut out, &self.module)?,
            }
        }
        Ok(out)
    }

    fn step(
        &self,
        f: &IrFunction,
        frame: &mut [Value],
        op: &Op,
        witnesses: &[Type],
        caught: &str,
    ) -> Result<Value, RtError> {
        let m = &*self.module;
        let reg = &m.reg;
        let b = &m.builtins;
        Ok(match op {
            Op::Const(lit) => match lit {
                Lit::Int(i) => Value::Int(*i),
                Lit::Float(x) => Value::Float(*x),
                Lit::Bool(x) => Value::Bool(*x),
                Lit::Str(s) => Value::Str(s.clone()),
                Lit::Nothing => Value::Nothing,
                Lit::Type { ty, open } => Value::ty(self.resolve_type(f, ty, *open, witnesses)?),
            },
            Op::Move(s) => frame[*s].clone(),
            Op::Call { fname, args } => {
                let vals = self.collect_args(frame, args)?;
                self.call_generic(fname, vals)?
            }
            Op::Invoke { fname, method, inst, args } => {
                let vals: Vec<Value> = args.iter().map(|&s| frame[s].clone()).collect();
                self.rt.borrow_mut().stats.direct_calls += 1;
                if self.cfg.mode == Mode::Checking {
                    let at = Type::tuple(vals.iter().map(|v| v.typeof_(b)).collect());
                    let ok = matches!(m.table.dispatch(reg, fname, &at), Ok(r) if r.method == *method);
                    if !ok {
                        self.rt.borrow_mut().stats.dispatch_violations += 1;
                    }
                }
                self.invoke_instance(*inst, vals)?
            }
            Op::Intrinsic(i, args) => {
                let mut rt = self.rt.borrow_mut();
                let rt = &mut *rt;
                let mut ctx = Ctx { reg, b, rng: &mut rt.rng, out: &mut rt.out, stats: &mut rt.stats };
                // most intrinsics take one to three arguments; avoid a heap vector for them
                match args.as_slice() {
                    [a] => intrinsics::eval(*i, &[frame[*a].clone()], &mut ctx)?,
                    [a, c] => intrinsics::eval(*i, &[frame[*a].clone(), frame[*c].clone()], &mut ctx)?,
                    [a, c, d] => {
                        intrinsics::eval(*i, &[frame[*a].clone(), frame[*c].clone(), frame[*d].clone()], &mut ctx)?
                    }
                    _ => {
                        let vals: Vec<Value> = args.iter().map(|&s| frame[s].clone()).collect();
                        intrinsics::eval(*i, &vals, &mut ctx)?
                    }
                }
            }
            Op::New { ty, open, args } => {
                let t = self.resolve_type(f, ty, *open, witnesses)?;
                let Type::Nominal(n) = &t else {
                    return Err(RtError::TypeAssert(format!("cannot construct {}", reg.show(&t))));
                };
                let fields = reg.fields_of(n).unwrap_or_default();
                if fields.len() != args.len() {
                    return Err(RtError::Internal(format!("{} expects {} fields", reg.show(&t), fields.len())));
                }
                let mut vals = Vec::with_capacity(args.len());
                for ((name, ft), &s) in fields.iter().zip(args) {
                    let v = frame[s].clone();
                    let vt = v.typeof_(b);
                    if &vt != ft && !reg.subtype(&vt, ft) {
                        return Err(RtError::TypeAssert(format!(
                            "field {name} of {} must be a {}, got {}",
                            reg.show(&t),
                            reg.show(ft),
                            reg.show(&vt)
                        )));
                    }
                    vals.push(v);
                }
                let mut rt = self.rt.borrow_mut();
                let rt = &mut *rt;
                let mut ctx = Ctx { reg, b, rng: &mut rt.rng, out: &mut rt.out, stats: &mut rt.stats };
                new_struct(&mut ctx, t, vals)
            }
            Op::GetField(s, name) => {
                let (obj, idx, _) = self.field_slot(&frame[*s], name)?;
                let v = obj.fields.borrow()[idx].clone();
                v
            }
            Op::SetField(s, name, v) => {
                let (obj, idx, ft) = self.field_slot(&frame[*s], name)?;
                let val = frame[*v].clone();
                let vt = val.typeof_(b);
                if !reg.subtype(&vt, &ft) {
                    return Err(RtError::TypeAssert(format!(
                        "field {name} must be a {}, got {}",
                        reg.show(&ft),
                        reg.show(&vt)
                    )));
                }
                obj.fields.borrow_mut()[idx] = val;
                Value::Nothing
            }
            Op::TypeAssert { src, ty, open } => {
                let t = self.resolve_type(f, ty, *open, witnesses)?;
                let v = frame[*src].clone();
                let vt = v.typeof_(b);
                if vt != t && !reg.subtype(&vt, &t) {
                    return Err(RtError::TypeAssert(format!("expected {}, got {}", reg.show(&t), reg.show(&vt))));
                }
                v
            }
            Op::Convert { src, ty, open } => {
                let t = self.resolve_type(f, ty, *open, witnesses)?;
                let v = frame[*src].clone();
                let vt = v.typeof_(b);
                if vt == t || reg.subtype(&vt, &t) {
                    v
                } else {
                    let r = match self.call_generic("convert", vec![Value::ty(t.clone()), v]) {
                        Err(RtError::Method(DispatchError::NoMethod { .. })) => {
                            return Err(RtError::TypeAssert(format!(
                                "cannot convert a {} to {}",
                                reg.show(&vt),
                                reg.show(&t)
                            )))
                        }
                        other => other?,
                    };
                    let rt = r.typeof_(b);
                    if !reg.subtype(&rt, &t) {
                        return Err(RtError::TypeAssert(format!(
                            "convert to {} returned a {}",
                            reg.show(&t),
                            reg.show(&rt)
                        )));
                    }
                    r
                }
            }
            Op::StaticParam(k) => match witnesses.get(*k) {
                Some(w) => Value::ty(w.clone()),
                None => return Err(RtError::Internal("static parameter value unavailable".into())),
            },
            Op::Tuple(args) => Value::Tuple(self.collect_args(frame, args)?.into()),
            Op::Destructure(s, k) => destructure(&frame[*s], *k, m)?,
            Op::Caught => Value::str(caught),
        })
    }

    fn field_slot(
        &self,
        v: &Value,
        name: &str,
    ) -> Result<(Rc<crate::runtime::value::StructObj>, usize, Type), RtError> {
        let reg = &self.module.reg;
        let Value::Struct(obj) = v else {
            return Err(RtError::Field(format!(
                "{} has no field {name}",
                reg.show(&v.typeof_(&self.module.builtins))
            )));
        };
        let Type::Nominal(n) = &obj.ty else { return Err(RtError::Internal("struct of non-nominal type".into())) };
        let fields = reg.fields_of(n).unwrap_or_default();
        match fields.iter().position(|(f, _)| &**f == name) {
            Some(i) => Ok((obj.clone(), i, fields[i].1.clone())),
            None => Err(RtError::Field(format!("{} has no field {name}", reg.show(&obj.ty)))),
        }
    }
}

impl InstanceProvider for Engine {
    fn instance(&self, method: MethodId, argtypes: &Type, witnesses: &Arc<[Type]>) -> InstId {
        let key = (method, argtypes.clone());
        if let Some(&id) = self.by_key.borrow().get(&key) {
            return id;
        }
        let fname = self.module.table.method(method).fname.clone();
        let id = self.push_instance(Some(method), fname, argtypes.clone(), witnesses.clone());
        self.by_key.borrow_mut().insert(key, id);
        id
    }

    fn compiled_for_inlining(&self, inst: InstId) -> Option<Rc<Compiled>> {
        if self.compiling.borrow().contains(&inst) {
            return None;
        }
        Some(self.compiled(inst))
    }
}

fn catchable(e: &RtError) -> bool {
    !matches!(e, RtError::StackOverflow(_) | RtError::Internal(_))
}

/// Initial frame: arguments in their slots, a vararg tail packed as a tuple.
fn bind_args(f: &IrFunction, mut args: Vec<Value>) -> Vec<Value> {
    let mut frame = Vec::with_capacity(f.slots.len());
    if f.vararg {
        let fixed = f.nargs - 1;
        let rest: Vec<Value> = args.split_off(fixed.min(args.len()));
        frame.extend(args);
        frame.push(Value::Tuple(rest.into()));
    } else {
        frame.extend(args);
    }
    frame.resize(f.slots.len().max(frame.len()), Value::Nothing);
    frame
}

fn not_iterable(v: &Value, m: &Module) -> RtError {
    RtError::Method(DispatchError::NoMethod {
        fname: "iterate".into(),
        args: format!("({},)", m.reg.show(&v.typeof_(&m.builtins))),
    })
}

fn splat_into(v: &Value, out: &mut Vec<Value>, m: &Module) -> Result<(), RtError> {
    match v {
        Value::Tuple(items) => out.extend(items.iter().cloned()),
        Value::Array(a) => {
            let data = a.data.borrow();
            out.extend((0..data.len()).map(|i| data.get(i)));
        }
        Value::Range(r) => out.extend((1..=r.len()).map(|i| Value::Int(r.at(i)))),
        other => return Err(not_iterable(other, m)),
    }
    Ok(())
}

fn destructure(v: &Value, k: usize, m: &Module) -> Result<Value, RtError> {
    let oob = |n: usize| RtError::Bounds(format!("cannot take element {} of a collection of length {n}", k + 1));
    match v {
        Value::Tuple(items) => items.get(k).cloned().ok_or_else(|| oob(items.len())),
        Value::Array(a) => {
            let data = a.data.borrow();
            if k < data.len() {
                Ok(data.get(k))
            } else {
                Err(oob(data.len()))
            }
        }
        Value::Range(r) => {
            if (k as i64) < r.len() {
                Ok(Value::Int(r.at(k as i64 + 1)))
            } else {
                Err(oob(r.len() as usize))
            }
        }
        other => Err(not_iterable(other, m)),
    }
}

/// A column-major Float64 matrix value, for callers outside the language.
pub fn float_matrix(rows: usize, cols: usize, data: Vec<f64>) -> Value {
    assert_eq!(rows * cols, data.len());
    let elt = Type::tag("Float64", vec![]);
    Value::Array(Rc::new(crate::runtime::value::ArrayObj {
        ty: crate::runtime::value::Builtins::array(elt.clone(), 2),
        elt,
        dims: vec![rows, cols],
        data: RefCell::new(ArrayData::F64(data)),
    }))
}

/// Contents of a Float64 or Int64 array as floats, with its dimensions.
pub fn array_f64(v: &Value) -> Option<(Vec<usize>, Vec<f64>)> {
    let Value::Array(a) = v else { return None };
    let data = a.data.borrow();
    let vals = match &*data {
        ArrayData::F64(x) => x.clone(),
        ArrayData::I64(x) => x.iter().map(|&i| i as f64).collect(),
        ArrayData::Any(_) => return None,
    };
    Some((a.dims.clone(), vals))
}

/// Run `f` on a thread with a large stack; deep recursion in interpreted
/// programs needs it.
pub fn with_big_stack<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> R {
    std::thread::Builder::new()
        .stack_size(1 << 30)
        .spawn(f)
        .expect("spawn interpreter thread")
        .join()
        .unwrap_or_else(|e| std::panic::resume_unwind(e))
}

/// Parse an argument-type list: a tuple type such as `(Int64, Float64)`,
/// or the same without parentheses.
pub fn parse_argtypes(m: &Module, src: &str) -> Result<Type, String> {
    let src = src.trim();
    let text = if src.starts_with('(') { src.to_string() } else if src.is_empty() { "()".into() } else { format!("({src},)") };
    let t = m.reg.parse_type(&text).map_err(|e| format!("bad argument types `{src}`: {e}"))?;
    match t {
        Type::Tuple(_) => Ok(m.reg.canonical(&t)),
        _ => m.reg.parse_type(&format!("({src},)")).map_err(|e| format!("bad argument types `{src}`: {e}")),
    }
}
