//! Lowering from the AST to the block IR.
//!
//! Type declarations are registered first (in source order), then struct
//! constructors are generated, then every function definition is lowered
//! and added to its generic function. Top-level statements become the body
//! of a zero-argument function run before any entry point.

use std::collections::{HashMap, HashSet};

use super::ast::{self, CurlyArg, DeclKind, Expr, ExprKind, FunctionDef, Item, Program, StmtKind, TypeDef};
use super::SyntaxError;
use crate::dispatch::{DispatchError, MethodId, MethodTable, Span};
use crate::ir::{Arg, Block, BlockId, IrFunction, Lit, Op, Slot, SlotInfo, Stmt, Terminator};
use crate::runtime::intrinsics::Intrinsic;
use crate::runtime::value::Builtins;
use crate::types::{Binder, Kind, Name, Registry, Type, TypeError, TypeExpr, TypeVar};

pub const TOPLEVEL: &str = "__toplevel__";

/// A lowered program: the frozen type registry, the method tables, and
/// one IR body per method.
#[derive(Clone, Debug)]
pub struct Module {
    pub reg: Registry,
    pub builtins: Builtins,
    pub table: MethodTable,
    /// Indexed by [`crate::dispatch::Method::body`].
    pub bodies: Vec<IrFunction>,
    pub toplevel: IrFunction,
    /// Constructors generated from struct declarations.
    pub generated: HashSet<MethodId>,
}

impl Module {
    pub fn body_of(&self, m: MethodId) -> &IrFunction {
        &self.bodies[self.table.method(m).body]
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LowerError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{span}: {err}")]
    Type { span: Span, err: TypeError },
    #[error("{span}: undefined variable `{name}`")]
    Undefined { span: Span, name: String },
    #[error("{span}: variable `{name}` may be used before it is assigned")]
    UseBeforeAssign { span: Span, name: String },
    #[error("{span}: {msg}")]
    Invalid { span: Span, msg: String },
    #[error("{span}: {err}")]
    Dispatch { span: Span, err: DispatchError },
}

impl LowerError {
    pub fn span(&self) -> Span {
        match self {
            LowerError::Syntax(e) => e.span,
            LowerError::Type { span, .. }
            | LowerError::Undefined { span, .. }
            | LowerError::UseBeforeAssign { span, .. }
            | LowerError::Invalid { span, .. }
            | LowerError::Dispatch { span, .. } => *span,
        }
    }
}

type R<T> = Result<T, LowerError>;

fn invalid<T>(span: Span, msg: impl Into<String>) -> R<T> {
    Err(LowerError::Invalid { span, msg: msg.into() })
}

fn ty_err(span: Span) -> impl Fn(TypeError) -> LowerError {
    move |err| LowerError::Type { span, err }
}

/// Resolve binders left to right; each bound sees the earlier binders.
fn resolve_binders(reg: &Registry, bs: &[Binder], outer: &[TypeVar], span: Span) -> R<Vec<TypeVar>> {
    let mut scope = outer.to_vec();
    let mut out = Vec::with_capacity(bs.len());
    for b in bs {
        let lower = b.lower.as_deref().map(|e| reg.resolve(e, &scope)).transpose().map_err(ty_err(span))?;
        let upper = b.upper.as_deref().map(|e| reg.resolve(e, &scope)).transpose().map_err(ty_err(span))?;
        let v = TypeVar::new(b.name.as_str(), lower.unwrap_or(Type::Bottom), upper.unwrap_or(Type::Top));
        scope.push(v.clone());
        out.push(v);
    }
    Ok(out)
}

fn resolve(reg: &Registry, e: &TypeExpr, scope: &[TypeVar], span: Span) -> R<Type> {
    let t = reg.resolve(e, scope).map_err(ty_err(span))?;
    reg.check(&t).map_err(ty_err(span))?;
    Ok(t)
}

fn declare_type(reg: &mut Registry, td: &TypeDef) -> R<()> {
    let params = resolve_binders(reg, &td.params, &[], td.span)?;
    let sup = match &td.supertype {
        Some(e) => resolve(reg, e, &params, td.span)?,
        None => Type::Top,
    };
    let (kind, fields) = match td.kind {
        DeclKind::Abstract => (Kind::Abstract, None),
        DeclKind::Primitive => (Kind::Tag, None),
        DeclKind::Struct => {
            let mut fs = Vec::with_capacity(td.fields.len());
            for (name, ty) in &td.fields {
                if fs.iter().any(|(n, _): &(Name, Type)| &**n == name) {
                    return invalid(td.span, format!("duplicate field `{name}` in `{}`", td.name));
                }
                let t = match ty {
                    Some(e) => resolve(reg, e, &params, td.span)?,
                    None => Type::Top,
                };
                fs.push((Name::from(name.as_str()), t));
            }
            (Kind::Tag, Some(fs))
        }
    };
    reg.declare(&td.name, kind, params, sup, fields).map_err(ty_err(td.span))
}

/// Static parameters and the signature as written, binders outermost first.
pub fn signature(reg: &Registry, f: &FunctionDef) -> R<(Vec<TypeVar>, Type)> {
    let sparams = resolve_binders(reg, &f.static_params, &[], f.span)?;
    let mut fixed = Vec::new();
    let mut vararg = None;
    for (i, p) in f.params.iter().enumerate() {
        let t = match &p.ty {
            Some(e) => resolve(reg, e, &sparams, f.span)?,
            None => Type::Top,
        };
        if p.vararg {
            if i + 1 != f.params.len() {
                return invalid(f.span, "only the last parameter may be variadic");
            }
            vararg = Some(t);
        } else {
            fixed.push(t);
        }
    }
    let mut sig = match vararg {
        Some(v) => Type::vararg_tuple(fixed, v),
        None => Type::tuple(fixed),
    };
    for v in sparams.iter().rev() {
        sig = Type::exists(v.clone(), sig);
    }
    Ok((sparams, sig))
}

pub fn lower(prog: &Program) -> R<Module> {
    let mut reg = Registry::new();
    for item in &prog.items {
        match item {
            Item::Type(td) => declare_type(&mut reg, td)?,
            Item::Alias { name, params, body, span } => {
                let vars: Vec<TypeVar> = params.iter().map(|p| TypeVar::unbounded(p.as_str())).collect();
                let t = resolve(&reg, body, &vars, *span)?;
                reg.declare_alias(name, vars, t).map_err(ty_err(*span))?;
            }
            Item::Include(path, span) => {
                return invalid(*span, format!("include(\"{path}\") must be resolved before lowering"))
            }
            _ => {}
        }
    }
    let builtins = Builtins::new(&reg).map_err(|msg| LowerError::Invalid { span: Span::default(), msg })?;
    let mut table = MethodTable::new();
    let mut bodies = Vec::new();
    let mut generated = HashSet::new();

    for item in &prog.items {
        if let Item::Type(td) = item {
            if td.kind == DeclKind::Struct {
                for (raw_sig, sparams, body) in constructors(&reg, &builtins, td) {
                    let names = sparams.iter().map(|v| v.name.clone()).collect();
                    bodies.push(body);
                    let out = table
                        .add_method(&reg, &td.name, raw_sig, names, bodies.len() - 1, td.span)
                        .map_err(|err| LowerError::Dispatch { span: td.span, err })?;
                    generated.insert(out.id);
                }
            }
        }
    }

    let mut top_stmts = Vec::new();
    for item in &prog.items {
        match item {
            Item::Function(f) => {
                let (sparams, raw_sig) = signature(&reg, f)?;
                let body = FnBuilder::lower_function(&reg, &builtins, f, &sparams)?;
                bodies.push(body);
                let names = sparams.iter().map(|v| v.name.clone()).collect();
                let out = table
                    .add_method(&reg, &f.name, raw_sig, names, bodies.len() - 1, f.span)
                    .map_err(|err| LowerError::Dispatch { span: f.span, err })?;
                if let Some(old) = out.replaced {
                    if generated.contains(&old) {
                        // user-supplied constructors replace generated ones silently
                        table.pop_warning();
                    }
                }
            }
            Item::Stmt(s) => top_stmts.push(s.clone()),
            _ => {}
        }
    }
    let toplevel = FnBuilder::lower_toplevel(&reg, &builtins, &top_stmts)?;
    Ok(Module { reg, builtins, table, bodies, toplevel, generated })
}

/// Constructor methods generated for a struct declaration.
fn constructors(reg: &Registry, b: &Builtins, td: &TypeDef) -> Vec<(Type, Vec<TypeVar>, IrFunction)> {
    let decl = reg.decl(&td.name).expect("declared above");
    let fields = decl.fields.clone().unwrap_or_default();
    let params = decl.params.clone();
    let head = Type::Nominal(crate::types::Nominal {
        name: decl.name.clone(),
        kind: decl.kind,
        params: params.iter().map(TypeVar::occurrence).collect(),
    });
    let open = !params.is_empty();
    let wrap = |mut t: Type| {
        for v in params.iter().rev() {
            t = Type::exists(v.clone(), t);
        }
        t
    };
    let n = fields.len();
    let mut out = Vec::new();

    // S(x...) or S{P...}(x...): convert each argument to its field type
    let offset = usize::from(open);
    let mut fixed = Vec::new();
    if open {
        fixed.push(Builtins::type_of_type(head.clone()));
    }
    fixed.extend(std::iter::repeat_n(Type::Top, n));
    let mut f = SimpleFn::new(&td.name, fixed.len(), &params, td.span);
    let converted: Vec<Slot> = fields
        .iter()
        .enumerate()
        .map(|(i, (_, ft))| f.emit(Op::Convert { src: i + offset, ty: ft.clone(), open }))
        .collect();
    let v = f.emit(Op::New { ty: head.clone(), open, args: converted });
    out.push((wrap(Type::tuple(fixed)), params.clone(), f.finish(v)));

    // S(x::T1, ...) with the parameters implied by the field types
    if open && params.iter().all(|p| fields.iter().any(|(_, ft)| ft.occurs_free(&p.name))) {
        let fixed: Vec<Type> = fields.iter().map(|(_, ft)| ft.clone()).collect();
        let mut f = SimpleFn::new(&td.name, n, &params, td.span);
        let v = f.emit(Op::New { ty: head, open, args: (0..n).collect() });
        out.push((wrap(Type::tuple(fixed)), params.clone(), f.finish(v)));
    }
    let _ = b;
    out
}

/// Straight-line function bodies built directly.
struct SimpleFn {
    func: IrFunction,
}

impl SimpleFn {
    fn new(name: &str, nargs: usize, sparams: &[TypeVar], span: Span) -> Self {
        let slots = (0..nargs).map(|i| SlotInfo { name: Some(format!("x{}", i + 1)), declared: None }).collect();
        SimpleFn {
            func: IrFunction {
                name: name.into(),
                nargs,
                vararg: false,
                static_params: sparams.to_vec(),
                slots,
                blocks: vec![Block { stmts: vec![], term: Terminator::Unreachable, handler: None }],
                span,
            },
        }
    }

    fn emit(&mut self, op: Op) -> Slot {
        let dst = self.func.slots.len();
        self.func.slots.push(SlotInfo { name: None, declared: None });
        self.func.blocks[0].stmts.push(Stmt { dst: Some(dst), op, span: self.func.span });
        dst
    }

    fn finish(mut self, ret: Slot) -> IrFunction {
        self.func.blocks[0].term = Terminator::Return(ret);
        self.func
    }
}

struct LoopTargets {
    cont: BlockId,
    brk: BlockId,
}

struct FnBuilder<'a> {
    reg: &'a Registry,
    b: &'a Builtins,
    sparams: &'a [TypeVar],
    slots: Vec<SlotInfo>,
    vars: HashMap<String, Slot>,
    blocks: Vec<Block>,
    sealed: Vec<bool>,
    cur: BlockId,
    handler: Option<BlockId>,
    loops: Vec<LoopTargets>,
    /// Index expressions being lowered: (base, position, count), for `end`.
    ends: Vec<(Slot, usize, usize)>,
    /// Variables assigned on every path to the current point.
    defined: HashSet<Slot>,
    /// The current point is unreachable (after return/break/continue).
    dead: bool,
}

impl<'a> FnBuilder<'a> {
    fn new(reg: &'a Registry, b: &'a Builtins, sparams: &'a [TypeVar]) -> Self {
        FnBuilder {
            reg,
            b,
            sparams,
            slots: Vec::new(),
            vars: HashMap::new(),
            blocks: vec![Block { stmts: vec![], term: Terminator::Unreachable, handler: None }],
            sealed: vec![false],
            cur: 0,
            handler: None,
            loops: Vec::new(),
            ends: Vec::new(),
            defined: HashSet::new(),
            dead: false,
        }
    }

    fn lower_function(reg: &Registry, b: &Builtins, f: &FunctionDef, sparams: &[TypeVar]) -> R<IrFunction> {
        let mut fb = FnBuilder::new(reg, b, sparams);
        for p in &f.params {
            let s = fb.slots.len();
            fb.slots.push(SlotInfo { name: p.name.clone(), declared: None });
            if let Some(n) = &p.name {
                if fb.vars.insert(n.clone(), s).is_some() {
                    return invalid(f.span, format!("duplicate parameter `{n}`"));
                }
            }
            fb.defined.insert(s);
        }
        fb.scan_locals(&f.body)?;
        fb.tail(&f.body, f.span)?;
        Ok(fb.finish(&f.name, f.params.len(), f.params.last().is_some_and(|p| p.vararg), f.span))
    }

    fn lower_toplevel(reg: &Registry, b: &Builtins, stmts: &[ast::Stmt]) -> R<IrFunction> {
        let mut fb = FnBuilder::new(reg, b, &[]);
        fb.scan_locals(stmts)?;
        fb.tail(stmts, Span::default())?;
        Ok(fb.finish(TOPLEVEL, 0, false, Span::default()))
    }

    fn finish(self, name: &str, nargs: usize, vararg: bool, span: Span) -> IrFunction {
        IrFunction {
            name: name.into(),
            nargs,
            vararg,
            static_params: self.sparams.to_vec(),
            slots: self.slots,
            blocks: self.blocks,
            span,
        }
    }

    // ---- locals ----------------------------------------------------------

    fn scan_locals(&mut self, stmts: &[ast::Stmt]) -> R<()> {
        for s in stmts {
            match &s.kind {
                StmtKind::Expr(_) => {}
                StmtKind::Assign(lhs, _) | StmtKind::OpAssign(lhs, _, _) => self.scan_target(lhs),
                StmtKind::DeclAssign(name, te, _) => {
                    let t = resolve(self.reg, te, self.sparams, s.span)?;
                    let slot = self.local(name);
                    match &self.slots[slot].declared {
                        Some(prev) if *prev != t => {
                            return invalid(s.span, format!("conflicting type declarations for `{name}`"))
                        }
                        _ => self.slots[slot].declared = Some(t),
                    }
                }
                StmtKind::If(arms, els) => {
                    for (_, body) in arms {
                        self.scan_locals(body)?;
                    }
                    if let Some(body) = els {
                        self.scan_locals(body)?;
                    }
                }
                StmtKind::While(_, body) => self.scan_locals(body)?,
                StmtKind::For(specs, body) => {
                    for (v, _) in specs {
                        self.local(v);
                    }
                    self.scan_locals(body)?;
                }
                StmtKind::Try(body, handler) => {
                    self.scan_locals(body)?;
                    if let Some((var, body)) = handler {
                        if let Some(v) = var {
                            self.local(v);
                        }
                        self.scan_locals(body)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn scan_target(&mut self, lhs: &Expr) {
        match &lhs.kind {
            ExprKind::Var(n) => {
                self.local(n);
            }
            ExprKind::Tuple(items) => items.iter().for_each(|i| self.scan_target(i)),
            _ => {}
        }
    }

    fn local(&mut self, name: &str) -> Slot {
        if let Some(&s) = self.vars.get(name) {
            return s;
        }
        let s = self.slots.len();
        self.slots.push(SlotInfo { name: Some(name.to_string()), declared: None });
        self.vars.insert(name.to_string(), s);
        s
    }

    fn temp(&mut self) -> Slot {
        self.slots.push(SlotInfo { name: None, declared: None });
        self.slots.len() - 1
    }

    // ---- blocks ----------------------------------------------------------

    fn new_block(&mut self) -> BlockId {
        self.blocks.push(Block { stmts: vec![], term: Terminator::Unreachable, handler: self.handler });
        self.sealed.push(false);
        self.blocks.len() - 1
    }

    fn seal(&mut self, term: Terminator) {
        if !self.sealed[self.cur] {
            self.blocks[self.cur].term = term;
            self.sealed[self.cur] = true;
        }
    }

    /// Continue in a fresh block no path reaches.
    fn start_dead(&mut self) {
        self.cur = self.new_block();
        self.dead = true;
    }

    fn emit(&mut self, op: Op, span: Span) -> Slot {
        let dst = self.temp();
        self.emit_to(dst, op, span);
        dst
    }

    fn emit_to(&mut self, dst: Slot, op: Op, span: Span) {
        self.blocks[self.cur].stmts.push(Stmt { dst: Some(dst), op, span });
    }

    fn emit_void(&mut self, op: Op, span: Span) {
        self.blocks[self.cur].stmts.push(Stmt { dst: None, op, span });
    }

    fn konst(&mut self, lit: Lit, span: Span) -> Slot {
        self.emit(Op::Const(lit), span)
    }

    fn type_const(&mut self, ty: Type, span: Span) -> Slot {
        let open = self.is_open(&ty);
        self.konst(Lit::Type { ty, open }, span)
    }

    fn is_open(&self, t: &Type) -> bool {
        self.sparams.iter().any(|v| t.occurs_free(&v.name))
    }

    fn resolve(&self, e: &TypeExpr, span: Span) -> R<Type> {
        resolve(self.reg, e, self.sparams, span)
    }

    // ---- statements ------------------------------------------------------

    fn block(&mut self, stmts: &[ast::Stmt]) -> R<()> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    /// Lower a body whose last statement provides the return value.
    fn tail(&mut self, stmts: &[ast::Stmt], span: Span) -> R<()> {
        let Some((last, init)) = stmts.split_last() else {
            let v = self.konst(Lit::Nothing, span);
            self.seal(Terminator::Return(v));
            return Ok(());
        };
        self.block(init)?;
        match &last.kind {
            StmtKind::Expr(e) => {
                let v = self.expr(e)?;
                self.seal(Terminator::Return(v));
            }
            StmtKind::If(arms, els) => {
                let before = self.defined.clone();
                let was_dead = self.dead;
                for (cond, body) in arms {
                    let c = self.expr(cond)?;
                    let (then_b, else_b) = (self.new_block(), self.new_block());
                    self.seal(Terminator::Branch { cond: c, then: then_b, els: else_b });
                    self.cur = then_b;
                    self.tail(body, last.span)?;
                    self.cur = else_b;
                    self.defined = before.clone();
                    self.dead = was_dead;
                }
                self.tail(els.as_deref().unwrap_or(&[]), last.span)?;
            }
            StmtKind::Assign(lhs @ Expr { kind: ExprKind::Var(name), .. }, _)
            | StmtKind::OpAssign(lhs @ Expr { kind: ExprKind::Var(name), .. }, _, _) => {
                self.stmt(last)?;
                let _ = lhs;
                let v = self.vars[name];
                self.seal(Terminator::Return(v));
            }
            StmtKind::DeclAssign(name, _, _) => {
                self.stmt(last)?;
                let v = self.vars[name];
                self.seal(Terminator::Return(v));
            }
            StmtKind::Try(body, handler) => {
                let before = self.defined.clone();
                let was_dead = self.dead;
                let outer = self.handler;
                let hblock = self.new_block();
                self.handler = Some(hblock);
                let tb = self.new_block();
                self.seal(Terminator::Goto(tb));
                self.cur = tb;
                self.tail(body, last.span)?;
                self.handler = outer;
                self.cur = hblock;
                self.defined = before;
                self.dead = was_dead;
                match handler {
                    Some((var, hbody)) => {
                        if let Some(v) = var {
                            let s = self.vars[v];
                            self.emit_to(s, Op::Caught, last.span);
                            self.defined.insert(s);
                        }
                        self.tail(hbody, last.span)?;
                    }
                    None => self.tail(&[], last.span)?,
                }
            }
            _ => {
                self.stmt(last)?;
                let v = self.konst(Lit::Nothing, last.span);
                self.seal(Terminator::Return(v));
            }
        }
        Ok(())
    }

    fn stmt(&mut self, s: &ast::Stmt) -> R<()> {
        let span = s.span;
        match &s.kind {
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::DeclAssign(name, _, rhs) => {
                let v = self.expr(rhs)?;
                self.assign_var(name, v, span);
            }
            StmtKind::Assign(lhs, rhs) => match &lhs.kind {
                ExprKind::Var(name) => {
                    let v = self.expr(rhs)?;
                    self.assign_var(name, v, span);
                }
                ExprKind::Index(base, idx) => {
                    let b = self.expr(base)?;
                    let mut args = vec![Arg::Plain(b), Arg::Plain(b)];
                    args.extend(self.index_args(b, idx)?);
                    let v = self.expr(rhs)?;
                    args[1] = Arg::Plain(v);
                    self.emit_void(Op::Call { fname: "setindex!".into(), args }, span);
                }
                ExprKind::Field(obj, f) => {
                    let o = self.expr(obj)?;
                    let v = self.expr(rhs)?;
                    self.emit_void(Op::SetField(o, f.as_str().into(), v), span);
                }
                ExprKind::Tuple(items) => {
                    let v = self.expr(rhs)?;
                    for (i, item) in items.iter().enumerate() {
                        let ExprKind::Var(name) = &item.kind else {
                            return invalid(item.span, "only variables can be destructured into");
                        };
                        let d = self.emit(Op::Destructure(v, i), item.span);
                        self.assign_var(name, d, item.span);
                    }
                }
                _ => return invalid(span, "invalid assignment target"),
            },
            StmtKind::OpAssign(lhs, op, rhs) => match &lhs.kind {
                ExprKind::Var(name) => {
                    let old = self.expr(lhs)?;
                    let r = self.expr(rhs)?;
                    let v = self.call(op, vec![old, r], span);
                    self.assign_var(name, v, span);
                }
                ExprKind::Index(base, idx) => {
                    let b = self.expr(base)?;
                    let idx = self.index_args(b, idx)?;
                    let mut get = vec![Arg::Plain(b)];
                    get.extend(idx.iter().copied());
                    let old = self.emit(Op::Call { fname: "getindex".into(), args: get }, span);
                    let r = self.expr(rhs)?;
                    let v = self.call(op, vec![old, r], span);
                    let mut set = vec![Arg::Plain(b), Arg::Plain(v)];
                    set.extend(idx);
                    self.emit_void(Op::Call { fname: "setindex!".into(), args: set }, span);
                }
                ExprKind::Field(obj, f) => {
                    let o = self.expr(obj)?;
                    let old = self.emit(Op::GetField(o, f.as_str().into()), span);
                    let r = self.expr(rhs)?;
                    let v = self.call(op, vec![old, r], span);
                    self.emit_void(Op::SetField(o, f.as_str().into(), v), span);
                }
                _ => return invalid(span, "invalid assignment target"),
            },
            StmtKind::If(arms, els) => {
                let before = self.defined.clone();
                let was_dead = self.dead;
                let join = self.new_block();
                let mut outs: Vec<HashSet<Slot>> = Vec::new();
                for (cond, body) in arms {
                    let c = self.expr(cond)?;
                    let (then_b, else_b) = (self.new_block(), self.new_block());
                    self.seal(Terminator::Branch { cond: c, then: then_b, els: else_b });
                    self.cur = then_b;
                    self.block(body)?;
                    if !self.dead {
                        outs.push(std::mem::take(&mut self.defined));
                    }
                    self.seal(Terminator::Goto(join));
                    self.cur = else_b;
                    self.defined = before.clone();
                    self.dead = was_dead;
                }
                if let Some(body) = els {
                    self.block(body)?;
                }
                if !self.dead {
                    outs.push(std::mem::take(&mut self.defined));
                }
                self.seal(Terminator::Goto(join));
                self.cur = join;
                self.dead = was_dead || outs.is_empty();
                self.defined = intersect(outs).unwrap_or(before);
            }
            StmtKind::While(cond, body) => {
                let before = self.defined.clone();
                let was_dead = self.dead;
                let header = self.new_block();
                self.seal(Terminator::Goto(header));
                self.cur = header;
                let c = self.expr(cond)?;
                let (body_b, exit) = (self.new_block(), self.new_block());
                self.seal(Terminator::Branch { cond: c, then: body_b, els: exit });
                self.cur = body_b;
                self.loops.push(LoopTargets { cont: header, brk: exit });
                self.block(body)?;
                self.loops.pop();
                self.seal(Terminator::Goto(header));
                self.cur = exit;
                self.defined = before;
                self.dead = was_dead;
            }
            StmtKind::For(specs, body) => {
                let before = self.defined.clone();
                let was_dead = self.dead;
                self.for_loop(specs, body, None, span)?;
                self.defined = before;
                self.dead = was_dead;
            }
            StmtKind::Try(body, handler) => {
                let before = self.defined.clone();
                let was_dead = self.dead;
                let outer = self.handler;
                let hblock = self.new_block();
                self.handler = Some(hblock);
                let tb = self.new_block();
                self.seal(Terminator::Goto(tb));
                self.cur = tb;
                self.block(body)?;
                self.handler = outer;
                let join = self.new_block();
                let mut outs = Vec::new();
                if !self.dead {
                    outs.push(std::mem::take(&mut self.defined));
                }
                self.seal(Terminator::Goto(join));
                self.cur = hblock;
                self.defined = before.clone();
                self.dead = was_dead;
                if let Some((var, hbody)) = handler {
                    if let Some(v) = var {
                        let s = self.vars[v];
                        self.emit_to(s, Op::Caught, span);
                        self.defined.insert(s);
                    }
                    self.block(hbody)?;
                }
                if !self.dead {
                    outs.push(std::mem::take(&mut self.defined));
                }
                self.seal(Terminator::Goto(join));
                self.cur = join;
                self.dead = was_dead || outs.is_empty();
                self.defined = intersect(outs).unwrap_or(before);
            }
        }
        Ok(())
    }

    fn for_loop(&mut self, specs: &[(String, Expr)], body: &[ast::Stmt], outer_exit: Option<BlockId>, span: Span) -> R<()> {
        let (var, iter) = &specs[0];
        let int = self.b.int.clone();
        let ctr = self.temp();
        let (hi, fetch_from) = match &iter.kind {
            ExprKind::Call(f, ab) if f == ":" && ab.len() == 2 => {
                let a = self.expr(&ab[0])?;
                let b = self.expr(&ab[1])?;
                let lo = self.emit(Op::TypeAssert { src: a, ty: int.clone(), open: false }, iter.span);
                let hi = self.emit(Op::TypeAssert { src: b, ty: int.clone(), open: false }, iter.span);
                self.emit_to(ctr, Op::Move(lo), iter.span);
                (hi, None)
            }
            _ => {
                let it = self.expr(iter)?;
                let n = self.call("length", vec![it], iter.span);
                let hi = self.emit(Op::TypeAssert { src: n, ty: int.clone(), open: false }, iter.span);
                self.emit_to(ctr, Op::Const(Lit::Int(1)), iter.span);
                (hi, Some(it))
            }
        };
        let header = self.new_block();
        self.seal(Terminator::Goto(header));
        self.cur = header;
        let c = self.emit(Op::Intrinsic(Intrinsic::LeInt, vec![ctr, hi]), iter.span);
        let (body_b, latch, exit) = (self.new_block(), self.new_block(), self.new_block());
        self.seal(Terminator::Branch { cond: c, then: body_b, els: exit });
        self.cur = body_b;
        let value = match fetch_from {
            None => ctr,
            Some(it) => self.call("getindex", vec![it, ctr], iter.span),
        };
        self.assign_var(var, value, iter.span);
        let brk = outer_exit.unwrap_or(exit);
        if specs.len() > 1 {
            self.for_loop(&specs[1..], body, Some(brk), span)?;
        } else {
            self.loops.push(LoopTargets { cont: latch, brk });
            self.block(body)?;
            self.loops.pop();
        }
        self.seal(Terminator::Goto(latch));
        self.cur = latch;
        let one = self.konst(Lit::Int(1), iter.span);
        self.emit_to(ctr, Op::Intrinsic(Intrinsic::AddInt, vec![ctr, one]), iter.span);
        self.seal(Terminator::Goto(header));
        self.cur = exit;
        Ok(())
    }

    fn assign_var(&mut self, name: &str, v: Slot, span: Span) {
        let s = self.vars[name];
        if let Some(t) = self.slots[s].declared.clone() {
            let open = self.is_open(&t);
            self.emit_to(s, Op::Convert { src: v, ty: t, open }, span);
        } else if v != s {
            let last = self.blocks[self.cur].stmts.last_mut();
            match last {
                Some(st) if self.slots[v].name.is_none() && st.dst == Some(v) => st.dst = Some(s),
                _ => self.emit_to(s, Op::Move(v), span),
            }
        }
        self.defined.insert(s);
    }

    // ---- expressions -----------------------------------------------------

    fn call(&mut self, fname: &str, args: Vec<Slot>, span: Span) -> Slot {
        self.emit(Op::Call { fname: fname.into(), args: args.into_iter().map(Arg::Plain).collect() }, span)
    }

    fn args(&mut self, es: &[Expr]) -> R<Vec<Arg>> {
        let mut out = Vec::with_capacity(es.len());
        for e in es {
            out.push(match &e.kind {
                ExprKind::Splat(inner) => Arg::Splat(self.expr(inner)?),
                _ => Arg::Plain(self.expr(e)?),
            });
        }
        Ok(out)
    }

    fn index_args(&mut self, base: Slot, idx: &[Expr]) -> R<Vec<Arg>> {
        let mut out = Vec::with_capacity(idx.len());
        for (k, e) in idx.iter().enumerate() {
            self.ends.push((base, k, idx.len()));
            let a = match &e.kind {
                ExprKind::Splat(inner) => Arg::Splat(self.expr(inner)?),
                ExprKind::Colon => Arg::Plain(self.emit(Op::New { ty: self.b.colon.clone(), open: false, args: vec![] }, e.span)),
                _ => Arg::Plain(self.expr(e)?),
            };
            self.ends.pop();
            out.push(a);
        }
        Ok(out)
    }

    fn curly_type(&self, name: &str, curly: &[CurlyArg], span: Span) -> R<Type> {
        let mut params = Vec::with_capacity(curly.len());
        for c in curly {
            match c {
                CurlyArg::Type(t) => params.push(t.clone()),
                CurlyArg::Bound(_) => return invalid(span, "bounded parameters are only allowed in definitions"),
            }
        }
        self.resolve(&TypeExpr::Apply(name.to_string(), params), span)
    }

    fn expr(&mut self, e: &Expr) -> R<Slot> {
        let span = e.span;
        Ok(match &e.kind {
            ExprKind::Int(i) => self.konst(Lit::Int(*i), span),
            ExprKind::Float(f) => self.konst(Lit::Float(*f), span),
            ExprKind::Str(s) => self.konst(Lit::Str(s.as_str().into()), span),
            ExprKind::Bool(b) => self.konst(Lit::Bool(*b), span),
            ExprKind::Nothing => self.konst(Lit::Nothing, span),
            ExprKind::Var(name) => {
                if let Some(&s) = self.vars.get(name) {
                    if !self.dead && !self.defined.contains(&s) {
                        return Err(LowerError::UseBeforeAssign { span, name: name.clone() });
                    }
                    return Ok(s);
                }
                if let Some(i) = self.sparams.iter().rposition(|v| &*v.name == name) {
                    return Ok(self.emit(Op::StaticParam(i), span));
                }
                if self.reg.is_defined(name) {
                    let t = self.resolve(&TypeExpr::name(name), span)?;
                    return Ok(self.type_const(t, span));
                }
                return Err(LowerError::Undefined { span, name: name.clone() });
            }
            ExprKind::Curly(name, curly) => {
                let t = self.curly_type(name, curly, span)?;
                self.type_const(t, span)
            }
            ExprKind::Call(fname, args) => {
                if self.vars.contains_key(fname) {
                    return invalid(span, format!("`{fname}` is a variable, not a function"));
                }
                let args = self.args(args)?;
                self.emit(Op::Call { fname: fname.as_str().into(), args }, span)
            }
            ExprKind::CallCurly(name, curly, args) => {
                let t = self.curly_type(name, curly, span)?;
                let Some(head) = t.head().cloned() else {
                    return invalid(span, format!("`{name}{{...}}` does not name a constructible type"));
                };
                let ts = self.type_const(t, span);
                let mut all = vec![Arg::Plain(ts)];
                all.extend(self.args(args)?);
                self.emit(Op::Call { fname: head, args: all }, span)
            }
            ExprKind::Intrinsic(name, args) => {
                let Some(i) = Intrinsic::from_name(name) else {
                    return invalid(span, format!("unknown intrinsic @{name}"));
                };
                let (lo, hi) = i.arity();
                if args.len() < lo || args.len() > hi {
                    return invalid(span, format!("@{name} takes {lo}..{hi} arguments, got {}", args.len()));
                }
                let mut slots = Vec::with_capacity(args.len());
                for a in args {
                    if matches!(a.kind, ExprKind::Splat(_)) {
                        return invalid(a.span, "splatting is not allowed in intrinsic calls");
                    }
                    slots.push(self.expr(a)?);
                }
                self.emit(Op::Intrinsic(i, slots), span)
            }
            ExprKind::Splat(_) => return invalid(span, "`...` is only allowed in call arguments"),
            ExprKind::And(a, b) | ExprKind::Or(a, b) => {
                let is_and = matches!(e.kind, ExprKind::And(..));
                let r = self.temp();
                let x = self.expr(a)?;
                self.emit_to(r, Op::Move(x), span);
                let (rhs_b, join) = (self.new_block(), self.new_block());
                let term = if is_and {
                    Terminator::Branch { cond: x, then: rhs_b, els: join }
                } else {
                    Terminator::Branch { cond: x, then: join, els: rhs_b }
                };
                self.seal(term);
                self.cur = rhs_b;
                let was_dead = self.dead;
                let defined = self.defined.clone();
                let y = self.expr(b)?;
                self.emit_to(r, Op::Move(y), span);
                self.seal(Terminator::Goto(join));
                self.cur = join;
                self.dead = was_dead;
                self.defined = defined;
                r
            }
            ExprKind::Ternary(c, a, b) => {
                let r = self.temp();
                let cs = self.expr(c)?;
                let (tb, eb, join) = (self.new_block(), self.new_block(), self.new_block());
                self.seal(Terminator::Branch { cond: cs, then: tb, els: eb });
                let was_dead = self.dead;
                let before = self.defined.clone();
                let mut live = 0;
                for (blk, arm) in [(tb, a), (eb, b)] {
                    self.cur = blk;
                    self.dead = was_dead;
                    self.defined = before.clone();
                    let v = self.expr(arm)?;
                    self.emit_to(r, Op::Move(v), span);
                    live += usize::from(!self.dead);
                    self.seal(Terminator::Goto(join));
                }
                self.cur = join;
                self.dead = was_dead || live == 0;
                self.defined = before;
                r
            }
            ExprKind::Index(base, idx) => {
                let b = self.expr(base)?;
                let mut args = vec![Arg::Plain(b)];
                args.extend(self.index_args(b, idx)?);
                self.emit(Op::Call { fname: "getindex".into(), args }, span)
            }
            ExprKind::End => {
                let Some(&(b, k, n)) = self.ends.last() else {
                    return invalid(span, "`end` outside of an index expression");
                };
                if n == 1 {
                    self.call("length", vec![b], span)
                } else {
                    let d = self.konst(Lit::Int(k as i64 + 1), span);
                    self.call("size", vec![b, d], span)
                }
            }
            ExprKind::Colon => return invalid(span, "`:` outside of an index expression"),
            ExprKind::Field(obj, f) => {
                let o = self.expr(obj)?;
                self.emit(Op::GetField(o, f.as_str().into()), span)
            }
            ExprKind::Assert(inner, te) => {
                let src = self.expr(inner)?;
                let ty = self.resolve(te, span)?;
                let open = self.is_open(&ty);
                self.emit(Op::TypeAssert { src, ty, open }, span)
            }
            ExprKind::AnonParam(_) => return invalid(span, "`::T` without a value is only allowed in parameter lists"),
            ExprKind::Tuple(items) => {
                let args = self.args(items)?;
                self.emit(Op::Tuple(args), span)
            }
            ExprKind::Vect(items) => {
                let mut slots = Vec::with_capacity(items.len());
                for it in items {
                    if matches!(it.kind, ExprKind::Splat(_)) {
                        return invalid(it.span, "splatting is not supported in array literals");
                    }
                    slots.push(self.expr(it)?);
                }
                self.emit(Op::Intrinsic(Intrinsic::Vect, slots), span)
            }
            ExprKind::Matrix(rows) => {
                let width = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != width) || width == 0 {
                    return invalid(span, "matrix literal rows must have equal, nonzero lengths");
                }
                let n = self.konst(Lit::Int(rows.len() as i64), span);
                let mut slots = vec![n];
                for it in rows.iter().flatten() {
                    slots.push(self.expr(it)?);
                }
                self.emit(Op::Intrinsic(Intrinsic::Matrix, slots), span)
            }
            ExprKind::Return(value) => {
                let v = match value {
                    Some(v) => self.expr(v)?,
                    None => self.konst(Lit::Nothing, span),
                };
                self.seal(Terminator::Return(v));
                self.start_dead();
                self.konst(Lit::Nothing, span)
            }
            ExprKind::Break | ExprKind::Continue => {
                let Some(t) = self.loops.last() else {
                    return invalid(span, "`break`/`continue` outside of a loop");
                };
                let target = if matches!(e.kind, ExprKind::Break) { t.brk } else { t.cont };
                self.seal(Terminator::Goto(target));
                self.start_dead();
                self.konst(Lit::Nothing, span)
            }
        })
    }
}

fn intersect(mut sets: Vec<HashSet<Slot>>) -> Option<HashSet<Slot>> {
    let mut acc = sets.pop()?;
    for s in sets {
        acc.retain(|x| s.contains(x));
    }
    Some(acc)
}
