//! Block IR: functions are lists of basic blocks over numbered slots.
//! Values flow through slots; a slot written on several paths simply holds
//! whichever value arrived, so merges need no phi nodes.

use std::fmt::Write;
use std::sync::Arc;

use crate::dispatch::{MethodId, Span};
use crate::runtime::intrinsics::Intrinsic;
use crate::types::{Name, Registry, Type, TypeVar};

pub type Slot = usize;
pub type BlockId = usize;
/// Index of a specialized instance in the engine's instance table.
pub type InstId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Arc<str>),
    Nothing,
    /// A first-class type. `open` marks types mentioning static parameters,
    /// which are substituted when the statement runs.
    Type { ty: Type, open: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arg {
    Plain(Slot),
    /// `x...`: the elements of a tuple or array are passed separately.
    Splat(Slot),
}

impl Arg {
    pub fn slot(self) -> Slot {
        match self {
            Arg::Plain(s) | Arg::Splat(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Const(Lit),
    Move(Slot),
    /// A generic-function call, dispatched on the runtime argument types.
    Call { fname: Name, args: Vec<Arg> },
    /// A call whose target was resolved statically.
    Invoke { fname: Name, method: MethodId, inst: InstId, args: Vec<Slot> },
    Intrinsic(Intrinsic, Vec<Slot>),
    /// Allocate a struct of the given type from field values.
    New { ty: Type, open: bool, args: Vec<Slot> },
    GetField(Slot, Name),
    SetField(Slot, Name, Slot),
    /// `x :: T`: the value of `x` if it has type `T`, else an error.
    TypeAssert { src: Slot, ty: Type, open: bool },
    /// `convert(T, x)` for declared variables, skipped when `x` is already a `T`.
    Convert { src: Slot, ty: Type, open: bool },
    /// Value of the `i`th static parameter.
    StaticParam(usize),
    Tuple(Vec<Arg>),
    /// Element `i` (0-based) of a tuple or array, for `a, b = rhs`.
    Destructure(Slot, usize),
    /// Message of the error that transferred control to this handler.
    Caught,
}

impl Op {
    pub fn reads(&self) -> Vec<Slot> {
        match self {
            Op::Const(_) | Op::StaticParam(_) | Op::Caught => vec![],
            Op::Move(s) | Op::GetField(s, _) | Op::Destructure(s, _) => vec![*s],
            Op::TypeAssert { src, .. } | Op::Convert { src, .. } => vec![*src],
            Op::Call { args, .. } | Op::Tuple(args) => args.iter().map(|a| a.slot()).collect(),
            Op::Invoke { args, .. } | Op::Intrinsic(_, args) | Op::New { args, .. } => args.clone(),
            Op::SetField(a, _, b) => vec![*a, *b],
        }
    }

    pub fn map_slots(&mut self, f: &mut impl FnMut(Slot) -> Slot) {
        let map_arg = |a: &mut Arg, f: &mut dyn FnMut(Slot) -> Slot| match a {
            Arg::Plain(s) | Arg::Splat(s) => *s = f(*s),
        };
        match self {
            Op::Const(_) | Op::StaticParam(_) | Op::Caught => {}
            Op::Move(s) | Op::GetField(s, _) | Op::Destructure(s, _) => *s = f(*s),
            Op::TypeAssert { src, .. } | Op::Convert { src, .. } => *src = f(*src),
            Op::Call { args, .. } | Op::Tuple(args) => args.iter_mut().for_each(|a| map_arg(a, f)),
            Op::Invoke { args, .. } | Op::Intrinsic(_, args) | Op::New { args, .. } => {
                args.iter_mut().for_each(|s| *s = f(*s))
            }
            Op::SetField(a, _, b) => {
                *a = f(*a);
                *b = f(*b);
            }
        }
    }

    pub fn is_call(&self) -> bool {
        matches!(self, Op::Call { .. } | Op::Invoke { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub dst: Option<Slot>,
    pub op: Op,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Terminator {
    Goto(BlockId),
    /// The condition must be a Bool.
    Branch { cond: Slot, then: BlockId, els: BlockId },
    Return(Slot),
    Unreachable,
}

impl Terminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Terminator::Goto(b) => vec![*b],
            Terminator::Branch { then, els, .. } => vec![*then, *els],
            Terminator::Return(_) | Terminator::Unreachable => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub term: Terminator,
    /// Where control goes when a statement in this block raises an error.
    pub handler: Option<BlockId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotInfo {
    pub name: Option<String>,
    /// Declared with `x::T = ...`; every assignment converts to `T`.
    pub declared: Option<Type>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrFunction {
    pub name: Name,
    /// Arguments occupy slots `0..nargs`; a vararg method's last argument
    /// slot receives a tuple of the remaining values.
    pub nargs: usize,
    pub vararg: bool,
    pub static_params: Vec<TypeVar>,
    pub slots: Vec<SlotInfo>,
    pub blocks: Vec<Block>,
    pub span: Span,
}

impl IrFunction {
    pub fn stmt_count(&self) -> usize {
        self.blocks.iter().map(|b| b.stmts.len()).sum()
    }

    /// Blocks reachable from the entry, including exception handlers.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![0];
        while let Some(b) = stack.pop() {
            if std::mem::replace(&mut seen[b], true) {
                continue;
            }
            stack.extend(self.blocks[b].term.successors());
            stack.extend(self.blocks[b].handler);
        }
        seen
    }

    pub fn call_sites(&self) -> impl Iterator<Item = (BlockId, usize, &Stmt)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| blk.stmts.iter().enumerate().map(move |(i, s)| (b, i, s)))
            .filter(|(_, _, s)| s.op.is_call())
    }

    /// Human-readable listing.
    pub fn display(&self, reg: &Registry) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "function {} ({} args)", self.name, self.nargs);
        for (b, blk) in self.blocks.iter().enumerate() {
            let _ = write!(out, "  #{b}:");
            if let Some(h) = blk.handler {
                let _ = write!(out, " (handler #{h})");
            }
            out.push('\n');
            for s in &blk.stmts {
                out.push_str("    ");
                if let Some(d) = s.dst {
                    let _ = write!(out, "%{d} = ");
                }
                out.push_str(&show_op(&s.op, reg));
                out.push('\n');
            }
            let _ = writeln!(out, "    {}", show_term(&blk.term));
        }
        out
    }
}

fn show_args(args: &[Arg]) -> String {
    args.iter()
        .map(|a| match a {
            Arg::Plain(s) => format!("%{s}"),
            Arg::Splat(s) => format!("%{s}..."),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn show_slots(args: &[Slot]) -> String {
    args.iter().map(|s| format!("%{s}")).collect::<Vec<_>>().join(", ")
}

pub fn show_op(op: &Op, reg: &Registry) -> String {
    match op {
        Op::Const(l) => match l {
            Lit::Int(i) => i.to_string(),
            Lit::Float(f) => format!("{f:?}"),
            Lit::Bool(b) => b.to_string(),
            Lit::Str(s) => format!("{s:?}"),
            Lit::Nothing => "nothing".into(),
            Lit::Type { ty, .. } => reg.show(ty),
        },
        Op::Move(s) => format!("%{s}"),
        Op::Call { fname, args } => format!("call {fname}({})", show_args(args)),
        Op::Invoke { fname, method, args, .. } => format!("invoke {fname}#{method}({})", show_slots(args)),
        Op::Intrinsic(i, args) => format!("@{}({})", i.name(), show_slots(args)),
        Op::New { ty, args, .. } => format!("new {}({})", reg.show(ty), show_slots(args)),
        Op::GetField(s, f) => format!("%{s}.{f}"),
        Op::SetField(s, f, v) => format!("%{s}.{f} = %{v}"),
        Op::TypeAssert { src, ty, .. } => format!("%{src}::{}", reg.show(ty)),
        Op::Convert { src, ty, .. } => format!("convert({}, %{src})", reg.show(ty)),
        Op::StaticParam(i) => format!("static_param({i})"),
        Op::Tuple(args) => format!("({})", show_args(args)),
        Op::Destructure(s, i) => format!("destructure(%{s}, {i})"),
        Op::Caught => "caught_error".into(),
    }
}

fn show_term(t: &Terminator) -> String {
    match t {
        Terminator::Goto(b) => format!("goto #{b}"),
        Terminator::Branch { cond, then, els } => format!("if %{cond} goto #{then} else #{els}"),
        Terminator::Return(s) => format!("return %{s}"),
        Terminator::Unreachable => "unreachable".into(),
    }
}
