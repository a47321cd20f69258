use crate::dispatch::Span;
use crate::types::{Binder, TypeExpr};

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Nothing,
    Var(String),
    /// `Name{...}`: a parameterized type, or the head of a definition with
    /// static parameters.
    Curly(String, Vec<CurlyArg>),
    /// `f(args...)`; operators are calls to the operator's name.
    Call(String, Vec<Expr>),
    /// `Name{...}(args...)`
    CallCurly(String, Vec<CurlyArg>, Vec<Expr>),
    /// `@name(args...)`
    Intrinsic(String, Vec<Expr>),
    /// `x...` in argument position.
    Splat(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Vec<Expr>),
    /// `end` inside an index expression.
    End,
    /// A bare `:` inside an index expression.
    Colon,
    Field(Box<Expr>, String),
    /// `x :: T`
    Assert(Box<Expr>, TypeExpr),
    /// `::T` with no value (only meaningful as a parameter).
    AnonParam(TypeExpr),
    Tuple(Vec<Expr>),
    /// `[a, b, c]`
    Vect(Vec<Expr>),
    /// `[a b; c d]`, rows of space-separated entries.
    Matrix(Vec<Vec<Expr>>),
    Return(Option<Box<Expr>>),
    Break,
    Continue,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

/// An entry between braces: a type, or a bounded variable `T<:Real`.
#[derive(Clone, Debug, PartialEq)]
pub enum CurlyArg {
    Type(TypeExpr),
    Bound(Binder),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Expr(Expr),
    /// `lhs = rhs`; the target is a variable, index, field or tuple.
    Assign(Expr, Expr),
    /// `x::T = rhs`
    DeclAssign(String, TypeExpr, Expr),
    /// `lhs op= rhs`
    OpAssign(Expr, String, Expr),
    If(Vec<(Expr, Vec<Stmt>)>, Option<Vec<Stmt>>),
    While(Expr, Vec<Stmt>),
    /// `for v = iter, w = iter2 ... end`
    For(Vec<(String, Expr)>, Vec<Stmt>),
    Try(Vec<Stmt>, Option<(Option<String>, Vec<Stmt>)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: Option<String>,
    pub ty: Option<TypeExpr>,
    pub vararg: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub static_params: Vec<Binder>,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    /// Written as `f(x) = expr`.
    pub short: bool,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeclKind {
    Abstract,
    /// `type`/`immutable`: a tag type with fields.
    Struct,
    /// A tag type without fields whose values come from intrinsics.
    Primitive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeDef {
    pub kind: DeclKind,
    pub name: String,
    pub params: Vec<Binder>,
    pub supertype: Option<TypeExpr>,
    pub fields: Vec<(String, Option<TypeExpr>)>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Type(TypeDef),
    Alias { name: String, params: Vec<String>, body: TypeExpr, span: Span },
    Function(FunctionDef),
    Include(String, Span),
    Stmt(Stmt),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub items: Vec<Item>,
}
