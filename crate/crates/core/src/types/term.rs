use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub type Name = Arc<str>;

/// Whether a nominal type can have instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    Abstract,
    Tag,
}

/// A symbolic type expression.
///
/// `Int` is a value parameter (the rank in `Array{T,2}`); it only ever
/// appears in parameter position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Top,
    Bottom,
    Nominal(Nominal),
    Union(Vec<Type>),
    Tuple(TupleType),
    Var(TypeVar),
    Exists(Box<TypeVar>, Box<Type>),
    Int(i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Nominal {
    pub name: Name,
    pub kind: Kind,
    pub params: Vec<Type>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TupleType {
    pub fixed: Vec<Type>,
    pub vararg: Option<Box<Type>>,
}

/// A bounded type variable. Occurrences carry a copy of the binder's bounds.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeVar {
    pub name: Name,
    pub lower: Box<Type>,
    pub upper: Box<Type>,
}

static FRESH: AtomicU64 = AtomicU64::new(0);

/// A variable name that cannot collide with source-level names.
pub fn fresh_name(hint: &str) -> Name {
    let n = FRESH.fetch_add(1, Ordering::Relaxed);
    let base = hint.split('#').next().unwrap_or("T");
    Name::from(format!("{base}#{n}"))
}

impl TypeVar {
    pub fn new(name: impl Into<Name>, lower: Type, upper: Type) -> Self {
        TypeVar { name: name.into(), lower: Box::new(lower), upper: Box::new(upper) }
    }

    pub fn unbounded(name: impl Into<Name>) -> Self {
        Self::new(name, Type::Bottom, Type::Top)
    }

    pub fn occurrence(&self) -> Type {
        Type::Var(self.clone())
    }
}

impl Type {
    pub fn tag(name: &str, params: Vec<Type>) -> Type {
        Type::Nominal(Nominal { name: name.into(), kind: Kind::Tag, params })
    }

    pub fn abstract_(name: &str, params: Vec<Type>) -> Type {
        Type::Nominal(Nominal { name: name.into(), kind: Kind::Abstract, params })
    }

    pub fn tuple(fixed: Vec<Type>) -> Type {
        Type::Tuple(TupleType { fixed, vararg: None })
    }

    pub fn vararg_tuple(fixed: Vec<Type>, rest: Type) -> Type {
        Type::Tuple(TupleType { fixed, vararg: Some(Box::new(rest)) })
    }

    pub fn exists(var: TypeVar, body: Type) -> Type {
        Type::Exists(Box::new(var), Box::new(body))
    }

    pub fn is_top(&self) -> bool {
        matches!(self, Type::Top)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Type::Bottom)
    }

    pub fn as_nominal(&self) -> Option<&Nominal> {
        match self {
            Type::Nominal(n) => Some(n),
            _ => None,
        }
    }

    /// Head name of a nominal type, looking through existential binders.
    pub fn head(&self) -> Option<&Name> {
        match self {
            Type::Nominal(n) => Some(&n.name),
            Type::Exists(_, body) => body.head(),
            _ => None,
        }
    }

    /// Body with all outer existential binders removed (variables left free).
    pub fn unwrap_exists(&self) -> &Type {
        match self {
            Type::Exists(_, body) => body.unwrap_exists(),
            t => t,
        }
    }

    /// The outermost-first list of binders.
    pub fn binders(&self) -> Vec<&TypeVar> {
        let mut out = Vec::new();
        let mut t = self;
        while let Type::Exists(v, body) = t {
            out.push(&**v);
            t = body;
        }
        out
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Type::Var(_) | Type::Exists(..) => true,
            Type::Nominal(n) => n.params.iter().any(Type::has_vars),
            Type::Union(ms) => ms.iter().any(Type::has_vars),
            Type::Tuple(t) => {
                t.fixed.iter().any(Type::has_vars) || t.vararg.as_deref().is_some_and(Type::has_vars)
            }
            Type::Top | Type::Bottom | Type::Int(_) => false,
        }
    }

    pub fn has_unions(&self) -> bool {
        match self {
            Type::Union(_) => true,
            Type::Nominal(n) => n.params.iter().any(Type::has_unions),
            Type::Tuple(t) => {
                t.fixed.iter().any(Type::has_unions) || t.vararg.as_deref().is_some_and(Type::has_unions)
            }
            Type::Exists(v, b) => v.upper.has_unions() || v.lower.has_unions() || b.has_unions(),
            _ => false,
        }
    }

    pub fn occurs_free(&self, name: &str) -> bool {
        match self {
            Type::Var(v) => &*v.name == name || v.lower.occurs_free(name) || v.upper.occurs_free(name),
            Type::Exists(v, body) => {
                v.lower.occurs_free(name)
                    || v.upper.occurs_free(name)
                    || (&*v.name != name && body.occurs_free(name))
            }
            Type::Nominal(n) => n.params.iter().any(|p| p.occurs_free(name)),
            Type::Union(ms) => ms.iter().any(|m| m.occurs_free(name)),
            Type::Tuple(t) => {
                t.fixed.iter().any(|p| p.occurs_free(name))
                    || t.vararg.as_deref().is_some_and(|p| p.occurs_free(name))
            }
            Type::Top | Type::Bottom | Type::Int(_) => false,
        }
    }

    /// Names of free variables, in first-occurrence order.
    pub fn free_vars(&self) -> Vec<Name> {
        fn go(t: &Type, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
            match t {
                Type::Var(v) => {
                    if !bound.contains(&v.name) && !out.contains(&v.name) {
                        out.push(v.name.clone());
                    }
                }
                Type::Exists(v, body) => {
                    go(&v.lower, bound, out);
                    go(&v.upper, bound, out);
                    bound.push(v.name.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                Type::Nominal(n) => n.params.iter().for_each(|p| go(p, bound, out)),
                Type::Union(ms) => ms.iter().for_each(|p| go(p, bound, out)),
                Type::Tuple(tt) => {
                    tt.fixed.iter().for_each(|p| go(p, bound, out));
                    if let Some(v) = &tt.vararg {
                        go(v, bound, out);
                    }
                }
                Type::Top | Type::Bottom | Type::Int(_) => {}
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Replace free occurrences of `name` with `with`.
    pub fn subst(&self, name: &str, with: &Type) -> Type {
        match self {
            Type::Var(v) if &*v.name == name => with.clone(),
            Type::Var(v) => Type::Var(TypeVar {
                name: v.name.clone(),
                lower: Box::new(v.lower.subst(name, with)),
                upper: Box::new(v.upper.subst(name, with)),
            }),
            Type::Exists(v, body) => {
                let var = TypeVar {
                    name: v.name.clone(),
                    lower: Box::new(v.lower.subst(name, with)),
                    upper: Box::new(v.upper.subst(name, with)),
                };
                if &*v.name == name {
                    Type::exists(var, (**body).clone())
                } else {
                    Type::exists(var, body.subst(name, with))
                }
            }
            Type::Nominal(n) => Type::Nominal(Nominal {
                name: n.name.clone(),
                kind: n.kind,
                params: n.params.iter().map(|p| p.subst(name, with)).collect(),
            }),
            Type::Union(ms) => Type::Union(ms.iter().map(|m| m.subst(name, with)).collect()),
            Type::Tuple(t) => Type::Tuple(TupleType {
                fixed: t.fixed.iter().map(|m| m.subst(name, with)).collect(),
                vararg: t.vararg.as_ref().map(|v| Box::new(v.subst(name, with))),
            }),
            Type::Top | Type::Bottom | Type::Int(_) => self.clone(),
        }
    }

    /// Substitute several variables at once (applied left to right).
    pub fn subst_all(&self, pairs: &[(Name, Type)]) -> Type {
        let mut t = self.clone();
        for (n, w) in pairs {
            if t.occurs_free(n) {
                t = t.subst(n, w);
            }
        }
        t
    }

    /// Nesting depth of parameter positions; `Int64` has depth 0 and
    /// `Array{Array{Int64,1},1}` depth 2. Tuple elements count as a level.
    pub fn depth(&self) -> usize {
        match self {
            Type::Nominal(n) => n.params.iter().map(|p| p.depth() + 1).max().unwrap_or(0),
            Type::Tuple(t) => t
                .fixed
                .iter()
                .chain(t.vararg.as_deref())
                .map(|p| p.depth() + 1)
                .max()
                .unwrap_or(0),
            Type::Union(ms) => ms.iter().map(Type::depth).max().unwrap_or(0),
            Type::Exists(_, body) => body.depth(),
            _ => 0,
        }
    }
}

impl From<Nominal> for Type {
    fn from(n: Nominal) -> Self {
        Type::Nominal(n)
    }
}
