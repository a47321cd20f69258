use std::cell::RefCell;
use std::fmt::Write;
use std::rc::Rc;
use std::sync::Arc;

use crate::types::{Kind, Name, Nominal, Registry, Type};

/// Types the runtime constructs directly. Resolved once per program.
#[derive(Clone, Debug)]
pub struct Builtins {
    pub int: Type,
    pub float: Type,
    pub bool: Type,
    pub string: Type,
    pub nothing: Type,
    pub colon: Type,
    pub bounds_error: Type,
}

impl Builtins {
    pub const REQUIRED: &'static [&'static str] =
        &["Int64", "Float64", "Bool", "String", "Nothing", "Colon", "BoundsError", "Type", "Array", "UnitRange", "StepRange"];

    pub fn new(reg: &Registry) -> Result<Self, String> {
        for n in Self::REQUIRED {
            if reg.decl(n).is_none() {
                return Err(format!("built-in type `{n}` is not declared"));
            }
        }
        let t = |n: &str| Type::Nominal(Nominal { name: n.into(), kind: reg.decl(n).unwrap().kind, params: vec![] });
        Ok(Builtins {
            int: t("Int64"),
            float: t("Float64"),
            bool: t("Bool"),
            string: t("String"),
            nothing: t("Nothing"),
            colon: t("Colon"),
            bounds_error: t("BoundsError"),
        })
    }

    pub fn array(elt: Type, rank: usize) -> Type {
        Type::tag("Array", vec![elt, Type::Int(rank as i64)])
    }

    pub fn type_of_type(t: Type) -> Type {
        Type::tag("Type", vec![t])
    }

    pub fn range(&self, unit: bool) -> Type {
        Type::tag(if unit { "UnitRange" } else { "StepRange" }, vec![self.int.clone()])
    }
}

/// Element storage. Float64 and Int64 arrays are stored unboxed.
#[derive(Clone, Debug)]
pub enum ArrayData {
    F64(Vec<f64>),
    I64(Vec<i64>),
    Any(Vec<Value>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::F64(v) => v.len(),
            ArrayData::I64(v) => v.len(),
            ArrayData::Any(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Value {
        match self {
            ArrayData::F64(v) => Value::Float(v[i]),
            ArrayData::I64(v) => Value::Int(v[i]),
            ArrayData::Any(v) => v[i].clone(),
        }
    }

    /// Store a value already known to have the element type.
    pub fn set(&mut self, i: usize, x: Value) {
        match (self, x) {
            (ArrayData::F64(v), Value::Float(f)) => v[i] = f,
            (ArrayData::I64(v), Value::Int(n)) => v[i] = n,
            (ArrayData::Any(v), x) => v[i] = x,
            _ => unreachable!("element type checked by caller"),
        }
    }

    pub fn filled(elt: &Type, b: &Builtins, fill: &Value, n: usize) -> ArrayData {
        match fill {
            Value::Float(f) if *elt == b.float => ArrayData::F64(vec![*f; n]),
            Value::Int(i) if *elt == b.int => ArrayData::I64(vec![*i; n]),
            v => ArrayData::Any(vec![v.clone(); n]),
        }
    }
}

#[derive(Debug)]
pub struct ArrayObj {
    /// `Array{T,N}`
    pub ty: Type,
    pub elt: Type,
    pub dims: Vec<usize>,
    pub data: RefCell<ArrayData>,
}

impl ArrayObj {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug)]
pub struct StructObj {
    pub ty: Type,
    pub fields: RefCell<Vec<Value>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeVal {
    pub start: i64,
    pub step: i64,
    pub stop: i64,
    /// Built with `a:b` rather than `a:s:b`.
    pub unit: bool,
}

impl RangeVal {
    pub fn len(&self) -> i64 {
        if self.step == 0 {
            return 0;
        }
        let n = (self.stop - self.start) / self.step + 1;
        n.max(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, i: i64) -> i64 {
        self.start + (i - 1) * self.step
    }

    pub fn last(&self) -> i64 {
        self.start + (self.len() - 1) * self.step
    }
}

#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Arc<str>),
    Nothing,
    Type(Arc<Type>),
    Array(Rc<ArrayObj>),
    Struct(Rc<StructObj>),
    Range(RangeVal),
    Tuple(Rc<[Value]>),
}

impl Value {
    pub fn typeof_(&self, b: &Builtins) -> Type {
        match self {
            Value::Int(_) => b.int.clone(),
            Value::Float(_) => b.float.clone(),
            Value::Bool(_) => b.bool.clone(),
            Value::Str(_) => b.string.clone(),
            Value::Nothing => b.nothing.clone(),
            Value::Type(t) => Builtins::type_of_type((**t).clone()),
            Value::Array(a) => a.ty.clone(),
            Value::Struct(s) => s.ty.clone(),
            Value::Range(r) => b.range(r.unit),
            Value::Tuple(items) => Type::tuple(items.iter().map(|v| v.typeof_(b)).collect()),
        }
    }

    pub fn ty(t: Type) -> Value {
        Value::Type(Arc::new(t))
    }

    pub fn str(s: &str) -> Value {
        Value::Str(s.into())
    }

    /// Deterministic rendering used for printing results and for comparing
    /// runs; floats print in shortest round-trip form.
    pub fn repr(&self, reg: &Registry) -> String {
        let mut s = String::new();
        self.write(reg, &mut s, true);
        s
    }

    /// Like [`Value::repr`] but strings print without quotes.
    pub fn display(&self, reg: &Registry) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            v => v.repr(reg),
        }
    }

    fn write(&self, reg: &Registry, out: &mut String, _top: bool) {
        match self {
            Value::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Value::Float(f) => write_float(*f, out),
            Value::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Value::Str(s) => {
                let _ = write!(out, "{s:?}");
            }
            Value::Nothing => out.push_str("nothing"),
            Value::Type(t) => out.push_str(&reg.show(t)),
            Value::Range(r) => {
                if r.unit {
                    let _ = write!(out, "{}:{}", r.start, r.stop);
                } else {
                    let _ = write!(out, "{}:{}:{}", r.start, r.step, r.stop);
                }
            }
            Value::Tuple(items) => {
                out.push('(');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.write(reg, out, false);
                }
                if items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
            Value::Struct(s) => {
                out.push_str(&reg.show(&s.ty));
                out.push('(');
                for (i, v) in s.fields.borrow().iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.write(reg, out, false);
                }
                out.push(')');
            }
            Value::Array(a) => {
                let data = a.data.borrow();
                if a.dims.len() == 2 {
                    let (m, n) = (a.dims[0], a.dims[1]);
                    out.push('[');
                    for i in 0..m {
                        if i > 0 {
                            out.push_str("; ");
                        }
                        for j in 0..n {
                            if j > 0 {
                                out.push(' ');
                            }
                            data.get(i + j * m).write(reg, out, false);
                        }
                    }
                    out.push(']');
                } else {
                    if a.dims.len() != 1 {
                        let dims: Vec<String> = a.dims.iter().map(|d| d.to_string()).collect();
                        let _ = write!(out, "reshape({}) ", dims.join("x"));
                    }
                    out.push('[');
                    for i in 0..data.len() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        data.get(i).write(reg, out, false);
                    }
                    out.push(']');
                }
            }
        }
    }

    /// Identity for mutable objects, value equality otherwise (`===`).
    pub fn egal(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Nothing, Value::Nothing) => true,
            (Value::Type(a), Value::Type(b)) => a == b,
            (Value::Array(a), Value::Array(b)) => Rc::ptr_eq(a, b),
            (Value::Struct(a), Value::Struct(b)) => {
                Rc::ptr_eq(a, b)
                    || (a.ty == b.ty && a.fields.borrow().is_empty() && b.fields.borrow().is_empty())
            }
            (Value::Range(a), Value::Range(b)) => a == b,
            (Value::Tuple(a), Value::Tuple(b)) => a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.egal(y)),
            _ => false,
        }
    }
}

pub fn write_float(f: f64, out: &mut String) {
    if f.is_nan() {
        out.push_str("NaN");
    } else if f.is_infinite() {
        out.push_str(if f > 0.0 { "Inf" } else { "-Inf" });
    } else {
        let _ = write!(out, "{f:?}");
    }
}

/// Element type of an array type `Array{T,N}`.
pub fn array_parts(t: &Type) -> Option<(&Type, i64)> {
    match t {
        Type::Nominal(n) if &*n.name == "Array" && n.kind == Kind::Tag => match n.params.as_slice() {
            [elt, Type::Int(rank)] => Some((elt, *rank)),
            _ => None,
        },
        _ => None,
    }
}

pub fn struct_name(t: &Type) -> Option<&Name> {
    match t {
        Type::Nominal(n) => Some(&n.name),
        _ => None,
    }
}
