//! Primitive operations written `@name(args...)` in source. Each has a
//! runtime implementation and a result-type rule used by inference.

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::value::{array_parts, ArrayData, ArrayObj, Builtins, RangeVal, StructObj, Value};
use super::{ExecStats, RtError};
use crate::types::{fresh_name, Registry, Type, TypeVar};

macro_rules! intrinsics {
    ($($variant:ident = $name:literal, $min:literal, $max:expr;)*) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum Intrinsic { $($variant),* }

        impl Intrinsic {
            pub const ALL: &'static [Intrinsic] = &[$(Intrinsic::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Intrinsic::$variant => $name),* }
            }

            /// Accepted argument counts, inclusive.
            pub fn arity(self) -> (usize, usize) {
                match self { $(Intrinsic::$variant => ($min, $max)),* }
            }

            pub fn from_name(s: &str) -> Option<Intrinsic> {
                match s { $($name => Some(Intrinsic::$variant),)* _ => None }
            }
        }
    };
}

const MANY: usize = usize::MAX;

intrinsics! {
    AddInt = "add_int", 2, 2;
    SubInt = "sub_int", 2, 2;
    MulInt = "mul_int", 2, 2;
    DivInt = "div_int", 2, 2;
    RemInt = "rem_int", 2, 2;
    NegInt = "neg_int", 1, 1;
    AbsInt = "abs_int", 1, 1;
    PowInt = "pow_int", 2, 2;
    LtInt = "lt_int", 2, 2;
    LeInt = "le_int", 2, 2;
    EqInt = "eq_int", 2, 2;
    AddFloat = "add_float", 2, 2;
    SubFloat = "sub_float", 2, 2;
    MulFloat = "mul_float", 2, 2;
    DivFloat = "div_float", 2, 2;
    NegFloat = "neg_float", 1, 1;
    AbsFloat = "abs_float", 1, 1;
    SqrtFloat = "sqrt_float", 1, 1;
    PowFloat = "pow_float", 2, 2;
    LtFloat = "lt_float", 2, 2;
    LeFloat = "le_float", 2, 2;
    EqFloat = "eq_float", 2, 2;
    IntToFloat = "int_to_float", 1, 1;
    NotBool = "not_bool", 1, 1;
    Egal = "egal", 2, 2;
    TypeOf = "typeof", 1, 1;
    Isa = "isa", 2, 2;
    Subtype = "subtype", 2, 2;
    TypeJoin = "type_join", 2, 2;
    Str = "string", 0, MANY;
    Println = "println", 0, MANY;
    Error = "error", 1, 1;
    Throw = "throw", 1, 1;
    Probe = "probe", 1, 1;
    Randn = "randn", 1, 2;
    Randperm = "randperm", 1, 1;
    ArrayFill = "array_fill", 3, MANY;
    ArrayRef = "array_ref", 2, MANY;
    ArraySet = "array_set", 3, MANY;
    ArrayLen = "array_len", 1, 1;
    ArraySize = "array_size", 1, 1;
    ArraySizeDim = "array_size_dim", 2, 2;
    SliceGet = "slice_get", 2, MANY;
    SliceSet = "slice_set", 3, MANY;
    ArrayCopy = "array_copy", 1, 1;
    ArrayFillSet = "array_fill!", 2, 2;
    ArrayAbs = "array_abs", 1, 1;
    ArrayAdd = "array_add", 2, 2;
    ArraySub = "array_sub", 2, 2;
    ArrayMulScalar = "array_mul_scalar", 2, 2;
    ArrayDivScalar = "array_div_scalar", 2, 2;
    MatMul = "matmul", 2, 2;
    Transpose = "transpose", 1, 1;
    Indmax = "indmax", 1, 1;
    Ind2sub = "ind2sub", 2, 2;
    Vect = "vect", 0, MANY;
    Matrix = "matrix", 1, MANY;
    TupleGet = "tuple_get", 2, 2;
    TupleLen = "tuple_len", 1, 1;
    RangeNew = "range_new", 2, 2;
    RangeStepNew = "range_step_new", 3, 3;
    RangeFirst = "range_first", 1, 1;
    RangeStep = "range_step", 1, 1;
    RangeLast = "range_last", 1, 1;
    RangeLen = "range_len", 1, 1;
    RangeRef = "range_ref", 2, 2;
}

/// State intrinsics may touch.
pub struct Ctx<'a> {
    pub reg: &'a Registry,
    pub b: &'a Builtins,
    pub rng: &'a mut rand_chacha::ChaCha8Rng,
    pub out: &'a mut String,
    pub stats: &'a mut ExecStats,
}

fn bad(i: Intrinsic, args: &[Value], ctx: &Ctx) -> RtError {
    let shown: Vec<String> = args.iter().map(|a| ctx.reg.show(&a.typeof_(ctx.b))).collect();
    RtError::TypeAssert(format!("@{} cannot be applied to ({})", i.name(), shown.join(", ")))
}

fn int(v: &Value) -> Option<i64> {
    match v {
        Value::Int(i) => Some(*i),
        _ => None,
    }
}

pub fn new_array(ctx: &mut Ctx, elt: Type, dims: Vec<usize>, data: ArrayData) -> Value {
    ctx.stats.allocations += 1;
    ctx.stats.allocated_cells += data.len() as u64;
    let ty = Builtins::array(elt.clone(), dims.len());
    Value::Array(Rc::new(ArrayObj { ty, elt, dims, data: RefCell::new(data) }))
}

pub fn new_struct(ctx: &mut Ctx, ty: Type, fields: Vec<Value>) -> Value {
    // field-less singletons such as `Colon()` are not heap objects
    if !fields.is_empty() {
        ctx.stats.allocations += 1;
        ctx.stats.allocated_cells += fields.len() as u64;
    }
    Value::Struct(Rc::new(StructObj { ty, fields: RefCell::new(fields) }))
}

fn index_of(v: &Value) -> Option<usize> {
    // 1-based; non-positive values are reported as out of bounds by callers
    int(v).map(|i| if i < 1 { usize::MAX } else { (i - 1) as usize })
}

fn linear(a: &ArrayObj, idx: &[Value]) -> Result<usize, RtError> {
    let oob = || RtError::Bounds(format!("index ({}) out of bounds for size {:?}", show_idx(idx), a.dims));
    if idx.len() == 1 {
        let i = index_of(&idx[0]).ok_or_else(oob)?;
        return if i < a.len() { Ok(i) } else { Err(oob()) };
    }
    if idx.len() < a.dims.len() {
        return Err(oob());
    }
    let mut lin = 0usize;
    let mut stride = 1usize;
    for (k, v) in idx.iter().enumerate() {
        let i = index_of(v).ok_or_else(oob)?;
        let d = a.dims.get(k).copied().unwrap_or(1);
        if i >= d {
            return Err(oob());
        }
        lin += i * stride;
        stride *= d;
    }
    Ok(lin)
}

fn show_idx(idx: &[Value]) -> String {
    idx.iter()
        .map(|v| match v {
            Value::Int(i) => i.to_string(),
            _ => "..".into(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Store with the element-type invariant; Int64 values widen into Float64 arrays.
fn store(ctx: &Ctx, a: &ArrayObj, i: usize, x: Value) -> Result<(), RtError> {
    let mut data = a.data.borrow_mut();
    match (&mut *data, x) {
        (ArrayData::F64(v), Value::Float(f)) => v[i] = f,
        (ArrayData::F64(v), Value::Int(n)) => v[i] = n as f64,
        (ArrayData::I64(v), Value::Int(n)) => v[i] = n,
        (ArrayData::Any(v), x) => {
            let t = x.typeof_(ctx.b);
            if !ctx.reg.subtype(&t, &a.elt) {
                return Err(RtError::TypeAssert(format!(
                    "cannot store a {} in an array of {}",
                    ctx.reg.show(&t),
                    ctx.reg.show(&a.elt)
                )));
            }
            v[i] = x;
        }
        (_, x) => {
            return Err(RtError::TypeAssert(format!(
                "cannot store a {} in an array of {}",
                ctx.reg.show(&x.typeof_(ctx.b)),
                ctx.reg.show(&a.elt)
            )))
        }
    }
    Ok(())
}

/// Resolved positions selected by one index of a slice.
fn index_list(v: &Value, extent: usize, ctx: &Ctx) -> Result<(Vec<usize>, bool), RtError> {
    let oob = |i: i64| RtError::Bounds(format!("index {i} out of bounds for extent {extent}"));
    let check = |i: i64| if i >= 1 && (i as usize) <= extent { Ok(i as usize - 1) } else { Err(oob(i)) };
    match v {
        Value::Int(i) => Ok((vec![check(*i)?], true)),
        Value::Range(r) => Ok(((1..=r.len()).map(|k| check(r.at(k))).collect::<Result<_, _>>()?, false)),
        Value::Struct(s) if s.ty == ctx.b.colon => Ok(((0..extent).collect(), false)),
        Value::Array(a) => {
            let data = a.data.borrow();
            match &*data {
                ArrayData::I64(xs) => Ok((xs.iter().map(|&i| check(i)).collect::<Result<_, _>>()?, false)),
                _ => Err(RtError::TypeAssert("array indices must be integers".into())),
            }
        }
        _ => Err(RtError::TypeAssert(format!("invalid index of type {}", ctx.reg.show(&v.typeof_(ctx.b))))),
    }
}

/// Positions (column-major over the index product) and result shape.
fn slice_plan(a: &ArrayObj, idx: &[Value], ctx: &Ctx) -> Result<(Vec<usize>, Vec<usize>), RtError> {
    let extents: Vec<usize> = if idx.len() == 1 {
        vec![a.len()]
    } else if idx.len() >= a.dims.len() {
        (0..idx.len()).map(|k| a.dims.get(k).copied().unwrap_or(1)).collect()
    } else {
        return Err(RtError::Bounds(format!("{} indices into an array of rank {}", idx.len(), a.dims.len())));
    };
    let mut lists = Vec::with_capacity(idx.len());
    let mut last_nonscalar = None;
    for (k, v) in idx.iter().enumerate() {
        let (l, scalar) = index_list(v, extents[k], ctx)?;
        if !scalar {
            last_nonscalar = Some(k);
        }
        lists.push(l);
    }
    let shape: Vec<usize> = match last_nonscalar {
        Some(k) => lists[..=k].iter().map(Vec::len).collect(),
        None => vec![],
    };
    let total: usize = lists.iter().map(Vec::len).product();
    let mut positions = Vec::with_capacity(total);
    let mut strides = vec![1usize; extents.len()];
    for k in 1..extents.len() {
        strides[k] = strides[k - 1] * extents[k - 1];
    }
    if total > 0 {
        let mut counter = vec![0usize; lists.len()];
        'outer: loop {
            positions.push(counter.iter().enumerate().map(|(k, &c)| lists[k][c] * strides[k]).sum());
            for k in 0..counter.len() {
                counter[k] += 1;
                if counter[k] < lists[k].len() {
                    continue 'outer;
                }
                counter[k] = 0;
            }
            break;
        }
    }
    Ok((positions, shape))
}

/// Element type for `[a, b, ...]`: the common type if all agree, Float64 for
/// mixed Int64/Float64, otherwise the join.
pub fn literal_eltype(reg: &Registry, b: &Builtins, tys: &[Type]) -> Type {
    if tys.is_empty() {
        return Type::Top;
    }
    if tys.iter().all(|t| *t == tys[0]) {
        return tys[0].clone();
    }
    if tys.iter().all(|t| *t == b.int || *t == b.float) {
        return b.float.clone();
    }
    reg.join_all(tys.iter())
}

fn literal_array(ctx: &mut Ctx, items: &[Value], dims: Vec<usize>) -> Result<Value, RtError> {
    let tys: Vec<Type> = items.iter().map(|v| v.typeof_(ctx.b)).collect();
    let elt = literal_eltype(ctx.reg, ctx.b, &tys);
    let data = if elt == ctx.b.float {
        ArrayData::F64(
            items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => *f,
                    Value::Int(i) => *i as f64,
                    _ => unreachable!(),
                })
                .collect(),
        )
    } else if elt == ctx.b.int {
        ArrayData::I64(items.iter().map(|v| int(v).unwrap()).collect())
    } else {
        ArrayData::Any(items.to_vec())
    };
    Ok(new_array(ctx, elt, dims, data))
}

fn map_f64(a: &ArrayObj, f: impl Fn(f64) -> f64) -> Option<ArrayData> {
    match &*a.data.borrow() {
        ArrayData::F64(v) => Some(ArrayData::F64(v.iter().map(|&x| f(x)).collect())),
        _ => None,
    }
}

fn zip_arrays(a: &ArrayObj, b: &ArrayObj, ff: fn(f64, f64) -> f64, fi: fn(i64, i64) -> i64) -> Option<ArrayData> {
    if a.dims != b.dims {
        return None;
    }
    match (&*a.data.borrow(), &*b.data.borrow()) {
        (ArrayData::F64(x), ArrayData::F64(y)) => {
            Some(ArrayData::F64(x.iter().zip(y).map(|(&p, &q)| ff(p, q)).collect()))
        }
        (ArrayData::I64(x), ArrayData::I64(y)) => {
            Some(ArrayData::I64(x.iter().zip(y).map(|(&p, &q)| fi(p, q)).collect()))
        }
        _ => None,
    }
}

fn dims_of(v: &Value) -> Option<Vec<usize>> {
    match v {
        Value::Tuple(items) => items.iter().map(|x| int(x).filter(|&i| i >= 0).map(|i| i as usize)).collect(),
        Value::Int(i) if *i >= 0 => Some(vec![*i as usize]),
        _ => None,
    }
}

pub fn eval(i: Intrinsic, args: &[Value], ctx: &mut Ctx) -> Result<Value, RtError> {
    use Intrinsic as I;
    use Value as V;
    let r = match (i, args) {
        (I::AddInt, [V::Int(a), V::Int(b)]) => V::Int(a.wrapping_add(*b)),
        (I::SubInt, [V::Int(a), V::Int(b)]) => V::Int(a.wrapping_sub(*b)),
        (I::MulInt, [V::Int(a), V::Int(b)]) => V::Int(a.wrapping_mul(*b)),
        (I::DivInt, [V::Int(a), V::Int(b)]) => {
            if *b == 0 {
                return Err(RtError::DivideByZero);
            }
            V::Int(a.wrapping_div(*b))
        }
        (I::RemInt, [V::Int(a), V::Int(b)]) => {
            if *b == 0 {
                return Err(RtError::DivideByZero);
            }
            V::Int(a.wrapping_rem(*b))
        }
        (I::NegInt, [V::Int(a)]) => V::Int(a.wrapping_neg()),
        (I::AbsInt, [V::Int(a)]) => V::Int(a.wrapping_abs()),
        (I::PowInt, [V::Int(a), V::Int(b)]) => {
            if *b < 0 {
                return Err(RtError::Domain(format!("negative integer exponent {b}")));
            }
            V::Int(a.wrapping_pow((*b).min(u32::MAX as i64) as u32))
        }
        (I::LtInt, [V::Int(a), V::Int(b)]) => V::Bool(a < b),
        (I::LeInt, [V::Int(a), V::Int(b)]) => V::Bool(a <= b),
        (I::EqInt, [V::Int(a), V::Int(b)]) => V::Bool(a == b),
        (I::AddFloat, [V::Float(a), V::Float(b)]) => V::Float(a + b),
        (I::SubFloat, [V::Float(a), V::Float(b)]) => V::Float(a - b),
        (I::MulFloat, [V::Float(a), V::Float(b)]) => V::Float(a * b),
        (I::DivFloat, [V::Float(a), V::Float(b)]) => V::Float(a / b),
        (I::NegFloat, [V::Float(a)]) => V::Float(-a),
        (I::AbsFloat, [V::Float(a)]) => V::Float(a.abs()),
        (I::SqrtFloat, [V::Float(a)]) => {
            if *a < 0.0 {
                return Err(RtError::Domain(format!("sqrt of negative number {a}")));
            }
            V::Float(a.sqrt())
        }
        (I::PowFloat, [V::Float(a), V::Float(b)]) => V::Float(a.powf(*b)),
        (I::LtFloat, [V::Float(a), V::Float(b)]) => V::Bool(a < b),
        (I::LeFloat, [V::Float(a), V::Float(b)]) => V::Bool(a <= b),
        (I::EqFloat, [V::Float(a), V::Float(b)]) => V::Bool(a == b),
        (I::IntToFloat, [V::Int(a)]) => V::Float(*a as f64),
        (I::NotBool, [V::Bool(a)]) => V::Bool(!a),
        (I::Egal, [a, b]) => V::Bool(a.egal(b)),
        (I::TypeOf, [a]) => V::ty(a.typeof_(ctx.b)),
        (I::Isa, [a, V::Type(t)]) => V::Bool(ctx.reg.subtype(&a.typeof_(ctx.b), t)),
        (I::Subtype, [V::Type(a), V::Type(b)]) => V::Bool(ctx.reg.subtype(a, b)),
        (I::TypeJoin, [V::Type(a), V::Type(b)]) => V::ty(ctx.reg.join(a, b)),
        (I::Str, parts) => V::str(&parts.iter().map(|p| p.display(ctx.reg)).collect::<String>()),
        (I::Println, parts) => {
            for p in parts {
                ctx.out.push_str(&p.display(ctx.reg));
            }
            ctx.out.push('\n');
            V::Nothing
        }
        (I::Error, [msg]) => return Err(RtError::User(msg.display(ctx.reg))),
        (I::Throw, [x]) => {
            return Err(match x {
                V::Struct(s) if s.ty == ctx.b.bounds_error => RtError::Bounds("BoundsError()".into()),
                other => RtError::User(other.repr(ctx.reg)),
            })
        }
        (I::Probe, [name]) => {
            *ctx.stats.probes.entry(name.display(ctx.reg)).or_default() += 1;
            V::Nothing
        }
        (I::Randn, dims) => {
            let dims: Option<Vec<usize>> = dims.iter().map(|d| int(d).filter(|&i| i >= 0).map(|i| i as usize)).collect();
            let Some(dims) = dims else { return Err(bad(i, args, ctx)) };
            let n: usize = dims.iter().product();
            let data: Vec<f64> = (0..n).map(|_| ctx.rng.sample(StandardNormal)).collect();
            let elt = ctx.b.float.clone();
            new_array(ctx, elt, dims, ArrayData::F64(data))
        }
        (I::Randperm, [V::Int(n)]) if *n >= 0 => {
            let mut p: Vec<i64> = (1..=*n).collect();
            // Fisher-Yates
            for k in (1..p.len()).rev() {
                let j = ctx.rng.random_range(0..=k);
                p.swap(k, j);
            }
            let elt = ctx.b.int.clone();
            new_array(ctx, elt, vec![*n as usize], ArrayData::I64(p))
        }
        (I::ArrayFill, [V::Type(elt), fill, dims @ ..]) => {
            let dims: Option<Vec<usize>> = dims.iter().map(|d| int(d).filter(|&i| i >= 0).map(|i| i as usize)).collect();
            let Some(dims) = dims else { return Err(bad(i, args, ctx)) };
            let ft = fill.typeof_(ctx.b);
            if !ctx.reg.subtype(&ft, elt) {
                return Err(RtError::TypeAssert(format!(
                    "cannot fill an array of {} with a {}",
                    ctx.reg.show(elt),
                    ctx.reg.show(&ft)
                )));
            }
            let n = dims.iter().product();
            let data = ArrayData::filled(elt, ctx.b, fill, n);
            new_array(ctx, (**elt).clone(), dims, data)
        }
        (I::ArrayRef, [V::Array(a), idx @ ..]) if idx.iter().all(|x| int(x).is_some()) => {
            let k = linear(a, idx)?;
            let x = a.data.borrow().get(k);
            x
        }
        (I::ArraySet, [V::Array(a), x, idx @ ..]) if idx.iter().all(|x| int(x).is_some()) => {
            let k = linear(a, idx)?;
            store(ctx, a, k, x.clone())?;
            V::Nothing
        }
        (I::ArrayLen, [V::Array(a)]) => V::Int(a.len() as i64),
        (I::ArraySize, [V::Array(a)]) => V::Tuple(a.dims.iter().map(|&d| V::Int(d as i64)).collect()),
        (I::ArraySizeDim, [V::Array(a), V::Int(d)]) => {
            if *d < 1 {
                return Err(RtError::Bounds(format!("dimension {d} out of range")));
            }
            V::Int(a.dims.get(*d as usize - 1).copied().unwrap_or(1) as i64)
        }
        (I::SliceGet, [V::Array(a), idx @ ..]) => {
            if idx.iter().all(|x| int(x).is_some()) {
                let k = linear(a, idx)?;
                return Ok(a.data.borrow().get(k));
            }
            let (pos, shape) = slice_plan(a, idx, ctx)?;
            let data = {
                let src = a.data.borrow();
                match &*src {
                    ArrayData::F64(v) => ArrayData::F64(pos.iter().map(|&p| v[p]).collect()),
                    ArrayData::I64(v) => ArrayData::I64(pos.iter().map(|&p| v[p]).collect()),
                    ArrayData::Any(v) => ArrayData::Any(pos.iter().map(|&p| v[p].clone()).collect()),
                }
            };
            new_array(ctx, a.elt.clone(), shape, data)
        }
        (I::SliceSet, [V::Array(a), x, idx @ ..]) => {
            let (pos, _) = slice_plan(a, idx, ctx)?;
            match x {
                V::Array(src) => {
                    if src.len() != pos.len() {
                        return Err(RtError::Bounds(format!(
                            "cannot assign {} elements to {} destinations",
                            src.len(),
                            pos.len()
                        )));
                    }
                    // copy first: the source may alias the destination
                    let vals = src.data.borrow().clone();
                    match (&mut *a.data.borrow_mut(), vals) {
                        (ArrayData::F64(d), ArrayData::F64(s)) => {
                            pos.iter().zip(s).for_each(|(&p, x)| d[p] = x);
                            return Ok(V::Nothing);
                        }
                        (ArrayData::I64(d), ArrayData::I64(s)) => {
                            pos.iter().zip(s).for_each(|(&p, x)| d[p] = x);
                            return Ok(V::Nothing);
                        }
                        _ => {}
                    }
                    let vals = src.data.borrow().clone();
                    for (k, &p) in pos.iter().enumerate() {
                        store(ctx, a, p, vals.get(k))?;
                    }
                }
                scalar => {
                    for &p in &pos {
                        store(ctx, a, p, scalar.clone())?;
                    }
                }
            }
            V::Nothing
        }
        (I::ArrayCopy, [V::Array(a)]) => {
            let data = a.data.borrow().clone();
            new_array(ctx, a.elt.clone(), a.dims.clone(), data)
        }
        (I::ArrayFillSet, [V::Array(a), x]) => {
            for k in 0..a.len() {
                store(ctx, a, k, x.clone())?;
            }
            V::Array(a.clone())
        }
        (I::ArrayAbs, [V::Array(a)]) => {
            let data = match &*a.data.borrow() {
                ArrayData::F64(v) => ArrayData::F64(v.iter().map(|x| x.abs()).collect()),
                ArrayData::I64(v) => ArrayData::I64(v.iter().map(|x| x.wrapping_abs()).collect()),
                ArrayData::Any(_) => return Err(bad(i, args, ctx)),
            };
            new_array(ctx, a.elt.clone(), a.dims.clone(), data)
        }
        (I::ArrayAdd, [V::Array(a), V::Array(b)]) => {
            let Some(data) = zip_arrays(a, b, |x, y| x + y, i64::wrapping_add) else {
                return Err(dims_or_types(i, a, b, args, ctx));
            };
            new_array(ctx, a.elt.clone(), a.dims.clone(), data)
        }
        (I::ArraySub, [V::Array(a), V::Array(b)]) => {
            let Some(data) = zip_arrays(a, b, |x, y| x - y, i64::wrapping_sub) else {
                return Err(dims_or_types(i, a, b, args, ctx));
            };
            new_array(ctx, a.elt.clone(), a.dims.clone(), data)
        }
        (I::ArrayMulScalar, [V::Array(a), V::Float(s)]) => {
            let Some(data) = map_f64(a, |x| x * s) else { return Err(bad(i, args, ctx)) };
            new_array(ctx, a.elt.clone(), a.dims.clone(), data)
        }
        (I::ArrayDivScalar, [V::Array(a), V::Float(s)]) => {
            let Some(data) = map_f64(a, |x| x / s) else { return Err(bad(i, args, ctx)) };
            new_array(ctx, a.elt.clone(), a.dims.clone(), data)
        }
        (I::MatMul, [V::Array(a), V::Array(b)]) => {
            let (m, k) = match a.dims.as_slice() {
                [m] => (*m, 1),
                [m, k] => (*m, *k),
                _ => return Err(bad(i, args, ctx)),
            };
            let (k2, n, vec_out) = match b.dims.as_slice() {
                [k2] => (*k2, 1, true),
                [k2, n] => (*k2, *n, false),
                _ => return Err(bad(i, args, ctx)),
            };
            if k != k2 {
                return Err(RtError::Bounds(format!("matrix dimensions {:?} and {:?} do not match", a.dims, b.dims)));
            }
            let out = {
                let (ArrayData::F64(x), ArrayData::F64(y)) = (&*a.data.borrow(), &*b.data.borrow()) else {
                    return Err(bad(i, args, ctx));
                };
                let mut out = vec![0.0; m * n];
                for j in 0..n {
                    for l in 0..k {
                        let ylj = y[l + j * k];
                        let col = &x[l * m..(l + 1) * m];
                        for (o, &xv) in out[j * m..(j + 1) * m].iter_mut().zip(col) {
                            *o += xv * ylj;
                        }
                    }
                }
                out
            };
            let dims = if vec_out { vec![m] } else { vec![m, n] };
            new_array(ctx, a.elt.clone(), dims, ArrayData::F64(out))
        }
        (I::Transpose, [V::Array(a)]) => {
            let (m, n) = match a.dims.as_slice() {
                [m] => (*m, 1),
                [m, n] => (*m, *n),
                _ => return Err(bad(i, args, ctx)),
            };
            let src = a.data.borrow().clone();
            let mut dst = src.clone();
            let mut dst_pos = Vec::with_capacity(m * n);
            for r in 0..m {
                for c in 0..n {
                    dst_pos.push((r + c * m, c + r * n));
                }
            }
            for (from, to) in dst_pos {
                match (&mut dst, &src) {
                    (ArrayData::F64(d), ArrayData::F64(s)) => d[to] = s[from],
                    (ArrayData::I64(d), ArrayData::I64(s)) => d[to] = s[from],
                    (ArrayData::Any(d), ArrayData::Any(s)) => d[to] = s[from].clone(),
                    _ => unreachable!(),
                }
            }
            new_array(ctx, a.elt.clone(), vec![n, m], dst)
        }
        (I::Indmax, [V::Array(a)]) => {
            let best = match &*a.data.borrow() {
                ArrayData::F64(v) => first_max(v.iter().copied()),
                ArrayData::I64(v) => first_max(v.iter().copied()),
                ArrayData::Any(_) => return Err(bad(i, args, ctx)),
            };
            V::Int(best.map_or(0, |k| k as i64 + 1))
        }
        (I::Ind2sub, [dims, V::Int(k)]) => {
            let Some(dims) = dims_of(dims) else { return Err(bad(i, args, ctx)) };
            let total: usize = dims.iter().product();
            if *k < 1 || *k as usize > total {
                return Err(RtError::Bounds(format!("linear index {k} out of range for {dims:?}")));
            }
            let mut rest = *k as usize - 1;
            let mut subs = Vec::with_capacity(dims.len());
            for &d in &dims {
                subs.push(V::Int((rest % d) as i64 + 1));
                rest /= d;
            }
            V::Tuple(subs.into())
        }
        (I::Vect, items) => {
            let n = items.len();
            return literal_array(ctx, items, vec![n]);
        }
        (I::Matrix, [V::Int(rows), items @ ..]) if *rows > 0 && items.len() % (*rows as usize) == 0 => {
            let m = *rows as usize;
            let n = items.len() / m;
            // items arrive row by row; storage is column-major
            let mut cols = Vec::with_capacity(items.len());
            for c in 0..n {
                for r in 0..m {
                    cols.push(items[r * n + c].clone());
                }
            }
            return literal_array(ctx, &cols, vec![m, n]);
        }
        (I::TupleGet, [V::Tuple(t), V::Int(k)]) => {
            if *k < 1 || *k as usize > t.len() {
                return Err(RtError::Bounds(format!("tuple index {k} out of range")));
            }
            t[*k as usize - 1].clone()
        }
        (I::TupleLen, [V::Tuple(t)]) => V::Int(t.len() as i64),
        (I::RangeNew, [V::Int(a), V::Int(b)]) => V::Range(RangeVal { start: *a, step: 1, stop: *b, unit: true }),
        (I::RangeStepNew, [V::Int(a), V::Int(s), V::Int(b)]) => {
            if *s == 0 {
                return Err(RtError::Domain("range step cannot be zero".into()));
            }
            V::Range(RangeVal { start: *a, step: *s, stop: *b, unit: false })
        }
        (I::RangeFirst, [V::Range(r)]) => V::Int(r.start),
        (I::RangeStep, [V::Range(r)]) => V::Int(r.step),
        (I::RangeLast, [V::Range(r)]) => V::Int(r.last()),
        (I::RangeLen, [V::Range(r)]) => V::Int(r.len()),
        (I::RangeRef, [V::Range(r), V::Int(k)]) => {
            if *k < 1 || *k > r.len() {
                return Err(RtError::Bounds(format!("index {k} out of range for a range of length {}", r.len())));
            }
            V::Int(r.at(*k))
        }
        _ => return Err(bad(i, args, ctx)),
    };
    Ok(r)
}

fn dims_or_types(i: Intrinsic, a: &ArrayObj, b: &ArrayObj, args: &[Value], ctx: &Ctx) -> RtError {
    if a.dims != b.dims {
        RtError::Bounds(format!("dimensions must match: {:?} vs {:?}", a.dims, b.dims))
    } else {
        bad(i, args, ctx)
    }
}

fn first_max<T: PartialOrd + Copy>(it: impl Iterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (k, x) in it.enumerate() {
        match best {
            Some((_, b)) if !(x > b) => {}
            _ => best = Some((k, x)),
        }
    }
    best.map(|(k, _)| k)
}

// ---- result types -----------------------------------------------------------

/// `Array{T,N}` for unknown `T` and/or `N`.
fn some_array(elt: Option<Type>, rank: Option<usize>) -> Type {
    let t = TypeVar::unbounded(fresh_name("T"));
    let n = TypeVar::unbounded(fresh_name("N"));
    let e = elt.clone().unwrap_or_else(|| t.occurrence());
    let r = rank.map_or_else(|| n.occurrence(), |r| Type::Int(r as i64));
    let mut ty = Builtins::array(e, 0);
    if let Type::Nominal(nm) = &mut ty {
        nm.params[1] = r;
    }
    if rank.is_none() {
        ty = Type::exists(n, ty);
    }
    if elt.is_none() {
        ty = Type::exists(t, ty);
    }
    ty
}

/// A first-class type argument's value, when statically known.
fn type_arg(t: &Type) -> Option<&Type> {
    match t {
        Type::Nominal(n) if &*n.name == "Type" && n.params.len() == 1 && n.params[0].free_vars().is_empty() => {
            Some(&n.params[0])
        }
        _ => None,
    }
}

fn any_type() -> Type {
    let t = TypeVar::unbounded(fresh_name("T"));
    Type::exists(t.clone(), Builtins::type_of_type(t.occurrence()))
}

fn arr_elt(t: &Type) -> Option<Type> {
    array_parts(t).map(|(e, _)| e.clone()).filter(|e| e.free_vars().is_empty())
}

fn arr_rank(t: &Type) -> Option<usize> {
    array_parts(t).map(|(_, r)| r as usize)
}

pub fn result_type(i: Intrinsic, args: &[Type], reg: &Registry, b: &Builtins) -> Type {
    use Intrinsic as I;
    if args.iter().any(Type::is_bottom) {
        return Type::Bottom;
    }
    match i {
        I::AddInt | I::SubInt | I::MulInt | I::DivInt | I::RemInt | I::NegInt | I::AbsInt | I::PowInt => {
            b.int.clone()
        }
        I::AddFloat
        | I::SubFloat
        | I::MulFloat
        | I::DivFloat
        | I::NegFloat
        | I::AbsFloat
        | I::SqrtFloat
        | I::PowFloat
        | I::IntToFloat => b.float.clone(),
        I::LtInt | I::LeInt | I::EqInt | I::LtFloat | I::LeFloat | I::EqFloat | I::NotBool | I::Egal | I::Isa
        | I::Subtype => b.bool.clone(),
        I::TypeOf => {
            if reg.is_leaf(&args[0]) {
                Builtins::type_of_type(args[0].clone())
            } else {
                let t = TypeVar::new(fresh_name("T"), Type::Bottom, args[0].clone());
                reg.canonical(&Type::exists(t.clone(), Builtins::type_of_type(t.occurrence())))
            }
        }
        I::TypeJoin => match (type_arg(&args[0]), type_arg(&args[1])) {
            (Some(x), Some(y)) => Builtins::type_of_type(reg.join(x, y)),
            _ => any_type(),
        },
        I::Str => b.string.clone(),
        I::Println | I::Probe | I::ArraySet | I::SliceSet => b.nothing.clone(),
        I::Error | I::Throw => Type::Bottom,
        I::Randn => Builtins::array(b.float.clone(), args.len()),
        I::Randperm => Builtins::array(b.int.clone(), 1),
        I::ArrayFill => some_array(type_arg(&args[0]).cloned(), Some(args.len() - 2)),
        I::ArrayRef => arr_elt(&args[0]).unwrap_or(Type::Top),
        I::ArrayLen | I::ArraySizeDim | I::Indmax | I::TupleLen | I::RangeFirst | I::RangeStep | I::RangeLast
        | I::RangeLen | I::RangeRef => b.int.clone(),
        I::ArraySize => match arr_rank(&args[0]) {
            Some(r) => Type::tuple(vec![b.int.clone(); r]),
            None => Type::vararg_tuple(vec![], b.int.clone()),
        },
        I::SliceGet => {
            let elt = arr_elt(&args[0]);
            let mut last = None;
            for (k, t) in args[1..].iter().enumerate() {
                if *t == b.int {
                    continue;
                }
                if reg.is_leaf(t) {
                    last = Some(k);
                } else {
                    // an index of unknown kind: rank unknown, may be scalar
                    return Type::Top;
                }
            }
            match last {
                None => elt.unwrap_or(Type::Top),
                Some(k) => some_array(elt, Some(k + 1)),
            }
        }
        I::ArrayCopy | I::ArrayFillSet | I::ArrayAbs | I::ArrayAdd | I::ArraySub | I::ArrayMulScalar
        | I::ArrayDivScalar => {
            if array_parts(&args[0]).is_some() {
                args[0].clone()
            } else {
                some_array(None, None)
            }
        }
        I::MatMul => {
            let rank = arr_rank(&args[1]).map(|r| if r == 1 { 1 } else { 2 });
            some_array(arr_elt(&args[0]), rank)
        }
        I::Transpose => some_array(arr_elt(&args[0]), Some(2)),
        I::Ind2sub => match &args[0] {
            Type::Tuple(t) if t.vararg.is_none() => Type::tuple(vec![b.int.clone(); t.fixed.len()]),
            _ => Type::vararg_tuple(vec![], b.int.clone()),
        },
        I::Vect | I::Matrix => {
            let items = if i == I::Matrix { &args[1..] } else { args };
            let rank = if i == I::Matrix { 2 } else { 1 };
            if items.iter().all(|t| reg.is_leaf(t)) {
                let elt = literal_eltype(reg, b, items);
                some_array(Some(elt), Some(rank))
            } else {
                some_array(None, Some(rank))
            }
        }
        I::TupleGet => match &args[0] {
            Type::Tuple(t) => {
                let mut all: Vec<&Type> = t.fixed.iter().collect();
                if let Some(v) = &t.vararg {
                    all.push(v);
                }
                if all.is_empty() {
                    Type::Bottom
                } else {
                    reg.join_all(all)
                }
            }
            _ => Type::Top,
        },
        I::RangeNew => b.range(true),
        I::RangeStepNew => b.range(false),
    }
}

/// Intrinsics without side effects beyond allocation; calls to them may be
/// dropped when their result is unused.
pub fn is_pure(i: Intrinsic) -> bool {
    !matches!(
        i,
        Intrinsic::Println
            | Intrinsic::Error
            | Intrinsic::Throw
            | Intrinsic::Probe
            | Intrinsic::Randn
            | Intrinsic::Randperm
            | Intrinsic::ArraySet
            | Intrinsic::SliceSet
            | Intrinsic::ArrayFillSet
    )
}
