//! Values written as source literals, for passing arguments from outside
//! the language (`mdl run file.mdl -e f 1 2.5 "[1.0, 2.0]"`).

use std::cell::RefCell;
use std::rc::Rc;

use super::value::{ArrayData, ArrayObj, Builtins};
use super::Value;
use crate::frontend::ast::{Expr, ExprKind};
use crate::frontend::parse_expr;
use crate::types::Type;

/// Parse a literal: numbers, booleans, strings, `nothing`, tuples, and
/// vectors or matrices of numbers. Arrays holding any Float64 are Float64
/// arrays; all-integer arrays are Int64 arrays.
pub fn parse_literal(src: &str) -> Result<Value, String> {
    let e = parse_expr(src).map_err(|e| e.to_string())?;
    eval(&e).map_err(|msg| format!("`{src}`: {msg}"))
}

fn eval(e: &Expr) -> Result<Value, String> {
    Ok(match &e.kind {
        ExprKind::Int(i) => Value::Int(*i),
        ExprKind::Float(f) => Value::Float(*f),
        ExprKind::Bool(b) => Value::Bool(*b),
        ExprKind::Str(s) => Value::str(s),
        ExprKind::Nothing => Value::Nothing,
        ExprKind::Call(op, args) if op == "-" && args.len() == 1 => match eval(&args[0])? {
            Value::Int(i) => Value::Int(-i),
            Value::Float(f) => Value::Float(-f),
            _ => return Err("only numbers can be negated".into()),
        },
        ExprKind::Tuple(items) => Value::Tuple(items.iter().map(eval).collect::<Result<Vec<_>, _>>()?.into()),
        ExprKind::Vect(items) => {
            let vals = items.iter().map(eval).collect::<Result<Vec<_>, _>>()?;
            numeric_array(vec![vals.len()], vals)?
        }
        ExprKind::Matrix(rows) => {
            let m = rows.len();
            let n = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != n) {
                return Err("matrix rows differ in length".into());
            }
            let mut vals = Vec::with_capacity(m * n);
            for j in 0..n {
                for row in rows {
                    vals.push(eval(&row[j])?);
                }
            }
            numeric_array(vec![m, n], vals)?
        }
        _ => return Err("not a literal".into()),
    })
}

fn numeric_array(dims: Vec<usize>, vals: Vec<Value>) -> Result<Value, String> {
    let all_int = vals.iter().all(|v| matches!(v, Value::Int(_)));
    let (elt, data) = if all_int && !vals.is_empty() {
        let xs = vals.iter().map(|v| if let Value::Int(i) = v { *i } else { 0 }).collect();
        ("Int64", ArrayData::I64(xs))
    } else {
        let xs = vals
            .iter()
            .map(|v| match v {
                Value::Int(i) => Ok(*i as f64),
                Value::Float(f) => Ok(*f),
                _ => Err("array literals may only hold numbers".to_string()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        ("Float64", ArrayData::F64(xs))
    };
    let elt = Type::tag(elt, vec![]);
    Ok(Value::Array(Rc::new(ArrayObj {
        ty: Builtins::array(elt.clone(), dims.len()),
        elt,
        dims,
        data: RefCell::new(data),
    })))
}
