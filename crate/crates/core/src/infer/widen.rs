//! Widening, narrowing and tuple-element extraction on abstract types.

use super::{WideningConfig, Widenings};
use crate::types::{fresh_name, Nominal, Registry, TupleType, Type, TypeVar};

/// Bring `t` within the configured limits. The result is always a
/// supertype of `t`.
pub fn widen(reg: &Registry, cfg: &WideningConfig, t: &Type, w: &mut Widenings) -> Type {
    if matches!(t, Type::Top | Type::Bottom | Type::Int(_)) {
        return t.clone();
    }
    let mut changed = false;
    let mut out = cap_tuples(reg, cfg, t, w, &mut changed);
    if out.depth() > cfg.max_depth {
        out = cut_depth(reg, &out, cfg.max_depth);
        w.depth += 1;
        changed = true;
    }
    if changed {
        out = reg.canonical(&out);
    }
    if let Type::Union(ms) = &out {
        if ms.len() > cfg.max_union {
            w.unions += 1;
            out = reg.common_supertype(ms);
        }
    }
    out
}

fn cap_tuples(reg: &Registry, cfg: &WideningConfig, t: &Type, w: &mut Widenings, changed: &mut bool) -> Type {
    match t {
        Type::Tuple(tt) => {
            let fixed: Vec<Type> = tt.fixed.iter().map(|e| cap_tuples(reg, cfg, e, w, changed)).collect();
            let vararg = tt.vararg.as_deref().map(|e| cap_tuples(reg, cfg, e, w, changed));
            if fixed.len() > cfg.max_tuple {
                w.tuples += 1;
                *changed = true;
                let elt = reg.join_all(fixed.iter().chain(vararg.as_ref()));
                return Type::vararg_tuple(vec![], elt);
            }
            Type::Tuple(TupleType { fixed, vararg: vararg.map(Box::new) })
        }
        Type::Union(ms) => Type::Union(ms.iter().map(|m| cap_tuples(reg, cfg, m, w, changed)).collect()),
        Type::Exists(v, body) => Type::exists((**v).clone(), cap_tuples(reg, cfg, body, w, changed)),
        _ => t.clone(),
    }
}

/// Limit nesting to `budget` levels. Parameters of a nominal type are
/// invariant, so an over-deep parameter is replaced by a fresh variable
/// bound outside the nominal type rather than by a supertype.
fn cut_depth(reg: &Registry, t: &Type, budget: usize) -> Type {
    match t {
        Type::Nominal(n) if !n.params.is_empty() => {
            let mut binders = Vec::new();
            let bounds = reg.decl(&n.name).map(|d| d.params.clone()).unwrap_or_default();
            let params = n
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if p.depth() < budget.max(1) {
                        p.clone()
                    } else {
                        let upper = bounds
                            .get(i)
                            .map(|b| (*b.upper).clone())
                            .filter(|u| u.free_vars().is_empty())
                            .unwrap_or(Type::Top);
                        let v = TypeVar::new(fresh_name("T"), Type::Bottom, upper);
                        let occ = v.occurrence();
                        binders.push(v);
                        occ
                    }
                })
                .collect();
            let mut out = Type::Nominal(Nominal { name: n.name.clone(), kind: n.kind, params });
            for v in binders.into_iter().rev() {
                out = Type::exists(v, out);
            }
            out
        }
        Type::Tuple(tt) => {
            if budget == 0 {
                return Type::vararg_tuple(vec![], Type::Top);
            }
            Type::Tuple(TupleType {
                fixed: tt.fixed.iter().map(|e| cut_depth(reg, e, budget - 1)).collect(),
                vararg: tt.vararg.as_deref().map(|e| Box::new(cut_depth(reg, e, budget - 1))),
            })
        }
        Type::Union(ms) => Type::Union(ms.iter().map(|m| cut_depth(reg, m, budget)).collect()),
        Type::Exists(..) => {
            if t.depth() <= budget {
                t.clone()
            } else {
                match t.head() {
                    Some(h) => reg.partial(h, vec![]).unwrap_or(Type::Top),
                    None => Type::Top,
                }
            }
        }
        _ => t.clone(),
    }
}

/// A supertype of the intersection of `a` and `b`, as tight as is cheap.
pub fn narrow(reg: &Registry, a: &Type, b: &Type) -> Type {
    if reg.subtype(a, b) {
        return a.clone();
    }
    if reg.subtype(b, a) {
        return b.clone();
    }
    if !reg.may_intersect(a, b) {
        return Type::Bottom;
    }
    match (a, b) {
        (Type::Union(ms), _) => {
            let parts: Vec<Type> = ms.iter().map(|m| narrow(reg, m, b)).collect();
            reg.join_all(parts.iter())
        }
        (_, Type::Union(ms)) => {
            let parts: Vec<Type> = ms.iter().map(|m| narrow(reg, a, m)).collect();
            reg.join_all(parts.iter())
        }
        (Type::Tuple(x), Type::Tuple(y)) if x.vararg.is_none() && y.vararg.is_none() => {
            if x.fixed.len() != y.fixed.len() {
                return Type::Bottom;
            }
            let elems: Vec<Type> = x.fixed.iter().zip(&y.fixed).map(|(p, q)| narrow(reg, p, q)).collect();
            reg.canonical(&Type::tuple(elems))
        }
        _ => {
            let m = reg.meet(a, b);
            if m.is_bottom() {
                b.clone()
            } else {
                m
            }
        }
    }
}

/// Re-bind the variables of `binders` that occur in `t`, giving a closed
/// supertype of every instance of `t`.
pub fn rewrap(reg: &Registry, t: &Type, binders: &[&TypeVar]) -> Type {
    let mut out = t.clone();
    for v in binders.iter().rev() {
        if out.occurs_free(&v.name) {
            out = Type::exists((*v).clone(), out);
        }
    }
    if !out.free_vars().is_empty() {
        return Type::Top;
    }
    reg.canonical(&out)
}

/// Per-argument types for a method with `n` argument slots; a vararg
/// method's last slot receives a tuple of the remaining arguments.
pub fn tuple_elems(reg: &Registry, t: &Type, n: usize, vararg: bool) -> Vec<Type> {
    match t {
        Type::Union(ms) => {
            let mut acc = vec![Type::Bottom; n];
            for m in ms {
                for (a, e) in acc.iter_mut().zip(tuple_elems(reg, m, n, vararg)) {
                    *a = reg.join(a, &e);
                }
            }
            acc
        }
        Type::Exists(..) => {
            let binders = t.binders();
            tuple_elems(reg, t.unwrap_exists(), n, vararg)
                .iter()
                .map(|e| rewrap(reg, e, &binders))
                .collect()
        }
        Type::Tuple(tt) => {
            let fixed_slots = if vararg { n.saturating_sub(1) } else { n };
            let at = |i: usize| -> Type {
                tt.fixed.get(i).cloned().or_else(|| tt.vararg.as_deref().cloned()).unwrap_or(Type::Bottom)
            };
            let mut out: Vec<Type> = (0..fixed_slots).map(at).collect();
            if vararg {
                let rest: Vec<Type> = tt.fixed.iter().skip(fixed_slots).cloned().collect();
                out.push(match tt.vararg.as_deref() {
                    Some(v) => Type::vararg_tuple(rest, v.clone()),
                    None => Type::tuple(rest),
                });
            }
            out
        }
        Type::Bottom => vec![Type::Bottom; n],
        _ => {
            let mut out = vec![Type::Top; n];
            if vararg && n > 0 {
                out[n - 1] = Type::vararg_tuple(vec![], Type::Top);
            }
            out
        }
    }
}
