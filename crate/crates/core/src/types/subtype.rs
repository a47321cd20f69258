//! Subtyping over type terms.
//!
//! Nominal parameters are invariant, tuples are covariant (with vararg
//! expansion), unions distribute on the left and pick a member on the right.
//! Existentials on the left are opened as rigid variables; existentials on the
//! right are opened as flexible variables whose constraints are collected
//! while matching the body and solved when the binder is closed:
//!
//! - an invariant occurrence pins the variable to one term (`eq`);
//! - a covariant occurrence adds a lower bound; the witness is their join;
//! - a variable with several covariant occurrences and no invariant one must
//!   be witnessed by a leaf type (so `(T, T) where T` only matches pairs of
//!   identical concrete types).
//!
//! Because union members on the right may bind variables differently, the
//! matcher returns every environment in which the relation holds.

use std::cell::Cell;

use super::registry::Registry;
use super::term::{fresh_name, Name, TupleType, Type, TypeVar};

const STEP_BUDGET: u32 = 2_000_000;
const MAX_ENVS: usize = 16;
const MAX_DISTRIBUTE: usize = 64;

#[derive(Clone, Debug)]
struct Flex {
    var: TypeVar,
    eq: Option<Type>,
    lowers: Vec<Type>,
    uppers: Vec<Type>,
    cov: usize,
}

impl Flex {
    fn new(var: TypeVar) -> Self {
        Flex { var, eq: None, lowers: Vec::new(), uppers: Vec::new(), cov: 0 }
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Env {
    flex: Vec<Flex>,
    pub(crate) solved: Vec<(Name, Type)>,
}

impl Env {
    fn find(&self, name: &str) -> Option<usize> {
        self.flex.iter().rposition(|f| &*f.var.name == name)
    }

    fn substitute(&mut self, name: &str, w: &Type) {
        for f in &mut self.flex {
            if let Some(e) = &mut f.eq {
                *e = e.subst(name, w);
            }
            for l in &mut f.lowers {
                *l = l.subst(name, w);
            }
            for u in &mut f.uppers {
                *u = u.subst(name, w);
            }
            f.var.lower = Box::new(f.var.lower.subst(name, w));
            f.var.upper = Box::new(f.var.upper.subst(name, w));
        }
    }
}

pub(crate) struct Subtyper<'r> {
    reg: &'r Registry,
    steps: Cell<u32>,
}

impl<'r> Subtyper<'r> {
    pub(crate) fn new(reg: &'r Registry) -> Self {
        Subtyper { reg, steps: Cell::new(0) }
    }

    fn tick(&self) -> bool {
        let s = self.steps.get() + 1;
        self.steps.set(s);
        s < STEP_BUDGET
    }

    fn flat(&self, envs: Vec<Env>, mut f: impl FnMut(Env) -> Vec<Env>) -> Vec<Env> {
        let mut out = Vec::new();
        for e in envs {
            out.extend(f(e));
            if out.len() >= MAX_ENVS {
                break;
            }
        }
        out.truncate(MAX_ENVS);
        out
    }

    pub(crate) fn holds(&self, a: &Type, b: &Type) -> bool {
        !self.sub(a, b, Env::default()).is_empty()
    }

    /// Match `args` against a signature and return the witnesses of the
    /// signature's outer binders, outermost first.
    pub(crate) fn witnesses(&self, args: &Type, sig: &Type) -> Option<Vec<Type>> {
        let mut env = Env::default();
        let mut body = sig.clone();
        let mut names = Vec::new();
        while let Type::Exists(v, inner) = body {
            let fresh = fresh_name(&v.name);
            let var = TypeVar { name: fresh.clone(), lower: v.lower.clone(), upper: v.upper.clone() };
            body = inner.subst(&v.name, &var.occurrence());
            // later binders' bounds may mention this one
            env.flex.push(Flex::new(var));
            names.push(fresh);
        }
        let mut envs = self.sub(args, &body, env);
        for _ in 0..names.len() {
            envs = self.flat(envs, |e| self.close(e));
        }
        let env = envs.into_iter().next()?;
        names
            .iter()
            .map(|n| env.solved.iter().rev().find(|(k, _)| k == n).map(|(_, w)| w.clone()))
            .collect()
    }

    pub(crate) fn sub(&self, a: &Type, b: &Type, env: Env) -> Vec<Env> {
        if !self.tick() {
            return Vec::new();
        }
        if a == b {
            return vec![env];
        }
        match (a, b) {
            (Type::Bottom, _) | (_, Type::Top) => return vec![env],
            _ => {}
        }
        if let Type::Var(v) = b {
            if let Some(i) = env.find(&v.name) {
                return self.flex_lower(a, i, env);
            }
        }
        if let Type::Var(v) = a {
            if let Some(i) = env.find(&v.name) {
                return self.flex_upper(i, b, env);
            }
        }
        match a {
            Type::Union(ms) => {
                let mut envs = vec![env];
                for m in ms {
                    envs = self.flat(envs, |e| self.sub(m, b, e));
                    if envs.is_empty() {
                        break;
                    }
                }
                return envs;
            }
            Type::Exists(v, body) => {
                let var = TypeVar { name: fresh_name(&v.name), lower: v.lower.clone(), upper: v.upper.clone() };
                let body = body.subst(&v.name, &var.occurrence());
                return self.sub(&body, b, env);
            }
            _ => {}
        }
        if let Type::Exists(v, body) = b {
            let var = TypeVar { name: fresh_name(&v.name), lower: v.lower.clone(), upper: v.upper.clone() };
            let body = body.subst(&v.name, &var.occurrence());
            let mut env = env;
            env.flex.push(Flex::new(var));
            let envs = self.sub(a, &body, env);
            return self.flat(envs, |e| self.close(e));
        }
        if let Type::Var(v) = a {
            // rigid on the left
            if let Type::Union(ms) = b {
                let mut out = Vec::new();
                for m in ms {
                    out.extend(self.sub(a, m, env.clone()));
                }
                if !out.is_empty() {
                    out.truncate(MAX_ENVS);
                    return out;
                }
            }
            if let Type::Var(w) = b {
                if !w.lower.is_bottom() {
                    let out = self.sub(a, &w.lower, env.clone());
                    if !out.is_empty() {
                        return out;
                    }
                }
            }
            return self.sub(&v.upper, b, env);
        }
        if let Type::Union(ms) = b {
            if let Some(parts) = distribute(a) {
                let mut envs = vec![env];
                for p in &parts {
                    envs = self.flat(envs, |e| self.sub(p, b, e));
                    if envs.is_empty() {
                        break;
                    }
                }
                return envs;
            }
            let mut out = Vec::new();
            for m in ms {
                out.extend(self.sub(a, m, env.clone()));
                if out.len() >= MAX_ENVS {
                    break;
                }
            }
            out.truncate(MAX_ENVS);
            return out;
        }
        if let Type::Var(w) = b {
            // rigid on the right: only its lower bound is safely below it
            if w.lower.is_bottom() {
                return Vec::new();
            }
            return self.sub(a, &w.lower, env);
        }
        match (a, b) {
            (Type::Int(x), Type::Int(y)) if x == y => vec![env],
            (Type::Tuple(ta), Type::Tuple(tb)) => self.sub_tuple(ta, tb, env),
            (Type::Nominal(na), Type::Nominal(nb)) => {
                if na.name == nb.name {
                    return self.params_equal(&na.params, &nb.params, env);
                }
                if !self.reg.head_descends(&na.name, &nb.name) {
                    return Vec::new();
                }
                let mut cur = na.clone();
                loop {
                    if cur.name == nb.name {
                        return self.params_equal(&cur.params, &nb.params, env);
                    }
                    match self.reg.supertype(&cur) {
                        Type::Nominal(n) => cur = n,
                        _ => return Vec::new(),
                    }
                }
            }
            _ => Vec::new(),
        }
    }

    fn sub_tuple(&self, ta: &TupleType, tb: &TupleType, env: Env) -> Vec<Env> {
        let na = ta.fixed.len();
        let nb = tb.fixed.len();
        let mut pairs: Vec<(&Type, &Type)> = Vec::new();
        let mut rest_flex = false;
        match (&ta.vararg, &tb.vararg) {
            (_, None) => {
                if ta.vararg.is_some() || na != nb {
                    return Vec::new();
                }
                pairs.extend(ta.fixed.iter().zip(tb.fixed.iter()));
            }
            (None, Some(vb)) => {
                if na < nb {
                    return Vec::new();
                }
                for (i, x) in ta.fixed.iter().enumerate() {
                    pairs.push((x, tb.fixed.get(i).unwrap_or(vb)));
                }
            }
            (Some(va), Some(vb)) => {
                if na < nb {
                    return Vec::new();
                }
                for (i, x) in ta.fixed.iter().enumerate() {
                    pairs.push((x, tb.fixed.get(i).unwrap_or(vb)));
                }
                pairs.push((va, vb));
                rest_flex = true;
            }
        }
        let mut envs = vec![env];
        for (x, y) in pairs {
            envs = self.flat(envs, |e| self.sub(x, y, e));
            if envs.is_empty() {
                return envs;
            }
        }
        if rest_flex {
            // a vararg element stands for any number of occurrences
            if let Some(Type::Var(v)) = tb.vararg.as_deref() {
                for e in &mut envs {
                    if let Some(i) = e.find(&v.name) {
                        e.flex[i].cov += 1;
                    }
                }
            }
        }
        envs
    }

    fn params_equal(&self, xs: &[Type], ys: &[Type], env: Env) -> Vec<Env> {
        if xs.len() != ys.len() {
            return Vec::new();
        }
        let mut envs = vec![env];
        for (x, y) in xs.iter().zip(ys) {
            envs = self.flat(envs, |e| self.equal(x, y, e));
            if envs.is_empty() {
                break;
            }
        }
        envs
    }

    /// Invariant comparison.
    fn equal(&self, a: &Type, b: &Type, env: Env) -> Vec<Env> {
        if a == b {
            return vec![env];
        }
        if let Type::Var(v) = b {
            if let Some(i) = env.find(&v.name) {
                return self.set_eq(i, a, env);
            }
        }
        if let Type::Var(v) = a {
            if let Some(i) = env.find(&v.name) {
                return self.set_eq(i, b, env);
            }
        }
        let plain = |t: &Type| !t.has_vars() && !t.has_unions();
        if plain(a) && plain(b) {
            return Vec::new();
        }
        let envs = self.sub(a, b, env);
        self.flat(envs, |e| self.sub(b, a, e))
    }

    fn set_eq(&self, i: usize, t: &Type, mut env: Env) -> Vec<Env> {
        let name = env.flex[i].var.name.clone();
        if t.occurs_free(&name) {
            return Vec::new();
        }
        match env.flex[i].eq.clone() {
            Some(e) => self.equal(&e, t, env),
            None => {
                env.flex[i].eq = Some(t.clone());
                vec![env]
            }
        }
    }

    fn flex_lower(&self, a: &Type, i: usize, mut env: Env) -> Vec<Env> {
        env.flex[i].cov += 1;
        match env.flex[i].eq.clone() {
            Some(e) => self.sub(a, &e, env),
            None => {
                env.flex[i].lowers.push(a.clone());
                vec![env]
            }
        }
    }

    fn flex_upper(&self, i: usize, b: &Type, mut env: Env) -> Vec<Env> {
        match env.flex[i].eq.clone() {
            Some(e) => self.sub(&e, b, env),
            None => {
                env.flex[i].uppers.push(b.clone());
                vec![env]
            }
        }
    }

    /// Solve and pop the innermost flexible variable.
    fn close(&self, mut env: Env) -> Vec<Env> {
        let Some(f) = env.flex.pop() else { return Vec::new() };
        let w = match &f.eq {
            Some(e) => e.clone(),
            None if !f.lowers.is_empty() => {
                let mut w = f.lowers[0].clone();
                for l in &f.lowers[1..] {
                    w = self.reg.join(&w, l);
                }
                if f.cov > 1 && !concrete_for_all(&w) {
                    return Vec::new();
                }
                w
            }
            None => (*f.var.lower).clone(),
        };
        let mut envs = vec![env];
        if f.eq.is_some() {
            for l in &f.lowers {
                envs = self.flat(envs, |e| self.sub(l, &w, e));
            }
        }
        for u in &f.uppers {
            envs = self.flat(envs, |e| self.sub(&w, u, e));
        }
        envs = self.flat(envs, |e| self.sub(&f.var.lower, &w, e));
        envs = self.flat(envs, |e| self.sub(&w, &f.var.upper, e));
        for e in &mut envs {
            e.substitute(&f.var.name, &w);
            e.solved.push((f.var.name.clone(), w.clone()));
        }
        envs
    }
}

/// Split a tuple with union elements into the union of tuples it denotes.
fn distribute(a: &Type) -> Option<Vec<Type>> {
    let Type::Tuple(t) = a else { return None };
    if !t.fixed.iter().any(|e| matches!(e, Type::Union(_))) {
        return None;
    }
    let mut acc: Vec<Vec<Type>> = vec![Vec::new()];
    for e in &t.fixed {
        let choices: Vec<Type> = match e {
            Type::Union(ms) => ms.clone(),
            other => vec![other.clone()],
        };
        let mut next = Vec::with_capacity(acc.len() * choices.len());
        for prefix in &acc {
            for c in &choices {
                let mut p = prefix.clone();
                p.push(c.clone());
                next.push(p);
            }
        }
        if next.len() > MAX_DISTRIBUTE {
            return None;
        }
        acc = next;
    }
    Some(
        acc.into_iter()
            .map(|fixed| Type::Tuple(TupleType { fixed, vararg: t.vararg.clone() }))
            .collect(),
    )
}

/// Every instance of `t` (over its free variables) is a leaf type.
fn concrete_for_all(t: &Type) -> bool {
    match t {
        Type::Var(_) => true,
        Type::Nominal(n) => n.kind == super::term::Kind::Tag,
        Type::Tuple(tt) => tt.vararg.is_none() && tt.fixed.iter().all(concrete_for_all),
        _ => false,
    }
}
