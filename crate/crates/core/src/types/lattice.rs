use super::registry::Registry;
use super::subtype::Subtyper;
use super::term::{fresh_name, Kind, Nominal, TupleType, Type, TypeVar};
use super::TypeError;

/// Largest union-of-tuples produced when normalizing a tuple with union
/// elements; bigger products are kept factored.
const MAX_TUPLE_PRODUCT: usize = 8;

#[derive(Default)]
struct Occurrences {
    covariant: usize,
    invariant: usize,
}

fn occurrences(t: &Type, name: &str, invariant: bool, acc: &mut Occurrences) {
    match t {
        Type::Var(v) => {
            if &*v.name == name {
                if invariant {
                    acc.invariant += 1;
                } else {
                    acc.covariant += 1;
                }
            }
            occurrences(&v.lower, name, true, acc);
            occurrences(&v.upper, name, true, acc);
        }
        Type::Nominal(n) => n.params.iter().for_each(|p| occurrences(p, name, true, acc)),
        Type::Union(ms) => ms.iter().for_each(|m| occurrences(m, name, invariant, acc)),
        Type::Tuple(tt) => {
            tt.fixed.iter().for_each(|m| occurrences(m, name, invariant, acc));
            if let Some(v) = &tt.vararg {
                // a vararg element may be repeated
                occurrences(v, name, invariant, acc);
                occurrences(v, name, invariant, acc);
            }
        }
        Type::Exists(v, body) => {
            occurrences(&v.lower, name, true, acc);
            occurrences(&v.upper, name, true, acc);
            if &*v.name != name {
                occurrences(body, name, invariant, acc);
            }
        }
        Type::Top | Type::Bottom | Type::Int(_) => {}
    }
}

impl Registry {
    /// Decide `a <: b`. Undeclared names simply fail to relate; use
    /// [`Registry::try_subtype`] to have them reported.
    pub fn subtype(&self, a: &Type, b: &Type) -> bool {
        Subtyper::new(self).holds(a, b)
    }

    pub fn try_subtype(&self, a: &Type, b: &Type) -> Result<bool, TypeError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.subtype(a, b))
    }

    /// Mutual subtyping.
    pub fn equiv(&self, a: &Type, b: &Type) -> bool {
        a == b || (self.subtype(a, b) && self.subtype(b, a))
    }

    /// If `args <: sig`, the witnesses chosen for the outer binders of
    /// `sig` (outermost first).
    pub fn match_signature(&self, args: &Type, sig: &Type) -> Option<Vec<Type>> {
        Subtyper::new(self).witnesses(args, sig)
    }

    /// Whether values can have exactly this type.
    pub fn is_leaf(&self, t: &Type) -> bool {
        match t {
            Type::Nominal(n) => n.kind == Kind::Tag && n.params.iter().all(|p| p.free_vars().is_empty()),
            Type::Tuple(tt) => tt.vararg.is_none() && tt.fixed.iter().all(|e| self.is_leaf(e)),
            _ => false,
        }
    }

    pub fn canonical(&self, t: &Type) -> Type {
        let s = self.simplify(t);
        let unique = alpha_fresh(&s);
        let mut k = 0usize;
        self.rename_binders(&unique, &mut k)
    }

    fn simplify(&self, t: &Type) -> Type {
        match t {
            Type::Top | Type::Bottom | Type::Int(_) | Type::Var(_) => t.clone(),
            Type::Nominal(n) => Type::Nominal(Nominal {
                name: n.name.clone(),
                kind: n.kind,
                params: n.params.iter().map(|p| self.simplify(p)).collect(),
            }),
            Type::Tuple(tt) => {
                let fixed: Vec<Type> = tt.fixed.iter().map(|e| self.simplify(e)).collect();
                if fixed.iter().any(Type::is_bottom) {
                    return Type::Bottom;
                }
                let vararg = tt.vararg.as_deref().map(|v| self.simplify(v)).filter(|v| !v.is_bottom());
                let product: usize = fixed
                    .iter()
                    .map(|e| if let Type::Union(ms) = e { ms.len() } else { 1 })
                    .product();
                if vararg.is_none() && product > 1 && product <= MAX_TUPLE_PRODUCT {
                    let mut acc: Vec<Vec<Type>> = vec![Vec::new()];
                    for e in &fixed {
                        let choices = match e {
                            Type::Union(ms) => ms.clone(),
                            other => vec![other.clone()],
                        };
                        acc = acc
                            .iter()
                            .flat_map(|p| {
                                choices.iter().map(move |c| {
                                    let mut p = p.clone();
                                    p.push(c.clone());
                                    p
                                })
                            })
                            .collect();
                    }
                    return self.simplify_union(acc.into_iter().map(Type::tuple).collect());
                }
                Type::Tuple(TupleType { fixed, vararg: vararg.map(Box::new) })
            }
            Type::Union(ms) => self.simplify_union(ms.iter().map(|m| self.simplify(m)).collect()),
            Type::Exists(v, body) => {
                let var = TypeVar::new(v.name.clone(), self.simplify(&v.lower), self.simplify(&v.upper));
                let body = self.simplify(&body.subst(&v.name, &var.occurrence()));
                if !body.occurs_free(&var.name) {
                    return body;
                }
                if var.lower == var.upper {
                    return self.simplify(&body.subst(&var.name, &var.lower));
                }
                let mut occ = Occurrences::default();
                occurrences(&body, &var.name, false, &mut occ);
                if occ.invariant == 0 && occ.covariant == 1 {
                    return self.simplify(&body.subst(&var.name, &var.upper));
                }
                Type::exists(var, body)
            }
        }
    }

    fn simplify_union(&self, members: Vec<Type>) -> Type {
        let mut flat = Vec::new();
        for m in members {
            match m {
                Type::Union(inner) => flat.extend(inner),
                Type::Bottom => {}
                Type::Top => return Type::Top,
                other => flat.push(other),
            }
        }
        let mut keys: Vec<(Vec<u64>, Type)> = flat.into_iter().map(|m| (self.sort_key(&m), m)).collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        keys.dedup_by(|a, b| a.0 == b.0);
        let n = keys.len();
        let mut keep = vec![true; n];
        for i in 0..n {
            for j in 0..n {
                if i == j || !keep[j] {
                    continue;
                }
                // drop i if it is below j; of two equivalent members keep the first
                if self.subtype(&keys[i].1, &keys[j].1) && (j < i || !self.subtype(&keys[j].1, &keys[i].1)) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut out: Vec<Type> = keys.into_iter().zip(keep).filter(|(_, k)| *k).map(|((_, t), _)| t).collect();
        match out.len() {
            0 => Type::Bottom,
            1 => out.pop().unwrap(),
            _ => Type::Union(out),
        }
    }

    fn rename_binders(&self, t: &Type, k: &mut usize) -> Type {
        match t {
            Type::Exists(v, body) => {
                let name = loop {
                    let candidate = if *k == 0 { "T".to_string() } else { format!("T{k}") };
                    *k += 1;
                    if !self.is_defined(&candidate) {
                        break candidate;
                    }
                };
                let lower = self.rename_binders(&v.lower, k);
                let upper = self.rename_binders(&v.upper, k);
                let var = TypeVar::new(name, lower, upper);
                let body = body.subst(&v.name, &var.occurrence());
                Type::exists(var, self.rename_binders(&body, k))
            }
            Type::Nominal(n) => Type::Nominal(Nominal {
                name: n.name.clone(),
                kind: n.kind,
                params: n.params.iter().map(|p| self.rename_binders(p, k)).collect(),
            }),
            Type::Union(ms) => Type::Union(ms.iter().map(|m| self.rename_binders(m, k)).collect()),
            Type::Tuple(tt) => Type::Tuple(TupleType {
                fixed: tt.fixed.iter().map(|m| self.rename_binders(m, k)).collect(),
                vararg: tt.vararg.as_ref().map(|v| Box::new(self.rename_binders(v, k))),
            }),
            _ => t.clone(),
        }
    }

    /// Least upper bound: the larger side if one subsumes the other,
    /// otherwise their (canonical) union.
    pub fn join(&self, a: &Type, b: &Type) -> Type {
        if a == b || b.is_bottom() {
            return a.clone();
        }
        if a.is_bottom() {
            return b.clone();
        }
        if a.is_top() || b.is_top() {
            return Type::Top;
        }
        if self.subtype(a, b) {
            return b.clone();
        }
        if self.subtype(b, a) {
            return a.clone();
        }
        self.canonical(&Type::Union(vec![a.clone(), b.clone()]))
    }

    pub fn join_all<'a>(&self, ts: impl IntoIterator<Item = &'a Type>) -> Type {
        ts.into_iter().fold(Type::Bottom, |acc, t| self.join(&acc, t))
    }

    /// A sound lower bound of both arguments; exact unless existential
    /// types are involved, where it may answer `Bottom`.
    pub fn meet(&self, a: &Type, b: &Type) -> Type {
        if self.subtype(a, b) {
            return a.clone();
        }
        if self.subtype(b, a) {
            return b.clone();
        }
        match (a, b) {
            (Type::Union(ms), other) | (other, Type::Union(ms)) => {
                let parts: Vec<Type> = ms.iter().map(|m| self.meet(m, other)).collect();
                self.canonical(&Type::Union(parts))
            }
            (Type::Tuple(x), Type::Tuple(y)) => self.meet_tuples(x, y),
            _ => Type::Bottom,
        }
    }

    fn meet_tuples(&self, x: &TupleType, y: &TupleType) -> Type {
        let elem = |t: &TupleType, i: usize| -> Option<Type> {
            t.fixed.get(i).cloned().or_else(|| t.vararg.as_deref().cloned())
        };
        let n = x.fixed.len().max(y.fixed.len());
        let mut fixed = Vec::with_capacity(n);
        for i in 0..n {
            match (elem(x, i), elem(y, i)) {
                (Some(p), Some(q)) => {
                    let m = self.meet(&p, &q);
                    if m.is_bottom() {
                        return Type::Bottom;
                    }
                    fixed.push(m);
                }
                _ => return Type::Bottom,
            }
        }
        let vararg = match (&x.vararg, &y.vararg) {
            (Some(p), Some(q)) => Some(self.meet(p, q)),
            _ => None,
        };
        self.canonical(&Type::Tuple(TupleType { fixed, vararg: vararg.map(Box::new) }))
    }

    /// Over-approximation of "some value has both types". Free variables
    /// are treated as unknown.
    pub fn may_intersect(&self, a: &Type, b: &Type) -> bool {
        // a leaf type has no proper subtypes besides Bottom
        if a.free_vars().is_empty() && b.free_vars().is_empty() {
            if self.is_leaf(a) {
                return self.subtype(a, b);
            }
            if self.is_leaf(b) {
                return self.subtype(b, a);
            }
        }
        match (a, b) {
            (Type::Bottom, _) | (_, Type::Bottom) => false,
            (Type::Top, _) | (_, Type::Top) => true,
            (Type::Var(v), o) | (o, Type::Var(v)) => self.may_intersect(&v.upper, o),
            (Type::Union(ms), o) | (o, Type::Union(ms)) => ms.iter().any(|m| self.may_intersect(m, o)),
            (Type::Exists(_, body), o) | (o, Type::Exists(_, body)) => self.may_intersect(body, o),
            (Type::Int(x), Type::Int(y)) => x == y,
            (Type::Tuple(x), Type::Tuple(y)) => {
                let n = x.fixed.len().max(y.fixed.len());
                fn get(t: &TupleType, i: usize) -> Option<&Type> {
                    t.fixed.get(i).or(t.vararg.as_deref())
                }
                for i in 0..n {
                    match (get(x, i), get(y, i)) {
                        (Some(p), Some(q)) if self.may_intersect(p, q) => {}
                        _ => return false,
                    }
                }
                true
            }
            (Type::Nominal(x), Type::Nominal(y)) => {
                let (lo, hi) = if self.head_descends(&x.name, &y.name) {
                    (x, y)
                } else if self.head_descends(&y.name, &x.name) {
                    (y, x)
                } else {
                    return false;
                };
                let lifted = self.ancestors(lo).into_iter().find(|n| n.name == hi.name);
                let Some(lifted) = lifted else { return false };
                lifted.params.iter().zip(&hi.params).all(|(p, q)| self.params_may_equal(p, q))
            }
            _ => false,
        }
    }

    fn params_may_equal(&self, p: &Type, q: &Type) -> bool {
        if p.has_vars() || q.has_vars() {
            return true;
        }
        self.equiv(p, q)
    }

    /// Nearest nominal type above every member: each member's ancestor chain
    /// is tried, both exactly and with all parameters quantified.
    pub fn common_supertype(&self, ts: &[Type]) -> Type {
        let Some(first) = ts.first() else { return Type::Bottom };
        let Some(n) = first.unwrap_exists().as_nominal() else { return Type::Top };
        for anc in self.ancestors(n) {
            let exact = Type::Nominal(anc.clone());
            let mut candidates = vec![exact];
            if !anc.params.is_empty() {
                if let Ok(bare) = self.partial(&anc.name, Vec::new()) {
                    candidates.push(bare);
                }
            }
            for c in candidates {
                if ts.iter().all(|t| self.subtype(t, &c)) {
                    return self.canonical(&c);
                }
            }
        }
        Type::Top
    }

    /// Number of distinct instantiations `H{p1,...,pk}` of the pattern's
    /// head where each `pi` ranges over the universe's parameterless
    /// declarations plus `Top` and `Bottom`, subject to the declared bounds.
    pub fn count_instances(&self, pattern: &Type) -> Result<usize, TypeError> {
        let head = pattern
            .head()
            .ok_or_else(|| TypeError::Malformed(format!("{pattern:?} has no nominal head")))?;
        let decl = self.decl(head).ok_or_else(|| TypeError::MissingDecl(head.to_string()))?;
        let mut universe = vec![Type::Bottom, Type::Top];
        for d in self.decls() {
            if d.name == decl.name {
                continue;
            }
            if d.arity() > 0 {
                return Err(TypeError::Unsupported(format!(
                    "universe contains parametric type `{}`, so it is infinite",
                    d.name
                )));
            }
            universe.push(Type::Nominal(Nominal { name: d.name.clone(), kind: d.kind, params: Vec::new() }));
        }
        let k = decl.arity();
        let mut count = 0usize;
        let mut idx = vec![0usize; k];
        loop {
            let params: Vec<Type> = idx.iter().map(|&i| universe[i].clone()).collect();
            let mut subst = Vec::new();
            let ok = decl.params.iter().zip(&params).all(|(v, p)| {
                let lo = v.lower.subst_all(&subst);
                let hi = v.upper.subst_all(&subst);
                subst.push((v.name.clone(), p.clone()));
                self.subtype(&lo, p) && self.subtype(p, &hi)
            });
            if ok {
                count += 1;
            }
            // odometer over the universe
            let mut pos = 0;
            loop {
                if pos == k {
                    return Ok(count);
                }
                idx[pos] += 1;
                if idx[pos] < universe.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// Give every binder a globally unique name so later renaming cannot capture.
fn alpha_fresh(t: &Type) -> Type {
    match t {
        Type::Exists(v, body) => {
            let var = TypeVar::new(fresh_name(&v.name), alpha_fresh(&v.lower), alpha_fresh(&v.upper));
            let body = body.subst(&v.name, &var.occurrence());
            Type::exists(var, alpha_fresh(&body))
        }
        Type::Nominal(n) => Type::Nominal(Nominal {
            name: n.name.clone(),
            kind: n.kind,
            params: n.params.iter().map(alpha_fresh).collect(),
        }),
        Type::Union(ms) => Type::Union(ms.iter().map(alpha_fresh).collect()),
        Type::Tuple(tt) => Type::Tuple(TupleType {
            fixed: tt.fixed.iter().map(alpha_fresh).collect(),
            vararg: tt.vararg.as_ref().map(|v| Box::new(alpha_fresh(v))),
        }),
        _ => t.clone(),
    }
}
