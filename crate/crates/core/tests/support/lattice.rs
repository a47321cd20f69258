//! Random type universes and an extensional subtype oracle.
//!
//! A generated registry has at most six declarations, each abstract or
//! concrete with zero or one parameter. Terms are built from `Any`,
//! `Bottom`, declared names, bare parametric names (an existential over the
//! parameter), applications, binary unions and pairs.
//!
//! The oracle never looks at the library's subtype algorithm. It enumerates
//! a finite set of concrete values, decides membership of each value in a
//! term structurally, and answers `a <: b` by set inclusion. Every abstract
//! type (and `Any`) gets an extra anonymous concrete subtype, so that an
//! abstract type is never covered by the union of its declared subtypes.

use std::collections::HashMap;

use mdl::types::{Kind, Registry, Type, TypeVar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub enum SupParam {
    Var,
    Fixed(usize),
}

#[derive(Clone, Debug)]
pub struct Decl {
    pub name: String,
    pub is_abstract: bool,
    pub arity: usize,
    /// Parent declaration and, when the parent is parametric, its argument.
    pub sup: Option<(usize, Option<SupParam>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Top,
    Bottom,
    Name(usize),
    Bare(usize),
    App(usize, Box<Term>),
    Union(Box<Term>, Box<Term>),
    Pair(Box<Term>, Box<Term>),
}

impl Term {
    pub fn depth(&self) -> usize {
        match self {
            Term::Top | Term::Bottom | Term::Name(_) | Term::Bare(_) => 0,
            Term::App(_, p) => 1 + p.depth(),
            Term::Union(a, b) | Term::Pair(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

#[derive(Clone, Debug)]
enum Value {
    /// A declared concrete type, or the anonymous subtype of a declaration
    /// (`None` means the anonymous subtype of `Any`).
    Nominal { decl: Option<usize>, phantom: bool, param: Option<Term> },
    Pair(Box<Value>, Box<Value>),
}

pub struct Universe {
    pub decls: Vec<Decl>,
    /// Values whose parameters have depth 0, then values whose parameters
    /// have depth at most 1 (plus pairs).
    levels: [std::rc::Rc<Vec<Value>>; 2],
    memo: HashMap<(Term, usize), Vec<bool>>,
}

impl Universe {
    pub fn random(seed: u64) -> Universe {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=6);
        let mut decls: Vec<Decl> = Vec::new();
        for i in 0..n {
            let is_abstract = rng.random_bool(0.5);
            let arity = usize::from(rng.random_bool(0.4));
            let parents: Vec<usize> = (0..i).filter(|&j| decls[j].is_abstract).collect();
            let sup = if parents.is_empty() || rng.random_bool(0.3) {
                None
            } else {
                let p = parents[rng.random_range(0..parents.len())];
                if decls[p].arity == 0 {
                    Some((p, None))
                } else {
                    let fixed: Vec<usize> = (0..i).filter(|&j| decls[j].arity == 0).collect();
                    if arity == 1 && (fixed.is_empty() || rng.random_bool(0.6)) {
                        Some((p, Some(SupParam::Var)))
                    } else if !fixed.is_empty() {
                        Some((p, Some(SupParam::Fixed(fixed[rng.random_range(0..fixed.len())]))))
                    } else {
                        None
                    }
                }
            };
            let name = format!("{}{}", if is_abstract { "Ab" } else { "Tg" }, i);
            decls.push(Decl { name, is_abstract, arity, sup });
        }
        Universe::new(decls)
    }

    /// The registry of the type-counting figure: abstract `Nat` with
    /// concrete `One` and `Two`, and a concrete `S{T}`.
    pub fn fig2() -> Universe {
        let d = |name: &str, is_abstract, arity, sup| Decl { name: name.into(), is_abstract, arity, sup };
        Universe::new(vec![d("Nat", true, 0, None), d("One", false, 0, Some((0, None))), d("Two", false, 0, Some((0, None))), d("S", false, 1, None)])
    }

    pub fn new(decls: Vec<Decl>) -> Universe {
        let mut u = Universe { decls, levels: Default::default(), memo: HashMap::new() };
        let mut params: Vec<Term> = u.terms(0);
        params.extend(u.terms(1).into_iter().filter(|t| !matches!(t, Term::Pair(..))));
        let base = |params: &[Term]| {
            let mut vals = vec![Value::Nominal { decl: None, phantom: true, param: None }];
            for (i, d) in u.decls.iter().enumerate() {
                let phantom = d.is_abstract;
                if d.arity == 0 {
                    vals.push(Value::Nominal { decl: Some(i), phantom, param: None });
                } else {
                    for p in params {
                        vals.push(Value::Nominal { decl: Some(i), phantom, param: Some(p.clone()) });
                    }
                }
            }
            vals
        };
        let small = base(&u.terms(0));
        let mut values = base(&params);
        for a in &small {
            for b in &small {
                values.push(Value::Pair(Box::new(a.clone()), Box::new(b.clone())));
            }
        }
        u.levels = [std::rc::Rc::new(small), std::rc::Rc::new(values)];
        u
    }

    pub fn registry(&self) -> Registry {
        let mut r = Registry::new();
        for d in &self.decls {
            let kind = if d.is_abstract { Kind::Abstract } else { Kind::Tag };
            let params = if d.arity == 1 { vec![TypeVar::unbounded("T")] } else { vec![] };
            let sup = match &d.sup {
                None => Type::Top,
                Some((p, None)) => r.parse_type(&self.decls[*p].name).unwrap(),
                Some((p, Some(SupParam::Var))) => Type::abstract_(&self.decls[*p].name, vec![params[0].occurrence()]),
                Some((p, Some(SupParam::Fixed(k)))) => {
                    Type::abstract_(&self.decls[*p].name, vec![r.parse_type(&self.decls[*k].name).unwrap()])
                }
            };
            r.declare(&d.name, kind, params, sup, None).unwrap();
        }
        r
    }

    pub fn show(&self, t: &Term) -> String {
        match t {
            Term::Top => "Any".into(),
            Term::Bottom => "Bottom".into(),
            Term::Name(i) | Term::Bare(i) => self.decls[*i].name.clone(),
            Term::App(i, p) => format!("{}{{{}}}", self.decls[*i].name, self.show(p)),
            Term::Union(a, b) => format!("Union({},{})", self.show(a), self.show(b)),
            Term::Pair(a, b) => format!("({},{})", self.show(a), self.show(b)),
        }
    }

    pub fn to_type(&self, reg: &Registry, t: &Term) -> Type {
        reg.parse_type(&self.show(t)).unwrap_or_else(|e| panic!("{}: {e}", self.show(t)))
    }

    /// Every term of exactly this depth (depth 0 and 1 only).
    pub fn terms(&self, depth: usize) -> Vec<Term> {
        let mut atoms = vec![Term::Top, Term::Bottom];
        for (i, d) in self.decls.iter().enumerate() {
            atoms.push(if d.arity == 0 { Term::Name(i) } else { Term::Bare(i) });
        }
        if depth == 0 {
            return atoms;
        }
        assert_eq!(depth, 1);
        let mut out = Vec::new();
        for (i, d) in self.decls.iter().enumerate() {
            if d.arity == 1 {
                out.extend(atoms.iter().map(|a| Term::App(i, Box::new(a.clone()))));
            }
        }
        for (x, a) in atoms.iter().enumerate() {
            for b in &atoms[x + 1..] {
                out.push(Term::Union(Box::new(a.clone()), Box::new(b.clone())));
            }
            for b in &atoms {
                out.push(Term::Pair(Box::new(a.clone()), Box::new(b.clone())));
            }
        }
        out
    }

    /// A random term of depth at most `depth`. Pairs never nest.
    pub fn random_term(&self, rng: &mut impl Rng, depth: usize, pair_ok: bool) -> Term {
        let atoms = self.terms(0);
        if depth == 0 || rng.random_bool(0.25) {
            return atoms[rng.random_range(0..atoms.len())].clone();
        }
        let apps: Vec<usize> = (0..self.decls.len()).filter(|&i| self.decls[i].arity == 1).collect();
        match rng.random_range(0..3) {
            0 if !apps.is_empty() => {
                Term::App(apps[rng.random_range(0..apps.len())], Box::new(self.random_term(rng, depth - 1, false)))
            }
            1 if pair_ok => Term::Pair(
                Box::new(self.random_term(rng, depth - 1, false)),
                Box::new(self.random_term(rng, depth - 1, false)),
            ),
            _ => Term::Union(
                Box::new(self.random_term(rng, depth - 1, pair_ok)),
                Box::new(self.random_term(rng, depth - 1, pair_ok)),
            ),
        }
    }

    /// Walk from a concrete value up its supertype chain.
    fn chain(&self, decl: usize, param: Option<Term>) -> Vec<(usize, Option<Term>)> {
        let mut out = vec![(decl, param)];
        loop {
            let (d, p) = out.last().unwrap().clone();
            match &self.decls[d].sup {
                None => return out,
                Some((parent, None)) => out.push((*parent, None)),
                Some((parent, Some(SupParam::Var))) => out.push((*parent, p)),
                Some((parent, Some(SupParam::Fixed(k)))) => out.push((*parent, Some(Term::Name(*k)))),
            }
        }
    }

    fn member(&mut self, v: &Value, t: &Term, level: usize) -> bool {
        match (t, v) {
            (Term::Top, _) => true,
            (Term::Bottom, _) => false,
            (Term::Union(a, b), _) => self.member(v, a, level) || self.member(v, b, level),
            (Term::Pair(a, b), Value::Pair(x, y)) => self.member(x, a, level) && self.member(y, b, level),
            (Term::Pair(..), _) => false,
            (_, Value::Pair(..)) => false,
            (_, Value::Nominal { decl: None, .. }) => false,
            (Term::Name(i) | Term::Bare(i), Value::Nominal { decl: Some(d), param, .. }) => {
                self.chain(*d, param.clone()).iter().any(|(c, _)| c == i)
            }
            (Term::App(i, want), Value::Nominal { decl: Some(d), param, .. }) => {
                let found = self.chain(*d, param.clone()).into_iter().find(|(c, _)| c == i);
                match found {
                    Some((_, Some(got))) => self.equiv_at(&got, want, level - 1),
                    _ => false,
                }
            }
        }
    }

    fn extension_at(&mut self, t: &Term, level: usize) -> Vec<bool> {
        if let Some(e) = self.memo.get(&(t.clone(), level)) {
            return e.clone();
        }
        let values = self.levels[level - 1].clone();
        let e: Vec<bool> = values.iter().map(|v| self.member(v, t, level)).collect();
        self.memo.insert((t.clone(), level), e.clone());
        e
    }

    /// Equivalence of two terms of depth at most `level`. Distinct atoms
    /// are never equivalent, since every declared type is inhabited.
    fn equiv_at(&mut self, a: &Term, b: &Term, level: usize) -> bool {
        if level == 0 || a == b {
            return a == b;
        }
        self.extension_at(a, level) == self.extension_at(b, level)
    }

    fn extension(&mut self, t: &Term) -> Vec<bool> {
        self.extension_at(t, 2)
    }

    pub fn subtype(&mut self, a: &Term, b: &Term) -> bool {
        let ea = self.extension(a);
        let eb = self.extension(b);
        ea.iter().zip(&eb).all(|(x, y)| !x || *y)
    }

    pub fn equiv(&mut self, a: &Term, b: &Term) -> bool {
        self.equiv_at(a, b, 2)
    }

    /// Whether some enumerated value belongs to both terms.
    pub fn common_member(&mut self, a: &Term, b: &Term) -> Option<usize> {
        let ea = self.extension(a);
        let eb = self.extension(b);
        ea.iter().zip(&eb).position(|(x, y)| *x && *y)
    }

    /// Membership of the `i`th value in a library type, through its
    /// singleton term.
    pub fn value_term(&self, i: usize) -> Term {
        fn go(v: &Value) -> Term {
            match v {
                Value::Nominal { decl: Some(d), phantom: false, param: None } => Term::Name(*d),
                Value::Nominal { decl: Some(d), phantom: false, param: Some(p) } => Term::App(*d, Box::new(p.clone())),
                Value::Pair(a, b) => Term::Pair(Box::new(go(a)), Box::new(go(b))),
                _ => Term::Bottom,
            }
        }
        go(&self.levels[1][i])
    }

    pub fn is_phantom(&self, i: usize) -> bool {
        fn go(v: &Value) -> bool {
            match v {
                Value::Nominal { phantom, decl, .. } => *phantom || decl.is_none(),
                Value::Pair(a, b) => go(a) || go(b),
            }
        }
        go(&self.levels[1][i])
    }
}

/// Compare the library's subtype relation with the oracle on every pair of
/// terms of depth at most one, plus a sample of depth-two terms. Returns the
/// number of pairs compared.
pub fn oracle_agreement(u: &mut Universe, seed: u64, extra: usize) -> Result<usize, String> {
    let reg = u.registry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut terms = u.terms(0);
    terms.extend(u.terms(1));
    for _ in 0..extra {
        terms.push(u.random_term(&mut rng, 2, true));
    }
    let types: Vec<Type> = terms.iter().map(|t| u.to_type(&reg, t)).collect();
    let mut n = 0;
    for (a, ta) in terms.iter().zip(&types) {
        for (b, tb) in terms.iter().zip(&types) {
            let want = u.subtype(a, b);
            let got = reg.subtype(ta, tb);
            if want != got {
                return Err(format!(
                    "{:?}: {} <: {} is {got}, oracle says {want}",
                    u.decls,
                    u.show(a),
                    u.show(b)
                ));
            }
            n += 1;
        }
    }
    Ok(n)
}

/// The algebraic laws on one random registry and three random terms.
pub fn check_laws(seed: u64) -> Result<(), String> {
    let mut u = Universe::random(seed);
    let reg = u.registry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = u.random_term(&mut rng, 2, true);
    let b = u.random_term(&mut rng, 2, true);
    let c = u.random_term(&mut rng, 2, true);
    let (ta, tb, tc) = (u.to_type(&reg, &a), u.to_type(&reg, &b), u.to_type(&reg, &c));
    let desc = format!("a={} b={} c={} in {:?}", u.show(&a), u.show(&b), u.show(&c), u.decls);
    let ctx = |what: &str| format!("{what} with {desc}");
    let sub = |x: &Type, y: &Type| reg.subtype(x, y);

    if !sub(&ta, &ta) {
        return Err(ctx("reflexivity"));
    }
    // transitivity along a chain built to be non-trivial
    let jab = reg.join(&ta, &tb);
    let jabc = reg.join(&jab, &tc);
    if !(sub(&ta, &jab) && sub(&tb, &jab) && sub(&jab, &jabc) && sub(&ta, &jabc)) {
        return Err(ctx("join bound / transitivity"));
    }
    if sub(&ta, &tb) && sub(&tb, &tc) && !sub(&ta, &tc) {
        return Err(ctx("transitivity"));
    }
    if sub(&ta, &tb) && sub(&tb, &ta) && reg.canonical(&ta) != reg.canonical(&tb) {
        return Err(ctx(&format!(
            "antisymmetry: {} vs {}",
            reg.show(&reg.canonical(&ta)),
            reg.show(&reg.canonical(&tb))
        )));
    }
    if reg.canonical(&ta) != reg.canonical(&reg.canonical(&ta)) || !reg.equiv(&ta, &reg.canonical(&ta)) {
        return Err(ctx("canonical form"));
    }
    // join is least among the terms we can check: any common upper bound
    // among a, b, c contains it
    for upper in [&ta, &tb, &tc] {
        if sub(&ta, upper) && sub(&tb, upper) && !sub(&jab, upper) {
            return Err(ctx("join is not least"));
        }
    }
    let m = reg.meet(&ta, &tb);
    if !(sub(&m, &ta) && sub(&m, &tb)) {
        return Err(ctx(&format!("meet {} is not a lower bound", reg.show(&m))));
    }
    let existential = |t: &Term| format!("{t:?}").contains("Bare");
    if !existential(&a) && !existential(&b) {
        // every concrete value in both arguments is in the meet
        let ea = u.extension(&a);
        let eb = u.extension(&b);
        for i in 0..ea.len() {
            if ea[i] && eb[i] && !u.is_phantom(i) {
                let v = u.value_term(i);
                let tv = u.to_type(&reg, &v);
                if !sub(&tv, &m) {
                    return Err(ctx(&format!("meet {} misses {}", reg.show(&m), reg.show(&tv))));
                }
            }
        }
    }
    // invariance
    for (i, d) in u.decls.iter().enumerate() {
        if d.arity == 1 {
            let pa = u.to_type(&reg, &Term::App(i, Box::new(a.clone())));
            let pb = u.to_type(&reg, &Term::App(i, Box::new(b.clone())));
            if matches!(a, Term::Pair(..)) || matches!(b, Term::Pair(..)) {
                break;
            }
            if sub(&pa, &pb) != reg.equiv(&ta, &tb) {
                return Err(ctx("invariance"));
            }
        }
    }
    // the oracle agrees on this pair too
    for (x, y, tx, ty) in [(&a, &b, &ta, &tb), (&b, &c, &tb, &tc), (&a, &c, &ta, &tc)] {
        if u.subtype(x, y) != sub(tx, ty) {
            return Err(ctx(&format!("oracle disagrees on {} <: {}", reg.show(tx), reg.show(ty))));
        }
    }
    Ok(())
}
