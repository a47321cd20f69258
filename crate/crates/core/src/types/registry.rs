use indexmap::IndexMap;

use super::term::{Kind, Name, Nominal, Type, TypeVar};
use super::TypeError;

/// A nominal type declaration.
#[derive(Clone, Debug)]
pub struct TypeDecl {
    pub name: Name,
    pub kind: Kind,
    /// Declared parameters; bounds may mention earlier parameters.
    pub params: Vec<TypeVar>,
    /// Supertype written in terms of `params`; `Top` when omitted.
    pub supertype: Type,
    /// Field layout of a struct-like tag type. Primitive tags have `None`.
    pub fields: Option<Vec<(Name, Type)>>,
    /// Declaration order, used for canonical union ordering.
    pub index: usize,
}

impl TypeDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Clone, Debug)]
pub struct Alias {
    pub name: Name,
    pub params: Vec<TypeVar>,
    pub body: Type,
}

/// The frozen set of type declarations every type operation is relative to.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    decls: IndexMap<Name, TypeDecl>,
    aliases: IndexMap<Name, Alias>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decl(&self, name: &str) -> Option<&TypeDecl> {
        self.decls.get(name)
    }

    pub fn alias(&self, name: &str) -> Option<&Alias> {
        self.aliases.get(name)
    }

    pub fn decls(&self) -> impl Iterator<Item = &TypeDecl> {
        self.decls.values()
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.decls.contains_key(name) || self.aliases.contains_key(name) || name == "Any" || name == "Bottom"
    }

    /// Register a declaration. The supertype must already be declared and
    /// abstract, which also rules out cycles.
    pub fn declare(
        &mut self,
        name: &str,
        kind: Kind,
        params: Vec<TypeVar>,
        supertype: Type,
        fields: Option<Vec<(Name, Type)>>,
    ) -> Result<(), TypeError> {
        if self.is_defined(name) {
            return Err(TypeError::Redeclared(name.to_string()));
        }
        match &supertype {
            Type::Top => {}
            Type::Nominal(n) => {
                let sup = self.decl(&n.name).ok_or_else(|| TypeError::MissingDecl(n.name.to_string()))?;
                if sup.kind != Kind::Abstract {
                    return Err(TypeError::BadSupertype {
                        name: name.to_string(),
                        supertype: n.name.to_string(),
                    });
                }
                if sup.arity() != n.params.len() {
                    return Err(TypeError::Arity {
                        name: n.name.to_string(),
                        expected: sup.arity(),
                        found: n.params.len(),
                    });
                }
            }
            other => {
                return Err(TypeError::Malformed(format!("supertype of {name} must be nominal, got {other:?}")))
            }
        }
        let index = self.decls.len();
        let name: Name = name.into();
        self.decls.insert(name.clone(), TypeDecl { name, kind, params, supertype, fields, index });
        Ok(())
    }

    pub fn declare_alias(&mut self, name: &str, params: Vec<TypeVar>, body: Type) -> Result<(), TypeError> {
        if self.is_defined(name) {
            return Err(TypeError::Redeclared(name.to_string()));
        }
        let name: Name = name.into();
        self.aliases.insert(name.clone(), Alias { name, params, body });
        Ok(())
    }

    /// Instantiate a declared type with exactly its arity of parameters.
    pub fn instantiate(&self, name: &str, params: Vec<Type>) -> Result<Type, TypeError> {
        let d = self.decl(name).ok_or_else(|| TypeError::MissingDecl(name.to_string()))?;
        if d.arity() != params.len() {
            return Err(TypeError::Arity { name: name.to_string(), expected: d.arity(), found: params.len() });
        }
        Ok(Type::Nominal(Nominal { name: d.name.clone(), kind: d.kind, params }))
    }

    /// The unparameterized type: `S` for `S{T}` is `S{T} where T`.
    /// `given` leading parameters are applied, the rest quantified.
    pub fn partial(&self, name: &str, given: Vec<Type>) -> Result<Type, TypeError> {
        let d = self.decl(name).ok_or_else(|| TypeError::MissingDecl(name.to_string()))?;
        if given.len() > d.arity() {
            return Err(TypeError::Arity { name: name.to_string(), expected: d.arity(), found: given.len() });
        }
        let mut subst: Vec<(Name, Type)> = Vec::new();
        let mut params = Vec::with_capacity(d.arity());
        let mut binders = Vec::new();
        for (i, p) in d.params.iter().enumerate() {
            if let Some(g) = given.get(i) {
                subst.push((p.name.clone(), g.clone()));
                params.push(g.clone());
            } else {
                let fresh = super::term::fresh_name(&p.name);
                let var = TypeVar::new(fresh.clone(), p.lower.subst_all(&subst), p.upper.subst_all(&subst));
                subst.push((p.name.clone(), var.occurrence()));
                params.push(var.occurrence());
                binders.push(var);
            }
        }
        let mut t = Type::Nominal(Nominal { name: d.name.clone(), kind: d.kind, params });
        for v in binders.into_iter().rev() {
            t = Type::exists(v, t);
        }
        Ok(t)
    }

    /// Expand an alias applied to (a prefix of) its parameters.
    pub fn expand_alias(&self, name: &str, given: Vec<Type>) -> Result<Type, TypeError> {
        let a = self.alias(name).ok_or_else(|| TypeError::MissingDecl(name.to_string()))?;
        if given.len() > a.params.len() {
            return Err(TypeError::Arity { name: name.to_string(), expected: a.params.len(), found: given.len() });
        }
        let mut subst: Vec<(Name, Type)> = Vec::new();
        let mut binders = Vec::new();
        for (i, p) in a.params.iter().enumerate() {
            if let Some(g) = given.get(i) {
                subst.push((p.name.clone(), g.clone()));
            } else {
                let fresh = super::term::fresh_name(&p.name);
                let var = TypeVar::new(fresh, p.lower.subst_all(&subst), p.upper.subst_all(&subst));
                subst.push((p.name.clone(), var.occurrence()));
                binders.push(var);
            }
        }
        let mut t = a.body.subst_all(&subst);
        for v in binders.into_iter().rev() {
            t = Type::exists(v, t);
        }
        Ok(t)
    }

    /// Declared supertype of an instantiated nominal, with parameters substituted.
    pub fn supertype(&self, n: &Nominal) -> Type {
        let Some(d) = self.decl(&n.name) else { return Type::Top };
        if d.params.is_empty() {
            return d.supertype.clone();
        }
        let pairs: Vec<(Name, Type)> = d.params.iter().map(|p| p.name.clone()).zip(n.params.iter().cloned()).collect();
        d.supertype.subst_all(&pairs)
    }

    /// Chain of nominal ancestors starting with `n` itself.
    pub fn ancestors(&self, n: &Nominal) -> Vec<Nominal> {
        let mut out = vec![n.clone()];
        let mut cur = n.clone();
        while let Type::Nominal(s) = self.supertype(&cur) {
            out.push(s.clone());
            cur = s;
        }
        out
    }

    /// Whether `anc` is `head` or one of its declared ancestors.
    pub fn head_descends(&self, head: &str, anc: &str) -> bool {
        let mut cur = self.decl(head);
        while let Some(d) = cur {
            if &*d.name == anc {
                return true;
            }
            cur = d.supertype.head().and_then(|h| self.decl(h));
        }
        false
    }

    /// Field layout of an instantiated struct type.
    pub fn fields_of(&self, n: &Nominal) -> Option<Vec<(Name, Type)>> {
        let d = self.decl(&n.name)?;
        let fields = d.fields.as_ref()?;
        let pairs: Vec<(Name, Type)> = d.params.iter().map(|p| p.name.clone()).zip(n.params.iter().cloned()).collect();
        Some(fields.iter().map(|(f, t)| (f.clone(), t.subst_all(&pairs))).collect())
    }

    /// Verify every nominal in `t` is declared with the right arity.
    pub fn check(&self, t: &Type) -> Result<(), TypeError> {
        match t {
            Type::Nominal(n) => {
                let d = self.decl(&n.name).ok_or_else(|| TypeError::MissingDecl(n.name.to_string()))?;
                if d.arity() != n.params.len() {
                    return Err(TypeError::Arity {
                        name: n.name.to_string(),
                        expected: d.arity(),
                        found: n.params.len(),
                    });
                }
                n.params.iter().try_for_each(|p| self.check(p))
            }
            Type::Union(ms) => ms.iter().try_for_each(|m| self.check(m)),
            Type::Tuple(tt) => {
                tt.fixed.iter().try_for_each(|m| self.check(m))?;
                tt.vararg.as_deref().map_or(Ok(()), |v| self.check(v))
            }
            Type::Var(v) => {
                self.check(&v.lower)?;
                self.check(&v.upper)
            }
            Type::Exists(v, body) => {
                self.check(&v.lower)?;
                self.check(&v.upper)?;
                self.check(body)
            }
            Type::Top | Type::Bottom | Type::Int(_) => Ok(()),
        }
    }

    /// Stable structural encoding; unions are ordered by it. Bound
    /// variables are encoded by binder depth so renaming does not matter.
    pub fn sort_key(&self, t: &Type) -> Vec<u64> {
        let mut out = Vec::new();
        self.encode(t, &mut Vec::new(), &mut out);
        out
    }

    fn encode(&self, t: &Type, bound: &mut Vec<Name>, out: &mut Vec<u64>) {
        match t {
            Type::Top => out.push(0),
            Type::Bottom => out.push(1),
            Type::Nominal(n) => {
                out.push(2);
                out.push(self.decl(&n.name).map_or(u64::MAX, |d| d.index as u64));
                for p in &n.params {
                    self.encode(p, bound, out);
                }
                out.push(u64::MAX);
            }
            Type::Tuple(tt) => {
                out.push(3);
                out.push(tt.fixed.len() as u64);
                for p in &tt.fixed {
                    self.encode(p, bound, out);
                }
                match &tt.vararg {
                    Some(v) => {
                        out.push(1);
                        self.encode(v, bound, out);
                    }
                    None => out.push(0),
                }
            }
            Type::Union(ms) => {
                out.push(4);
                for m in ms {
                    self.encode(m, bound, out);
                }
                out.push(u64::MAX);
            }
            Type::Var(v) => match bound.iter().rposition(|b| *b == v.name) {
                Some(i) => {
                    out.push(5);
                    out.push(i as u64);
                }
                None => {
                    out.push(6);
                    out.extend(v.name.bytes().map(u64::from));
                    out.push(u64::MAX);
                }
            },
            Type::Exists(v, body) => {
                out.push(7);
                self.encode(&v.lower, bound, out);
                self.encode(&v.upper, bound, out);
                bound.push(v.name.clone());
                self.encode(body, bound, out);
                bound.pop();
            }
            Type::Int(i) => {
                out.push(8);
                out.push(*i as u64 ^ (1 << 63));
            }
        }
    }
}
