//! Generic functions, their method tables, and dispatch.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use indexmap::IndexMap;

use crate::types::{Name, Registry, Type};

pub type MethodId = usize;

/// Position in a source file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug)]
pub struct Method {
    pub id: MethodId,
    pub fname: Name,
    /// Canonical signature, a tuple type possibly under binders.
    pub sig: Type,
    /// Signature as written: one binder per static parameter, outermost
    /// first, used to recover the parameters' values at a call.
    pub raw_sig: Type,
    pub static_params: Vec<Name>,
    /// Index of the lowered body in the program's function list.
    pub body: usize,
    pub span: Span,
}

impl Method {
    pub fn is_vararg(&self) -> bool {
        matches!(self.sig.unwrap_exists(), Type::Tuple(t) if t.vararg.is_some())
    }

    pub fn nparams(&self) -> usize {
        match self.sig.unwrap_exists() {
            Type::Tuple(t) => t.fixed.len(),
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Specificity {
    More,
    Less,
    Equal,
    Incomparable,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DispatchError {
    #[error("no method matching {fname}{args}")]
    NoMethod { fname: String, args: String },
    #[error("{fname}{args} is ambiguous between {} candidates", candidates.len())]
    Ambiguous { fname: String, args: String, candidates: Vec<MethodId> },
    #[error("malformed method signature for {0}: expected a tuple type")]
    BadSignature(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AddOutcome {
    pub id: MethodId,
    /// Set when an existing method with an equivalent signature was replaced.
    pub replaced: Option<MethodId>,
    /// Existing methods whose applicability overlaps and that are neither
    /// more nor less specific.
    pub ambiguous_with: Vec<MethodId>,
}

/// Result of dispatching on a leaf argument tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub method: MethodId,
    /// Values of the method's static parameters.
    pub witnesses: Arc<[Type]>,
}

type DispatchKey = (Name, Type);

#[derive(Debug, Default)]
pub struct MethodTable {
    methods: Vec<Method>,
    /// Per function, live methods ordered from more to less specific.
    funcs: IndexMap<Name, Vec<MethodId>>,
    warnings: Vec<String>,
    lookup: Mutex<HashMap<DispatchKey, Result<Resolved, DispatchError>>>,
    pairs: Mutex<HashMap<(MethodId, MethodId), Specificity>>,
}

impl Clone for MethodTable {
    fn clone(&self) -> Self {
        MethodTable {
            methods: self.methods.clone(),
            funcs: self.funcs.clone(),
            warnings: self.warnings.clone(),
            lookup: Mutex::default(),
            pairs: Mutex::default(),
        }
    }
}

/// Compare two signatures: subtyping first, then a fixed-arity signature
/// beats a vararg one when neither contains the other.
pub fn specificity(reg: &Registry, a: &Type, b: &Type) -> Specificity {
    let ab = reg.subtype(a, b);
    let ba = reg.subtype(b, a);
    match (ab, ba) {
        (true, true) => Specificity::Equal,
        (true, false) => Specificity::More,
        (false, true) => Specificity::Less,
        (false, false) => {
            let va = is_vararg(a);
            let vb = is_vararg(b);
            if !va && vb && reg.may_intersect(a, b) {
                Specificity::More
            } else if va && !vb && reg.may_intersect(a, b) {
                Specificity::Less
            } else {
                Specificity::Incomparable
            }
        }
    }
}

fn is_vararg(t: &Type) -> bool {
    matches!(t.unwrap_exists(), Type::Tuple(tt) if tt.vararg.is_some())
}

impl MethodTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn method(&self, id: MethodId) -> &Method {
        &self.methods[id]
    }

    /// Every method ever added, including replaced ones.
    pub fn all_methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn functions(&self) -> impl Iterator<Item = (&Name, &[MethodId])> {
        self.funcs.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn methods_of(&self, fname: &str) -> &[MethodId] {
        self.funcs.get(fname).map_or(&[], Vec::as_slice)
    }

    pub fn has_function(&self, fname: &str) -> bool {
        self.funcs.contains_key(fname)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Drop the most recent warning (used when a redefinition is expected).
    pub fn pop_warning(&mut self) -> Option<String> {
        self.warnings.pop()
    }

    fn pair(&self, reg: &Registry, a: MethodId, b: MethodId) -> Specificity {
        if let Some(s) = self.pairs.lock().unwrap().get(&(a, b)) {
            return *s;
        }
        let s = specificity(reg, &self.methods[a].sig, &self.methods[b].sig);
        self.pairs.lock().unwrap().insert((a, b), s);
        s
    }

    pub fn add_method(
        &mut self,
        reg: &Registry,
        fname: &str,
        raw_sig: Type,
        static_params: Vec<Name>,
        body: usize,
        span: Span,
    ) -> Result<AddOutcome, DispatchError> {
        if !matches!(raw_sig.unwrap_exists(), Type::Tuple(_)) {
            return Err(DispatchError::BadSignature(fname.to_string()));
        }
        self.lookup.lock().unwrap().clear();
        let sig = reg.canonical(&raw_sig);
        let id = self.methods.len();
        let fname: Name = fname.into();
        self.methods.push(Method { id, fname: fname.clone(), sig, raw_sig, static_params, body, span });
        let list = self.funcs.entry(fname.clone()).or_default().clone();
        let mut outcome = AddOutcome { id, ..Default::default() };
        let mut kept = Vec::with_capacity(list.len() + 1);
        let mut insert_at = None;
        for &m in &list {
            match self.pair(reg, id, m) {
                Specificity::Equal => {
                    outcome.replaced = Some(m);
                    self.warnings.push(format!(
                        "method {}{} redefined at {}",
                        fname,
                        reg.show(&self.methods[m].sig),
                        span
                    ));
                    continue;
                }
                Specificity::More => {
                    if insert_at.is_none() {
                        insert_at = Some(kept.len());
                    }
                }
                Specificity::Incomparable => {
                    if reg.may_intersect(&self.methods[id].sig, &self.methods[m].sig) {
                        outcome.ambiguous_with.push(m);
                        self.warnings.push(format!(
                            "methods {}{} and {}{} may be ambiguous",
                            fname,
                            reg.show(&self.methods[id].sig),
                            fname,
                            reg.show(&self.methods[m].sig)
                        ));
                    }
                }
                Specificity::Less => {}
            }
            kept.push(m);
        }
        kept.insert(insert_at.unwrap_or(kept.len()), id);
        self.funcs.insert(fname, kept);
        Ok(outcome)
    }

    /// Methods that some value of type `argtypes` could select, ordered from
    /// most to least specific. Methods shadowed by an earlier method that
    /// covers all of `argtypes` are left out.
    pub fn matching_methods(&self, reg: &Registry, fname: &str, argtypes: &Type) -> Vec<MethodId> {
        let mut out = Vec::new();
        for &m in self.methods_of(fname) {
            let sig = &self.methods[m].sig;
            if reg.subtype(argtypes, sig) {
                out.push(m);
                break;
            }
            if reg.may_intersect(argtypes, sig) {
                out.push(m);
            }
        }
        out
    }

    /// The unique most specific method applicable to a leaf argument tuple.
    pub fn dispatch(&self, reg: &Registry, fname: &str, argtypes: &Type) -> Result<Resolved, DispatchError> {
        let key = (Name::from(fname), argtypes.clone());
        if let Some(r) = self.lookup.lock().unwrap().get(&key) {
            return r.clone();
        }
        let r = self.dispatch_uncached(reg, fname, argtypes);
        self.lookup.lock().unwrap().insert(key, r.clone());
        r
    }

    fn dispatch_uncached(&self, reg: &Registry, fname: &str, argtypes: &Type) -> Result<Resolved, DispatchError> {
        let mut applicable: Vec<(MethodId, Vec<Type>)> = Vec::new();
        for &m in self.methods_of(fname) {
            if let Some(w) = reg.match_signature(argtypes, &self.methods[m].raw_sig) {
                applicable.push((m, w));
            }
        }
        let show_args = || reg.show(argtypes);
        if applicable.is_empty() {
            return Err(DispatchError::NoMethod { fname: fname.to_string(), args: show_args() });
        }
        let ids: Vec<MethodId> = applicable.iter().map(|(m, _)| *m).collect();
        let best = ids
            .iter()
            .position(|&c| ids.iter().all(|&o| o == c || self.pair(reg, c, o) == Specificity::More));
        let Some(best) = best else {
            // report the methods that nothing applicable beats
            let candidates = ids
                .iter()
                .copied()
                .filter(|&c| !ids.iter().any(|&o| o != c && self.pair(reg, o, c) == Specificity::More))
                .collect();
            return Err(DispatchError::Ambiguous { fname: fname.to_string(), args: show_args(), candidates });
        };
        let (method, w) = applicable.swap_remove(best);
        Ok(Resolved { method, witnesses: w.into() })
    }
}

/// Cache of per-(function, leaf argument tuple) instances. Readers see
/// either no entry or a completely built one.
#[derive(Debug)]
pub struct SpecCache<V> {
    map: RwLock<HashMap<(Name, Type), Arc<V>>>,
}

impl<V> Default for SpecCache<V> {
    fn default() -> Self {
        SpecCache { map: RwLock::new(HashMap::new()) }
    }
}

impl<V> SpecCache<V> {
    pub fn get(&self, fname: &str, argtypes: &Type) -> Option<Arc<V>> {
        self.map.read().unwrap().get(&(Name::from(fname), argtypes.clone())).cloned()
    }

    /// Insert unless present; returns whichever instance ends up cached.
    pub fn insert(&self, fname: &str, argtypes: Type, v: V) -> Arc<V> {
        let mut map = self.map.write().unwrap();
        map.entry((Name::from(fname), argtypes)).or_insert_with(|| Arc::new(v)).clone()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<((Name, Type), Arc<V>)> {
        self.map.read().unwrap().iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

#[cfg(test)]
mod tests;
