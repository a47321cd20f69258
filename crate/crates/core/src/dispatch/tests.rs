use super::*;
use crate::types::{Kind, TypeVar};

fn registry() -> Registry {
    let mut r = Registry::new();
    let decl = |r: &mut Registry, name: &str, kind: Kind, sup: &str| {
        let sup = if sup.is_empty() { Type::Top } else { r.parse_type(sup).unwrap() };
        r.declare(name, kind, vec![], sup, None).unwrap();
    };
    decl(&mut r, "Number", Kind::Abstract, "");
    decl(&mut r, "Real", Kind::Abstract, "Number");
    decl(&mut r, "Int64", Kind::Tag, "Real");
    decl(&mut r, "Float64", Kind::Tag, "Real");
    decl(&mut r, "String", Kind::Tag, "");
    r.declare("Type", Kind::Tag, vec![TypeVar::unbounded("T")], Type::Top, None).unwrap();
    r
}

fn add(t: &mut MethodTable, r: &Registry, f: &str, sig: &str) -> AddOutcome {
    let sig = crate::types::parse_type_expr(sig).unwrap();
    let sig = r.resolve(&sig, &[]).unwrap();
    t.add_method(r, f, sig, vec![], 0, Span::default()).unwrap()
}

fn ty(r: &Registry, s: &str) -> Type {
    r.parse_type(s).unwrap()
}

#[test]
fn specificity_examples() {
    let r = registry();
    assert_eq!(specificity(&r, &ty(&r, "(Float64,)"), &ty(&r, "(Number,)")), Specificity::More);
    assert_eq!(specificity(&r, &ty(&r, "(Number,)"), &ty(&r, "(Float64,)")), Specificity::Less);
    assert_eq!(specificity(&r, &ty(&r, "(Int64,Any)"), &ty(&r, "(Int64,Any)")), Specificity::Equal);
    assert_eq!(specificity(&r, &ty(&r, "(Int64,Any)"), &ty(&r, "(Any,Int64)")), Specificity::Incomparable);
    assert_eq!(specificity(&r, &ty(&r, "(Int64,Any)"), &ty(&r, "(Any,Int64...)")), Specificity::More);
    let convert_id = ty(&r, "(Type{T},T) where T");
    assert_eq!(specificity(&r, &ty(&r, "(Type{Float64},Float64)"), &convert_id), Specificity::More);
}

#[test]
fn ordering_and_dispatch() {
    let r = registry();
    let mut t = MethodTable::new();
    let generic = add(&mut t, &r, "*", "(Number,Number)");
    let float = add(&mut t, &r, "*", "(Float64,Float64)");
    assert!(float.ambiguous_with.is_empty());
    assert_eq!(t.methods_of("*"), &[float.id, generic.id]);
    let got = t.dispatch(&r, "*", &ty(&r, "(Int64,Float64)")).unwrap();
    assert_eq!(got.method, generic.id);
    let got = t.dispatch(&r, "*", &ty(&r, "(Float64,Float64)")).unwrap();
    assert_eq!(got.method, float.id);
    assert!(matches!(t.dispatch(&r, "*", &ty(&r, "(String,Float64)")), Err(DispatchError::NoMethod { .. })));
    assert!(matches!(t.dispatch(&r, "nope", &ty(&r, "()")), Err(DispatchError::NoMethod { .. })));
}

#[test]
fn ambiguity_is_reported_and_raised() {
    let r = registry();
    let mut t = MethodTable::new();
    let a = add(&mut t, &r, "f", "(Int64,Any)");
    let b = add(&mut t, &r, "f", "(Any,Int64)");
    assert_eq!(b.ambiguous_with, vec![a.id]);
    match t.dispatch(&r, "f", &ty(&r, "(Int64,Int64)")) {
        Err(DispatchError::Ambiguous { candidates, .. }) => assert_eq!(candidates.len(), 2),
        other => panic!("expected ambiguity, got {other:?}"),
    }
    assert_eq!(t.dispatch(&r, "f", &ty(&r, "(Int64,String)")).unwrap().method, a.id);
}

#[test]
fn redefinition_replaces() {
    let r = registry();
    let mut t = MethodTable::new();
    let first = add(&mut t, &r, "g", "(Int64,)");
    let second = add(&mut t, &r, "g", "(Int64,)");
    assert_eq!(second.replaced, Some(first.id));
    assert_eq!(t.methods_of("g"), &[second.id]);
    assert_eq!(t.warnings().len(), 1);
}

#[test]
fn dispatch_is_insertion_order_independent() {
    let r = registry();
    let sigs = ["(Number,Number)", "(Float64,Float64)", "(Real,Float64)", "(Int64,Number)", "(Any,Any)"];
    let probes = ["(Int64,Float64)", "(Float64,Float64)", "(Float64,Int64)", "(String,Int64)", "(Int64,Int64)"];
    let mut reference: Option<Vec<String>> = None;
    // a few rotations of the insertion order
    for rot in 0..sigs.len() {
        let mut t = MethodTable::new();
        for i in 0..sigs.len() {
            add(&mut t, &r, "h", sigs[(i + rot) % sigs.len()]);
        }
        let got: Vec<String> = probes
            .iter()
            .map(|p| match t.dispatch(&r, "h", &ty(&r, p)) {
                Ok(res) => r.show(&t.method(res.method).sig),
                Err(e) => format!("{e}"),
            })
            .collect();
        match &reference {
            None => reference = Some(got),
            Some(want) => assert_eq!(&got, want),
        }
    }
}

#[test]
fn static_parameter_witnesses() {
    let r = registry();
    let mut t = MethodTable::new();
    let sig = r.resolve(&crate::types::parse_type_expr("(Type{T},T) where T").unwrap(), &[]).unwrap();
    let id = t.add_method(&r, "convert", sig, vec!["T".into()], 0, Span::default()).unwrap().id;
    let res = t.dispatch(&r, "convert", &ty(&r, "(Type{Int64},Int64)")).unwrap();
    assert_eq!(res.method, id);
    assert_eq!(&*res.witnesses, &[ty(&r, "Int64")]);
}

#[test]
fn matching_methods_prunes_shadowed() {
    let r = registry();
    let mut t = MethodTable::new();
    let f = add(&mut t, &r, "k", "(Float64,)");
    let n = add(&mut t, &r, "k", "(Number,)");
    let _a = add(&mut t, &r, "k", "(Any,)");
    assert_eq!(t.matching_methods(&r, "k", &ty(&r, "(Union(Int64,Float64),)")), vec![f.id, n.id]);
    assert_eq!(t.matching_methods(&r, "k", &ty(&r, "(Float64,)")), vec![f.id]);
    assert!(t.matching_methods(&r, "missing", &ty(&r, "(Float64,)")).is_empty());
}

#[test]
fn spec_cache_memoizes() {
    let cache: SpecCache<u32> = SpecCache::default();
    let key = Type::tuple(vec![]);
    assert!(cache.get("f", &key).is_none());
    let a = cache.insert("f", key.clone(), 1);
    let b = cache.insert("f", key.clone(), 2);
    assert!(Arc::ptr_eq(&a, &b));
    assert_eq!(*cache.get("f", &key).unwrap(), 1);
}
