use super::*;

fn abs(reg: &mut Registry, name: &str, sup: &str) {
    let sup = if sup.is_empty() { Type::Top } else { reg.parse_type(sup).unwrap() };
    reg.declare(name, Kind::Abstract, vec![], sup, None).unwrap();
}

fn tag(reg: &mut Registry, name: &str, sup: &str) {
    let sup = if sup.is_empty() { Type::Top } else { reg.parse_type(sup).unwrap() };
    reg.declare(name, Kind::Tag, vec![], sup, None).unwrap();
}

fn numbers() -> Registry {
    let mut r = Registry::new();
    abs(&mut r, "Number", "");
    abs(&mut r, "Real", "Number");
    abs(&mut r, "Integer", "Real");
    abs(&mut r, "Signed", "Integer");
    tag(&mut r, "Int64", "Signed");
    abs(&mut r, "AbstractFloat", "Real");
    tag(&mut r, "Float64", "AbstractFloat");
    tag(&mut r, "Bool", "Integer");
    tag(&mut r, "String", "");
    r.declare("Range", Kind::Abstract, vec![TypeVar::unbounded("T")], Type::Top, None).unwrap();
    let t = TypeVar::unbounded("T");
    let sup = Type::abstract_("Range", vec![t.occurrence()]);
    r.declare("UnitRange", Kind::Tag, vec![t], sup, None).unwrap();
    let t = TypeVar::unbounded("T");
    let n = TypeVar::unbounded("N");
    r.declare("AbstractArray", Kind::Abstract, vec![t.clone(), n.clone()], Type::Top, None).unwrap();
    let sup = Type::abstract_("AbstractArray", vec![t.occurrence(), n.occurrence()]);
    r.declare("Array", Kind::Tag, vec![t, n], sup, None).unwrap();
    let t = TypeVar::unbounded("T");
    r.declare("Type", Kind::Tag, vec![t], Type::Top, None).unwrap();
    let t = TypeVar::new("T", Type::Bottom, r.parse_type("Integer").unwrap());
    let sup = r.parse_type("Real").unwrap();
    r.declare("Rational", Kind::Tag, vec![t], sup, None).unwrap();
    r
}

fn fig2() -> Registry {
    let mut r = Registry::new();
    abs(&mut r, "Nat", "");
    tag(&mut r, "One", "Nat");
    tag(&mut r, "Two", "Nat");
    r.declare("S", Kind::Tag, vec![TypeVar::unbounded("T")], Type::Top, None).unwrap();
    r
}

fn sub(r: &Registry, a: &str, b: &str) -> bool {
    r.subtype(&r.parse_type(a).unwrap(), &r.parse_type(b).unwrap())
}

#[test]
fn nominal_and_invariance() {
    let r = numbers();
    assert!(sub(&r, "Float64", "Real"));
    assert!(!sub(&r, "Real", "Float64"));
    assert!(sub(&r, "Array{Float64,2}", "AbstractArray{Float64,2}"));
    assert!(!sub(&r, "Array{Float64,2}", "Array{Real,2}"));
    let f = fig2();
    assert!(!sub(&f, "S{One}", "S{Nat}"));
    assert!(sub(&f, "S{One}", "S"));
}

#[test]
fn tuples_and_varargs() {
    let r = numbers();
    assert!(sub(&r, "(Int64,Int64)", "(Union(Int64,Range{Int64},UnitRange{Int64})...,)"));
    assert!(sub(&r, "()", "(Int64...,)"));
    assert!(sub(&r, "(Int64,Float64)", "(Number,Number...)"));
    assert!(!sub(&r, "(Int64,String)", "(Number...,)"));
    assert!(sub(&r, "(Int64...,)", "(Number...,)"));
    assert!(!sub(&r, "(Int64...,)", "(Int64,Int64...)"));
    assert!(sub(&r, "(Union(Int64,Float64),)", "Union((Int64,),(Float64,))"));
}

#[test]
fn existentials() {
    let r = numbers();
    assert!(sub(&r, "Array{Float64,2}", "Array{T,2} where T<:Real"));
    assert!(!sub(&r, "Array{String,2}", "Array{T,2} where T<:Real"));
    assert!(sub(&r, "Array{Float64,2}", "AbstractArray"));
    assert!(sub(&r, "(Int64,Int64)", "(T,T) where T"));
    assert!(!sub(&r, "(Int64,Float64)", "(T,T) where T"));
    assert!(sub(&r, "(Int64,Float64)", "(T,T) where T<:Real") == false);
    assert!(sub(&r, "(Array{Int64,1},Int64)", "(Array{T,1},T) where T"));
    assert!(!sub(&r, "(Array{Int64,1},Float64)", "(Array{T,1},T) where T"));
    assert!(sub(&r, "(Array{Real,1},Float64)", "(Array{T,1},T) where T"));
    assert!(sub(&r, "Type{Int64}", "Type{T} where T<:Number"));
    assert!(sub(&r, "Array{Int64,1} where T", "Array{Int64,1}"));
    assert!(sub(&r, "Array{T,1} where T<:Int64", "Array{T,1} where T<:Integer"));
    assert!(!sub(&r, "Array{T,1} where T<:Integer", "Array{T,1} where T<:Int64"));
    assert!(sub(&r, "Array{Array{Int64,1},1}", "Array{Array{T,1},1} where T"));
    assert!(!sub(&r, "Array{Array{Int64,1},1}", "Array{Array{T,1} where T,1}"));
    assert!(sub(&r, "Array{Array{T,1} where T,1}", "Array{Array{T,1} where T,1}"));
}

#[test]
fn witnesses() {
    let r = numbers();
    let sig = r.parse_type("(Array{T,N},) where N where T<:Number").unwrap();
    let args = r.parse_type("(Array{Float64,2},)").unwrap();
    let w = r.match_signature(&args, &sig).unwrap();
    assert_eq!(w, vec![r.parse_type("Float64").unwrap(), Type::Int(2)]);
    let sig = r.parse_type("(Type{T},T) where T").unwrap();
    let w = r.match_signature(&r.parse_type("(Type{Int64},Int64)").unwrap(), &sig).unwrap();
    assert_eq!(w, vec![r.parse_type("Int64").unwrap()]);
    assert!(r.match_signature(&r.parse_type("(Type{Int64},Float64)").unwrap(), &sig).is_none());
}

#[test]
fn meet_join_examples() {
    let r = numbers();
    let t = |s: &str| r.parse_type(s).unwrap();
    assert_eq!(r.meet(&t("Int64"), &t("Float64")), Type::Bottom);
    assert_eq!(r.meet(&t("Real"), &t("Int64")), t("Int64"));
    assert_eq!(r.meet(&t("Union(Int64,Float64)"), &t("Int64")), t("Int64"));
    assert_eq!(r.meet(&t("Rational"), &Type::Top), t("Rational"));
    let j = r.join(&t("Int64"), &t("Float64"));
    assert_eq!(r.show(&j), "Union(Int64,Float64)");
    assert_eq!(r.join(&Type::Bottom, &t("Int64")), t("Int64"));
    assert_eq!(r.join(&t("Int64"), &t("Int64")), t("Int64"));
    assert_eq!(r.join(&t("Int64"), &t("Real")), t("Real"));
}

#[test]
fn printing_round_trips() {
    let r = numbers();
    for s in [
        "Any",
        "Bottom",
        "Union(Int64,Float64)",
        "()",
        "(Int64,)",
        "(Int64,Float64...)",
        "(Int64...,)",
        "Array{Float64,2}",
        "Array",
        "Rational",
        "Array{T,2} where T<:Real",
        "Array{Array{T,1} where T,1}",
        "(T,T) where T",
        "Type{Int64}",
    ] {
        let t = r.parse_type(s).unwrap();
        assert_eq!(r.show(&t), s, "printing {s}");
        assert_eq!(r.parse_type(&r.show(&t)).unwrap(), t);
    }
    assert_eq!(r.show(&r.parse_type("Union(Float64,Int64,Int64)").unwrap()), "Union(Int64,Float64)");
    assert_eq!(r.show(&r.parse_type("Union(Float64,Real)").unwrap()), "Real");
    assert_eq!(r.show(&r.parse_type("Array{S,2} where S<:Real").unwrap()), "Array{T,2} where T<:Real");
    assert_eq!(r.show(&r.parse_type("(X,) where X<:Real").unwrap()), "(Real,)");
}

#[test]
fn leaves() {
    let f = fig2();
    let t = |s: &str| f.parse_type(s).unwrap();
    assert!(f.is_leaf(&t("S{Any}")));
    assert!(!f.is_leaf(&t("S")));
    assert!(f.is_leaf(&t("(One,S{Nat})")));
    assert!(!f.is_leaf(&t("Union(One,Two)")));
    assert!(!f.is_leaf(&t("Nat")));
}

#[test]
fn instance_counting() {
    let f = fig2();
    assert_eq!(f.count_instances(&f.parse_type("S").unwrap()).unwrap(), 5);
    let mut empty = Registry::new();
    empty.declare("S", Kind::Tag, vec![TypeVar::unbounded("T")], Type::Top, None).unwrap();
    assert_eq!(empty.count_instances(&empty.parse_type("S").unwrap()).unwrap(), 2);
    let mut zero = Registry::new();
    zero.declare("Z", Kind::Tag, vec![], Type::Top, None).unwrap();
    assert_eq!(zero.count_instances(&zero.parse_type("Z").unwrap()).unwrap(), 1);
    assert!(matches!(numbers().count_instances(&numbers().parse_type("Rational").unwrap()), Err(TypeError::Unsupported(_))));
}

#[test]
fn errors() {
    let r = numbers();
    assert!(matches!(r.parse_type("Foo"), Err(TypeError::MissingDecl(_))));
    assert!(matches!(r.parse_type("Float64{Int64}"), Err(TypeError::Arity { .. })));
    assert!(matches!(r.parse_type("Array{"), Err(TypeError::Syntax { .. })));
    let bad = Type::tag("Nope", vec![]);
    assert!(r.try_subtype(&bad, &Type::Top).is_err());
    let mut r2 = numbers();
    assert!(matches!(
        r2.declare("X", Kind::Tag, vec![], r2.parse_type("Int64").unwrap(), None),
        Err(TypeError::BadSupertype { .. })
    ));
}
