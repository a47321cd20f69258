//! Subtyping, joins and instance counting on a small hand-built hierarchy.

use mdl::types::{Kind, Registry, Type, TypeVar};

fn main() {
    let mut reg = Registry::new();
    reg.declare("Nat", Kind::Abstract, vec![], Type::Top, None).unwrap();
    let nat = reg.parse_type("Nat").unwrap();
    for name in ["One", "Two"] {
        reg.declare(name, Kind::Tag, vec![], nat.clone(), None).unwrap();
    }
    reg.declare("S", Kind::Tag, vec![TypeVar::unbounded("T")], Type::Top, None).unwrap();

    let t = |s: &str| reg.parse_type(s).unwrap();
    for (a, b) in [("One", "Nat"), ("S{One}", "S{Nat}"), ("S{One}", "S"), ("(One,Two)", "(Nat,Nat)")] {
        println!("{a} <: {b}  = {}", reg.subtype(&t(a), &t(b)));
    }
    println!("join(One, Two)       = {}", reg.show(&reg.join(&t("One"), &t("Two"))));
    println!("join(One, Nat)       = {}", reg.show(&reg.join(&t("One"), &t("Nat"))));
    println!("meet(Nat, Union(One,S{{Nat}})) = {}", reg.show(&reg.meet(&t("Nat"), &t("Union(One,S{Nat})"))));
    println!("instances of S       = {}", reg.count_instances(&t("S")).unwrap());
    println!("S{{Any}} is a leaf     = {}", reg.is_leaf(&t("S{Any}")));
    println!("S is a leaf          = {}", reg.is_leaf(&t("S")));
}
