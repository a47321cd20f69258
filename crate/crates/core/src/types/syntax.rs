//! Textual type syntax: a small parser producing [`TypeExpr`], resolution of
//! expressions against a registry, and the canonical printer.
//!
//! ```text
//! Int64   Array{Float64,2}   Union(Int64,Float64)   ()  (A,)  (A,B...)
//! Array{T,1} where T<:Real    Vector                 Any   Bottom
//! ```

use std::fmt;

use super::registry::Registry;
use super::term::{Name, Type, TypeVar};
use super::TypeError;

#[derive(Clone, Debug, PartialEq)]
pub enum TypeExpr {
    /// A name with optional `{...}` parameters.
    Apply(String, Vec<TypeExpr>),
    Union(Vec<TypeExpr>),
    Tuple(Vec<TypeExpr>, Option<Box<TypeExpr>>),
    Int(i64),
    Where(Box<TypeExpr>, Binder),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binder {
    pub name: String,
    pub lower: Option<Box<TypeExpr>>,
    pub upper: Option<Box<TypeExpr>>,
}

impl Binder {
    pub fn plain(name: impl Into<String>) -> Self {
        Binder { name: name.into(), lower: None, upper: None }
    }
}

impl TypeExpr {
    pub fn name(n: &str) -> Self {
        TypeExpr::Apply(n.to_string(), Vec::new())
    }
}

impl Registry {
    /// Resolve an expression; `scope` lists type variables visible to it,
    /// innermost last.
    pub fn resolve(&self, e: &TypeExpr, scope: &[TypeVar]) -> Result<Type, TypeError> {
        match e {
            TypeExpr::Int(i) => Ok(Type::Int(*i)),
            TypeExpr::Union(ms) => {
                Ok(Type::Union(ms.iter().map(|m| self.resolve(m, scope)).collect::<Result<_, _>>()?))
            }
            TypeExpr::Tuple(fixed, vararg) => {
                let fixed = fixed.iter().map(|m| self.resolve(m, scope)).collect::<Result<Vec<_>, _>>()?;
                Ok(match vararg {
                    Some(v) => Type::vararg_tuple(fixed, self.resolve(v, scope)?),
                    None => Type::tuple(fixed),
                })
            }
            TypeExpr::Where(body, b) => {
                let lower = b.lower.as_deref().map(|l| self.resolve(l, scope)).transpose()?.unwrap_or(Type::Bottom);
                let upper = b.upper.as_deref().map(|u| self.resolve(u, scope)).transpose()?.unwrap_or(Type::Top);
                let var = TypeVar::new(b.name.as_str(), lower, upper);
                let mut inner = scope.to_vec();
                inner.push(var.clone());
                let body = self.resolve(body, &inner)?;
                Ok(Type::exists(var, body))
            }
            TypeExpr::Apply(name, params) => {
                if params.is_empty() {
                    if let Some(v) = scope.iter().rev().find(|v| &*v.name == name) {
                        return Ok(v.occurrence());
                    }
                    match name.as_str() {
                        "Any" | "⊤" => return Ok(Type::Top),
                        "Bottom" | "⊥" => return Ok(Type::Bottom),
                        _ => {}
                    }
                }
                let params = params.iter().map(|p| self.resolve(p, scope)).collect::<Result<Vec<_>, _>>()?;
                if self.alias(name).is_some() {
                    return self.expand_alias(name, params);
                }
                let d = self.decl(name).ok_or_else(|| TypeError::MissingDecl(name.clone()))?;
                if params.len() == d.arity() {
                    self.instantiate(name, params)
                } else {
                    self.partial(name, params)
                }
            }
        }
    }

    /// Parse and resolve a closed type, returning its canonical form.
    pub fn parse_type(&self, src: &str) -> Result<Type, TypeError> {
        let e = parse_type_expr(src)?;
        let t = self.resolve(&e, &[])?;
        self.check(&t)?;
        Ok(self.canonical(&t))
    }

    /// Print a type. Canonical inputs print in canonical syntax, which
    /// [`Registry::parse_type`] reads back.
    pub fn show(&self, t: &Type) -> String {
        let mut s = String::new();
        self.write_type(t, &mut s);
        s
    }

    fn write_type(&self, t: &Type, out: &mut String) {
        match t {
            Type::Exists(..) => {
                if let Some(name) = self.bare_name(t) {
                    out.push_str(name);
                    return;
                }
                let mut binders = Vec::new();
                let mut body = t;
                while let Type::Exists(v, b) = body {
                    binders.push(&**v);
                    body = b;
                }
                self.write_type(body, out);
                for v in binders.iter().rev() {
                    out.push_str(" where ");
                    if !v.lower.is_bottom() {
                        self.write_bound(&v.lower, out);
                        out.push_str("<:");
                    }
                    out.push_str(&v.name);
                    if !v.upper.is_top() {
                        out.push_str("<:");
                        self.write_bound(&v.upper, out);
                    }
                }
            }
            Type::Top => out.push_str("Any"),
            Type::Bottom => out.push_str("Bottom"),
            Type::Int(i) => out.push_str(&i.to_string()),
            Type::Var(v) => out.push_str(&v.name),
            Type::Nominal(n) => {
                out.push_str(&n.name);
                if !n.params.is_empty() {
                    out.push('{');
                    for (i, p) in n.params.iter().enumerate() {
                        if i > 0 {
                            out.push(',');
                        }
                        self.write_type(p, out);
                    }
                    out.push('}');
                }
            }
            Type::Union(ms) => {
                out.push_str("Union(");
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.write_type(m, out);
                }
                out.push(')');
            }
            Type::Tuple(tt) => {
                out.push('(');
                for (i, m) in tt.fixed.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.write_type(m, out);
                }
                match &tt.vararg {
                    Some(v) => {
                        if !tt.fixed.is_empty() {
                            out.push(',');
                        }
                        self.write_bound(v, out);
                        out.push_str("...");
                        if tt.fixed.is_empty() {
                            out.push(',');
                        }
                    }
                    None if tt.fixed.len() == 1 => out.push(','),
                    None => {}
                }
                out.push(')');
            }
        }
    }

    /// Bounds and vararg elements: parenthesize `where` forms.
    fn write_bound(&self, t: &Type, out: &mut String) {
        if matches!(t, Type::Exists(..)) && self.bare_name(t).is_none() {
            out.push('(');
            self.write_type(t, out);
            out.push(')');
        } else {
            self.write_type(t, out);
        }
    }

    /// `S{T1..Tk} where Tk ... where T1` with the declared bounds prints as `S`.
    fn bare_name<'a>(&self, t: &'a Type) -> Option<&'a str> {
        let binders = t.binders();
        let Type::Nominal(n) = t.unwrap_exists() else { return None };
        let d = self.decl(&n.name)?;
        if d.arity() != binders.len() || n.params.len() != binders.len() {
            return None;
        }
        let mut subst: Vec<(Name, Type)> = Vec::new();
        for ((p, b), dp) in n.params.iter().zip(&binders).zip(&d.params) {
            match p {
                Type::Var(v) if v.name == b.name => {}
                _ => return None,
            }
            if *b.lower != dp.lower.subst_all(&subst) || *b.upper != dp.upper.subst_all(&subst) {
                return None;
            }
            subst.push((dp.name.clone(), b.occurrence()));
        }
        Some(&n.name)
    }
}

/// Registry-free rendering; existentials always use the `where` form.
impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Registry::new().show(self))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, TypeError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|(_, d)| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
            let v = text.parse().map_err(|_| TypeError::Syntax { pos, msg: format!("bad integer {text}") })?;
            out.push((pos, Tok::Int(v)));
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '⊤' || c == '⊥' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_' || chars[i].1 == '!') {
                i += 1;
            }
            let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
            out.push((pos, Tok::Ident(text)));
            continue;
        }
        let rest: String = chars[i..].iter().take(3).map(|(_, c)| c).collect();
        let sym = ["...", "<:", ">:", "{", "}", "(", ")", ","]
            .into_iter()
            .find(|s| rest.starts_with(s))
            .ok_or_else(|| TypeError::Syntax { pos, msg: format!("unexpected character `{c}`") })?;
        out.push((pos, Tok::Sym(sym)));
        i += sym.chars().count();
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, TypeError> {
        Err(TypeError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn eat(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), TypeError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ty(&mut self) -> Result<TypeExpr, TypeError> {
        let mut t = self.primary()?;
        while matches!(self.peek(), Some(Tok::Ident(w)) if w == "where") {
            self.at += 1;
            let b = self.binder()?;
            t = TypeExpr::Where(Box::new(t), b);
        }
        Ok(t)
    }

    fn binder(&mut self) -> Result<Binder, TypeError> {
        let first = self.primary()?;
        let as_name = |e: &TypeExpr| match e {
            TypeExpr::Apply(n, ps) if ps.is_empty() => Some(n.clone()),
            _ => None,
        };
        if self.eat("<:") {
            let second = self.primary()?;
            if self.eat("<:") {
                let upper = self.primary()?;
                let name = as_name(&second).map_or_else(|| self.err("expected a variable name"), Ok)?;
                return Ok(Binder { name, lower: Some(Box::new(first)), upper: Some(Box::new(upper)) });
            }
            let name = as_name(&first).map_or_else(|| self.err("expected a variable name"), Ok)?;
            return Ok(Binder { name, lower: None, upper: Some(Box::new(second)) });
        }
        let name = as_name(&first).map_or_else(|| self.err("expected a variable name"), Ok)?;
        if self.eat(">:") {
            let lower = self.primary()?;
            return Ok(Binder { name, lower: Some(Box::new(lower)), upper: None });
        }
        Ok(Binder::plain(name))
    }

    fn list(&mut self, close: &str) -> Result<Vec<TypeExpr>, TypeError> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.ty()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn primary(&mut self) -> Result<TypeExpr, TypeError> {
        match self.peek().cloned() {
            Some(Tok::Int(i)) => {
                self.at += 1;
                Ok(TypeExpr::Int(i))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                if name == "Union" {
                    if self.eat("(") {
                        return Ok(TypeExpr::Union(self.list(")")?));
                    }
                    if self.eat("{") {
                        return Ok(TypeExpr::Union(self.list("}")?));
                    }
                }
                if self.eat("{") {
                    let params = self.list("}")?;
                    return Ok(TypeExpr::Apply(name, params));
                }
                Ok(TypeExpr::Apply(name, Vec::new()))
            }
            Some(Tok::Sym("(")) => {
                self.at += 1;
                let mut fixed = Vec::new();
                let mut trailing_comma = false;
                loop {
                    if self.eat(")") {
                        break;
                    }
                    let e = self.ty()?;
                    if self.eat("...") {
                        self.eat(",");
                        self.expect(")")?;
                        return Ok(TypeExpr::Tuple(fixed, Some(Box::new(e))));
                    }
                    fixed.push(e);
                    if self.eat(")") {
                        trailing_comma = false;
                        break;
                    }
                    self.expect(",")?;
                    trailing_comma = true;
                }
                if fixed.len() == 1 && !trailing_comma {
                    return Ok(fixed.pop().unwrap());
                }
                Ok(TypeExpr::Tuple(fixed, None))
            }
            _ => self.err("expected a type"),
        }
    }
}

/// Parse type syntax into an unresolved expression.
pub fn parse_type_expr(src: &str) -> Result<TypeExpr, TypeError> {
    let mut p = Parser { toks: lex(src)?, at: 0, end: src.len() };
    let t = p.ty()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(t)
}
