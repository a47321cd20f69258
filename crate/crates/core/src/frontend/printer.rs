//! Source printer. Operator calls are written in prefix form, so the output
//! reparses to the same tree without depending on precedence.

use std::fmt::Write;

use crate::dispatch::Span;
use crate::types::{Binder, TypeExpr};

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for item in &p.items {
        print_item(item, &mut out);
        out.push('\n');
    }
    out
}

fn is_operator_name(name: &str) -> bool {
    !name.starts_with(|c: char| c.is_alphabetic() || c == '_')
}

fn print_item(item: &Item, out: &mut String) {
    match item {
        Item::Type(td) => {
            match td.kind {
                DeclKind::Abstract => out.push_str("abstract "),
                DeclKind::Primitive => out.push_str("primitive "),
                DeclKind::Struct => out.push_str("type "),
            }
            out.push_str(&td.name);
            binders(&td.params, out);
            if let Some(s) = &td.supertype {
                out.push_str(" <: ");
                type_expr(s, out);
            }
            if td.kind == DeclKind::Struct {
                out.push('\n');
                for (f, ty) in &td.fields {
                    out.push_str("    ");
                    out.push_str(f);
                    if let Some(ty) = ty {
                        out.push_str("::");
                        type_expr(ty, out);
                    }
                    out.push('\n');
                }
                out.push_str("end");
            }
        }
        Item::Alias { name, params, body, .. } => {
            out.push_str("typealias ");
            out.push_str(name);
            if !params.is_empty() {
                let _ = write!(out, "{{{}}}", params.join(","));
            }
            out.push(' ');
            type_expr(body, out);
        }
        Item::Function(f) => function(f, out),
        Item::Include(path, _) => {
            out.push_str("include(");
            string_lit(path, out);
            out.push(')');
        }
        Item::Stmt(s) => stmt(s, 0, out),
    }
}

fn function(f: &FunctionDef, out: &mut String) {
    let head = |out: &mut String| {
        out.push_str(&f.name);
        binders(&f.static_params, out);
        out.push('(');
        for (i, p) in f.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            if let Some(n) = &p.name {
                out.push_str(n);
            }
            if let Some(t) = &p.ty {
                out.push_str("::");
                type_expr(t, out);
            }
            if p.vararg {
                out.push_str("...");
            }
        }
        out.push(')');
    };
    if f.short {
        if let [Stmt { kind: StmtKind::Expr(e), .. }] = f.body.as_slice() {
            head(out);
            out.push_str(" = ");
            expr(e, out);
            return;
        }
    }
    out.push_str("function ");
    if is_operator_name(&f.name) {
        out.push('(');
        out.push_str(&f.name);
        out.push(')');
        let mut rest = String::new();
        head(&mut rest);
        out.push_str(&rest[f.name.len()..]);
    } else {
        head(out);
    }
    out.push('\n');
    block(&f.body, 1, out);
    out.push_str("end");
}

fn binders(bs: &[Binder], out: &mut String) {
    if bs.is_empty() {
        return;
    }
    out.push('{');
    for (i, b) in bs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        binder(b, out);
    }
    out.push('}');
}

fn binder(b: &Binder, out: &mut String) {
    out.push_str(&b.name);
    if let Some(u) = &b.upper {
        out.push_str("<:");
        type_expr(u, out);
    } else if let Some(l) = &b.lower {
        out.push_str(">:");
        type_expr(l, out);
    }
}

pub fn type_expr(t: &TypeExpr, out: &mut String) {
    match t {
        TypeExpr::Apply(n, ps) => {
            out.push_str(n);
            if !ps.is_empty() {
                out.push('{');
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    type_expr(p, out);
                }
                out.push('}');
            }
        }
        TypeExpr::Union(ms) => {
            out.push_str("Union(");
            for (i, m) in ms.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                type_expr(m, out);
            }
            out.push(')');
        }
        TypeExpr::Tuple(fixed, vararg) => {
            out.push('(');
            for (i, m) in fixed.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                type_expr(m, out);
            }
            if let Some(v) = vararg {
                if !fixed.is_empty() {
                    out.push(',');
                }
                type_expr(v, out);
                out.push_str("...");
                if fixed.is_empty() {
                    out.push(',');
                }
            } else if fixed.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        TypeExpr::Int(i) => {
            let _ = write!(out, "{i}");
        }
        // not produced by the source parser
        TypeExpr::Where(body, _) => type_expr(body, out),
    }
}

fn curly(args: &[CurlyArg], out: &mut String) {
    out.push('{');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        match a {
            CurlyArg::Type(t) => type_expr(t, out),
            CurlyArg::Bound(b) => binder(b, out),
        }
    }
    out.push('}');
}

fn string_lit(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn args(list: &[Expr], out: &mut String) {
    out.push('(');
    for (i, a) in list.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(a, out);
    }
    out.push(')');
}

/// Write `e` so that postfix syntax can follow it.
fn operand(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Var(_) | ExprKind::Call(..) | ExprKind::Index(..) | ExprKind::Field(..) => expr(e, out),
        _ => {
            out.push('(');
            expr(e, out);
            out.push(')');
        }
    }
}

pub fn expr(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Int(i) => {
            let _ = write!(out, "{i}");
        }
        ExprKind::Float(f) => {
            let _ = write!(out, "{f:?}");
        }
        ExprKind::Str(s) => string_lit(s, out),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Nothing => out.push_str("nothing"),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Curly(n, c) => {
            out.push_str(n);
            curly(c, out);
        }
        ExprKind::Call(f, a) => {
            out.push_str(f);
            args(a, out);
        }
        ExprKind::CallCurly(f, c, a) => {
            out.push_str(f);
            curly(c, out);
            args(a, out);
        }
        ExprKind::Intrinsic(n, a) => {
            out.push('@');
            out.push_str(n);
            args(a, out);
        }
        ExprKind::Splat(inner) => {
            operand(inner, out);
            out.push_str("...");
        }
        ExprKind::And(a, b) | ExprKind::Or(a, b) => {
            out.push('(');
            expr(a, out);
            out.push_str(if matches!(e.kind, ExprKind::And(..)) { " && " } else { " || " });
            expr(b, out);
            out.push(')');
        }
        ExprKind::Ternary(c, a, b) => {
            out.push('(');
            expr(c, out);
            out.push_str(" ? (");
            expr(a, out);
            out.push_str(") : (");
            expr(b, out);
            out.push_str("))");
        }
        ExprKind::Index(base, idx) => {
            operand(base, out);
            out.push('[');
            for (i, a) in idx.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(a, out);
            }
            out.push(']');
        }
        ExprKind::End => out.push_str("end"),
        ExprKind::Colon => out.push(':'),
        ExprKind::Field(base, f) => {
            operand(base, out);
            out.push('.');
            out.push_str(f);
        }
        ExprKind::Assert(inner, t) => {
            operand(inner, out);
            out.push_str("::");
            type_expr(t, out);
        }
        ExprKind::AnonParam(t) => {
            out.push_str("::");
            type_expr(t, out);
        }
        ExprKind::Tuple(items) => {
            out.push('(');
            for (i, a) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(a, out);
            }
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        ExprKind::Vect(items) => {
            out.push('[');
            for (i, a) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(a, out);
            }
            out.push(']');
        }
        ExprKind::Matrix(rows) => {
            out.push('[');
            for (r, row) in rows.iter().enumerate() {
                if r > 0 {
                    out.push_str("; ");
                }
                for (i, a) in row.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    out.push('(');
                    expr(a, out);
                    out.push(')');
                }
            }
            out.push(']');
        }
        ExprKind::Return(v) => {
            out.push_str("(return");
            if let Some(v) = v {
                out.push(' ');
                expr(v, out);
            }
            out.push(')');
        }
        ExprKind::Break => out.push_str("break"),
        ExprKind::Continue => out.push_str("continue"),
    }
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn block(stmts: &[Stmt], level: usize, out: &mut String) {
    for s in stmts {
        indent(level, out);
        stmt(s, level, out);
        out.push('\n');
    }
}

fn stmt(s: &Stmt, level: usize, out: &mut String) {
    match &s.kind {
        StmtKind::Expr(e) => expr(e, out),
        StmtKind::Assign(l, r) => {
            expr(l, out);
            out.push_str(" = ");
            expr(r, out);
        }
        StmtKind::DeclAssign(n, t, r) => {
            out.push_str(n);
            out.push_str("::");
            type_expr(t, out);
            out.push_str(" = ");
            expr(r, out);
        }
        StmtKind::OpAssign(l, op, r) => {
            expr(l, out);
            let _ = write!(out, " {op}= ");
            expr(r, out);
        }
        StmtKind::If(arms, otherwise) => {
            for (i, (c, body)) in arms.iter().enumerate() {
                if i > 0 {
                    indent(level, out);
                    out.push_str("elseif ");
                } else {
                    out.push_str("if ");
                }
                expr(c, out);
                out.push('\n');
                block(body, level + 1, out);
            }
            if let Some(body) = otherwise {
                indent(level, out);
                out.push_str("else\n");
                block(body, level + 1, out);
            }
            indent(level, out);
            out.push_str("end");
        }
        StmtKind::While(c, body) => {
            out.push_str("while ");
            expr(c, out);
            out.push('\n');
            block(body, level + 1, out);
            indent(level, out);
            out.push_str("end");
        }
        StmtKind::For(specs, body) => {
            out.push_str("for ");
            for (i, (v, it)) in specs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(v);
                out.push_str(" = ");
                expr(it, out);
            }
            out.push('\n');
            block(body, level + 1, out);
            indent(level, out);
            out.push_str("end");
        }
        StmtKind::Try(body, handler) => {
            out.push_str("try\n");
            block(body, level + 1, out);
            if let Some((var, h)) = handler {
                indent(level, out);
                out.push_str("catch");
                if let Some(v) = var {
                    out.push(' ');
                    out.push_str(v);
                }
                out.push('\n');
                block(h, level + 1, out);
            }
            indent(level, out);
            out.push_str("end");
        }
    }
}

/// Zero every position in a program, for comparing trees structurally.
pub fn strip_spans(p: &Program) -> Program {
    let mut p = p.clone();
    for item in &mut p.items {
        match item {
            Item::Type(td) => td.span = Span::default(),
            Item::Alias { span, .. } | Item::Include(_, span) => *span = Span::default(),
            Item::Function(f) => {
                f.span = Span::default();
                f.body.iter_mut().for_each(strip_stmt);
            }
            Item::Stmt(s) => strip_stmt(s),
        }
    }
    p
}

fn strip_stmt(s: &mut Stmt) {
    s.span = Span::default();
    match &mut s.kind {
        StmtKind::Expr(e) => strip_expr(e),
        StmtKind::Assign(a, b) | StmtKind::OpAssign(a, _, b) => {
            strip_expr(a);
            strip_expr(b);
        }
        StmtKind::DeclAssign(_, _, e) => strip_expr(e),
        StmtKind::If(arms, otherwise) => {
            for (c, body) in arms {
                strip_expr(c);
                body.iter_mut().for_each(strip_stmt);
            }
            if let Some(b) = otherwise {
                b.iter_mut().for_each(strip_stmt);
            }
        }
        StmtKind::While(c, body) => {
            strip_expr(c);
            body.iter_mut().for_each(strip_stmt);
        }
        StmtKind::For(specs, body) => {
            specs.iter_mut().for_each(|(_, e)| strip_expr(e));
            body.iter_mut().for_each(strip_stmt);
        }
        StmtKind::Try(body, handler) => {
            body.iter_mut().for_each(strip_stmt);
            if let Some((_, h)) = handler {
                h.iter_mut().for_each(strip_stmt);
            }
        }
    }
}

fn strip_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Call(_, a) | ExprKind::CallCurly(_, _, a) | ExprKind::Intrinsic(_, a) => {
            a.iter_mut().for_each(strip_expr)
        }
        ExprKind::Tuple(a) | ExprKind::Vect(a) => a.iter_mut().for_each(strip_expr),
        ExprKind::Matrix(rows) => rows.iter_mut().flatten().for_each(strip_expr),
        ExprKind::Splat(x) | ExprKind::Field(x, _) | ExprKind::Assert(x, _) => strip_expr(x),
        ExprKind::And(a, b) | ExprKind::Or(a, b) => {
            strip_expr(a);
            strip_expr(b);
        }
        ExprKind::Ternary(a, b, c) => {
            strip_expr(a);
            strip_expr(b);
            strip_expr(c);
        }
        ExprKind::Index(b, idx) => {
            strip_expr(b);
            idx.iter_mut().for_each(strip_expr);
        }
        ExprKind::Return(Some(v)) => strip_expr(v),
        _ => {}
    }
}
