use crate::dispatch::Span;
use crate::types::{Binder, TypeExpr};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::SyntaxError;

type PResult<T> = Result<T, SyntaxError>;

const KEYWORDS: &[&str] = &[
    "function", "end", "type", "immutable", "abstract", "typealias", "primitive", "if", "elseif", "else", "while",
    "for", "in", "return", "try", "catch", "true", "false", "nothing", "break", "continue", "const",
];

/// Operators that can be used as function names, `+(a, b)`.
const CALLABLE_OPS: &[&str] =
    &["+", "-", "*", "/", "^", "%", "//", "==", "!=", "<", "<=", ">", ">=", "!", ":", "<:", "÷", "≠", "≤", "≥"];

fn normalize_op(op: &str) -> &str {
    match op {
        "≠" => "!=",
        "≤" => "<=",
        "≥" => ">=",
        "÷" => "div",
        other => other,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    /// Inside `( )` or an argument list: newlines are insignificant.
    Paren,
    /// Inside `A[ ]`: `end` and bare `:` are allowed.
    Index,
    /// Inside an array literal: spaces separate entries.
    Matrix,
}

pub struct Parser {
    toks: Vec<Token>,
    at: usize,
    ctx: Vec<Ctx>,
    /// Disables `a:b` while parsing the middle of a ternary.
    no_range: bool,
}

pub fn parse_program(src: &str) -> PResult<Program> {
    let mut p = Parser { toks: lex(src)?, at: 0, ctx: Vec::new(), no_range: false };
    let mut items = Vec::new();
    loop {
        p.skip_terminators();
        if p.at_eof() {
            break;
        }
        items.push(p.item()?);
        p.end_of_statement()?;
    }
    Ok(Program { items })
}

/// Parse a single expression (used by tests and the CLI).
pub fn parse_expr(src: &str) -> PResult<Expr> {
    let mut p = Parser { toks: lex(src)?, at: 0, ctx: Vec::new(), no_range: false };
    p.skip_terminators();
    let e = p.expr()?;
    p.skip_terminators();
    if !p.at_eof() {
        return p.err("unexpected input after expression");
    }
    Ok(e)
}

impl Parser {
    fn tok(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn token(&self) -> &Token {
        &self.toks[self.at]
    }

    fn peek_tok(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.at].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at < self.toks.len() - 1 {
            self.at += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.tok(), Tok::Eof)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(SyntaxError::new(self.span(), msg))
    }

    fn ctx(&self) -> Option<Ctx> {
        self.ctx.last().copied()
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.tok(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.tok(), Tok::Ident(s) if s == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            self.err(format!("expected `{op}`, found {}", describe(self.tok())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", describe(self.tok())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.tok().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected a name, found {}", describe(&other))),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.tok(), Tok::Newline) {
            self.bump();
        }
    }

    fn skip_terminators(&mut self) {
        while matches!(self.tok(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.tok() {
            Tok::Newline | Tok::Semi | Tok::Eof => Ok(()),
            _ if self.is_kw("end") || self.is_kw("else") || self.is_kw("elseif") || self.is_kw("catch") => Ok(()),
            other => self.err(format!("expected end of statement, found {}", describe(other))),
        }
    }

    fn in_parens<T>(&mut self, ctx: Ctx, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        self.ctx.push(ctx);
        let saved = self.no_range;
        self.no_range = false;
        let r = f(self);
        self.no_range = saved;
        self.ctx.pop();
        r
    }

    // ---- items ------------------------------------------------------------

    fn item(&mut self) -> PResult<Item> {
        let span = self.span();
        if self.eat_kw("function") {
            return Ok(Item::Function(self.function_rest(span)?));
        }
        if self.is_kw("type") || self.is_kw("immutable") {
            self.bump();
            return Ok(Item::Type(self.struct_rest(span)?));
        }
        if self.eat_kw("abstract") {
            return Ok(Item::Type(self.abstract_rest(span, DeclKind::Abstract)?));
        }
        if self.eat_kw("primitive") {
            return Ok(Item::Type(self.abstract_rest(span, DeclKind::Primitive)?));
        }
        if self.eat_kw("typealias") {
            let name = self.ident()?;
            let mut params = Vec::new();
            if self.is_op("{") && !self.token().space_before {
                self.bump();
                loop {
                    params.push(self.ident()?);
                    if self.eat_op("}") {
                        break;
                    }
                    self.expect_op(",")?;
                }
            }
            let body = self.type_expr()?;
            return Ok(Item::Alias { name, params, body, span });
        }
        if let Tok::Op(op) = self.tok().clone() {
            // `+{T<:Number}(x::T, y::T) = ...`
            if CALLABLE_OPS.contains(&op) && matches!(self.peek_tok(1), Tok::Op(o) if *o == "{") {
                let name = normalize_op(op).to_string();
                self.bump();
                self.bump();
                let curly = self.curly_args()?;
                let static_params = curly_binders(&curly, span)?;
                self.expect_op("(")?;
                let args = self.in_parens(Ctx::Paren, |p| p.call_args())?;
                let params = args.iter().map(to_param).collect::<PResult<Vec<_>>>()?;
                self.expect_op("=")?;
                let rhs = self.expr()?;
                let body = vec![Stmt { kind: StmtKind::Expr(rhs.clone()), span: rhs.span }];
                return Ok(Item::Function(FunctionDef { name, static_params, params, body, short: true, span }));
            }
        }
        let stmt = self.stmt()?;
        if let StmtKind::Expr(Expr { kind: ExprKind::Call(f, args), .. }) = &stmt.kind {
            if f == "include" {
                if let [Expr { kind: ExprKind::Str(path), .. }] = args.as_slice() {
                    return Ok(Item::Include(path.clone(), span));
                }
            }
        }
        if let StmtKind::Assign(lhs, rhs) = &stmt.kind {
            if let Some((name, curly, args)) = call_head(lhs) {
                let static_params = curly_binders(curly, lhs.span)?;
                let params = args.iter().map(to_param).collect::<PResult<Vec<_>>>()?;
                let body = vec![Stmt { kind: StmtKind::Expr(rhs.clone()), span: rhs.span }];
                return Ok(Item::Function(FunctionDef { name, static_params, params, body, short: true, span }));
            }
        }
        Ok(Item::Stmt(stmt))
    }

    fn function_name(&mut self) -> PResult<String> {
        if self.is_op("(") {
            // `(*)`
            self.bump();
            let name = match self.bump().tok {
                Tok::Op(op) if CALLABLE_OPS.contains(&op) => normalize_op(op).to_string(),
                Tok::Ident(s) => s,
                other => return self.err(format!("expected an operator name, found {}", describe(&other))),
            };
            self.expect_op(")")?;
            return Ok(name);
        }
        if let Tok::Op(op) = self.tok().clone() {
            if CALLABLE_OPS.contains(&op) {
                self.bump();
                return Ok(normalize_op(op).to_string());
            }
        }
        self.ident()
    }

    fn function_rest(&mut self, span: Span) -> PResult<FunctionDef> {
        let name = self.function_name()?;
        let mut static_params = Vec::new();
        if self.is_op("{") {
            self.bump();
            let args = self.curly_args()?;
            static_params = curly_binders(&args, span)?;
        }
        self.expect_op("(")?;
        let args = self.in_parens(Ctx::Paren, |p| p.call_args())?;
        let params = args.iter().map(to_param).collect::<PResult<Vec<_>>>()?;
        let body = self.block(&["end"])?;
        self.expect_kw("end")?;
        Ok(FunctionDef { name, static_params, params, body, short: false, span })
    }

    fn binders_after_name(&mut self) -> PResult<Vec<Binder>> {
        if self.is_op("{") && !self.token().space_before {
            let span = self.span();
            self.bump();
            let args = self.curly_args()?;
            return curly_binders(&args, span);
        }
        Ok(Vec::new())
    }

    fn struct_rest(&mut self, span: Span) -> PResult<TypeDef> {
        let name = self.ident()?;
        let params = self.binders_after_name()?;
        let supertype = if self.eat_op("<:") { Some(self.type_expr()?) } else { None };
        let mut fields = Vec::new();
        loop {
            self.skip_terminators();
            if self.eat_kw("end") {
                break;
            }
            if self.at_eof() {
                return self.err(format!("missing `end` for type {name}"));
            }
            let f = self.ident()?;
            let ty = if self.eat_op("::") { Some(self.type_expr()?) } else { None };
            fields.push((f, ty));
            self.end_of_statement()?;
        }
        Ok(TypeDef { kind: DeclKind::Struct, name, params, supertype, fields, span })
    }

    fn abstract_rest(&mut self, span: Span, kind: DeclKind) -> PResult<TypeDef> {
        let long_form = self.eat_kw("type");
        let name = self.ident()?;
        let params = self.binders_after_name()?;
        let supertype = if self.eat_op("<:") { Some(self.type_expr()?) } else { None };
        if long_form {
            self.expect_kw("end")?;
        }
        Ok(TypeDef { kind, name, params, supertype, fields: Vec::new(), span })
    }

    // ---- statements ---------------------------------------------------------

    /// Statements up to (not including) one of the `stops` keywords.
    fn block(&mut self, stops: &[&str]) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            self.skip_terminators();
            if stops.iter().any(|s| self.is_kw(s)) {
                return Ok(out);
            }
            if self.at_eof() {
                return self.err(format!("expected `{}` before end of input", stops[0]));
            }
            out.push(self.stmt()?);
            self.end_of_statement()?;
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = if self.eat_kw("if") {
            let mut arms = Vec::new();
            let cond = self.expr()?;
            let body = self.block(&["elseif", "else", "end"])?;
            arms.push((cond, body));
            let mut otherwise = None;
            loop {
                if self.eat_kw("elseif") {
                    let cond = self.expr()?;
                    let body = self.block(&["elseif", "else", "end"])?;
                    arms.push((cond, body));
                } else if self.eat_kw("else") {
                    otherwise = Some(self.block(&["end"])?);
                } else {
                    self.expect_kw("end")?;
                    break;
                }
            }
            StmtKind::If(arms, otherwise)
        } else if self.eat_kw("while") {
            let cond = self.expr()?;
            let body = self.block(&["end"])?;
            self.expect_kw("end")?;
            StmtKind::While(cond, body)
        } else if self.eat_kw("for") {
            let mut specs = Vec::new();
            loop {
                let var = self.ident()?;
                if !(self.eat_op("=") || self.eat_kw("in")) {
                    return self.err("expected `=` or `in` in for loop");
                }
                let iter = self.expr()?;
                specs.push((var, iter));
                if !self.eat_op(",") {
                    break;
                }
            }
            let body = self.block(&["end"])?;
            self.expect_kw("end")?;
            StmtKind::For(specs, body)
        } else if self.eat_kw("try") {
            let body = self.block(&["catch", "end"])?;
            let mut handler = None;
            if self.eat_kw("catch") {
                let var = match self.tok().clone() {
                    Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                        self.bump();
                        Some(s)
                    }
                    _ => None,
                };
                handler = Some((var, self.block(&["end"])?));
            }
            self.expect_kw("end")?;
            StmtKind::Try(body, handler)
        } else if self.is_kw("return") {
            self.bump();
            let value = if self.at_value_end() {
                None
            } else {
                let first = self.expr()?;
                Some(Box::new(self.maybe_tuple(first)?))
            };
            StmtKind::Expr(Expr::new(ExprKind::Return(value), span))
        } else {
            self.eat_kw("const");
            let first = self.expr()?;
            let lhs = self.maybe_tuple(first)?;
            if self.eat_op("=") {
                self.skip_newlines();
                let rhs = self.expr()?;
                let rhs = self.maybe_tuple(rhs)?;
                match lhs.kind {
                    ExprKind::Assert(inner, ty) => match inner.kind {
                        ExprKind::Var(name) => StmtKind::DeclAssign(name, ty, rhs),
                        _ => return Err(SyntaxError::new(span, "a type declaration needs a variable")),
                    },
                    _ => StmtKind::Assign(lhs, rhs),
                }
            } else if let Some(op) = ["+=", "-=", "*=", "/=", "^="].into_iter().find(|o| self.is_op(o)) {
                self.bump();
                self.skip_newlines();
                let rhs = self.expr()?;
                StmtKind::OpAssign(lhs, op[..1].to_string(), rhs)
            } else {
                StmtKind::Expr(lhs)
            }
        };
        Ok(Stmt { kind, span })
    }

    fn at_value_end(&self) -> bool {
        matches!(self.tok(), Tok::Newline | Tok::Semi | Tok::Eof)
            || self.is_kw("end")
            || self.is_kw("else")
            || self.is_kw("elseif")
            || self.is_op(")")
            || self.is_op("]")
            || self.is_op(",")
    }

    /// `a, b` at statement level forms a tuple.
    fn maybe_tuple(&mut self, first: Expr) -> PResult<Expr> {
        if self.ctx().is_some() || !self.is_op(",") {
            return Ok(first);
        }
        let span = first.span;
        let mut items = vec![first];
        while self.eat_op(",") {
            items.push(self.expr()?);
        }
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    // ---- expressions --------------------------------------------------------

    pub fn expr(&mut self) -> PResult<Expr> {
        self.ternary()
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let cond = self.or()?;
        if self.is_op("?") {
            self.bump();
            self.skip_newlines();
            let saved = self.no_range;
            self.no_range = true;
            let a = self.ternary();
            self.no_range = saved;
            let a = a?;
            self.skip_newlines();
            self.expect_op(":")?;
            self.skip_newlines();
            let b = self.ternary()?;
            let span = cond.span;
            return Ok(Expr::new(ExprKind::Ternary(Box::new(cond), Box::new(a), Box::new(b)), span));
        }
        Ok(cond)
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut l = self.and()?;
        while self.is_op("||") {
            self.bump();
            self.skip_newlines();
            let r = self.and()?;
            let span = l.span;
            l = Expr::new(ExprKind::Or(Box::new(l), Box::new(r)), span);
        }
        Ok(l)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut l = self.comparison()?;
        while self.is_op("&&") {
            self.bump();
            self.skip_newlines();
            let r = self.comparison()?;
            let span = l.span;
            l = Expr::new(ExprKind::And(Box::new(l), Box::new(r)), span);
        }
        Ok(l)
    }

    fn comparison_op(&self) -> Option<&'static str> {
        match self.tok() {
            Tok::Op(op @ ("==" | "!=" | "≠" | "<" | "<=" | "≤" | ">" | ">=" | "≥" | "<:")) => {
                if self.matrix_breaks() {
                    None
                } else {
                    Some(op)
                }
            }
            _ => None,
        }
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let first = self.range()?;
        let mut operands = vec![first];
        let mut ops = Vec::new();
        while let Some(op) = self.comparison_op() {
            self.bump();
            self.skip_newlines();
            ops.push(normalize_op(op).to_string());
            operands.push(self.range()?);
        }
        if ops.is_empty() {
            return Ok(operands.pop().unwrap());
        }
        // a < b < c means (a < b) && (b < c)
        let mut result: Option<Expr> = None;
        for (i, op) in ops.into_iter().enumerate() {
            let l = operands[i].clone();
            let r = operands[i + 1].clone();
            let span = l.span;
            let cmp = Expr::new(ExprKind::Call(op, vec![l, r]), span);
            result = Some(match result {
                None => cmp,
                Some(prev) => Expr::new(ExprKind::And(Box::new(prev), Box::new(cmp)), span),
            });
        }
        Ok(result.unwrap())
    }

    fn range(&mut self) -> PResult<Expr> {
        let start = self.arith()?;
        if self.no_range || !self.is_op(":") || self.colon_is_index_colon() {
            return Ok(start);
        }
        self.bump();
        let mid = self.arith()?;
        let span = start.span;
        if self.is_op(":") && !self.colon_is_index_colon() {
            self.bump();
            let stop = self.arith()?;
            return Ok(Expr::new(ExprKind::Call(":".into(), vec![start, mid, stop]), span));
        }
        Ok(Expr::new(ExprKind::Call(":".into(), vec![start, mid]), span))
    }

    fn colon_is_index_colon(&self) -> bool {
        matches!(self.peek_tok(1), Tok::Op("," | "]" | ")"))
    }

    /// Inside an array literal `a -b` is two entries but `a - b` one.
    fn matrix_breaks(&self) -> bool {
        if self.ctx() != Some(Ctx::Matrix) {
            return false;
        }
        let t = self.token();
        let next = &self.toks[(self.at + 1).min(self.toks.len() - 1)];
        t.space_before && !next.space_before && matches!(t.tok, Tok::Op("+" | "-"))
    }

    fn arith(&mut self) -> PResult<Expr> {
        let mut l = self.term()?;
        loop {
            let op = match self.tok() {
                Tok::Op(op @ ("+" | "-")) if !self.matrix_breaks() => *op,
                _ => break,
            };
            self.bump();
            self.skip_newlines();
            let r = self.term()?;
            let span = l.span;
            l = Expr::new(ExprKind::Call(op.into(), vec![l, r]), span);
        }
        Ok(l)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut l = self.unary()?;
        let mut chain = false;
        loop {
            let op = match self.tok() {
                Tok::Op(op @ ("*" | "/" | "%" | "÷" | "//")) if !self.matrix_breaks() => *op,
                _ => break,
            };
            self.bump();
            self.skip_newlines();
            let r = self.unary()?;
            let span = l.span;
            if op == "*" && chain {
                if let ExprKind::Call(_, args) = &mut l.kind {
                    args.push(r);
                    continue;
                }
            }
            chain = op == "*";
            let name = if op == "%" { "rem" } else { normalize_op(op) };
            l = Expr::new(ExprKind::Call(name.into(), vec![l, r]), span);
        }
        Ok(l)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let op = match self.tok() {
            Tok::Op(op @ ("-" | "+" | "!")) => *op,
            _ => return self.power(),
        };
        // `-(a, b)` is a call of the operator itself
        if matches!(self.peek_tok(1), Tok::Op("(")) && !self.toks[self.at + 1].space_before {
            return self.power();
        }
        self.bump();
        let operand = self.unary()?;
        Ok(match (op, operand.kind) {
            ("-", ExprKind::Int(i)) => Expr::new(ExprKind::Int(i.wrapping_neg()), span),
            ("-", ExprKind::Float(f)) => Expr::new(ExprKind::Float(-f), span),
            ("+", kind @ (ExprKind::Int(_) | ExprKind::Float(_))) => Expr::new(kind, span),
            (op, kind) => Expr::new(ExprKind::Call(op.into(), vec![Expr::new(kind, operand.span)]), span),
        })
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.postfix()?;
        if self.is_op("^") {
            self.bump();
            let exp = self.unary()?;
            let span = base.span;
            return Ok(Expr::new(ExprKind::Call("^".into(), vec![base, exp]), span));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            let tight = !self.token().space_before;
            let in_matrix = self.ctx() == Some(Ctx::Matrix);
            if self.is_op("(") && (tight || !in_matrix) {
                self.bump();
                let args = self.in_parens(Ctx::Paren, |p| p.call_args())?;
                let span = e.span;
                e = match e.kind {
                    ExprKind::Var(name) => Expr::new(ExprKind::Call(name, args), span),
                    ExprKind::Curly(name, curly) => Expr::new(ExprKind::CallCurly(name, curly, args), span),
                    _ => return Err(SyntaxError::new(span, "only named functions and types can be called")),
                };
            } else if self.is_op("[") && (tight || !in_matrix) {
                self.bump();
                let args = self.in_parens(Ctx::Index, |p| p.index_args())?;
                let span = e.span;
                e = Expr::new(ExprKind::Index(Box::new(e), args), span);
            } else if self.is_op(".") {
                self.bump();
                let field = self.ident()?;
                let span = e.span;
                e = Expr::new(ExprKind::Field(Box::new(e), field), span);
            } else if self.is_op("'") {
                self.bump();
                let span = e.span;
                e = Expr::new(ExprKind::Call("transpose".into(), vec![e]), span);
            } else if self.is_op("::") {
                self.bump();
                let ty = self.type_expr()?;
                let span = e.span;
                e = Expr::new(ExprKind::Assert(Box::new(e), ty), span);
            } else if self.is_op("{") && tight && matches!(e.kind, ExprKind::Var(_)) {
                self.bump();
                let args = self.curly_args()?;
                let ExprKind::Var(name) = e.kind else { unreachable!() };
                e = Expr::new(ExprKind::Curly(name, args), e.span);
            } else if self.is_op("...") {
                self.bump();
                let span = e.span;
                e = Expr::new(ExprKind::Splat(Box::new(e)), span);
            } else {
                return Ok(e);
            }
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        self.skip_newlines();
        if self.eat_op(")") {
            return Ok(out);
        }
        loop {
            self.skip_newlines();
            out.push(self.expr()?);
            self.skip_newlines();
            if self.eat_op(")") {
                return Ok(out);
            }
            self.expect_op(",")?;
        }
    }

    fn index_args(&mut self) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        self.skip_newlines();
        if self.eat_op("]") {
            return Ok(out);
        }
        loop {
            self.skip_newlines();
            if self.is_op(":") && matches!(self.peek_tok(1), Tok::Op("," | "]")) {
                let span = self.span();
                self.bump();
                out.push(Expr::new(ExprKind::Colon, span));
            } else {
                out.push(self.expr()?);
            }
            self.skip_newlines();
            if self.eat_op("]") {
                return Ok(out);
            }
            self.expect_op(",")?;
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let t = self.tok().clone();
        let kind = match t {
            Tok::Int(i) => {
                self.bump();
                ExprKind::Int(i)
            }
            Tok::Float(f) => {
                self.bump();
                ExprKind::Float(f)
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Tok::At(name) => {
                self.bump();
                if self.token().space_before {
                    return self.err("expected `(` directly after an intrinsic name");
                }
                self.expect_op("(")?;
                let args = self.in_parens(Ctx::Paren, |p| p.call_args())?;
                ExprKind::Intrinsic(name, args)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    ExprKind::Bool(s == "true")
                }
                "nothing" => {
                    self.bump();
                    ExprKind::Nothing
                }
                "end" if self.ctx.contains(&Ctx::Index) => {
                    self.bump();
                    ExprKind::End
                }
                "return" => {
                    self.bump();
                    if self.at_value_end() {
                        ExprKind::Return(None)
                    } else {
                        ExprKind::Return(Some(Box::new(self.expr()?)))
                    }
                }
                "break" => {
                    self.bump();
                    ExprKind::Break
                }
                "continue" => {
                    self.bump();
                    ExprKind::Continue
                }
                _ => ExprKind::Var(self.ident()?),
            },
            Tok::Op("(") => {
                self.bump();
                return self.in_parens(Ctx::Paren, |p| p.paren_rest(span));
            }
            Tok::Op("[") => {
                self.bump();
                return self.in_parens(Ctx::Matrix, |p| p.array_literal(span));
            }
            Tok::Op("::") => {
                self.bump();
                ExprKind::AnonParam(self.type_expr()?)
            }
            Tok::Op(op) if CALLABLE_OPS.contains(&op) && matches!(self.peek_tok(1), Tok::Op("(" | "{")) => {
                if self.toks[self.at + 1].space_before {
                    return self.err(format!("unexpected `{op}`"));
                }
                self.bump();
                let name = normalize_op(op).to_string();
                if self.eat_op("{") {
                    let curly = self.curly_args()?;
                    self.expect_op("(")?;
                    let args = self.in_parens(Ctx::Paren, |p| p.call_args())?;
                    ExprKind::CallCurly(name, curly, args)
                } else {
                    self.bump();
                    let args = self.in_parens(Ctx::Paren, |p| p.call_args())?;
                    ExprKind::Call(name, args)
                }
            }
            other => return self.err(format!("unexpected {}", describe(&other))),
        };
        Ok(Expr::new(kind, span))
    }

    fn paren_rest(&mut self, span: Span) -> PResult<Expr> {
        self.skip_newlines();
        if self.eat_op(")") {
            return Ok(Expr::new(ExprKind::Tuple(Vec::new()), span));
        }
        let first = self.expr()?;
        self.skip_newlines();
        if self.eat_op(")") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            self.skip_newlines();
            if self.is_op(")") {
                break;
            }
            items.push(self.expr()?);
            self.skip_newlines();
        }
        self.expect_op(")")?;
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn array_literal(&mut self, span: Span) -> PResult<Expr> {
        self.skip_newlines();
        if self.eat_op("]") {
            return Ok(Expr::new(ExprKind::Vect(Vec::new()), span));
        }
        let first = self.expr()?;
        if self.is_op(",") {
            let mut items = vec![first];
            while self.eat_op(",") {
                self.skip_newlines();
                if self.is_op("]") {
                    break;
                }
                items.push(self.expr()?);
            }
            self.skip_newlines();
            self.expect_op("]")?;
            return Ok(Expr::new(ExprKind::Vect(items), span));
        }
        let mut rows = vec![vec![first]];
        loop {
            match self.tok() {
                Tok::Op("]") => {
                    self.bump();
                    break;
                }
                Tok::Semi | Tok::Newline => {
                    while matches!(self.tok(), Tok::Semi | Tok::Newline) {
                        self.bump();
                    }
                    if self.is_op("]") {
                        continue;
                    }
                    rows.push(vec![self.expr()?]);
                }
                Tok::Eof => return self.err("unterminated array literal"),
                _ => {
                    let e = self.expr()?;
                    rows.last_mut().unwrap().push(e);
                }
            }
        }
        if rows.len() == 1 && rows[0].len() == 1 {
            return Ok(Expr::new(ExprKind::Vect(rows.pop().unwrap()), span));
        }
        Ok(Expr::new(ExprKind::Matrix(rows), span))
    }

    // ---- types --------------------------------------------------------------

    fn curly_args(&mut self) -> PResult<Vec<CurlyArg>> {
        let mut out = Vec::new();
        if self.eat_op("}") {
            return Ok(out);
        }
        loop {
            let t = self.type_expr()?;
            let arg = if self.eat_op("<:") {
                let upper = self.type_expr()?;
                CurlyArg::Bound(Binder { name: type_var_name(&t, self.span())?, lower: None, upper: Some(Box::new(upper)) })
            } else if self.eat_op(">:") {
                let lower = self.type_expr()?;
                CurlyArg::Bound(Binder { name: type_var_name(&t, self.span())?, lower: Some(Box::new(lower)), upper: None })
            } else {
                CurlyArg::Type(t)
            };
            out.push(arg);
            if self.eat_op("}") {
                return Ok(out);
            }
            self.expect_op(",")?;
        }
    }

    pub fn type_expr(&mut self) -> PResult<TypeExpr> {
        let span = self.span();
        match self.tok().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(TypeExpr::Int(i))
            }
            Tok::Op("-") if matches!(self.peek_tok(1), Tok::Int(_)) => {
                self.bump();
                let Tok::Int(i) = self.bump().tok else { unreachable!() };
                Ok(TypeExpr::Int(-i))
            }
            Tok::Op("(") => {
                self.bump();
                let mut fixed = Vec::new();
                let mut comma = false;
                loop {
                    if self.eat_op(")") {
                        break;
                    }
                    let t = self.type_expr()?;
                    if self.eat_op("...") {
                        self.eat_op(",");
                        self.expect_op(")")?;
                        return Ok(TypeExpr::Tuple(fixed, Some(Box::new(t))));
                    }
                    fixed.push(t);
                    comma = false;
                    if self.eat_op(")") {
                        break;
                    }
                    self.expect_op(",")?;
                    comma = true;
                }
                if fixed.len() == 1 && !comma {
                    return Ok(fixed.pop().unwrap());
                }
                Ok(TypeExpr::Tuple(fixed, None))
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                if name == "Union" && (self.is_op("(") || self.is_op("{")) {
                    let close = if self.eat_op("(") { ")" } else {
                        self.bump();
                        "}"
                    };
                    let mut members = Vec::new();
                    if !self.eat_op(close) {
                        loop {
                            members.push(self.type_expr()?);
                            if self.eat_op(close) {
                                break;
                            }
                            self.expect_op(",")?;
                        }
                    }
                    return Ok(TypeExpr::Union(members));
                }
                if self.is_op("{") && !self.token().space_before {
                    self.bump();
                    let args = self.curly_args()?;
                    let params = args
                        .into_iter()
                        .map(|a| match a {
                            CurlyArg::Type(t) => Ok(t),
                            CurlyArg::Bound(_) => Err(SyntaxError::new(span, "bounds are not allowed here")),
                        })
                        .collect::<PResult<Vec<_>>>()?;
                    return Ok(TypeExpr::Apply(name, params));
                }
                Ok(TypeExpr::Apply(name, Vec::new()))
            }
            other => self.err(format!("expected a type, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Float(f) => format!("`{f}`"),
        Tok::Str(_) => "a string".into(),
        Tok::At(s) => format!("`@{s}`"),
        Tok::Op(o) => format!("`{o}`"),
        Tok::Newline => "a newline".into(),
        Tok::Semi => "`;`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn type_var_name(t: &TypeExpr, span: Span) -> PResult<String> {
    match t {
        TypeExpr::Apply(n, ps) if ps.is_empty() => Ok(n.clone()),
        _ => Err(SyntaxError::new(span, "expected a type variable name before `<:`")),
    }
}

fn call_head(e: &Expr) -> Option<(String, &[CurlyArg], &[Expr])> {
    match &e.kind {
        ExprKind::Call(name, args) => Some((name.clone(), &[], args)),
        ExprKind::CallCurly(name, curly, args) => Some((name.clone(), curly, args)),
        _ => None,
    }
}

fn curly_binders(args: &[CurlyArg], span: Span) -> PResult<Vec<Binder>> {
    args.iter()
        .map(|a| match a {
            CurlyArg::Bound(b) => Ok(b.clone()),
            CurlyArg::Type(TypeExpr::Apply(n, ps)) if ps.is_empty() => Ok(Binder::plain(n.clone())),
            CurlyArg::Type(_) => Err(SyntaxError::new(span, "expected a static parameter name")),
        })
        .collect()
}

fn to_param(e: &Expr) -> PResult<Param> {
    match &e.kind {
        ExprKind::Var(n) => Ok(Param { name: Some(n.clone()), ty: None, vararg: false }),
        ExprKind::Assert(inner, ty) => match &inner.kind {
            ExprKind::Var(n) => Ok(Param { name: Some(n.clone()), ty: Some(ty.clone()), vararg: false }),
            _ => Err(SyntaxError::new(e.span, "invalid parameter")),
        },
        ExprKind::AnonParam(ty) => Ok(Param { name: None, ty: Some(ty.clone()), vararg: false }),
        ExprKind::Splat(inner) => {
            let mut p = to_param(inner)?;
            if p.vararg {
                return Err(SyntaxError::new(e.span, "invalid parameter"));
            }
            p.vararg = true;
            Ok(p)
        }
        _ => Err(SyntaxError::new(e.span, "invalid parameter")),
    }
}
