//! Frontend for the mini-C dialect: lexing, parsing into the abstract
//! syntax, and elaboration into a typed program with an initial store.
//!
//! The surface grammar covers exactly the constructs the core semantics
//! knows about: `int` scalars, pointers, one-dimensional arrays, the
//! operators `| & + - * == <`, address-of, dereference, `if`/`while`, and
//! the annotation comments `/*@ public */`, `/*@ private */` and
//! `//@ assert security_status(x) == public;`. `p += e`, `p++` and `x |= e`
//! are sugar.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ast::{
    AssignKind, BinOpKind, Decl, DeclInit, Expr, Instr, Lval, ObjType, Offs, Pos, StmtId,
};
use crate::label::Label;
use crate::model::{BlockVal, Environment, LabelMemory, Memory, Val};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct FrontendError {
    pub msg: String,
    pub pos: Pos,
}

impl FrontendError {
    fn new(msg: impl Into<String>, pos: Pos) -> FrontendError {
        FrontendError {
            msg: msg.into(),
            pos,
        }
    }
}

/// Parsed but not yet typed program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub decls: Vec<Decl>,
    pub body: Instr,
}

/// Elaborated program: environment, initial stores, declared types, and a
/// body whose assignments are classified as scalar or array-element writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    pub env: Environment,
    pub decls: Vec<Decl>,
    pub var_types: BTreeMap<String, ObjType>,
    pub initial_memory: Memory,
    pub initial_labels: LabelMemory,
    pub body: Instr,
}

impl TypedProgram {
    pub fn ty_of(&self, name: &str) -> &ObjType {
        &self.var_types[name]
    }

    /// Security assertions in the body, in source order.
    pub fn assertions(&self) -> Vec<(String, Label, Pos)> {
        let mut out = Vec::new();
        fn walk(i: &Instr, out: &mut Vec<(String, Label, Pos)>) {
            match i {
                Instr::SecAssert { var, expected, pos } => {
                    out.push((var.clone(), *expected, *pos))
                }
                Instr::Seq(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Instr::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, out);
                    walk(else_branch, out);
                }
                Instr::While { body, .. } => walk(body, out),
                _ => {}
            }
        }
        walk(&self.body, &mut out);
        out
    }

    /// Ids of every assignment occurrence in the body.
    pub fn assignment_ids(&self) -> Vec<StmtId> {
        let mut out = Vec::new();
        fn walk(i: &Instr, out: &mut Vec<StmtId>) {
            match i {
                Instr::Assign { id, .. } => out.push(*id),
                Instr::Seq(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Instr::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, out);
                    walk(else_branch, out);
                }
                Instr::While { body, .. } => walk(body, out),
                _ => {}
            }
        }
        walk(&self.body, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    /// Contents of a `/*@ ... */` annotation.
    Annot(String),
    /// Contents of a `//@ ...` line annotation.
    LineAnnot(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Str(_) => write!(f, "string literal"),
            Tok::Annot(_) => write!(f, "annotation"),
            Tok::LineAnnot(_) => write!(f, "line annotation"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.chars.peek() == Some(&c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn tokenize(mut self) -> Result<Vec<(Tok, Pos)>, FrontendError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            let pos = self.pos();
            let c = match self.chars.peek() {
                None => {
                    out.push((Tok::Eof, pos));
                    return Ok(out);
                }
                Some(c) => *c,
            };
            match c {
                'a'..='z' | 'A'..='Z' | '_' => {
                    let mut s = String::new();
                    while matches!(self.chars.peek(), Some(c) if c.is_ascii_alphanumeric() || *c == '_')
                    {
                        s.push(self.bump().unwrap());
                    }
                    out.push((Tok::Ident(s), pos));
                }
                '0'..='9' => {
                    let mut s = String::new();
                    while matches!(self.chars.peek(), Some(c) if c.is_ascii_digit()) {
                        s.push(self.bump().unwrap());
                    }
                    let n = s
                        .parse::<i64>()
                        .map_err(|_| FrontendError::new("integer literal out of range", pos))?;
                    out.push((Tok::Int(n), pos));
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None | Some('\n') => {
                                return Err(FrontendError::new("unterminated string literal", pos))
                            }
                            Some('"') => break,
                            Some(ch) => s.push(ch),
                        }
                    }
                    out.push((Tok::Str(s), pos));
                }
                '/' => {
                    self.bump();
                    if self.eat('/') {
                        if self.eat('@') {
                            let mut s = String::new();
                            while matches!(self.chars.peek(), Some(c) if *c != '\n') {
                                s.push(self.bump().unwrap());
                            }
                            out.push((Tok::LineAnnot(s.trim().to_string()), pos));
                        } else {
                            while matches!(self.chars.peek(), Some(c) if *c != '\n') {
                                self.bump();
                            }
                        }
                    } else if self.eat('*') {
                        let annot = self.eat('@');
                        let mut s = String::new();
                        loop {
                            match self.bump() {
                                None => {
                                    return Err(FrontendError::new("unterminated comment", pos))
                                }
                                Some('*') if self.eat('/') => break,
                                Some(ch) => s.push(ch),
                            }
                        }
                        if annot {
                            out.push((Tok::Annot(s.trim().to_string()), pos));
                        }
                    } else {
                        return Err(FrontendError::new("unexpected character `/`", pos));
                    }
                }
                _ => {
                    self.bump();
                    let punct = match c {
                        ';' => ";",
                        ',' => ",",
                        '(' => "(",
                        ')' => ")",
                        '[' => "[",
                        ']' => "]",
                        '{' => "{",
                        '}' => "}",
                        '*' => "*",
                        '&' => "&",
                        '-' => "-",
                        '<' => "<",
                        '=' => {
                            if self.eat('=') {
                                "=="
                            } else {
                                "="
                            }
                        }
                        '|' => {
                            if self.eat('=') {
                                "|="
                            } else {
                                "|"
                            }
                        }
                        '+' => {
                            if self.eat('=') {
                                "+="
                            } else if self.eat('+') {
                                "++"
                            } else {
                                "+"
                            }
                        }
                        other => {
                            return Err(FrontendError::new(
                                format!("unexpected character `{other}`"),
                                pos,
                            ))
                        }
                    };
                    out.push((Tok::Punct(punct), pos));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek() == &Tok::Punct(Box::leak(p.to_string().into_boxed_str())) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<Pos, FrontendError> {
        match self.peek() {
            Tok::Punct(q) if *q == p => Ok(self.next().1),
            other => Err(FrontendError::new(
                format!("expected `{p}`, found {other}"),
                self.peek_pos(),
            )),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Pos), FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.next().1;
                Ok((s, pos))
            }
            other => Err(FrontendError::new(
                format!("expected identifier, found {other}"),
                self.peek_pos(),
            )),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn parse_program(&mut self) -> Result<SourceProgram, FrontendError> {
        let mut decls: Vec<Decl> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        while self.is_kw("int") {
            let decl = self.parse_decl()?;
            if !seen.insert(decl.name.clone()) {
                return Err(FrontendError::new(
                    format!("duplicate declaration of `{}`", decl.name),
                    decl.pos,
                ));
            }
            decls.push(decl);
        }
        let mut stmts = Vec::new();
        while self.peek() != &Tok::Eof {
            stmts.push(self.parse_stmt()?);
        }
        Ok(SourceProgram {
            decls,
            body: Instr::seq(stmts),
        })
    }

    fn parse_decl(&mut self) -> Result<Decl, FrontendError> {
        let (_, pos) = self.expect_ident()?; // "int"
        let mut stars = 0usize;
        while self.eat_punct("*") {
            stars += 1;
        }
        let (name, _) = self.expect_ident()?;
        let mut base = ObjType::Int;
        for _ in 0..stars {
            base = ObjType::Ptr(Box::new(base));
        }
        let ty = if self.eat_punct("[") {
            let len_pos = self.peek_pos();
            let len = match self.next().0 {
                Tok::Int(n) if n > 0 => n as usize,
                _ => {
                    return Err(FrontendError::new(
                        "array length must be a positive integer",
                        len_pos,
                    ))
                }
            };
            self.expect_punct("]")?;
            ObjType::Array(Box::new(base), len)
        } else {
            base
        };
        let init = if self.eat_punct("=") {
            Some(self.parse_init()?)
        } else {
            None
        };
        let mut annot = self.try_annot()?;
        self.expect_punct(";")?;
        if annot.is_none() {
            annot = self.try_annot()?;
        }
        Ok(Decl {
            name,
            ty,
            init,
            annot,
            pos,
        })
    }

    fn try_annot(&mut self) -> Result<Option<Label>, FrontendError> {
        if let Tok::Annot(s) = self.peek().clone() {
            let pos = self.next().1;
            match s.as_str() {
                "public" => Ok(Some(Label::BOTTOM)),
                "private" => Ok(Some(Label::PRIVATE)),
                other => Err(FrontendError::new(
                    format!("unknown annotation keyword `{other}`"),
                    pos,
                )),
            }
        } else {
            Ok(None)
        }
    }

    fn parse_int_literal(&mut self) -> Result<i64, FrontendError> {
        let neg = self.eat_punct("-");
        let pos = self.peek_pos();
        match self.next().0 {
            Tok::Int(n) => Ok(if neg { -n } else { n }),
            other => Err(FrontendError::new(
                format!("expected integer, found {other}"),
                pos,
            )),
        }
    }

    fn parse_init(&mut self) -> Result<DeclInit, FrontendError> {
        if self.eat_punct("{") {
            let mut vals = vec![self.parse_int_literal()?];
            while self.eat_punct(",") {
                vals.push(self.parse_int_literal()?);
            }
            self.expect_punct("}")?;
            Ok(DeclInit::Array(vals))
        } else {
            Ok(DeclInit::Scalar(self.parse_int_literal()?))
        }
    }

    fn parse_block(&mut self) -> Result<Instr, FrontendError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek() == &Tok::Eof {
                return Err(FrontendError::new("expected `}`", self.peek_pos()));
            }
            stmts.push(self.parse_stmt()?);
        }
        self.expect_punct("}")?;
        Ok(Instr::seq(stmts))
    }

    fn parse_stmt(&mut self) -> Result<Instr, FrontendError> {
        let pos = self.peek_pos();
        if self.eat_punct(";") {
            return Ok(Instr::Skip);
        }
        if let Tok::LineAnnot(s) = self.peek().clone() {
            self.next();
            return parse_assert_annot(&s, pos);
        }
        if self.is_kw("if") {
            self.next();
            self.expect_punct("(")?;
            let cond = self.parse_expr()?;
            self.expect_punct(")")?;
            let then_branch = self.parse_block()?;
            let else_branch = if self.is_kw("else") {
                self.next();
                self.parse_block()?
            } else {
                Instr::Skip
            };
            return Ok(Instr::If {
                cond,
                then_branch: Box::new(then_branch),
                else_branch: Box::new(else_branch),
                pos,
            });
        }
        if self.is_kw("while") {
            self.next();
            self.expect_punct("(")?;
            let cond = self.parse_expr()?;
            self.expect_punct(")")?;
            let body = self.parse_block()?;
            return Ok(Instr::While {
                cond,
                body: Box::new(body),
                pos,
            });
        }
        if self.is_kw("report_violation") {
            self.next();
            self.expect_punct("(")?;
            let message = match self.next().0 {
                Tok::Str(s) => s,
                other => {
                    return Err(FrontendError::new(
                        format!("expected string literal, found {other}"),
                        pos,
                    ))
                }
            };
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            return Ok(Instr::Report { message, pos });
        }
        if self.is_kw("int") {
            return Err(FrontendError::new(
                "declarations must precede all statements",
                pos,
            ));
        }
        // assignment forms
        let lhs = self.parse_lval()?;
        let (kind, rhs) = if self.eat_punct("=") {
            (AssignKind::Set, self.parse_expr()?)
        } else if self.eat_punct("|=") {
            (AssignKind::Join, self.parse_expr()?)
        } else if self.eat_punct("+=") {
            let e = self.parse_expr()?;
            (
                AssignKind::Set,
                Expr::bin(BinOpKind::Add, Expr::lval(lhs.clone()), e),
            )
        } else if self.eat_punct("++") {
            (
                AssignKind::Set,
                Expr::bin(BinOpKind::Add, Expr::lval(lhs.clone()), Expr::Const(1)),
            )
        } else {
            return Err(FrontendError::new(
                format!("expected assignment operator, found {}", self.peek()),
                self.peek_pos(),
            ));
        };
        self.expect_punct(";")?;
        Ok(Instr::Assign {
            id: StmtId(0),
            kind,
            array_elem: false,
            lhs,
            rhs,
            pos,
        })
    }

    fn parse_lval(&mut self) -> Result<Lval, FrontendError> {
        if self.eat_punct("*") {
            let e = self.parse_unary()?;
            return Ok(Lval::deref(e));
        }
        let (name, _) = self.expect_ident()?;
        if self.eat_punct("[") {
            let idx = self.parse_expr()?;
            self.expect_punct("]")?;
            Ok(Lval::index(&name, idx))
        } else {
            Ok(Lval::var(&name))
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, FrontendError> {
        self.parse_bin(0)
    }

    // precedence climbing over | & == < +- *
    fn parse_bin(&mut self, min_level: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let (op, level) = match self.peek() {
                Tok::Punct("|") => (BinOpKind::BitOr, 1),
                Tok::Punct("&") => (BinOpKind::BitAnd, 2),
                Tok::Punct("==") => (BinOpKind::Eq, 3),
                Tok::Punct("<") => (BinOpKind::Lt, 4),
                Tok::Punct("+") => (BinOpKind::Add, 5),
                Tok::Punct("-") => (BinOpKind::Sub, 5),
                Tok::Punct("*") => (BinOpKind::Mul, 6),
                _ => break,
            };
            if level < min_level {
                break;
            }
            self.next();
            let rhs = self.parse_bin(level + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, FrontendError> {
        if self.eat_punct("*") {
            let e = self.parse_unary()?;
            return Ok(Expr::lval(Lval::deref(e)));
        }
        if self.eat_punct("&") {
            let pos = self.peek_pos();
            let e = self.parse_unary()?;
            return match e {
                Expr::Lval(lv) => Ok(Expr::AddrOf(lv)),
                _ => Err(FrontendError::new("`&` requires an lvalue operand", pos)),
            };
        }
        if self.is_punct("-") {
            // unary minus is only supported on integer literals
            let save = self.at;
            self.next();
            if let Tok::Int(n) = self.peek().clone() {
                self.next();
                return Ok(Expr::Const(-n));
            }
            self.at = save;
            return Err(FrontendError::new(
                "unary `-` is only supported on integer literals",
                self.peek_pos(),
            ));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, FrontendError> {
        let pos = self.peek_pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                Ok(Expr::Const(n))
            }
            Tok::Ident(name) => {
                self.next();
                if self.eat_punct("[") {
                    let idx = self.parse_expr()?;
                    self.expect_punct("]")?;
                    Ok(Expr::lval(Lval::index(&name, idx)))
                } else {
                    Ok(Expr::var(&name))
                }
            }
            Tok::Punct("(") => {
                self.next();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            other => Err(FrontendError::new(
                format!("expected expression, found {other}"),
                pos,
            )),
        }
    }
}

/// Parses the body of a `//@ ...` annotation:
/// `assert security_status(<ident>) == public|private|<int>;`
fn parse_assert_annot(s: &str, pos: Pos) -> Result<Instr, FrontendError> {
    let err = || FrontendError::new(format!("malformed assertion annotation `{s}`"), pos);
    let rest = s.strip_prefix("assert").ok_or_else(err)?.trim_start();
    let rest = rest.strip_prefix("security_status").ok_or_else(err)?.trim_start();
    let rest = rest.strip_prefix('(').ok_or_else(err)?;
    let close = rest.find(')').ok_or_else(err)?;
    let var = rest[..close].trim().to_string();
    if var.is_empty() || !var.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(err());
    }
    let rest = rest[close + 1..].trim_start();
    let rest = rest.strip_prefix("==").ok_or_else(err)?.trim();
    let rest = rest.strip_suffix(';').unwrap_or(rest).trim();
    let expected = match rest {
        "public" => Label::BOTTOM,
        "private" => Label::PRIVATE,
        n => Label(n.parse::<u64>().map_err(|_| err())?),
    };
    Ok(Instr::SecAssert { var, expected, pos })
}

/// Parses a complete source file into its AST, or a diagnostic with
/// line/column.
pub fn parse(source: &str) -> Result<SourceProgram, FrontendError> {
    let toks = Lexer::new(source).tokenize()?;
    let mut p = Parser { toks, at: 0 };
    p.parse_program()
}

// ---------------------------------------------------------------------------
// Elaboration
// ---------------------------------------------------------------------------

struct Elaborator<'a> {
    decls: &'a [Decl],
    types: BTreeMap<String, ObjType>,
    /// Per pointer-carrying variable: may it hold a pointer to an array
    /// element? Drives the scalar vs. array-element assignment split.
    may_elem: BTreeMap<String, bool>,
    next_id: u32,
}

impl<'a> Elaborator<'a> {
    fn ty(&self, name: &str, pos: Pos) -> Result<&ObjType, FrontendError> {
        self.types
            .get(name)
            .ok_or_else(|| FrontendError::new(format!("use of undeclared variable `{name}`"), pos))
    }

    /// Rewrites and types an expression. `+` on a pointer left operand
    /// becomes pointer addition.
    fn elab_expr(&self, e: &Expr, pos: Pos) -> Result<(Expr, ObjType), FrontendError> {
        match e {
            Expr::Const(n) => Ok((Expr::Const(*n), ObjType::Int)),
            Expr::Lval(lv) => {
                let (lv2, ty) = self.elab_lval(lv, pos)?;
                Ok((Expr::Lval(Box::new(lv2)), ty))
            }
            Expr::AddrOf(lv) => {
                let (lv2, ty) = self.elab_lval(lv, pos)?;
                Ok((Expr::AddrOf(Box::new(lv2)), ObjType::Ptr(Box::new(ty))))
            }
            Expr::BinOp(op, a, b) => {
                let (a2, ta) = self.elab_expr(a, pos)?;
                let (b2, tb) = self.elab_expr(b, pos)?;
                if *op == BinOpKind::Add && ta.is_ptr() {
                    if tb != ObjType::Int {
                        return Err(FrontendError::new(
                            "pointer addition requires an integer right operand",
                            pos,
                        ));
                    }
                    return Ok((Expr::PtrAdd(Box::new(a2), Box::new(b2)), ta));
                }
                if ta != ObjType::Int || tb != ObjType::Int {
                    return Err(FrontendError::new(
                        format!("operator `{}` requires integer operands", op.symbol()),
                        pos,
                    ));
                }
                Ok((Expr::BinOp(*op, Box::new(a2), Box::new(b2)), ObjType::Int))
            }
            Expr::PtrAdd(a, b) => {
                let (a2, ta) = self.elab_expr(a, pos)?;
                let (b2, tb) = self.elab_expr(b, pos)?;
                if !ta.is_ptr() || tb != ObjType::Int {
                    return Err(FrontendError::new(
                        "pointer addition requires a pointer and an integer",
                        pos,
                    ));
                }
                Ok((Expr::PtrAdd(Box::new(a2), Box::new(b2)), ta))
            }
        }
    }

    /// Types an lvalue; the result type is the type of the addressed cell.
    fn elab_lval(&self, lv: &Lval, pos: Pos) -> Result<(Lval, ObjType), FrontendError> {
        match lv {
            Lval::Var(name, Offs::None) => {
                let ty = self.ty(name, pos)?.clone();
                if ty.is_array() {
                    return Err(FrontendError::new(
                        format!("array `{name}` used without an index"),
                        pos,
                    ));
                }
                Ok((Lval::Var(name.clone(), Offs::None), ty))
            }
            Lval::Var(name, Offs::Index(idx)) => {
                let ty = self.ty(name, pos)?.clone();
                let elem = match ty {
                    ObjType::Array(elem, _) => *elem,
                    _ => {
                        return Err(FrontendError::new(
                            format!("`{name}` is not an array but is indexed"),
                            pos,
                        ))
                    }
                };
                let (idx2, ti) = self.elab_expr(idx, pos)?;
                if ti != ObjType::Int {
                    return Err(FrontendError::new("array index must be an integer", pos));
                }
                Ok((
                    Lval::Var(name.clone(), Offs::Index(Box::new(idx2))),
                    elem,
                ))
            }
            Lval::Deref(e) => {
                let (e2, ty) = self.elab_expr(e, pos)?;
                match ty {
                    ObjType::Ptr(inner) => Ok((Lval::Deref(Box::new(e2)), *inner)),
                    _ => Err(FrontendError::new("dereference of a non-pointer", pos)),
                }
            }
        }
    }

    fn elab_stmt(&self, i: &Instr) -> Result<Instr, FrontendError> {
        match i {
            Instr::Skip => Ok(Instr::Skip),
            Instr::Seq(a, b) => Ok(Instr::Seq(
                Box::new(self.elab_stmt(a)?),
                Box::new(self.elab_stmt(b)?),
            )),
            Instr::If {
                cond,
                then_branch,
                else_branch,
                pos,
            } => {
                let (c2, ct) = self.elab_expr(cond, *pos)?;
                if ct != ObjType::Int {
                    return Err(FrontendError::new("condition must be an integer", *pos));
                }
                Ok(Instr::If {
                    cond: c2,
                    then_branch: Box::new(self.elab_stmt(then_branch)?),
                    else_branch: Box::new(self.elab_stmt(else_branch)?),
                    pos: *pos,
                })
            }
            Instr::While { cond, body, pos } => {
                let (c2, ct) = self.elab_expr(cond, *pos)?;
                if ct != ObjType::Int {
                    return Err(FrontendError::new("condition must be an integer", *pos));
                }
                Ok(Instr::While {
                    cond: c2,
                    body: Box::new(self.elab_stmt(body)?),
                    pos: *pos,
                })
            }
            Instr::SecAssert { var, expected, pos } => {
                self.ty(var, *pos)?;
                Ok(Instr::SecAssert {
                    var: var.clone(),
                    expected: *expected,
                    pos: *pos,
                })
            }
            Instr::Report { message, pos } => Ok(Instr::Report {
                message: message.clone(),
                pos: *pos,
            }),
            Instr::Assign {
                kind,
                lhs,
                rhs,
                pos,
                ..
            } => {
                if let Lval::Var(name, Offs::None) = lhs {
                    if self.ty(name, *pos)?.is_array() {
                        return Err(FrontendError::new(
                            format!("whole-array assignment to `{name}` is unsupported"),
                            *pos,
                        ));
                    }
                }
                let (lhs2, lty) = self.elab_lval(lhs, *pos)?;
                let (rhs2, rty) = self.elab_expr(rhs, *pos)?;
                if lty != rty {
                    return Err(FrontendError::new(
                        format!("assignment type mismatch: target is {lty}, value is {rty}"),
                        *pos,
                    ));
                }
                if *kind == AssignKind::Join && lty != ObjType::Int {
                    return Err(FrontendError::new("`|=` requires integer operands", *pos));
                }
                Ok(Instr::Assign {
                    id: StmtId(0),
                    kind: *kind,
                    array_elem: false,
                    lhs: lhs2,
                    rhs: rhs2,
                    pos: *pos,
                })
            }
        }
    }

    /// One fixpoint pass marking pointer variables (and pointer arrays) that
    /// may hold array-element pointers. Returns true if anything changed.
    fn may_elem_pass(&mut self, i: &Instr) -> bool {
        match i {
            Instr::Assign { lhs, rhs, .. } => {
                let slot = match lhs {
                    Lval::Var(name, _) if self.slot_is_pointer(name) => Some(name.clone()),
                    Lval::Deref(_) => {
                        // write through a pointer-to-pointer: conservatively
                        // poison every pointer slot
                        if self.lhs_stores_pointer(lhs) {
                            let mut changed = false;
                            let keys: Vec<String> = self.may_elem.keys().cloned().collect();
                            for k in keys {
                                changed |= !std::mem::replace(
                                    self.may_elem.get_mut(&k).unwrap(),
                                    true,
                                );
                            }
                            return changed;
                        }
                        None
                    }
                    _ => None,
                };
                if let Some(name) = slot {
                    if self.rhs_may_elem(rhs) && !self.may_elem[&name] {
                        self.may_elem.insert(name, true);
                        return true;
                    }
                }
                false
            }
            Instr::Seq(a, b) => {
                let ca = self.may_elem_pass(a);
                let cb = self.may_elem_pass(b);
                ca || cb
            }
            Instr::If {
                then_branch,
                else_branch,
                ..
            } => {
                let ca = self.may_elem_pass(then_branch);
                let cb = self.may_elem_pass(else_branch);
                ca || cb
            }
            Instr::While { body, .. } => self.may_elem_pass(body),
            _ => false,
        }
    }

    fn slot_is_pointer(&self, name: &str) -> bool {
        match self.types.get(name) {
            Some(ObjType::Ptr(_)) => true,
            Some(ObjType::Array(elem, _)) => elem.is_ptr(),
            _ => false,
        }
    }

    /// Does this deref-lval store a pointer value (i.e. the pointee is
    /// itself a pointer)?
    fn lhs_stores_pointer(&self, lhs: &Lval) -> bool {
        if let Lval::Deref(e) = lhs {
            matches!(self.expr_type_quick(e), Some(ObjType::Ptr(inner)) if inner.is_ptr())
        } else {
            false
        }
    }

    /// Best-effort surface typing used only by the may-elem pass; returns
    /// `None` on anything ill-formed (full typing reports those).
    fn expr_type_quick(&self, e: &Expr) -> Option<ObjType> {
        match e {
            Expr::Const(_) => Some(ObjType::Int),
            Expr::Lval(lv) => match lv.as_ref() {
                Lval::Var(name, Offs::None) => self.types.get(name).cloned(),
                Lval::Var(name, Offs::Index(_)) => match self.types.get(name)? {
                    ObjType::Array(elem, _) => Some((**elem).clone()),
                    _ => None,
                },
                Lval::Deref(inner) => match self.expr_type_quick(inner)? {
                    ObjType::Ptr(t) => Some(*t),
                    _ => None,
                },
            },
            Expr::AddrOf(lv) => {
                let t = match lv.as_ref() {
                    Lval::Var(name, Offs::None) => self.types.get(name)?.clone(),
                    Lval::Var(name, Offs::Index(_)) => match self.types.get(name)? {
                        ObjType::Array(elem, _) => (**elem).clone(),
                        _ => return None,
                    },
                    Lval::Deref(inner) => match self.expr_type_quick(inner)? {
                        ObjType::Ptr(t) => *t,
                        _ => return None,
                    },
                };
                Some(ObjType::Ptr(Box::new(t)))
            }
            Expr::BinOp(BinOpKind::Add, a, _) => {
                let ta = self.expr_type_quick(a)?;
                if ta.is_ptr() {
                    Some(ta)
                } else {
                    Some(ObjType::Int)
                }
            }
            Expr::BinOp(..) => Some(ObjType::Int),
            Expr::PtrAdd(a, _) => self.expr_type_quick(a),
        }
    }

    /// May this pointer-valued rvalue evaluate to an array-element pointer?
    fn rhs_may_elem(&self, e: &Expr) -> bool {
        match e {
            Expr::AddrOf(lv) => match lv.as_ref() {
                Lval::Var(_, Offs::Index(_)) => true,
                Lval::Var(_, Offs::None) => false,
                Lval::Deref(inner) => self.rhs_may_elem(inner),
            },
            Expr::Lval(lv) => match lv.as_ref() {
                Lval::Var(name, _) => *self.may_elem.get(name).unwrap_or(&false),
                Lval::Deref(_) => true,
            },
            Expr::PtrAdd(..) => true,
            Expr::BinOp(BinOpKind::Add, a, _) => {
                matches!(self.expr_type_quick(a), Some(t) if t.is_ptr())
            }
            _ => false,
        }
    }

    /// Marks deref-target assignments as array-element writes where the
    /// pointer may carry an element pointer, and numbers assignments in
    /// pre-order.
    fn classify(&mut self, i: Instr) -> Instr {
        match i {
            Instr::Assign {
                kind,
                lhs,
                rhs,
                pos,
                ..
            } => {
                let array_elem = match &lhs {
                    Lval::Var(_, Offs::Index(_)) => true,
                    Lval::Var(_, Offs::None) => false,
                    Lval::Deref(e) => self.deref_may_elem(e),
                };
                let id = StmtId(self.next_id);
                self.next_id += 1;
                Instr::Assign {
                    id,
                    kind,
                    array_elem,
                    lhs,
                    rhs,
                    pos,
                }
            }
            Instr::Seq(a, b) => {
                let a = self.classify(*a);
                let b = self.classify(*b);
                Instr::Seq(Box::new(a), Box::new(b))
            }
            Instr::If {
                cond,
                then_branch,
                else_branch,
                pos,
            } => {
                let t = self.classify(*then_branch);
                let e = self.classify(*else_branch);
                Instr::If {
                    cond,
                    then_branch: Box::new(t),
                    else_branch: Box::new(e),
                    pos,
                }
            }
            Instr::While { cond, body, pos } => {
                let b = self.classify(*body);
                Instr::While {
                    cond,
                    body: Box::new(b),
                    pos,
                }
            }
            other => other,
        }
    }

    /// Does dereferencing this pointer expression possibly address an array
    /// element?
    fn deref_may_elem(&self, e: &Expr) -> bool {
        match e {
            Expr::Lval(lv) => match lv.as_ref() {
                Lval::Var(name, _) => *self.may_elem.get(name).unwrap_or(&false),
                Lval::Deref(_) => true,
            },
            Expr::AddrOf(lv) => matches!(lv.as_ref(), Lval::Var(_, Offs::Index(_))),
            Expr::PtrAdd(..) => true,
            _ => false,
        }
    }
}

/// Elaborates a parsed program: allocates one block per declaration, builds
/// the initial stores from initializers and annotations, types the body, and
/// classifies every assignment.
pub fn elaborate(p: &SourceProgram) -> Result<TypedProgram, FrontendError> {
    let mut env = Environment::new();
    let mut blocks = Vec::new();
    let mut labels = Vec::new();
    let mut types = BTreeMap::new();
    let mut decls = Vec::new();

    for d in &p.decls {
        env.declare(&d.name).ok_or_else(|| {
            FrontendError::new(format!("duplicate declaration of `{}`", d.name), d.pos)
        })?;
        let (block_val, norm_init) = initial_block(d)?;
        blocks.push(block_val);
        labels.push(d.annot.unwrap_or(Label::BOTTOM));
        types.insert(d.name.clone(), d.ty.clone());
        decls.push(Decl {
            init: norm_init,
            ..d.clone()
        });
    }

    let mut el = Elaborator {
        decls: &p.decls,
        may_elem: types
            .iter()
            .filter(|(_, t)| match t {
                ObjType::Ptr(_) => true,
                ObjType::Array(elem, _) => elem.is_ptr(),
                _ => false,
            })
            .map(|(n, _)| (n.clone(), false))
            .collect(),
        types,
        next_id: 0,
    };
    let _ = el.decls; // declarations are consulted through `types`

    let typed = el.elab_stmt(&p.body)?;
    while el.may_elem_pass(&typed) {}
    let body = el.classify(typed);

    Ok(TypedProgram {
        env,
        decls,
        var_types: el.types,
        initial_memory: Memory::new(blocks),
        initial_labels: LabelMemory::new(labels),
        body,
    })
}

/// Initial contents for one declaration, plus the normalized initializer
/// (defaults made explicit) used when emitting the program back to source.
fn initial_block(d: &Decl) -> Result<(BlockVal, Option<DeclInit>), FrontendError> {
    match (&d.ty, &d.init) {
        (ObjType::Int, None) => Ok((BlockVal::Scalar(Val::Num(0)), Some(DeclInit::Scalar(0)))),
        (ObjType::Int, Some(DeclInit::Scalar(n))) => {
            Ok((BlockVal::Scalar(Val::Num(*n)), Some(DeclInit::Scalar(*n))))
        }
        (ObjType::Int, Some(DeclInit::Array(_))) => Err(FrontendError::new(
            format!("brace initializer on scalar `{}`", d.name),
            d.pos,
        )),
        (ObjType::Ptr(_), None) => Ok((BlockVal::Scalar(Val::Uninit), None)),
        (ObjType::Ptr(_), Some(_)) => Err(FrontendError::new(
            format!("pointer initializers are unsupported (`{}`)", d.name),
            d.pos,
        )),
        (ObjType::Array(elem, len), init) => match (elem.as_ref(), init) {
            (ObjType::Int, None) => Ok((
                BlockVal::Array(vec![Val::Num(0); *len]),
                Some(DeclInit::Array(vec![0; *len])),
            )),
            (ObjType::Int, Some(DeclInit::Array(vals))) => {
                if vals.len() != *len {
                    return Err(FrontendError::new(
                        format!(
                            "initializer for `{}` has {} elements, expected {}",
                            d.name,
                            vals.len(),
                            len
                        ),
                        d.pos,
                    ));
                }
                Ok((
                    BlockVal::Array(vals.iter().map(|n| Val::Num(*n)).collect()),
                    Some(DeclInit::Array(vals.clone())),
                ))
            }
            (ObjType::Ptr(_), None) => Ok((BlockVal::Array(vec![Val::Uninit; *len]), None)),
            (ObjType::Ptr(_), Some(_)) => Err(FrontendError::new(
                format!("pointer array initializers are unsupported (`{}`)", d.name),
                d.pos,
            )),
            _ => Err(FrontendError::new(
                format!("unsupported array element type for `{}`", d.name),
                d.pos,
            )),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{BinOpKind, Expr, Instr, Lval, Offs};

    fn parse_ok(src: &str) -> SourceProgram {
        parse(src).unwrap_or_else(|e| panic!("parse failed: {e}\nsource:\n{src}"))
    }

    fn elab_ok(src: &str) -> TypedProgram {
        elaborate(&parse_ok(src)).unwrap_or_else(|e| panic!("elaborate failed: {e}\n{src}"))
    }

    #[test]
    fn smallest_program() {
        let p = parse_ok("int x = 0; x = 1;");
        assert_eq!(p.decls.len(), 1);
        assert!(matches!(p.body, Instr::Assign { .. }));
    }

    #[test]
    fn pointer_flow_example_shape() {
        let p = parse_ok(
            "int x = 0; int y = 0; int secret = 1; int *p;\n\
             if (secret) { p = &x; } else { p = &y; } *p = 1;",
        );
        // body: Seq(If, Assign)
        let Instr::Seq(first, second) = p.body else {
            panic!("expected sequence");
        };
        let Instr::If {
            then_branch,
            else_branch,
            ..
        } = *first
        else {
            panic!("expected if");
        };
        let addr_assign = |i: &Instr| {
            matches!(
                i,
                Instr::Assign {
                    rhs: Expr::AddrOf(_),
                    ..
                }
            )
        };
        assert!(addr_assign(&then_branch));
        assert!(addr_assign(&else_branch));
        assert!(matches!(
            *second,
            Instr::Assign {
                lhs: Lval::Deref(_),
                ..
            }
        ));
    }

    #[test]
    fn array_flow_example_shape() {
        let p = elab_ok("int a[2]; int secret = 1 /*@ private */; a[secret & 1] = 1;");
        let Instr::Assign {
            array_elem, lhs, ..
        } = &p.body
        else {
            panic!("expected assignment");
        };
        assert!(array_elem);
        let Lval::Var(name, Offs::Index(idx)) = lhs else {
            panic!("expected indexed lval");
        };
        assert_eq!(name, "a");
        assert!(matches!(idx.as_ref(), Expr::BinOp(BinOpKind::BitAnd, ..)));
    }

    #[test]
    fn annotations_build_initial_labels() {
        let p = elab_ok(
            "int secret = 5 /*@ private */; int x = 0; int y = 0; int z = 0;\n\
             x = secret; z = x + y;",
        );
        let b = |n: &str| p.env.block_of(n).unwrap();
        assert_eq!(p.initial_labels.get(b("secret")), Label::PRIVATE);
        assert_eq!(p.initial_labels.get(b("x")), Label::BOTTOM);
        assert_eq!(p.initial_labels.get(b("y")), Label::BOTTOM);
        assert_eq!(p.initial_labels.get(b("z")), Label::BOTTOM);
    }

    #[test]
    fn trailing_annotation_after_semicolon() {
        let p = elab_ok("int secret = 5; /*@ private */\nint x = 0; x = secret;");
        let b = p.env.block_of("secret").unwrap();
        assert_eq!(p.initial_labels.get(b), Label::PRIVATE);
    }

    #[test]
    fn scalar_indexed_is_a_type_error() {
        let p = parse_ok("int a = 0; a[0] = 1;");
        assert!(elaborate(&p).is_err());
    }

    #[test]
    fn whole_array_assignment_rejected() {
        let p = parse_ok("int a[3]; a = 5;");
        let err = elaborate(&p).unwrap_err();
        assert!(err.msg.contains("whole-array"), "{err}");
    }

    #[test]
    fn array_read_without_index_rejected() {
        let p = parse_ok("int a[3]; int x = 0; x = a;");
        assert!(elaborate(&p).is_err());
    }

    #[test]
    fn num_ptr_mixing_rejected() {
        let p = parse_ok("int *p; int x = 0; x = p;");
        assert!(elaborate(&p).is_err());
        let p = parse_ok("int *p; int x = 0; x = p + 1;");
        assert!(elaborate(&p).is_err());
        let p = parse_ok("int *p; int x = 0; x = x * p;");
        assert!(elaborate(&p).is_err());
    }

    #[test]
    fn pointer_plus_becomes_ptr_add() {
        let p = elab_ok("int a[4]; int *p; p = &a[0]; p = p + 2; p += 1; p++;");
        let mut ptr_adds = 0;
        fn count(i: &Instr, n: &mut u32) {
            match i {
                Instr::Assign {
                    rhs: Expr::PtrAdd(..),
                    ..
                } => *n += 1,
                Instr::Seq(a, b) => {
                    count(a, n);
                    count(b, n);
                }
                _ => {}
            }
        }
        count(&p.body, &mut ptr_adds);
        assert_eq!(ptr_adds, 3);
    }

    #[test]
    fn deref_classification_scalar_vs_elem() {
        let p = elab_ok("int x = 0; int *p; p = &x; *p = 1;");
        let ids: Vec<bool> = collect_array_elem_flags(&p.body);
        assert_eq!(ids, vec![false, false]);

        let p = elab_ok("int a[4]; int *p; p = &a[1]; *p = 1;");
        let ids = collect_array_elem_flags(&p.body);
        assert_eq!(ids, vec![false, true]);

        // element-ness propagates through pointer copies
        let p = elab_ok("int a[4]; int *p; int *q; p = &a[1]; q = p; *q = 1;");
        let ids = collect_array_elem_flags(&p.body);
        assert_eq!(ids, vec![false, false, true]);
    }

    fn collect_array_elem_flags(i: &Instr) -> Vec<bool> {
        let mut out = Vec::new();
        fn walk(i: &Instr, out: &mut Vec<bool>) {
            match i {
                Instr::Assign { array_elem, .. } => out.push(*array_elem),
                Instr::Seq(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Instr::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, out);
                    walk(else_branch, out);
                }
                Instr::While { body, .. } => walk(body, out),
                _ => {}
            }
        }
        walk(i, &mut out);
        out
    }

    #[test]
    fn partial_array_initializer_rejected() {
        let p = parse_ok("int a[3] = { 1, 2 };");
        assert!(elaborate(&p).is_err());
    }

    #[test]
    fn pointer_initializer_rejected() {
        assert!(parse("int *p = 0;").map(|p| elaborate(&p)).unwrap().is_err());
    }

    #[test]
    fn duplicate_declaration_rejected() {
        assert!(parse("int x = 0; int x = 1;").is_err());
    }

    #[test]
    fn unknown_annotation_rejected() {
        assert!(parse("int x = 0 /*@ classified */;").is_err());
    }

    #[test]
    fn assert_annotation_parses() {
        let p = parse_ok("int x = 0;\n//@ assert security_status(x) == public;\nx = 1;");
        let Instr::Seq(first, _) = p.body else {
            panic!()
        };
        assert!(matches!(
            *first,
            Instr::SecAssert {
                expected: Label::BOTTOM,
                ..
            }
        ));
    }

    #[test]
    fn elaboration_is_deterministic() {
        let src = "int x = 0; int y = 1 /*@ private */; int a[2] = { 3, 4 }; x = y; a[0] = x;";
        let p1 = elab_ok(src);
        let p2 = elab_ok(src);
        assert_eq!(p1, p2);
    }

    #[test]
    fn assignment_ids_are_preorder() {
        let p = elab_ok(
            "int x = 0; int c = 2;\n\
             while (c) { c = c - 1; if (x) { x = 0; } else { x = 1; } }",
        );
        let ids: Vec<u32> = p.assignment_ids().iter().map(|i| i.0).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }
}
