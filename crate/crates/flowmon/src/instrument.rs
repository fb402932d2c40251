//! Source-to-source instrumentation: inlines the label monitor into the
//! program itself.
//!
//! Every variable gets shadow status variables (see [`crate::layout`]);
//! every branching statement gets a fresh `pc_<k>` variable carrying the
//! control-context label; every assignment is followed by monitor
//! assignments that keep the status variables equal to the label memory of
//! the reference monitor. Pointer structure is mirrored: whenever `p` points
//! to `x`, `p_status_d1` points to `x`'s exact label and
//! `p_status_d1_summary` to its summary label, so writes through `*p` can be
//! tracked through `*p_status_d1` / `*p_status_d1_summary` without knowing
//! the target statically.
//!
//! Summary labels are only ever written with `|=` (weak updates); exact
//! labels get strong updates.

use thiserror::Error;

use crate::alias::AliasFunction;
use crate::ast::{
    AssignKind, BinOpKind, Decl, DeclInit, Expr, Instr, Lval, ObjType, Offs, Pos, StmtId,
};
use crate::frontend::{elaborate, FrontendError, SourceProgram, TypedProgram};
use crate::interp::collect_updates;
use crate::label::Label;
use crate::layout::{label_decls, LayoutError};

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("`{0}` has pointer depth {1}; depths >= 2 are not supported")]
    UnsupportedDepth(String, usize),
    #[error("variable name `{0}` is reserved for instrumentation")]
    ReservedName(String),
    #[error("instrumented program failed to elaborate: {0}")]
    Internal(#[from] FrontendError),
}

fn status0(var: &str) -> String {
    format!("{var}_status")
}

fn exact0(var: &str) -> String {
    format!("{var}_status_d0")
}

fn d1(var: &str) -> String {
    format!("{var}_status_d1")
}

fn d1_summary(var: &str) -> String {
    format!("{var}_status_d1_summary")
}

fn is_pc_name(name: &str) -> bool {
    name.strip_prefix("pc_")
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Or-joins label expressions, flattening nested `|` chains, dropping
/// zero constants and structural duplicates. The empty join is `0`.
fn join_all(parts: Vec<Expr>) -> Expr {
    fn flatten(e: Expr, out: &mut Vec<Expr>) {
        match e {
            Expr::BinOp(BinOpKind::BitOr, a, b) => {
                flatten(*a, out);
                flatten(*b, out);
            }
            Expr::Const(0) => {}
            other => {
                if !out.contains(&other) {
                    out.push(other);
                }
            }
        }
    }
    let mut terms = Vec::new();
    for p in parts {
        flatten(p, &mut terms);
    }
    let mut it = terms.into_iter();
    match it.next() {
        None => Expr::Const(0),
        Some(first) => it.fold(first, |acc, t| Expr::or(acc, t)),
    }
}

fn assign(lhs: Lval, rhs: Expr, pos: Pos) -> Instr {
    Instr::Assign {
        id: StmtId(0),
        kind: AssignKind::Set,
        array_elem: false,
        lhs,
        rhs,
        pos,
    }
}

fn weak_assign(lhs: Lval, rhs: Expr, pos: Pos) -> Instr {
    Instr::Assign {
        id: StmtId(0),
        kind: AssignKind::Join,
        array_elem: false,
        lhs,
        rhs,
        pos,
    }
}

struct Instrumenter<'a> {
    p: &'a TypedProgram,
    alias: &'a AliasFunction,
    pc_decls: Vec<Decl>,
}

impl<'a> Instrumenter<'a> {
    fn fresh_pc(&mut self, pos: Pos) -> String {
        let name = format!("pc_{}", self.pc_decls.len());
        self.pc_decls.push(Decl {
            name: name.clone(),
            ty: ObjType::Int,
            init: Some(DeclInit::Scalar(0)),
            annot: None,
            pos,
        });
        name
    }

    /// Label expression of an rvalue: joins the status variables of
    /// everything the expression reads. Reads only status variables and
    /// (for derefs) summary mirrors, never original data.
    fn lab(&self, e: &Expr) -> Expr {
        match e {
            Expr::Const(_) => Expr::Const(0),
            Expr::Lval(lv) => match lv.as_ref() {
                Lval::Var(x, Offs::None) => Expr::var(&status0(x)),
                Lval::Var(a, Offs::Index(i)) => {
                    join_all(vec![Expr::var(&status0(a)), self.lab(i)])
                }
                Lval::Deref(q) => join_all(vec![
                    self.lab(q),
                    Expr::lval(Lval::deref(self.mirror(q, true))),
                ]),
            },
            Expr::AddrOf(lv) => match lv.as_ref() {
                Lval::Var(_, Offs::None) => Expr::Const(0),
                Lval::Var(_, Offs::Index(i)) => self.lab(i),
                Lval::Deref(q) => self.lab(q),
            },
            Expr::BinOp(_, a, b) | Expr::PtrAdd(a, b) => {
                join_all(vec![self.lab(a), self.lab(b)])
            }
        }
    }

    /// Mirror of a pointer-valued expression: the corresponding label
    /// pointer (exact) or summary label pointer. Only depth-1 pointer shapes
    /// reach this.
    fn mirror(&self, e: &Expr, summary: bool) -> Expr {
        match e {
            Expr::Lval(lv) => match lv.as_ref() {
                Lval::Var(p, Offs::None) => {
                    Expr::var(&if summary { d1_summary(p) } else { d1(p) })
                }
                Lval::Var(b, Offs::Index(i)) => Expr::lval(Lval::index(
                    &if summary { d1_summary(b) } else { d1(b) },
                    (**i).clone(),
                )),
                Lval::Deref(_) => unreachable!("depth-2 pointer survived validation"),
            },
            Expr::AddrOf(lv) => match lv.as_ref() {
                Lval::Var(x, Offs::None) => Expr::addr_of(Lval::var(&status0(x))),
                Lval::Var(a, Offs::Index(i)) => {
                    if summary {
                        Expr::addr_of(Lval::var(&status0(a)))
                    } else {
                        Expr::addr_of(Lval::index(&exact0(a), (**i).clone()))
                    }
                }
                Lval::Deref(q) => self.mirror(q, summary),
            },
            Expr::PtrAdd(base, off) => {
                if summary {
                    // summary pointers are not moved by pointer arithmetic
                    self.mirror(base, true)
                } else {
                    Expr::PtrAdd(
                        Box::new(self.mirror(base, false)),
                        Box::new((**off).clone()),
                    )
                }
            }
            Expr::Const(_) | Expr::BinOp(..) => {
                unreachable!("non-pointer expression has no mirror")
            }
        }
    }

    /// Weak joins of `pc` into the status of every block the fragment may
    /// write, mirroring the monitor's untaken-path updates.
    fn collect_joins(&self, frag: &Instr, pc: &Expr, pos: Pos) -> Vec<Instr> {
        collect_updates(self.alias, frag)
            .into_iter()
            .map(|b| {
                let name = self.p.env.name_of(b);
                weak_assign(Lval::var(&status0(name)), pc.clone(), pos)
            })
            .collect()
    }

    fn stmts(&mut self, i: &Instr, pc: &Expr) -> Vec<Instr> {
        match i {
            Instr::Skip => vec![Instr::Skip],
            Instr::Seq(a, b) => {
                let mut out = self.stmts(a, pc);
                out.extend(self.stmts(b, pc));
                out
            }
            Instr::Report { .. } => vec![i.clone()],
            Instr::SecAssert { var, expected, pos } => {
                // the annotation becomes an executable check on the status
                // variable
                let cond = Expr::bin(
                    BinOpKind::Eq,
                    Expr::var(&status0(var)),
                    Expr::Const(expected.0 as i64),
                );
                vec![Instr::If {
                    cond,
                    then_branch: Box::new(Instr::Skip),
                    else_branch: Box::new(Instr::Report {
                        message: format!("security_status({var}) != {expected}"),
                        pos: *pos,
                    }),
                    pos: *pos,
                }]
            }
            Instr::Assign {
                id,
                kind,
                lhs,
                rhs,
                pos,
                ..
            } => {
                let mut out = vec![i.clone()];
                out.extend(self.assign_monitor(*id, *kind, lhs, rhs, pc, *pos));
                out
            }
            Instr::If {
                cond,
                then_branch,
                else_branch,
                pos,
            } => {
                let pc_name = self.fresh_pc(*pos);
                let pc_set = assign(
                    Lval::var(&pc_name),
                    join_all(vec![pc.clone(), self.lab(cond)]),
                    *pos,
                );
                let pc_e = Expr::var(&pc_name);
                let mut then2 = self.stmts(then_branch, &pc_e);
                then2.extend(self.collect_joins(else_branch, &pc_e, *pos));
                let mut else2 = self.stmts(else_branch, &pc_e);
                else2.extend(self.collect_joins(then_branch, &pc_e, *pos));
                vec![
                    pc_set,
                    Instr::If {
                        cond: cond.clone(),
                        then_branch: Box::new(Instr::seq(then2)),
                        else_branch: Box::new(Instr::seq(else2)),
                        pos: *pos,
                    },
                ]
            }
            Instr::While { cond, body, pos } => {
                let pc_name = self.fresh_pc(*pos);
                let pc_set = assign(
                    Lval::var(&pc_name),
                    join_all(vec![pc.clone(), self.lab(cond)]),
                    *pos,
                );
                let pc_e = Expr::var(&pc_name);
                let mut body2 = self.stmts(body, &pc_e);
                // re-raise the loop's pc with the condition label as it will
                // be seen by the next test; it only ever accumulates
                let cond_lab = self.lab(cond);
                if cond_lab != Expr::Const(0) {
                    body2.push(assign(
                        Lval::var(&pc_name),
                        join_all(vec![pc_e.clone(), cond_lab]),
                        *pos,
                    ));
                }
                let mut out = vec![
                    pc_set,
                    Instr::While {
                        cond: cond.clone(),
                        body: Box::new(Instr::seq(body2)),
                        pos: *pos,
                    },
                ];
                out.extend(self.collect_joins(body, &pc_e, *pos));
                out
            }
        }
    }

    fn assign_monitor(
        &mut self,
        id: StmtId,
        kind: AssignKind,
        lhs: &Lval,
        rhs: &Expr,
        pc: &Expr,
        pos: Pos,
    ) -> Vec<Instr> {
        let mut out = Vec::new();
        match lhs {
            Lval::Var(x, Offs::None) => {
                let mut parts = vec![self.lab(rhs)];
                if kind == AssignKind::Join {
                    parts.push(Expr::var(&status0(x)));
                }
                parts.push(pc.clone());
                out.push(assign(Lval::var(&status0(x)), join_all(parts), pos));
                if self.p.ty_of(x).is_ptr() {
                    out.push(assign(
                        Lval::var(&d1_summary(x)),
                        self.mirror(rhs, true),
                        pos,
                    ));
                    out.push(assign(Lval::var(&d1(x)), self.mirror(rhs, false), pos));
                }
            }
            Lval::Var(a, Offs::Index(i)) => {
                let mut parts = vec![self.lab(i), self.lab(rhs)];
                if kind == AssignKind::Join {
                    parts.push(Expr::var(&status0(a)));
                }
                parts.push(pc.clone());
                let s = join_all(parts);
                out.push(weak_assign(Lval::var(&status0(a)), s.clone(), pos));
                out.push(assign(Lval::index(&exact0(a), (**i).clone()), s, pos));
                let elem_is_ptr = matches!(self.p.ty_of(a), ObjType::Array(e, _) if e.is_ptr());
                if elem_is_ptr {
                    out.push(assign(
                        Lval::index(&d1_summary(a), (**i).clone()),
                        self.mirror(rhs, true),
                        pos,
                    ));
                    out.push(assign(
                        Lval::index(&d1(a), (**i).clone()),
                        self.mirror(rhs, false),
                        pos,
                    ));
                }
            }
            Lval::Deref(q) => {
                let mut parts = vec![self.lab(q), self.lab(rhs)];
                if kind == AssignKind::Join {
                    parts.push(Expr::lval(Lval::deref(self.mirror(q, true))));
                }
                parts.push(pc.clone());
                let s = join_all(parts);
                // weak summary update first, then the strong exact update:
                // for scalar targets both mirrors address the same label
                out.push(weak_assign(Lval::deref(self.mirror(q, true)), s.clone(), pos));
                out.push(assign(Lval::deref(self.mirror(q, false)), s, pos));
                let set = self.alias.targets(id);
                // a singleton may-set is covered by the updates above; with
                // several candidates every target's status must absorb the
                // pointer and context labels
                if set.len() >= 2 {
                    let s2 = join_all(vec![self.lab(q), pc.clone()]);
                    for b in set {
                        let name = self.p.env.name_of(*b);
                        out.push(weak_assign(Lval::var(&status0(name)), s2.clone(), pos));
                    }
                }
            }
        }
        out
    }
}

/// Shadow declarations for one original declaration, initialized from its
/// annotation (label-carrying scalars and arrays) or left uninitialized
/// (label pointers, mirroring the object pointer's initial state).
fn shadow_decls(d: &Decl) -> Result<Vec<Decl>, InstrumentError> {
    let lab = d.annot.unwrap_or(Label::BOTTOM).0 as i64;
    let decls = label_decls(&d.name, &d.ty).map_err(|e| match e {
        LayoutError::ReservedName(n) => InstrumentError::ReservedName(n),
    })?;
    Ok(decls
        .into_iter()
        .map(|ld| {
            let init = match &ld.shape {
                ObjType::Int => Some(DeclInit::Scalar(lab)),
                ObjType::Array(elem, len) if **elem == ObjType::Int => {
                    Some(DeclInit::Array(vec![lab; *len]))
                }
                _ => None,
            };
            Decl {
                name: ld.name,
                ty: ld.shape,
                init,
                annot: None,
                pos: d.pos,
            }
        })
        .collect())
}

/// Inlines the monitor into `p`, using `alias` for untaken-path and
/// pointer-target label updates. The result is a program in the same
/// language: running it concretely leaves every depth-0 status variable
/// equal to the monitor's final label for the corresponding original
/// variable.
pub fn instrument(p: &TypedProgram, alias: &AliasFunction) -> Result<TypedProgram, InstrumentError> {
    for (name, ty) in &p.var_types {
        let depth = ty.ptr_depth();
        if depth >= 2 {
            return Err(InstrumentError::UnsupportedDepth(name.clone(), depth));
        }
        if name.contains("_status") || is_pc_name(name) {
            return Err(InstrumentError::ReservedName(name.clone()));
        }
    }
    let mut ins = Instrumenter {
        p,
        alias,
        pc_decls: Vec::new(),
    };
    let body = Instr::seq(ins.stmts(&p.body, &Expr::Const(0)));
    let mut decls = Vec::new();
    for d in &p.decls {
        decls.push(d.clone());
        decls.extend(shadow_decls(d)?);
    }
    decls.extend(ins.pc_decls);
    Ok(elaborate(&SourceProgram { decls, body })?)
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

// precedence levels, matching the parser
fn bin_level(op: BinOpKind) -> u8 {
    match op {
        BinOpKind::BitOr => 1,
        BinOpKind::BitAnd => 2,
        BinOpKind::Eq => 3,
        BinOpKind::Lt => 4,
        BinOpKind::Add | BinOpKind::Sub => 5,
        BinOpKind::Mul => 6,
    }
}

fn fmt_expr(e: &Expr, min: u8, out: &mut String) {
    match e {
        Expr::Const(n) => out.push_str(&n.to_string()),
        Expr::Lval(lv) => fmt_lval(lv, out),
        Expr::AddrOf(lv) => {
            out.push('&');
            fmt_lval(lv, out);
        }
        Expr::BinOp(op, a, b) => {
            let level = bin_level(*op);
            let parens = level < min;
            if parens {
                out.push('(');
            }
            fmt_expr(a, level, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            fmt_expr(b, level + 1, out);
            if parens {
                out.push(')');
            }
        }
        Expr::PtrAdd(a, b) => {
            let parens = 5 < min;
            if parens {
                out.push('(');
            }
            fmt_expr(a, 5, out);
            out.push_str(" + ");
            fmt_expr(b, 6, out);
            if parens {
                out.push(')');
            }
        }
    }
}

fn fmt_lval(lv: &Lval, out: &mut String) {
    match lv {
        Lval::Var(name, Offs::None) => out.push_str(name),
        Lval::Var(name, Offs::Index(i)) => {
            out.push_str(name);
            out.push('[');
            fmt_expr(i, 0, out);
            out.push(']');
        }
        Lval::Deref(e) => {
            out.push('*');
            fmt_expr(e, 7, out);
        }
    }
}

#[cfg(test)]
fn expr_string(e: &Expr) -> String {
    let mut s = String::new();
    fmt_expr(e, 0, &mut s);
    s
}

/// `lhs = lhs + e` prints as `lhs += e` when the left-hand side is a plain
/// variable.
fn compound_rhs<'a>(lhs: &Lval, rhs: &'a Expr) -> Option<&'a Expr> {
    if !matches!(lhs, Lval::Var(_, Offs::None)) {
        return None;
    }
    match rhs {
        Expr::BinOp(BinOpKind::Add, a, b) | Expr::PtrAdd(a, b) => match a.as_ref() {
            Expr::Lval(lv) if lv.as_ref() == lhs => Some(b),
            _ => None,
        },
        _ => None,
    }
}

fn fmt_instr(i: &Instr, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    match i {
        Instr::Skip => {
            out.push_str(&pad);
            out.push_str(";\n");
        }
        Instr::Seq(a, b) => {
            fmt_instr(a, indent, out);
            fmt_instr(b, indent, out);
        }
        Instr::Assign { kind, lhs, rhs, .. } => {
            out.push_str(&pad);
            fmt_lval(lhs, out);
            match kind {
                AssignKind::Join => {
                    out.push_str(" |= ");
                    fmt_expr(rhs, 0, out);
                }
                AssignKind::Set => {
                    if let Some(inc) = compound_rhs(lhs, rhs) {
                        out.push_str(" += ");
                        fmt_expr(inc, 0, out);
                    } else {
                        out.push_str(" = ");
                        fmt_expr(rhs, 0, out);
                    }
                }
            }
            out.push_str(";\n");
        }
        Instr::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            out.push_str(&pad);
            out.push_str("if (");
            fmt_expr(cond, 0, out);
            out.push_str(") {\n");
            fmt_instr(then_branch, indent + 1, out);
            out.push_str(&pad);
            out.push('}');
            if **else_branch == Instr::Skip {
                out.push('\n');
            } else {
                out.push_str(" else {\n");
                fmt_instr(else_branch, indent + 1, out);
                out.push_str(&pad);
                out.push_str("}\n");
            }
        }
        Instr::While { cond, body, .. } => {
            out.push_str(&pad);
            out.push_str("while (");
            fmt_expr(cond, 0, out);
            out.push_str(") {\n");
            fmt_instr(body, indent + 1, out);
            out.push_str(&pad);
            out.push_str("}\n");
        }
        Instr::SecAssert { var, expected, .. } => {
            out.push_str(&pad);
            out.push_str(&format!(
                "//@ assert security_status({var}) == {expected};\n"
            ));
        }
        Instr::Report { message, .. } => {
            out.push_str(&pad);
            out.push_str(&format!("report_violation(\"{message}\");\n"));
        }
    }
}

fn fmt_decl(d: &Decl, out: &mut String) {
    let annot = match d.annot {
        Some(Label::BOTTOM) => " /*@ public */",
        Some(Label::PRIVATE) => " /*@ private */",
        _ => "",
    };
    match &d.ty {
        ObjType::Int => match &d.init {
            Some(DeclInit::Scalar(v)) => {
                out.push_str(&format!("int {} = {}{annot};\n", d.name, v))
            }
            _ => out.push_str(&format!("int {}{annot};\n", d.name)),
        },
        ObjType::Ptr(_) => {
            let stars = "*".repeat(d.ty.ptr_depth());
            out.push_str(&format!("int {stars}{}{annot};\n", d.name));
        }
        ObjType::Array(elem, len) => {
            let stars = "*".repeat(elem.ptr_depth());
            match &d.init {
                Some(DeclInit::Array(vals)) => {
                    let list = vals
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(", ");
                    out.push_str(&format!(
                        "int {stars}{}[{len}] = {{ {list} }}{annot};\n",
                        d.name
                    ));
                }
                _ => out.push_str(&format!("int {stars}{}[{len}]{annot};\n", d.name)),
            }
        }
    }
}

/// Deterministic pretty-printer; parsing the output back reproduces the
/// program structurally.
pub fn emit(p: &TypedProgram) -> String {
    let mut out = String::new();
    for d in &p.decls {
        fmt_decl(d, &mut out);
    }
    if p.body != Instr::Skip {
        fmt_instr(&p.body, 0, &mut out);
    }
    out
}

pub const DEFAULT_C_PREAMBLE: &str = "\
#include <stdio.h>
#include <stdlib.h>

static void report_violation(const char *msg)
{
    fprintf(stderr, \"policy violation: %s\\n\", msg);
    exit(1);
}
";

/// Renders the program as a compilable C99 translation unit: the preamble
/// (which must define `report_violation`), then everything wrapped in
/// `main`.
pub fn emit_c(p: &TypedProgram, preamble: &str) -> String {
    let mut body = String::new();
    for d in &p.decls {
        let mut line = String::new();
        fmt_decl(d, &mut line);
        body.push_str("    ");
        body.push_str(&line);
    }
    body.push('\n');
    if p.body != Instr::Skip {
        fmt_instr(&p.body, 1, &mut body);
    }
    format!("{preamble}\nint main(void)\n{{\n{body}    return 0;\n}}\n")
}
