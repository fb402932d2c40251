//! Abstract syntax for the mini-C dialect: lvalues, expressions, offsets and
//! statements, plus declared object types.

use std::fmt;

use crate::label::Label;

/// Source position (1-based). Synthetic nodes use line 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Pos {
        Pos { line, col }
    }

    pub fn synthetic() -> Pos {
        Pos::default()
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Identity of one assignment occurrence. Assigned in pre-order during
/// elaboration; keys the alias function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StmtId(pub u32);

/// Declared type of a variable. Array elements are never themselves arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjType {
    Int,
    Ptr(Box<ObjType>),
    Array(Box<ObjType>, usize),
}

impl ObjType {
    pub fn is_array(&self) -> bool {
        matches!(self, ObjType::Array(..))
    }

    pub fn is_ptr(&self) -> bool {
        matches!(self, ObjType::Ptr(_))
    }

    /// Number of times a value of this type can be dereferenced.
    pub fn ptr_depth(&self) -> usize {
        match self {
            ObjType::Int => 0,
            ObjType::Ptr(t) => 1 + t.ptr_depth(),
            ObjType::Array(t, _) => t.ptr_depth(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
    BitOr,
    BitAnd,
    Eq,
    Lt,
}

impl BinOpKind {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOpKind::Add => "+",
            BinOpKind::Sub => "-",
            BinOpKind::Mul => "*",
            BinOpKind::BitOr => "|",
            BinOpKind::BitAnd => "&",
            BinOpKind::Eq => "==",
            BinOpKind::Lt => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Offs {
    None,
    Index(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lval {
    Var(String, Offs),
    Deref(Box<Expr>),
}

impl Lval {
    pub fn var(name: &str) -> Lval {
        Lval::Var(name.to_string(), Offs::None)
    }

    pub fn index(name: &str, idx: Expr) -> Lval {
        Lval::Var(name.to_string(), Offs::Index(Box::new(idx)))
    }

    pub fn deref(e: Expr) -> Lval {
        Lval::Deref(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Lval(Box<Lval>),
    AddrOf(Box<Lval>),
    BinOp(BinOpKind, Box<Expr>, Box<Expr>),
    /// Pointer plus integer; shifts the offset within the pointee's block.
    PtrAdd(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Lval(Box::new(Lval::var(name)))
    }

    pub fn lval(lv: Lval) -> Expr {
        Expr::Lval(Box::new(lv))
    }

    pub fn addr_of(lv: Lval) -> Expr {
        Expr::AddrOf(Box::new(lv))
    }

    pub fn bin(op: BinOpKind, a: Expr, b: Expr) -> Expr {
        Expr::BinOp(op, Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOpKind::BitOr, a, b)
    }
}

/// How an assignment combines the right-hand side with the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignKind {
    /// `lhs = rhs`
    Set,
    /// `lhs |= rhs` (weak update: join into the old value)
    Join,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Skip,
    Assign {
        id: StmtId,
        kind: AssignKind,
        /// True once elaboration has classified the target as an array
        /// element location; scalar otherwise.
        array_elem: bool,
        lhs: Lval,
        rhs: Expr,
        pos: Pos,
    },
    Seq(Box<Instr>, Box<Instr>),
    If {
        cond: Expr,
        then_branch: Box<Instr>,
        else_branch: Box<Instr>,
        pos: Pos,
    },
    While {
        cond: Expr,
        body: Box<Instr>,
        pos: Pos,
    },
    /// `//@ assert security_status(var) == <label>;`
    SecAssert {
        var: String,
        expected: Label,
        pos: Pos,
    },
    /// `report_violation("...");` — runtime policy-violation report emitted
    /// by the instrumenter.
    Report {
        message: String,
        pos: Pos,
    },
}

impl Instr {
    /// Right-nested sequence of `stmts`; empty lists become `Skip`.
    pub fn seq(stmts: Vec<Instr>) -> Instr {
        let mut it = stmts.into_iter().rev();
        match it.next() {
            None => Instr::Skip,
            Some(last) => it.fold(last, |acc, s| Instr::Seq(Box::new(s), Box::new(acc))),
        }
    }

    /// Copy with positions and statement ids zeroed, for structural
    /// comparison across parse/print round trips.
    pub fn strip_meta(&self) -> Instr {
        match self {
            Instr::Skip => Instr::Skip,
            Instr::Assign {
                kind,
                array_elem,
                lhs,
                rhs,
                ..
            } => Instr::Assign {
                id: StmtId(0),
                kind: *kind,
                array_elem: *array_elem,
                lhs: lhs.clone(),
                rhs: rhs.clone(),
                pos: Pos::synthetic(),
            },
            Instr::Seq(a, b) => Instr::Seq(Box::new(a.strip_meta()), Box::new(b.strip_meta())),
            Instr::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => Instr::If {
                cond: cond.clone(),
                then_branch: Box::new(then_branch.strip_meta()),
                else_branch: Box::new(else_branch.strip_meta()),
                pos: Pos::synthetic(),
            },
            Instr::While { cond, body, .. } => Instr::While {
                cond: cond.clone(),
                body: Box::new(body.strip_meta()),
                pos: Pos::synthetic(),
            },
            Instr::SecAssert { var, expected, pos: _ } => Instr::SecAssert {
                var: var.clone(),
                expected: *expected,
                pos: Pos::synthetic(),
            },
            Instr::Report { message, pos: _ } => Instr::Report {
                message: message.clone(),
                pos: Pos::synthetic(),
            },
        }
    }
}

/// Declaration initializer as written in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclInit {
    Scalar(i64),
    Array(Vec<i64>),
}

/// One variable declaration, with its optional security annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub ty: ObjType,
    pub init: Option<DeclInit>,
    pub annot: Option<Label>,
    pub pos: Pos,
}

impl fmt::Display for ObjType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // C-like rendering of the restricted type grammar
        match self {
            ObjType::Int => write!(f, "int"),
            ObjType::Ptr(t) => {
                let stars = "*".repeat(self.ptr_depth());
                let mut base = t.as_ref();
                while let ObjType::Ptr(inner) = base {
                    base = inner;
                }
                match base {
                    ObjType::Int => write!(f, "int {stars}"),
                    other => write!(f, "{other} {stars}"),
                }
            }
            ObjType::Array(t, len) => write!(f, "{t}[{len}]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_of_list_is_right_nested() {
        let s = Instr::seq(vec![Instr::Skip, Instr::Skip, Instr::Skip]);
        match s {
            Instr::Seq(a, rest) => {
                assert_eq!(*a, Instr::Skip);
                assert!(matches!(*rest, Instr::Seq(..)));
            }
            other => panic!("expected Seq, got {other:?}"),
        }
        assert_eq!(Instr::seq(vec![]), Instr::Skip);
    }

    #[test]
    fn ptr_depth() {
        let t = ObjType::Ptr(Box::new(ObjType::Ptr(Box::new(ObjType::Int))));
        assert_eq!(t.ptr_depth(), 2);
        let a = ObjType::Array(Box::new(ObjType::Ptr(Box::new(ObjType::Int))), 10);
        assert_eq!(a.ptr_depth(), 1);
    }
}
