//! Flow-insensitive, inclusion-based may-point-to analysis, and a dynamic
//! admissibility check that validates an alias function against a concrete
//! run.
//!
//! The alias function maps each assignment occurrence to the set of blocks
//! its left-hand side may address. Direct assignments map to the singleton
//! of the variable's block; assignments through a pointer map to the
//! pointer's points-to set.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{Expr, Instr, Lval, Pos, StmtId};
use crate::frontend::TypedProgram;
use crate::interp::{exec, EvalContext, ExecError, ExecObserver, FaultKind};
use crate::label::Label;
use crate::model::{Block, BlockVal, Val};

/// May-write sets per assignment occurrence. Missing ids write nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasFunction {
    sets: BTreeMap<StmtId, BTreeSet<Block>>,
}

impl AliasFunction {
    pub fn new() -> AliasFunction {
        AliasFunction::default()
    }

    pub fn insert(&mut self, id: StmtId, blocks: BTreeSet<Block>) {
        self.sets.insert(id, blocks);
    }

    pub fn targets(&self, id: StmtId) -> &BTreeSet<Block> {
        static EMPTY: BTreeSet<Block> = BTreeSet::new();
        self.sets.get(&id).unwrap_or(&EMPTY)
    }

    pub fn iter(&self) -> impl Iterator<Item = (StmtId, &BTreeSet<Block>)> {
        self.sets.iter().map(|(id, s)| (*id, s))
    }

    /// The trivially admissible alias function: every assignment may write
    /// every block.
    pub fn top_for(p: &TypedProgram) -> AliasFunction {
        let all: BTreeSet<Block> = p.env.blocks().collect();
        let mut f = AliasFunction::new();
        for id in p.assignment_ids() {
            f.insert(id, all.clone());
        }
        f
    }
}

struct Andersen<'a> {
    p: &'a TypedProgram,
    /// block of a pointer-carrying variable -> blocks it may point into
    pts: BTreeMap<Block, BTreeSet<Block>>,
}

impl<'a> Andersen<'a> {
    fn block(&self, name: &str) -> Block {
        self.p.env.block_of(name).expect("elaborated variable")
    }

    /// Blocks a pointer-valued expression may point into.
    fn ptsv(&self, e: &Expr) -> BTreeSet<Block> {
        match e {
            Expr::AddrOf(lv) => match lv.as_ref() {
                Lval::Var(name, _) => std::iter::once(self.block(name)).collect(),
                Lval::Deref(inner) => self.deref_targets(inner),
            },
            Expr::Lval(lv) => match lv.as_ref() {
                Lval::Var(name, _) => self
                    .pts
                    .get(&self.block(name))
                    .cloned()
                    .unwrap_or_default(),
                Lval::Deref(inner) => {
                    // pointer loaded through another pointer: union over the
                    // outer pointer's targets
                    let mut out = BTreeSet::new();
                    for t in self.deref_targets(inner) {
                        if let Some(s) = self.pts.get(&t) {
                            out.extend(s.iter().copied());
                        }
                    }
                    out
                }
            },
            Expr::PtrAdd(base, _) => self.ptsv(base),
            Expr::Const(_) | Expr::BinOp(..) => BTreeSet::new(),
        }
    }

    /// Blocks addressed when dereferencing `e`.
    fn deref_targets(&self, e: &Expr) -> BTreeSet<Block> {
        self.ptsv(e)
    }

    /// One constraint pass over the body; true if any points-to set grew.
    fn pass(&mut self, i: &Instr) -> bool {
        match i {
            Instr::Assign { lhs, rhs, .. } => {
                let incoming = self.ptsv(rhs);
                if incoming.is_empty() {
                    return false;
                }
                let slots: Vec<Block> = match lhs {
                    Lval::Var(name, _) => vec![self.block(name)],
                    Lval::Deref(inner) => self.deref_targets(inner).into_iter().collect(),
                };
                let mut changed = false;
                for slot in slots {
                    let entry = self.pts.entry(slot).or_default();
                    let before = entry.len();
                    entry.extend(incoming.iter().copied());
                    changed |= entry.len() != before;
                }
                changed
            }
            Instr::Seq(a, b) => {
                let ca = self.pass(a);
                let cb = self.pass(b);
                ca || cb
            }
            Instr::If {
                then_branch,
                else_branch,
                ..
            } => {
                let ca = self.pass(then_branch);
                let cb = self.pass(else_branch);
                ca || cb
            }
            Instr::While { body, .. } => self.pass(body),
            _ => false,
        }
    }
}

/// Computes a may-write set for every assignment in the program.
///
/// Points-to sets are seeded from pointer values already present in the
/// initial memory, then grown to a fixpoint over the body's assignments,
/// ignoring control flow and offsets (block granularity).
pub fn compute_alias(p: &TypedProgram) -> AliasFunction {
    let mut a = Andersen {
        p,
        pts: BTreeMap::new(),
    };
    for b in p.env.blocks() {
        let mut seed = BTreeSet::new();
        match p.initial_memory.get(b).expect("declared block") {
            BlockVal::Scalar(Val::Ptr(loc)) => {
                seed.insert(loc.block);
            }
            BlockVal::Array(cells) => {
                for c in cells {
                    if let Val::Ptr(loc) = c {
                        seed.insert(loc.block);
                    }
                }
            }
            _ => {}
        }
        if !seed.is_empty() {
            a.pts.insert(b, seed);
        }
    }
    while a.pass(&p.body) {}

    let mut f = AliasFunction::new();
    fn assign_sets(a: &Andersen, i: &Instr, f: &mut AliasFunction) {
        match i {
            Instr::Assign { id, lhs, .. } => {
                let set = match lhs {
                    Lval::Var(name, _) => std::iter::once(a.block(name)).collect(),
                    Lval::Deref(inner) => a.deref_targets(inner),
                };
                f.insert(*id, set);
            }
            Instr::Seq(x, y) => {
                assign_sets(a, x, f);
                assign_sets(a, y, f);
            }
            Instr::If {
                then_branch,
                else_branch,
                ..
            } => {
                assign_sets(a, then_branch, f);
                assign_sets(a, else_branch, f);
            }
            Instr::While { body, .. } => assign_sets(a, body, f),
            _ => {}
        }
    }
    assign_sets(&a, &p.body, &mut f);
    f
}

/// Result of validating an alias function along one concrete run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admissibility {
    Valid,
    /// An executed assignment wrote a block outside its declared set.
    Invalid {
        id: StmtId,
        block: Block,
        pos: Pos,
    },
    Timeout,
    Fault {
        kind: FaultKind,
        pos: Pos,
    },
}

struct AdmissibilityObserver<'a> {
    alias: &'a AliasFunction,
    first_violation: Option<(StmtId, Block, Pos)>,
}

impl ExecObserver for AdmissibilityObserver<'_> {
    fn on_assign(&mut self, id: StmtId, target: Block, _written: Label, _pc: Label, pos: Pos) {
        if self.first_violation.is_none() && !self.alias.targets(id).contains(&target) {
            self.first_violation = Some((id, target, pos));
        }
    }
}

/// Executes the program once from its initial stores and checks that every
/// assignment actually reached writes only blocks inside its may-write set.
pub fn check_admissible(alias: &AliasFunction, p: &TypedProgram, fuel: u64) -> Admissibility {
    let ctx = EvalContext {
        env: &p.env,
        alias,
        mutation: None,
    };
    let mut m = p.initial_memory.clone();
    let mut g = p.initial_labels.clone();
    let mut fuel = fuel;
    let mut obs = AdmissibilityObserver {
        alias,
        first_violation: None,
    };
    let run = exec(
        &ctx,
        &p.body,
        Label::BOTTOM,
        &mut m,
        &mut g,
        &mut fuel,
        &mut obs,
    );
    if let Some((id, block, pos)) = obs.first_violation {
        return Admissibility::Invalid { id, block, pos };
    }
    match run {
        Ok(()) => Admissibility::Valid,
        Err(ExecError::Timeout) => Admissibility::Timeout,
        Err(ExecError::Fault { kind, pos }) => Admissibility::Fault { kind, pos },
    }
}

/// Convenience: a concrete run that ignores labels entirely (all-bottom
/// label memory, top alias function). Returns the final memory.
pub fn concrete_run(
    p: &TypedProgram,
    fuel: u64,
    obs: &mut dyn ExecObserver,
) -> Result<crate::model::Memory, ExecError> {
    let alias = AliasFunction::top_for(p);
    let ctx = EvalContext {
        env: &p.env,
        alias: &alias,
        mutation: None,
    };
    let mut m = p.initial_memory.clone();
    let mut g = crate::model::LabelMemory::uniform(p.env.len(), Label::BOTTOM);
    let mut fuel = fuel;
    exec(&ctx, &p.body, Label::BOTTOM, &mut m, &mut g, &mut fuel, obs)?;
    Ok(m)
}
