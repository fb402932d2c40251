//! Randomized differential testing of the monitor and the instrumenter.
//!
//! Three check families:
//! * soundness — run a generated program from two stores that agree on all
//!   public blocks and check that the final stores still agree on
//!   everything the final label memory calls public, and that the second
//!   run's labels are less restrictive;
//! * agreement — run the monitor and, separately, the instrumented program
//!   concretely, and check that every status variable ends up equal to the
//!   monitor's label (and that instrumentation didn't disturb the original
//!   variables);
//! * lemma — evaluate one random expression in two related
//!   (memory, label-memory) configurations and check that a public result
//!   is identical in both, with a smaller-or-equal label in the second.
//!
//! Generation is type-directed, so every generated program elaborates, all
//! array indexing is masked in-bounds, pointers are initialized before use,
//! and loops count down dedicated counters — faults and timeouts are rare
//! and are discarded (counted) rather than treated as failures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alias::{compute_alias, AliasFunction};
use crate::ast::{
    AssignKind, BinOpKind, Decl, DeclInit, Expr, Instr, Lval, ObjType, Pos, StmtId,
};
use crate::frontend::{elaborate, SourceProgram, TypedProgram};
use crate::instrument::{emit, instrument};
use crate::interp::{
    collect_updates, eval_expr, exec, update, EvalContext, ExecError, ExecObserver, Mutation,
    NoopObserver,
};
use crate::label::Label;
use crate::model::{
    less_restrictive_up_to, s_equivalent, Block, BlockVal, Environment, LabelMemory, Loc, Memory,
    Val,
};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_stmts: usize,
    pub max_expr_depth: usize,
    pub num_ints: usize,
    pub num_arrays: usize,
    pub num_ptrs: usize,
    pub num_ptr_arrays: usize,
    pub num_counters: usize,
    pub secret_fraction: f64,
    pub fuel: u64,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig {
            max_stmts: 12,
            max_expr_depth: 3,
            num_ints: 3,
            num_arrays: 2,
            num_ptrs: 2,
            num_ptr_arrays: 1,
            num_counters: 2,
            secret_fraction: 0.4,
            fuel: 4000,
        }
    }
}

/// What a generated pointer is allowed to target; fixed per pointer (and
/// per pointer array) so assignments never change a pointer's target shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    ScalarTarget,
    ElemTarget,
}

struct Gen<'a, 'r> {
    cfg: &'a GenConfig,
    rng: &'r mut ChaCha8Rng,
    ints: Vec<String>,
    counters: Vec<String>,
    arrays: Vec<(String, usize)>,
    ptrs: Vec<(String, Shape)>,
    ptr_arrays: Vec<(String, usize, Shape)>,
    counters_used: usize,
}

impl Gen<'_, '_> {
    fn pick<'x, T>(&mut self, xs: &'x [T]) -> &'x T {
        &xs[self.rng.gen_range(0..xs.len())]
    }

    /// A side-effect-free in-bounds index expression. Reads only scalar
    /// ints, so it stays valid when monitor code re-evaluates it.
    fn index_expr(&mut self, len: usize) -> Expr {
        if self.rng.gen_bool(0.5) {
            Expr::Const(self.rng.gen_range(0..len as i64))
        } else {
            let v = self.pick(&self.ints.clone()).clone();
            Expr::bin(BinOpKind::BitAnd, Expr::var(&v), Expr::Const(len as i64 - 1))
        }
    }

    /// Like `index_expr` but restricted to even indices, leaving headroom
    /// for a `+ 1` pointer increment.
    fn even_index_expr(&mut self, len: usize) -> Expr {
        let mask = (len as i64 - 1) & !1;
        if mask == 0 || self.rng.gen_bool(0.5) {
            Expr::Const(2 * self.rng.gen_range(0..len as i64 / 2))
        } else {
            let v = self.pick(&self.ints.clone()).clone();
            Expr::bin(BinOpKind::BitAnd, Expr::var(&v), Expr::Const(mask))
        }
    }

    /// An address expression producing the given target shape.
    fn addr_expr(&mut self, shape: Shape) -> Expr {
        match shape {
            Shape::ScalarTarget => {
                let v = self.pick(&self.ints.clone()).clone();
                Expr::addr_of(Lval::var(&v))
            }
            Shape::ElemTarget => {
                let (a, len) = self.pick(&self.arrays.clone()).clone();
                let i = self.even_index_expr(len);
                Expr::addr_of(Lval::index(&a, i))
            }
        }
    }

    fn int_expr(&mut self, depth: usize) -> Expr {
        let leaf = depth == 0;
        let roll = self.rng.gen_range(0..100);
        if !leaf && roll < 30 {
            let op = *self.pick(&[
                BinOpKind::Add,
                BinOpKind::Sub,
                BinOpKind::Mul,
                BinOpKind::BitOr,
                BinOpKind::BitAnd,
                BinOpKind::Eq,
                BinOpKind::Lt,
            ]);
            let a = self.int_expr(depth - 1);
            let b = self.int_expr(depth - 1);
            return Expr::bin(op, a, b);
        }
        if roll < 45 && !self.arrays.is_empty() {
            let (a, len) = self.pick(&self.arrays.clone()).clone();
            let i = self.index_expr(len);
            return Expr::lval(Lval::index(&a, i));
        }
        if roll < 55 && !self.ptrs.is_empty() {
            let (p, _) = self.pick(&self.ptrs.clone()).clone();
            return Expr::lval(Lval::deref(Expr::var(&p)));
        }
        if roll < 60 && !self.ptr_arrays.is_empty() {
            // constant index: monitor code re-evaluates it after the
            // enclosing assignment already ran, so it must not read the
            // assigned variable
            let (q, len, _) = self.pick(&self.ptr_arrays.clone()).clone();
            let i = Expr::Const(self.rng.gen_range(0..len as i64));
            return Expr::lval(Lval::deref(Expr::lval(Lval::index(&q, i))));
        }
        if roll < 80 {
            let pool: Vec<String> = self
                .ints
                .iter()
                .chain(self.counters.iter())
                .cloned()
                .collect();
            return Expr::var(self.pick(&pool).clone().as_str());
        }
        Expr::Const(self.rng.gen_range(0..8))
    }

    fn stmt(&mut self, depth: usize) -> Option<Instr> {
        let pos = Pos::synthetic();
        let ed = self.cfg.max_expr_depth;
        let roll = self.rng.gen_range(0..100);
        let assign = |kind, lhs, rhs| Instr::Assign {
            id: StmtId(0),
            kind,
            array_elem: false,
            lhs,
            rhs,
            pos,
        };
        match roll {
            0..=27 => {
                let x = self.pick(&self.ints.clone()).clone();
                let rhs = self.int_expr(ed);
                let kind = if self.rng.gen_bool(0.15) {
                    AssignKind::Join
                } else {
                    AssignKind::Set
                };
                Some(assign(kind, Lval::var(&x), rhs))
            }
            28..=39 => {
                let (a, len) = self.pick(&self.arrays.clone()).clone();
                let i = self.index_expr(len);
                let rhs = self.int_expr(ed);
                Some(assign(AssignKind::Set, Lval::index(&a, i), rhs))
            }
            40..=51 => {
                // retarget a pointer or a pointer-array cell
                if !self.ptr_arrays.is_empty() && self.rng.gen_bool(0.3) {
                    let (q, len, shape) = self.pick(&self.ptr_arrays.clone()).clone();
                    let i = self.index_expr(len);
                    let rhs = self.addr_expr(shape);
                    return Some(assign(AssignKind::Set, Lval::index(&q, i), rhs));
                }
                let (p, shape) = self.pick(&self.ptrs.clone()).clone();
                let rhs = match self.rng.gen_range(0..3) {
                    0 => self.addr_expr(shape),
                    1 => {
                        let same: Vec<String> = self
                            .ptrs
                            .iter()
                            .filter(|(_, s)| *s == shape)
                            .map(|(n, _)| n.clone())
                            .collect();
                        Expr::var(self.pick(&same).clone().as_str())
                    }
                    _ => {
                        if shape == Shape::ElemTarget {
                            Expr::bin(BinOpKind::Add, Expr::var(&p), Expr::Const(1))
                        } else {
                            self.addr_expr(shape)
                        }
                    }
                };
                Some(assign(AssignKind::Set, Lval::var(&p), rhs))
            }
            52..=63 => {
                // write through a pointer
                if !self.ptr_arrays.is_empty() && self.rng.gen_bool(0.3) {
                    // constant index, same re-evaluation constraint as reads
                    let (q, len, _) = self.pick(&self.ptr_arrays.clone()).clone();
                    let i = Expr::Const(self.rng.gen_range(0..len as i64));
                    let rhs = self.int_expr(ed);
                    return Some(assign(
                        AssignKind::Set,
                        Lval::deref(Expr::lval(Lval::index(&q, i))),
                        rhs,
                    ));
                }
                let (p, _) = self.pick(&self.ptrs.clone()).clone();
                let rhs = self.int_expr(ed);
                Some(assign(AssignKind::Set, Lval::deref(Expr::var(&p)), rhs))
            }
            64..=71 => {
                let x = self.pick(&self.ints.clone()).clone();
                let (p, _) = self.pick(&self.ptrs.clone()).clone();
                Some(assign(
                    AssignKind::Set,
                    Lval::var(&x),
                    Expr::lval(Lval::deref(Expr::var(&p))),
                ))
            }
            72..=85 if depth > 0 => {
                let cond = self.int_expr(ed);
                let then_branch = { let k = self.rng.gen_range(1..4); Instr::seq(self.stmts(k, depth - 1)) };
                let else_branch = if self.rng.gen_bool(0.5) {
                    { let k = self.rng.gen_range(0..3); Instr::seq(self.stmts(k, depth - 1)) }
                } else {
                    Instr::Skip
                };
                Some(Instr::If {
                    cond,
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                    pos,
                })
            }
            86..=93 if depth > 0 && self.counters_used < self.counters.len() => {
                // bounded loop over a dedicated countdown counter; nothing
                // else ever writes counters, so termination is structural
                let c = self.counters[self.counters_used].clone();
                self.counters_used += 1;
                let mut body = vec![assign(
                    AssignKind::Set,
                    Lval::var(&c),
                    Expr::bin(BinOpKind::Sub, Expr::var(&c), Expr::Const(1)),
                )];
                let k = self.rng.gen_range(1..4);
                body.extend(self.stmts(k, depth - 1));
                Some(Instr::While {
                    cond: Expr::var(&c),
                    body: Box::new(Instr::seq(body)),
                    pos,
                })
            }
            _ => None,
        }
    }

    fn stmts(&mut self, n: usize, depth: usize) -> Vec<Instr> {
        let mut out = Vec::new();
        for _ in 0..n {
            if let Some(s) = self.stmt(depth) {
                out.push(s);
            }
        }
        out
    }
}

/// Generates a random well-typed program. Deterministic in the rng state.
pub fn generate_program(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> TypedProgram {
    let pos = Pos::synthetic();
    let mut g = Gen {
        cfg,
        rng,
        ints: (0..cfg.num_ints).map(|i| format!("v{i}")).collect(),
        counters: (0..cfg.num_counters).map(|i| format!("c{i}")).collect(),
        arrays: Vec::new(),
        ptrs: Vec::new(),
        ptr_arrays: Vec::new(),
        counters_used: 0,
    };
    let mut decls = Vec::new();
    for name in g.ints.clone() {
        let secret = g.rng.gen_bool(cfg.secret_fraction);
        decls.push(Decl {
            name,
            ty: ObjType::Int,
            init: Some(DeclInit::Scalar(g.rng.gen_range(0..8))),
            annot: secret.then_some(Label::PRIVATE),
            pos,
        });
    }
    for name in g.counters.clone() {
        decls.push(Decl {
            name,
            ty: ObjType::Int,
            init: Some(DeclInit::Scalar(g.rng.gen_range(0..4))),
            annot: None,
            pos,
        });
    }
    for i in 0..cfg.num_arrays {
        let len = *g.pick(&[2usize, 4]);
        let name = format!("arr{i}");
        let init: Vec<i64> = (0..len).map(|_| g.rng.gen_range(0..8)).collect();
        let secret = g.rng.gen_bool(cfg.secret_fraction);
        g.arrays.push((name.clone(), len));
        decls.push(Decl {
            name,
            ty: ObjType::Array(Box::new(ObjType::Int), len),
            init: Some(DeclInit::Array(init)),
            annot: secret.then_some(Label::PRIVATE),
            pos,
        });
    }
    for i in 0..cfg.num_ptrs {
        let name = format!("p{i}");
        let shape = if cfg.num_arrays > 0 && g.rng.gen_bool(0.5) {
            Shape::ElemTarget
        } else {
            Shape::ScalarTarget
        };
        g.ptrs.push((name.clone(), shape));
        decls.push(Decl {
            name,
            ty: ObjType::Ptr(Box::new(ObjType::Int)),
            init: None,
            annot: None,
            pos,
        });
    }
    for i in 0..cfg.num_ptr_arrays {
        let name = format!("q{i}");
        let shape = if cfg.num_arrays > 0 && g.rng.gen_bool(0.5) {
            Shape::ElemTarget
        } else {
            Shape::ScalarTarget
        };
        g.ptr_arrays.push((name.clone(), 2, shape));
        decls.push(Decl {
            name,
            ty: ObjType::Array(Box::new(ObjType::Ptr(Box::new(ObjType::Int))), 2),
            init: None,
            annot: None,
            pos,
        });
    }

    // prologue: every pointer and pointer-array cell is initialized before
    // any random statement can dereference it
    let mut body = Vec::new();
    for (p, shape) in g.ptrs.clone() {
        let rhs = g.addr_expr(shape);
        body.push(Instr::Assign {
            id: StmtId(0),
            kind: AssignKind::Set,
            array_elem: false,
            lhs: Lval::var(&p),
            rhs,
            pos,
        });
    }
    for (q, len, shape) in g.ptr_arrays.clone() {
        for i in 0..len {
            let rhs = g.addr_expr(shape);
            body.push(Instr::Assign {
                id: StmtId(0),
                kind: AssignKind::Set,
                array_elem: false,
                lhs: Lval::index(&q, Expr::Const(i as i64)),
                rhs,
                pos,
            });
        }
    }
    let n = g.rng.gen_range(1..=cfg.max_stmts);
    body.extend(g.stmts(n, 2));

    let src = SourceProgram {
        decls,
        body: Instr::seq(body),
    };
    elaborate(&src).expect("generated program must elaborate")
}

/// A copy of the program's initial memory where every block whose label is
/// not below `s` has its numeric contents replaced by fresh random values.
pub fn s_equivalent_variant(
    p: &TypedProgram,
    s: Label,
    rng: &mut ChaCha8Rng,
) -> Memory {
    let mut m = p.initial_memory.clone();
    for b in p.env.blocks() {
        if p.initial_labels.get(b).leq(s) {
            continue;
        }
        match p.initial_memory.get(b).expect("declared block").clone() {
            BlockVal::Scalar(Val::Num(_)) => m.set_scalar(b, Val::Num(rng.gen_range(-8..8))),
            BlockVal::Array(cells) => {
                for (i, c) in cells.iter().enumerate() {
                    if matches!(c, Val::Num(_)) {
                        m.set_elem(b, i, Val::Num(rng.gen_range(-8..8)));
                    }
                }
            }
            _ => {}
        }
    }
    m
}

/// A failed check, with everything needed to replay it.
#[derive(Debug, Clone)]
pub struct Witness {
    pub program: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Pass,
    Timeout,
    Fault,
    Violation(Box<Witness>),
}

struct MonitorObserver<'a> {
    alias: &'a AliasFunction,
    array_blocks: BTreeSet<Block>,
    last_array_label: BTreeMap<Block, Label>,
    admissibility_violation: Option<(StmtId, Block)>,
    chain_violation: Option<Block>,
    check_invariants: bool,
}

impl<'a> MonitorObserver<'a> {
    fn new(p: &TypedProgram, alias: &'a AliasFunction, check_invariants: bool) -> MonitorObserver<'a> {
        let array_blocks = p
            .env
            .blocks()
            .filter(|b| matches!(p.initial_memory.get(*b), Ok(BlockVal::Array(_))))
            .collect();
        MonitorObserver {
            alias,
            array_blocks,
            last_array_label: BTreeMap::new(),
            admissibility_violation: None,
            chain_violation: None,
            check_invariants,
        }
    }
}

impl ExecObserver for MonitorObserver<'_> {
    fn on_assign(&mut self, id: StmtId, target: Block, written: Label, _pc: Label, _pos: Pos) {
        if !self.check_invariants {
            return;
        }
        if self.admissibility_violation.is_none() && !self.alias.targets(id).contains(&target) {
            self.admissibility_violation = Some((id, target));
        }
        if self.array_blocks.contains(&target) {
            let last = self
                .last_array_label
                .get(&target)
                .copied()
                .unwrap_or(Label::BOTTOM);
            if !last.leq(written) && self.chain_violation.is_none() {
                self.chain_violation = Some(target);
            }
            self.last_array_label.insert(target, written);
        }
    }
}

fn monitor_run(
    p: &TypedProgram,
    alias: &AliasFunction,
    m0: Memory,
    g0: LabelMemory,
    fuel: u64,
    mutation: Option<Mutation>,
    obs: &mut dyn ExecObserver,
) -> Result<(Memory, LabelMemory), ExecError> {
    let ctx = EvalContext {
        env: &p.env,
        alias,
        mutation,
    };
    let mut m = m0;
    let mut g = g0;
    let mut fuel = fuel;
    exec(&ctx, &p.body, Label::BOTTOM, &mut m, &mut g, &mut fuel, obs)?;
    Ok((m, g))
}

fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn violation(p: &TypedProgram, detail: String) -> Verdict {
    Verdict::Violation(Box::new(Witness {
        program: emit(p),
        detail,
    }))
}

/// One soundness trial: generate a program, derive a second initial memory
/// that differs only in secret blocks, run the monitor on both, and check
/// that the final label memories and final memories are related as the
/// monitor promises. `mutation` deliberately breaks the monitor to show the
/// check has teeth; invariant side-checks are disabled then, so detection
/// must come from the end-to-end comparison.
pub fn check_soundness_instance(
    cfg: &GenConfig,
    seed: u64,
    index: u64,
    mutation: Option<Mutation>,
) -> Verdict {
    let mut rng = instance_rng(seed, index);
    let p = generate_program(cfg, &mut rng);
    let alias = compute_alias(&p);
    let s = Label::BOTTOM;
    let m1 = p.initial_memory.clone();
    let m2 = s_equivalent_variant(&p, s, &mut rng);
    let g0 = p.initial_labels.clone();
    debug_assert!(s_equivalent(&g0, s, &m1, &m2));

    let check_invariants = mutation.is_none();
    let mut obs1 = MonitorObserver::new(&p, &alias, check_invariants);
    let r1 = monitor_run(&p, &alias, m1, g0.clone(), cfg.fuel, mutation, &mut obs1);
    let mut obs2 = MonitorObserver::new(&p, &alias, check_invariants);
    let r2 = monitor_run(&p, &alias, m2, g0, cfg.fuel, mutation, &mut obs2);
    let ((m1f, g1f), (m2f, g2f)) = match (r1, r2) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(ExecError::Timeout), _) | (_, Err(ExecError::Timeout)) => return Verdict::Timeout,
        _ => return Verdict::Fault,
    };
    for obs in [&obs1, &obs2] {
        if let Some((id, b)) = obs.admissibility_violation {
            return violation(
                &p,
                format!(
                    "admissibility: assignment {} wrote `{}` outside its may-write set",
                    id.0,
                    p.env.name_of(b)
                ),
            );
        }
        if let Some(b) = obs.chain_violation {
            return violation(
                &p,
                format!(
                    "array summary label of `{}` decreased during a run",
                    p.env.name_of(b)
                ),
            );
        }
    }
    if !less_restrictive_up_to(s, &g2f, &g1f) {
        let b = p
            .env
            .blocks()
            .find(|b| g1f.get(*b).leq(s) && !g2f.get(*b).leq(g1f.get(*b)))
            .unwrap();
        return violation(
            &p,
            format!(
                "final labels not less restrictive at `{}`: run1={} run2={}",
                p.env.name_of(b),
                g1f.get(b),
                g2f.get(b)
            ),
        );
    }
    if !s_equivalent(&g1f, s, &m1f, &m2f) {
        let b = p
            .env
            .blocks()
            .find(|b| {
                g1f.get(*b).leq(s) && m1f.get(*b).ok() != m2f.get(*b).ok()
            })
            .unwrap();
        return violation(
            &p,
            format!(
                "public block `{}` differs after the runs: {:?} vs {:?} (seed {seed}, index {index})",
                p.env.name_of(b),
                m1f.get(b).unwrap(),
                m2f.get(b).unwrap()
            ),
        );
    }
    // pointwise monotonicity and frame property of the untaken-path update
    if check_invariants {
        let mut g_rand = LabelMemory::uniform(p.env.len(), Label::BOTTOM);
        for b in p.env.blocks() {
            g_rand.set(b, Label(rng.gen_range(0..4)));
        }
        let touched = collect_updates(&alias, &p.body);
        let raise = Label(rng.gen_range(0..4));
        let mut g_after = g_rand.clone();
        update(&alias, &p.body, raise, &mut g_after);
        for b in p.env.blocks() {
            let ok = if touched.contains(&b) {
                g_after.get(b) == g_rand.get(b).join(raise)
            } else {
                g_after.get(b) == g_rand.get(b)
            };
            if !ok {
                return violation(&p, format!("update not monotone/framed at `{}`", p.env.name_of(b)));
            }
        }
    }
    Verdict::Pass
}

/// One agreement trial: the instrumented program, run concretely, must end
/// with every `<x>_status` equal to the monitor's final label of `x`, and
/// with every original variable holding the same value as in the monitor
/// run.
pub fn check_transform_agreement(cfg: &GenConfig, seed: u64, index: u64) -> Verdict {
    let mut rng = instance_rng(seed, index);
    let p = generate_program(cfg, &mut rng);
    let alias = compute_alias(&p);
    let q = match instrument(&p, &alias) {
        Ok(q) => q,
        Err(e) => return violation(&p, format!("instrumentation failed: {e}")),
    };

    let mut obs = MonitorObserver::new(&p, &alias, true);
    let (m_p, g_p) = match monitor_run(
        &p,
        &alias,
        p.initial_memory.clone(),
        p.initial_labels.clone(),
        cfg.fuel,
        None,
        &mut obs,
    ) {
        Ok(r) => r,
        Err(ExecError::Timeout) => return Verdict::Timeout,
        Err(_) => return Verdict::Fault,
    };
    if obs.admissibility_violation.is_some() {
        return violation(&p, "admissibility violation in agreement run".to_string());
    }

    let m_q = match crate::alias::concrete_run(&q, cfg.fuel * 16, &mut NoopObserver) {
        Ok(m) => m,
        Err(ExecError::Timeout) => return Verdict::Timeout,
        Err(e) => return violation(&q, format!("instrumented run faulted: {e}")),
    };

    // block numbering differs between the two programs, so pointer values
    // are compared through the variable names they resolve to
    let val_eq = |a: &Val, b: &Val| match (a, b) {
        (Val::Ptr(la), Val::Ptr(lb)) => {
            p.env.name_of(la.block) == q.env.name_of(lb.block) && la.offset == lb.offset
        }
        _ => a == b,
    };
    let blockval_eq = |a: &BlockVal, b: &BlockVal| match (a, b) {
        (BlockVal::Scalar(va), BlockVal::Scalar(vb)) => val_eq(va, vb),
        (BlockVal::Array(xs), BlockVal::Array(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| val_eq(x, y))
        }
        _ => false,
    };
    for x in p.env.names() {
        let b_p = p.env.block_of(x).unwrap();
        let b_q = q.env.block_of(x).unwrap();
        if !blockval_eq(m_p.get(b_p).unwrap(), m_q.get(b_q).unwrap()) {
            return violation(
                &q,
                format!(
                    "instrumentation disturbed `{x}`: {:?} vs {:?}",
                    m_p.get(b_p).unwrap(),
                    m_q.get(b_q).unwrap()
                ),
            );
        }
        let status = format!("{x}_status");
        let b_s = q.env.block_of(&status).unwrap();
        let got = match m_q.get(b_s).unwrap() {
            BlockVal::Scalar(Val::Num(n)) => Label(*n as u64),
            other => {
                return violation(&q, format!("status `{status}` is not a number: {other:?}"))
            }
        };
        let want = g_p.get(b_p);
        if got != want {
            return violation(
                &q,
                format!(
                    "status disagreement for `{x}`: monitor {want}, instrumented {got} (seed {seed}, index {index})"
                ),
            );
        }
    }
    Verdict::Pass
}

/// One expression-evaluation trial over a small fixed environment: three
/// ints, one 4-element array, one pointer into the array.
pub fn check_expr_lemma_instance(seed: u64, index: u64) -> Verdict {
    let mut rng = instance_rng(seed, index);
    let mut env = Environment::new();
    for n in ["i0", "i1", "i2", "a0", "p0"] {
        env.declare(n);
    }
    let a0 = env.block_of("a0").unwrap();
    let s = Label(0b01);

    let rand_vals = |rng: &mut ChaCha8Rng| -> Vec<BlockVal> {
        vec![
            BlockVal::Scalar(Val::Num(rng.gen_range(-4..8))),
            BlockVal::Scalar(Val::Num(rng.gen_range(-4..8))),
            BlockVal::Scalar(Val::Num(rng.gen_range(-4..8))),
            BlockVal::Array((0..4).map(|_| Val::Num(rng.gen_range(-4..8))).collect()),
            BlockVal::Scalar(Val::Ptr(Loc::elem(a0, rng.gen_range(0..3)))),
        ]
    };

    let m1 = Memory::new(rand_vals(&mut rng));
    let g1 = LabelMemory::new((0..5).map(|_| Label(rng.gen_range(0..4))).collect());
    // build the premises: on blocks public under g1, memories agree and g2
    // stays below g1; elsewhere both are arbitrary
    let mut m2 = Memory::new(rand_vals(&mut rng));
    let mut g2 = LabelMemory::uniform(5, Label::BOTTOM);
    for b in g1.blocks() {
        if g1.get(b).leq(s) {
            g2.set(b, Label(g1.get(b).0 & rng.gen_range(0..4)));
            match m1.get(b).unwrap().clone() {
                BlockVal::Scalar(v) => m2.set_scalar(b, v),
                BlockVal::Array(cells) => {
                    for (i, c) in cells.iter().enumerate() {
                        m2.set_elem(b, i, *c);
                    }
                }
            }
        } else {
            g2.set(b, Label(rng.gen_range(0..4)));
        }
    }
    debug_assert!(s_equivalent(&g1, s, &m1, &m2));
    debug_assert!(less_restrictive_up_to(s, &g2, &g1));

    fn gen_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
        let ints = ["i0", "i1", "i2"];
        let roll = rng.gen_range(0..100);
        if depth > 0 && roll < 35 {
            let ops = [
                BinOpKind::Add,
                BinOpKind::Sub,
                BinOpKind::Mul,
                BinOpKind::BitOr,
                BinOpKind::BitAnd,
                BinOpKind::Eq,
                BinOpKind::Lt,
            ];
            let op = ops[rng.gen_range(0..ops.len())];
            let a = gen_expr(rng, depth - 1);
            let b = gen_expr(rng, depth - 1);
            return Expr::bin(op, a, b);
        }
        match roll % 8 {
            0 => Expr::Const(rng.gen_range(-4..8)),
            1 | 2 => Expr::var(ints[rng.gen_range(0..3)]),
            3 => {
                let idx = if rng.gen_bool(0.5) {
                    Expr::Const(rng.gen_range(0..4))
                } else {
                    Expr::bin(
                        BinOpKind::BitAnd,
                        Expr::var(ints[rng.gen_range(0..3)]),
                        Expr::Const(3),
                    )
                };
                Expr::lval(Lval::index("a0", idx))
            }
            4 => Expr::lval(Lval::deref(Expr::var("p0"))),
            5 => Expr::lval(Lval::deref(Expr::PtrAdd(
                Box::new(Expr::var("p0")),
                Box::new(Expr::Const(rng.gen_range(0..2))),
            ))),
            6 => Expr::addr_of(Lval::index(
                "a0",
                Expr::bin(
                    BinOpKind::BitAnd,
                    Expr::var(ints[rng.gen_range(0..3)]),
                    Expr::Const(3),
                ),
            )),
            _ => Expr::lval(Lval::deref(Expr::addr_of(Lval::var(
                ints[rng.gen_range(0..3)],
            )))),
        }
    }

    let e = gen_expr(&mut rng, 3);
    let r1 = eval_expr(&env, &m1, &g1, &e);
    let r2 = eval_expr(&env, &m2, &g2, &e);
    let ((v1, s1), (v2, s2)) = match (r1, r2) {
        (Ok(a), Ok(b)) => (a, b),
        // a stuck evaluation has no derivation, so the premises fail
        _ => return Verdict::Fault,
    };
    if s1.leq(s) && (v1 != v2 || !s2.leq(s1)) {
        return Verdict::Violation(Box::new(Witness {
            program: format!("{e:?}"),
            detail: format!(
                "expression lemma failed: v1={v1} s1={s1} v2={v2} s2={s2} (seed {seed}, index {index})"
            ),
        }));
    }
    Verdict::Pass
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Soundness,
    Agreement,
    Lemma,
}

#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub pass: u64,
    pub timeout: u64,
    pub fault: u64,
    pub violation: u64,
    pub first_witness: Option<Witness>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PASS={} TIMEOUT={} FAULT={} VIOLATION={}",
            self.pass, self.timeout, self.fault, self.violation
        )
    }
}

impl Summary {
    pub fn total(&self) -> u64 {
        self.pass + self.timeout + self.fault + self.violation
    }
}

/// Runs `count` instances of one check family. Deterministic in
/// `(seed, count)`; each instance is independently replayable from its
/// index.
pub fn run_suite(
    kind: CheckKind,
    cfg: &GenConfig,
    seed: u64,
    count: u64,
    mutation: Option<Mutation>,
    stop_on_violation: bool,
) -> Summary {
    let mut summary = Summary::default();
    for index in 0..count {
        let verdict = match kind {
            CheckKind::Soundness => check_soundness_instance(cfg, seed, index, mutation),
            CheckKind::Agreement => check_transform_agreement(cfg, seed, index),
            CheckKind::Lemma => check_expr_lemma_instance(seed, index),
        };
        match verdict {
            Verdict::Pass => summary.pass += 1,
            Verdict::Timeout => summary.timeout += 1,
            Verdict::Fault => summary.fault += 1,
            Verdict::Violation(w) => {
                summary.violation += 1;
                if summary.first_witness.is_none() {
                    summary.first_witness = Some(*w);
                }
                if stop_on_violation {
                    break;
                }
            }
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::default();
        let p1 = generate_program(&cfg, &mut instance_rng(7, 3));
        let p2 = generate_program(&cfg, &mut instance_rng(7, 3));
        assert_eq!(p1, p2);
        let p3 = generate_program(&cfg, &mut instance_rng(7, 4));
        assert_ne!(p1, p3);
    }

    #[test]
    fn generated_programs_mostly_terminate() {
        let cfg = GenConfig::default();
        let mut timeouts = 0;
        let mut faults = 0;
        for i in 0..100 {
            let mut rng = instance_rng(11, i);
            let p = generate_program(&cfg, &mut rng);
            let alias = compute_alias(&p);
            match monitor_run(
                &p,
                &alias,
                p.initial_memory.clone(),
                p.initial_labels.clone(),
                cfg.fuel,
                None,
                &mut NoopObserver,
            ) {
                Ok(_) => {}
                Err(ExecError::Timeout) => timeouts += 1,
                // repeated pointer increments can run off an array's end
                Err(_) => faults += 1,
            }
        }
        assert!(timeouts <= 4, "too many timeouts: {timeouts}");
        assert!(faults <= 15, "too many faults: {faults}");
    }

    #[test]
    fn variant_differs_only_in_secret_blocks() {
        let cfg = GenConfig {
            secret_fraction: 0.8,
            ..GenConfig::default()
        };
        let mut rng = instance_rng(5, 0);
        let p = generate_program(&cfg, &mut rng);
        let m2 = s_equivalent_variant(&p, Label::BOTTOM, &mut rng);
        assert!(s_equivalent(
            &p.initial_labels,
            Label::BOTTOM,
            &p.initial_memory,
            &m2
        ));
    }

    #[test]
    fn small_soundness_suite_is_clean() {
        let cfg = GenConfig::default();
        let s = run_suite(CheckKind::Soundness, &cfg, 1, 300, None, false);
        assert_eq!(s.violation, 0, "witness: {:?}", s.first_witness);
        assert_eq!(s.total(), 300);
        assert!(s.pass > 250, "{s}");
    }

    #[test]
    fn small_agreement_suite_is_clean() {
        let cfg = GenConfig::default();
        let s = run_suite(CheckKind::Agreement, &cfg, 2, 300, None, false);
        assert_eq!(s.violation, 0, "witness: {:?}", s.first_witness);
        assert!(s.pass > 250, "{s}");
    }

    #[test]
    fn small_lemma_suite_is_clean() {
        let s = run_suite(CheckKind::Lemma, &GenConfig::default(), 3, 1000, None, false);
        assert_eq!(s.violation, 0, "witness: {:?}", s.first_witness);
        assert!(s.pass > 800, "{s}");
    }

    #[test]
    fn broken_monitors_are_detected() {
        let cfg = GenConfig::default();
        for mutation in [Mutation::DropPcOnScalarAssign, Mutation::StrongArrayUpdate] {
            let s = run_suite(
                CheckKind::Soundness,
                &cfg,
                4,
                3000,
                Some(mutation),
                true,
            );
            assert!(
                s.violation > 0,
                "{mutation:?} went undetected over {} instances",
                s.total()
            );
        }
    }

    #[test]
    fn summary_line_format() {
        let s = Summary {
            pass: 5,
            timeout: 1,
            fault: 2,
            violation: 0,
            first_witness: None,
        };
        assert_eq!(s.to_string(), "PASS=5 TIMEOUT=1 FAULT=2 VIOLATION=0");
    }
}
