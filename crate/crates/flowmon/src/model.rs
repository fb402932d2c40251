//! The object language's store: blocks holding scalars or arrays, one
//! security label per block, and the equivalence predicates the soundness
//! argument is stated over.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::label::Label;

/// Identifier of an allocated memory block. Ids are dense integers assigned
/// in declaration order, so runs are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Block(pub u32);

/// A memory location: a block plus an optional array index. The offset is
/// present iff the location addresses an array element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Loc {
    pub block: Block,
    pub offset: Option<i64>,
}

impl Loc {
    pub fn scalar(block: Block) -> Loc {
        Loc {
            block,
            offset: None,
        }
    }

    pub fn elem(block: Block, index: i64) -> Loc {
        Loc {
            block,
            offset: Some(index),
        }
    }
}

/// A runtime value. `Uninit` is the sentinel held by pointer variables before
/// their first assignment; dereferencing it is a runtime fault, copying it is
/// not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    Num(i64),
    Ptr(Loc),
    Uninit,
}

/// Contents of one block: either a scalar or a bounded array of the declared
/// length. A block's shape never changes across updates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockVal {
    Scalar(Val),
    Array(Vec<Val>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("block b{0} is not in the store's domain")]
    MissingBlock(u32),
}

/// Injective map from variable names to blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Environment {
    names: Vec<String>,
    by_name: BTreeMap<String, Block>,
}

impl Environment {
    pub fn new() -> Environment {
        Environment::default()
    }

    /// Allocates the next block for `name`. Returns `None` if the name is
    /// already bound.
    pub fn declare(&mut self, name: &str) -> Option<Block> {
        if self.by_name.contains_key(name) {
            return None;
        }
        let block = Block(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), block);
        Some(block)
    }

    pub fn block_of(&self, name: &str) -> Option<Block> {
        self.by_name.get(name).copied()
    }

    pub fn name_of(&self, block: Block) -> &str {
        &self.names[block.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block> {
        (0..self.names.len() as u32).map(Block)
    }

    /// Variable names in declaration (block) order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }
}

/// Map from blocks to their contents, total over the environment's range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    blocks: Vec<BlockVal>,
}

impl Memory {
    pub fn new(blocks: Vec<BlockVal>) -> Memory {
        Memory { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, b: Block) -> Result<&BlockVal, DomainError> {
        self.blocks
            .get(b.0 as usize)
            .ok_or(DomainError::MissingBlock(b.0))
    }

    /// Overwrites a scalar block. Panics if the block's shape is not scalar;
    /// shape mismatches must be caught as faults before reaching the store.
    pub fn set_scalar(&mut self, b: Block, v: Val) {
        match &mut self.blocks[b.0 as usize] {
            BlockVal::Scalar(slot) => *slot = v,
            BlockVal::Array(_) => panic!("scalar write to array block b{}", b.0),
        }
    }

    /// Overwrites one array cell. The index must already be bounds-checked.
    pub fn set_elem(&mut self, b: Block, index: usize, v: Val) {
        match &mut self.blocks[b.0 as usize] {
            BlockVal::Array(cells) => cells[index] = v,
            BlockVal::Scalar(_) => panic!("array write to scalar block b{}", b.0),
        }
    }
}

/// Map from blocks to security labels, total over the same domain as the
/// memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMemory {
    labels: Vec<Label>,
}

impl LabelMemory {
    pub fn new(labels: Vec<Label>) -> LabelMemory {
        LabelMemory { labels }
    }

    pub fn uniform(len: usize, label: Label) -> LabelMemory {
        LabelMemory {
            labels: vec![label; len],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, b: Block) -> Label {
        self.labels[b.0 as usize]
    }

    pub fn set(&mut self, b: Block, l: Label) {
        self.labels[b.0 as usize] = l;
    }

    pub fn join_at(&mut self, b: Block, l: Label) {
        let old = self.labels[b.0 as usize];
        self.labels[b.0 as usize] = old.join(l);
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block> {
        (0..self.labels.len() as u32).map(Block)
    }
}

/// Structural equality of the values stored in block `b` in both memories.
/// Arrays compare element-wise over the full declared length.
pub fn mem_equal(m1: &Memory, m2: &Memory, b: Block) -> Result<bool, DomainError> {
    Ok(m1.get(b)? == m2.get(b)?)
}

/// Two memories are equivalent up to `s` iff they agree on every block whose
/// label in `g` is below `s`.
pub fn s_equivalent(g: &LabelMemory, s: Label, m1: &Memory, m2: &Memory) -> bool {
    g.blocks().all(|b| {
        if g.get(b).leq(s) {
            mem_equal(m1, m2, b).unwrap_or(false)
        } else {
            true
        }
    })
}

/// `g2` is less restrictive than `g1` up to `s`: on every block whose `g1`
/// label is below `s`, `g2` stays below `g1`.
pub fn less_restrictive_up_to(s: Label, g2: &LabelMemory, g1: &LabelMemory) -> bool {
    g1.blocks()
        .all(|b| !g1.get(b).leq(s) || g2.get(b).leq(g1.get(b)))
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Num(n) => write!(f, "{n}"),
            Val::Ptr(loc) => match loc.offset {
                None => write!(f, "&b{}", loc.block.0),
                Some(i) => write!(f, "&b{}[{i}]", loc.block.0),
            },
            Val::Uninit => write!(f, "<uninit>"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem(vals: Vec<BlockVal>) -> Memory {
        Memory::new(vals)
    }

    #[test]
    fn mem_equal_reflexive_and_scalar_mismatch() {
        let m1 = mem(vec![BlockVal::Scalar(Val::Num(3))]);
        let m2 = mem(vec![BlockVal::Scalar(Val::Num(4))]);
        assert_eq!(mem_equal(&m1, &m1, Block(0)), Ok(true));
        assert_eq!(mem_equal(&m1, &m2, Block(0)), Ok(false));
        assert_eq!(
            mem_equal(&m1, &m2, Block(1)),
            Err(DomainError::MissingBlock(1))
        );
    }

    #[test]
    fn mem_equal_arrays_differ_at_one_index() {
        // oracle: element-wise comparison over the declared length
        let base: Vec<Val> = (0..8).map(Val::Num).collect();
        let mut other = base.clone();
        other[5] = Val::Num(99);
        let m1 = mem(vec![BlockVal::Array(base.clone())]);
        let m2 = mem(vec![BlockVal::Array(other.clone())]);
        let expected = base.iter().zip(&other).all(|(a, b)| a == b);
        assert!(!expected);
        assert_eq!(mem_equal(&m1, &m2, Block(0)), Ok(expected));
    }

    #[test]
    fn s_equivalence_skips_high_blocks() {
        // block 0 secret and differing, block 1 public and equal
        let g = LabelMemory::new(vec![Label::PRIVATE, Label::BOTTOM]);
        let m1 = mem(vec![
            BlockVal::Scalar(Val::Num(1)),
            BlockVal::Scalar(Val::Num(7)),
        ]);
        let m2 = mem(vec![
            BlockVal::Scalar(Val::Num(2)),
            BlockVal::Scalar(Val::Num(7)),
        ]);
        assert!(s_equivalent(&g, Label::BOTTOM, &m1, &m2));
        assert!(s_equivalent(&g, Label::BOTTOM, &m1, &m1));

        // public block differing breaks equivalence
        let g_pub = LabelMemory::new(vec![Label::BOTTOM, Label::BOTTOM]);
        assert!(!s_equivalent(&g_pub, Label::BOTTOM, &m1, &m2));
    }

    #[test]
    fn less_restrictive_basics() {
        let g1 = LabelMemory::new(vec![Label::BOTTOM, Label::PRIVATE]);
        assert!(less_restrictive_up_to(Label::BOTTOM, &g1, &g1));

        // all-secret g1 with s = public: vacuously true for any g2
        let high = LabelMemory::new(vec![Label::PRIVATE, Label::PRIVATE]);
        let any = LabelMemory::new(vec![Label(0b10), Label::BOTTOM]);
        assert!(less_restrictive_up_to(Label::BOTTOM, &any, &high));

        // g1 public, g2 secret at the same block: false
        let g1 = LabelMemory::new(vec![Label::BOTTOM]);
        let g2 = LabelMemory::new(vec![Label::PRIVATE]);
        assert!(!less_restrictive_up_to(Label::BOTTOM, &g2, &g1));
    }

    #[test]
    fn environment_is_injective() {
        let mut env = Environment::new();
        let b0 = env.declare("x").unwrap();
        let b1 = env.declare("y").unwrap();
        assert_ne!(b0, b1);
        assert_eq!(env.declare("x"), None);
        assert_eq!(env.block_of("y"), Some(b1));
        assert_eq!(env.name_of(b0), "x");
    }
}
