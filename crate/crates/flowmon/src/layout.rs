//! Shadow-label layout: for each declared variable type, the list of label
//! declarations (exact and summary labels at each dereference depth) and
//! their naming convention.

use thiserror::Error;

use crate::ast::ObjType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Exact,
    Summary,
}

/// One shadow label slot: kind, dereference depth, and the carrier shape the
/// emitted declaration will have.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelType {
    pub kind: LabelKind,
    pub depth: usize,
    pub shape: ObjType,
}

impl LabelType {
    pub fn new(kind: LabelKind, depth: usize, shape: ObjType) -> LabelType {
        LabelType { kind, depth, shape }
    }
}

/// A concrete shadow declaration derived from a [`LabelType`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelDecl {
    pub name: String,
    pub shape: ObjType,
    pub kind: LabelKind,
    pub depth: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("variable name `{0}` collides with the reserved `_status` suffix")]
    ReservedName(String),
}

/// Wraps a label type one pointer level deeper.
pub fn ptr_label(t: &LabelType) -> LabelType {
    LabelType {
        kind: t.kind,
        depth: t.depth + 1,
        shape: ObjType::Ptr(Box::new(t.shape.clone())),
    }
}

/// Wraps a label type's shape in an array of length `len`; kind and depth
/// are unchanged.
pub fn array_label(len: usize, t: &LabelType) -> LabelType {
    LabelType {
        kind: t.kind,
        depth: t.depth,
        shape: ObjType::Array(Box::new(t.shape.clone()), len),
    }
}

pub fn labels_aux(t: &ObjType) -> Vec<LabelType> {
    match t {
        ObjType::Int => vec![LabelType::new(LabelKind::Exact, 0, ObjType::Int)],
        ObjType::Ptr(inner) => {
            let mut out = vec![
                LabelType::new(LabelKind::Exact, 0, ObjType::Int),
                LabelType::new(
                    LabelKind::Summary,
                    1,
                    ObjType::Ptr(Box::new(ObjType::Int)),
                ),
            ];
            out.extend(labels_aux(inner).iter().map(ptr_label));
            out
        }
        ObjType::Array(inner, len) => labels_aux(inner)
            .iter()
            .map(|lt| array_label(*len, lt))
            .collect(),
    }
}

/// Full label list for a declared type. Array types get an outermost scalar
/// summary label prepended.
pub fn labels(t: &ObjType) -> Vec<LabelType> {
    match t {
        ObjType::Array(..) => {
            let mut out = vec![LabelType::new(LabelKind::Summary, 0, ObjType::Int)];
            out.extend(labels_aux(t));
            out
        }
        _ => labels_aux(t),
    }
}

/// Shadow variable name for one label slot of `var`.
///
/// Depth 0 maps to `<var>_status` for scalar shapes and the array summary,
/// and to `<var>_status_d0` for the exact per-cell array labels; deeper
/// levels get `_d<k>`, with `_summary` appended for summary kinds.
pub fn label_name(var: &str, lt: &LabelType) -> String {
    match (lt.kind, lt.depth) {
        (LabelKind::Summary, 0) => format!("{var}_status"),
        (LabelKind::Exact, 0) => {
            if lt.shape.is_array() {
                format!("{var}_status_d0")
            } else {
                format!("{var}_status")
            }
        }
        (LabelKind::Exact, d) => format!("{var}_status_d{d}"),
        (LabelKind::Summary, d) => format!("{var}_status_d{d}_summary"),
    }
}

/// All shadow declarations for variable `var` of type `t`.
pub fn label_decls(var: &str, t: &ObjType) -> Result<Vec<LabelDecl>, LayoutError> {
    if var.contains("_status") {
        return Err(LayoutError::ReservedName(var.to_string()));
    }
    Ok(labels(t)
        .into_iter()
        .map(|lt| LabelDecl {
            name: label_name(var, &lt),
            shape: lt.shape.clone(),
            kind: lt.kind,
            depth: lt.depth,
        })
        .collect())
}
