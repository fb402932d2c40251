//! A hybrid information-flow toolkit for a mini-C dialect.
//!
//! The pieces fit together like this: the [`frontend`] parses and elaborates
//! `.mc` sources into a typed program over the abstract syntax in [`ast`];
//! [`alias`] computes a points-to over-approximation for every assignment;
//! [`interp`] runs the combined concrete/label-tracking semantics using that
//! alias information; [`instrument`] inlines the same monitor into the program
//! as ordinary source code; and [`harness`] differentially tests the whole
//! stack against the non-interference property.

pub mod alias;
pub mod ast;
pub mod frontend;
pub mod harness;
pub mod instrument;
pub mod interp;
pub mod label;
pub mod layout;
pub mod model;
