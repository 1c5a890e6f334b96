//! Grid-level design rule checking, report conversion and checker evaluation.
//!
//! The crate is `no_std` with `alloc`; file formats and IO live in `gridrc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod convert;
pub mod dataset;
pub mod dsl;
pub mod eval;
pub mod kernel;
pub mod model;
pub mod render;
pub mod rules;

pub use model::{Drv, DrvKind, GridComponent, GridKey, Layer, Layout};
pub use rules::{builtin_demo_techfile, check_rule, RuleSpec, TechFile};
