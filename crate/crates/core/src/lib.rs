//! Finite laboratory for graded posets built from ordinal interval trees:
//! Cantor-normal-form ordinals, the interval tree with its orbits, forcing
//! conditions in two dialects, amalgamation, simulated generic chains and
//! Cantor–Bendixson analysis.

pub mod amalgam;
pub mod analysis;
pub mod conditions;
pub mod corpus;
pub mod format;
pub mod generic;
pub mod interval_tree;
pub mod ordinal;
pub mod pipeline;
pub mod point;
pub mod unbounded;

pub use interval_tree::{Interval, IntervalTree, Params};
pub use ordinal::{ord, Ordinal};
pub use point::{Level, Point};
