//! Scenario runner and verification harness for the `wr` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod run;
pub mod scenario;
pub mod shipped;
pub mod table;
pub mod verify;
