//! Experiment runner for the solver library: configuration ingestion, single
//! solves, convergence studies and the self-test suites, with CSV artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod selftest;
