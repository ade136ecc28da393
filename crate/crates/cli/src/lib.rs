//! Library side of the `mosco-flow` binary: config parsing, the sweep runner
//! and the self-test suites.

pub mod config;
pub mod runner;
pub mod selftest;
