//! Shared oracles and generators for the integration suites.
#![allow(dead_code)]

pub mod checks;
pub mod gen;
pub mod grammar;
pub mod rules;
pub mod wire;
