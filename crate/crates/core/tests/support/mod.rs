#![allow(dead_code)]

pub mod lattice;
pub mod fuzz;
pub mod run;
