//! Executable object-oriented specifications: parsing, static checks,
//! translation to a clause program, evaluation, runtime contract checking
//! and skeleton generation.

pub mod ast;
pub mod diag;
pub mod lexer;
pub mod parser;
pub mod ops;
pub mod semantics;
pub mod ir;
pub mod engine;
pub mod eval;
pub mod wire;
pub mod check;
pub mod slimp;
pub mod codegen;
pub mod skeleton;
pub mod cli;
