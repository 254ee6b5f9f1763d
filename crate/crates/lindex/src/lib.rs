//! L-index in joint variables for analytic functions on the unit ball of ℂⁿ:
//! Taylor jets, weight fields, index computation, criteria checks, growth bounds
//! and linear PDE systems.

pub mod cli;
pub mod criteria;
pub mod error;
pub mod exec;
pub mod expr;
pub mod growth;
pub mod index;
pub mod jet;
pub mod lfield;
pub mod multiindex;
pub mod parse;
pub mod pde;
pub mod quad;
pub mod report;
pub mod sampling;

pub use num_complex::Complex64 as C64;
