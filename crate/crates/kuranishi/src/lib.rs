//! Finite-dimensional Kuranishi atlases made concrete.
//!
//! Charts are unions of rational boxes (with optional periodic axes),
//! sections and coordinate changes are small symbolic expressions, and the
//! constructions (tame shrinkings, reductions, adapted perturbations,
//! signed zero counts) are carried out exactly where the data is affine and
//! on certified samples otherwise.

pub mod linalg;
pub mod exterior;
pub mod geometry;
pub mod expr;
pub mod report;
pub mod chart;
pub mod atlas;
pub mod demos;
pub mod reduction;
pub mod generate;
pub mod shrink;
pub mod perturbation;
pub mod zeroset;
pub mod cli;
