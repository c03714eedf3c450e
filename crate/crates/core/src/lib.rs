//! Numerical toolkit for optimization problems whose feasible set is cut out
//! by a parametric strong vector-equilibrium constraint.

pub mod diagnostics;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod merit;
pub mod problem;
pub mod solver;
pub mod subdiff;
