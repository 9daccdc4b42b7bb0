//! Factorial game-variant designs, score tables, transfer matrices and
//! type-3 ANOVA.

pub mod anova;
pub mod bundled;
pub mod design;
pub mod scores;
