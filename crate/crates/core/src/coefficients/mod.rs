//! The jump coefficient `b`, the mollifier/shape pair and the regularised
//! quantities `b_ε`, `𝔡_ε`, `β_ε`, `β₀` and `Θ`.

mod bounds;
mod jump;
pub mod mollifier;
mod regularized;

pub use bounds::{lemma_bound_report, lemma_grid, LemmaQuantity, LemmaReport, LemmaRow, MIN_WINDOW_POINTS};
pub use jump::{Branch, JumpCoefficient, Side, BRANCH_MAX_ORDER, WORKING_INTERVAL};
pub use mollifier::{MollifierPair, PsiKind};
pub use regularized::{beta_zero, RegularizedEval, DEFAULT_QUAD_ORDER, REG_MAX_ORDER};
