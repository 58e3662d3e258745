//! Exact LP machinery behind the dimensions: a bounded-variable simplex,
//! zero-sum games, margin LPs and (fractional) covers.

pub mod cover;
pub mod game;
pub mod lp;

pub use cover::{
    achievable_subsets, achievable_subsets_limited, best_single_discrimination, discrimination, exact_min_cover,
    fractional_cover, fractional_packing, greedy_cover, max_margin, CoverFamily, CoverSet, FractionalCover, Kappa,
    Margin, ACHIEVE_SLACK, SUBSET_LIMIT,
};
pub(crate) use cover::{binary_seeds, deltas, margin_lp, mask_of, members_of};
pub use game::{zero_sum, GameMatrix, ZeroSumSolution};
pub use lp::{lp_solve, Constraint, LinearProgram, LpSolution, Relation};
