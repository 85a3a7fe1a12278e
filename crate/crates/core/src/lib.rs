//! Executable inverse maximum theorems on discretized compact boxes.
//!
//! Correspondences are represented by their graph masks on product grids.
//! The crate computes argmax correspondences of payoffs (the forward Berge
//! direction), synthesizes payoffs whose argmax is a prescribed
//! correspondence, reduces generalized Nash games to classical ones, and
//! computes fixed points through Nash-game and minimax constructions. Every
//! construction comes with a brute-force check that can be run against it.

pub mod correspondence;
pub mod error;
pub mod fixedpoint;
pub mod games;
pub mod grid;
pub mod par;
pub mod synthesis;

pub use error::{Error, Result};
pub use grid::{
    build_grid, clamp_unit, distance_transform, index_distance_transform, weighted_sum, Axis, BlockLayout, BlockView,
    CellMask, Metric, ProductGrid, ScalarField, Section,
};
