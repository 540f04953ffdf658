//! Hoeffding functional decomposition of tree ensembles.
//!
//! Every tree of an ensemble is piecewise constant over the Cartesian product of
//! the one-dimensional partitions induced by its split thresholds. This crate
//! estimates, tree by tree, the unique set of piecewise-constant components
//! (one per variable subset) that sum back to the tree and are hierarchically
//! orthogonal under the empirical distribution of a data sample. Components
//! are then summed over trees into a [`Decomposition`].
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! fitting and the command-line tool live in the companion `treehfd` crate.
//!
//! Pipeline, for one tree:
//! [`prune_tree`] → [`axis_partitions`] → [`collect_subsets`] → [`assemble`]
//! → [`solve`] → [`fill_empty_cells`]. [`fit_tree_hfd`] runs it end to end and
//! [`fit_ensemble_hfd`] reduces the per-tree results.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analytical;
pub mod decomposition;
pub mod diagnostics;
mod error;
mod matrix;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod solver;
mod stats;
pub mod trainer;

pub use decomposition::{ComponentTable, Decomposition, FitMeta, TreeTable};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{Ensemble, Node, Tree};
pub use partition::{
    axis_partitions, collect_subsets, locate, prune_tree, AxisGrid, CellIndex, SubsetKey,
    TreeGrids,
};
pub use solver::{
    assemble, fill_empty_cells, fit_ensemble_hfd, fit_tree_hfd, reduce_tree_components, solve,
    ConstraintSystem, SolveParams, TreeComponents,
};
pub use stats::{mean, variance};
