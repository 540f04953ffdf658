//! Per-tree estimation of the decomposition and the reduction over trees.
//!
//! For one tree the empirical loss is a sum of squares: one term per data
//! point asking the components to add up to the tree, and one term per
//! (subset `J`, variable `j ∈ J`, cell of `J \ j`) asking the empirical mean
//! of the `J` component over that cell to vanish. [`assemble`] writes it as
//! `‖Z − Cβ‖²`, [`solve`] minimises it, and [`fill_empty_cells`] assigns the
//! cells the loss does not see.

mod assemble;
mod fill;
mod lsq;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

pub use assemble::{assemble, ConstraintSystem, RowKind, SubsetBlock};
pub(crate) use assemble::{assemble_records, CellRecord};
pub use fill::fill_empty_cells;

use crate::decomposition::{ComponentTable, Decomposition, FitMeta, TreeTable};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Ensemble, Tree};
use crate::partition::{axis_partitions, collect_subsets, prune_tree, SubsetKey};

/// Knobs of the per-tree fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    /// Maximum interaction order of a component.
    pub max_order: usize,
    /// Splits at this depth and below are pruned before partitioning.
    pub prune_depth: Option<usize>,
    /// Only splits above this depth contribute variable subsets.
    pub subset_depth: Option<usize>,
    /// Relative normal-equation residual at which the iterative solver stops.
    pub cg_tolerance: f64,
    /// Iteration cap; `None` means ten times the column count.
    pub max_iterations: Option<usize>,
    /// Ridge weight relative to the mean squared column norm.
    pub ridge: f64,
    /// Systems with at most this many columns use the dense solver.
    pub dense_limit: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            max_order: 2,
            prune_depth: None,
            subset_depth: None,
            cg_tolerance: 1e-10,
            max_iterations: None,
            ridge: 1e-10,
            dense_limit: 512,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::Config("interaction order must be at least 1".into()));
        }
        if self.subset_depth == Some(0) {
            return Err(Error::Config("subset extraction depth must be at least 1".into()));
        }
        if [self.cg_tolerance, self.ridge].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(Error::Config("tolerance and ridge must be positive".into()));
        }
        Ok(())
    }

    /// Absolute ridge weight for `sys`.
    pub fn ridge_for(&self, sys: &ConstraintSystem) -> f64 {
        let norms = sys.column_norms_sq();
        let mean = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
        self.ridge * mean
    }
}

/// Minimises `‖Z − Cβ‖² + λ‖β‖²`, dense QR for small systems and conjugate
/// gradient otherwise.
pub fn solve(sys: &ConstraintSystem, params: &SolveParams) -> Result<Vec<f64>> {
    if sys.n_cols() <= params.dense_limit {
        Ok(solve_dense(sys, params))
    } else {
        solve_iterative(sys, params)
    }
}

/// Dense Householder QR path of [`solve`].
pub fn solve_dense(sys: &ConstraintSystem, params: &SolveParams) -> Vec<f64> {
    lsq::dense_qr(sys, params.ridge_for(sys))
}

/// Conjugate-gradient path of [`solve`].
pub fn solve_iterative(sys: &ConstraintSystem, params: &SolveParams) -> Result<Vec<f64>> {
    let max_iterations = params.max_iterations.unwrap_or(10 * sys.n_cols());
    lsq::cgls(sys, params.ridge_for(sys), params.cg_tolerance, max_iterations).map(|s| s.beta)
}

/// Components of one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeComponents {
    pub tree: usize,
    /// Value of the `∅` component.
    pub constant: f64,
    /// Non-empty subsets, every cell assigned.
    pub tables: BTreeMap<SubsetKey, TreeTable>,
    pub n_columns: usize,
    pub n_rows: usize,
    /// `sqrt` of the fit part of the loss at the solution.
    pub fit_residual: f64,
}

impl TreeComponents {
    /// Sum of all components of this tree at `x`.
    pub fn eval_sum(&self, x: &[f64]) -> f64 {
        self.tables
            .iter()
            .fold(self.constant, |acc, (s, t)| acc + t.eval(s.vars(), x))
    }
}

/// Builds the per-subset tables from a solution vector.
pub(crate) fn tables_from_solution(
    sys: &ConstraintSystem,
    grids: &crate::partition::TreeGrids,
    beta: &[f64],
) -> Result<BTreeMap<SubsetKey, TreeTable>> {
    sys.blocks()
        .iter()
        .map(|block| {
            let raw: Vec<f64> = block
                .columns
                .iter()
                .map(|c| c.map_or(0.0, |c| beta[c]))
                .collect();
            let values = fill_empty_cells(&block.shape, &raw, &block.mass)?;
            Ok((block.subset.clone(), TreeTable::new(grids.project(&block.subset), values)?))
        })
        .collect()
}

/// Fits the components of a single tree on `data`.
pub fn fit_tree_hfd(tree: &Tree, data: &Matrix, params: &SolveParams) -> Result<TreeComponents> {
    fit_tree_hfd_indexed(0, tree, data, params)
}

pub(crate) fn fit_tree_hfd_indexed(
    index: usize,
    tree: &Tree,
    data: &Matrix,
    params: &SolveParams,
) -> Result<TreeComponents> {
    params.validate()?;
    let pruned = prune_tree(tree, params.prune_depth, data);
    let grids = axis_partitions(&pruned);
    let subsets = collect_subsets(&pruned, params.max_order, params.subset_depth)?;
    let sys = assemble(&pruned, data, &subsets, &grids)?;
    let beta = solve(&sys, params)?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Invariant(format!("tree {index}: non-finite coefficient")));
    }
    let tables = tables_from_solution(&sys, &grids, &beta)?;
    Ok(TreeComponents {
        tree: index,
        constant: beta[0],
        tables,
        n_columns: sys.n_cols(),
        n_rows: sys.n_rows(),
        fit_residual: libm::sqrt(sys.residual_sq(&beta, RowKind::Fit)),
    })
}

/// Fits every tree independently and sums the components per subset.
pub fn fit_ensemble_hfd(ensemble: &Ensemble, data: &Matrix, params: &SolveParams) -> Result<Decomposition> {
    ensemble.check_width(data.cols())?;
    if data.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let per_tree = ensemble
        .trees()
        .iter()
        .enumerate()
        .map(|(i, t)| fit_tree_hfd_indexed(i, t, data, params))
        .collect::<Result<Vec<_>>>()?;
    reduce_tree_components(ensemble, per_tree, data, params)
}

/// Sums per-tree components in ascending tree order and adds the ensemble's
/// base offset to the constant. The result does not depend on the order in
/// which `per_tree` was produced.
pub fn reduce_tree_components(
    ensemble: &Ensemble,
    mut per_tree: Vec<TreeComponents>,
    data: &Matrix,
    params: &SolveParams,
) -> Result<Decomposition> {
    per_tree.sort_by_key(|c| c.tree);
    let mut constant = ensemble.base_offset();
    let mut components: BTreeMap<SubsetKey, ComponentTable> = BTreeMap::new();
    for tc in per_tree {
        constant += tc.constant;
        for (subset, table) in tc.tables {
            components
                .entry(subset.clone())
                .or_insert_with(|| ComponentTable::new(subset))
                .push(table);
        }
    }
    let mut dec = Decomposition::new(
        ensemble.n_features(),
        constant,
        components,
        FitMeta {
            max_order: params.max_order,
            prune_depth: params.prune_depth,
            subset_depth: params.subset_depth,
            n_samples: data.rows(),
            n_trees: ensemble.trees().len(),
            residual_mse: 0.0,
        },
    );
    let sq: f64 = data
        .iter_rows()
        .map(|x| {
            let e = dec.eval_sum_unchecked(x) - ensemble.predict(x);
            e * e
        })
        .sum();
    dec.meta.residual_mse = sq / data.rows().max(1) as f64;
    Ok(dec)
}
