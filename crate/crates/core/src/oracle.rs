//! Dense reference solvers for small instances.
//!
//! These materialise the constraint matrix and return the minimal-norm
//! least-squares solution from a singular value decomposition, independently
//! of the QR and conjugate-gradient paths of [`crate::solver`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Tree;
use crate::partition::{CellIndex, SubsetKey, TreeGrids};
use crate::solver::{assemble, assemble_records, CellRecord, ConstraintSystem};

/// Column budget of the dense reference.
pub const MAX_DENSE_COLUMNS: usize = 2000;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Minimal-norm solution of `min ‖z − Aβ‖²` for a row-major `rows × cols`
/// matrix `a`.
pub fn min_norm_lstsq(a: &[f64], rows: usize, cols: usize, z: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(z.len(), rows);
    if cols == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(rows, cols, a);
    let svd = m.svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return alloc::vec![0.0; cols];
    }
    let rhs = DVector::from_column_slice(z);
    let x = svd
        .solve(&rhs, RANK_TOLERANCE * largest)
        .expect("both singular vector sets were computed");
    x.iter().copied().collect()
}

/// Number of singular values of the row-major `rows × cols` matrix `a` above
/// [`RANK_TOLERANCE`] times the largest.
pub fn numerical_rank(a: &[f64], rows: usize, cols: usize) -> usize {
    assert_eq!(a.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return 0;
    }
    let sv = DMatrix::from_row_slice(rows, cols, a).singular_values();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
}

fn solve_system(sys: &ConstraintSystem) -> Result<Vec<f64>> {
    if sys.n_cols() > MAX_DENSE_COLUMNS {
        return Err(Error::TooLarge {
            columns: sys.n_cols(),
            limit: MAX_DENSE_COLUMNS,
        });
    }
    Ok(min_norm_lstsq(&sys.to_dense(), sys.n_rows(), sys.n_cols(), sys.targets()))
}

/// Reference coefficients for one tree, in the column order of
/// [`assemble`].
pub fn dense_tree_hfd(
    tree: &Tree,
    data: &Matrix,
    subsets: &BTreeSet<SubsetKey>,
    grids: &TreeGrids,
) -> Result<Vec<f64>> {
    let sys = assemble(tree, data, subsets, grids)?;
    solve_system(&sys)
}

/// Exact decomposition of a function tabulated on a finite grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactHfd {
    pub shape: Vec<usize>,
    pub constant: f64,
    /// Every non-empty subset of the grid variables, row-major over its cells.
    pub components: BTreeMap<SubsetKey, Vec<f64>>,
}

impl ExactHfd {
    /// Value of one component at a full-grid cell.
    pub fn component_at(&self, subset: &SubsetKey, cell: &[usize]) -> f64 {
        if subset.is_empty() {
            return self.constant;
        }
        let shape: Vec<usize> = subset.vars().iter().map(|&v| self.shape[v]).collect();
        let coords: Vec<usize> = subset.vars().iter().map(|&v| cell[v]).collect();
        self.components[subset][CellIndex(coords).linear(&shape)]
    }

    /// Sum of all components at a full-grid cell.
    pub fn sum_at(&self, cell: &[usize]) -> f64 {
        self.components
            .keys()
            .fold(self.constant, |acc, s| acc + self.component_at(s, cell))
    }
}

/// Decomposes `values` (row-major over `shape`) under the cell probabilities
/// `probs`, using every subset of the grid variables.
pub fn exact_hfd_discrete(shape: &[usize], values: &[f64], probs: &[f64]) -> Result<ExactHfd> {
    let size: usize = shape.iter().product();
    if values.len() != size || probs.len() != size {
        return Err(Error::Input(format!(
            "grid has {size} cells, got {} values and {} probabilities",
            values.len(),
            probs.len()
        )));
    }
    if probs.iter().any(|p| p.is_nan() || *p <= 0.0) {
        return Err(Error::Input("probabilities must be positive".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Input(format!("probabilities sum to {total}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite table value".into()));
    }
    let vars: Vec<usize> = (0..shape.len()).collect();
    let subsets: BTreeSet<SubsetKey> = SubsetKey::new(vars.clone())
        .subsets_up_to(shape.len())
        .into_iter()
        .collect();
    let records: Vec<CellRecord> = (0..size)
        .map(|i| CellRecord {
            coords: CellIndex::from_linear(shape, i).0,
            mass: probs[i],
            target: values[i],
        })
        .collect();
    let sys = assemble_records(&vars, shape, &subsets, &records);
    let beta = solve_system(&sys)?;
    let components = sys
        .blocks()
        .iter()
        .map(|b| {
            let table = b
                .columns
                .iter()
                .map(|c| beta[c.expect("every cell has positive probability")])
                .collect();
            (b.subset.clone(), table)
        })
        .collect();
    Ok(ExactHfd {
        shape: shape.to_vec(),
        constant: beta[0],
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::xor_tree;
    use crate::partition::{axis_partitions, collect_subsets};

    #[test]
    fn stump_reference() {
        let tree = Tree::stump(0, 0.5, -1.0, 1.0).unwrap();
        let data = Matrix::from_rows(&[[0.2], [0.4], [0.6], [0.8]]).unwrap();
        let grids = axis_partitions(&tree);
        let subsets = collect_subsets(&tree, 2, None).unwrap();
        let beta = dense_tree_hfd(&tree, &data, &subsets, &grids).unwrap();
        for (got, want) in beta.iter().zip([0.0, -1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn xor_reference() {
        let tree = xor_tree();
        let data = Matrix::from_rows(&[[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]).unwrap();
        let grids = axis_partitions(&tree);
        let subsets = collect_subsets(&tree, 2, None).unwrap();
        let beta = dense_tree_hfd(&tree, &data, &subsets, &grids).unwrap();
        // ∅, {0}×2, {1}×2, {0,1}×4.
        assert_eq!(beta.len(), 9);
        for b in &beta[..5] {
            assert!(b.abs() < 1e-12);
        }
        for (got, want) in beta[5..].iter().zip([1.0, -1.0, -1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_columns_split_evenly() {
        // Two identical columns: the minimal-norm solution shares the weight.
        let a = [1.0, 1.0, 2.0, 2.0];
        let x = min_norm_lstsq(&a, 2, 2, &[2.0, 4.0]);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert_eq!(numerical_rank(&a, 2, 2), 1);
        assert_eq!(numerical_rank(&[1.0, 0.0, 0.0, 3.0, 1.0, 1.0], 3, 2), 2);
    }

    #[test]
    fn exact_uniform_xor_matches_data_fit() {
        let exact = exact_hfd_discrete(&[2, 2], &[1.0, -1.0, -1.0, 1.0], &[0.25; 4]).unwrap();
        assert!(exact.constant.abs() < 1e-12);
        assert!(exact.components[&SubsetKey::from([0])].iter().all(|v| v.abs() < 1e-12));
        let inter = &exact.components[&SubsetKey::from([0, 1])];
        for (got, want) in inter.iter().zip([1.0, -1.0, -1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_constant_and_additive_tables() {
        let c = exact_hfd_discrete(&[2, 3], &[2.5; 6], &[1.0 / 6.0; 6]).unwrap();
        assert!((c.constant - 2.5).abs() < 1e-12);
        assert!(c.components.values().flatten().all(|v| v.abs() < 1e-12));

        let probs = [0.1, 0.2, 0.3, 0.4];
        let g = exact_hfd_discrete(&[2, 2], &[3.0, 3.0, -1.0, -1.0], &probs).unwrap();
        assert!(g.components[&SubsetKey::from([0, 1])].iter().all(|v| v.abs() < 1e-12));
        assert!(g.components[&SubsetKey::from([1])].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn exact_rejects_bad_tables() {
        assert!(exact_hfd_discrete(&[2], &[1.0, 2.0], &[0.5, 0.6]).is_err());
        assert!(exact_hfd_discrete(&[2], &[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(exact_hfd_discrete(&[2], &[1.0], &[1.0]).is_err());
    }
}
