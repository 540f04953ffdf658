use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Tree;
use crate::partition::{linear_index, CellIndex, SubsetKey, TreeGrids};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Fit,
    Orthogonality,
}

/// Cell grid of one non-empty subset inside a [`ConstraintSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetBlock {
    pub subset: SubsetKey,
    /// Interval count per variable of `subset`.
    pub shape: Vec<usize>,
    /// Empirical frequency of every cell, row-major.
    pub mass: Vec<f64>,
    /// Column of every cell, `None` for cells without data.
    pub columns: Vec<Option<usize>>,
}

/// Sparse weighted least-squares encoding of the empirical loss of one tree.
///
/// Column 0 is the constant (`∅`) component. Every other column is one
/// non-empty cell of one subset grid. Rows are stored in compressed sparse
/// row form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub(crate) blocks: Vec<SubsetBlock>,
    pub(crate) column_keys: Vec<(SubsetKey, CellIndex)>,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) col_idx: Vec<usize>,
    pub(crate) values: Vec<f64>,
    pub(crate) targets: Vec<f64>,
    pub(crate) kinds: Vec<RowKind>,
}

impl ConstraintSystem {
    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_keys.len()
    }

    /// `(subset, cell)` of every column.
    pub fn columns(&self) -> &[(SubsetKey, CellIndex)] {
        &self.column_keys
    }

    pub fn blocks(&self) -> &[SubsetBlock] {
        &self.blocks
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn kinds(&self) -> &[RowKind] {
        &self.kinds
    }

    /// Column indices and coefficients of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// `(row, col, coefficient)` triplets in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows()).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// `y += C x`.
    pub(crate) fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out += cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum::<f64>();
        }
    }

    /// `x += Cᵀ y`.
    pub(crate) fn mul_transpose_add(&self, y: &[f64], x: &mut [f64]) {
        for (r, &yr) in y.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                x[c] += v * yr;
            }
        }
    }

    /// Squared Euclidean norm of every column.
    pub(crate) fn column_norms_sq(&self) -> Vec<f64> {
        let mut norms = vec![0.0; self.n_cols()];
        for (&c, &v) in self.col_idx.iter().zip(&self.values) {
            norms[c] += v * v;
        }
        norms
    }

    /// `‖Z − Cβ‖²` restricted to rows of `kind`.
    pub fn residual_sq(&self, beta: &[f64], kind: RowKind) -> f64 {
        (0..self.n_rows())
            .filter(|&r| self.kinds[r] == kind)
            .map(|r| {
                let (cols, vals) = self.row(r);
                let fitted: f64 = cols.iter().zip(vals).map(|(&c, &v)| v * beta[c]).sum();
                let e = self.targets[r] - fitted;
                e * e
            })
            .sum()
    }

    /// Dense copy of `C`, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n_rows() * self.n_cols()];
        for (r, c, v) in self.triplets() {
            dense[r * self.n_cols() + c] += v;
        }
        dense
    }
}

/// One cell of the full grid over `vars`, with its probability mass and the
/// (constant) tree value on it.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CellRecord {
    pub coords: Vec<usize>,
    pub mass: f64,
    pub target: f64,
}

struct RowBuilder {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    targets: Vec<f64>,
    kinds: Vec<RowKind>,
}

impl RowBuilder {
    fn push(&mut self, entries: &[(usize, f64)], target: f64, kind: RowKind) {
        for &(c, v) in entries {
            self.col_idx.push(c);
            self.values.push(v);
        }
        self.row_ptr.push(self.col_idx.len());
        self.targets.push(target);
        self.kinds.push(kind);
    }
}

/// Builds the system from fine-grid cell records.
///
/// `vars` lists the grid variables and `shape` their interval counts; every
/// subset must only use variables of `vars`. Fit rows carry weight
/// `sqrt(mass)`; orthogonality rows carry `mass(k′) / sqrt(mass(k))` on the
/// cells `k′` of `J` that project onto cell `k` of `J \ j`.
pub(crate) fn assemble_records(
    vars: &[usize],
    shape: &[usize],
    subsets: &BTreeSet<SubsetKey>,
    records: &[CellRecord],
) -> ConstraintSystem {
    let positions: Vec<Vec<usize>> = subsets
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.vars()
                .iter()
                .map(|v| vars.binary_search(v).expect("subset variable missing from grid"))
                .collect()
        })
        .collect();

    let mut blocks: Vec<SubsetBlock> = subsets
        .iter()
        .filter(|s| !s.is_empty())
        .zip(&positions)
        .map(|(s, pos)| {
            let block_shape: Vec<usize> = pos.iter().map(|&p| shape[p]).collect();
            let size = block_shape.iter().product();
            SubsetBlock {
                subset: s.clone(),
                shape: block_shape,
                mass: vec![0.0; size],
                columns: vec![None; size],
            }
        })
        .collect();

    // Cell of each record in each block.
    let mut scratch = Vec::new();
    let record_cells: Vec<Vec<usize>> = records
        .iter()
        .map(|rec| {
            blocks
                .iter_mut()
                .zip(&positions)
                .map(|(block, pos)| {
                    scratch.clear();
                    scratch.extend(pos.iter().map(|&p| rec.coords[p]));
                    let cell = linear_index(&block.shape, &scratch);
                    block.mass[cell] += rec.mass;
                    cell
                })
                .collect()
        })
        .collect();

    let mut column_keys = vec![(SubsetKey::empty(), CellIndex::default())];
    for block in &mut blocks {
        for (cell, m) in block.mass.iter().enumerate() {
            if *m > 0.0 {
                block.columns[cell] = Some(column_keys.len());
                column_keys.push((block.subset.clone(), CellIndex::from_linear(&block.shape, cell)));
            }
        }
    }

    let mut rows = RowBuilder {
        row_ptr: vec![0],
        col_idx: Vec::new(),
        values: Vec::new(),
        targets: Vec::new(),
        kinds: Vec::new(),
    };
    let mut entries = Vec::new();
    for (rec, cells) in records.iter().zip(&record_cells) {
        let w = libm::sqrt(rec.mass);
        entries.clear();
        entries.push((0, w));
        for (block, &cell) in blocks.iter().zip(cells) {
            let col = block.columns[cell].expect("record cell has mass");
            entries.push((col, w));
        }
        rows.push(&entries, w * rec.target, RowKind::Fit);
    }

    for block in &blocks {
        for q in 0..block.shape.len() {
            let mut coarse_shape = block.shape.clone();
            let along = coarse_shape.remove(q);
            let coarse_size: usize = coarse_shape.iter().product();
            let mut coords = Vec::with_capacity(block.shape.len());
            for k in 0..coarse_size {
                let coarse = CellIndex::from_linear(&coarse_shape, k);
                let fine: Vec<(usize, f64)> = (0..along)
                    .map(|t| {
                        coords.clear();
                        coords.extend_from_slice(&coarse.0[..q]);
                        coords.push(t);
                        coords.extend_from_slice(&coarse.0[q..]);
                        linear_index(&block.shape, &coords)
                    })
                    .filter_map(|cell| block.columns[cell].map(|col| (col, block.mass[cell])))
                    .collect();
                let coarse_mass: f64 = fine.iter().map(|(_, m)| m).sum();
                if coarse_mass <= 0.0 {
                    continue;
                }
                let scale = 1.0 / libm::sqrt(coarse_mass);
                entries.clear();
                entries.extend(fine.iter().map(|&(col, m)| (col, m * scale)));
                rows.push(&entries, 0.0, RowKind::Orthogonality);
            }
        }
    }

    ConstraintSystem {
        blocks,
        column_keys,
        row_ptr: rows.row_ptr,
        col_idx: rows.col_idx,
        values: rows.values,
        targets: rows.targets,
        kinds: rows.kinds,
    }
}

/// Assembles the empirical loss of `tree` over the rows of `data`.
///
/// Data points are grouped by their cell in the full grid of the tree; each
/// group becomes one fit row weighted by `sqrt(count / n)`.
pub fn assemble(
    tree: &Tree,
    data: &Matrix,
    subsets: &BTreeSet<SubsetKey>,
    grids: &TreeGrids,
) -> Result<ConstraintSystem> {
    let n = data.rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let mut vars: Vec<usize> = grids.variables().collect();
    vars.extend(subsets.iter().flat_map(|s| s.vars().iter().copied()));
    vars.sort_unstable();
    vars.dedup();
    if let Some(&v) = vars.last() {
        if v >= data.cols() {
            return Err(Error::Input(alloc::format!(
                "variable {v} is out of range for data with {} columns",
                data.cols()
            )));
        }
    }
    let shape: Vec<usize> = vars.iter().map(|&v| grids.n_intervals(v)).collect();

    let mut groups: BTreeMap<Vec<usize>, (usize, f64)> = BTreeMap::new();
    for x in data.iter_rows() {
        let sig: Vec<usize> = vars.iter().map(|&v| grids.interval(v, x[v])).collect();
        groups.entry(sig).or_insert((0, tree.predict(x))).0 += 1;
    }
    let records: Vec<CellRecord> = groups
        .into_iter()
        .map(|(coords, (count, target))| CellRecord {
            coords,
            mass: count as f64 / n as f64,
            target,
        })
        .collect();
    Ok(assemble_records(&vars, &shape, subsets, &records))
}
