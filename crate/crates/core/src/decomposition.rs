//! Fitted decompositions: storage, evaluation and tabulation.
//!
//! Per-tree tables are kept side by side rather than merged into one refined
//! grid, so evaluating a component costs one binary search per axis and tree.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::partition::{AxisGrid, SubsetKey};
use crate::stats::variance;

/// Piecewise-constant function of one tree over the grid of a subset.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTable {
    axes: Vec<AxisGrid>,
    values: Vec<f64>,
}

impl TreeTable {
    /// `values` is row-major over the product of `axes`.
    pub fn new(axes: Vec<AxisGrid>, values: Vec<f64>) -> Result<Self> {
        let size: usize = axes.iter().map(AxisGrid::n_intervals).product();
        if values.len() != size {
            return Err(Error::Structure(format!(
                "table has {} values for a grid of {size} cells",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("table holds a non-finite value".into()));
        }
        Ok(Self { axes, values })
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(AxisGrid::n_intervals).collect()
    }

    /// Value at `x`, reading the coordinates `vars` (one per axis).
    pub fn eval(&self, vars: &[usize], x: &[f64]) -> f64 {
        let idx = self
            .axes
            .iter()
            .zip(vars)
            .fold(0, |acc, (axis, &v)| acc * axis.n_intervals() + axis.interval(x[v]));
        self.values[idx]
    }
}

/// One component of the decomposition: a sum of per-tree tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    subset: SubsetKey,
    trees: Vec<TreeTable>,
}

impl ComponentTable {
    pub fn new(subset: SubsetKey) -> Self {
        Self { subset, trees: Vec::new() }
    }

    pub fn push(&mut self, table: TreeTable) {
        debug_assert_eq!(table.axes.len(), self.subset.len());
        self.trees.push(table);
    }

    pub fn subset(&self) -> &SubsetKey {
        &self.subset
    }

    pub fn trees(&self) -> &[TreeTable] {
        &self.trees
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(0.0, |acc, t| acc + t.eval(self.subset.vars(), x))
    }
}

/// Settings and summary of the fit that produced a [`Decomposition`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitMeta {
    pub max_order: usize,
    pub prune_depth: Option<usize>,
    pub subset_depth: Option<usize>,
    pub n_samples: usize,
    pub n_trees: usize,
    /// Mean squared gap between the decomposition and the ensemble on the
    /// fitting sample.
    pub residual_mse: f64,
}

/// `x ↦ constant + Σ_J η^(J)(x_J)` over the stored non-empty subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    n_features: usize,
    constant: f64,
    components: BTreeMap<SubsetKey, ComponentTable>,
    pub(crate) meta: FitMeta,
}

impl Decomposition {
    pub fn new(
        n_features: usize,
        constant: f64,
        components: BTreeMap<SubsetKey, ComponentTable>,
        meta: FitMeta,
    ) -> Self {
        Self {
            n_features,
            constant,
            components,
            meta,
        }
    }

    /// Validating constructor for decoded documents.
    pub fn from_parts(
        n_features: usize,
        constant: f64,
        components: Vec<ComponentTable>,
        meta: FitMeta,
    ) -> Result<Self> {
        if !constant.is_finite() {
            return Err(Error::Structure("constant is not finite".into()));
        }
        let mut map = BTreeMap::new();
        for c in components {
            if c.subset.is_empty() {
                return Err(Error::Structure("the empty subset is stored as the constant".into()));
            }
            if c.subset.vars().iter().any(|&v| v >= n_features) {
                return Err(Error::Structure(format!(
                    "component {:?} uses a variable beyond {n_features} features",
                    c.subset.vars()
                )));
            }
            if c.trees.iter().any(|t| t.axes.len() != c.subset.len()) {
                return Err(Error::Structure(format!(
                    "component {:?} has a table of the wrong dimension",
                    c.subset.vars()
                )));
            }
            let key = c.subset.clone();
            if map.insert(key, c).is_some() {
                return Err(Error::Structure("duplicate component".into()));
            }
        }
        Ok(Self::new(n_features, constant, map, meta))
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn components(&self) -> &BTreeMap<SubsetKey, ComponentTable> {
        &self.components
    }

    pub fn component(&self, subset: &SubsetKey) -> Option<&ComponentTable> {
        self.components.get(subset)
    }

    pub fn meta(&self) -> &FitMeta {
        &self.meta
    }

    /// Stored subsets, constant excluded.
    pub fn subsets(&self) -> impl Iterator<Item = &SubsetKey> {
        self.components.keys()
    }

    fn check_point(&self, subset: &SubsetKey, x: &[f64]) -> Result<()> {
        for &v in subset.vars() {
            match x.get(v) {
                None => return Err(Error::Input(format!("point has no coordinate {v}"))),
                Some(value) if !value.is_finite() => {
                    return Err(Error::Input(format!("coordinate {v} is not finite")))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Value of the `subset` component at `x`: the constant for `∅`, zero for
    /// a subset that was never fitted.
    pub fn eval_component(&self, subset: &SubsetKey, x: &[f64]) -> Result<f64> {
        self.check_point(subset, x)?;
        Ok(self.eval_component_unchecked(subset, x))
    }

    pub(crate) fn eval_component_unchecked(&self, subset: &SubsetKey, x: &[f64]) -> f64 {
        if subset.is_empty() {
            return self.constant;
        }
        self.components.get(subset).map_or(0.0, |c| c.eval(x))
    }

    /// Constant plus every stored component at `x`.
    pub fn eval_sum(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.n_features {
            return Err(Error::Input(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.n_features
            )));
        }
        if x[..self.n_features].iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("point has a non-finite coordinate".into()));
        }
        Ok(self.eval_sum_unchecked(x))
    }

    pub(crate) fn eval_sum_unchecked(&self, x: &[f64]) -> f64 {
        self.components
            .values()
            .fold(self.constant, |acc, c| acc + c.eval(x))
    }

    /// Values of one component over the rows of `data`.
    pub fn component_values(&self, subset: &SubsetKey, data: &Matrix) -> Vec<f64> {
        data.iter_rows()
            .map(|x| self.eval_component_unchecked(subset, x))
            .collect()
    }

    /// Empirical variance of one component over `data`.
    pub fn component_variance(&self, subset: &SubsetKey, data: &Matrix) -> f64 {
        variance(&self.component_values(subset, data))
    }

    /// Evaluates a component of at most two variables on a grid.
    ///
    /// Each output row is `(coordinates, value)` with one coordinate per
    /// variable of `subset`; a two-variable grid is enumerated with the
    /// second variable varying fastest. `∅` gives a single row.
    pub fn component_curve(&self, subset: &SubsetKey, grid: &CurveGrid) -> Result<Vec<(Vec<f64>, f64)>> {
        if subset.len() > 2 {
            return Err(Error::Unsupported(format!(
                "curves are limited to two variables, got {}",
                subset.len()
            )));
        }
        if subset.is_empty() {
            return Ok(vec![(Vec::new(), self.constant)]);
        }
        let axes: Vec<Vec<f64>> = match grid {
            CurveGrid::Explicit(axes) => {
                if axes.len() != subset.len() {
                    return Err(Error::Input(format!(
                        "{} grid axes for {} variables",
                        axes.len(),
                        subset.len()
                    )));
                }
                axes.clone()
            }
            CurveGrid::Regular(points) => {
                let points = if *points == 0 { DEFAULT_CURVE_POINTS } else { *points };
                (0..subset.len())
                    .map(|pos| {
                        let (lo, hi) = self.default_range(subset, pos);
                        regular_axis(lo, hi, points)
                    })
                    .collect()
            }
        };
        let mut x = vec![0.0; self.n_features.max(subset.vars()[subset.len() - 1] + 1)];
        let mut out = Vec::new();
        let vars = subset.vars();
        let mut emit = |coords: Vec<f64>, x: &mut Vec<f64>| -> Result<()> {
            for (&v, &c) in vars.iter().zip(&coords) {
                x[v] = c;
            }
            let value = self.eval_component(subset, x)?;
            out.push((coords, value));
            Ok(())
        };
        if vars.len() == 1 {
            for &a in &axes[0] {
                emit(vec![a], &mut x)?;
            }
        } else {
            for &a in &axes[0] {
                for &b in &axes[1] {
                    emit(vec![a, b], &mut x)?;
                }
            }
        }
        Ok(out)
    }

    /// Span of the cut points of one axis, widened so that the outer
    /// intervals are visible.
    fn default_range(&self, subset: &SubsetKey, position: usize) -> (f64, f64) {
        let cuts = self
            .components
            .get(subset)
            .into_iter()
            .flat_map(|c| c.trees.iter())
            .flat_map(|t| t.axes[position].cuts().iter().copied());
        let (lo, hi) = cuts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c), hi.max(c))
        });
        if !lo.is_finite() {
            return (-1.0, 1.0);
        }
        let margin = if hi > lo { 0.1 * (hi - lo) } else { 1.0 };
        (lo - margin, hi + margin)
    }
}

/// Default number of points per axis of a regular curve grid.
pub const DEFAULT_CURVE_POINTS: usize = 256;

/// Grid specification for [`Decomposition::component_curve`].
#[derive(Debug, Clone, PartialEq)]
pub enum CurveGrid {
    /// Regularly spaced points over the span of the component's cut points;
    /// `0` selects [`DEFAULT_CURVE_POINTS`].
    Regular(usize),
    /// Explicit axis values, one list per variable.
    Explicit(Vec<Vec<f64>>),
}

impl Default for CurveGrid {
    fn default() -> Self {
        CurveGrid::Regular(DEFAULT_CURVE_POINTS)
    }
}

pub(crate) fn regular_axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![(lo + hi) / 2.0];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

/// `points` empirical quantiles of `values` (inclusive of min and max),
/// deduplicated.
pub fn quantile_axis(values: &[f64], points: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() || points == 0 {
        return Vec::new();
    }
    let last = sorted.len() - 1;
    let mut out: Vec<f64> = (0..points)
        .map(|i| {
            let pos = if points == 1 { 0 } else { i * last / (points - 1) };
            sorted[pos]
        })
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures::xor_tree, Ensemble, Tree};
    use crate::solver::{fit_ensemble_hfd, SolveParams};

    fn stump_dec() -> (Decomposition, Matrix) {
        let e = Ensemble::new(vec![Tree::stump(0, 0.5, -1.0, 1.0).unwrap()], 0.0, 1).unwrap();
        let data = Matrix::from_rows(&[[0.2], [0.4], [0.6], [0.8]]).unwrap();
        (fit_ensemble_hfd(&e, &data, &SolveParams::default()).unwrap(), data)
    }

    #[test]
    fn component_and_sum() {
        let (d, data) = stump_dec();
        let j = SubsetKey::from([0]);
        assert!((d.eval_component(&j, &[0.2]).unwrap() + 1.0).abs() < 1e-8);
        assert!((d.eval_sum(&[0.8]).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(d.eval_component(&SubsetKey::from([3]), &[0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(d.eval_component(&SubsetKey::empty(), &[0.3]).unwrap(), d.constant());
        assert!((d.component_variance(&j, &data) - 1.0).abs() < 1e-8);
        assert_eq!(d.component_variance(&SubsetKey::from([2]), &data), 0.0);
        assert_eq!(d.component_variance(&SubsetKey::empty(), &data), 0.0);
        assert!(d.eval_component(&j, &[f64::NAN]).is_err());
    }

    #[test]
    fn xor_sum() {
        let e = Ensemble::new(vec![xor_tree()], 0.0, 2).unwrap();
        let data = Matrix::from_rows(&[[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]).unwrap();
        let d = fit_ensemble_hfd(&e, &data, &SolveParams::default()).unwrap();
        assert!((d.eval_sum(&[0.25, 0.75]).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_only() {
        let d = Decomposition::new(2, 4.5, BTreeMap::new(), FitMeta::default());
        assert_eq!(d.eval_sum(&[1.0, -7.0]).unwrap(), 4.5);
        assert_eq!(d.component_curve(&SubsetKey::empty(), &CurveGrid::default()).unwrap(), vec![(vec![], 4.5)]);
    }

    #[test]
    fn curves() {
        let (d, _) = stump_dec();
        let j = SubsetKey::from([0]);
        let c = d.component_curve(&j, &CurveGrid::Explicit(vec![vec![0.1, 0.9]])).unwrap();
        assert_eq!(c.len(), 2);
        assert!((c[0].1 + 1.0).abs() < 1e-8 && (c[1].1 - 1.0).abs() < 1e-8);
        let c = d.component_curve(&j, &CurveGrid::Regular(0)).unwrap();
        assert_eq!(c.len(), DEFAULT_CURVE_POINTS);
        assert!(c[0].0[0] < 0.5 && c[255].0[0] > 0.5);
        assert!(matches!(
            d.component_curve(&SubsetKey::from([0, 1, 2]), &CurveGrid::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn quantiles() {
        let q = quantile_axis(&[5.0, 1.0, 3.0, 2.0, 4.0], 3);
        assert_eq!(q, vec![1.0, 3.0, 5.0]);
        assert_eq!(quantile_axis(&[1.0, 1.0], 4), vec![1.0]);
    }
}
