//! Deterministic first-order gradient boosting for squared loss.
//!
//! Exact greedy splits over midpoints of consecutive distinct feature values.
//! Ties are broken by lowest feature index, then lowest threshold. Leaf values
//! are `learning_rate × mean residual`, so the returned ensemble needs no
//! further aggregation coefficient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Ensemble, Node, Tree};
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    /// Reserved. Training does not sample and is fully deterministic.
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            learning_rate: 0.3,
            min_samples_leaf: 1,
            min_gain: 0.0,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {} is outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if !self.min_gain.is_finite() || self.min_gain < 0.0 {
            return Err(Error::Config(format!("min_gain {} must be finite and ≥ 0", self.min_gain)));
        }
        Ok(())
    }
}

/// Candidate split found by a column scan.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    feature: usize,
    threshold: f64,
    /// Number of samples routed left.
    left_count: usize,
    gain: f64,
}

/// Threshold strictly above `lo` and at most `hi`, so `lo` routes left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Best squared-error reduction over splits of `order`, which lists sample
/// ids sorted by `values`.
fn scan(
    values: &[f64],
    residuals: &[f64],
    order: &[usize],
    min_leaf: usize,
    total: f64,
) -> Option<(f64, usize, f64)> {
    let n = order.len();
    let base = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut left_sum = 0.0;
    for k in 1..n {
        left_sum += residuals[order[k - 1]];
        let lo = values[order[k - 1]];
        let hi = values[order[k]];
        if lo >= hi || k < min_leaf || n - k < min_leaf {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = (left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - base)
            .max(0.0);
        if best.is_none_or(|(_, _, g)| gain > g) {
            best = Some((midpoint(lo, hi), k, gain));
        }
    }
    best
}

/// Best split of a sorted column against aligned residuals, as
/// `(threshold, gain)` with `gain = n·Var(before) − Σ n_child·Var(child)`.
///
/// Returns `None` when all values are identical.
pub fn best_split(values: &[f64], residuals: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(values.len(), residuals.len());
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    let order: Vec<usize> = (0..values.len()).collect();
    let total = residuals.iter().sum();
    scan(values, residuals, &order, 1, total).map(|(t, _, g)| (t, g))
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    residuals: &'a [f64],
    cfg: &'a GbtConfig,
    nodes: Vec<Node>,
    /// Leaf value assigned to every sample of the tree being grown.
    fitted: Vec<f64>,
}

impl Builder<'_> {
    fn best(&self, sorted: &[Vec<usize>], total: f64) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for (feature, order) in sorted.iter().enumerate() {
            let found = scan(
                &self.columns[feature],
                self.residuals,
                order,
                self.cfg.min_samples_leaf,
                total,
            );
            if let Some((threshold, left_count, gain)) = found {
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature,
                        threshold,
                        left_count,
                        gain,
                    });
                }
            }
        }
        best
    }

    /// Grows the subtree over the samples in `sorted` (one id list per
    /// feature, each sorted by that feature) and returns its node id.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let members = &sorted[0];
        let n = members.len();
        let total: f64 = members.iter().map(|&i| self.residuals[i]).sum();
        let sq: f64 = members.iter().map(|&i| self.residuals[i] * self.residuals[i]).sum();
        let sse = (sq - total * total / n as f64).max(0.0);
        let eps = 1e-12 * sq.max(f64::MIN_POSITIVE);

        let split = if depth < self.cfg.max_depth && sse > eps {
            self.best(&sorted, total).filter(|c| {
                // A split must beat min_gain. An exact tie is only taken when
                // the children can still be split, so XOR-like patterns with no
                // first-level gain remain learnable at depth two.
                c.gain > self.cfg.min_gain + eps
                    || (c.gain + eps >= self.cfg.min_gain && depth + 1 < self.cfg.max_depth)
            })
        } else {
            None
        };

        let id = self.nodes.len();
        match split {
            None => {
                let value = self.cfg.learning_rate * total / n as f64;
                self.nodes.push(Node::Leaf { value });
                for &i in members {
                    self.fitted[i] = value;
                }
            }
            Some(c) => {
                self.nodes.push(Node::Leaf { value: 0.0 });
                let column = &self.columns[c.feature];
                let goes_left = |i: usize| column[i] < c.threshold;
                let mut left = Vec::with_capacity(sorted.len());
                let mut right = Vec::with_capacity(sorted.len());
                for order in sorted {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        order.into_iter().partition(|&i| goes_left(i));
                    debug_assert_eq!(l.len(), c.left_count);
                    left.push(l);
                    right.push(r);
                }
                let l = self.grow(left, depth + 1);
                let r = self.grow(right, depth + 1);
                self.nodes[id] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: l,
                    right: r,
                };
            }
        }
        id
    }
}

/// Fits a boosted ensemble to `(x, y)`. The base offset is `mean(y)`.
///
/// Boosting stops early once a tree cannot split its root, since every later
/// tree would be identical. A constant target therefore yields zero trees.
pub fn fit_gbt(x: &Matrix, y: &[f64], cfg: &GbtConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let n = x.rows();
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 samples, got {n}")));
    }
    if y.len() != n {
        return Err(Error::Input(format!("{} targets for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite target value".into()));
    }
    let p = x.cols();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let presorted: Vec<Vec<usize>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let base_offset = mean(y);
    let mut residuals: Vec<f64> = y.iter().map(|v| v - base_offset).collect();
    let mut trees = Vec::new();
    if p > 0 {
        for _ in 0..cfg.n_trees {
            let mut builder = Builder {
                columns: &columns,
                residuals: &residuals,
                cfg,
                nodes: Vec::new(),
                fitted: vec![0.0; n],
            };
            builder.grow(presorted.clone(), 0);
            if builder.nodes.len() == 1 {
                break;
            }
            let fitted = builder.fitted;
            let tree = Tree::new(builder.nodes, 0)?;
            for (r, f) in residuals.iter_mut().zip(&fitted) {
                *r -= f;
            }
            trees.push(tree);
        }
    }
    Ensemble::new(trees, base_offset, p)
}

/// Mean squared training error of an ensemble.
pub fn training_mse(ensemble: &Ensemble, x: &Matrix, y: &[f64]) -> f64 {
    let sq: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, t)| {
            let e = ensemble.predict(row) - t;
            e * e
        })
        .sum();
    sq / y.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    /// Exhaustive gain of every admissible threshold, computed from
    /// within-group variances.
    fn brute_gains(values: &[f64], residuals: &[f64]) -> Vec<(f64, f64)> {
        let sse = |r: &[f64]| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            r.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        };
        let mut out = Vec::new();
        for k in 1..values.len() {
            if values[k - 1] < values[k] {
                let thr = (values[k - 1] + values[k]) / 2.0;
                out.push((thr, sse(residuals) - sse(&residuals[..k]) - sse(&residuals[k..])));
            }
        }
        out
    }

    #[test]
    fn two_point_split() {
        assert_eq!(best_split(&[0.0, 1.0], &[0.0, 10.0]), Some((0.5, 50.0)));
        assert_eq!(brute_gains(&[0.0, 1.0], &[0.0, 10.0]), vec![(0.5, 50.0)]);
    }

    #[test]
    fn equal_residuals_have_no_gain() {
        let (_, g) = best_split(&[1.0, 2.0, 3.0], &[0.7, 0.7, 0.7]).unwrap();
        assert!(g.abs() < 1e-15);
        assert_eq!(best_split(&[2.0, 2.0], &[1.0, -1.0]), None);
    }

    #[test]
    fn alternating_residuals() {
        let values = [1.0, 2.0, 3.0, 4.0];
        let residuals = [-1.0, 1.0, -1.0, 1.0];
        // Enumeration: gains 4/3, 0, 4/3 at thresholds 1.5, 2.5, 3.5.
        let brute = brute_gains(&values, &residuals);
        assert_eq!(brute.len(), 3);
        assert!((brute[0].1 - 4.0 / 3.0).abs() < 1e-12);
        assert!(brute[1].1.abs() < 1e-12);
        assert!((brute[2].1 - 4.0 / 3.0).abs() < 1e-12);
        let (t, g) = best_split(&values, &residuals).unwrap();
        assert_eq!(t, 1.5);
        assert!((g - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_scan() {
        let values = [0.1, 0.2, 0.2, 0.5, 0.9, 1.3];
        let residuals = [3.0, -1.0, 2.0, 0.5, -2.0, 4.0];
        let brute = brute_gains(&values, &residuals);
        let best = brute
            .iter()
            .fold(brute[0], |b, &c| if c.1 > b.1 { c } else { b });
        let (t, g) = best_split(&values, &residuals).unwrap();
        assert_eq!(t, best.0);
        assert!((g - best.1).abs() < 1e-12);
    }

    #[test]
    fn constant_target_has_no_trees() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let e = fit_gbt(&x, &[3.0, 3.0, 3.0], &GbtConfig::default()).unwrap();
        assert_eq!(e.base_offset(), 3.0);
        assert!(e.trees().is_empty());
        assert_eq!(e.predict(&[5.0]), 3.0);
    }

    #[test]
    fn step_is_split_at_midpoint() {
        let xs: Vec<[f64; 1]> = (1..=9).map(|i| [i as f64 / 10.0]).collect();
        let y: Vec<f64> = xs.iter().map(|r| if r[0] >= 0.5 { 1.0 } else { 0.0 }).collect();
        let x = Matrix::from_rows(&xs).unwrap();
        let cfg = GbtConfig { n_trees: 1, max_depth: 1, learning_rate: 1.0, ..Default::default() };
        let e = fit_gbt(&x, &y, &cfg).unwrap();
        match e.trees()[0].node(0) {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!((threshold - 0.45).abs() < 1e-12);
            }
            Node::Leaf { .. } => panic!("expected a split"),
        }
        assert!(training_mse(&e, &x, &y) < 1e-24);

        let x = Matrix::from_rows(&[[0.4], [0.6]]).unwrap();
        let e = fit_gbt(&x, &[0.0, 1.0], &cfg).unwrap();
        assert!(matches!(e.trees()[0].node(0), Node::Split { threshold, .. } if *threshold == 0.5));
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let y = [1.0, -1.0, -1.0, 1.0];
        let shallow = GbtConfig { max_depth: 1, learning_rate: 1.0, ..Default::default() };
        let e = fit_gbt(&x, &y, &shallow).unwrap();
        assert!(e.trees().is_empty());
        assert_eq!(training_mse(&e, &x, &y), 1.0);

        let deep = GbtConfig { max_depth: 2, learning_rate: 1.0, n_trees: 1, ..Default::default() };
        let e = fit_gbt(&x, &y, &deep).unwrap();
        assert_eq!(training_mse(&e, &x, &y), 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let bad = GbtConfig { learning_rate: 0.0, ..Default::default() };
        assert!(matches!(fit_gbt(&x, &[0.0, 1.0], &bad), Err(Error::Config(_))));
        let one = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(matches!(fit_gbt(&one, &[0.0], &GbtConfig::default()), Err(Error::Config(_))));
    }
}
