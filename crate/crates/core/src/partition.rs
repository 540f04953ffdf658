//! Cartesian tree partitions.
//!
//! Each variable a tree splits on gets the sorted, deduplicated list of its
//! thresholds `s_1 < … < s_m`, defining `m + 1` intervals
//! `(−∞, s_1), [s_1, s_2), …, [s_m, +∞)`. The tree is constant on every
//! cell of the product of these intervals. Variables that are never split on
//! have the single interval `(−∞, +∞)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Node, Tree};

/// Sorted cut points of one variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxisGrid {
    cuts: Vec<f64>,
}

impl AxisGrid {
    /// Cuts must be finite and strictly increasing.
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::Structure("non-finite cut point".into()));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structure("cut points are not strictly increasing".into()));
        }
        Ok(Self { cuts })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn n_intervals(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Index of the left-closed interval containing `x`.
    pub fn interval(&self, x: f64) -> usize {
        self.cuts.partition_point(|&c| c <= x)
    }
}

/// Axis grids of one tree, keyed by variable index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreeGrids {
    axes: BTreeMap<usize, AxisGrid>,
}

impl TreeGrids {
    pub fn from_axes(axes: BTreeMap<usize, AxisGrid>) -> Self {
        Self { axes }
    }

    pub fn axes(&self) -> &BTreeMap<usize, AxisGrid> {
        &self.axes
    }

    pub fn get(&self, var: usize) -> Option<&AxisGrid> {
        self.axes.get(&var)
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    /// Split variables, ascending.
    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.axes.keys().copied()
    }

    pub fn n_intervals(&self, var: usize) -> usize {
        self.axes.get(&var).map_or(1, AxisGrid::n_intervals)
    }

    pub fn interval(&self, var: usize, x: f64) -> usize {
        self.axes.get(&var).map_or(0, |g| g.interval(x))
    }

    /// Interval counts of the variables of `subset`, in order.
    pub fn shape(&self, subset: &SubsetKey) -> Vec<usize> {
        subset.vars().iter().map(|&v| self.n_intervals(v)).collect()
    }

    /// The grids of the variables of `subset`, in order.
    pub fn project(&self, subset: &SubsetKey) -> Vec<AxisGrid> {
        subset
            .vars()
            .iter()
            .map(|v| self.axes.get(v).cloned().unwrap_or_default())
            .collect()
    }
}

/// Sorted set of distinct variable indices.
///
/// Ordered by size first, then lexicographically, so `∅ < {0} < {1} < {0,1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SubsetKey(Vec<usize>);

impl SubsetKey {
    pub fn new(mut vars: Vec<usize>) -> Self {
        vars.sort_unstable();
        vars.dedup();
        Self(vars)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn vars(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.binary_search(&var).is_ok()
    }

    pub fn is_subset_of(&self, other: &SubsetKey) -> bool {
        self.0.iter().all(|v| other.contains(*v))
    }

    /// The subset with the variable at `position` removed.
    pub fn without_position(&self, position: usize) -> SubsetKey {
        let mut vars = self.0.clone();
        vars.remove(position);
        SubsetKey(vars)
    }

    /// All subsets of this set with at most `max_len` elements.
    pub fn subsets_up_to(&self, max_len: usize) -> Vec<SubsetKey> {
        let mut out = vec![SubsetKey::empty()];
        for &v in &self.0 {
            let extended: Vec<SubsetKey> = out
                .iter()
                .filter(|s| s.len() < max_len)
                .map(|s| {
                    let mut vars = s.0.clone();
                    vars.push(v);
                    SubsetKey(vars)
                })
                .collect();
            out.extend(extended);
        }
        out
    }
}

impl Ord for SubsetKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for SubsetKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<&[usize]> for SubsetKey {
    fn from(vars: &[usize]) -> Self {
        Self::new(vars.to_vec())
    }
}

impl<const N: usize> From<[usize; N]> for SubsetKey {
    fn from(vars: [usize; N]) -> Self {
        Self::new(vars.to_vec())
    }
}

/// One interval index per variable of a [`SubsetKey`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CellIndex(pub Vec<usize>);

impl CellIndex {
    /// Row-major position of the cell in a grid of the given shape.
    pub fn linear(&self, shape: &[usize]) -> usize {
        linear_index(shape, &self.0)
    }

    pub fn from_linear(shape: &[usize], index: usize) -> Self {
        let mut coords = vec![0; shape.len()];
        let mut rest = index;
        for (c, &s) in coords.iter_mut().zip(shape).rev() {
            *c = rest % s;
            rest /= s;
        }
        CellIndex(coords)
    }
}

pub(crate) fn linear_index(shape: &[usize], coords: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), coords.len());
    coords
        .iter()
        .zip(shape)
        .fold(0, |acc, (&c, &s)| {
            debug_assert!(c < s);
            acc * s + c
        })
}

/// Per-variable cut points collected over all split nodes of `tree`.
pub fn axis_partitions(tree: &Tree) -> TreeGrids {
    let mut raw: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for node in tree.nodes() {
        if let Node::Split { feature, threshold, .. } = *node {
            raw.entry(feature).or_default().push(threshold);
        }
    }
    let axes = raw
        .into_iter()
        .map(|(var, mut cuts)| {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            (var, AxisGrid { cuts })
        })
        .collect();
    TreeGrids { axes }
}

/// Cell of `x` in the grid over the variables of `subset`.
pub fn locate(grids: &TreeGrids, x: &[f64], subset: &SubsetKey) -> Result<CellIndex> {
    subset
        .vars()
        .iter()
        .map(|&v| {
            let value = *x
                .get(v)
                .ok_or_else(|| Error::Input(format!("point has no coordinate {v}")))?;
            if !value.is_finite() {
                return Err(Error::Input(format!("coordinate {v} is not finite")));
            }
            Ok(grids.interval(v, value))
        })
        .collect::<Result<Vec<_>>>()
        .map(CellIndex)
}

/// Variable subsets of size at most `max_order` drawn from the split
/// variables of each root-to-leaf path, restricted to splits at depth
/// `< max_depth` (root depth 0). Always contains `∅` and is closed under
/// taking subsets.
pub fn collect_subsets(
    tree: &Tree,
    max_order: usize,
    max_depth: Option<usize>,
) -> Result<BTreeSet<SubsetKey>> {
    if max_order == 0 {
        return Err(Error::Config("interaction order must be at least 1".into()));
    }
    if max_depth == Some(0) {
        return Err(Error::Config("subset extraction depth must be at least 1".into()));
    }
    let limit = max_depth.unwrap_or(usize::MAX);
    let mut path_sets: BTreeSet<SubsetKey> = BTreeSet::new();
    let mut stack = vec![(tree.root(), 0usize, Vec::new())];
    while let Some((id, depth, vars)) = stack.pop() {
        match *tree.node(id) {
            Node::Leaf { .. } => {
                path_sets.insert(SubsetKey::new(vars));
            }
            Node::Split { feature, left, right, .. } => {
                let mut next = vars;
                if depth < limit && !next.contains(&feature) {
                    next.push(feature);
                }
                stack.push((right, depth + 1, next.clone()));
                stack.push((left, depth + 1, next));
            }
        }
    }
    let mut out = BTreeSet::new();
    out.insert(SubsetKey::empty());
    for set in &path_sets {
        out.extend(set.subsets_up_to(max_order));
    }
    Ok(out)
}

/// Turns every node at depth `max_depth` into a leaf holding the mean of the
/// original predictions of the sample points routed to it. A node that
/// receives no sample point gets the plain average of its descendant leaves.
pub fn prune_tree(tree: &Tree, max_depth: Option<usize>, sample: &Matrix) -> Tree {
    let cut = match max_depth {
        Some(d) if d < tree.depth() => d,
        _ => return tree.clone(),
    };
    let n_nodes = tree.nodes().len();

    // Sample-weighted sums of the original predictions reaching each node.
    let mut sums = vec![0.0; n_nodes];
    let mut counts = vec![0usize; n_nodes];
    let mut path = Vec::with_capacity(tree.depth() + 1);
    for x in sample.iter_rows() {
        path.clear();
        let mut id = tree.root();
        loop {
            path.push(id);
            match *tree.node(id) {
                Node::Leaf { value } => {
                    for &p in &path {
                        sums[p] += value;
                        counts[p] += 1;
                    }
                    break;
                }
                Node::Split { feature, threshold, left, right } => {
                    id = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    // Unweighted leaf sums below each node, filled bottom-up.
    let order = tree.walk();
    let mut leaf_sum = vec![0.0; n_nodes];
    let mut leaf_count = vec![0usize; n_nodes];
    for &(id, _) in order.iter().rev() {
        match *tree.node(id) {
            Node::Leaf { value } => {
                leaf_sum[id] = value;
                leaf_count[id] = 1;
            }
            Node::Split { left, right, .. } => {
                leaf_sum[id] = leaf_sum[left] + leaf_sum[right];
                leaf_count[id] = leaf_count[left] + leaf_count[right];
            }
        }
    }

    let mut nodes = Vec::new();
    build_pruned(tree, tree.root(), 0, cut, &mut nodes, &|id| {
        if counts[id] > 0 {
            sums[id] / counts[id] as f64
        } else {
            leaf_sum[id] / leaf_count[id] as f64
        }
    });
    Tree::new(nodes, 0).expect("pruning preserves tree structure")
}

fn build_pruned(
    tree: &Tree,
    id: usize,
    depth: usize,
    cut: usize,
    out: &mut Vec<Node>,
    value_of: &dyn Fn(usize) -> f64,
) -> usize {
    let new_id = out.len();
    match *tree.node(id) {
        Node::Split { feature, threshold, left, right } if depth < cut => {
            out.push(Node::Leaf { value: 0.0 });
            let l = build_pruned(tree, left, depth + 1, cut, out, value_of);
            let r = build_pruned(tree, right, depth + 1, cut, out, value_of);
            out[new_id] = Node::Split { feature, threshold, left: l, right: r };
        }
        Node::Leaf { value } => out.push(Node::Leaf { value }),
        Node::Split { .. } => out.push(Node::Leaf { value: value_of(id) }),
    }
    new_id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::xor_tree;

    fn three_split_tree() -> Tree {
        // f0@0.3 at the root, f0@0.6 on the right, f1@0.5 on the left.
        Tree::new(
            vec![
                Node::Split { feature: 0, threshold: 0.3, left: 1, right: 2 },
                Node::Split { feature: 1, threshold: 0.5, left: 3, right: 4 },
                Node::Split { feature: 0, threshold: 0.6, left: 5, right: 6 },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 2.0 },
                Node::Leaf { value: 3.0 },
                Node::Leaf { value: 4.0 },
            ],
            0,
        )
        .unwrap()
    }

    /// Root on f0; left child splits on f1, right child is a leaf.
    fn lopsided_tree() -> Tree {
        Tree::new(
            vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                Node::Split { feature: 1, threshold: 0.5, left: 3, right: 4 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 2.0 },
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn grids_from_splits() {
        let g = axis_partitions(&three_split_tree());
        assert_eq!(g.get(0).unwrap().cuts(), &[0.3, 0.6]);
        assert_eq!(g.get(1).unwrap().cuts(), &[0.5]);
        assert_eq!(g.n_intervals(0), 3);
        assert_eq!(g.n_intervals(1), 2);
        assert_eq!(g.n_intervals(7), 1);

        let dup = Tree::new(
            vec![
                Node::Split { feature: 0, threshold: 0.3, left: 1, right: 2 },
                Node::Split { feature: 0, threshold: 0.3, left: 3, right: 4 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
            ],
            0,
        )
        .unwrap();
        assert_eq!(axis_partitions(&dup).get(0).unwrap().cuts(), &[0.3]);
        assert!(axis_partitions(&Tree::leaf(1.0).unwrap()).is_empty());
    }

    #[test]
    fn locate_is_left_closed() {
        let g = axis_partitions(&three_split_tree());
        let j = SubsetKey::from([0]);
        assert_eq!(locate(&g, &[0.29, 0.0], &j).unwrap(), CellIndex(vec![0]));
        assert_eq!(locate(&g, &[0.3, 0.0], &j).unwrap(), CellIndex(vec![1]));
        assert_eq!(locate(&g, &[0.6, 0.0], &j).unwrap(), CellIndex(vec![2]));
        assert_eq!(locate(&g, &[0.1, 0.1], &SubsetKey::empty()).unwrap(), CellIndex(vec![]));
        let both = SubsetKey::from([0, 1]);
        assert_eq!(locate(&g, &[0.9, 0.9], &both).unwrap(), CellIndex(vec![2, 1]));
        assert!(matches!(locate(&g, &[f64::NAN, 0.0], &j), Err(Error::Input(_))));
    }

    #[test]
    fn linear_round_trip() {
        let shape = [3, 2, 4];
        for i in 0..24 {
            assert_eq!(CellIndex::from_linear(&shape, i).linear(&shape), i);
        }
        assert_eq!(CellIndex(vec![2, 1]).linear(&[3, 2]), 5);
    }

    #[test]
    fn subsets_from_paths() {
        let t = lopsided_tree();
        let all = collect_subsets(&t, 2, None).unwrap();
        let expected: BTreeSet<SubsetKey> = [
            SubsetKey::empty(),
            SubsetKey::from([0]),
            SubsetKey::from([1]),
            SubsetKey::from([0, 1]),
        ]
        .into_iter()
        .collect();
        assert_eq!(all, expected);

        let mains = collect_subsets(&t, 1, None).unwrap();
        assert_eq!(mains.len(), 3);
        assert!(!mains.contains(&SubsetKey::from([0, 1])));

        let shallow = collect_subsets(&t, 2, Some(1)).unwrap();
        let expected: BTreeSet<SubsetKey> =
            [SubsetKey::empty(), SubsetKey::from([0])].into_iter().collect();
        assert_eq!(shallow, expected);

        let leaf = collect_subsets(&Tree::leaf(0.0).unwrap(), 2, None).unwrap();
        assert_eq!(leaf.len(), 1);
        assert!(collect_subsets(&t, 0, None).is_err());
    }

    #[test]
    fn subset_ordering() {
        let mut v = [SubsetKey::from([0, 1]), SubsetKey::from([1]), SubsetKey::empty(), SubsetKey::from([0])];
        v.sort();
        assert_eq!(v[0], SubsetKey::empty());
        assert_eq!(v[1], SubsetKey::from([0]));
        assert_eq!(v[3], SubsetKey::from([0, 1]));
    }

    #[test]
    fn prune_identity_and_full_collapse() {
        let t = xor_tree();
        let sample = Matrix::from_rows(&[[0.25, 0.25], [0.25, 0.75], [0.75, 0.75]]).unwrap();
        assert_eq!(prune_tree(&t, None, &sample), t);
        assert_eq!(prune_tree(&t, Some(2), &sample), t);
        let collapsed = prune_tree(&t, Some(0), &sample);
        assert_eq!(collapsed.nodes().len(), 1);
        // Mean of predictions 1, −1, 1.
        assert!((collapsed.predict(&[0.0, 0.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn prune_weighted_stump() {
        let t = Tree::stump(0, 0.5, -1.0, 1.0).unwrap();
        let sample = Matrix::from_rows(&[[0.1], [0.2], [0.3], [0.9]]).unwrap();
        let pruned = prune_tree(&t, Some(0), &sample);
        assert_eq!(pruned.predict(&[0.0]), -0.5);
    }

    #[test]
    fn prune_empty_node_uses_leaf_average() {
        let t = xor_tree();
        // No sample point reaches the right subtree.
        let sample = Matrix::from_rows(&[[0.1, 0.1], [0.2, 0.2]]).unwrap();
        let pruned = prune_tree(&t, Some(1), &sample);
        assert_eq!(pruned.predict(&[0.1, 0.1]), 1.0);
        assert_eq!(pruned.predict(&[0.9, 0.1]), 0.0);
    }
}
