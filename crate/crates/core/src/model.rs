//! Binary regression trees and additive ensembles of them.
//!
//! Routing convention: a point goes to the left child iff
//! `x[feature] < threshold`, so a value equal to the threshold goes right.
//! Aggregation coefficients (learning rate, `1/M`) are expected to be
//! already folded into the leaf values.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Node of a binary regression tree. Children are indices into the owning
/// tree's node list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A validated binary regression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    root: usize,
    depth: usize,
}

impl Tree {
    /// Validates the node list: every child id exists, every node is reached
    /// exactly once from `root`, and all thresholds and leaf values are finite.
    pub fn new(nodes: Vec<Node>, root: usize) -> Result<Self> {
        if root >= nodes.len() {
            return Err(Error::Structure(format!(
                "root id {root} is not among the {} nodes",
                nodes.len()
            )));
        }
        let mut seen = vec![false; nodes.len()];
        let mut depth = 0;
        let mut stack = vec![(root, 0usize)];
        while let Some((id, d)) = stack.pop() {
            if seen[id] {
                return Err(Error::Structure(format!(
                    "node {id} is reachable more than once"
                )));
            }
            seen[id] = true;
            depth = depth.max(d);
            match nodes[id] {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Structure(format!("leaf {id} has non-finite value")));
                    }
                }
                Node::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return Err(Error::Structure(format!(
                            "node {id} has non-finite threshold"
                        )));
                    }
                    for child in [left, right] {
                        if child >= nodes.len() {
                            return Err(Error::Structure(format!(
                                "node {id} references absent child {child}"
                            )));
                        }
                        stack.push((child, d + 1));
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Structure(format!(
                "node {orphan} is not reachable from the root"
            )));
        }
        Ok(Self { nodes, root, depth })
    }

    /// A tree made of a single leaf.
    pub fn leaf(value: f64) -> Result<Self> {
        Self::new(vec![Node::Leaf { value }], 0)
    }

    /// A depth-one tree: `left` if `x[feature] < threshold`, else `right`.
    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Result<Self> {
        Self::new(
            vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: left },
                Node::Leaf { value: right },
            ],
            0,
        )
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Maximum number of edges on a root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Id of the leaf reached by `x`.
    pub fn leaf_id(&self, x: &[f64]) -> usize {
        let mut id = self.root;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] < threshold { left } else { right },
            }
        }
    }

    /// Value of the leaf reached by `x`.
    ///
    /// Panics if `x` is shorter than a split feature index requires.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_id(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_id returns a leaf"),
        }
    }

    /// Largest feature index used by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Node ids in depth-first order (left before right), with node depths.
    pub fn walk(&self) -> Vec<(usize, usize)> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, 0)];
        while let Some((id, d)) = stack.pop() {
            order.push((id, d));
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push((right, d + 1));
                stack.push((left, d + 1));
            }
        }
        order
    }
}

/// Additive tree ensemble: `base_offset + Σ_ℓ T_ℓ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<Tree>,
    base_offset: f64,
    n_features: usize,
}

impl Ensemble {
    pub fn new(trees: Vec<Tree>, base_offset: f64, n_features: usize) -> Result<Self> {
        if !base_offset.is_finite() {
            return Err(Error::Structure("base offset is not finite".into()));
        }
        for (i, tree) in trees.iter().enumerate() {
            if let Some(f) = tree.max_feature() {
                if f >= n_features {
                    return Err(Error::Structure(format!(
                        "tree {i} splits on feature {f} but the ensemble has {n_features} features"
                    )));
                }
            }
        }
        Ok(Self {
            trees,
            base_offset,
            n_features,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn base_offset(&self) -> f64 {
        self.base_offset
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// `base_offset` plus the tree predictions, summed in tree order.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.base_offset, |acc, t| acc + t.predict(x))
    }

    pub(crate) fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.n_features {
            return Err(Error::Input(format!(
                "data has {cols} columns but the model expects {}",
                self.n_features
            )));
        }
        Ok(())
    }
}
