#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use treehfd_core::{CellIndex, Matrix, Node, Tree, TreeGrids};

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Leaf value on a coarse lattice so sums stay readable.
    pub fn value(&mut self) -> f64 {
        (self.below(17) as f64 - 8.0) / 4.0
    }
}

/// Random tree over `p` features, thresholds on the lattice k/8.
pub fn random_tree(g: &mut Gen, p: usize, max_depth: usize, split_prob: f64) -> Tree {
    fn grow(g: &mut Gen, nodes: &mut Vec<Node>, p: usize, depth: usize, max_depth: usize, prob: f64) -> usize {
        let id = nodes.len();
        if depth < max_depth && (depth == 0 || g.coin(prob)) {
            nodes.push(Node::Leaf { value: 0.0 });
            let feature = g.below(p);
            let threshold = (1 + g.below(7)) as f64 / 8.0;
            let left = grow(g, nodes, p, depth + 1, max_depth, prob);
            let right = grow(g, nodes, p, depth + 1, max_depth, prob);
            nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        } else {
            nodes.push(Node::Leaf { value: g.value() });
        }
        id
    }
    let mut nodes = Vec::new();
    let root = grow(g, &mut nodes, p, 0, max_depth, split_prob);
    Tree::new(nodes, root).unwrap()
}

pub fn uniform_data(g: &mut Gen, n: usize, p: usize) -> Matrix {
    Matrix::new((0..n * p).map(|_| g.unit()).collect(), n, p).unwrap()
}

/// A point strictly inside the given cell of the full grid.
pub fn point_in_cell(g: &mut Gen, grids: &TreeGrids, p: usize, cell: &[usize]) -> Vec<f64> {
    let mut x: Vec<f64> = (0..p).map(|_| g.unit()).collect();
    for (pos, var) in grids.variables().enumerate() {
        let cuts = grids.get(var).unwrap().cuts();
        let k = cell[pos];
        let lo = if k == 0 { cuts[0] - 1.0 } else { cuts[k - 1] };
        let hi = if k == cuts.len() { cuts[cuts.len() - 1] + 1.0 } else { cuts[k] };
        x[var] = lo + (hi - lo) * (0.05 + 0.9 * g.unit());
    }
    x
}

/// Shape of the full grid over every split variable.
pub fn full_shape(grids: &TreeGrids) -> Vec<usize> {
    grids.variables().map(|v| grids.n_intervals(v)).collect()
}

/// Data with `per_cell` points in every cell of the full grid, so that every
/// projected cell carries mass and the empirical decomposition is exact.
pub fn saturating_data(g: &mut Gen, grids: &TreeGrids, p: usize, per_cell: usize) -> Matrix {
    let shape = full_shape(grids);
    let size: usize = shape.iter().product();
    let mut values = Vec::new();
    for i in 0..size {
        let cell = CellIndex::from_linear(&shape, i).0;
        for _ in 0..1 + g.below(per_cell) {
            values.extend(point_in_cell(g, grids, p, &cell));
        }
    }
    let n = values.len() / p;
    Matrix::new(values, n, p).unwrap()
}
