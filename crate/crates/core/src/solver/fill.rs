use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::partition::{linear_index, CellIndex};

/// Copies values into the cells of a grid that hold no data.
///
/// Empty cells (`mass == 0`) are visited in row-major order. Each takes the
/// value of its axis-adjacent assigned neighbour with the largest mass; ties
/// go to the lowest axis, then to the lower interval. Cells with no assigned
/// neighbour are retried in further passes, where neighbours filled in the
/// previous pass count as assigned.
pub fn fill_empty_cells(shape: &[usize], values: &[f64], mass: &[f64]) -> Result<Vec<f64>> {
    let size: usize = shape.iter().product();
    if values.len() != size || mass.len() != size {
        return Err(Error::Invariant("grid, values and masses disagree in size".into()));
    }
    let mut assigned: Vec<bool> = mass.iter().map(|&m| m > 0.0).collect();
    if !assigned.iter().any(|&a| a) {
        return Err(Error::Invariant("component grid has no cell with data".into()));
    }
    let mut out = values.to_vec();
    let mut pending: Vec<usize> = (0..size).filter(|&i| !assigned[i]).collect();
    let mut neighbour = Vec::with_capacity(shape.len());
    while !pending.is_empty() {
        let snapshot = assigned.clone();
        let mut still = Vec::new();
        for &cell in &pending {
            let coords = CellIndex::from_linear(shape, cell).0;
            let mut best: Option<(usize, f64)> = None;
            for (axis, &len) in shape.iter().enumerate() {
                for step in [-1isize, 1] {
                    let t = coords[axis] as isize + step;
                    if t < 0 || t as usize >= len {
                        continue;
                    }
                    neighbour.clear();
                    neighbour.extend_from_slice(&coords);
                    neighbour[axis] = t as usize;
                    let idx = linear_index(shape, &neighbour);
                    if snapshot[idx] && best.is_none_or(|(_, m)| mass[idx] > m) {
                        best = Some((idx, mass[idx]));
                    }
                }
            }
            match best {
                Some((idx, _)) => {
                    out[cell] = out[idx];
                    assigned[cell] = true;
                }
                None => still.push(cell),
            }
        }
        if still.len() == pending.len() {
            return Err(Error::Invariant("empty cells are unreachable".into()));
        }
        pending = still;
    }
    Ok(out)
}
