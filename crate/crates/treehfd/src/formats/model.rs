//! Native model document:
//!
//! ```json
//! {"n_features": 2, "base_offset": 0.0,
//!  "trees": [{"root": 0, "nodes": [
//!     {"id": 0, "feature": 0, "threshold": 0.5, "left": 1, "right": 2},
//!     {"id": 1, "leaf": -1.0}, {"id": 2, "leaf": 1.0}]}]}
//! ```
//!
//! Node ids are positions in the tree's node list; they may appear in any
//! order but must cover `0..nodes.len()` exactly once. A split sends `x` left
//! when `x[feature] < threshold`.

use serde_json::{json, Value};
use treehfd_core::{Ensemble, Node, Tree};

use super::{to_text, Obj};
use crate::error::{Error, Result};

pub fn parse_ensemble(text: &str) -> Result<Ensemble> {
    let doc: Value = serde_json::from_str(text)?;
    ensemble_from_value(&doc)
}

pub fn ensemble_from_value(doc: &Value) -> Result<Ensemble> {
    let top = Obj::new(doc, "$")?;
    let n_features = top.usize("n_features")?;
    let base_offset = top.f64("base_offset")?;
    let mut trees = Vec::new();
    for (t, tv) in top.array("trees")?.iter().enumerate() {
        trees.push(tree_from_value(tv, &format!("$.trees[{t}]"))?);
    }
    Ensemble::new(trees, base_offset, n_features).map_err(|e| Error::parse("$", e.to_string()))
}

fn tree_from_value(value: &Value, path: &str) -> Result<Tree> {
    let obj = Obj::new(value, path)?;
    let root = obj.usize("root")?;
    let raw = obj.array("nodes")?;
    let mut nodes: Vec<Option<Node>> = vec![None; raw.len()];
    for (i, nv) in raw.iter().enumerate() {
        let n = Obj::new(nv, format!("{path}.nodes[{i}]"))?;
        let id = n.usize("id")?;
        if id >= raw.len() {
            return Err(Error::parse(
                n.field("id"),
                format!("id {id} out of range for {} nodes", raw.len()),
            ));
        }
        let node = match (n.has("leaf"), n.has("feature")) {
            (true, false) => Node::Leaf { value: n.f64("leaf")? },
            (false, true) => Node::Split {
                feature: n.usize("feature")?,
                threshold: n.f64("threshold")?,
                left: n.usize("left")?,
                right: n.usize("right")?,
            },
            (true, true) => return Err(Error::parse(n.path, "node has both \"leaf\" and \"feature\"")),
            (false, false) => return Err(Error::parse(n.path, "node has neither \"leaf\" nor \"feature\"")),
        };
        if nodes[id].replace(node).is_some() {
            return Err(Error::parse(n.field("id"), format!("duplicate id {id}")));
        }
    }
    // Every slot is filled: `raw.len()` distinct ids below `raw.len()`.
    let nodes = nodes.into_iter().map(Option::unwrap).collect();
    Tree::new(nodes, root).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn ensemble_to_value(ensemble: &Ensemble) -> Value {
    let trees: Vec<Value> = ensemble
        .trees()
        .iter()
        .map(|tree| {
            let nodes: Vec<Value> = tree
                .nodes()
                .iter()
                .enumerate()
                .map(|(id, node)| match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => json!({
                        "id": id, "feature": feature, "threshold": threshold,
                        "left": left, "right": right,
                    }),
                    Node::Leaf { value } => json!({"id": id, "leaf": value}),
                })
                .collect();
            json!({"root": tree.root(), "nodes": nodes})
        })
        .collect();
    json!({
        "n_features": ensemble.n_features(),
        "base_offset": ensemble.base_offset(),
        "trees": trees,
    })
}

pub fn serialize_ensemble(ensemble: &Ensemble) -> String {
    to_text(&ensemble_to_value(ensemble))
}
