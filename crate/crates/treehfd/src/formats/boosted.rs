//! Import of boosted-tree JSON dumps: an array with one nested object per
//! tree, in the layout written by common gradient boosting libraries.
//!
//! ```json
//! [{"nodeid": 0, "split": "f0", "split_condition": 0.5, "yes": 1, "no": 2,
//!   "missing": 1, "children": [{"nodeid": 1, "leaf": -0.1},
//!                              {"nodeid": 2, "leaf": 0.2}]}]
//! ```
//!
//! `yes` is taken when `x < split_condition`. Missing-value routing is
//! ignored since input data never contains missing values. Categorical splits
//! are rejected. Features are named `f<index>` (or given as bare integers).

use serde_json::Value;
use treehfd_core::{Ensemble, Node, Tree};

use super::Obj;
use crate::error::{Error, Result};

/// Builds an ensemble from a dump. The dump carries no base score, so it is
/// passed in. `n_features` defaults to the largest split index plus one.
pub fn import_boosted_dump(text: &str, base_offset: f64, n_features: Option<usize>) -> Result<Ensemble> {
    let doc: Value = serde_json::from_str(text)?;
    let items = doc
        .as_array()
        .ok_or_else(|| Error::parse("$", "expected an array of trees"))?;
    let mut trees = Vec::with_capacity(items.len());
    let mut width = 0;
    for (t, tv) in items.iter().enumerate() {
        let mut nodes = Vec::new();
        let root = flatten(tv, &format!("$[{t}]"), &mut nodes, &mut width)?;
        trees.push(Tree::new(nodes, root).map_err(|e| Error::parse(format!("$[{t}]"), e.to_string()))?);
    }
    let n_features = match n_features {
        Some(n) if n < width => {
            return Err(Error::parse(
                "$",
                format!("dump uses feature {} but only {n} features were declared", width - 1),
            ))
        }
        Some(n) => n,
        None => width,
    };
    Ensemble::new(trees, base_offset, n_features).map_err(|e| Error::parse("$", e.to_string()))
}

fn unsupported(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Unsupported {
        path: path.into(),
        message: message.into(),
    }
}

/// Appends the subtree at `value` to `nodes` and returns its new id.
fn flatten(value: &Value, path: &str, nodes: &mut Vec<Node>, width: &mut usize) -> Result<usize> {
    let obj = Obj::new(value, path)?;
    obj.usize("nodeid")?;
    let id = nodes.len();
    if obj.has("leaf") {
        if obj.has("split") || obj.has("children") {
            return Err(Error::parse(path, "leaf node also carries a split"));
        }
        nodes.push(Node::Leaf { value: obj.f64("leaf")? });
        return Ok(id);
    }
    for key in ["categories", "cats", "categories_nodes"] {
        if obj.has(key) {
            return Err(unsupported(obj.field(key), "categorical splits are not supported"));
        }
    }
    let feature = parse_feature(obj.get("split")?, &obj.field("split"))?;
    *width = (*width).max(feature + 1);
    if !obj.has("split_condition") {
        return Err(unsupported(path, "split without a numeric split_condition"));
    }
    let threshold = obj.f64("split_condition")?;
    let yes = obj.usize("yes")?;
    let no = obj.usize("no")?;
    let children = obj.array("children")?;
    if children.len() != 2 {
        return Err(Error::parse(
            obj.field("children"),
            format!("expected 2 children, found {}", children.len()),
        ));
    }
    let child_by_id = |want: usize| -> Result<&Value> {
        children
            .iter()
            .find(|c| c.get("nodeid").and_then(Value::as_u64) == Some(want as u64))
            .ok_or_else(|| Error::parse(obj.field("children"), format!("no child with nodeid {want}")))
    };
    let (yes_v, no_v) = (child_by_id(yes)?, child_by_id(no)?);
    if yes == no {
        return Err(Error::parse(path, "yes and no point at the same node"));
    }
    // Placeholder, patched once both children have ids.
    nodes.push(Node::Leaf { value: 0.0 });
    let left = flatten(yes_v, &format!("{path}.children[{}]", position(children, yes)), nodes, width)?;
    let right = flatten(no_v, &format!("{path}.children[{}]", position(children, no)), nodes, width)?;
    nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    Ok(id)
}

fn position(children: &[Value], nodeid: usize) -> usize {
    children
        .iter()
        .position(|c| c.get("nodeid").and_then(Value::as_u64) == Some(nodeid as u64))
        .unwrap_or(0)
}

fn parse_feature(value: &Value, path: &str) -> Result<usize> {
    if let Some(i) = value.as_u64() {
        return usize::try_from(i).map_err(|_| Error::parse(path, "feature index too large"));
    }
    let name = value
        .as_str()
        .ok_or_else(|| Error::parse(path, "expected a feature name"))?;
    name.strip_prefix('f')
        .unwrap_or(name)
        .parse::<usize>()
        .map_err(|_| unsupported(path, format!("feature name \"{name}\" is not of the form f<index>")))
}
