//! Decomposition document:
//!
//! ```json
//! {"n_features": 6, "constant": 0.12,
//!  "components": [{"vars": [0, 1], "trees": [
//!     {"cuts": {"0": [-0.3, 0.8], "1": [0.1]}, "beta": [0.1, -0.2, 0.3, 0.0, 0.5, -0.4]}]}],
//!  "meta": {"max_order": 2, "prune_depth": null, "subset_depth": null,
//!           "n_samples": 5000, "n_trees": 100, "residual_mse": 1e-4}}
//! ```
//!
//! `beta` is row-major over the cells of the tree's grid on `vars`. Floats are
//! written in shortest round-trip form, so a reloaded document evaluates to
//! the same bits.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use treehfd_core::{AxisGrid, ComponentTable, Decomposition, FitMeta, SubsetKey, TreeTable};

use super::{f64_array, to_text, Obj};
use crate::error::{Error, Result};

pub fn decomposition_to_value(dec: &Decomposition) -> Value {
    let components: Vec<Value> = dec
        .components()
        .values()
        .map(|c| {
            let vars = c.subset().vars();
            let trees: Vec<Value> = c
                .trees()
                .iter()
                .map(|t| {
                    let cuts: serde_json::Map<String, Value> = vars
                        .iter()
                        .zip(t.axes())
                        .map(|(v, a)| (v.to_string(), json!(a.cuts())))
                        .collect();
                    json!({"cuts": cuts, "beta": t.values()})
                })
                .collect();
            json!({"vars": vars, "trees": trees})
        })
        .collect();
    let m = dec.meta();
    json!({
        "n_features": dec.n_features(),
        "constant": dec.constant(),
        "components": components,
        "meta": {
            "max_order": m.max_order,
            "prune_depth": m.prune_depth,
            "subset_depth": m.subset_depth,
            "n_samples": m.n_samples,
            "n_trees": m.n_trees,
            "residual_mse": m.residual_mse,
        },
    })
}

pub fn serialize_decomposition(dec: &Decomposition) -> String {
    to_text(&decomposition_to_value(dec))
}

pub fn parse_decomposition(text: &str) -> Result<Decomposition> {
    let doc: Value = serde_json::from_str(text)?;
    decomposition_from_value(&doc)
}

pub fn decomposition_from_value(doc: &Value) -> Result<Decomposition> {
    let top = Obj::new(doc, "$")?;
    let n_features = top.usize("n_features")?;
    let constant = top.f64("constant")?;
    let mut components = Vec::new();
    for (c, cv) in top.array("components")?.iter().enumerate() {
        let path = format!("$.components[{c}]");
        let obj = Obj::new(cv, path.clone())?;
        let vars = obj
            .array("vars")?
            .iter()
            .map(|v| v.as_u64().map(|v| v as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::parse(obj.field("vars"), "expected feature indices"))?;
        let subset = SubsetKey::new(vars.clone());
        if subset.vars() != vars.as_slice() {
            return Err(Error::parse(obj.field("vars"), "indices must be strictly increasing"));
        }
        let mut table = ComponentTable::new(subset);
        for (t, tv) in obj.array("trees")?.iter().enumerate() {
            let tpath = format!("{path}.trees[{t}]");
            let tobj = Obj::new(tv, tpath.clone())?;
            let cuts = Obj::new(tobj.get("cuts")?, tobj.field("cuts"))?;
            let mut axes = Vec::with_capacity(vars.len());
            for v in &vars {
                let key = v.to_string();
                let raw = f64_array(cuts.get(&key)?, &cuts.field(&key))?;
                axes.push(AxisGrid::new(raw).map_err(|e| Error::parse(cuts.field(&key), e.to_string()))?);
            }
            let beta = f64_array(tobj.get("beta")?, &tobj.field("beta"))?;
            table.push(TreeTable::new(axes, beta).map_err(|e| Error::parse(tpath, e.to_string()))?);
        }
        components.push(table);
    }
    let meta = parse_meta(&Obj::new(top.get("meta")?, "$.meta")?)?;
    Decomposition::from_parts(n_features, constant, components, meta).map_err(|e| Error::parse("$", e.to_string()))
}

fn parse_meta(m: &Obj<'_>) -> Result<FitMeta> {
    let depth = |key: &str| -> Result<Option<usize>> {
        match m.get(key)? {
            Value::Null => Ok(None),
            _ => m.usize(key).map(Some),
        }
    };
    Ok(FitMeta {
        max_order: m.usize("max_order")?,
        prune_depth: depth("prune_depth")?,
        subset_depth: depth("subset_depth")?,
        n_samples: m.usize("n_samples")?,
        n_trees: m.usize("n_trees")?,
        residual_mse: m.f64("residual_mse")?,
    })
}

/// Tabulated component as CSV: `x1,value` or `x1,x2,value`.
pub fn curve_to_csv(points: &[(Vec<f64>, f64)]) -> Result<String> {
    let arity = points.first().map_or(0, |(x, _)| x.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=arity).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (x, v) in points {
        let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
        rec.push(v.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("curve", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of numbers is UTF-8"))
}

/// Report label of a subset: feature indices joined by `:`.
pub fn subset_label(subset: &SubsetKey) -> String {
    if subset.is_empty() {
        return "{}".into();
    }
    subset
        .vars()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

pub(crate) fn labelled<V: Copy>(map: &BTreeMap<SubsetKey, V>) -> Vec<(String, V)> {
    map.iter().map(|(k, v)| (subset_label(k), *v)).collect()
}
