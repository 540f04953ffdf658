use proptest::prelude::*;
use serde_json::Value;
use treehfd::formats::boosted::import_boosted_dump;
use treehfd::formats::decomposition::{parse_decomposition, serialize_decomposition};
use treehfd::formats::model::{parse_ensemble, serialize_ensemble};
use treehfd::parallel::fit_ensemble_hfd_parallel;
use treehfd_core::analytical::{sample_case, CaseConfig};
use treehfd_core::trainer::{fit_gbt, GbtConfig};
use treehfd_core::{fit_ensemble_hfd, Ensemble, Matrix, Node, SolveParams, Tree};

const DUMP: &str = include_str!("fixtures/boosted_dump.json");

/// Walks the dump itself, following `yes` when `x < split_condition`.
fn walk_dump(dump: &Value, base: f64, x: &[f64]) -> f64 {
    let mut total = base;
    for tree in dump.as_array().unwrap() {
        let mut node = tree;
        while node.get("leaf").is_none() {
            let feature: usize = node["split"].as_str().unwrap()[1..].parse().unwrap();
            let next = if x[feature] < node["split_condition"].as_f64().unwrap() { &node["yes"] } else { &node["no"] };
            node = node["children"].as_array().unwrap().iter().find(|c| c["nodeid"] == *next).unwrap();
        }
        total += node["leaf"].as_f64().unwrap();
    }
    total
}

#[test]
fn imported_dump_matches_hand_walk() {
    let dump: Value = serde_json::from_str(DUMP).unwrap();
    let base = 0.5;
    let e = import_boosted_dump(DUMP, base, None).unwrap();
    assert_eq!(e.n_features(), 6);
    assert_eq!(e.trees().len(), 4);
    let (x, _) = sample_case(&CaseConfig { n: 100, seed: 5, ..CaseConfig::default() }).unwrap();
    for row in x.iter_rows() {
        assert_eq!(e.predict(row).to_bits(), walk_dump(&dump, base, row).to_bits());
    }
    // Exactly on thresholds, `x < t` fails and the `no` branch is taken.
    let edge = [0.215000004, 1.04999995, -0.731500029, 0.0, 2.25, -1.5];
    assert_eq!(e.predict(&edge), walk_dump(&dump, base, &edge));
}

#[test]
fn parallel_fit_equals_sequential() {
    let (x, y) = sample_case(&CaseConfig { n: 400, seed: 2, ..CaseConfig::default() }).unwrap();
    let e = fit_gbt(&x, &y, &GbtConfig { n_trees: 8, max_depth: 4, ..GbtConfig::default() }).unwrap();
    let params = SolveParams::default();
    let seq = fit_ensemble_hfd(&e, &x, &params).unwrap();
    for threads in [1, 3] {
        assert_eq!(fit_ensemble_hfd_parallel(&e, &x, &params, Some(threads)).unwrap(), seq);
    }
    let wrong = Matrix::new(vec![0.0; 5], 1, 5).unwrap();
    assert!(fit_ensemble_hfd_parallel(&e, &wrong, &params, Some(1)).is_err());
}

fn arb_tree(p: usize) -> impl Strategy<Value = Tree> {
    let leaf = any::<f64>()
        .prop_filter("finite", |v| v.is_finite())
        .prop_map(|v| vec![Node::Leaf { value: v }]);
    leaf.prop_recursive(4, 32, 2, move |inner| {
        (inner.clone(), inner, 0..p, -1e6f64..1e6).prop_map(|(l, r, feature, threshold)| {
            // Root first, then the shifted subtrees.
            let mut nodes = vec![Node::Split { feature, threshold, left: 1, right: 1 + l.len() }];
            let shift = |n: &Node, by: usize| match *n {
                Node::Split { feature, threshold, left, right } => {
                    Node::Split { feature, threshold, left: left + by, right: right + by }
                }
                leaf => leaf,
            };
            nodes.extend(l.iter().map(|n| shift(n, 1)));
            nodes.extend(r.iter().map(|n| shift(n, 1 + l.len())));
            nodes
        })
    })
    .prop_map(|nodes| Tree::new(nodes, 0).unwrap())
}

proptest! {
    #[test]
    fn model_round_trip(trees in prop::collection::vec(arb_tree(4), 0..5), base in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let e = Ensemble::new(trees, base, 4).unwrap();
        let again = parse_ensemble(&serialize_ensemble(&e)).unwrap();
        prop_assert_eq!(again, e);
    }
}

#[test]
fn decomposition_round_trip_on_a_fit() {
    let (x, y) = sample_case(&CaseConfig { n: 300, seed: 9, ..CaseConfig::default() }).unwrap();
    let e = fit_gbt(&x, &y, &GbtConfig { n_trees: 5, max_depth: 4, ..GbtConfig::default() }).unwrap();
    let dec = fit_ensemble_hfd(&e, &x, &SolveParams::default()).unwrap();
    let again = parse_decomposition(&serialize_decomposition(&dec)).unwrap();
    assert_eq!(again, dec);
    for row in x.iter_rows() {
        assert_eq!(again.eval_sum(row).unwrap().to_bits(), dec.eval_sum(row).unwrap().to_bits());
    }
}
