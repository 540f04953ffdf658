//! Quality metrics of a fitted decomposition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Ensemble;
use crate::partition::SubsetKey;
use crate::stats::{correlation, mean, variance};

/// Component variances at or below this fraction of the reference variance
/// are treated as zero.
const NEGLIGIBLE: f64 = 1e-12;

/// Mean squared gap between the decomposition and the ensemble, divided by
/// the variance of the ensemble predictions.
pub fn residual_mse_ratio(dec: &Decomposition, ensemble: &Ensemble, data: &Matrix) -> Result<f64> {
    if data.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let preds: Vec<f64> = data.iter_rows().map(|x| ensemble.predict(x)).collect();
    let var = variance(&preds);
    if var <= 0.0 {
        return Err(Error::UndefinedMetric("ensemble predictions have zero variance".into()));
    }
    let mse = data
        .iter_rows()
        .zip(&preds)
        .map(|(x, p)| {
            let e = dec.eval_sum_unchecked(x) - p;
            e * e
        })
        .sum::<f64>()
        / data.rows() as f64;
    Ok(mse / var)
}

/// Correlation between an interaction and one of its lower-order components.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityEntry {
    pub interaction: SubsetKey,
    pub sub_effect: SubsetKey,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrthogonalityReport {
    pub entries: Vec<OrthogonalityEntry>,
}

impl OrthogonalityReport {
    /// Largest absolute correlation, `None` when no pair qualified.
    pub fn max_abs(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|e| e.correlation.abs())
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
    }
}

/// Correlations between every interaction whose variance reaches
/// `threshold × output_variance` and each of its stored strict sub-effects
/// with non-zero variance.
pub fn orthogonality_report(
    dec: &Decomposition,
    data: &Matrix,
    output_variance: f64,
    threshold: f64,
) -> OrthogonalityReport {
    let mut report = OrthogonalityReport::default();
    if data.rows() < 2 {
        return report;
    }
    let mut cache: BTreeMap<&SubsetKey, (Vec<f64>, f64)> = BTreeMap::new();
    for subset in dec.subsets() {
        let values = dec.component_values(subset, data);
        let var = variance(&values);
        cache.insert(subset, (values, var));
    }
    let negligible = NEGLIGIBLE * output_variance;
    for (interaction, (values, var)) in &cache {
        if interaction.len() < 2 || *var < threshold * output_variance || *var <= negligible {
            continue;
        }
        for (sub, (sub_values, sub_var)) in &cache {
            if sub.len() >= interaction.len() || !sub.is_subset_of(interaction) || *sub_var <= negligible {
                continue;
            }
            if let Some(correlation) = correlation(values, sub_values) {
                report.entries.push(OrthogonalityEntry {
                    interaction: (*interaction).clone(),
                    sub_effect: (*sub).clone(),
                    correlation,
                });
            }
        }
    }
    report
}

/// Average over main effects of the mean variance of the component over the
/// `k` nearest rows along its own variable, normalised by the component's
/// variance over all rows. Rows are their own nearest neighbours; distance
/// ties go to the lower row index.
pub fn local_variability(dec: &Decomposition, data: &Matrix, k: usize) -> Result<f64> {
    let n = data.rows();
    if k == 0 || k >= n {
        return Err(Error::UndefinedMetric(format!(
            "need more rows than neighbours (k = {k}, n = {n})"
        )));
    }
    let scale = variance(
        &data.iter_rows().map(|x| dec.eval_sum_unchecked(x)).collect::<Vec<_>>(),
    );
    let mut ratios = Vec::new();
    for subset in dec.subsets().filter(|s| s.len() == 1) {
        let var_index = subset.vars()[0];
        let values = dec.component_values(subset, data);
        let global = variance(&values);
        if global <= NEGLIGIBLE * scale || global == 0.0 {
            continue;
        }
        let column = data.column(var_index);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
        let mut window = Vec::with_capacity(k);
        let mut local_sum = 0.0;
        for pos in 0..n {
            let centre = column[order[pos]];
            let (mut lo, mut hi) = (pos, pos + 1);
            while hi - lo < k {
                let take_left = match (lo > 0, hi < n) {
                    (true, true) => {
                        let dl = centre - column[order[lo - 1]];
                        let dr = column[order[hi]] - centre;
                        dl < dr || (dl == dr && order[lo - 1] < order[hi])
                    }
                    (true, false) => true,
                    (false, _) => false,
                };
                if take_left {
                    lo -= 1;
                } else {
                    hi += 1;
                }
            }
            window.clear();
            window.extend(order[lo..hi].iter().map(|&i| values[i]));
            local_sum += variance(&window);
        }
        ratios.push(local_sum / n as f64 / global);
    }
    if ratios.is_empty() {
        return Err(Error::UndefinedMetric("every main effect is constant".into()));
    }
    Ok(mean(&ratios))
}

/// Ground-truth components to score a decomposition against.
pub trait ComponentReference {
    /// Subsets with a possibly non-zero reference component.
    fn subsets(&self) -> Vec<SubsetKey>;
    fn eval(&self, subset: &SubsetKey, x: &[f64]) -> f64;
}

/// Mean squared error of each non-empty component against `reference` over
/// `data`, for every subset present on either side. `data` should be
/// independent of the fitting sample.
pub fn component_mse(
    dec: &Decomposition,
    reference: &dyn ComponentReference,
    data: &Matrix,
) -> BTreeMap<SubsetKey, f64> {
    let subsets: BTreeSet<SubsetKey> = dec
        .subsets()
        .cloned()
        .chain(reference.subsets())
        .filter(|s| !s.is_empty())
        .collect();
    subsets
        .into_iter()
        .map(|s| {
            let sq: f64 = data
                .iter_rows()
                .map(|x| {
                    let e = dec.eval_component_unchecked(&s, x) - reference.eval(&s, x);
                    e * e
                })
                .sum();
            let mse = sq / data.rows().max(1) as f64;
            (s, mse)
        })
        .collect()
}

/// All metrics of one decomposition on one data sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub residual_mse_ratio: Option<f64>,
    pub orthogonality: OrthogonalityReport,
    pub local_variability: Option<f64>,
    pub output_variance: f64,
    pub component_variances: BTreeMap<SubsetKey, f64>,
    pub component_mse: Option<BTreeMap<SubsetKey, f64>>,
}

/// Default interaction-variance threshold of the orthogonality metric.
pub const ORTHOGONALITY_THRESHOLD: f64 = 0.01;
/// Default neighbourhood size of the local variability metric.
pub const LOCAL_NEIGHBOURS: usize = 10;

/// Computes every metric; undefined metrics are reported as `None`.
pub fn diagnose(
    dec: &Decomposition,
    ensemble: &Ensemble,
    data: &Matrix,
    reference: Option<&dyn ComponentReference>,
) -> Result<DiagnosticsReport> {
    ensemble.check_width(data.cols())?;
    if data.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let preds: Vec<f64> = data.iter_rows().map(|x| ensemble.predict(x)).collect();
    let output_variance = variance(&preds);
    Ok(DiagnosticsReport {
        residual_mse_ratio: residual_mse_ratio(dec, ensemble, data).ok(),
        orthogonality: orthogonality_report(dec, data, output_variance, ORTHOGONALITY_THRESHOLD),
        local_variability: local_variability(dec, data, LOCAL_NEIGHBOURS).ok(),
        output_variance,
        component_variances: dec
            .subsets()
            .map(|s| (s.clone(), dec.component_variance(s, data)))
            .collect(),
        component_mse: reference.map(|r| component_mse(dec, r, data)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{ComponentTable, FitMeta, TreeTable};
    use crate::model::{fixtures::xor_tree, Tree};
    use crate::partition::AxisGrid;
    use crate::solver::{fit_ensemble_hfd, SolveParams};
    use alloc::vec;

    fn table(cuts: Vec<f64>, values: Vec<f64>) -> TreeTable {
        TreeTable::new(vec![AxisGrid::new(cuts).unwrap()], values).unwrap()
    }

    fn main_only(values: Vec<f64>, cuts: Vec<f64>, constant: f64) -> Decomposition {
        let mut c = ComponentTable::new(SubsetKey::from([0]));
        c.push(table(cuts, values));
        Decomposition::from_parts(1, constant, vec![c], FitMeta::default()).unwrap()
    }

    #[test]
    fn residual_ratio_cases() {
        let e = Ensemble::new(vec![Tree::stump(0, 0.5, -1.0, 1.0).unwrap()], 0.0, 1).unwrap();
        let data = Matrix::from_rows(&[[0.2], [0.4], [0.6], [0.8]]).unwrap();
        let d = fit_ensemble_hfd(&e, &data, &SolveParams::default()).unwrap();
        assert!(residual_mse_ratio(&d, &e, &data).unwrap() <= 1e-12);

        let only_mean = Decomposition::new(1, 0.0, BTreeMap::new(), FitMeta::default());
        assert_eq!(residual_mse_ratio(&only_mean, &e, &data).unwrap(), 1.0);

        let flat = Ensemble::new(vec![], 2.0, 1).unwrap();
        assert!(matches!(residual_mse_ratio(&d, &flat, &data), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn residual_ratio_shift_invariant() {
        let e = Ensemble::new(vec![Tree::stump(0, 0.5, -1.0, 3.0).unwrap()], 0.0, 1).unwrap();
        let shifted = Ensemble::new(e.trees().to_vec(), 5.0, 1).unwrap();
        let data = Matrix::from_rows(&[[0.2], [0.4], [0.6], [0.8], [0.9]]).unwrap();
        let d = main_only(vec![-1.5, 1.5], vec![0.5], 1.0);
        let d_shift = main_only(vec![-1.5, 1.5], vec![0.5], 6.0);
        let a = residual_mse_ratio(&d, &e, &data).unwrap();
        let b = residual_mse_ratio(&d_shift, &shifted, &data).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn xor_report_is_empty() {
        let e = Ensemble::new(vec![xor_tree()], 0.0, 2).unwrap();
        let data = Matrix::from_rows(&[[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]).unwrap();
        let d = fit_ensemble_hfd(&e, &data, &SolveParams::default()).unwrap();
        let r = orthogonality_report(&d, &data, 1.0, 0.01);
        assert!(r.entries.is_empty());
        assert_eq!(r.max_abs(), None);
    }

    #[test]
    fn duplicated_main_effect_correlates_perfectly() {
        // Interaction {0,1} that only depends on x0, same shape as the main effect.
        let mut main = ComponentTable::new(SubsetKey::from([0]));
        main.push(table(vec![0.5], vec![-1.0, 1.0]));
        let mut inter = ComponentTable::new(SubsetKey::from([0, 1]));
        inter.push(
            TreeTable::new(
                vec![AxisGrid::new(vec![0.5]).unwrap(), AxisGrid::new(vec![]).unwrap()],
                vec![-2.0, 2.0],
            )
            .unwrap(),
        );
        let d = Decomposition::from_parts(2, 0.0, vec![main, inter], FitMeta::default()).unwrap();
        let data = Matrix::from_rows(&[[0.1, 0.0], [0.7, 1.0], [0.2, 2.0], [0.9, 3.0]]).unwrap();
        let r = orthogonality_report(&d, &data, 1.0, 0.01);
        assert_eq!(r.entries.len(), 1);
        assert!((r.max_abs().unwrap() - 1.0).abs() < 1e-12);
        // Invariant under positive rescaling: components scaled by 2 and 1/2.
        assert!((r.entries[0].correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_variability_zero_when_neighbourhoods_are_flat() {
        let d = main_only(vec![-1.0, 1.0], vec![0.5], 0.0);
        // Eleven points per side of the cut, so every 10-neighbourhood is one-sided.
        let rows: Vec<[f64; 1]> = (0..22)
            .map(|i| if i < 11 { [i as f64 * 0.01] } else { [0.9 + i as f64 * 0.01] })
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        assert_eq!(local_variability(&d, &data, 10).unwrap(), 0.0);
        assert!(local_variability(&d, &data, 22).is_err());
        let flat = main_only(vec![1.0, 1.0], vec![0.5], 0.0);
        assert!(matches!(local_variability(&flat, &data, 10), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn local_variability_by_brute_force() {
        let d = main_only(vec![0.0, 1.0, 3.0], vec![0.3, 0.6], 0.0);
        let xs = [0.05, 0.25, 0.29, 0.31, 0.5, 0.58, 0.61, 0.7, 0.95, 0.99];
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let k = 3;
        let values: Vec<f64> = xs.iter().map(|&x| d.eval_component(&SubsetKey::from([0]), &[x]).unwrap()).collect();
        let mut total = 0.0;
        for i in 0..xs.len() {
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.sort_by(|&a, &b| {
                let da = (xs[a] - xs[i]).abs();
                let db = (xs[b] - xs[i]).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            });
            let local: Vec<f64> = idx[..k].iter().map(|&j| values[j]).collect();
            total += variance(&local);
        }
        let expected = total / xs.len() as f64 / variance(&values);
        let got = local_variability(&d, &data, k).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    struct Same<'a>(&'a Decomposition);
    impl ComponentReference for Same<'_> {
        fn subsets(&self) -> Vec<SubsetKey> {
            self.0.subsets().cloned().collect()
        }
        fn eval(&self, subset: &SubsetKey, x: &[f64]) -> f64 {
            self.0.eval_component(subset, x).unwrap()
        }
    }

    struct Extra;
    impl ComponentReference for Extra {
        fn subsets(&self) -> Vec<SubsetKey> {
            vec![SubsetKey::from([1])]
        }
        fn eval(&self, subset: &SubsetKey, _x: &[f64]) -> f64 {
            if subset == &SubsetKey::from([1]) { 2.0 } else { 0.0 }
        }
    }

    #[test]
    fn component_mse_cases() {
        let d = main_only(vec![-1.0, 1.0], vec![0.5], 0.0);
        let data = Matrix::from_rows(&[[0.1, 0.0], [0.9, 0.0]]).unwrap();
        let self_mse = component_mse(&d, &Same(&d), &data);
        assert!(self_mse.values().all(|&v| v == 0.0));
        let extra = component_mse(&d, &Extra, &data);
        assert_eq!(extra[&SubsetKey::from([0])], 1.0);
        assert_eq!(extra[&SubsetKey::from([1])], 4.0);
    }
}
