//! Diagnostics output: a flat `metric,name,value` CSV and a JSON document.
//! Undefined metrics are written as `NA` in CSV and `null` in JSON.

use serde::Serialize;
use treehfd_core::diagnostics::DiagnosticsReport;

use crate::error::{Error, Result};
use crate::formats::decomposition::{labelled, subset_label};

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub residual_mse_ratio: Option<f64>,
    pub orthogonality_max_abs: Option<f64>,
    pub orthogonality: Vec<OrthogonalityRow>,
    pub local_variability: Option<f64>,
    pub output_variance: f64,
    pub component_variance: Vec<(String, f64)>,
    pub component_mse: Option<Vec<(String, f64)>>,
    pub cumulated_mse: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityRow {
    pub interaction: String,
    pub sub_effect: String,
    pub correlation: f64,
}

impl From<&DiagnosticsReport> for ReportDocument {
    fn from(r: &DiagnosticsReport) -> Self {
        let component_mse = r.component_mse.as_ref().map(labelled);
        Self {
            residual_mse_ratio: r.residual_mse_ratio,
            orthogonality_max_abs: r.orthogonality.max_abs(),
            orthogonality: r
                .orthogonality
                .entries
                .iter()
                .map(|e| OrthogonalityRow {
                    interaction: subset_label(&e.interaction),
                    sub_effect: subset_label(&e.sub_effect),
                    correlation: e.correlation,
                })
                .collect(),
            local_variability: r.local_variability,
            output_variance: r.output_variance,
            component_variance: labelled(&r.component_variances),
            cumulated_mse: component_mse.as_ref().map(|m| m.iter().map(|(_, v)| v).sum()),
            component_mse,
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl ReportDocument {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "name", "value"])?;
        let mut row = |metric: &str, name: &str, value: Option<f64>| w.write_record([metric, name, &cell(value)]);
        row("residual_mse_ratio", "", self.residual_mse_ratio)?;
        row("orthogonality_max_abs", "", self.orthogonality_max_abs)?;
        for o in &self.orthogonality {
            row("orthogonality", &format!("{}~{}", o.interaction, o.sub_effect), Some(o.correlation))?;
        }
        row("local_variability", "", self.local_variability)?;
        row("output_variance", "", Some(self.output_variance))?;
        for (name, v) in &self.component_variance {
            row("component_variance", name, Some(*v))?;
        }
        if let Some(mse) = &self.component_mse {
            for (name, v) in mse {
                row("component_mse", name, Some(*v))?;
            }
        }
        row("cumulated_mse", "", self.cumulated_mse)?;
        let bytes = w.into_inner().map_err(|e| Error::parse("report", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("report is UTF-8"))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}
