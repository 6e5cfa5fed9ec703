//! Report envelope written as `report.json` by the command-line runner.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub seed: u64,
    pub pass: bool,
    pub report: serde_json::Value,
}

impl RunReport {
    pub fn new<T: Serialize>(experiment: &str, seed: u64, pass: bool, report: &T) -> Self {
        RunReport {
            experiment: experiment.to_string(),
            seed,
            pass,
            report: serde_json::to_value(report).expect("reports serialize"),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Empirical CDF as CSV rows `x,f`.
pub fn ecdf_csv(samples: &[f64]) -> String {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = String::from("x,f\n");
    let n = sorted.len() as f64;
    for (i, x) in sorted.iter().enumerate() {
        out.push_str(&format!("{x},{}\n", (i + 1) as f64 / n));
    }
    out
}
