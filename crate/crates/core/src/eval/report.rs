use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ScoreSet, TrainedBundle};
use crate::error::{Error, Result};
use crate::latent::cosine_matrix;
use crate::models::LatentBundle;

/// Pairwise cosine similarities between model directions. Multiclass
/// attributes contribute one one-vs-rest direction per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineReport {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

pub fn cosine_report(bundle: &LatentBundle) -> Result<CosineReport> {
    let directions = bundle.report_directions();
    if directions.is_empty() {
        return Err(Error::InvalidArgument("bundle has no models".into()));
    }
    let refs: Vec<&[f64]> = directions.iter().map(|(_, d)| d.as_slice()).collect();
    Ok(CosineReport {
        matrix: cosine_matrix(&refs)?,
        labels: directions.into_iter().map(|(l, _)| l).collect(),
    })
}

impl CosineReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.matrix[i][j])
    }

    pub fn render(&self) -> String {
        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(7);
        let mut out = format!("{:width$}", "");
        for l in &self.labels {
            let _ = write!(out, " {l:>width$}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            let _ = write!(out, "{l:width$}");
            for v in row {
                let _ = write!(out, " {v:>width$.4}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            let mut rec = vec![l.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        finish(w)
    }
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io {
            context: "csv".into(),
            source: std::io::Error::other(e.to_string()),
        })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl ScoreSet {
    /// `attribute,metric,value,trials` rows, plus a `joint` row when any
    /// attribute is discrete.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["attribute", "metric", "value", "trials"])?;
        for s in &self.scores {
            let (metric, value) = match s.score {
                super::Score::Accuracy(v) => ("accuracy", v),
                super::Score::Rmse(v) => ("rmse", v),
            };
            w.write_record([&s.attribute, metric, &value.to_string(), &self.trials.to_string()])?;
        }
        if let Some(j) = self.joint_accuracy {
            w.write_record(["joint", "accuracy", &j.to_string(), &self.trials.to_string()])?;
        }
        finish(w)
    }
}

pub fn render_scores(title: &str, set: &ScoreSet) -> String {
    let mut out = format!("{title} ({} trials, seed {})\n", set.trials, set.seed);
    let width = set.scores.iter().map(|s| s.attribute.len()).max().unwrap_or(0).max(5);
    for s in &set.scores {
        let _ = writeln!(out, "  {:width$}  {}", s.attribute, s.score);
    }
    if let Some(j) = set.joint_accuracy {
        let _ = writeln!(out, "  {:width$}  accuracy {j:.4}", "joint");
    }
    out
}

/// Held-out metrics per attribute after training.
pub fn render_training(trained: &TrainedBundle) -> String {
    let p = &trained.provenance;
    let mut out = format!(
        "latent-attribute models: {} samples, {:.0}/{:.0} split\n",
        p.n_samples,
        p.training.split_fraction * 100.0,
        (1.0 - p.training.split_fraction) * 100.0
    );
    let width = p.test_metrics.iter().map(|m| m.attribute.len()).max().unwrap_or(0).max(5);
    for m in &p.test_metrics {
        let _ = writeln!(out, "  {:width$}  test {}", m.attribute, m.score);
    }
    out
}
