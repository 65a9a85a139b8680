//! Full evaluation of a trained model over a dataset.

use std::fs;
use std::path::Path;

use crate::data::{Dataset, NUM_CLASSES};
use crate::error::Result;
use crate::io::write_atomic;
use crate::metrics::{roc_curve, write_auc_summary, ConfusionMatrix, RocCurve};
use crate::model::{argmax, ModelGraph};
use crate::train::score;

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub mcc_per_class: Vec<f64>,
    /// Unweighted mean of the one-vs-rest coefficients.
    pub mcc_macro: f64,
    pub roc: Vec<RocCurve>,
    /// Largest deviation of a probability row sum from 1.
    pub max_prob_sum_error: f64,
}

pub fn evaluate(model: &ModelGraph, ds: &Dataset) -> Result<EvalReport> {
    let (mean_loss, accuracy, log_probs) = score(model, ds)?;
    let probs: Vec<Vec<f64>> = log_probs
        .iter()
        .map(|lp| lp.iter().map(|v| v.exp()).collect())
        .collect();
    let max_prob_sum_error = probs
        .iter()
        .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let labels: Vec<usize> = ds.items.iter().map(|it| it.label as usize).collect();
    let preds: Vec<usize> = log_probs.iter().map(|lp| argmax(lp)).collect();
    let confusion = ConfusionMatrix::new(&preds, &labels)?;
    let roc = (0..NUM_CLASSES)
        .map(|c| roc_curve(&probs, &labels, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        mean_loss,
        accuracy,
        mcc_per_class: confusion.mcc_per_class(),
        mcc_macro: confusion.mcc_macro(),
        confusion,
        roc,
        max_prob_sum_error,
    })
}

impl EvalReport {
    /// Writes `metrics.csv`, `confusion.csv`, `roc_class_<c>.csv` and
    /// `auc.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut summary = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut summary);
            w.write_record(["metric", "value"])?;
            w.write_record(["accuracy".to_string(), self.accuracy.to_string()])?;
            w.write_record(["mean_loss".to_string(), self.mean_loss.to_string()])?;
            w.write_record(["mcc_macro".to_string(), self.mcc_macro.to_string()])?;
            for (c, m) in self.mcc_per_class.iter().enumerate() {
                w.write_record([format!("mcc_class_{c}"), m.to_string()])?;
            }
            w.flush()?;
        }
        write_atomic(&dir.join("metrics.csv"), &summary)?;

        let mut buf = Vec::new();
        self.confusion.write_csv(&mut buf)?;
        write_atomic(&dir.join("confusion.csv"), &buf)?;

        for curve in &self.roc {
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            write_atomic(&dir.join(format!("roc_class_{}.csv", curve.class)), &buf)?;
        }
        let mut buf = Vec::new();
        write_auc_summary(&self.roc, &mut buf)?;
        write_atomic(&dir.join("auc.csv"), &buf)?;
        Ok(())
    }
}
