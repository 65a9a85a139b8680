//! Accuracy, confusion matrices, Matthews correlation and one-vs-rest ROC.

use std::io::Write;

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::shape("accuracy labels", preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("accuracy of zero samples".into()));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(preds: &[usize], labels: &[usize]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::shape("confusion labels", preds.len(), labels.len()));
        }
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (&p, &t) in preds.iter().zip(labels) {
            if p >= NUM_CLASSES || t >= NUM_CLASSES {
                return Err(Error::Value(format!(
                    "class pair (true {t}, predicted {p}) outside 0..{NUM_CLASSES}"
                )));
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// One-vs-rest reduction for `class`.
    pub fn binary_counts(&self, class: usize) -> BinaryCounts {
        let tp = self.counts[class][class];
        let fp = self.col_sum(class) - tp;
        let fn_ = self.row_sum(class) - tp;
        let tn = self.total() - tp - fp - fn_;
        BinaryCounts { tp, fp, tn, fn_ }
    }

    pub fn mcc_per_class(&self) -> Vec<f64> {
        (0..NUM_CLASSES)
            .map(|c| {
                let b = self.binary_counts(c);
                mcc_binary(b.tp, b.fp, b.tn, b.fn_)
            })
            .collect()
    }

    /// Unweighted mean of the per-class one-vs-rest coefficients.
    pub fn mcc_macro(&self) -> f64 {
        self.mcc_per_class().iter().sum::<f64>() / NUM_CLASSES as f64
    }

    /// Header of predicted-class ids, then one row of counts per true class.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((0..NUM_CLASSES).map(|c| c.to_string()))?;
        for row in &self.counts {
            w.write_record(row.iter().map(u64::to_string))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    ConfusionMatrix::new(preds, labels)
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc_binary(tp: u64, fp: u64, tn: u64, fn_: u64) -> f64 {
    let (tp, fp, tn, fn_) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

pub fn mcc_macro(cm: &ConfusionMatrix) -> f64 {
    cm.mcc_macro()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub class: usize,
    /// From threshold `+inf` at (0, 0) down to `-inf` at (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One-vs-rest ROC for `class`: positives are samples labelled `class`,
/// scored by `scores[i][class]`. Thresholds are the distinct scores plus
/// `+inf`/`-inf`; tied scores move the curve in a single step. AUC by the
/// trapezoidal rule. Each score row must sum to 1 within 1e-6.
pub fn roc_curve(scores: &[Vec<f64>], labels: &[usize], class: usize) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::shape("roc scores", labels.len(), scores.len()));
    }
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(scores.len());
    for (row, &label) in scores.iter().zip(labels) {
        let s = *row.get(class).ok_or_else(|| {
            Error::shape("roc score row", class + 1, row.len())
        })?;
        if s.is_nan() {
            return Err(Error::NonFinite("roc scores"));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "roc score rows must be probability vectors, found a row summing to {total}"
            )));
        }
        pairs.push((s, label == class));
    }
    roc_from_pairs(pairs, class)
}

/// Binary form of [`roc_curve`]: `(score, is_positive)` pairs.
pub fn roc_from_pairs(mut pairs: Vec<(f64, bool)>, class: usize) -> Result<RocCurve> {
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(format!(
            "roc for class {class} needs both positives and negatives ({pos} / {neg})"
        )));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        let t = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == t {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve {
        class,
        points,
        auc,
    })
}

/// Writes `class,auc` rows.
pub fn write_auc_summary<W: Write>(curves: &[RocCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "auc"])?;
    for c in curves {
        w.write_record([c.class.to_string(), c.auc.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
