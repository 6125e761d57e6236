//! Binary classification metrics.
//!
//! BCC is the positive class for AUC and for the default confusion matrix.
//! Per-class precision/recall treat each class in turn as positive.

mod predictions;

pub use predictions::{parse_predictions, PredictionRecord};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::inference::ClassProbabilities;
use crate::label::ClassLabel;

/// Probability clip for log loss.
pub const LOG_LOSS_EPSILON: f64 = 1e-15;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("rate undefined: class has zero support")]
    ZeroSupport,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub truth: ClassLabel,
    pub probs: ClassProbabilities,
    pub predicted: ClassLabel,
}

impl LabeledPrediction {
    pub fn new(truth: ClassLabel, probs: ClassProbabilities) -> Self {
        Self {
            truth,
            predicted: probs.argmax(),
            probs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub positive_class: ClassLabel,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Same counts seen with the other class as positive.
    pub fn with_positive(&self, positive: ClassLabel) -> Self {
        if positive == self.positive_class {
            *self
        } else {
            Self {
                positive_class: positive,
                tp: self.tn,
                tn: self.tp,
                fp: self.fn_,
                fn_: self.fp,
            }
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

pub fn confusion(samples: &[LabeledPrediction], positive: ClassLabel) -> Result<ConfusionMatrix, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Input("no samples".into()));
    }
    let mut cm = ConfusionMatrix {
        positive_class: positive,
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
    };
    for s in samples {
        match (s.truth == positive, s.predicted == positive) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// True-positive, false-negative and error rates in percent for the
/// matrix's positive class. The error rate is the miss rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub tp_rate: f64,
    pub fn_rate: f64,
    pub error_rate: f64,
}

pub fn per_class_rates(cm: &ConfusionMatrix) -> Result<ClassRates, MetricsError> {
    let support = cm.support();
    if support == 0 {
        return Err(MetricsError::ZeroSupport);
    }
    let tp_rate = 100.0 * cm.tp as f64 / support as f64;
    let fn_rate = 100.0 * cm.fn_ as f64 / support as f64;
    Ok(ClassRates {
        tp_rate,
        fn_rate,
        error_rate: fn_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub accuracy: f64,
    pub log_loss: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub per_class: BTreeMap<ClassLabel, ClassMetrics>,
    /// Confusion matrix with BCC as the positive class.
    pub confusion: ConfusionMatrix,
    /// Table-style rates for every class with non-zero support.
    pub rates: BTreeMap<ClassLabel, ClassRates>,
}

/// `-(1/N) sum ln p(truth)` with probabilities clipped to `[eps, 1 - eps]`.
pub fn log_loss(samples: &[LabeledPrediction]) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Input("no samples".into()));
    }
    let total: f64 = samples
        .iter()
        .map(|s| {
            -s.probs
                .get(s.truth)
                .clamp(LOG_LOSS_EPSILON, 1.0 - LOG_LOSS_EPSILON)
                .ln()
        })
        .sum();
    Ok(total / samples.len() as f64)
}

/// AUC from the Mann-Whitney rank statistic with mid-ranks for ties.
///
/// Scores are the probabilities of `positive`.
pub fn auc(samples: &[LabeledPrediction], positive: ClassLabel) -> Result<f64, MetricsError> {
    let (n_pos, n_neg) = class_sizes(samples, positive);
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::Input("AUC needs both classes present".into()));
    }
    let mut scored: Vec<(f64, bool)> = samples
        .iter()
        .map(|s| (s.probs.get(positive), s.truth == positive))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j + 1 < scored.len() && scored[j + 1].0 == scored[i].0 {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid_rank = (i + j + 2) as f64 / 2.0;
        let positives = scored[i..=j].iter().filter(|(_, p)| *p).count();
        rank_sum_pos += mid_rank * positives as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

fn class_sizes(samples: &[LabeledPrediction], positive: ClassLabel) -> (usize, usize) {
    let pos = samples.iter().filter(|s| s.truth == positive).count();
    (pos, samples.len() - pos)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Samples scoring at or above this value are called positive.
    pub threshold: f64,
}

/// ROC staircase from `(0, 0)` to `(1, 1)`, one point per distinct score.
///
/// The first point carries an infinite threshold. Tied scores move
/// diagonally, so the trapezoidal area equals [`auc`].
pub fn roc_curve(samples: &[LabeledPrediction], positive: ClassLabel) -> Result<Vec<RocPoint>, MetricsError> {
    let (n_pos, n_neg) = class_sizes(samples, positive);
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::Input("ROC needs both classes present".into()));
    }
    let mut scored: Vec<(f64, bool)> = samples
        .iter()
        .map(|s| (s.probs.get(positive), s.truth == positive))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn curve_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn summarize(samples: &[LabeledPrediction]) -> Result<MetricsReport, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Input("no samples".into()));
    }
    let cm = confusion(samples, ClassLabel::Bcc)?;
    let mut per_class = BTreeMap::new();
    let mut rates = BTreeMap::new();
    for label in ClassLabel::ALL {
        let view = cm.with_positive(label);
        per_class.insert(
            label,
            ClassMetrics {
                precision: view.precision(),
                recall: view.recall(),
                f1: view.f1(),
                support: view.support(),
            },
        );
        if view.support() > 0 {
            rates.insert(label, per_class_rates(&view)?);
        }
    }
    let auc = auc(samples, ClassLabel::Bcc).ok();
    Ok(MetricsReport {
        samples: samples.len(),
        accuracy: cm.accuracy(),
        log_loss: log_loss(samples)?,
        auc,
        per_class,
        confusion: cm,
        rates,
    })
}

impl MetricsReport {
    /// Per-class precision/recall/F1/support block followed by accuracy,
    /// log loss and AUC, three decimals throughout.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>8} {:>8} {:>8} {:>8}",
            "Class", "Prec.", "Rec.", "F1", "Supp."
        );
        for (label, m) in self.per_class.iter().rev() {
            let _ = writeln!(
                out,
                "{:<8} {:>8.3} {:>8.3} {:>8.3} {:>8}",
                label.token(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        let _ = writeln!(out, "Accuracy: {:.3}", self.accuracy);
        let _ = writeln!(out, "Log Loss: {:.3}", self.log_loss);
        match self.auc {
            Some(a) => {
                let _ = writeln!(out, "AUC: {a:.3}");
            }
            None => {
                let _ = writeln!(out, "AUC: n/a");
            }
        }
        out
    }

    /// TP% / FN% / error-rate% per class, one decimal.
    pub fn render_rates_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>8} {:>8} {:>12}",
            "Cls.", "TP (%)", "FN (%)", "Err. Rt. (%)"
        );
        for (label, r) in self.rates.iter().rev() {
            let _ = writeln!(
                out,
                "{:<8} {:>8.1} {:>8.1} {:>12.1}",
                label.token(),
                r.tp_rate,
                r.fn_rate,
                r.error_rate
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(truth: ClassLabel, p_bcc: f64) -> LabeledPrediction {
        LabeledPrediction::new(truth, ClassProbabilities::new(1.0 - p_bcc, p_bcc).unwrap())
    }

    #[test]
    fn empty_input_errors() {
        assert!(confusion(&[], ClassLabel::Bcc).is_err());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let samples = vec![
            LabeledPrediction::new(ClassLabel::Bcc, ClassProbabilities::certain(ClassLabel::Bcc)),
            LabeledPrediction::new(ClassLabel::Nv, ClassProbabilities::certain(ClassLabel::Nv)),
        ];
        let cm = confusion(&samples, ClassLabel::Bcc).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        let r = summarize(&samples).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for m in r.per_class.values() {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
        assert!(r.log_loss >= 0.0 && r.log_loss <= 1.1e-15);
        assert_eq!(r.auc, Some(1.0));
    }

    #[test]
    fn swapping_positive_exchanges_roles() {
        let samples = vec![
            sample(ClassLabel::Bcc, 0.9),
            sample(ClassLabel::Bcc, 0.2),
            sample(ClassLabel::Nv, 0.7),
        ];
        let bcc = confusion(&samples, ClassLabel::Bcc).unwrap();
        let nv = confusion(&samples, ClassLabel::Nv).unwrap();
        assert_eq!((bcc.tp, bcc.tn, bcc.fp, bcc.fn_), (nv.tn, nv.tp, nv.fn_, nv.fp));
        assert_eq!(bcc.with_positive(ClassLabel::Nv), nv);
    }

    #[test]
    fn rates_edge_cases() {
        let cm = ConfusionMatrix {
            positive_class: ClassLabel::Bcc,
            tp: 0,
            tn: 4,
            fp: 0,
            fn_: 5,
        };
        let r = per_class_rates(&cm).unwrap();
        assert_eq!((r.tp_rate, r.fn_rate, r.error_rate), (0.0, 100.0, 100.0));
        let empty = ConfusionMatrix { tp: 0, fn_: 0, ..cm };
        assert!(matches!(per_class_rates(&empty), Err(MetricsError::ZeroSupport)));
    }

    #[test]
    fn f1_degenerate_is_zero() {
        let cm = ConfusionMatrix {
            positive_class: ClassLabel::Bcc,
            tp: 0,
            tn: 3,
            fp: 1,
            fn_: 2,
        };
        assert_eq!(cm.f1(), 0.0);
    }

    #[test]
    fn identical_scores_give_half_auc() {
        let samples = vec![
            sample(ClassLabel::Bcc, 0.6),
            sample(ClassLabel::Nv, 0.6),
            sample(ClassLabel::Bcc, 0.6),
        ];
        assert_eq!(auc(&samples, ClassLabel::Bcc).unwrap(), 0.5);
        let curve = roc_curve(&samples, ClassLabel::Bcc).unwrap();
        assert_eq!(curve.len(), 2);
        assert_eq!(curve_area(&curve), 0.5);
    }

    #[test]
    fn separable_curve_passes_through_top_left() {
        let samples = vec![
            sample(ClassLabel::Bcc, 0.9),
            sample(ClassLabel::Bcc, 0.8),
            sample(ClassLabel::Nv, 0.1),
        ];
        let curve = roc_curve(&samples, ClassLabel::Bcc).unwrap();
        assert!(curve.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(curve.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        assert_eq!(auc(&samples, ClassLabel::Bcc).unwrap(), 1.0);
    }

    #[test]
    fn single_class_roc_is_error() {
        let samples = vec![sample(ClassLabel::Bcc, 0.9)];
        assert!(roc_curve(&samples, ClassLabel::Bcc).is_err());
        assert_eq!(summarize(&samples).unwrap().auc, None);
    }

    #[test]
    fn tables_render() {
        let samples = vec![sample(ClassLabel::Bcc, 0.9), sample(ClassLabel::Nv, 0.3)];
        let r = summarize(&samples).unwrap();
        let t = r.render_table();
        assert!(t.contains("Accuracy: 1.000"));
        assert!(t.lines().nth(1).unwrap().starts_with("BCC"));
        assert!(r.render_rates_table().contains("100.0"));
    }
}
