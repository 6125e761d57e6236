//! Metrics against the reference ensemble counts and brute-force references.

use dermtriage_core::inference::ClassProbabilities;
use dermtriage_core::metrics::{
    auc, confusion, curve_area, log_loss, per_class_rates, roc_curve, summarize, ConfusionMatrix, LabeledPrediction,
};
use dermtriage_core::ClassLabel;
use proptest::prelude::*;

fn sample(truth: ClassLabel, p_bcc: f64) -> LabeledPrediction {
    LabeledPrediction::new(truth, ClassProbabilities::new(1.0 - p_bcc, p_bcc).unwrap())
}

/// 300 BCC truths (297 called BCC) and 300 NV truths (289 called NV).
fn ensemble_samples() -> Vec<LabeledPrediction> {
    let mut v = Vec::new();
    v.extend((0..297).map(|_| sample(ClassLabel::Bcc, 0.9)));
    v.extend((0..3).map(|_| sample(ClassLabel::Bcc, 0.2)));
    v.extend((0..289).map(|_| sample(ClassLabel::Nv, 0.1)));
    v.extend((0..11).map(|_| sample(ClassLabel::Nv, 0.7)));
    v
}

fn within(actual: f64, expected: f64) {
    assert!((actual - expected).abs() <= 0.0005, "{actual} vs expected {expected}");
}

#[test]
fn ensemble_confusion_counts() {
    let cm = confusion(&ensemble_samples(), ClassLabel::Bcc).unwrap();
    assert_eq!((cm.tp, cm.fn_, cm.fp, cm.tn), (297, 3, 11, 289));
    let nv = confusion(&ensemble_samples(), ClassLabel::Nv).unwrap();
    assert_eq!((nv.tp, nv.fn_, nv.fp, nv.tn), (289, 11, 3, 297));
}

#[test]
fn ensemble_table_row() {
    let report = summarize(&ensemble_samples()).unwrap();
    within(report.accuracy, 0.977);
    let bcc = report.per_class[&ClassLabel::Bcc];
    within(bcc.precision, 0.964);
    within(bcc.recall, 0.990);
    within(bcc.f1, 0.977);
    assert_eq!(bcc.support, 300);
    let nv = report.per_class[&ClassLabel::Nv];
    within(nv.precision, 0.990);
    within(nv.recall, 0.963);
    within(nv.f1, 0.976);
    assert_eq!(nv.support, 300);

    // Independent arithmetic from the raw counts.
    assert!((report.accuracy - 586.0 / 600.0).abs() < 1e-15);
    assert!((bcc.precision - 297.0 / 308.0).abs() < 1e-15);
    assert!((nv.f1 - 578.0 / 592.0).abs() < 1e-12);
}

#[test]
fn ensemble_rate_rows() {
    let cm = ConfusionMatrix {
        positive_class: ClassLabel::Bcc,
        tp: 297,
        tn: 289,
        fp: 11,
        fn_: 3,
    };
    let round1 = |v: f64| (v * 10.0).round() / 10.0;
    let bcc = per_class_rates(&cm).unwrap();
    assert_eq!(
        (round1(bcc.tp_rate), round1(bcc.fn_rate), round1(bcc.error_rate)),
        (99.0, 1.0, 1.0)
    );
    let nv = per_class_rates(&cm.with_positive(ClassLabel::Nv)).unwrap();
    assert_eq!(
        (round1(nv.tp_rate), round1(nv.fn_rate), round1(nv.error_rate)),
        (96.3, 3.7, 3.7)
    );
    let none = ConfusionMatrix {
        positive_class: ClassLabel::Bcc,
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 5,
    };
    let r = per_class_rates(&none).unwrap();
    assert_eq!((r.tp_rate, r.fn_rate, r.error_rate), (0.0, 100.0, 100.0));
}

#[test]
fn two_sample_log_loss() {
    let samples = [sample(ClassLabel::Bcc, 0.8), sample(ClassLabel::Nv, 0.4)];
    let expected = -(0.8f64.ln() + 0.6f64.ln()) / 2.0;
    assert!((log_loss(&samples).unwrap() - expected).abs() < 1e-12);
    assert!((expected - 0.367).abs() < 5e-4);
}

#[test]
fn perfect_predictions() {
    let samples = [
        sample(ClassLabel::Bcc, 1.0),
        sample(ClassLabel::Nv, 0.0),
        sample(ClassLabel::Bcc, 1.0),
    ];
    let r = summarize(&samples).unwrap();
    assert_eq!(r.accuracy, 1.0);
    assert!(r.log_loss <= 1.1e-15);
    assert_eq!(r.auc, Some(1.0));
    for m in r.per_class.values() {
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }
}

#[test]
fn four_sample_auc() {
    let samples = [
        sample(ClassLabel::Bcc, 0.9),
        sample(ClassLabel::Nv, 0.8),
        sample(ClassLabel::Bcc, 0.4),
        sample(ClassLabel::Nv, 0.3),
    ];
    assert!((auc(&samples, ClassLabel::Bcc).unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn tied_scores_give_half() {
    let samples: Vec<_> = (0..6)
        .map(|i| sample(if i % 2 == 0 { ClassLabel::Bcc } else { ClassLabel::Nv }, 0.5))
        .collect();
    assert!((auc(&samples, ClassLabel::Bcc).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn separable_curve_hits_top_left() {
    let samples = [
        sample(ClassLabel::Bcc, 0.9),
        sample(ClassLabel::Bcc, 0.8),
        sample(ClassLabel::Nv, 0.2),
        sample(ClassLabel::Nv, 0.1),
    ];
    let curve = roc_curve(&samples, ClassLabel::Bcc).unwrap();
    assert!(curve.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
    assert_eq!(curve_area(&curve), 1.0);
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
fn concordant_fraction(samples: &[LabeledPrediction]) -> f64 {
    let score = |s: &LabeledPrediction| s.probs.get(ClassLabel::Bcc);
    let pos: Vec<_> = samples.iter().filter(|s| s.truth == ClassLabel::Bcc).collect();
    let neg: Vec<_> = samples.iter().filter(|s| s.truth == ClassLabel::Nv).collect();
    let mut total = 0.0;
    for p in &pos {
        for n in &neg {
            total += match score(p).partial_cmp(&score(n)).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    total / (pos.len() * neg.len()) as f64
}

fn samples_strategy() -> impl Strategy<Value = Vec<LabeledPrediction>> {
    // Coarse score grid so ties are common.
    proptest::collection::vec((any::<bool>(), 0u32..=20), 2..=50).prop_map(|v| {
        v.into_iter()
            .map(|(bcc, k)| sample(if bcc { ClassLabel::Bcc } else { ClassLabel::Nv }, k as f64 / 20.0))
            .collect()
    })
}

proptest! {
    #[test]
    fn auc_matches_pair_counting(samples in samples_strategy()) {
        let has_both = samples.iter().any(|s| s.truth == ClassLabel::Bcc) && samples.iter().any(|s| s.truth == ClassLabel::Nv);
        prop_assume!(has_both);
        let a = auc(&samples, ClassLabel::Bcc).unwrap();
        prop_assert!((a - concordant_fraction(&samples)).abs() < 1e-12);
        let curve = roc_curve(&samples, ClassLabel::Bcc).unwrap();
        prop_assert!((curve_area(&curve) - a).abs() < 1e-9);
        let first = curve.first().unwrap();
        let last = curve.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in curve.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn metric_identities(samples in samples_strategy()) {
        let r = summarize(&samples).unwrap();
        let cm = r.confusion;
        prop_assert_eq!(cm.tp + cm.tn + cm.fp + cm.fn_, samples.len());
        prop_assert_eq!(r.accuracy, (cm.tp + cm.tn) as f64 / samples.len() as f64);
        prop_assert!(r.log_loss.is_finite() && r.log_loss >= 0.0);
        let support: usize = r.per_class.values().map(|m| m.support).sum();
        prop_assert_eq!(support, samples.len());
        for m in r.per_class.values() {
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if m.precision + m.recall > 0.0 {
                let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                prop_assert!((m.f1 - harmonic).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn swapping_positive_class_exchanges_roles(samples in samples_strategy()) {
        let b = confusion(&samples, ClassLabel::Bcc).unwrap();
        let n = confusion(&samples, ClassLabel::Nv).unwrap();
        prop_assert_eq!((b.tp, b.tn, b.fp, b.fn_), (n.tn, n.tp, n.fn_, n.fp));
    }
}
