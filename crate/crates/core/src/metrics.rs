//! Binary classification metrics with `+1` as the positive class.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Input(format!(
            "{} truth labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Input("no labels to compare".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Label::Positive, Label::Positive) => cm.tp += 1,
            (Label::Negative, Label::Positive) => cm.fp += 1,
            (Label::Negative, Label::Negative) => cm.tn += 1,
            (Label::Positive, Label::Negative) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Mann–Whitney AUC: the share of (positive, negative) pairs ranked
/// correctly, ties counting one half. Computed from mid-ranks.
pub fn auc(scores: &[f64], truth: &[Label]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Input(format!(
            "{} scores but {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("AUC scores contain NaN".into()));
    }
    let n_pos = truth.iter().filter(|&&l| l == Label::Positive).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("AUC needs both classes in the truth labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a tied block shares its mean rank.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if truth[idx] == Label::Positive {
                pos_rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn gmean(cm: &ConfusionMatrix) -> Result<f64> {
    let pos = cm.tp + cm.fn_;
    let neg = cm.tn + cm.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("G-mean needs both classes in the truth labels".into()));
    }
    let tpr = cm.tp as f64 / pos as f64;
    let tnr = cm.tn as f64 / neg as f64;
    Ok((tpr * tnr).sqrt())
}

/// `2tp / (2tp + fp + fn)`; 0 when there are no positives anywhere.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    let den = 2 * cm.tp + cm.fp + cm.fn_;
    if den == 0 {
        0.0
    } else {
        (2 * cm.tp) as f64 / den as f64
    }
}

/// Matthews correlation; 0 when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "AUC")]
    Auc,
    #[serde(rename = "G")]
    GMean,
    #[serde(rename = "F1")]
    F1,
    #[serde(rename = "MCC")]
    Mcc,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Auc, Metric::GMean, Metric::F1, Metric::Mcc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "AUC",
            Metric::GMean => "G",
            Metric::F1 => "F1",
            Metric::Mcc => "MCC",
        }
    }
}

/// All four metrics for one prediction set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub auc: f64,
    pub gmean: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl MetricValues {
    pub fn compute(truth: &[Label], predicted: &[Label], scores: &[f64]) -> Result<Self> {
        let cm = confusion(truth, predicted)?;
        Ok(Self {
            auc: auc(scores, truth)?,
            gmean: gmean(&cm)?,
            f1: f1(&cm),
            mcc: mcc(&cm),
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Auc => self.auc,
            Metric::GMean => self.gmean,
            Metric::F1 => self.f1,
            Metric::Mcc => self.mcc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use Label::{Negative as N, Positive as P};

    /// Direct enumeration of all (positive, negative) pairs.
    fn auc_pairs(scores: &[f64], truth: &[Label]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, ti) in truth.iter().enumerate() {
            for (j, tj) in truth.iter().enumerate() {
                if *ti == P && *tj == N {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[P, N], &[P, N]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 0,
                tn: 1,
                fn_: 0
            }
        );
        let cm = confusion(&[P, P], &[N, N]).unwrap();
        assert_eq!(cm.fn_, 2);
        assert!(confusion(&[P], &[P, N]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        let s = [0.9, 0.8, 0.4, 0.3];
        assert_eq!(auc(&s, &[P, P, N, N]).unwrap(), 1.0);
        assert_eq!(auc(&s, &[N, N, P, P]).unwrap(), 0.0);
        let tied = [0.9, 0.4, 0.4, 0.1];
        assert_eq!(auc_pairs(&tied, &[P, N, P, N]), 0.875);
        assert!((auc(&tied, &[P, N, P, N]).unwrap() - 0.875).abs() < 1e-12);
        assert!(matches!(auc(&s, &[P; 4]), Err(Error::Metric(_))));
    }

    #[test]
    fn gmean_f1_mcc_examples() {
        let perfect = ConfusionMatrix {
            tp: 5,
            fp: 0,
            tn: 7,
            fn_: 0,
        };
        assert_eq!(gmean(&perfect).unwrap(), 1.0);
        assert_eq!(f1(&perfect), 1.0);
        assert_eq!(mcc(&perfect), 1.0);

        let cm = ConfusionMatrix {
            tp: 9,
            fn_: 1,
            tn: 8,
            fp: 2,
        };
        assert!((gmean(&cm).unwrap() - 0.72f64.sqrt()).abs() < 1e-12);

        let cm = ConfusionMatrix {
            tp: 45,
            fp: 5,
            tn: 40,
            fn_: 10,
        };
        assert!((f1(&cm) - 90.0 / 105.0).abs() < 1e-12);
        let expect = 1750.0 / (50.0f64 * 55.0 * 45.0 * 50.0).sqrt();
        assert!((mcc(&cm) - expect).abs() < 1e-12);

        let missed = ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 4,
            fn_: 3,
        };
        assert_eq!(gmean(&missed).unwrap(), 0.0);
        assert_eq!(f1(&missed), 0.0);
        assert_eq!(mcc(&missed), 0.0);
        assert_eq!(
            f1(&ConfusionMatrix {
                tp: 0,
                fp: 0,
                tn: 3,
                fn_: 0
            }),
            0.0
        );
        assert!(gmean(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 3,
            fn_: 0
        })
        .is_err());
    }

    fn labels_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::sample::select(vec![-1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 2.0]), n),
                prop::collection::vec(any::<bool>(), n),
            )
                .prop_map(|(s, b)| {
                    let mut l: Vec<Label> = b.into_iter().map(|b| if b { P } else { N }).collect();
                    l[0] = P;
                    l[1] = N;
                    (s, l)
                })
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pair_enumeration((s, l) in labels_strategy()) {
            prop_assert!((auc(&s, &l).unwrap() - auc_pairs(&s, &l)).abs() < 1e-12);
        }

        #[test]
        fn auc_invariant_under_monotone_map((s, l) in labels_strategy()) {
            let warped: Vec<f64> = s.iter().map(|v| v.exp() * 3.0 - 1.0).collect();
            prop_assert!((auc(&s, &l).unwrap() - auc(&warped, &l).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn swapping_classes_mirrors((s, l) in labels_strategy(), pred in prop::collection::vec(any::<bool>(), 40)) {
            let swapped: Vec<Label> = l.iter().map(|x| x.opposite()).collect();
            prop_assert!((auc(&s, &l).unwrap() + auc(&s, &swapped).unwrap() - 1.0).abs() < 1e-12);
            let p: Vec<Label> = pred[..l.len()].iter().map(|&b| if b { P } else { N }).collect();
            let ps: Vec<Label> = p.iter().map(|x| x.opposite()).collect();
            let a = mcc(&confusion(&l, &p).unwrap());
            let b = mcc(&confusion(&swapped, &ps).unwrap());
            prop_assert!((a.abs() - b.abs()).abs() < 1e-12);
        }

        #[test]
        fn ranges_hold(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
            let cm = ConfusionMatrix { tp, fp, tn, fn_ };
            let f = f1(&cm);
            let m = mcc(&cm);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((-1.0..=1.0).contains(&m));
            if let Ok(g) = gmean(&cm) {
                prop_assert!((0.0..=1.0).contains(&g));
            }
        }

        #[test]
        fn counts_sum_to_n(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let t: Vec<Label> = bits.iter().map(|b| if b.0 { P } else { N }).collect();
            let p: Vec<Label> = bits.iter().map(|b| if b.1 { P } else { N }).collect();
            prop_assert_eq!(confusion(&t, &p).unwrap().total(), bits.len());
        }
    }
}
