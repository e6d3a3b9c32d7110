//! Second-level correctness models, per-object member selection and the
//! fused decision over the selected members.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counter::TrainingCounter;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::pool::{sum_from_scores, ClassifierPool};
use crate::relearn::{build_second_level_dataset, meta_features, probe_features, RelearnCache, SecondLevelDataset};
use crate::svm::{train_svm, SvmModel, SvmSearch};

/// Predicts whether a pool member classifies an object correctly
/// (`+1`) or not (`−1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondLevelModel {
    Svm(SvmModel),
    /// Training targets were all identical; always emits that class.
    Constant(Label),
}

impl SecondLevelModel {
    pub fn predict(&self, meta: &[f64]) -> Result<Label> {
        match self {
            SecondLevelModel::Svm(m) => m.predict(meta),
            SecondLevelModel::Constant(l) => Ok(*l),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, SecondLevelModel::Constant(_))
    }
}

/// Which meta-model output keeps a member.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Keep members predicted to be correct.
    #[default]
    PredictedCorrect,
    /// Keep members whose meta-model outputs the indicator value 0.
    PaperLiteral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub keep: Vec<bool>,
    pub polarity: Polarity,
}

impl SelectionMask {
    pub fn all(k: usize, keep: bool, polarity: Polarity) -> Self {
        Self {
            keep: vec![keep; k],
            polarity,
        }
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&b| b).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResDecision {
    pub label: Label,
    pub aggregate_score: f64,
    pub mask: SelectionMask,
    /// No member was kept and the full-pool sum rule decided.
    pub fallback_used: bool,
}

/// Trains on the `d + 3` meta-features with C tuned on this meta-dataset.
/// Single-class targets yield a [`SecondLevelModel::Constant`].
pub fn train_second_level(
    data: &SecondLevelDataset,
    search: &SvmSearch,
    seed: u64,
    counter: &TrainingCounter,
) -> Result<SecondLevelModel> {
    if data.is_empty() {
        return Err(Error::Input("second-level dataset is empty".into()));
    }
    let ds = data.to_dataset()?;
    if !ds.has_both_classes() {
        return Ok(SecondLevelModel::Constant(ds.samples()[0].label));
    }
    let config = search.tune(&ds, seed, counter)?;
    let model = train_svm(&ds, &config)?;
    counter.add_meta(1);
    Ok(SecondLevelModel::Svm(model))
}

pub fn select(bsl: &[SecondLevelModel], probe_rows: &[Vec<f64>], polarity: Polarity) -> Result<SelectionMask> {
    if bsl.len() != probe_rows.len() {
        return Err(Error::Input(format!(
            "{} meta-models but {} probe rows",
            bsl.len(),
            probe_rows.len()
        )));
    }
    let keep = bsl
        .iter()
        .zip(probe_rows)
        .map(|(m, row)| {
            let predicted = m.predict(row)?;
            Ok(match polarity {
                Polarity::PredictedCorrect => predicted == Label::Positive,
                Polarity::PaperLiteral => predicted == Label::Negative,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionMask { keep, polarity })
}

/// Sum rule over kept members; the full pool decides when nothing is kept.
pub fn decide_from_scores(scores: &[f64], mask: SelectionMask, tie: Label) -> Result<ResDecision> {
    if scores.len() != mask.keep.len() {
        return Err(Error::Input(format!(
            "mask has {} entries for {} members",
            mask.keep.len(),
            scores.len()
        )));
    }
    if mask.kept() == 0 {
        let (label, aggregate_score) = sum_from_scores(scores, tie);
        return Ok(ResDecision {
            label,
            aggregate_score,
            mask,
            fallback_used: true,
        });
    }
    let aggregate_score: f64 = scores.iter().zip(&mask.keep).filter(|(_, &k)| k).map(|(s, _)| s).sum();
    Ok(ResDecision {
        label: Label::from_score(aggregate_score, tie),
        aggregate_score,
        mask,
        fallback_used: false,
    })
}

pub fn res_decide(pool: &ClassifierPool, mask: SelectionMask, x0: &[f64]) -> Result<ResDecision> {
    decide_from_scores(&pool.member_scores(x0)?, mask, pool.tie())
}

/// Probe features for every member, selection, fused decision. `2K` relearnings.
pub fn res_classify(
    pool: &ClassifierPool,
    bsl: &[SecondLevelModel],
    x0: &[f64],
    polarity: Polarity,
    counter: &TrainingCounter,
) -> Result<ResDecision> {
    if bsl.len() != pool.len() {
        return Err(Error::Input(format!(
            "{} meta-models for a pool of {}",
            bsl.len(),
            pool.len()
        )));
    }
    let mut rows = Vec::with_capacity(pool.len());
    let mut scores = Vec::with_capacity(pool.len());
    for k in 0..pool.len() {
        let g = probe_features(k, pool, x0, counter)?;
        scores.push(g.base_score);
        rows.push(meta_features(x0, &g));
    }
    let mask = select(bsl, &rows, polarity)?;
    decide_from_scores(&scores, mask, pool.tie())
}

/// A pool with one trained correctness model per member.
#[derive(Clone, Debug)]
pub struct ResEnsemble {
    pub pool: ClassifierPool,
    pub meta_datasets: Vec<SecondLevelDataset>,
    pub meta_models: Vec<SecondLevelModel>,
    pub polarity: Polarity,
}

impl ResEnsemble {
    /// Builds every member's meta-dataset on `validation` and trains its
    /// correctness model. Member `k` tunes its C with seed `seed + k`.
    pub fn fit(
        pool: ClassifierPool,
        validation: &Dataset,
        search: &SvmSearch,
        polarity: Polarity,
        seed: u64,
        cache: Option<&RelearnCache>,
        counter: &TrainingCounter,
    ) -> Result<Self> {
        let fitted = (0..pool.len())
            .into_par_iter()
            .map(|k| {
                let meta = build_second_level_dataset(k, &pool, validation, cache, counter)?;
                let model = train_second_level(&meta, search, seed.wrapping_add(k as u64), counter)?;
                Ok((meta, model))
            })
            .collect::<Result<Vec<_>>>()?;
        let (meta_datasets, meta_models) = fitted.into_iter().unzip();
        Ok(Self {
            pool,
            meta_datasets,
            meta_models,
            polarity,
        })
    }

    pub fn classify(&self, x0: &[f64], counter: &TrainingCounter) -> Result<ResDecision> {
        res_classify(&self.pool, &self.meta_models, x0, self.polarity, counter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticParams, DEFAULT_TIE};
    use crate::pool::{sum_rule, train_pool};
    use crate::relearn::{GeneratedFeatures, SecondLevelRow};
    use crate::svm::SvmConfig;
    use proptest::prelude::*;

    fn meta_with_targets(targets: &[u8]) -> SecondLevelDataset {
        let rows = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| SecondLevelRow {
                raw_features: vec![i as f64, (i as f64 * 0.3).sin()],
                generated: GeneratedFeatures {
                    base_score: if t == 1 { 0.5 } else { -0.1 },
                    sigma_minus: if t == 1 { 0.05 } else { 0.6 },
                    sigma_plus: 0.1 + 0.01 * i as f64,
                },
                target: t,
            })
            .collect();
        SecondLevelDataset {
            rows,
            classifier_index: 0,
            d: 2,
        }
    }

    #[test]
    fn degenerate_and_active_meta_models() {
        let counter = TrainingCounter::new();
        let search = SvmSearch::default();
        let all_ok = train_second_level(&meta_with_targets(&[1; 8]), &search, 0, &counter).unwrap();
        assert_eq!(all_ok, SecondLevelModel::Constant(Label::Positive));
        assert_eq!(counter.snapshot().meta, 0);
        let mixed = meta_with_targets(&[1, 1, 0, 1, 0, 1, 1, 0, 1, 1]);
        let m = train_second_level(&mixed, &search, 0, &counter).unwrap();
        assert!(!m.is_degenerate());
        assert_eq!(counter.snapshot().meta, 1);
        assert!(train_second_level(&meta_with_targets(&[]), &search, 0, &counter).is_err());
    }

    #[test]
    fn polarity_complements() {
        let bsl = vec![SecondLevelModel::Constant(Label::Positive); 4];
        let rows = vec![vec![0.0; 5]; 4];
        let correct = select(&bsl, &rows, Polarity::PredictedCorrect).unwrap();
        let literal = select(&bsl, &rows, Polarity::PaperLiteral).unwrap();
        assert_eq!(correct.keep, vec![true; 4]);
        assert_eq!(literal.keep, vec![false; 4]);
        assert!(select(&bsl, &rows[..3], Polarity::PredictedCorrect).is_err());
    }

    #[test]
    fn decide_examples() {
        let scores = [0.4, -0.3, 0.2];
        let one = SelectionMask {
            keep: vec![false, true, false],
            polarity: Polarity::PredictedCorrect,
        };
        let d = decide_from_scores(&scores, one, DEFAULT_TIE).unwrap();
        assert_eq!(d.label, Label::Negative);
        assert_eq!(d.aggregate_score, -0.3);
        assert!(!d.fallback_used);

        let none = SelectionMask::all(3, false, Polarity::PredictedCorrect);
        let d = decide_from_scores(&scores, none, DEFAULT_TIE).unwrap();
        assert!(d.fallback_used);
        assert_eq!(d.label, sum_from_scores(&scores, DEFAULT_TIE).0);

        let all = SelectionMask::all(3, true, Polarity::PredictedCorrect);
        let d = decide_from_scores(&scores, all, DEFAULT_TIE).unwrap();
        assert_eq!((d.label, d.aggregate_score), sum_from_scores(&scores, DEFAULT_TIE));
        assert!(decide_from_scores(
            &scores,
            SelectionMask::all(2, true, Polarity::PaperLiteral),
            DEFAULT_TIE
        )
        .is_err());
    }

    #[test]
    fn oracle_meta_models_reduce_to_sum_rule() {
        let ds = generate_synthetic(&SyntheticParams {
            n_per_class: 20,
            ..SyntheticParams::default()
        })
        .unwrap();
        let counter = TrainingCounter::new();
        let pool = train_pool(&ds, 3, &SvmConfig::new(1.0, 0.5), 1, &counter).unwrap();
        let keep_all = vec![SecondLevelModel::Constant(Label::Positive); 3];
        let drop_all = vec![SecondLevelModel::Constant(Label::Negative); 3];
        for s in ds.samples().iter().step_by(3) {
            let sum = sum_rule(&pool, &s.features).unwrap();
            let kept = res_classify(&pool, &keep_all, &s.features, Polarity::PredictedCorrect, &counter).unwrap();
            assert_eq!((kept.label, kept.aggregate_score), sum);
            let dropped = res_classify(&pool, &drop_all, &s.features, Polarity::PredictedCorrect, &counter).unwrap();
            assert!(dropped.fallback_used);
            assert_eq!(dropped.label, sum.0);
            let mask = SelectionMask::all(3, true, Polarity::PredictedCorrect);
            assert_eq!(res_decide(&pool, mask, &s.features).unwrap().label, sum.0);
        }
    }

    proptest! {
        #[test]
        fn decision_consistent_with_mask(
            scores in prop::collection::vec(-0.999f64..0.999, 1..12),
            bits in prop::collection::vec(any::<bool>(), 12),
        ) {
            let k = scores.len();
            let mask = SelectionMask { keep: bits[..k].to_vec(), polarity: Polarity::PredictedCorrect };
            let d = decide_from_scores(&scores, mask, DEFAULT_TIE).unwrap();
            prop_assert!(d.aggregate_score > -(k as f64) && d.aggregate_score < k as f64);
            prop_assert_eq!(d.label, Label::from_score(d.aggregate_score, DEFAULT_TIE));
            if d.fallback_used {
                prop_assert_eq!(d.mask.kept(), 0);
            }
        }

        #[test]
        fn polarity_flips_every_bit(targets in prop::collection::vec(any::<bool>(), 1..10)) {
            let bsl: Vec<SecondLevelModel> = targets
                .iter()
                .map(|&t| SecondLevelModel::Constant(if t { Label::Positive } else { Label::Negative }))
                .collect();
            let rows = vec![vec![0.0; 3]; bsl.len()];
            let a = select(&bsl, &rows, Polarity::PredictedCorrect).unwrap();
            let b = select(&bsl, &rows, Polarity::PaperLiteral).unwrap();
            prop_assert!(a.keep.iter().zip(&b.keep).all(|(x, y)| x != y));
        }
    }
}
