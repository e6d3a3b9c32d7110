use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train_svm, SvmConfig};
use crate::counter::TrainingCounter;
use crate::data::{stratified_halves, Dataset, Label};
use crate::error::{Error, Result};

/// Candidate values for the regularization constant.
pub const PAPER_C_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridCriterion {
    /// Mean accuracy over a stratified two-fold split of the data.
    #[default]
    TwoFoldAccuracy,
    /// Accuracy on the training data itself.
    Resubstitution,
}

/// Returns the grid value with the best criterion; ties go to the smaller C.
///
/// A fold whose training half holds a single class is scored as a constant
/// predictor of that class instead of failing.
pub fn grid_search_c(
    data: &Dataset,
    grid: &[f64],
    template: &SvmConfig,
    criterion: GridCriterion,
    seed: u64,
    counter: &TrainingCounter,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Parameter("C grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::Parameter(format!("C grid value {bad} is not positive")));
    }
    data.ensure_both_classes()?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);

    let folds = match criterion {
        GridCriterion::TwoFoldAccuracy => {
            let labels: Vec<Label> = data.labels().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = stratified_halves(&labels, &mut rng);
            vec![
                (data.subset(&a)?, data.subset(&b)?),
                (data.subset(&b)?, data.subset(&a)?),
            ]
        }
        GridCriterion::Resubstitution => vec![(data.clone(), data.clone())],
    };

    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &c in &sorted {
        let config = template.with_c(c);
        let mut acc_sum = 0.0;
        for (train, test) in &folds {
            acc_sum += fold_accuracy(train, test, &config, counter)?;
        }
        let acc = acc_sum / folds.len() as f64;
        log::debug!("grid C={c}: accuracy {acc:.4}");
        if acc > best.0 {
            best = (acc, c);
        }
    }
    Ok(best.1)
}

fn fold_accuracy(train: &Dataset, test: &Dataset, config: &SvmConfig, counter: &TrainingCounter) -> Result<f64> {
    let correct = if train.has_both_classes() {
        let model = train_svm(train, config)?;
        counter.add_grid(1);
        let mut correct = 0usize;
        for s in test.samples() {
            if model.predict(&s.features)? == s.label {
                correct += 1;
            }
        }
        correct
    } else {
        counter.add_grid_constant(1);
        let only = train.samples()[0].label;
        test.labels().filter(|&l| l == only).count()
    };
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledSample;

    fn blobs() -> Dataset {
        let samples = (0..40)
            .map(|i| {
                let t = i as f64;
                if i % 2 == 0 {
                    LabeledSample::new(vec![(t * 0.37).sin(), (t * 0.91).cos()], Label::Negative)
                } else {
                    LabeledSample::new(vec![4.0 + (t * 0.37).sin(), 4.0 + (t * 0.91).cos()], Label::Positive)
                }
            })
            .collect();
        Dataset::new("blobs", samples).unwrap()
    }

    #[test]
    fn result_is_a_grid_member() {
        let counter = TrainingCounter::new();
        let c = grid_search_c(
            &blobs(),
            &PAPER_C_GRID,
            &SvmConfig::new(1.0, 0.5),
            GridCriterion::default(),
            1,
            &counter,
        )
        .unwrap();
        assert!(PAPER_C_GRID.contains(&c));
        assert_eq!(counter.snapshot().grid, 12);
    }

    #[test]
    fn ties_pick_smallest() {
        // Well separated blobs: every C classifies the held-out half perfectly.
        let counter = TrainingCounter::new();
        let grid = [10.0, 1.0, 100.0];
        let c = grid_search_c(
            &blobs(),
            &grid,
            &SvmConfig::new(1.0, 0.5),
            GridCriterion::default(),
            3,
            &counter,
        )
        .unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn empty_or_invalid_grid() {
        let counter = TrainingCounter::new();
        let cfg = SvmConfig::default();
        assert!(grid_search_c(&blobs(), &[], &cfg, GridCriterion::default(), 0, &counter).is_err());
        assert!(grid_search_c(&blobs(), &[1.0, -2.0], &cfg, GridCriterion::default(), 0, &counter).is_err());
    }

    #[test]
    fn single_sample_minority_scores_constant_folds() {
        let mut samples: Vec<LabeledSample> = (0..9)
            .map(|i| LabeledSample::new(vec![i as f64], Label::Positive))
            .collect();
        samples.push(LabeledSample::new(vec![20.0], Label::Negative));
        let ds = Dataset::new("skew", samples).unwrap();
        let counter = TrainingCounter::new();
        let c = grid_search_c(
            &ds,
            &[0.1, 1.0],
            &SvmConfig::new(1.0, 1.0),
            GridCriterion::default(),
            0,
            &counter,
        )
        .unwrap();
        assert!(c == 0.1 || c == 1.0);
        let counts = counter.snapshot();
        assert_eq!(counts.grid + counts.grid_constant, 4);
        assert_eq!(counts.grid_constant, 2);
    }
}
