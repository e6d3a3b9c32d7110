//! Bagged pool of RBF-SVM members and the two selection-free combiners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::counter::TrainingCounter;
use crate::data::{Dataset, Label};
use crate::error::{check_dim, Error, Result};
use crate::svm::{SvmConfig, SvmModel, TrainedSvm};

/// Redraws allowed per member when a bootstrap sample misses a class.
pub const MAX_BOOTSTRAP_RETRIES: usize = 100;

#[derive(Clone, Debug)]
pub struct PoolMember {
    /// Indices into the training set, with repeats, ascending.
    pub fold_indices: Vec<usize>,
    pub fold: Dataset,
    pub svm: TrainedSvm,
}

impl PoolMember {
    pub fn model(&self) -> &SvmModel {
        self.svm.model()
    }
}

#[derive(Clone, Debug)]
pub struct ClassifierPool {
    members: Vec<PoolMember>,
    config: SvmConfig,
    seed: u64,
}

impl ClassifierPool {
    pub fn members(&self) -> &[PoolMember] {
        &self.members
    }

    pub fn member(&self, k: usize) -> Result<&PoolMember> {
        self.members
            .get(k)
            .ok_or_else(|| Error::Input(format!("member {k} out of range for a pool of {}", self.members.len())))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn config(&self) -> &SvmConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.members[0].fold.dim()
    }

    pub fn tie(&self) -> Label {
        self.config.tie
    }

    /// Score of every member at `x`, in member order.
    pub fn member_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        self.members.iter().map(|m| m.model().score(x)).collect()
    }
}

/// Draws `n` indices with replacement, redrawing while a class is missing.
pub fn bootstrap_indices(labels: &[Label], rng: &mut impl Rng) -> Result<Vec<usize>> {
    let n = labels.len();
    for _ in 0..=MAX_BOOTSTRAP_RETRIES {
        let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let pos = idx.iter().filter(|&&i| labels[i] == Label::Positive).count();
        if pos > 0 && pos < n {
            idx.sort_unstable();
            return Ok(idx);
        }
    }
    Err(Error::Pool(format!(
        "no two-class bootstrap sample after {MAX_BOOTSTRAP_RETRIES} retries"
    )))
}

pub fn train_pool(
    train: &Dataset,
    k: usize,
    config: &SvmConfig,
    seed: u64,
    counter: &TrainingCounter,
) -> Result<ClassifierPool> {
    if k == 0 {
        return Err(Error::Parameter("pool size K must be at least 1".into()));
    }
    train.ensure_both_classes()?;
    config.validate()?;
    let labels: Vec<Label> = train.labels().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = (0..k)
        .map(|_| bootstrap_indices(&labels, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let members = folds
        .into_par_iter()
        .map(|fold_indices| {
            let fold = train.subset(&fold_indices)?;
            let svm = TrainedSvm::fit(&fold, config)?;
            counter.add_base(1);
            Ok(PoolMember {
                fold_indices,
                fold,
                svm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassifierPool {
        members,
        config: config.clone(),
        seed,
    })
}

/// Majority label among member scores; an exact vote tie is settled by the
/// sign of the score sum, then by `tie`.
pub fn vote_from_scores(scores: &[f64], tie: Label) -> Label {
    let (pos, neg) = vote_counts(scores, tie);
    if pos > neg {
        Label::Positive
    } else if neg > pos {
        Label::Negative
    } else {
        Label::from_score(scores.iter().sum(), tie)
    }
}

fn vote_counts(scores: &[f64], tie: Label) -> (usize, usize) {
    let pos = scores
        .iter()
        .filter(|&&s| Label::from_score(s, tie) == Label::Positive)
        .count();
    (pos, scores.len() - pos)
}

/// `(votes₊ − votes₋) / K`, the continuous output used to rank majority-vote decisions.
pub fn vote_margin(scores: &[f64], tie: Label) -> f64 {
    let (pos, neg) = vote_counts(scores, tie);
    (pos as f64 - neg as f64) / scores.len() as f64
}

pub fn sum_from_scores(scores: &[f64], tie: Label) -> (Label, f64) {
    let total: f64 = scores.iter().sum();
    (Label::from_score(total, tie), total)
}

pub fn majority_vote(pool: &ClassifierPool, x: &[f64]) -> Result<Label> {
    Ok(vote_from_scores(&pool.member_scores(x)?, pool.tie()))
}

pub fn sum_rule(pool: &ClassifierPool, x: &[f64]) -> Result<(Label, f64)> {
    Ok(sum_from_scores(&pool.member_scores(x)?, pool.tie()))
}
