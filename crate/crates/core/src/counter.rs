use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

/// Counts SVM trainings by purpose. Shared by reference across workers.
#[derive(Debug, Default)]
pub struct TrainingCounter {
    base: AtomicUsize,
    relearn: AtomicUsize,
    meta: AtomicUsize,
    grid: AtomicUsize,
    grid_constant: AtomicUsize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingCounts {
    /// Bagged first-level members.
    pub base: usize,
    /// Retrainings with an injected probe object.
    pub relearn: usize,
    /// Second-level (correctness) models.
    pub meta: usize,
    /// Trainings inside C grid searches.
    pub grid: usize,
    /// Grid-search folds that held a single class and were scored as a constant predictor.
    pub grid_constant: usize,
}

impl TrainingCounts {
    /// All SVM fits except those done by grid search.
    pub fn pipeline_total(&self) -> usize {
        self.base + self.relearn + self.meta
    }

    pub fn total(&self) -> usize {
        self.pipeline_total() + self.grid
    }
}

impl std::ops::Add for TrainingCounts {
    type Output = TrainingCounts;

    fn add(self, o: TrainingCounts) -> TrainingCounts {
        TrainingCounts {
            base: self.base + o.base,
            relearn: self.relearn + o.relearn,
            meta: self.meta + o.meta,
            grid: self.grid + o.grid,
            grid_constant: self.grid_constant + o.grid_constant,
        }
    }
}

impl TrainingCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add_base(&self, n: usize) {
        self.base.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn add_relearn(&self, n: usize) {
        self.relearn.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn add_meta(&self, n: usize) {
        self.meta.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn add_grid(&self, n: usize) {
        self.grid.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn add_grid_constant(&self, n: usize) {
        self.grid_constant.fetch_add(n, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> TrainingCounts {
        TrainingCounts {
            base: self.base.load(Ordering::Relaxed),
            relearn: self.relearn.load(Ordering::Relaxed),
            meta: self.meta.load(Ordering::Relaxed),
            grid: self.grid.load(Ordering::Relaxed),
            grid_constant: self.grid_constant.load(Ordering::Relaxed),
        }
    }
}
