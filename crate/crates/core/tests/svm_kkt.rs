use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use res_core::counter::TrainingCounter;
use res_core::data::{stratified_halves, Dataset, Label, LabeledSample};
use res_core::svm::{grid_search_c, train_svm, GridCriterion, SvmConfig, TrainedSvm, PAPER_C_GRID};

const TOL: f64 = 1e-3;

fn dataset(points: Vec<(Vec<f64>, bool)>) -> Dataset {
    let samples = points
        .into_iter()
        .map(|(x, pos)| LabeledSample::new(x, if pos { Label::Positive } else { Label::Negative }))
        .collect();
    Dataset::new("random", samples).unwrap()
}

fn random_dataset() -> impl Strategy<Value = Dataset> {
    (4usize..=60, 1usize..=4).prop_flat_map(|(n, d)| {
        prop::collection::vec((prop::collection::vec(-3.0f64..3.0, d), any::<bool>()), n).prop_map(|mut pts| {
            pts[0].1 = true;
            pts[1].1 = false;
            dataset(pts)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn trained_models_satisfy_kkt(
        data in random_dataset(),
        c in prop::sample::select(PAPER_C_GRID.to_vec()),
        gamma in 0.05f64..2.0,
    ) {
        let config = SvmConfig { tol: TOL, ..SvmConfig::new(c, gamma) };
        let svm = TrainedSvm::fit(&data, &config).unwrap();
        let mut balance = 0.0;
        for (s, &a) in data.samples().iter().zip(svm.alphas()) {
            prop_assert!((0.0..=c).contains(&a));
            let yf = s.label.sign() * svm.model().decision_value(&s.features).unwrap();
            balance += a * s.label.sign();
            if a <= 1e-10 * c {
                prop_assert!(yf >= 1.0 - TOL, "alpha 0 but y f = {yf}");
            } else if a >= c * (1.0 - 1e-10) {
                prop_assert!(yf <= 1.0 + TOL, "alpha at C but y f = {yf}");
            } else {
                prop_assert!((yf - 1.0).abs() <= TOL, "free alpha but y f = {yf}");
            }
        }
        prop_assert!(balance.abs() < 1e-9 * c.max(1.0) * data.len() as f64);
    }
}

fn toy() -> Dataset {
    let pts = (0..30)
        .map(|i| {
            let pos = i % 2 == 1;
            let t = i as f64 * 0.13;
            let x = vec![t.cos() + if pos { 3.0 } else { 0.0 }, t.sin()];
            (x, pos)
        })
        .collect();
    dataset(pts)
}

#[test]
fn separable_toy_is_fit_exactly() {
    let data = toy();
    let model = train_svm(&data, &SvmConfig::new(10.0, 0.5)).unwrap();
    for s in data.samples() {
        assert_eq!(model.predict(&s.features).unwrap(), s.label);
    }
}

#[test]
fn grid_choice_is_best_internal_accuracy() {
    let data = toy();
    let template = SvmConfig::new(1.0, 0.5);
    let seed = 11;
    let chosen = grid_search_c(
        &data,
        &PAPER_C_GRID,
        &template,
        GridCriterion::TwoFoldAccuracy,
        seed,
        &TrainingCounter::new(),
    )
    .unwrap();

    let labels: Vec<Label> = data.labels().collect();
    let (a, b) = stratified_halves(&labels, &mut ChaCha8Rng::seed_from_u64(seed));
    let halves = [
        (data.subset(&a).unwrap(), data.subset(&b).unwrap()),
        (data.subset(&b).unwrap(), data.subset(&a).unwrap()),
    ];
    let accuracy = |c: f64| {
        let mut acc = 0.0;
        for (train, test) in &halves {
            let m = train_svm(train, &template.with_c(c)).unwrap();
            let hits = test
                .samples()
                .iter()
                .filter(|s| m.predict(&s.features).unwrap() == s.label)
                .count();
            acc += hits as f64 / test.len() as f64;
        }
        acc / 2.0
    };
    let best = accuracy(chosen);
    for c in PAPER_C_GRID {
        assert!(best >= accuracy(c), "C={c} beats chosen C={chosen}");
    }
}
