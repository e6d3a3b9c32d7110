use proptest::prelude::*;

use res_core::counter::TrainingCounter;
use res_core::data::{generate_synthetic, Label, SyntheticParams, DEFAULT_TIE};
use res_core::pool::train_pool;
use res_core::relearn::build_second_level_dataset;
use res_core::svm::{SvmConfig, TrainedSvm};

fn syn(n: usize, seed: u64) -> res_core::data::Dataset {
    generate_synthetic(&SyntheticParams {
        n_per_class: n,
        seed,
        ..SyntheticParams::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn predictions_survive_affine_rescaling(
        scale in prop::collection::vec(prop_oneof![0.01f64..100.0, -100.0f64..-0.01], 2),
        shift in prop::collection::vec(-50.0f64..50.0, 2),
        seed in 0u64..1000,
    ) {
        let ds = syn(15, seed);
        let moved = ds.affine(&scale, &shift).unwrap();
        // Tight tolerance so solver stopping noise stays below the comparison.
        let config = SvmConfig { tol: 1e-10, ..SvmConfig::new(1.0, 0.5) };
        let a = TrainedSvm::fit(&ds, &config).unwrap();
        let b = TrainedSvm::fit(&moved, &config).unwrap();
        for i in -4..=4 {
            for j in -4..=4 {
                let p = [1.5 + i as f64 * 0.5, j as f64 * 0.75];
                let q = [p[0] * scale[0] + shift[0], p[1] * scale[1] + shift[1]];
                let da = a.model().decision_value(&p).unwrap();
                let db = b.model().decision_value(&q).unwrap();
                prop_assert!((da - db).abs() < 1e-6, "{da} vs {db}");
                if da.abs() > 1e-6 {
                    prop_assert_eq!(a.model().predict(&p).unwrap(), b.model().predict(&q).unwrap());
                }
            }
        }
    }
}

#[test]
fn opposite_label_injection_moves_scores_more() {
    let ds = syn(200, 7);
    let counter = TrainingCounter::new();
    let pool = train_pool(&ds, 3, &SvmConfig::new(1.0, 0.5), 5, &counter).unwrap();
    for k in 0..pool.len() {
        let meta = build_second_level_dataset(k, &pool, &ds, None, &counter).unwrap();
        let agree = meta
            .rows
            .iter()
            .filter(|r| {
                let predicted = Label::from_score(r.generated.base_score, DEFAULT_TIE);
                r.generated.sigma_for(predicted.opposite()) >= r.generated.sigma_for(predicted)
            })
            .count();
        let share = agree as f64 / meta.len() as f64;
        assert!(share >= 0.6, "member {k}: only {share:.3}");
    }
}
