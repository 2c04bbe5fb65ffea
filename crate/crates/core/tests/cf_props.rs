mod oracle;

use movierec::dataset::Axis;
use movierec::neighborhood_cf::{CfConfig, CfModel, Weighting};
use proptest::prelude::*;

use oracle::Dense;

fn dense(rows: usize, cols: usize) -> impl Strategy<Value = Dense> {
    proptest::collection::vec(
        proptest::collection::vec(proptest::option::weighted(0.55, 1u8..=5), cols),
        rows,
    )
    .prop_map(|g| {
        g.into_iter()
            .map(|row| row.into_iter().map(|r| r.map(f64::from)).collect())
            .collect()
    })
}

fn model(d: &Dense, axis: Axis, k: usize, weighting: Weighting, restore_means: bool) -> CfModel {
    let config = CfConfig {
        restore_means,
        ..CfConfig::new(axis, k, weighting)
    };
    CfModel::new(oracle::to_matrix(d), config).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn predictions_match_brute_force(d in dense(8, 8), k in 1usize..=7, restore in any::<bool>()) {
        let simple = model(&d, Axis::User, k, Weighting::Simple, restore);
        let weighted = model(&d, Axis::User, k, Weighting::Weighted, restore);
        for u in 0..8 {
            for i in 0..8 {
                let (uid, iid) = (u as u64 + 1, i as u64 + 1);
                let (es, ns) = oracle::predict(&d, u, i, k, false, restore);
                let (ew, nw) = oracle::predict(&d, u, i, k, true, restore);
                let ps = simple.predict_simple(uid, iid).unwrap();
                let pw = weighted.predict_weighted(uid, iid).unwrap();
                prop_assert!((ps.value - es).abs() < 1e-9, "simple ({},{}): {} vs {}", u, i, ps.value, es);
                prop_assert!((pw.value - ew).abs() < 1e-9, "weighted ({},{}): {} vs {}", u, i, pw.value, ew);
                prop_assert_eq!(ps.support, ns);
                prop_assert_eq!(pw.support, nw);
            }
        }
    }

    #[test]
    fn predictions_stay_on_scale(d in dense(7, 9), k in 1usize..=6, restore in any::<bool>()) {
        for axis in [Axis::User, Axis::Item] {
            for weighting in [Weighting::Simple, Weighting::Weighted] {
                let m = model(&d, axis, k, weighting, restore);
                for u in 1..=7 {
                    for i in 1..=9 {
                        let v = m.predict_simple(u, i).unwrap().value;
                        prop_assert!((1.0..=5.0).contains(&v));
                        let v = m.predict_weighted(u, i).unwrap().value;
                        prop_assert!((1.0..=5.0).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn item_cf_is_user_cf_on_the_transpose(d in dense(6, 6), k in 1usize..=5) {
        let t = oracle::transpose(&d);
        for weighting in [Weighting::Simple, Weighting::Weighted] {
            let user = model(&d, Axis::User, k, weighting, false);
            let item = model(&t, Axis::Item, k, weighting, false);
            for u in 1..=6 {
                for i in 1..=6 {
                    let a = movierec::Predictor::predict(&user, u, i).unwrap();
                    let b = movierec::Predictor::predict(&item, i, u).unwrap();
                    prop_assert!((a.value - b.value).abs() < 1e-12);
                    prop_assert_eq!(a.support, b.support);
                }
            }
        }
    }

    /// Neighbors whose centered rows are positive multiples of one pattern are
    /// equally similar to the target, so the weighted mean is the plain mean.
    #[test]
    fn equal_weights_reduce_to_simple_mean(
        pattern in proptest::collection::vec(-1.0f64..1.0, 5),
        scales in proptest::collection::vec((0.2f64..0.5, 2.0f64..4.0), 2..6),
    ) {
        let centered: Vec<f64> = {
            let mean = pattern.iter().sum::<f64>() / pattern.len() as f64;
            pattern.iter().map(|p| p - mean).collect()
        };
        prop_assume!(oracle::norm(&centered) > 0.1);
        // item 5 (index 4) is the one being predicted
        let mut d: Dense = vec![(0..5)
            .map(|i| (i < 4).then(|| (3.0 + 2.0 * centered[i]).clamp(1.0, 5.0)))
            .collect()];
        for &(c, m) in &scales {
            d.push(centered.iter().map(|x| Some(m + c * x)).collect());
        }
        let k = scales.len();
        let simple = model(&d, Axis::User, k, Weighting::Simple, false);
        let weighted = model(&d, Axis::User, k, Weighting::Weighted, false);
        let list = weighted.neighbor_list(1).unwrap();
        prop_assume!(list.neighbors.len() == k && list.neighbors.iter().all(|n| n.score > 0.0));
        let first = list.neighbors[0].score;
        prop_assert!(list.neighbors.iter().all(|n| (n.score - first).abs() < 1e-12));
        let a = simple.predict_simple(1, 5).unwrap();
        let b = weighted.predict_weighted(1, 5).unwrap();
        prop_assert_eq!(a.support, k);
        prop_assert!((a.value - b.value).abs() < 1e-12, "{} vs {}", a.value, b.value);
    }
}
