mod common;

use proptest::prelude::*;
use wfkit::eval::{compute_metrics, compute_metrics_with_classes, Averaging, ConfusionMatrix, EvalError};

use common::{expand, mean, oracle_metrics, weighted};

fn arb_matrix() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (2usize..6).prop_flat_map(|k| {
        prop::collection::vec(prop::collection::vec(prop_oneof![3 => Just(0u64), 5 => 0u64..30], k), k)
            .prop_filter("at least one row", |m| m.iter().flatten().sum::<u64>() > 0)
    })
}

fn classes(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn averages_match_cell_arithmetic(m in arb_matrix()) {
        let k = m.len();
        let names = classes(k);
        let (truth, pred) = expand(&m, &names);
        let o = oracle_metrics(&m);

        let w = compute_metrics_with_classes(&truth, &pred, names.clone(), Averaging::Weighted).unwrap();
        prop_assert!(close(w.accuracy, o.accuracy));
        prop_assert!(close(w.precision, weighted(&o.precision, &o.support)));
        prop_assert!(close(w.recall, weighted(&o.recall, &o.support)));
        prop_assert!(close(w.f1, weighted(&o.f1, &o.support)));
        prop_assert!(close(w.recall, w.accuracy));

        let mac = compute_metrics_with_classes(&truth, &pred, names.clone(), Averaging::Macro).unwrap();
        prop_assert!(close(mac.precision, mean(&o.precision)));
        prop_assert!(close(mac.recall, mean(&o.recall)));
        prop_assert!(close(mac.f1, mean(&o.f1)));

        let b = compute_metrics_with_classes(&truth, &pred, names.clone(), Averaging::Binary { positive: "c0".into() }).unwrap();
        prop_assert!(close(b.precision, o.precision[0]));
        prop_assert!(close(b.recall, o.recall[0]));
        prop_assert!(close(b.f1, o.f1[0]));

        let cm = ConfusionMatrix::from_labels(&truth, &pred, names).unwrap();
        prop_assert_eq!(&cm.counts, &m);
        prop_assert_eq!(cm.total(), m.iter().flatten().sum::<u64>());
    }

    #[test]
    fn scores_lie_in_unit_interval(m in arb_matrix()) {
        let names = classes(m.len());
        let (truth, pred) = expand(&m, &names);
        for avg in [Averaging::Weighted, Averaging::Macro, Averaging::Binary { positive: "c1".into() }] {
            let r = compute_metrics_with_classes(&truth, &pred, names.clone(), avg).unwrap();
            for v in [r.accuracy, r.precision, r.recall, r.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

#[test]
fn zero_division_gives_zero() {
    // positive class never predicted and never present
    let truth = ["n", "n"];
    let pred = ["n", "n"];
    let r = compute_metrics(&truth, &pred, Averaging::Binary { positive: "p".into() }).unwrap();
    assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 0.0, 0.0, 0.0));
    // predicted but never right
    let r = compute_metrics(&["n", "n"], &["p", "n"], Averaging::Binary { positive: "p".into() }).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
}

#[test]
fn worked_binary_example() {
    // tp 3, fp 1, tn 5, fn 1
    let mut truth = vec!["p"; 4];
    truth.extend(vec!["n"; 6]);
    let pred = ["p", "p", "p", "n", "p", "n", "n", "n", "n", "n"];
    let r = compute_metrics(&truth, &pred, Averaging::Binary { positive: "p".into() }).unwrap();
    assert!((r.accuracy - 0.8).abs() < 1e-12);
    assert!((r.precision - 0.75).abs() < 1e-12);
    assert!((r.recall - 0.75).abs() < 1e-12);
    assert!((r.f1 - 0.75).abs() < 1e-12);
}

#[test]
fn weighted_recall_is_accuracy_but_macro_differs() {
    // 3 classes with supports 10, 5, 5
    let m = vec![vec![8, 1, 1], vec![1, 2, 2], vec![0, 0, 5]];
    let names = classes(3);
    let (truth, pred) = expand(&m, &names);
    let w = compute_metrics_with_classes(&truth, &pred, names.clone(), Averaging::Weighted).unwrap();
    let mac = compute_metrics_with_classes(&truth, &pred, names, Averaging::Macro).unwrap();
    assert!((w.recall - 0.75).abs() < 1e-12);
    assert!((w.accuracy - 0.75).abs() < 1e-12);
    // (0.8 + 0.4 + 1.0) / 3
    assert!((mac.recall - 2.2 / 3.0).abs() < 1e-12);
}

#[test]
fn mismatched_lengths_rejected() {
    assert!(matches!(
        compute_metrics(&["a"], &["a", "b"], Averaging::Macro),
        Err(EvalError::LengthMismatch { .. })
    ));
}
