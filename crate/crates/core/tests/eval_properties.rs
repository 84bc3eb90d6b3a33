use geovid::eval::analyze::{read_table, write_table};
use geovid::eval::{average_precision, f1_at_threshold, roc_auc, MetricsReport, SampleScore};
use geovid::Error;
use proptest::prelude::*;

/// Both classes present, scores drawn from a small grid so ties happen.
fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..40)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0u32..12).prop_map(|k| k as f64 / 11.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("needs both classes", |(_, l)| {
            l.iter().any(|&x| x) && l.iter().any(|&x| !x)
        })
}

/// Pairwise definition: P(score_pos > score_neg) + 0.5 P(tie).
fn auc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count((s, l) in labeled_scores()) {
        prop_assert!((roc_auc(&s, &l).unwrap() - auc_by_pairs(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn auc_is_rank_invariant((s, l) in labeled_scores(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let base = roc_auc(&s, &l).unwrap();
        let affine: Vec<f64> = s.iter().map(|x| a * x + b).collect();
        let cubed: Vec<f64> = s.iter().map(|x| (x - 0.3).powi(3)).collect();
        let exp: Vec<f64> = s.iter().map(|x| (3.0 * x).exp()).collect();
        prop_assert_eq!(roc_auc(&affine, &l).unwrap(), base);
        prop_assert_eq!(roc_auc(&cubed, &l).unwrap(), base);
        prop_assert_eq!(roc_auc(&exp, &l).unwrap(), base);
    }

    #[test]
    fn flipping_labels_complements_auc((s, l) in labeled_scores()) {
        let flipped: Vec<bool> = l.iter().map(|x| !x).collect();
        let sum = roc_auc(&s, &l).unwrap() + roc_auc(&s, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_classes_score_one(neg in prop::collection::vec(0.0f64..0.49, 1..20), pos in prop::collection::vec(0.51f64..1.0, 1..20)) {
        let scores: Vec<f64> = neg.iter().chain(&pos).copied().collect();
        let labels: Vec<bool> = neg.iter().map(|_| false).chain(pos.iter().map(|_| true)).collect();
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
        prop_assert_eq!(average_precision(&scores, &labels).unwrap(), 1.0);
        prop_assert_eq!(f1_at_threshold(&scores, &labels, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn tables_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&path, &["t", "a", "b", "c"], &rows).unwrap();
        prop_assert_eq!(read_table(&path).unwrap(), rows);
    }
}

#[test]
fn single_class_is_an_error() {
    assert!(matches!(
        roc_auc(&[0.1, 0.2], &[true, true]),
        Err(Error::SingleClass)
    ));
    let per_sample = vec![SampleScore {
        id: "a".into(),
        label: geovid::geometry::features::Label::Generated,
        score: 0.3,
    }];
    assert!(matches!(
        MetricsReport::from_scores(per_sample),
        Err(Error::SingleClass)
    ));
}
