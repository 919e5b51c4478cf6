use proptest::prelude::*;

use listtune::features::{FeatureId, SparseVector, WeightVector};
use listtune::metrics::{corpus_bleu, sentence_bleu, BleuStats, TokenSeq};
use listtune::ranking::{log_permutation_probability, Hypothesis, KBestList, LossKind, Permutation};

fn list(eval: &[f64], rows: &[Vec<f64>]) -> KBestList {
    let hyps = eval.iter().zip(rows).map(|(&e, row)| {
        let f = SparseVector::from_pairs(row.iter().enumerate().map(|(j, &v)| (FeatureId(j as u32), v)));
        Hypothesis::with_eval_score(f, TokenSeq::default(), BleuStats::default(), e).unwrap()
    });
    KBestList::from_hypotheses("p", 0, hyps).unwrap()
}

fn list_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..12, 1usize..6).prop_flat_map(|(k, dim)| {
        (
            proptest::collection::vec(0.0f64..1.0, k),
            proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, dim), k),
            proptest::collection::vec(-2.0f64..2.0, dim),
        )
    })
}

fn tokens() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..12)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #[test]
    fn losses_ignore_a_shared_score_offset((eval, rows, w) in list_strategy(), offset in -5.0f64..5.0) {
        // A constant extra feature shifts every model score by `offset`.
        let shifted_rows: Vec<Vec<f64>> = rows.iter().map(|r| {
            let mut r = r.clone();
            r.push(1.0);
            r
        }).collect();
        let mut shifted_w = w.clone();
        shifted_w.push(offset);
        let (a, b) = (list(&eval, &rows), list(&eval, &shifted_rows));
        let (wa, wb) = (WeightVector::from_dense(w), WeightVector::from_dense(shifted_w));
        for kind in [LossKind::ListNet, LossKind::ListMle, LossKind::ListMleTopN(2), LossKind::ListMleTe] {
            let (la, lb) = (kind.loss(&a, &wa).unwrap(), kind.loss(&b, &wb).unwrap());
            prop_assert!((la - lb).abs() <= 1e-9 * la.abs().max(1.0), "{kind}: {la} vs {lb}");
        }
    }

    #[test]
    fn permutation_log_probabilities_are_non_positive(scores in proptest::collection::vec(-20.0f64..20.0, 1..40)) {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.reverse();
        let lp = log_permutation_probability(&scores, &Permutation::from_order(order).unwrap()).unwrap();
        prop_assert!(lp <= 1e-12 && lp.is_finite());
    }

    #[test]
    fn losses_are_non_negative((eval, rows, w) in list_strategy()) {
        let l = list(&eval, &rows);
        let w = WeightVector::from_dense(w);
        for kind in [LossKind::ListNet, LossKind::ListMle, LossKind::ListMleTopN(3), LossKind::ListMleTe] {
            prop_assert!(kind.loss(&l, &w).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn sentence_bleu_is_in_unit_interval(h in tokens(), r in tokens()) {
        let b = sentence_bleu(&TokenSeq::new(&h), &TokenSeq::new(&r));
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn bleu_is_invariant_under_token_relabeling(h in tokens(), r in tokens()) {
        let relabel = |v: &[String]| TokenSeq::new(v.iter().map(|t| format!("w{}", t.len() + t.as_bytes()[0] as usize)));
        let plain = sentence_bleu(&TokenSeq::new(&h), &TokenSeq::new(&r));
        let renamed = sentence_bleu(&relabel(&h), &relabel(&r));
        prop_assert_eq!(plain, renamed);
    }

    #[test]
    fn corpus_bleu_ignores_sentence_order(pairs in proptest::collection::vec((tokens(), tokens()), 1..8), rot in 0usize..8) {
        let seqs: Vec<(TokenSeq, TokenSeq)> = pairs.iter().map(|(h, r)| (TokenSeq::new(h), TokenSeq::new(r))).collect();
        let mut rotated = seqs.clone();
        rotated.rotate_left(rot % seqs.len());
        let a = corpus_bleu(seqs.iter().map(|(h, r)| (h, r))).unwrap();
        let b = corpus_bleu(rotated.iter().map(|(h, r)| (h, r))).unwrap();
        prop_assert_eq!(a, b);
    }
}
