use std::collections::BTreeMap;

use asttrans_core::metrics::{
    average_effect_mrr, crystal_bleu_4, effect_mrr, mrr, top_k_accuracy, EvaluationConfig, OriginalDim, OriginalModel,
    SearchCase,
};
use asttrans_core::search::RankedList;
use proptest::prelude::*;

fn case(q: usize, rank: usize, pool: usize) -> SearchCase {
    let mut order: Vec<String> = (0..pool).map(|i| format!("d{i:04}")).collect();
    order[rank - 1] = "gold".into();
    let id = format!("q{q}");
    SearchCase::new(&id, "gold", RankedList::from_order(&id, order)).unwrap()
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// Every n-gram occurrence of `seq` as a list, in position order.
fn grams(seq: &[String], n: usize) -> Vec<Vec<String>> {
    if seq.len() < n {
        return Vec::new();
    }
    (0..=seq.len() - n).map(|i| seq[i..i + n].to_vec()).collect()
}

fn count_in(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

/// Exhaustive list-scanning CrystalBLEU-4.
fn oracle_bleu(h: &[Vec<String>], r: &[Vec<String>], top: usize) -> f64 {
    let mut all_ref: Vec<Vec<String>> = Vec::new();
    for seg in r {
        for n in 1..=4 {
            all_ref.extend(grams(seg, n));
        }
    }
    let mut distinct: Vec<Vec<String>> = Vec::new();
    for g in &all_ref {
        if !distinct.contains(g) {
            distinct.push(g.clone());
        }
    }
    distinct.sort_by(|a, b| count_in(&all_ref, b).cmp(&count_in(&all_ref, a)).then(a.cmp(b)));
    let shared: Vec<Vec<String>> = distinct.into_iter().take(top).collect();

    let mut log_p = 0.0;
    for n in 1..=4 {
        let (mut hit, mut total, mut ref_total) = (0usize, 0usize, 0usize);
        for (hs, rs) in h.iter().zip(r) {
            let hg: Vec<_> = grams(hs, n).into_iter().filter(|g| !shared.contains(g)).collect();
            let rg: Vec<_> = grams(rs, n).into_iter().filter(|g| !shared.contains(g)).collect();
            total += hg.len();
            ref_total += rg.len();
            let mut seen: Vec<Vec<String>> = Vec::new();
            for g in &hg {
                if !seen.contains(g) {
                    hit += count_in(&hg, g).min(count_in(&rg, g));
                    seen.push(g.clone());
                }
            }
        }
        let p = if total == 0 {
            if ref_total == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            hit as f64 / total as f64
        };
        if p == 0.0 {
            return 0.0;
        }
        log_p += p.ln() / 4.0;
    }
    let c: usize = h.iter().map(|s| s.len()).sum();
    let rl: usize = r.iter().map(|s| s.len()).sum();
    let bp = if c > rl {
        1.0
    } else {
        (1.0 - rl as f64 / c as f64).exp()
    };
    bp * log_p.exp()
}

#[test]
fn five_pair_corpus_against_oracle() {
    let refs: Vec<_> = [
        "method#L block#R if#R block#L return#R",
        "method#L block#R block#L for#R return#R",
        "if#L cond#R block#R block#L call#R",
        "method#L block#R block#L try#R catch#R",
        "block#L return#R call#L args#R",
    ]
    .iter()
    .map(|s| toks(s))
    .collect();
    let hyps: Vec<_> = [
        "method#L block#R if#R block#L call#R",
        "method#L block#R block#L return#R",
        "if#L cond#R block#R block#L call#R args#R",
        "method#L block#R try#R catch#R",
        "block#L return#R call#L",
    ]
    .iter()
    .map(|s| toks(s))
    .collect();
    for top in [0, 2] {
        let got = crystal_bleu_4(&hyps, &refs, top).unwrap();
        let want = oracle_bleu(&hyps, &refs, top);
        assert!(
            (got - want).abs() <= 1e-9 * want.max(1e-300),
            "top {top}: {got} vs {want}"
        );
        assert!(got > 0.0);
    }
}

#[test]
fn identical_segments_score_one() {
    let h = vec![toks("a b c d"), toks("a b c d e f")];
    for top in [0, 1, 5, 500] {
        assert!((crystal_bleu_4(&h, &h, top).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn average_of_four_configurations() {
    let mut effects = BTreeMap::new();
    for (o, d, e) in [
        (OriginalModel::Gcb, OriginalDim::D20, 4.47),
        (OriginalModel::Gcb, OriginalDim::D768, 4.33),
        (OriginalModel::UniXcoder, OriginalDim::D20, 1.93),
        (OriginalModel::UniXcoder, OriginalDim::D768, 1.59),
    ] {
        effects.insert((o, d), e);
    }
    let avg = average_effect_mrr(&effects).unwrap();
    assert!((avg - 3.08).abs() < 1e-9);
}

fn cfg() -> EvaluationConfig {
    EvaluationConfig {
        original_model: OriginalModel::UniXcoder,
        original_dim: OriginalDim::D20,
        augmented_model: "asttrans".into(),
    }
}

proptest! {
    #[test]
    fn retrieval_metric_properties(ranks in proptest::collection::vec(1usize..30, 1..40)) {
        let cases: Vec<_> = ranks.iter().enumerate().map(|(i, &r)| case(i, r, 30)).collect();
        let m = mrr(&cases).unwrap();
        prop_assert!(m > 0.0 && m <= 1.0);
        let want = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64;
        prop_assert!((m - want).abs() <= 1e-12);
        prop_assert!(top_k_accuracy(&cases, 1).unwrap() <= m);
        let mut prev = 0.0;
        for k in 1..=31 {
            let acc = top_k_accuracy(&cases, k).unwrap();
            prop_assert!(acc >= prev);
            prev = acc;
        }
        prop_assert_eq!(prev, 1.0);
    }

    #[test]
    fn effect_is_antisymmetric(a in proptest::collection::vec(1usize..10, 5), b in proptest::collection::vec(1usize..10, 5)) {
        let org: Vec<_> = a.iter().enumerate().map(|(i, &r)| case(i, r, 10)).collect();
        let com: Vec<_> = b.iter().enumerate().map(|(i, &r)| case(i, r, 10)).collect();
        let fwd = effect_mrr(&org, &com, &cfg()).unwrap();
        let back = effect_mrr(&com, &org, &cfg()).unwrap();
        prop_assert_eq!(fwd, -back);
        prop_assert_eq!(effect_mrr(&org, &org, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn bleu_in_unit_interval(
        h in proptest::collection::vec(proptest::collection::vec(0u8..5, 1..8), 1..5),
        top in 0usize..6,
    ) {
        let hyps: Vec<Vec<String>> = h.iter().map(|s| s.iter().map(|t| format!("t{t}")).collect()).collect();
        let refs: Vec<Vec<String>> = hyps.iter().rev().cloned().collect();
        let s = crystal_bleu_4(&hyps, &refs, top).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        let o = oracle_bleu(&hyps, &refs, top);
        prop_assert!((s - o).abs() <= 1e-9 * o.max(1e-300));
    }
}
