use std::collections::{HashMap, HashSet};

use super::MetricsError;

pub const DEFAULT_TRIVIALLY_SHARED: usize = 500;

pub type Ngram = Vec<String>;

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Ngram, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(|t| t.as_ref().to_string()).collect())
                .or_insert(0) += 1;
        }
    }
    counts
}

/// The `top_n` most frequent 1- to 4-grams of `references`, ranked over all
/// orders together; ties go to the lexicographically smaller n-gram.
pub fn trivially_shared_ngrams<S: AsRef<str>>(references: &[Vec<S>], top_n: usize) -> HashSet<Ngram> {
    if top_n == 0 {
        return HashSet::new();
    }
    let mut totals: HashMap<Ngram, usize> = HashMap::new();
    for r in references {
        for n in 1..=4 {
            for (g, c) in ngram_counts(r, n) {
                *totals.entry(g).or_insert(0) += c;
            }
        }
    }
    let mut ranked: Vec<(Ngram, usize)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(top_n).map(|(g, _)| g).collect()
}

/// Corpus-level cumulative BLEU-4 after dropping the `trivially_shared` most
/// frequent reference n-grams from both sides. No smoothing: any order with
/// zero clipped matches gives 0. An order with no countable n-grams on either
/// side (everything filtered, or segments too short) counts as precision 1.
pub fn crystal_bleu_4<S: AsRef<str>>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    trivially_shared: usize,
) -> Result<f64, MetricsError> {
    if hypotheses.len() != references.len() || hypotheses.is_empty() {
        return Err(MetricsError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let shared = trivially_shared_ngrams(references, trivially_shared);
    let mut matches = [0usize; 4];
    let mut hyp_totals = [0usize; 4];
    let mut ref_totals = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=4 {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            for (g, c) in &hc {
                if shared.contains(g) {
                    continue;
                }
                hyp_totals[n - 1] += c;
                matches[n - 1] += (*c).min(rc.get(g).copied().unwrap_or(0));
            }
            ref_totals[n - 1] += rc
                .iter()
                .filter(|(g, _)| !shared.contains(*g))
                .map(|(_, c)| c)
                .sum::<usize>();
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = match (hyp_totals[n], ref_totals[n]) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            (t, _) => matches[n] as f64 / t as f64,
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok((bp * (log_sum / 4.0).exp()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn perfect_match_is_one() {
        let h = vec![toks("a b c d e"), toks("f g h i")];
        assert!((crystal_bleu_4(&h, &h, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((crystal_bleu_4(&h, &h, 500).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        let h = vec![toks("a b c d")];
        let r = vec![toks("w x y z")];
        assert_eq!(crystal_bleu_4(&h, &r, 0).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        let h = vec![toks("a")];
        assert_eq!(
            crystal_bleu_4(&h, &[], 0),
            Err(MetricsError::LengthMismatch {
                hypotheses: 1,
                references: 0
            })
        );
    }

    #[test]
    fn shared_ranking_breaks_ties_lexicographically() {
        let refs = vec![toks("b a"), toks("a b")];
        let top = trivially_shared_ngrams(&refs, 2);
        // a and b occur twice each; "a b" and "b a" once.
        assert_eq!(top, [toks("a"), toks("b")].into_iter().collect());
        let top1 = trivially_shared_ngrams(&refs, 3);
        assert!(top1.contains(&toks("a b")));
    }

    #[test]
    fn brevity_penalty_applies() {
        let h = vec![toks("a b c d")];
        let r = vec![toks("a b c d e f g h")];
        let s = crystal_bleu_4(&h, &r, 0).unwrap();
        assert!((s - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }
}
