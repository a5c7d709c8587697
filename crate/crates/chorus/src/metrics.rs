//! Automatic evaluation: ROUGE-L, CIDEr (with an optional CIDEr-D
//! variant), Distinct-n over the whole output pool, M-Distinct-n within
//! per-article groups, cluster purity, and per-topic top-word reports.
//!
//! All text metrics work on whitespace tokens the caller has already
//! normalized; every function here is pure.

use crate::corpus::{Dataset, N_SPECIALS};
use crate::error::{Error, Result};
use crate::infer;
use crate::model::Model;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};

/// Splits on whitespace; lowercases when asked (scripts without case pass
/// through unchanged either way).
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            if lowercase {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect()
}

/// The Table-2-style scalar summary.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub rouge_l: f64,
    pub cider: f64,
    pub distinct_3: f64,
    pub distinct_4: f64,
    pub m_distinct_3: Option<f64>,
    pub m_distinct_4: Option<f64>,
}

impl MetricsReport {
    /// One header line and one value line, columns in report order.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "rouge_l,cider,distinct_3,distinct_4,m_distinct_3,m_distinct_4\n{:.6},{:.6},{:.6},{:.6},{},{}\n",
            self.rouge_l,
            self.cider,
            self.distinct_3,
            self.distinct_4,
            fmt(self.m_distinct_3),
            fmt(self.m_distinct_4),
        )
    }
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn rouge_l_f1(hyp: &[String], reference: &[String]) -> f64 {
    let l = lcs_len(hyp, reference) as f64;
    if hyp.is_empty() || reference.is_empty() || l == 0.0 {
        return 0.0;
    }
    let p = l / hyp.len() as f64;
    let r = l / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Corpus ROUGE-L: per article the best F1 over its references, averaged
/// over articles. An empty hypothesis scores 0 for its article.
pub fn rouge_l(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<f64> {
    check_parallel(hyps, refs)?;
    let mut sum = 0.0;
    for (h, rs) in hyps.iter().zip(refs) {
        sum += rs
            .iter()
            .map(|r| rouge_l_f1(h, r))
            .fold(0.0f64, f64::max);
    }
    Ok(sum / hyps.len() as f64)
}

fn check_parallel(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::Metric(format!(
            "{} hypotheses vs {} reference sets",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::Metric("no articles to evaluate".into()));
    }
    if let Some(i) = refs.iter().position(|r| r.is_empty()) {
        return Err(Error::Metric(format!("article {i} has no references")));
    }
    Ok(())
}

type Ngram = Vec<String>;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<Ngram, f64> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    m
}

fn tfidf(counts: &HashMap<Ngram, f64>, idf: &HashMap<Ngram, f64>, n_articles: f64) -> HashMap<Ngram, f64> {
    counts
        .iter()
        .map(|(g, &c)| {
            // n-grams never seen in any reference get the maximal idf.
            let w = idf.get(g).copied().unwrap_or_else(|| n_articles.ln());
            (g.clone(), c * w)
        })
        .collect()
}

fn norm(v: &HashMap<Ngram, f64>) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &HashMap<Ngram, f64>, b: &HashMap<Ngram, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(g, &x)| large.get(g).map(|&y| x * y))
        .sum()
}

const CIDER_MAX_N: usize = 4;
const CIDER_D_SIGMA: f64 = 6.0;

/// Corpus CIDEr, scaled into [0, 10]. Document frequencies come from the
/// reference sets; at least two articles are required for the idf to be
/// defined. With `cider_d` the per-reference form with clipped counts and
/// the Gaussian length penalty is used instead of the cosine against the
/// mean reference vector.
pub fn cider(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>], cider_d: bool) -> Result<f64> {
    check_parallel(hyps, refs)?;
    let n_articles = hyps.len();
    if n_articles < 2 {
        return Err(Error::Metric(
            "CIDEr needs at least 2 articles for a defined idf".into(),
        ));
    }

    let mut total = 0.0;
    for n in 1..=CIDER_MAX_N {
        // df over articles: an n-gram counts once per article whose
        // reference set contains it.
        let mut df: HashMap<Ngram, f64> = HashMap::new();
        for rs in refs {
            let mut seen: HashSet<Ngram> = HashSet::new();
            for r in rs {
                seen.extend(ngram_counts(r, n).into_keys());
            }
            for gram in seen {
                *df.entry(gram).or_insert(0.0) += 1.0;
            }
        }
        let idf: HashMap<Ngram, f64> = df
            .into_iter()
            .map(|(gram, d)| (gram, (n_articles as f64 / d.max(1.0)).ln()))
            .collect();

        let mut level = 0.0;
        for (h, rs) in hyps.iter().zip(refs) {
            let hv = tfidf(&ngram_counts(h, n), &idf, n_articles as f64);
            let hn = norm(&hv);
            if cider_d {
                let mut per_ref = 0.0;
                for r in rs {
                    let rv = tfidf(&ngram_counts(r, n), &idf, n_articles as f64);
                    let rn = norm(&rv);
                    if hn == 0.0 || rn == 0.0 {
                        continue;
                    }
                    // Clip the hypothesis weight at the reference weight.
                    let num: f64 = rv
                        .iter()
                        .filter_map(|(g, &rw)| hv.get(g).map(|&hw| hw.min(rw) * rw))
                        .sum();
                    let dl = h.len() as f64 - r.len() as f64;
                    let penalty = (-dl * dl / (2.0 * CIDER_D_SIGMA * CIDER_D_SIGMA)).exp();
                    per_ref += penalty * num / (hn * rn);
                }
                level += per_ref / rs.len() as f64;
            } else {
                let mut mean_rv: HashMap<Ngram, f64> = HashMap::new();
                for r in rs {
                    for (gram, w) in tfidf(&ngram_counts(r, n), &idf, n_articles as f64) {
                        *mean_rv.entry(gram).or_insert(0.0) += w / rs.len() as f64;
                    }
                }
                let rn = norm(&mean_rv);
                if hn > 0.0 && rn > 0.0 {
                    level += dot(&hv, &mean_rv) / (hn * rn);
                }
            }
        }
        total += level / n_articles as f64;
    }
    Ok(10.0 * total / CIDER_MAX_N as f64)
}

/// Fraction of distinct n-grams over the pooled n-grams of every comment.
/// 0 when no comment reaches length `n`.
pub fn distinct_n(comments: &[Vec<String>], n: usize) -> f64 {
    assert!(n >= 1, "n must be >= 1");
    let mut seen: HashSet<Ngram> = HashSet::new();
    let mut count = 0usize;
    for c in comments {
        if c.len() >= n {
            for w in c.windows(n) {
                seen.insert(w.to_vec());
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        seen.len() as f64 / count as f64
    }
}

/// `distinct_n` within each article's generated group, averaged over
/// articles. The protocol expects 5 comments per group; other sizes are
/// scored anyway but logged.
pub fn m_distinct_n(groups: &[Vec<Vec<String>>], n: usize) -> f64 {
    if groups.is_empty() {
        return 0.0;
    }
    for (i, grp) in groups.iter().enumerate() {
        if grp.len() != 5 {
            log::warn!(
                "m_distinct group {i} has {} comments; the protocol uses 5",
                grp.len()
            );
        }
    }
    groups.iter().map(|grp| distinct_n(grp, n)).sum::<f64>() / groups.len() as f64
}

/// Fraction of comments whose cluster matches the majority gold label of
/// that cluster.
pub fn purity(assignments: &[usize], gold: &[usize]) -> f64 {
    assert_eq!(assignments.len(), gold.len());
    if assignments.is_empty() {
        return 0.0;
    }
    let mut tally: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&a, &g) in assignments.iter().zip(gold) {
        *tally.entry(a).or_default().entry(g).or_default() += 1;
    }
    let hits: usize = tally
        .values()
        .map(|per_gold| per_gold.values().copied().max().unwrap_or(0))
        .sum();
    hits as f64 / assignments.len() as f64
}

/// Cluster assignment for every comment in dataset order, flattened
/// (article-major). `None` for models without the clustering module.
pub fn assign_topics(model: &Model, dataset: &Dataset) -> Option<Vec<usize>> {
    model.topic.as_ref()?;
    let mut out = Vec::with_capacity(dataset.n_pairs());
    for article in &dataset.articles {
        for comment in &article.comments {
            out.push(infer::comment_topic(model, comment).expect("topic module present"));
        }
    }
    Some(out)
}

/// The `m` most frequent non-stop words among the comments assigned to
/// `topic`; count ties resolve lexicographically. Empty when no comment
/// lands in the topic.
pub fn topic_top_words(
    model: &Model,
    dataset: &Dataset,
    topic: usize,
    m: usize,
    stop_words: &HashSet<String>,
) -> Vec<String> {
    let Some(assignments) = assign_topics(model, dataset) else {
        return Vec::new();
    };
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut idx = 0usize;
    for article in &dataset.articles {
        for comment in &article.comments {
            if assignments[idx] == topic {
                for &id in comment {
                    if id >= N_SPECIALS {
                        let tok = model.vocab.token(id);
                        if !stop_words.contains(tok) {
                            *counts.entry(tok.to_string()).or_default() += 1;
                        }
                    }
                }
            }
            idx += 1;
        }
    }
    rank_words(counts, m)
}

/// Orders by count descending, breaking count ties lexicographically.
fn rank_words(counts: BTreeMap<String, usize>, m: usize) -> Vec<String> {
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(m).map(|(w, _)| w).collect()
}

/// Convenience wrapper producing the full report. `groups` supplies the
/// per-article diverse generations for M-Distinct; when absent those
/// columns stay empty.
pub fn evaluate(
    hyps: &[Vec<String>],
    refs: &[Vec<Vec<String>>],
    groups: Option<&[Vec<Vec<String>>]>,
    cider_d: bool,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        rouge_l: rouge_l(hyps, refs)?,
        cider: cider(hyps, refs, cider_d)?,
        distinct_3: distinct_n(hyps, 3),
        distinct_4: distinct_n(hyps, 4),
        m_distinct_3: groups.map(|g| m_distinct_n(g, 3)),
        m_distinct_4: groups.map(|g| m_distinct_n(g, 4)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenize_lowercases_on_request() {
        assert_eq!(tokenize("The Cat  SAT", true), toks("the cat sat"));
        assert_eq!(tokenize("The Cat SAT", false), toks("The Cat SAT"));
        assert_eq!(tokenize("  ", true), Vec::<String>::new());
    }

    #[test]
    fn lcs_hand_cases() {
        assert_eq!(lcs_len(&toks("a b c d"), &toks("a c d")), 3);
        assert_eq!(lcs_len(&toks("a b"), &toks("c d")), 0);
        assert_eq!(lcs_len(&toks("x y z"), &toks("x y z")), 3);
        assert_eq!(lcs_len(&[], &toks("a")), 0);
    }

    #[test]
    fn rouge_identity_and_hand_value() {
        let one = rouge_l(&[toks("x y z")], &[vec![toks("x y z")]]).unwrap();
        assert_abs_diff_eq!(one, 1.0, epsilon = 1e-12);
        // LCS 3 of hyp 3 / ref 4: P=1, R=0.75, F1 = 6/7.
        let f = rouge_l(&[toks("a c d")], &[vec![toks("a b c d")]]).unwrap();
        assert_abs_diff_eq!(f, 6.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f, 0.8571, epsilon = 5e-5);
        let zero = rouge_l(&[toks("p q")], &[vec![toks("r s")]]).unwrap();
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rouge_takes_best_reference_and_averages_articles() {
        let hyps = vec![toks("a c d"), toks("m n")];
        let refs = vec![
            vec![toks("z z z"), toks("a b c d")], // best is the second
            vec![toks("m n")],
        ];
        let got = rouge_l(&hyps, &refs).unwrap();
        assert_abs_diff_eq!(got, (6.0 / 7.0 + 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rouge_empty_hypothesis_scores_zero_not_error() {
        let got =
            rouge_l(&[vec![], toks("a")], &[vec![toks("a b")], vec![toks("a")]]).unwrap();
        assert_abs_diff_eq!(got, (0.0 + 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn word_ranking_is_count_then_lexicographic() {
        let counts: BTreeMap<String, usize> = [
            ("zebra".to_string(), 3),
            ("apple".to_string(), 3),
            ("mango".to_string(), 5),
            ("kiwi".to_string(), 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(
            rank_words(counts.clone(), 10),
            vec!["mango", "apple", "zebra", "kiwi"]
        );
        assert_eq!(rank_words(counts, 2), vec!["mango", "apple"]);
        assert!(rank_words(BTreeMap::new(), 5).is_empty());
    }

    #[test]
    fn rouge_rejects_missing_references_and_empty_corpus() {
        assert!(rouge_l(&[toks("a")], &[vec![]]).is_err());
        assert!(rouge_l(&[], &[]).is_err());
        assert!(rouge_l(&[toks("a")], &[vec![toks("a")], vec![toks("b")]]).is_err());
    }

    #[test]
    fn cider_identity_on_disjoint_two_article_corpus() {
        // Each hypothesis equals its sole reference; every n-gram is
        // unique to its article, so idf = ln 2 > 0 for all of them and the
        // per-n cosine is exactly 1 for n = 1..=4.
        let hyps = vec![toks("a b c d e"), toks("v w x y z")];
        let refs = vec![vec![toks("a b c d e")], vec![toks("v w x y z")]];
        let got = cider(&hyps, &refs, false).unwrap();
        assert_abs_diff_eq!(got, 10.0, epsilon = 1e-9);
        let got_d = cider(&hyps, &refs, true).unwrap();
        assert_abs_diff_eq!(got_d, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn cider_zero_without_overlap() {
        let hyps = vec![toks("p q r s"), toks("p q r s")];
        let refs = vec![vec![toks("a b c d e")], vec![toks("v w x y z")]];
        assert_abs_diff_eq!(cider(&hyps, &refs, false).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cider(&hyps, &refs, true).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cider_single_token_identity_uses_quarter_weight() {
        // Only unigrams exist, so three of the four n-gram levels
        // contribute 0 and the perfect cosine is averaged down to 1/4.
        let hyps = vec![toks("a"), toks("b")];
        let refs = vec![vec![toks("a")], vec![toks("b")]];
        assert_abs_diff_eq!(cider(&hyps, &refs, false).unwrap(), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cider(&hyps, &refs, true).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn cider_d_applies_length_penalty_and_clipping() {
        // Article 0: hyp "a c" vs ref "a"; "c" appears in no reference so
        // idf("c") = ln 2 = idf("a"). Unigram level only:
        //   cosine form: dot = ln2 * ln2, |h| = ln2 * sqrt(2), |r| = ln2
        //     -> cos = 1/sqrt(2).
        //   -D form: clipped numerator = ln2^2, same norms, times the
        //     Gaussian penalty exp(-1/72).
        // Article 1 is an exact single-token match: level score 1 both ways.
        let hyps = vec![toks("a c"), toks("b")];
        let refs = vec![vec![toks("a")], vec![toks("b")]];
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        let plain = cider(&hyps, &refs, false).unwrap();
        assert_abs_diff_eq!(
            plain,
            10.0 / 4.0 * (inv_sqrt2 + 1.0) / 2.0,
            epsilon = 1e-12
        );
        let with_penalty = cider(&hyps, &refs, true).unwrap();
        let penalized = (-1.0f64 / 72.0).exp() * inv_sqrt2;
        assert_abs_diff_eq!(
            with_penalty,
            10.0 / 4.0 * (penalized + 1.0) / 2.0,
            epsilon = 1e-12
        );
        assert!(with_penalty < plain);
    }

    #[test]
    fn cider_requires_two_articles_and_ignores_reference_order() {
        assert!(cider(&[toks("a")], &[vec![toks("a")]], false).is_err());
        let hyps = vec![toks("a b"), toks("x y")];
        let fwd = vec![
            vec![toks("a b"), toks("a q")],
            vec![toks("x y")],
        ];
        let rev = vec![
            vec![toks("a q"), toks("a b")],
            vec![toks("x y")],
        ];
        assert_abs_diff_eq!(
            cider(&hyps, &fwd, false).unwrap(),
            cider(&hyps, &rev, false).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn distinct_hand_cases() {
        assert_abs_diff_eq!(distinct_n(&[toks("a b a b")], 2), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            distinct_n(&[toks("a b c"), toks("a b d")], 2),
            0.75,
            epsilon = 1e-12
        );
        // Identical single tokens: one unique of N.
        assert_abs_diff_eq!(
            distinct_n(&[toks("x"), toks("x"), toks("x")], 1),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        // No n-grams at all.
        assert_abs_diff_eq!(distinct_n(&[toks("a")], 2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(distinct_n(&[], 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn m_distinct_hand_cases() {
        let five_same = vec![vec![toks("a b c"); 5]];
        // Within the group: 2 unique bigrams of 10.
        assert_abs_diff_eq!(m_distinct_n(&five_same, 2), 0.2, epsilon = 1e-12);
        let disjoint = vec![vec![
            toks("a b"),
            toks("c d"),
            toks("e f"),
            toks("g h"),
            toks("i j"),
        ]];
        assert_abs_diff_eq!(m_distinct_n(&disjoint, 2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn m_distinct_on_one_article_equals_distinct() {
        let group = vec![toks("a b c"), toks("a b d"), toks("e f"), toks("g h"), toks("i j")];
        assert_abs_diff_eq!(
            m_distinct_n(&[group.clone()], 2),
            distinct_n(&group, 2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn purity_hand_case() {
        // Cluster 0 holds golds {0,0,1}: majority 2. Cluster 1 holds
        // {1,1}: majority 2. Purity = 4/5.
        let assign = [0, 0, 0, 1, 1];
        let gold = [0, 0, 1, 1, 1];
        assert_abs_diff_eq!(purity(&assign, &gold), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(purity(&[0, 1], &[1, 0]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_fills_report_and_csv() {
        let hyps = vec![toks("a b c d e"), toks("v w x y z")];
        let refs = vec![vec![toks("a b c d e")], vec![toks("v w x y z")]];
        let groups = vec![vec![toks("a b c"); 5], vec![toks("v w x"); 5]];
        let rep = evaluate(&hyps, &refs, Some(&groups), false).unwrap();
        assert_abs_diff_eq!(rep.rouge_l, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.cider, 10.0, epsilon = 1e-9);
        assert!(rep.m_distinct_3.is_some());
        let csv = rep.to_csv();
        assert!(csv.starts_with("rouge_l,cider,"));
        assert_eq!(csv.lines().count(), 2);
        let rep2 = evaluate(&hyps, &refs, None, false).unwrap();
        assert!(rep2.m_distinct_3.is_none());
        let json = serde_json::to_value(&rep2).unwrap();
        assert!(json["m_distinct_3"].is_null());
    }

    proptest! {
        #[test]
        fn distinct_is_order_invariant(rot in 0usize..5) {
            let forward = vec![
                toks("a b c"),
                toks("a b d"),
                toks("q r"),
                toks("a"),
                toks("b c a b"),
            ];
            let mut shuffled = forward.clone();
            shuffled.rotate_left(rot);
            prop_assert!((distinct_n(&forward, 2) - distinct_n(&shuffled, 2)).abs() < 1e-12);
        }

        #[test]
        fn rouge_self_is_one(words in proptest::collection::vec("[a-d]{1,3}", 1..8)) {
            let h: Vec<String> = words;
            let got = rouge_l(&[h.clone()], &[vec![h]]).unwrap();
            prop_assert!((got - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rouge_swap_symmetric_same_length(
            a in proptest::collection::vec("[a-c]{1}", 4),
            b in proptest::collection::vec("[a-c]{1}", 4),
        ) {
            let ab = rouge_l(&[a.clone()], &[vec![b.clone()]]).unwrap();
            let ba = rouge_l(&[b], &[vec![a]]).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn distinct_stays_in_unit_interval(
            n in 1usize..4,
            texts in proptest::collection::vec(
                proptest::collection::vec("[a-c]{1}", 0..6), 1..6),
        ) {
            let d = distinct_n(&texts, n);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }

    mod model_coupled {
        use super::*;
        use crate::config::Config;
        use crate::corpus::{build_vocab, encode_article, generate_synthetic, SyntheticSpec};

        fn tiny_setup() -> (Model, Dataset) {
            let spec = SyntheticSpec::disjoint(2, 5, 6, 2, 77);
            let raw = generate_synthetic(&spec).unwrap();
            let docs: Vec<String> = raw
                .iter()
                .flat_map(|a| {
                    std::iter::once(a.title.clone())
                        .chain(std::iter::once(a.body.clone()))
                        .chain(a.comments.iter().cloned())
                })
                .collect();
            let vocab = build_vocab(docs.iter().map(|s| s.as_str()), 1000).unwrap();
            let cfg = Config {
                embed_dim: 4,
                enc_hidden: 3,
                enc_layers: 1,
                dec_hidden: 4,
                dec_layers: 1,
                latent_dim: 4,
                n_topics: 2,
                vgc_hidden: 5,
                classifier_hidden: 4,
                gate_hidden: 4,
                selector_hidden: 4,
                n_diverse: 2,
                seed: 5,
                ..Config::default()
            };
            let ds = Dataset {
                articles: raw.iter().map(|r| encode_article(r, &vocab, &cfg)).collect(),
            };
            (Model::new(cfg, vocab), ds)
        }

        #[test]
        fn assignments_cover_every_comment() {
            let (model, ds) = tiny_setup();
            let assign = assign_topics(&model, &ds).unwrap();
            assert_eq!(assign.len(), ds.n_pairs());
            assert!(assign.iter().all(|&t| t < model.cfg.n_topics));
        }

        #[test]
        fn top_words_filter_stop_words_and_break_ties_lexicographically() {
            let (model, ds) = tiny_setup();
            let no_stop = HashSet::new();
            // Union over all topics must reproduce corpus tokens.
            let mut seen: Vec<String> = (0..model.cfg.n_topics)
                .flat_map(|t| topic_top_words(&model, &ds, t, 50, &no_stop))
                .collect();
            seen.sort();
            seen.dedup();
            assert!(!seen.is_empty());

            // Stop-listing one observed word removes it everywhere.
            let banned: HashSet<String> = [seen[0].clone()].into_iter().collect();
            for t in 0..model.cfg.n_topics {
                let words = topic_top_words(&model, &ds, t, 50, &banned);
                assert!(!words.contains(&seen[0]));
            }

            // The m cap truncates.
            let flat = assign_topics(&model, &ds).unwrap();
            let majority = flat[0];
            let words = topic_top_words(&model, &ds, majority, 2, &no_stop);
            assert!(words.len() <= 2);
        }

        #[test]
        fn top_words_empty_for_unused_topic_and_no_topic_model() {
            let (model, ds) = tiny_setup();
            let no_stop = HashSet::new();
            let assign = assign_topics(&model, &ds).unwrap();
            // If some topic is unused, its list must be empty.
            for t in 0..model.cfg.n_topics {
                if !assign.contains(&t) {
                    assert!(topic_top_words(&model, &ds, t, 10, &no_stop).is_empty());
                }
            }
            let (mut cfg, vocab) = (model.cfg.clone(), model.vocab.clone());
            cfg.use_topic = false;
            let plain = Model::new(cfg, vocab);
            assert!(assign_topics(&plain, &ds).is_none());
            assert!(topic_top_words(&plain, &ds, 0, 10, &no_stop).is_empty());
        }
    }
}
