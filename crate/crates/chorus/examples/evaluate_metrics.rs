//! The evaluation metrics on hand-picked inputs: ROUGE-L, CIDEr,
//! Distinct-n over a pooled set, and M-Distinct-n over per-article groups.
//!
//! Run with: cargo run --example evaluate_metrics

use chorus::metrics::{cider, distinct_n, m_distinct_n, rouge_l, tokenize};

fn toks(s: &str) -> Vec<String> {
    tokenize(s, true)
}

fn main() -> chorus::Result<()> {
    // One shared word dropped, everything else aligned.
    let hyps = vec![toks("the match ended in a quiet draw"), toks("fans left early")];
    let refs = vec![
        vec![
            toks("the match ended in a tense draw"),
            toks("a dull scoreless game"),
        ],
        vec![toks("fans left very early")],
    ];
    println!("rouge_l   = {:.4}  (best reference per article)", rouge_l(&hyps, &refs)?);
    println!("cider     = {:.4}", cider(&hyps, &refs, false)?);
    println!("cider-d   = {:.4}  (count-clipped, length penalty)", cider(&hyps, &refs, true)?);

    // Distinct-n is unique n-grams over total n-grams, pooled. Repeating
    // one comment k times drives it to 1/k.
    let varied = vec![toks("a b c d"), toks("e f g h"), toks("i j k l")];
    let repeats = vec![toks("a b c d"); 4];
    println!("distinct_3 varied  = {:.4}", distinct_n(&varied, 3));
    println!("distinct_3 repeats = {:.4}  (= 1/4)", distinct_n(&repeats, 3));

    // M-Distinct groups by article first: within-group diversity, then the
    // mean over articles. Article 1 repeats itself, article 2 does not.
    let groups = vec![
        vec![toks("x y z w"), toks("x y z w")],
        vec![toks("a b c d"), toks("e f g h")],
    ];
    println!("m_distinct_4       = {:.4}  (mean of 1/2 and 1)", m_distinct_n(&groups, 4));
    Ok(())
}
