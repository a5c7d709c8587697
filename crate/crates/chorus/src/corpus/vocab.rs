//! Token vocabulary with reserved control ids.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;

/// Number of reserved control ids; regular tokens start here.
pub const N_SPECIALS: usize = 4;

const SPECIAL_TOKENS: [&str; N_SPECIALS] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Frequency-ranked token table. Non-special tokens occupy ids `4..size()`
/// in descending frequency order, ties broken by lexicographic order, so a
/// vocabulary is a pure function of the corpus token multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    /// Corpus frequency per non-special token, indexed as `id - N_SPECIALS`.
    freq: Vec<u64>,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    /// Id for a token, or [`UNK`] if absent.
    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn freq_of_id(&self, id: usize) -> u64 {
        if id < N_SPECIALS {
            0
        } else {
            self.freq[id - N_SPECIALS]
        }
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Decodes, skipping control ids.
    pub fn decode_clean(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&i| i >= N_SPECIALS)
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Writes the rank-ordered two-column `token\tcount` table.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for id in N_SPECIALS..self.size() {
            writeln!(f, "{}\t{}", self.id_to_token[id], self.freq[id - N_SPECIALS])?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut tokens = Vec::new();
        for (i, line) in f.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line.split_once('\t').ok_or_else(|| {
                Error::Ingestion(format!(
                    "{}:{}: expected token<TAB>count",
                    path.display(),
                    i + 1
                ))
            })?;
            let count: u64 = count.parse().map_err(|_| {
                Error::Ingestion(format!(
                    "{}:{}: bad count `{count}`",
                    path.display(),
                    i + 1
                ))
            })?;
            tokens.push((tok.to_string(), count));
        }
        Ok(Self::from_ranked(tokens))
    }

    /// Builds from an already rank-ordered `(token, count)` list.
    pub fn from_ranked(ranked: Vec<(String, u64)>) -> Self {
        let mut id_to_token: Vec<String> =
            SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut freq = Vec::with_capacity(ranked.len());
        for (tok, count) in ranked {
            id_to_token.push(tok);
            freq.push(count);
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            token_to_id,
            id_to_token,
            freq,
        }
    }

    /// Rank-ordered `(token, count)` pairs for non-special tokens.
    pub fn ranked(&self) -> impl Iterator<Item = (&str, u64)> {
        self.id_to_token[N_SPECIALS..]
            .iter()
            .map(|s| s.as_str())
            .zip(self.freq.iter().copied())
    }
}

/// Builds a vocabulary from whitespace-tokenized documents, keeping the
/// `cap` most frequent tokens (ties: lexicographically smaller first).
pub fn build_vocab<'a, I>(documents: I, cap: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut any = false;
    for doc in documents {
        any = true;
        for tok in doc.split_whitespace() {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    if !any {
        return Err(Error::Ingestion("empty corpus".into()));
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(cap);
    Ok(Vocabulary::from_ranked(
        ranked.into_iter().map(|(t, c)| (t.to_string(), c)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_and_ids() {
        let v = build_vocab(["a a b"], 30_000).unwrap();
        assert_eq!(v.size(), 2 + N_SPECIALS);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.freq_of_id(4), 2);
        assert_eq!(v.freq_of_id(5), 1);
    }

    #[test]
    fn cap_keeps_most_frequent() {
        let v = build_vocab(["b a a"], 1).unwrap();
        assert_eq!(v.size(), 1 + N_SPECIALS);
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert_eq!(v.id("b"), UNK);
    }

    #[test]
    fn ties_break_lexicographically_regardless_of_input_order() {
        let a = build_vocab(["x y x y z x y z z"], 10).unwrap();
        let b = build_vocab(["z y x z y x z y x"], 10).unwrap();
        assert_eq!(a, b);
        // x, y, z all have count 3 -> lexicographic assignment.
        assert_eq!(a.id("x"), 4);
        assert_eq!(a.id("y"), 5);
        assert_eq!(a.id("z"), 6);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(build_vocab(std::iter::empty::<&str>(), 10).is_err());
    }

    #[test]
    fn oov_maps_to_unk() {
        let v = build_vocab(["hello world"], 10).unwrap();
        assert_eq!(v.id("absent"), UNK);
        assert_eq!(v.encode("hello absent"), vec![v.id("hello"), UNK]);
    }

    #[test]
    fn save_load_round_trip() {
        let v = build_vocab(["c c c b b a"], 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded, v);
    }

    #[test]
    fn decode_clean_drops_control_ids() {
        let v = build_vocab(["a b"], 10).unwrap();
        let ids = vec![BOS, v.id("a"), v.id("b"), EOS, PAD];
        assert_eq!(v.decode_clean(&ids), "a b");
    }
}
