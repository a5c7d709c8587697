//! JSONL article records, id-encoded views, and comment bag-of-words.

use super::vocab::{Vocabulary, N_SPECIALS, UNK};
use crate::config::Config;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// One dataset record as stored on disk: whitespace-pre-tokenized text.
/// `topic` is an optional gold cluster label carried by synthetic corpora
/// for purity evaluation; real data omits it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RawArticle {
    pub title: String,
    pub body: String,
    pub comments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<usize>,
}

/// Id-encoded article with length caps applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub title: Vec<usize>,
    pub body: Vec<usize>,
    pub comments: Vec<Vec<usize>>,
    pub gold_topic: Option<usize>,
}

/// Sparse token counts of one comment, control ids excluded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommentBoW {
    /// id -> count, all counts >= 1. Ordered map keeps iteration (and thus
    /// every reduction over a BoW) deterministic.
    pub counts: BTreeMap<usize, u32>,
}

impl CommentBoW {
    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub articles: Vec<Article>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// Total number of (article, comment) training pairs.
    pub fn n_pairs(&self) -> usize {
        self.articles.iter().map(|a| a.comments.len()).sum()
    }
}

fn encode_capped(text: &str, vocab: &Vocabulary, cap: usize) -> Vec<usize> {
    let mut ids = vocab.encode(text);
    ids.truncate(cap);
    if ids.is_empty() {
        // Degenerate text still has to produce a non-empty sequence.
        ids.push(UNK);
    }
    ids
}

/// Encodes one raw record: OOV tokens become UNK and the title/body/comment
/// sequences are truncated to the configured caps.
pub fn encode_article(raw: &RawArticle, vocab: &Vocabulary, cfg: &Config) -> Article {
    Article {
        title: encode_capped(&raw.title, vocab, cfg.max_title_len),
        body: encode_capped(&raw.body, vocab, cfg.max_body_len),
        comments: raw
            .comments
            .iter()
            .map(|c| encode_capped(c, vocab, cfg.max_comment_len))
            .collect(),
        gold_topic: raw.topic,
    }
}

/// Counts non-special ids of a comment. Control ids (and OOV already mapped
/// to UNK) are dropped, so an all-UNK comment yields an empty BoW.
pub fn comment_bow(comment: &[usize]) -> CommentBoW {
    let mut counts = BTreeMap::new();
    for &id in comment {
        if id >= N_SPECIALS {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    CommentBoW { counts }
}

/// Reads a JSONL file, reporting the 1-based line number of the first
/// malformed record. Blank lines are skipped.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::MalformedJsonl {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r).map_err(|e| Error::Ingestion(e.to_string()))?;
        writeln!(f)?;
    }
    Ok(())
}

/// Loads a stop-word file (one token per line; blank lines ignored). Stop
/// words only affect topic top-word display, never model input.
pub fn load_stop_words(path: &Path) -> Result<std::collections::HashSet<String>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = std::collections::HashSet::new();
    for line in f.lines() {
        let line = line?;
        let tok = line.trim();
        if !tok.is_empty() {
            out.insert(tok.to_string());
        }
    }
    Ok(out)
}
