//! Deterministic shuffled batching over (article, comment) training pairs.

use super::dataset::Dataset;
use super::vocab::PAD;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One padded batch. Rows are (article, comment) pairs; every id matrix is
/// padded with [`PAD`] to the batch-local maximum length, with a parallel
/// mask that is `true` on real tokens.
#[derive(Debug, Clone)]
pub struct Batch {
    /// (article index, comment index within article) per row.
    pub pairs: Vec<(usize, usize)>,
    pub title_ids: Vec<Vec<usize>>,
    pub title_mask: Vec<Vec<bool>>,
    pub body_ids: Vec<Vec<usize>>,
    pub body_mask: Vec<Vec<bool>>,
    pub comment_ids: Vec<Vec<usize>>,
    pub comment_mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Unpadded view of one row: (title, body, comment) id slices.
    pub fn row_unpadded(&self, r: usize) -> (&[usize], &[usize], &[usize]) {
        let t = self.title_mask[r].iter().filter(|&&m| m).count();
        let b = self.body_mask[r].iter().filter(|&&m| m).count();
        let c = self.comment_mask[r].iter().filter(|&&m| m).count();
        (
            &self.title_ids[r][..t],
            &self.body_ids[r][..b],
            &self.comment_ids[r][..c],
        )
    }
}

fn pad_block(rows: Vec<Vec<usize>>) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut ids = Vec::with_capacity(rows.len());
    let mut mask = Vec::with_capacity(rows.len());
    for mut row in rows {
        let n = row.len();
        let mut m = vec![true; n];
        row.resize(width, PAD);
        m.resize(width, false);
        ids.push(row);
        mask.push(m);
    }
    (ids, mask)
}

fn make_batch(dataset: &Dataset, pairs: &[(usize, usize)]) -> Batch {
    let titles = pairs
        .iter()
        .map(|&(a, _)| dataset.articles[a].title.clone())
        .collect();
    let bodies = pairs
        .iter()
        .map(|&(a, _)| dataset.articles[a].body.clone())
        .collect();
    let comments = pairs
        .iter()
        .map(|&(a, c)| dataset.articles[a].comments[c].clone())
        .collect();
    let (title_ids, title_mask) = pad_block(titles);
    let (body_ids, body_mask) = pad_block(bodies);
    let (comment_ids, comment_mask) = pad_block(comments);
    Batch {
        pairs: pairs.to_vec(),
        title_ids,
        title_mask,
        body_ids,
        body_mask,
        comment_ids,
        comment_mask,
    }
}

/// Yields shuffled padded batches covering every (article, comment) pair
/// exactly once. The order is a pure function of `seed`.
pub fn batch_iter<'a>(
    dataset: &'a Dataset,
    batch_size: usize,
    seed: u64,
) -> impl Iterator<Item = Batch> + 'a {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut pairs: Vec<(usize, usize)> = dataset
        .articles
        .iter()
        .enumerate()
        .flat_map(|(a, art)| (0..art.comments.len()).map(move |c| (a, c)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    let n = pairs.len();
    (0..n.div_ceil(batch_size)).map(move |i| {
        let lo = i * batch_size;
        let hi = (lo + batch_size).min(n);
        make_batch(dataset, &pairs[lo..hi])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dataset::Article;

    fn toy_dataset() -> Dataset {
        let mut articles = Vec::new();
        for a in 0..5 {
            articles.push(Article {
                title: vec![4 + a],
                body: vec![4, 5, 6, 7][..a % 3 + 1].to_vec(),
                comments: (0..2).map(|c| vec![8 + a, 9 + c]).collect(),
                gold_topic: None,
            });
        }
        Dataset { articles }
    }

    #[test]
    fn remainder_batch_and_full_coverage() {
        let ds = toy_dataset(); // 10 pairs
        let batches: Vec<_> = batch_iter(&ds, 128, 0).collect();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 10);

        let batches: Vec<_> = batch_iter(&ds, 3, 0).collect();
        assert_eq!(batches.len(), 4);
        let mut seen: Vec<(usize, usize)> =
            batches.iter().flat_map(|b| b.pairs.clone()).collect();
        seen.sort_unstable();
        let mut expected: Vec<(usize, usize)> =
            (0..5).flat_map(|a| (0..2).map(move |c| (a, c))).collect();
        expected.sort_unstable();
        assert_eq!(seen, expected);
    }

    #[test]
    fn same_seed_same_order_different_seed_differs() {
        let ds = toy_dataset();
        let a: Vec<_> = batch_iter(&ds, 4, 7).flat_map(|b| b.pairs).collect();
        let b: Vec<_> = batch_iter(&ds, 4, 7).flat_map(|b| b.pairs).collect();
        let c: Vec<_> = batch_iter(&ds, 4, 8).flat_map(|b| b.pairs).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn masks_flag_padding() {
        let ds = toy_dataset();
        for batch in batch_iter(&ds, 4, 1) {
            for r in 0..batch.len() {
                for (j, &m) in batch.body_mask[r].iter().enumerate() {
                    if !m {
                        assert_eq!(batch.body_ids[r][j], PAD);
                    }
                }
                let (t, b, c) = batch.row_unpadded(r);
                let (a, ci) = batch.pairs[r];
                assert_eq!(t, &ds.articles[a].title[..]);
                assert_eq!(b, &ds.articles[a].body[..]);
                assert_eq!(c, &ds.articles[a].comments[ci][..]);
            }
        }
    }
}
