//! TF-IDF vectors and cosine similarity over change-log messages.

use std::collections::HashMap;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sparse vector sorted by term index.
pub type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone, Default)]
pub struct TfIdfIndex {
    vocabulary: HashMap<String, usize>,
    df: Vec<usize>,
    idf: Vec<f64>,
    docs: Vec<SparseVec>,
}

impl TfIdfIndex {
    /// Builds the index with idf(t) = ln((1 + n) / (1 + df(t))) + 1.
    pub fn build<S: AsRef<str>>(documents: &[S]) -> Self {
        let tokenized: Vec<Vec<String>> = documents.iter().map(|d| tokenize(d.as_ref())).collect();
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        for tokens in &tokenized {
            let mut seen: Vec<usize> = Vec::new();
            for t in tokens {
                let next = vocabulary.len();
                let idx = *vocabulary.entry(t.clone()).or_insert(next);
                if idx == df.len() {
                    df.push(0);
                }
                if !seen.contains(&idx) {
                    seen.push(idx);
                    df[idx] += 1;
                }
            }
        }
        let n = documents.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let mut index = Self {
            vocabulary,
            df,
            idf,
            docs: Vec::new(),
        };
        index.docs = tokenized.iter().map(|t| index.weigh(t)).collect();
        index
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.vocabulary.get(term).map_or(0, |&i| self.df[i])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    /// L2-normalized vector of `text`; terms outside the vocabulary are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVec {
        self.weigh(&tokenize(text))
    }

    fn weigh(&self, tokens: &[String]) -> SparseVec {
        let mut tf: HashMap<usize, f64> = HashMap::new();
        for t in tokens {
            if let Some(&i) = self.vocabulary.get(t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        v.sort_by_key(|&(i, _)| i);
        let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut v {
                *w /= norm;
            }
        }
        v
    }

    pub fn document(&self, i: usize) -> &SparseVec {
        &self.docs[i]
    }

    /// Cosine similarity between `text` and document `i`.
    pub fn similarity(&self, text: &str, i: usize) -> f64 {
        cosine(&self.vectorize(text), &self.docs[i])
    }

    /// Cosine similarity of two texts weighted by this index.
    pub fn similarity_texts(&self, a: &str, b: &str) -> f64 {
        cosine(&self.vectorize(a), &self.vectorize(b))
    }

    /// Highest-scoring document for `text`; ties go to the lower index.
    pub fn best_match(&self, text: &str) -> Option<(usize, f64)> {
        let q = self.vectorize(text);
        let mut best: Option<(usize, f64)> = None;
        for (i, d) in self.docs.iter().enumerate() {
            let s = cosine(&q, d);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best
    }
}

/// Dot product of two normalized sparse vectors, clamped to [0, 1].
pub fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot.clamp(0.0, 1.0)
}
