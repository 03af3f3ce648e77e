use std::collections::{BTreeMap, HashMap};

use super::tokenize::tokenize;
use super::DetectionError;
use crate::model::{Issue, IssueKey};

/// Title tokens count this many times towards term frequency.
pub const TITLE_WEIGHT: f64 = 2.0;

/// Resolution at which similarity scores are reported and ranked.
const SCORE_RESOLUTION: f64 = 1e9;

/// Sparse vector as `(term id, weight)` pairs sorted by term id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector(Vec<(usize, f64)>);

impl SparseVector {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// TF-IDF vectors over title and description for the issues of one project.
///
/// Weights are `tf * ln(1 + N / df)` where title tokens count
/// [`TITLE_WEIGHT`] times; each vector is L2-normalized. Issues whose text has
/// no tokens get the zero vector.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    project: String,
    term_ids: HashMap<String, usize>,
    document_frequency: Vec<usize>,
    vectors: BTreeMap<IssueKey, SparseVector>,
    document_count: usize,
}

impl SimilarityIndex {
    pub fn build<'a>(
        project: &str,
        issues: impl IntoIterator<Item = &'a Issue>,
    ) -> Result<Self, DetectionError> {
        let mut term_ids: HashMap<String, usize> = HashMap::new();
        let mut document_frequency: Vec<usize> = Vec::new();
        let mut counts: Vec<(IssueKey, BTreeMap<usize, f64>)> = Vec::new();
        for issue in issues {
            if issue.project != project {
                return Err(DetectionError::MixedProjects {
                    project: project.to_string(),
                    issue: issue.key.clone(),
                });
            }
            let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
            let weighted = tokenize(&issue.title)
                .into_iter()
                .map(|t| (t, TITLE_WEIGHT))
                .chain(tokenize(&issue.description).into_iter().map(|t| (t, 1.0)));
            for (token, weight) in weighted {
                let next_id = term_ids.len();
                let id = *term_ids.entry(token).or_insert(next_id);
                if id == document_frequency.len() {
                    document_frequency.push(0);
                }
                let slot = tf.entry(id).or_insert(0.0);
                if *slot == 0.0 {
                    document_frequency[id] += 1;
                }
                *slot += weight;
            }
            counts.push((issue.key.clone(), tf));
        }
        let n = counts.len() as f64;
        let vectors = counts
            .into_iter()
            .map(|(key, tf)| {
                let mut entries: Vec<(usize, f64)> = tf
                    .into_iter()
                    .map(|(id, f)| (id, f * (1.0 + n / document_frequency[id] as f64).ln()))
                    .collect();
                let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                if norm > 0.0 {
                    entries.iter_mut().for_each(|(_, w)| *w /= norm);
                }
                (key, SparseVector(entries))
            })
            .collect();
        Ok(Self {
            project: project.to_string(),
            term_ids,
            document_frequency,
            vectors,
            document_count: n as usize,
        })
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn contains(&self, key: &IssueKey) -> bool {
        self.vectors.contains_key(key)
    }

    /// Indexed keys in key order.
    pub fn keys(&self) -> impl Iterator<Item = &IssueKey> {
        self.vectors.keys()
    }

    pub fn document_frequency(&self, term: &str) -> Option<usize> {
        self.term_ids.get(term).map(|&id| self.document_frequency[id])
    }

    /// Smoothed inverse document frequency of an indexed term.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.document_frequency(term)
            .map(|df| (1.0 + self.document_count as f64 / df as f64).ln())
    }

    /// Terms with their document frequency, sorted by term.
    pub fn vocabulary(&self) -> BTreeMap<&str, usize> {
        self.term_ids
            .iter()
            .map(|(t, &id)| (t.as_str(), self.document_frequency[id]))
            .collect()
    }

    pub fn vector(&self, key: &IssueKey) -> Result<&SparseVector, DetectionError> {
        self.vectors
            .get(key)
            .ok_or_else(|| DetectionError::Unindexed(key.clone()))
    }

    /// Term weights of an issue's vector keyed by term.
    pub fn weights(&self, key: &IssueKey) -> Result<BTreeMap<&str, f64>, DetectionError> {
        let names: HashMap<usize, &str> = self.term_ids.iter().map(|(t, &id)| (id, t.as_str())).collect();
        Ok(self
            .vector(key)?
            .entries()
            .iter()
            .map(|(id, w)| (names[id], *w))
            .collect())
    }

    /// Cosine similarity clamped to `[0, 1]` and rounded to nine decimals,
    /// so mathematically equal scores compare equal.
    pub fn similarity(&self, a: &IssueKey, b: &IssueKey) -> Result<f64, DetectionError> {
        let raw = self.vector(a)?.dot(self.vector(b)?);
        Ok((raw.clamp(0.0, 1.0) * SCORE_RESOLUTION).round() / SCORE_RESOLUTION)
    }
}
