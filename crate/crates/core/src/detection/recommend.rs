use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use super::{DecisionBook, DetectionError, SimilarityIndex};
use crate::graph::LinkGraph;
use crate::model::{Issue, IssueKey, LinkType};

/// Number of recommendations shown for an issue.
pub const DEFAULT_K: usize = 5;

/// Duplicate candidates scoring below this are not recommended.
pub const SIMILARITY_THRESHOLD: f64 = 0.3;

/// Characters of context kept on each side of a mentioned key.
const EXCERPT_CONTEXT: usize = 60;

static KEY_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[A-Z][A-Z0-9]*-[1-9][0-9]*\b").expect("valid pattern"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evidence {
    Similarity,
    CrossReference,
}

impl Evidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Evidence::Similarity => "similarity",
            Evidence::CrossReference => "cross-reference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "state", content = "type")]
pub enum RecommendationState {
    Pending,
    Accepted(LinkType),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRecommendation {
    pub source: IssueKey,
    pub candidate: IssueKey,
    pub score: f64,
    pub evidence: Evidence,
    /// Comment excerpt for cross-references, empty for similarity hits.
    pub evidence_detail: String,
    #[serde(flatten)]
    pub state: RecommendationState,
}

/// Every duplicate candidate above the threshold, best first, ties broken
/// by candidate key. Already linked issues are left out.
pub fn ranked_duplicates(
    index: &SimilarityIndex,
    source: &IssueKey,
    graph: &LinkGraph,
) -> Result<Vec<LinkRecommendation>, DetectionError> {
    index.vector(source)?;
    let mut hits = Vec::new();
    for candidate in index.keys() {
        if candidate == source || graph.linked(source, candidate) {
            continue;
        }
        let score = index.similarity(source, candidate)?;
        if score >= SIMILARITY_THRESHOLD {
            hits.push(LinkRecommendation {
                source: source.clone(),
                candidate: candidate.clone(),
                score,
                evidence: Evidence::Similarity,
                evidence_detail: String::new(),
                state: RecommendationState::Pending,
            });
        }
    }
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.candidate.cmp(&b.candidate)));
    Ok(hits)
}

pub fn detect_duplicates(
    index: &SimilarityIndex,
    source: &IssueKey,
    graph: &LinkGraph,
    k: usize,
) -> Result<Vec<LinkRecommendation>, DetectionError> {
    let mut hits = ranked_duplicates(index, source, graph)?;
    hits.truncate(k);
    Ok(hits)
}

fn excerpt(text: &str, start: usize, end: usize) -> String {
    let before: Vec<(usize, char)> = text[..start].char_indices().collect();
    let from = before
        .len()
        .checked_sub(EXCERPT_CONTEXT)
        .map_or(0, |i| before[i].0);
    let to = text[end..]
        .char_indices()
        .nth(EXCERPT_CONTEXT)
        .map_or(text.len(), |(i, _)| end + i);
    let mut out = String::new();
    if from > 0 {
        out.push('…');
    }
    out.push_str(text[from..to].trim());
    if to < text.len() {
        out.push('…');
    }
    out
}

/// Recommendations for issue keys mentioned in the comments or description
/// of `issue`, one per distinct existing, unlinked key, in key order. The
/// excerpt comes from the first mention, comments before description.
pub fn detect_cross_references(issue: &Issue, graph: &LinkGraph) -> Vec<LinkRecommendation> {
    let mut found: BTreeMap<IssueKey, String> = BTreeMap::new();
    let texts = issue
        .comments
        .iter()
        .map(String::as_str)
        .chain(std::iter::once(issue.description.as_str()));
    for text in texts {
        for m in KEY_PATTERN.find_iter(text) {
            let Ok(key) = m.as_str().parse::<IssueKey>() else {
                continue;
            };
            if key == issue.key
                || found.contains_key(&key)
                || !graph.contains(&key)
                || graph.linked(&issue.key, &key)
            {
                continue;
            }
            found.insert(key, excerpt(text, m.start(), m.end()));
        }
    }
    found
        .into_iter()
        .map(|(candidate, detail)| LinkRecommendation {
            source: issue.key.clone(),
            candidate,
            score: 1.0,
            evidence: Evidence::CrossReference,
            evidence_detail: detail,
            state: RecommendationState::Pending,
        })
        .collect()
}

/// Up to `k` pending recommendations for `source`: cross-references first,
/// then duplicate candidates by descending score. A candidate found by both
/// detectors appears once, as a cross-reference. Pairs already decided in
/// `book` are left out.
pub fn recommend(
    source: &IssueKey,
    index: &SimilarityIndex,
    graph: &LinkGraph,
    book: &DecisionBook,
    k: usize,
) -> Result<Vec<LinkRecommendation>, DetectionError> {
    let issue = graph
        .issue(source)
        .ok_or_else(|| DetectionError::UnknownIssue(source.clone()))?;
    let mut out: Vec<LinkRecommendation> = detect_cross_references(issue, graph)
        .into_iter()
        .filter(|r| book.decision(source, &r.candidate).is_none())
        .collect();
    for hit in ranked_duplicates(index, source, graph)? {
        if out.len() >= k {
            break;
        }
        if book.decision(source, &hit.candidate).is_none()
            && !out.iter().any(|r| r.candidate == hit.candidate)
        {
            out.push(hit);
        }
    }
    out.truncate(k);
    Ok(out)
}
