//! Link recommendations from issue text.
//!
//! Two detectors feed [`recommend`]: duplicate detection ranks issues of
//! the same project by TF-IDF cosine similarity of title and description,
//! and cross-reference detection picks up issue keys mentioned in comments
//! and descriptions. Users accept or reject recommendations through
//! [`record_decision`]; rejections suppress the pair for good.

mod decisions;
mod index;
mod recommend;
mod tokenize;

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::IssueKey;

pub use decisions::{record_decision, Decision, DecisionBook};
pub use index::{SimilarityIndex, SparseVector, TITLE_WEIGHT};
pub use recommend::{
    detect_cross_references, detect_duplicates, ranked_duplicates, recommend, Evidence,
    LinkRecommendation, RecommendationState, DEFAULT_K, SIMILARITY_THRESHOLD,
};
pub use tokenize::{tokenize, STOP_WORDS};

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("issue {issue} does not belong to project {project}")]
    MixedProjects { project: String, issue: IssueKey },
    #[error("issue {0} is not in the similarity index")]
    Unindexed(IssueKey),
    #[error("unknown issue {0}")]
    UnknownIssue(IssueKey),
    #[error("recommendation {source_key} -> {candidate} was already decided")]
    AlreadyDecided {
        source_key: IssueKey,
        candidate: IssueKey,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("writing decision log: {0}")]
    Log(#[from] std::io::Error),
}
