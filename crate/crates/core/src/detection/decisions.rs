use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::{DetectionError, LinkRecommendation, RecommendationState};
use crate::graph::{GraphStore, LinkGraph};
use crate::ingestion::{DecisionKind, DecisionRecord, DecisionSink};
use crate::model::{IssueKey, Link, LinkOrigin, LinkType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept(LinkType),
    Reject,
}

/// Decisions taken so far, keyed by unordered issue pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecisionBook {
    decided: BTreeMap<(IssueKey, IssueKey), Decision>,
}

fn pair(a: &IssueKey, b: &IssueKey) -> (IssueKey, IssueKey) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl DecisionBook {
    pub fn decision(&self, a: &IssueKey, b: &IssueKey) -> Option<Decision> {
        self.decided.get(&pair(a, b)).copied()
    }

    pub fn is_rejected(&self, a: &IssueKey, b: &IssueKey) -> bool {
        self.decision(a, b) == Some(Decision::Reject)
    }

    /// Records a decision; the first decision for a pair wins.
    pub fn record(&mut self, a: &IssueKey, b: &IssueKey, decision: Decision) -> bool {
        let entry = self.decided.entry(pair(a, b));
        match entry {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(decision);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.decided.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decided.is_empty()
    }
}

/// Applies a user's decision on a pending recommendation.
///
/// Accepting adds `source -> candidate` with the chosen type and origin
/// `UserAccepted`. The decision is appended to `sink` before the new
/// snapshot is installed, so a failed write leaves the graph unchanged.
pub fn record_decision(
    rec: &LinkRecommendation,
    decision: Decision,
    store: &GraphStore,
    book: &mut DecisionBook,
    sink: &mut dyn DecisionSink,
    timestamp: DateTime<Utc>,
) -> Result<Arc<LinkGraph>, DetectionError> {
    if rec.state != RecommendationState::Pending || book.decision(&rec.source, &rec.candidate).is_some() {
        return Err(DetectionError::AlreadyDecided {
            source_key: rec.source.clone(),
            candidate: rec.candidate.clone(),
        });
    }
    let record = DecisionRecord {
        source: rec.source.clone(),
        candidate: rec.candidate.clone(),
        decision: match decision {
            Decision::Accept(_) => DecisionKind::Accepted,
            Decision::Reject => DecisionKind::Rejected,
        },
        link_type: match decision {
            Decision::Accept(t) => Some(t),
            Decision::Reject => None,
        },
        timestamp,
    };
    store.update(|graph| -> Result<_, DetectionError> {
        let next = match decision {
            Decision::Accept(link_type) => {
                let link = Link::new(
                    rec.source.clone(),
                    rec.candidate.clone(),
                    link_type,
                    LinkOrigin::UserAccepted,
                )
                .map_err(|_| crate::graph::GraphError::SelfLink(rec.source.clone()))?;
                Some(graph.add_link(link)?)
            }
            Decision::Reject => None,
        };
        sink.append(&record)?;
        Ok((next, ()))
    })?;
    book.record(&rec.source, &rec.candidate, decision);
    Ok(store.snapshot())
}
