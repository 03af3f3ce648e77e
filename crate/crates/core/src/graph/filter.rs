use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::{LinkGraph, Subgraph};
use crate::model::{is_project_code, Issue, IssueType, Priority};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("unknown issue type {0:?}")]
    IssueType(String),
    #[error("invalid priority range {0:?}, expected a rank 0-5 or a range like 1-3")]
    Priority(String),
    #[error("invalid project code {0:?}")]
    Project(String),
}

/// Attribute predicates for narrowing a link map. Every empty field
/// accepts everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IssueFilter {
    #[serde(rename = "type", skip_serializing_if = "BTreeSet::is_empty")]
    pub types: BTreeSet<IssueType>,
    /// Inclusive rank bounds `(most urgent, least urgent)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priority: Option<(u8, u8)>,
    #[serde(rename = "release", skip_serializing_if = "BTreeSet::is_empty")]
    pub releases: BTreeSet<String>,
    #[serde(rename = "project", skip_serializing_if = "BTreeSet::is_empty")]
    pub projects: BTreeSet<String>,
    /// Case-insensitive substring of the status text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

fn list(value: Option<&str>) -> impl Iterator<Item = &str> {
    value
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

fn parse_rank(text: &str, whole: &str) -> Result<u8, FilterError> {
    text.trim()
        .parse::<i64>()
        .ok()
        .and_then(|r| Priority::new(r).ok())
        .map(Priority::rank)
        .ok_or_else(|| FilterError::Priority(whole.to_string()))
}

impl IssueFilter {
    /// Builds a filter from query-string style values: comma separated
    /// lists for types, releases and projects, and `N` or `LO-HI` ranks for
    /// priority.
    pub fn parse(
        types: Option<&str>,
        priority: Option<&str>,
        releases: Option<&str>,
        projects: Option<&str>,
        status: Option<&str>,
    ) -> Result<Self, FilterError> {
        let types = list(types)
            .map(|t| t.parse().map_err(|_| FilterError::IssueType(t.to_string())))
            .collect::<Result<_, _>>()?;
        let priority = match priority.map(str::trim).filter(|p| !p.is_empty()) {
            None => None,
            Some(p) => {
                let (lo, hi) = match p.split_once('-') {
                    Some((lo, hi)) => (parse_rank(lo, p)?, parse_rank(hi, p)?),
                    None => {
                        let r = parse_rank(p, p)?;
                        (r, r)
                    }
                };
                if lo > hi {
                    return Err(FilterError::Priority(p.to_string()));
                }
                Some((lo, hi))
            }
        };
        let projects = list(projects)
            .map(|p| {
                if is_project_code(p) {
                    Ok(p.to_string())
                } else {
                    Err(FilterError::Project(p.to_string()))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            types,
            priority,
            releases: list(releases).map(str::to_string).collect(),
            projects,
            status: status.map(str::trim).filter(|s| !s.is_empty()).map(str::to_lowercase),
        })
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn accepts(&self, issue: &Issue) -> bool {
        (self.types.is_empty() || self.types.contains(&issue.issue_type))
            && self
                .priority
                .is_none_or(|(lo, hi)| (lo..=hi).contains(&issue.priority.rank()))
            && (self.releases.is_empty()
                || issue.release.as_ref().is_some_and(|r| self.releases.contains(r)))
            && (self.projects.is_empty() || self.projects.contains(&issue.project))
            && self
                .status
                .as_ref()
                .is_none_or(|s| issue.status.to_lowercase().contains(s.as_str()))
    }

    /// Drops nodes the filter rejects, except the center. Distances keep
    /// their values from the original expansion and edges are re-induced.
    pub fn apply(&self, sub: &Subgraph, graph: &LinkGraph) -> Subgraph {
        if self.is_empty() {
            return sub.clone();
        }
        let nodes: BTreeMap<_, _> = sub
            .nodes
            .iter()
            .filter(|(key, _)| {
                *key == &sub.center || graph.issue(key).is_some_and(|issue| self.accepts(issue))
            })
            .map(|(k, d)| (k.clone(), *d))
            .collect();
        let edges = sub
            .edges
            .iter()
            .filter(|l| nodes.contains_key(&l.source) && nodes.contains_key(&l.target))
            .cloned()
            .collect();
        Subgraph {
            center: sub.center.clone(),
            depth: sub.depth,
            nodes,
            edges,
        }
    }
}
