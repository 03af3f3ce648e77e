//! Release-plan consistency of a link map.
//!
//! Three constraints are evaluated per edge, after duplicates inherit the
//! links of their originals:
//!
//! * a child with the same or higher priority than its parent must not be
//!   assigned to a later release than the parent;
//! * a required issue must not be assigned to a later release than the issue
//!   requiring it;
//! * a required issue must not have a lower priority than the issue
//!   requiring it.
//!
//! Unscheduled issues count as later than every named release. Releases of
//! different projects are not comparable, so cross-project edges only yield
//! notices for the release constraints.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{LinkGraph, Subgraph};
use crate::model::{
    compare_priority, compare_release, Issue, IssueKey, Link, LinkOrigin, LinkType, ModelError,
    PriorityCmp, ReleaseCmp, ReleaseOrder,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsistencyError {
    #[error("issue {issue}: {source}")]
    Release {
        issue: IssueKey,
        #[source]
        source: ModelError,
    },
    #[error("scope references unknown issue {0}")]
    UnknownIssue(IssueKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    ChildRelease,
    RequiredRelease,
    RequiredPriority,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::ChildRelease => "child-release",
            Rule::RequiredRelease => "required-release",
            Rule::RequiredPriority => "required-priority",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub link: Link,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub scope: Subgraph,
    pub consistent: bool,
    /// Ordered by rule, then source key, then target key.
    pub violations: Vec<Violation>,
    /// Distinct releases of scoped issues per project, in release order.
    pub releases_in_scope: BTreeMap<String, Vec<String>>,
    /// Edges that could not be fully checked.
    pub notices: Vec<String>,
}

/// An issue together with the release order of its project.
#[derive(Debug, Clone, Copy)]
pub struct Scheduled<'a> {
    pub issue: &'a Issue,
    pub order: &'a ReleaseOrder,
}

fn release_name(issue: &Issue) -> &str {
    issue.release.as_deref().unwrap_or("unscheduled")
}

fn release_relation(a: Scheduled<'_>, b: Scheduled<'_>) -> Result<ReleaseCmp, ConsistencyError> {
    for s in [a, b] {
        if let Some(r) = &s.issue.release {
            if !s.order.contains(r) {
                return Err(ConsistencyError::Release {
                    issue: s.issue.key.clone(),
                    source: ModelError::UnknownRelease {
                        project: s.order.project().to_string(),
                        release: r.clone(),
                    },
                });
            }
        }
    }
    Ok(compare_release(
        a.issue.release.as_deref(),
        a.order,
        b.issue.release.as_deref(),
        b.order,
    )
    .expect("releases validated above"))
}

/// Child of equal or higher priority scheduled after its parent.
pub fn check_child_release(
    link: &Link,
    parent: Scheduled<'_>,
    child: Scheduled<'_>,
) -> Result<Option<Violation>, ConsistencyError> {
    let priority = compare_priority(child.issue.priority, parent.issue.priority);
    let release = release_relation(child, parent)?;
    if priority != PriorityCmp::Lower && release == ReleaseCmp::Later {
        let (p, c) = (parent.issue, child.issue);
        return Ok(Some(Violation {
            rule: Rule::ChildRelease,
            link: link.clone(),
            explanation: format!(
                "child {} ({}, {}) has the same or higher priority than parent {} ({}, {}) but is assigned to a later release",
                c.key,
                c.priority,
                release_name(c),
                p.key,
                p.priority,
                release_name(p),
            ),
        }));
    }
    Ok(None)
}

/// Required issue scheduled after, or ranked below, the issue requiring it.
pub fn check_required(
    link: &Link,
    dependent: Scheduled<'_>,
    required: Scheduled<'_>,
) -> Result<Vec<Violation>, ConsistencyError> {
    let (d, r) = (dependent.issue, required.issue);
    let mut out = Vec::new();
    if release_relation(required, dependent)? == ReleaseCmp::Later {
        out.push(Violation {
            rule: Rule::RequiredRelease,
            link: link.clone(),
            explanation: format!(
                "{} ({}) requires {}, which is assigned to a later release ({})",
                d.key,
                release_name(d),
                r.key,
                release_name(r),
            ),
        });
    }
    if compare_priority(r.priority, d.priority) == PriorityCmp::Lower {
        out.push(Violation {
            rule: Rule::RequiredPriority,
            link: link.clone(),
            explanation: format!(
                "{} ({}) requires {}, which has a lower priority ({})",
                d.key, d.priority, r.key, r.priority,
            ),
        });
    }
    Ok(out)
}

/// Copies every non-duplicate link of an original onto each of its
/// duplicates (origin `Inherited`), repeating until no new link appears so
/// that chains of duplicates inherit transitively. Links whose identity
/// already exists are not added; input links come first, unchanged.
pub fn inherit_duplicate_links(edges: &[Link]) -> Vec<Link> {
    let mut all: Vec<Link> = edges.to_vec();
    let mut ids: HashSet<_> = all.iter().map(Link::id).collect();
    loop {
        let mut incident: HashMap<&IssueKey, Vec<&Link>> = HashMap::new();
        for link in all.iter().filter(|l| l.link_type != LinkType::Duplicates) {
            incident.entry(&link.source).or_default().push(link);
            incident.entry(&link.target).or_default().push(link);
        }
        let mut fresh = Vec::new();
        for dup in all.iter().filter(|l| l.link_type == LinkType::Duplicates) {
            let (duplicate, original) = (&dup.source, &dup.target);
            for link in incident.get(original).into_iter().flatten() {
                let (source, target) = if &link.source == original {
                    (duplicate, &link.target)
                } else {
                    (&link.source, duplicate)
                };
                if source == target {
                    continue;
                }
                let inherited = Link {
                    source: source.clone(),
                    target: target.clone(),
                    link_type: link.link_type,
                    origin: LinkOrigin::Inherited,
                };
                if ids.insert(inherited.id()) {
                    fresh.push(inherited);
                }
            }
        }
        if fresh.is_empty() {
            return all;
        }
        fresh.sort_by_key(Link::id);
        all.extend(fresh);
    }
}

/// Checks every parent-child and requires edge of `scope`, including those
/// inherited through duplicates. Edges touching a project without a release
/// order are skipped with a notice.
pub fn check_consistency(
    graph: &LinkGraph,
    scope: &Subgraph,
    orders: &BTreeMap<String, ReleaseOrder>,
) -> Result<ConsistencyReport, ConsistencyError> {
    let lookup = |key: &IssueKey| graph.issue(key).ok_or_else(|| ConsistencyError::UnknownIssue(key.clone()));
    let mut notices = BTreeSet::new();
    let mut violations = Vec::new();
    for link in inherit_duplicate_links(&scope.edges) {
        if !matches!(link.link_type, LinkType::ParentChild | LinkType::Requires) {
            continue;
        }
        let (source, target) = (lookup(&link.source)?, lookup(&link.target)?);
        let (Some(source_order), Some(target_order)) = (orders.get(&source.project), orders.get(&target.project)) else {
            let project = if orders.contains_key(&source.project) {
                &target.project
            } else {
                &source.project
            };
            notices.insert(format!("skipped {link}: project {project} has no release order"));
            continue;
        };
        let source = Scheduled {
            issue: source,
            order: source_order,
        };
        let target = Scheduled {
            issue: target,
            order: target_order,
        };
        if source.issue.project != target.issue.project {
            notices.insert(format!(
                "{link}: releases of {} and {} are not comparable, release constraint not checked",
                source.issue.project, target.issue.project
            ));
        }
        match link.link_type {
            LinkType::ParentChild => violations.extend(check_child_release(&link, source, target)?),
            _ => violations.extend(check_required(&link, source, target)?),
        }
    }
    violations.sort_by(|a, b| {
        (a.rule, &a.link.source, &a.link.target).cmp(&(b.rule, &b.link.source, &b.link.target))
    });

    let mut releases_in_scope: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for key in scope.nodes.keys() {
        let issue = lookup(key)?;
        let Some(order) = orders.get(&issue.project) else {
            continue;
        };
        let list = releases_in_scope.entry(issue.project.clone()).or_default();
        if let Some(r) = &issue.release {
            if !list.contains(r) {
                list.push(r.clone());
            }
        }
        list.sort_by_key(|r| order.position(r));
    }

    Ok(ConsistencyReport {
        scope: scope.clone(),
        consistent: violations.is_empty(),
        violations,
        releases_in_scope,
        notices: notices.into_iter().collect(),
    })
}
