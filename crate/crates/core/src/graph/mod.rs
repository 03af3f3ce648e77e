//! Link multigraph snapshots and the queries behind issue link maps.
//!
//! A [`LinkGraph`] is an immutable value: [`LinkGraph::add_link`] returns a
//! new snapshot with a higher version and leaves the receiver untouched.
//! [`GraphStore`] installs snapshots atomically for concurrent readers.
//!
//! All traversals ignore link direction.

mod filter;
mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Issue, IssueKey, Link, LinkId, LinkType};

pub use filter::{FilterError, IssueFilter};
pub use store::GraphStore;

/// Depth that expands a map to the whole connected component.
pub const UNBOUNDED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown issue {0}")]
    UnknownIssue(IssueKey),
    #[error("issue {0} is listed twice")]
    DuplicateIssue(IssueKey),
    #[error("issue {key} is filed under project {project}, which does not match its key")]
    ProjectMismatch { key: IssueKey, project: String },
    #[error("link {link} references missing issue {missing}")]
    DanglingEndpoint { link: Link, missing: IssueKey },
    #[error("duplicate link {0}")]
    DuplicateLink(Link),
    #[error("link from {0} to itself")]
    SelfLink(IssueKey),
    #[error("issue set is not connected")]
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

/// One adjacency entry: the link seen from one of its endpoints.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Adjacent {
    pub neighbor: IssueKey,
    pub link_type: LinkType,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
pub struct LinkGraph {
    issues: Arc<BTreeMap<IssueKey, Issue>>,
    adjacency: HashMap<IssueKey, Arc<Vec<Adjacent>>>,
    links: BTreeMap<LinkId, Link>,
    version: u64,
}

/// Depth-bounded, direction-ignoring neighborhood of a center issue. Edges
/// are the induced subgraph on `nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub center: IssueKey,
    pub depth: usize,
    /// Hop distance from the center of every included issue.
    pub nodes: BTreeMap<IssueKey, usize>,
    /// Links with both endpoints in `nodes`, ordered by link identity.
    pub edges: Vec<Link>,
}

impl Subgraph {
    pub fn contains(&self, key: &IssueKey) -> bool {
        self.nodes.contains_key(key)
    }
}

impl LinkGraph {
    pub fn empty() -> Self {
        Self {
            issues: Arc::new(BTreeMap::new()),
            adjacency: HashMap::new(),
            links: BTreeMap::new(),
            version: 1,
        }
    }

    /// Builds a version-1 snapshot. Fails on dangling endpoints, duplicate
    /// links, self links, and issues whose key is not in their project.
    pub fn build(
        issues: impl IntoIterator<Item = Issue>,
        links: impl IntoIterator<Item = Link>,
    ) -> Result<Self, GraphError> {
        let mut by_key = BTreeMap::new();
        for issue in issues {
            if issue.key.project() != issue.project {
                return Err(GraphError::ProjectMismatch {
                    key: issue.key.clone(),
                    project: issue.project.clone(),
                });
            }
            let key = issue.key.clone();
            if by_key.insert(key.clone(), issue).is_some() {
                return Err(GraphError::DuplicateIssue(key));
            }
        }
        let mut graph = Self {
            adjacency: by_key
                .keys()
                .map(|k| (k.clone(), Arc::new(Vec::new())))
                .collect(),
            issues: Arc::new(by_key),
            links: BTreeMap::new(),
            version: 1,
        };
        for link in links {
            graph.insert_link(link)?;
        }
        Ok(graph)
    }

    fn insert_link(&mut self, link: Link) -> Result<(), GraphError> {
        if link.source == link.target {
            return Err(GraphError::SelfLink(link.source));
        }
        for end in [&link.source, &link.target] {
            if !self.issues.contains_key(end) {
                return Err(GraphError::DanglingEndpoint {
                    missing: end.clone(),
                    link: link.clone(),
                });
            }
        }
        let id = link.id();
        if self.links.contains_key(&id) {
            return Err(GraphError::DuplicateLink(link));
        }
        let entries = [
            (&link.source, &link.target, Direction::Out),
            (&link.target, &link.source, Direction::In),
        ];
        for (at, neighbor, direction) in entries {
            let list = self.adjacency.get_mut(at).expect("endpoint checked above");
            Arc::make_mut(list).push(Adjacent {
                neighbor: neighbor.clone(),
                link_type: link.link_type,
                direction,
            });
        }
        self.links.insert(id, link);
        Ok(())
    }

    /// Returns a new snapshot containing `link`, one version later.
    pub fn add_link(&self, link: Link) -> Result<LinkGraph, GraphError> {
        let mut next = self.clone();
        next.insert_link(link)?;
        next.version = self.version + 1;
        Ok(next)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    pub fn issue(&self, key: &IssueKey) -> Option<&Issue> {
        self.issues.get(key)
    }

    pub fn contains(&self, key: &IssueKey) -> bool {
        self.issues.contains_key(key)
    }

    /// Issues in key order.
    pub fn issues(&self) -> impl Iterator<Item = &Issue> {
        self.issues.values()
    }

    pub fn issue_count(&self) -> usize {
        self.issues.len()
    }

    /// Links in identity order.
    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn adjacency(&self, key: &IssueKey) -> &[Adjacent] {
        self.adjacency.get(key).map(|a| a.as_slice()).unwrap_or(&[])
    }

    /// Whether any link, of any type or direction, joins `a` and `b`.
    pub fn linked(&self, a: &IssueKey, b: &IssueKey) -> bool {
        self.adjacency(a).iter().any(|adj| &adj.neighbor == b)
    }

    pub fn link_between(&self, source: &IssueKey, target: &IssueKey, link_type: LinkType) -> Option<&Link> {
        let (source, target) = if !link_type.is_directed() && target < source {
            (target, source)
        } else {
            (source, target)
        };
        self.links.get(&LinkId {
            source: source.clone(),
            target: target.clone(),
            link_type,
        })
    }

    fn require(&self, key: &IssueKey) -> Result<(), GraphError> {
        if self.contains(key) {
            Ok(())
        } else {
            Err(GraphError::UnknownIssue(key.clone()))
        }
    }

    /// Breadth-first distances from `start`, limited to `depth` hops and,
    /// when given, to issues inside `within`.
    fn distances(
        &self,
        start: &IssueKey,
        depth: usize,
        within: Option<&BTreeSet<IssueKey>>,
    ) -> HashMap<IssueKey, usize> {
        let mut dist = HashMap::new();
        dist.insert(start.clone(), 0usize);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(node) = queue.pop_front() {
            let d = dist[&node];
            if d >= depth {
                continue;
            }
            for adj in self.adjacency(&node) {
                if within.is_some_and(|set| !set.contains(&adj.neighbor)) {
                    continue;
                }
                if !dist.contains_key(&adj.neighbor) {
                    dist.insert(adj.neighbor.clone(), d + 1);
                    queue.push_back(adj.neighbor.clone());
                }
            }
        }
        dist
    }

    /// Every link with both endpoints in `nodes`, in identity order.
    pub fn induced_edges<'a, I>(&self, nodes: I) -> Vec<Link>
    where
        I: IntoIterator<Item = &'a IssueKey>,
        I::IntoIter: Clone,
    {
        let nodes = nodes.into_iter();
        let set: BTreeSet<&IssueKey> = nodes.clone().collect();
        let mut edges: Vec<&Link> = Vec::new();
        for node in nodes {
            for adj in self.adjacency(node) {
                if adj.direction == Direction::Out && set.contains(&adj.neighbor) {
                    if let Some(link) = self.link_between(node, &adj.neighbor, adj.link_type) {
                        edges.push(link);
                    }
                }
            }
        }
        let mut edges: Vec<Link> = edges.into_iter().cloned().collect();
        edges.sort_by_key(Link::id);
        edges
    }

    pub fn neighborhood(&self, center: &IssueKey, depth: usize) -> Result<Subgraph, GraphError> {
        self.require(center)?;
        let nodes: BTreeMap<IssueKey, usize> = self.distances(center, depth, None).into_iter().collect();
        let edges = self.induced_edges(nodes.keys());
        Ok(Subgraph {
            center: center.clone(),
            depth,
            nodes,
            edges,
        })
    }

    pub fn connected_component(&self, key: &IssueKey) -> Result<BTreeSet<IssueKey>, GraphError> {
        self.require(key)?;
        Ok(self.distances(key, UNBOUNDED, None).into_keys().collect())
    }

    /// All connected components, ordered by their smallest key.
    pub fn components(&self) -> Vec<BTreeSet<IssueKey>> {
        let mut seen: BTreeSet<&IssueKey> = BTreeSet::new();
        let mut out = Vec::new();
        for key in self.issues.keys() {
            if seen.contains(key) {
                continue;
            }
            let component: BTreeSet<IssueKey> =
                self.distances(key, UNBOUNDED, None).into_keys().collect();
            for k in &component {
                seen.insert(self.issues.get_key_value(k).expect("component member").0);
            }
            out.push(component);
        }
        out
    }

    /// Diameter of a connected issue set: the largest shortest-hop distance
    /// over all pairs, using only links inside the set.
    pub fn longest_shortest_distance(&self, component: &BTreeSet<IssueKey>) -> Result<usize, GraphError> {
        let members: Vec<&IssueKey> = component.iter().collect();
        let index: HashMap<&IssueKey, u32> = members.iter().enumerate().map(|(i, k)| (*k, i as u32)).collect();
        let mut neighbors: Vec<Vec<u32>> = Vec::with_capacity(members.len());
        for key in &members {
            self.require(key)?;
            neighbors.push(
                self.adjacency(key)
                    .iter()
                    .filter_map(|adj| index.get(&adj.neighbor).copied())
                    .collect(),
            );
        }
        let mut dist = vec![u32::MAX; members.len()];
        let mut queue = VecDeque::with_capacity(members.len());
        let mut diameter = 0;
        for start in 0..members.len() as u32 {
            dist.fill(u32::MAX);
            dist[start as usize] = 0;
            queue.push_back(start);
            let mut reached = 1;
            while let Some(node) = queue.pop_front() {
                let d = dist[node as usize];
                diameter = diameter.max(d as usize);
                for &next in &neighbors[node as usize] {
                    if dist[next as usize] == u32::MAX {
                        dist[next as usize] = d + 1;
                        reached += 1;
                        queue.push_back(next);
                    }
                }
            }
            if reached != members.len() {
                return Err(GraphError::Disconnected);
            }
        }
        Ok(diameter)
    }

    pub fn stats(&self) -> GraphStats {
        let issues_with_links = self.adjacency.values().filter(|a| !a.is_empty()).count();
        let components = self.components();
        let largest = components
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)));
        let (largest_component, largest_component_diameter) = match largest {
            Some((_, c)) => (
                c.len(),
                self.longest_shortest_distance(c).expect("components are connected"),
            ),
            None => (0, 0),
        };
        GraphStats {
            issue_count: self.issue_count(),
            link_count: self.link_count(),
            issues_with_links,
            component_count: components.len(),
            largest_component,
            largest_component_diameter,
        }
    }
}

/// Whole-graph counts. The largest component is the biggest by size, ties
/// going to the component with the smallest key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub issue_count: usize,
    pub link_count: usize,
    pub issues_with_links: usize,
    pub component_count: usize,
    pub largest_component: usize,
    pub largest_component_diameter: usize,
}
