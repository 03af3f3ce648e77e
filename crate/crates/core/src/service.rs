//! The loaded workspace behind the HTTP API and the batch CLI, plus the
//! serializable response bodies both of them emit.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{check_consistency, ConsistencyError, ConsistencyReport, Rule};
use crate::detection::{
    record_decision, recommend, Decision, DecisionBook, DetectionError, Evidence, LinkRecommendation,
    RecommendationState, SimilarityIndex, DEFAULT_K,
};
use crate::graph::{FilterError, GraphStats, GraphStore, IssueFilter, LinkGraph, Subgraph, UNBOUNDED};
use crate::ingestion::{replay, DecisionLog, DecisionSink, DumpError, IssueDump, LogError};
use crate::model::{parse_issue_key, IssueKey, IssueType, Link, LinkOrigin, LinkType, ReleaseOrder};

pub const DEFAULT_DEPTH: usize = 2;
pub const DEFAULT_MAX_DEPTH: usize = 6;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("malformed issue key {0:?}")]
    MalformedKey(String),
    #[error("unknown issue {0}")]
    UnknownIssue(IssueKey),
    #[error("depth {requested} exceeds the maximum of {max}")]
    DepthTooLarge { requested: usize, max: usize },
    #[error("invalid depth {0:?}")]
    InvalidDepth(String),
    #[error(transparent)]
    InvalidFilter(#[from] FilterError),
    #[error("decision must be \"accept\" or \"reject\", got {0:?}")]
    InvalidDecision(String),
    #[error("accepting a link requires a link type")]
    MissingLinkType,
    #[error("unknown link type {0:?}")]
    InvalidLinkType(String),
    #[error("no pending recommendation {source_key} -> {candidate}")]
    NoPendingRecommendation {
        source_key: IssueKey,
        candidate: IssueKey,
    },
    #[error("recommendation {source_key} -> {candidate} was already decided")]
    AlreadyDecided {
        source_key: IssueKey,
        candidate: IssueKey,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::MalformedKey(_) => "malformed-key",
            ServiceError::UnknownIssue(_) => "unknown-issue",
            ServiceError::DepthTooLarge { .. } => "depth-too-large",
            ServiceError::InvalidDepth(_) => "invalid-depth",
            ServiceError::InvalidFilter(_) => "invalid-filter",
            ServiceError::InvalidDecision(_) => "invalid-decision",
            ServiceError::MissingLinkType => "missing-link-type",
            ServiceError::InvalidLinkType(_) => "invalid-link-type",
            ServiceError::NoPendingRecommendation { .. } => "no-pending-recommendation",
            ServiceError::AlreadyDecided { .. } => "already-decided",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<DetectionError> for ServiceError {
    fn from(e: DetectionError) -> Self {
        match e {
            DetectionError::UnknownIssue(k) => ServiceError::UnknownIssue(k),
            DetectionError::AlreadyDecided { source_key, candidate } => {
                ServiceError::AlreadyDecided { source_key, candidate }
            }
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<ConsistencyError> for ServiceError {
    fn from(e: ConsistencyError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("building graph: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("building similarity index: {0}")]
    Index(#[from] DetectionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PriorityView {
    pub rank: u8,
    pub label: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IssueDetail {
    pub key: IssueKey,
    pub project: String,
    #[serde(rename = "type")]
    pub issue_type: IssueType,
    pub status: String,
    pub title: String,
    pub description: String,
    pub priority: PriorityView,
    pub release: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comments: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeView {
    pub key: IssueKey,
    pub title: String,
    #[serde(rename = "type")]
    pub issue_type: IssueType,
    pub status: String,
    pub priority: PriorityView,
    pub release: Option<String>,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeView {
    pub source: IssueKey,
    pub target: IssueKey,
    #[serde(rename = "type")]
    pub link_type: LinkType,
    pub origin: LinkOrigin,
}

impl From<&Link> for EdgeView {
    fn from(l: &Link) -> Self {
        Self {
            source: l.source.clone(),
            target: l.target.clone(),
            link_type: l.link_type,
            origin: l.origin,
        }
    }
}

/// Depth as sent on the wire: a number, or `null` for an unbounded scope.
fn wire_depth(depth: usize) -> Option<usize> {
    (depth != UNBOUNDED).then_some(depth)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MapResponse {
    pub center: IssueKey,
    pub depth: Option<usize>,
    pub nodes: Vec<NodeView>,
    pub edges: Vec<EdgeView>,
    pub filter: IssueFilter,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationView {
    pub source: IssueKey,
    pub candidate: IssueKey,
    pub score: f64,
    pub evidence: Evidence,
    pub evidence_detail: String,
    pub state: &'static str,
}

impl From<&LinkRecommendation> for RecommendationView {
    fn from(r: &LinkRecommendation) -> Self {
        Self {
            source: r.source.clone(),
            candidate: r.candidate.clone(),
            score: r.score,
            evidence: r.evidence,
            evidence_detail: r.evidence_detail.clone(),
            state: match r.state {
                RecommendationState::Pending => "pending",
                RecommendationState::Accepted(_) => "accepted",
                RecommendationState::Rejected => "rejected",
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViolationView {
    pub rule: Rule,
    pub link: EdgeView,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScopeNode {
    pub key: IssueKey,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsistencyView {
    pub center: IssueKey,
    pub depth: Option<usize>,
    pub consistent: bool,
    pub violations: Vec<ViolationView>,
    pub releases_in_scope: BTreeMap<String, Vec<String>>,
    pub notices: Vec<String>,
    pub scope: Vec<ScopeNode>,
    pub version: u64,
}

impl ConsistencyView {
    fn new(report: ConsistencyReport, version: u64) -> Self {
        Self {
            center: report.scope.center.clone(),
            depth: wire_depth(report.scope.depth),
            consistent: report.consistent,
            violations: report
                .violations
                .iter()
                .map(|v| ViolationView {
                    rule: v.rule,
                    link: EdgeView::from(&v.link),
                    explanation: v.explanation.clone(),
                })
                .collect(),
            releases_in_scope: report.releases_in_scope,
            notices: report.notices,
            scope: report
                .scope
                .nodes
                .iter()
                .map(|(k, d)| ScopeNode {
                    key: k.clone(),
                    distance: *d,
                })
                .collect(),
            version,
        }
    }
}

/// Body of an accept/reject request.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct DecisionRequest {
    pub decision: String,
    #[serde(rename = "type")]
    pub link_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionResponse {
    pub source: IssueKey,
    pub candidate: IssueKey,
    pub decision: &'static str,
    #[serde(rename = "type", skip_serializing_if = "Option::is_none")]
    pub link_type: Option<LinkType>,
    pub version: u64,
}

/// Graph store, similarity indices, release orders and the decision loop
/// for one loaded dump.
pub struct Workspace {
    store: GraphStore,
    orders: BTreeMap<String, ReleaseOrder>,
    indices: BTreeMap<String, SimilarityIndex>,
    book: ArcSwap<DecisionBook>,
    sink: Mutex<Box<dyn DecisionSink + Send>>,
    stats: Mutex<Option<(u64, GraphStats)>>,
    max_depth: usize,
}

pub struct Startup {
    pub workspace: Workspace,
    pub warnings: Vec<String>,
}

impl Workspace {
    /// Loads a dump, replays `decisions` on top of it and keeps logging new
    /// decisions there. Without a log path decisions stay in memory.
    pub fn open(dump: &IssueDump, decisions: Option<&Path>, max_depth: usize) -> Result<Startup, StartupError> {
        Self::load(dump, decisions, max_depth, true)
    }

    /// Like [`Workspace::open`] but never touches the log file; new
    /// decisions stay in memory.
    pub fn open_read_only(
        dump: &IssueDump,
        decisions: Option<&Path>,
        max_depth: usize,
    ) -> Result<Startup, StartupError> {
        Self::load(dump, decisions, max_depth, false)
    }

    fn load(
        dump: &IssueDump,
        decisions: Option<&Path>,
        max_depth: usize,
        writable: bool,
    ) -> Result<Startup, StartupError> {
        let (records, mut warnings) = match decisions {
            Some(path) => {
                let contents = DecisionLog::read(path)?;
                (contents.records, contents.warnings)
            }
            None => (Vec::new(), Vec::new()),
        };
        let sink: Box<dyn DecisionSink + Send> = match decisions {
            Some(path) if writable => Box::new(DecisionLog::open(path)?),
            _ => Box::new(Vec::new()),
        };
        let graph = dump.to_graph()?;
        let replayed = replay(&graph, &records);
        warnings.extend(replayed.warnings);
        let mut workspace = Self::with_sink(dump, replayed.graph, sink, max_depth)?;
        workspace.book = ArcSwap::from_pointee(replayed.book);
        Ok(Startup { workspace, warnings })
    }

    fn with_sink(
        dump: &IssueDump,
        graph: LinkGraph,
        sink: Box<dyn DecisionSink + Send>,
        max_depth: usize,
    ) -> Result<Self, StartupError> {
        let orders = dump.orders();
        let mut indices = BTreeMap::new();
        for project in orders.keys() {
            let issues = graph.issues().filter(|i| &i.project == project);
            indices.insert(project.clone(), SimilarityIndex::build(project, issues)?);
        }
        Ok(Self {
            store: GraphStore::new(graph),
            orders,
            indices,
            book: ArcSwap::from_pointee(DecisionBook::default()),
            sink: Mutex::new(sink),
            stats: Mutex::new(None),
            max_depth,
        })
    }

    pub fn snapshot(&self) -> Arc<LinkGraph> {
        self.store.snapshot()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn orders(&self) -> &BTreeMap<String, ReleaseOrder> {
        &self.orders
    }

    pub fn decision_book(&self) -> Arc<DecisionBook> {
        self.book.load_full()
    }

    fn known(&self, graph: &LinkGraph, text: &str) -> Result<IssueKey, ServiceError> {
        let key = parse_issue_key(text).map_err(|_| ServiceError::MalformedKey(text.to_string()))?;
        if graph.contains(&key) {
            Ok(key)
        } else {
            Err(ServiceError::UnknownIssue(key))
        }
    }

    fn depth(&self, depth: Option<&str>) -> Result<usize, ServiceError> {
        let depth = match depth.map(str::trim).filter(|d| !d.is_empty()) {
            None => DEFAULT_DEPTH.min(self.max_depth),
            Some(d) => d.parse::<usize>().map_err(|_| ServiceError::InvalidDepth(d.to_string()))?,
        };
        if depth > self.max_depth {
            return Err(ServiceError::DepthTooLarge {
                requested: depth,
                max: self.max_depth,
            });
        }
        Ok(depth)
    }

    pub fn issue(&self, key: &str, with_comments: bool) -> Result<IssueDetail, ServiceError> {
        let graph = self.snapshot();
        let key = self.known(&graph, key)?;
        let issue = graph.issue(&key).expect("checked");
        Ok(IssueDetail {
            key: issue.key.clone(),
            project: issue.project.clone(),
            issue_type: issue.issue_type,
            status: issue.status.clone(),
            title: issue.title.clone(),
            description: issue.description.clone(),
            priority: PriorityView {
                rank: issue.priority.rank(),
                label: issue.priority.label(),
            },
            release: issue.release.clone(),
            comments: with_comments.then(|| issue.comments.clone()),
        })
    }

    /// Depth-bounded map around `key`, narrowed by `filter`. `depth` is the
    /// raw query value, defaulting to [`DEFAULT_DEPTH`].
    pub fn map(&self, key: &str, depth: Option<&str>, filter: IssueFilter) -> Result<MapResponse, ServiceError> {
        let graph = self.snapshot();
        let key = self.known(&graph, key)?;
        let depth = self.depth(depth)?;
        let sub = graph.neighborhood(&key, depth).map_err(|e| ServiceError::Internal(e.to_string()))?;
        Ok(map_view(&graph, &filter.apply(&sub, &graph), filter))
    }

    fn pending(&self, graph: &LinkGraph, key: &IssueKey) -> Result<Vec<LinkRecommendation>, ServiceError> {
        let book = self.book.load();
        let project = &graph.issue(key).expect("checked").project;
        let index = self
            .indices
            .get(project)
            .ok_or_else(|| ServiceError::Internal(format!("no similarity index for project {project}")))?;
        Ok(recommend(key, index, graph, &book, DEFAULT_K)?)
    }

    pub fn recommendations(&self, key: &str) -> Result<Vec<RecommendationView>, ServiceError> {
        let graph = self.snapshot();
        let key = self.known(&graph, key)?;
        Ok(self.pending(&graph, &key)?.iter().map(RecommendationView::from).collect())
    }

    /// Accepts or rejects the pending recommendation `key -> candidate`.
    pub fn decide(&self, key: &str, candidate: &str, request: &DecisionRequest) -> Result<DecisionResponse, ServiceError> {
        let graph = self.snapshot();
        let source = self.known(&graph, key)?;
        let candidate = self.known(&graph, candidate)?;
        let decision = match request.decision.trim().to_ascii_lowercase().as_str() {
            "accept" => {
                let text = request
                    .link_type
                    .as_deref()
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .ok_or(ServiceError::MissingLinkType)?;
                Decision::Accept(text.parse().map_err(|_| ServiceError::InvalidLinkType(text.to_string()))?)
            }
            "reject" => Decision::Reject,
            other => return Err(ServiceError::InvalidDecision(other.to_string())),
        };
        let mut sink = self.sink.lock().unwrap_or_else(|e| e.into_inner());
        let mut book = DecisionBook::clone(&self.book.load());
        if book.decision(&source, &candidate).is_some() {
            return Err(ServiceError::AlreadyDecided {
                source_key: source,
                candidate,
            });
        }
        let graph = self.snapshot();
        let rec = self
            .pending(&graph, &source)?
            .into_iter()
            .find(|r| r.candidate == candidate)
            .ok_or_else(|| ServiceError::NoPendingRecommendation {
                source_key: source.clone(),
                candidate: candidate.clone(),
            })?;
        let after = record_decision(&rec, decision, &self.store, &mut book, sink.as_mut(), Utc::now())?;
        self.book.store(Arc::new(book));
        Ok(DecisionResponse {
            source,
            candidate,
            decision: match decision {
                Decision::Accept(_) => "accepted",
                Decision::Reject => "rejected",
            },
            link_type: match decision {
                Decision::Accept(t) => Some(t),
                Decision::Reject => None,
            },
            version: after.version(),
        })
    }

    pub fn consistency(&self, key: &str, depth: Option<&str>) -> Result<ConsistencyView, ServiceError> {
        let graph = self.snapshot();
        let key = self.known(&graph, key)?;
        let depth = self.depth(depth)?;
        let sub = graph.neighborhood(&key, depth).map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.consistency_of(&graph, &sub)
    }

    pub fn consistency_of(&self, graph: &LinkGraph, scope: &Subgraph) -> Result<ConsistencyView, ServiceError> {
        let report = check_consistency(graph, scope, &self.orders)?;
        Ok(ConsistencyView::new(report, graph.version()))
    }

    /// Consistency of every connected component with at least one link,
    /// each centered on its smallest key.
    pub fn consistency_by_component(&self) -> Result<Vec<ConsistencyView>, ServiceError> {
        let graph = self.snapshot();
        graph
            .components()
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| {
                let center = c.first().expect("non-empty component");
                let sub = graph
                    .neighborhood(center, UNBOUNDED)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                self.consistency_of(&graph, &sub)
            })
            .collect()
    }

    /// Pending recommendations of every issue that has any, keyed by issue.
    pub fn all_recommendations(&self) -> Result<BTreeMap<IssueKey, Vec<RecommendationView>>, ServiceError> {
        let graph = self.snapshot();
        let mut out = BTreeMap::new();
        for issue in graph.issues() {
            let recs = self.pending(&graph, &issue.key)?;
            if !recs.is_empty() {
                out.insert(issue.key.clone(), recs.iter().map(RecommendationView::from).collect());
            }
        }
        Ok(out)
    }

    /// Whole-graph statistics, computed once per graph version.
    pub fn stats(&self) -> GraphStats {
        let graph = self.snapshot();
        let mut cache = self.stats.lock().unwrap_or_else(|e| e.into_inner());
        match *cache {
            Some((version, stats)) if version == graph.version() => stats,
            _ => {
                let stats = graph.stats();
                *cache = Some((graph.version(), stats));
                stats
            }
        }
    }
}

pub fn map_view(graph: &LinkGraph, sub: &Subgraph, filter: IssueFilter) -> MapResponse {
    let nodes = sub
        .nodes
        .iter()
        .filter_map(|(key, distance)| {
            graph.issue(key).map(|issue| NodeView {
                key: key.clone(),
                title: issue.title.clone(),
                issue_type: issue.issue_type,
                status: issue.status.clone(),
                priority: PriorityView {
                    rank: issue.priority.rank(),
                    label: issue.priority.label(),
                },
                release: issue.release.clone(),
                distance: *distance,
            })
        })
        .collect();
    MapResponse {
        center: sub.center.clone(),
        depth: wire_depth(sub.depth),
        nodes,
        edges: sub.edges.iter().map(EdgeView::from).collect(),
        filter,
        version: graph.version(),
    }
}
